//! The Malthusian parameter and related quantities.
//!
//! The Malthusian parameter α is the root of
//! `f(α) = Σ_n e^{-αn} m_n − 1`, which is strictly decreasing in α. The mean
//! age at childbearing is `β = Σ_n n e^{-αn} m_n`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::law::{LitterMeans, OffspringPmf, RawLaw, ReproductionLaw, validate_law};
use crate::roots::{bisect, bracket_decreasing, newton_polish};

pub const DEFAULT_TOL: f64 = 1e-12;
/// Tolerance on |m − 1| for calling a law critical.
pub const CRITICAL_TOL: f64 = 1e-12;

const BISECTION_WIDTH: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MalthusError {
    #[error("the law has no reproduction (m = 0); the Malthusian equation has no root")]
    NoReproduction,
    #[error("solver stopped with residual {residual:e} above tolerance {tol:e}")]
    ToleranceNotReached { residual: f64, tol: f64 },
    #[error("age {age} is not divisible by {d}")]
    NotDivisible { d: u32, age: u32 },
    #[error("critical offspring law (m = 1): no root other than the trivial one")]
    Critical,
    #[error("subcritical offspring law (m = {mean}): no positive root")]
    Subcritical { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl Criticality {
    pub fn from_mean(m: f64) -> Self {
        if (m - 1.0).abs() <= CRITICAL_TOL {
            Self::Critical
        } else if m > 1.0 {
            Self::Supercritical
        } else {
            Self::Subcritical
        }
    }
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Subcritical => "subcritical",
            Self::Critical => "critical",
            Self::Supercritical => "supercritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MalthusSolution {
    pub alpha: f64,
    pub beta: f64,
    pub criticality: Criticality,
    /// |Σ e^{-αn} m_n − 1| at `alpha`.
    pub residual: f64,
    /// False only for infinite-support families where no root exists.
    pub exists: bool,
}

/// Σ_n e^{-αn} m_n − 1.
pub fn malthus_function(means: &LitterMeans, alpha: f64) -> f64 {
    means.discounted(alpha) - 1.0
}

pub fn solve_malthusian(law: &ReproductionLaw, tol: f64) -> Result<MalthusSolution, MalthusError> {
    let means = law.litter_means();
    let m = means.total();
    if m <= 0.0 {
        return Err(MalthusError::NoReproduction);
    }
    let f = |a: f64| malthus_function(&means, a);
    let (lo, hi) = bracket_decreasing(f, m.ln()).ok_or(MalthusError::NoReproduction)?;
    let alpha = bisect(f, lo, hi, BISECTION_WIDTH);
    let alpha = newton_polish(f, |a| -means.discounted_first_moment(a), alpha, lo, hi, 3);
    let residual = f(alpha).abs();
    if residual > tol {
        return Err(MalthusError::ToleranceNotReached { residual, tol });
    }
    Ok(MalthusSolution {
        alpha,
        beta: means.discounted_first_moment(alpha),
        criticality: Criticality::from_mean(m),
        residual,
        exists: true,
    })
}

pub fn classify_criticality(law: &ReproductionLaw) -> Criticality {
    Criticality::from_mean(law.mean_offspring())
}

/// The gcd of the ages n with m_n > 0. A value of 1 means the law is
/// non-periodic; 0 is returned for a law without reproduction.
pub fn check_nonperiodicity(law: &ReproductionLaw) -> u32 {
    law.litter_means().support().fold(0, |g, (n, _)| gcd(g, n))
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Divides every bearing age by `d`.
pub fn rescale_time(law: &ReproductionLaw, d: u32) -> Result<ReproductionLaw, MalthusError> {
    if d == 0 {
        return Err(MalthusError::NotDivisible { d, age: 0 });
    }
    let mut raw = RawLaw {
        p0: law.p0(),
        atoms: Vec::with_capacity(law.atoms().len()),
    };
    for atom in law.atoms() {
        let mut ages = Vec::with_capacity(atom.life.offspring());
        for &age in atom.life.ages() {
            if age % d != 0 {
                return Err(MalthusError::NotDivisible { d, age });
            }
            ages.push(i64::from(age / d));
        }
        raw.atoms.push((atom.mass, ages));
    }
    Ok(validate_law(&raw).expect("rescaling preserves validity"))
}

/// α₂ for the longitudinal process (one daughter per year for ν years):
/// `−ln x` for the root x ≠ 1 of `E(x^ν) = 2 − 1/x`.
pub fn solve_longitudinal_alpha(pmf: &OffspringPmf) -> Result<f64, MalthusError> {
    let m = pmf.mean();
    if m <= 0.0 {
        return Err(MalthusError::NoReproduction);
    }
    if Criticality::from_mean(m) == Criticality::Critical {
        return Err(MalthusError::Critical);
    }
    // convex in x, vanishing at x = 1 with slope m - 1
    let gap = |x: f64| pmf.pgf(x) - 2.0 + 1.0 / x;
    let x = if m > 1.0 {
        let mut delta = 0.5;
        while gap(1.0 - delta) >= 0.0 {
            delta *= 0.5;
            if delta < 1e-15 {
                return Err(MalthusError::Critical);
            }
        }
        let hi = 1.0 - delta;
        let mut lo = hi * 0.5;
        while gap(lo) <= 0.0 {
            lo *= 0.5;
        }
        bisect(gap, lo, hi, 1e-16)
    } else {
        let mut delta = 0.5;
        while gap(1.0 + delta) >= 0.0 {
            delta *= 0.5;
            if delta < 1e-15 {
                return Err(MalthusError::Critical);
            }
        }
        let lo = 1.0 + delta;
        let mut hi = 2.0 * lo;
        while gap(hi) <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(MalthusError::NoReproduction);
            }
        }
        bisect(gap, lo, hi, 1e-16)
    };
    Ok(-x.ln())
}

/// α₃ for the delayed process (all ν daughters born at age ν): the positive
/// root of `E(ν e^{-αν}) = 1`.
pub fn solve_delayed_alpha(pmf: &OffspringPmf) -> Result<f64, MalthusError> {
    let m = pmf.mean();
    match Criticality::from_mean(m) {
        Criticality::Critical => return Err(MalthusError::Critical),
        Criticality::Subcritical => return Err(MalthusError::Subcritical { mean: m }),
        Criticality::Supercritical => {}
    }
    let damped = |a: f64| {
        pmf.probs()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p * (-a * k as f64).exp())
            .sum::<f64>()
            - 1.0
    };
    let mut hi = m.ln().max(1e-3);
    while damped(hi) >= 0.0 {
        hi *= 2.0;
    }
    let alpha = bisect(damped, 0.0, hi, BISECTION_WIDTH);
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn law(p0: f64, atoms: &[(f64, &[i64])]) -> ReproductionLaw {
        ReproductionLaw::new(p0, atoms).unwrap()
    }

    #[test]
    fn closed_form_roots() {
        let a = solve_malthusian(&law(0.25, &[(0.75, &[1, 1])]), DEFAULT_TOL).unwrap();
        assert!((a.alpha - 1.5f64.ln()).abs() < 1e-12);
        assert!((a.beta - 1.0).abs() < 1e-12);
        assert_eq!(a.criticality, Criticality::Supercritical);

        let x = golden();
        let b = solve_malthusian(&law(0.0, &[(1.0, &[1, 2])]), DEFAULT_TOL).unwrap();
        assert!((b.alpha + x.ln()).abs() < 1e-12);
        assert!((b.beta - (x + 2.0 * x * x)).abs() < 1e-12);
        assert!((b.alpha - 0.481_211_825_1).abs() < 1e-9);
        assert!((b.beta - 1.381_966_011_2).abs() < 1e-9);

        let d = solve_malthusian(&law(0.0, &[(1.0, &[2, 2])]), DEFAULT_TOL).unwrap();
        assert!((d.alpha - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!((d.beta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn subcritical_and_critical_roots() {
        let sub = solve_malthusian(&law(0.75, &[(0.25, &[1])]), DEFAULT_TOL).unwrap();
        assert!((sub.alpha - 0.25f64.ln()).abs() < 1e-12);
        assert_eq!(sub.criticality, Criticality::Subcritical);
        let crit = solve_malthusian(&law(0.0, &[(1.0, &[1])]), DEFAULT_TOL).unwrap();
        assert!(crit.alpha.abs() < 1e-12);
        assert_eq!(crit.criticality, Criticality::Critical);
    }

    #[test]
    fn no_reproduction() {
        assert_eq!(
            solve_malthusian(&law(1.0, &[]), DEFAULT_TOL),
            Err(MalthusError::NoReproduction)
        );
    }

    #[test]
    fn criticality_classes() {
        assert_eq!(
            classify_criticality(&law(0.25, &[(0.75, &[1, 1])])),
            Criticality::Supercritical
        );
        assert_eq!(classify_criticality(&law(0.0, &[(1.0, &[1])])), Criticality::Critical);
        assert_eq!(
            classify_criticality(&law(0.75, &[(0.25, &[1])])),
            Criticality::Subcritical
        );
    }

    #[test]
    fn periods() {
        assert_eq!(check_nonperiodicity(&law(0.0, &[(1.0, &[1, 2])])), 1);
        assert_eq!(check_nonperiodicity(&law(0.0, &[(1.0, &[2, 2])])), 2);
        assert_eq!(check_nonperiodicity(&law(0.0, &[(0.5, &[2]), (0.5, &[3])])), 1);
        assert_eq!(check_nonperiodicity(&law(1.0, &[])), 0);
    }

    #[test]
    fn rescaling() {
        let d = law(0.0, &[(1.0, &[2, 2])]);
        assert_eq!(rescale_time(&d, 2).unwrap(), law(0.0, &[(1.0, &[1, 1])]));
        let b = law(0.0, &[(1.0, &[1, 2])]);
        assert_eq!(rescale_time(&b, 1).unwrap(), b);
        assert_eq!(
            rescale_time(&b, 2),
            Err(MalthusError::NotDivisible { d: 2, age: 1 })
        );
        let before = solve_malthusian(&d, DEFAULT_TOL).unwrap().alpha;
        let after = solve_malthusian(&rescale_time(&d, 2).unwrap(), DEFAULT_TOL)
            .unwrap()
            .alpha;
        assert!((after - 2.0 * before).abs() < 1e-10);
    }

    #[test]
    fn longitudinal_roots() {
        let two = OffspringPmf::constant(2);
        let a2 = solve_longitudinal_alpha(&two).unwrap();
        assert!((a2 + golden().ln()).abs() < 1e-12);
        let mixed = OffspringPmf::new(vec![0.25, 0.0, 0.75]).unwrap();
        let generic = solve_malthusian(&law(0.25, &[(0.75, &[1, 2])]), DEFAULT_TOL)
            .unwrap()
            .alpha;
        assert!((solve_longitudinal_alpha(&mixed).unwrap() - generic).abs() < 1e-10);
        assert_eq!(
            solve_longitudinal_alpha(&OffspringPmf::constant(1)),
            Err(MalthusError::Critical)
        );
    }

    #[test]
    fn longitudinal_subcritical_root_matches_generic_solver() {
        let pmf = OffspringPmf::new(vec![0.5, 0.3, 0.2]).unwrap();
        let generic = solve_malthusian(&pmf.longitudinal_law(), DEFAULT_TOL)
            .unwrap()
            .alpha;
        assert!(generic < 0.0);
        assert!((solve_longitudinal_alpha(&pmf).unwrap() - generic).abs() < 1e-10);
    }

    #[test]
    fn delayed_roots() {
        let a3 = solve_delayed_alpha(&OffspringPmf::constant(2)).unwrap();
        assert!((a3 - 2f64.ln() / 2.0).abs() < 1e-12);
        let mixed = OffspringPmf::new(vec![0.25, 0.0, 0.75]).unwrap();
        let generic = solve_malthusian(&law(0.25, &[(0.75, &[2, 2])]), DEFAULT_TOL)
            .unwrap()
            .alpha;
        assert!((solve_delayed_alpha(&mixed).unwrap() - generic).abs() < 1e-10);
        assert_eq!(
            solve_delayed_alpha(&OffspringPmf::constant(1)),
            Err(MalthusError::Critical)
        );
        assert!(matches!(
            solve_delayed_alpha(&OffspringPmf::new(vec![0.5, 0.5]).unwrap()),
            Err(MalthusError::Subcritical { .. })
        ));
    }

    #[test]
    fn growth_rates_are_ordered_for_two_children() {
        let two = OffspringPmf::constant(2);
        let a1 = 2f64.ln();
        let a2 = solve_longitudinal_alpha(&two).unwrap();
        let a3 = solve_delayed_alpha(&two).unwrap();
        assert!(a3 < a2 && a2 < a1);
    }
}
