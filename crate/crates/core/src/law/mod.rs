//! Individual reproduction laws.
//!
//! A law is a finite-support distribution over lives. A life is the
//! nondecreasing list of ages at which the individual bears daughters; the
//! empty list is the childless life, carried separately as `p0`.

mod file;

pub use file::{builtin, load_law, parse_law, LawFileError, BUILTIN_NAMES};

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use smallvec::SmallVec;
use thiserror::Error;

/// Accepted deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;
/// Deviations below this are treated as round-off and renormalized away.
pub const RENORMALIZE_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("masses do not form a probability distribution: {0}")]
    NonProbability(String),
    #[error("bad bearing ages {ages:?}: {reason}")]
    BadAges { ages: Vec<i64>, reason: String },
}

/// One individual life: the ordered ages at bearing.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LifeOutcome {
    ages: SmallVec<[u32; 4]>,
}

impl LifeOutcome {
    pub fn new(ages: &[u32]) -> Result<Self, LawError> {
        let widened: Vec<i64> = ages.iter().map(|&a| i64::from(a)).collect();
        check_ages(&widened, true)?;
        Ok(Self {
            ages: SmallVec::from_slice(ages),
        })
    }

    pub fn childless() -> Self {
        Self::default()
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    /// Offspring number ν.
    pub fn offspring(&self) -> usize {
        self.ages.len()
    }

    /// Age at the `i`-th bearing (1-based). `None` stands for an infinite
    /// age: the individual never has an `i`-th daughter. `i = 0` gives 0.
    pub fn bearing_age(&self, i: usize) -> Option<u32> {
        if i == 0 {
            Some(0)
        } else {
            self.ages.get(i - 1).copied()
        }
    }

    /// τ_ν, the age at last bearing; 0 for a childless life.
    pub fn last_bearing_age(&self) -> u32 {
        self.ages.last().copied().unwrap_or(0)
    }

    /// Offspring reproductive value ξ = Σ_i e^{-α τ_i}.
    pub fn reproductive_value(&self, alpha: f64) -> f64 {
        self.ages.iter().map(|&a| (-alpha * f64::from(a)).exp()).sum()
    }
}

/// ξ for a life; free-function form of [`LifeOutcome::reproductive_value`].
pub fn reproductive_value(life: &LifeOutcome, alpha: f64) -> f64 {
    life.reproductive_value(alpha)
}

fn check_ages(ages: &[i64], allow_empty: bool) -> Result<(), LawError> {
    let bad = |reason: &str| LawError::BadAges {
        ages: ages.to_vec(),
        reason: reason.to_string(),
    };
    if ages.is_empty() && !allow_empty {
        return Err(bad("ages list is empty (childless mass belongs in p0)"));
    }
    if ages.iter().any(|&a| a < 1) {
        return Err(bad("ages must be positive integers"));
    }
    if ages.iter().any(|&a| a > i64::from(u32::MAX)) {
        return Err(bad("age out of range"));
    }
    if ages.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("ages must be nondecreasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub mass: f64,
    pub life: LifeOutcome,
}

/// Unvalidated law as it comes out of a parser or a constructor call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawLaw {
    pub p0: f64,
    pub atoms: Vec<(f64, Vec<i64>)>,
}

impl RawLaw {
    pub fn new(p0: f64, atoms: &[(f64, &[i64])]) -> Self {
        Self {
            p0,
            atoms: atoms.iter().map(|(m, a)| (*m, a.to_vec())).collect(),
        }
    }
}

/// A validated reproduction law in canonical form: atoms have distinct age
/// lists, positive mass, and are sorted lexicographically by ages.
#[derive(Debug, Clone)]
pub struct ReproductionLaw {
    p0: f64,
    atoms: Vec<Atom>,
    max_age: u32,
    sampler: Option<WeightedIndex<f64>>,
}

impl PartialEq for ReproductionLaw {
    fn eq(&self, other: &Self) -> bool {
        self.p0 == other.p0 && self.atoms == other.atoms
    }
}

/// Validates and canonicalizes a raw law.
pub fn validate_law(raw: &RawLaw) -> Result<ReproductionLaw, LawError> {
    let check_mass = |m: f64, what: &str| {
        if !(0.0..=1.0).contains(&m) {
            Err(LawError::NonProbability(format!(
                "{what} mass {m} is outside [0, 1]"
            )))
        } else {
            Ok(())
        }
    };
    check_mass(raw.p0, "p0")?;
    let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (mass, ages) in &raw.atoms {
        check_mass(*mass, "atom")?;
        check_ages(ages, false)?;
        let ages: Vec<u32> = ages.iter().map(|&a| a as u32).collect();
        *merged.entry(ages).or_insert(0.0) += mass;
    }
    let total = raw.p0 + merged.values().sum::<f64>();
    let deviation = (total - 1.0).abs();
    let scale = if deviation <= MASS_TOL {
        1.0
    } else if deviation < RENORMALIZE_LIMIT {
        1.0 / total
    } else {
        return Err(LawError::NonProbability(format!(
            "total mass is {total}, expected 1"
        )));
    };
    let atoms = merged
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(ages, mass)| Atom {
            mass: mass * scale,
            life: LifeOutcome {
                ages: SmallVec::from_vec(ages),
            },
        })
        .collect();
    Ok(ReproductionLaw::from_canonical(raw.p0 * scale, atoms))
}

impl ReproductionLaw {
    fn from_canonical(p0: f64, atoms: Vec<Atom>) -> Self {
        let max_age = atoms
            .iter()
            .map(|a| a.life.last_bearing_age())
            .max()
            .unwrap_or(0);
        let weights = std::iter::once(p0).chain(atoms.iter().map(|a| a.mass));
        let sampler = WeightedIndex::new(weights).ok();
        Self {
            p0,
            atoms,
            max_age,
            sampler,
        }
    }

    /// Convenience constructor: `ReproductionLaw::new(0.25, &[(0.75, &[1, 1])])`.
    pub fn new(p0: f64, atoms: &[(f64, &[i64])]) -> Result<Self, LawError> {
        validate_law(&RawLaw::new(p0, atoms))
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn max_age(&self) -> u32 {
        self.max_age
    }

    /// Back to raw form; `validate_law(&law.to_raw())` reproduces `law`.
    pub fn to_raw(&self) -> RawLaw {
        RawLaw {
            p0: self.p0,
            atoms: self
                .atoms
                .iter()
                .map(|a| (a.mass, a.life.ages().iter().map(|&x| i64::from(x)).collect()))
                .collect(),
        }
    }

    /// Marginal law of the offspring number.
    pub fn offspring_marginal(&self) -> OffspringPmf {
        let max_k = self.atoms.iter().map(|a| a.life.offspring()).max().unwrap_or(0);
        let mut probs = vec![0.0; max_k + 1];
        probs[0] = self.p0;
        for atom in &self.atoms {
            probs[atom.life.offspring()] += atom.mass;
        }
        OffspringPmf { probs }
    }

    /// Mean offspring number m.
    pub fn mean_offspring(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * a.life.offspring() as f64)
            .sum()
    }

    pub fn litter_means(&self) -> LitterMeans {
        let mut by_age = vec![0.0; self.max_age as usize + 1];
        for atom in &self.atoms {
            for &age in atom.life.ages() {
                by_age[age as usize] += atom.mass;
            }
        }
        LitterMeans { by_age }
    }

    /// E₀(ξ) by mixing ξ over the atoms.
    pub fn mean_reproductive_value(&self, alpha: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * a.life.reproductive_value(alpha))
            .sum()
    }

    /// Index into [`atoms`](Self::atoms) of a random life, `None` for the
    /// childless outcome.
    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        match &self.sampler {
            Some(sampler) => sampler.sample(rng).checked_sub(1),
            None => None,
        }
    }

    pub fn sample_life<R: Rng + ?Sized>(&self, rng: &mut R) -> LifeOutcome {
        match self.sample_atom(rng) {
            Some(i) => self.atoms[i].life.clone(),
            None => LifeOutcome::childless(),
        }
    }

    /// Probability of a particular life (0 if it is not in the support).
    pub fn probability_of(&self, life: &LifeOutcome) -> f64 {
        if life.offspring() == 0 {
            return self.p0;
        }
        self.atoms
            .binary_search_by(|a| a.life.cmp(life))
            .map(|i| self.atoms[i].mass)
            .unwrap_or(0.0)
    }
}

/// Offspring-number distribution, indexed by k = 0, 1, 2, ...
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringPmf {
    probs: Vec<f64>,
}

impl OffspringPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self, LawError> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(LawError::NonProbability(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() >= RENORMALIZE_LIMIT {
            return Err(LawError::NonProbability(format!(
                "total mass is {total}, expected 1"
            )));
        }
        let mut probs: Vec<f64> = probs.into_iter().map(|p| p / total).collect();
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        Ok(Self { probs })
    }

    /// Point mass at `k` offspring.
    pub fn constant(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_offspring(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Probability generating function E(x^ν).
    pub fn pgf(&self, x: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, p| acc * x + p)
    }

    /// Law where a mother bears one daughter per year for ν years.
    pub fn longitudinal_law(&self) -> ReproductionLaw {
        self.law_with_ages(|k| (1..=k as u32).collect())
    }

    /// Law where all ν daughters are born at the mother's death, at age ν.
    pub fn delayed_law(&self) -> ReproductionLaw {
        self.law_with_ages(|k| vec![k as u32; k])
    }

    /// Law where all daughters are born at age 1.
    pub fn galton_watson_law(&self) -> ReproductionLaw {
        self.law_with_ages(|k| vec![1; k])
    }

    fn law_with_ages(&self, ages: impl Fn(usize) -> Vec<u32>) -> ReproductionLaw {
        let atoms = self
            .probs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, &mass)| Atom {
                mass,
                life: LifeOutcome {
                    ages: SmallVec::from_vec(ages(k)),
                },
            })
            .collect();
        ReproductionLaw::from_canonical(self.probs[0], atoms)
    }
}

/// Mean litter numbers m_n by age.
#[derive(Debug, Clone, PartialEq)]
pub struct LitterMeans {
    // index = age; slot 0 is always zero
    by_age: Vec<f64>,
}

impl LitterMeans {
    pub fn get(&self, age: u32) -> f64 {
        self.by_age.get(age as usize).copied().unwrap_or(0.0)
    }

    /// `(n, m_n)` for every age with positive mean.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.by_age
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(n, m)| (n as u32, *m))
    }

    /// m = Σ_n m_n.
    pub fn total(&self) -> f64 {
        self.by_age.iter().sum()
    }

    /// Σ_n e^{-αn} m_n.
    pub fn discounted(&self, alpha: f64) -> f64 {
        self.support()
            .map(|(n, m)| (-alpha * f64::from(n)).exp() * m)
            .sum()
    }

    /// Σ_n n e^{-αn} m_n.
    pub fn discounted_first_moment(&self, alpha: f64) -> f64 {
        self.support()
            .map(|(n, m)| f64::from(n) * (-alpha * f64::from(n)).exp() * m)
            .sum()
    }
}
