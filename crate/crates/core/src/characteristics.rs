//! Population sums counted with individual characteristics.
//!
//! A characteristic scores an individual by her current age `k ≥ 0` and her
//! own life. The population sum at time `t` adds `χ(t − σ_x, ω_x)` over
//! everyone born by `t`. In a supercritical non-periodic population these
//! sums grow like `e^{αt}` with a constant proportional to
//! `χ̄ = Σ_k e^{-αk} E₀ χ(k)`, so ratios of two sums and one-step growth
//! factors have W-free limits.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::law::{LifeOutcome, ReproductionLaw};
use crate::malthus::{check_nonperiodicity, classify_criticality, solve_malthusian, Criticality, MalthusError, DEFAULT_TOL};
use crate::replicate::run_replicates;
use crate::stats::median;
use crate::tree::{grow_stopped_tree_capped, StoppedTree, TreeError};

/// Target bound on the truncated tail when summing χ̄.
pub const CHI_BAR_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacteristicError {
    #[error("the series for chi-bar of `{name}` diverges at alpha = {alpha}")]
    Diverges { name: String, alpha: f64 },
    #[error("unknown characteristic `{0}` (known: ever-born, newborn, alive:L)")]
    Unknown(String),
    #[error("growth estimates need a supercritical law, this one is {0}")]
    NotSupercritical(Criticality),
    #[error("law has period {0}; rescale time first")]
    Periodic(u32),
    #[error("growth estimates need a level of at least 1")]
    LevelTooSmall,
    #[error("no characteristics given")]
    NoCharacteristics,
    #[error("every replicate died out by the level")]
    AllExtinct,
    #[error(transparent)]
    Malthus(#[from] MalthusError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// How χ behaves for large ages; decides how χ̄ is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// χ(k) = 0 for every k ≥ h.
    VanishesFrom(u32),
    /// χ(k) = χ(h) for every k ≥ h.
    ConstantFrom(u32),
    /// 0 ≤ χ ≤ bound everywhere.
    Bounded(f64),
}

type ScoreFn = dyn Fn(u32, &LifeOutcome) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct Characteristic {
    name: String,
    horizon: Horizon,
    score: Arc<ScoreFn>,
}

impl fmt::Debug for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Characteristic")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl Characteristic {
    pub fn new<F>(name: impl Into<String>, horizon: Horizon, score: F) -> Self
    where
        F: Fn(u32, &LifeOutcome) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            horizon,
            score: Arc::new(score),
        }
    }

    /// 1 for everyone born, so the sum counts all births so far.
    pub fn ever_born() -> Self {
        Self::new("ever-born", Horizon::ConstantFrom(0), |_, _| 1.0)
    }

    /// 1 at age 0 only.
    pub fn newborn() -> Self {
        Self::new("newborn", Horizon::VanishesFrom(1), |k, _| f64::from(u8::from(k == 0)))
    }

    /// 1 for ages below `lifespan`.
    pub fn alive(lifespan: u32) -> Self {
        Self::new(format!("alive:{lifespan}"), Horizon::VanishesFrom(lifespan), move |k, _| {
            f64::from(u8::from(k < lifespan))
        })
    }

    /// `ever-born`, `newborn` or `alive:L`.
    pub fn parse(name: &str) -> Result<Self, CharacteristicError> {
        match name {
            "ever-born" => Ok(Self::ever_born()),
            "newborn" => Ok(Self::newborn()),
            _ => name
                .strip_prefix("alive:")
                .and_then(|l| l.parse().ok())
                .map(Self::alive)
                .ok_or_else(|| CharacteristicError::Unknown(name.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn score(&self, age: u32, life: &LifeOutcome) -> f64 {
        (self.score)(age, life)
    }

    /// E₀ χ(k).
    pub fn mean_score(&self, age: u32, law: &ReproductionLaw) -> f64 {
        let childless = if law.p0() > 0.0 {
            law.p0() * self.score(age, &LifeOutcome::childless())
        } else {
            0.0
        };
        childless
            + law
                .atoms()
                .iter()
                .map(|a| a.mass * self.score(age, &a.life))
                .sum::<f64>()
    }
}

/// X_n at the tree's own level.
pub fn population_sum(tree: &StoppedTree, chi: &Characteristic) -> f64 {
    population_sum_at(tree, chi, tree.level())
}

/// X_t for `t ≤ tree.level()`.
pub fn population_sum_at(tree: &StoppedTree, chi: &Characteristic, t: u32) -> f64 {
    assert!(t <= tree.level(), "population sum beyond the tree level");
    tree.materialized()
        .filter(|(_, birth, _)| *birth <= t)
        .map(|(_, birth, life)| chi.score(t - birth, life))
        .sum()
}

/// χ̄ = Σ_{k ≥ 0} e^{-αk} E₀ χ(k).
pub fn chi_bar(
    chi: &Characteristic,
    law: &ReproductionLaw,
    alpha: f64,
) -> Result<f64, CharacteristicError> {
    let term = |k: u32| (-alpha * f64::from(k)).exp() * chi.mean_score(k, law);
    let diverges = || CharacteristicError::Diverges {
        name: chi.name.clone(),
        alpha,
    };
    match chi.horizon {
        Horizon::VanishesFrom(h) => Ok((0..h).map(term).sum()),
        Horizon::ConstantFrom(h) => {
            let head: f64 = (0..h).map(term).sum();
            let level = chi.mean_score(h, law);
            if level == 0.0 {
                Ok(head)
            } else if alpha <= 0.0 {
                Err(diverges())
            } else {
                let ratio = (-alpha).exp();
                Ok(head + level * ratio.powf(f64::from(h)) / (1.0 - ratio))
            }
        }
        Horizon::Bounded(bound) => {
            if alpha <= 0.0 {
                return Err(diverges());
            }
            let ratio = (-alpha).exp();
            let mut sum = 0.0;
            let mut k = 0u32;
            // tail after k terms is at most bound·ratio^k / (1 − ratio)
            while bound * ratio.powf(f64::from(k)) / (1.0 - ratio) > CHI_BAR_TAIL {
                sum += term(k);
                k += 1;
            }
            Ok(sum)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub replicate: u64,
    pub survived: bool,
    /// X_n per characteristic.
    pub current: Vec<f64>,
    /// X_{n−1} per characteristic.
    pub previous: Vec<f64>,
}

impl GrowthRow {
    /// X_n / X_{n−1} for characteristic `i`.
    pub fn growth(&self, i: usize) -> Option<f64> {
        (self.previous[i] > 0.0).then(|| self.current[i] / self.previous[i])
    }

    /// X_n⁽⁰⁾ / X_n⁽ⁱ⁾.
    pub fn ratio(&self, i: usize) -> Option<f64> {
        (self.current[i] > 0.0).then(|| self.current[0] / self.current[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub level: u32,
    pub replicates: u64,
    pub survivors: usize,
    pub alpha: f64,
    pub names: Vec<String>,
    pub chi_bar: Vec<f64>,
    pub rows: Vec<GrowthRow>,
    /// Median over survivors of X_n / X_{n−1}, per characteristic.
    pub median_growth: Vec<f64>,
    /// Median over survivors of X_n⁽⁰⁾ / X_n⁽ⁱ⁾; entry 0 is 1.
    pub median_ratio: Vec<f64>,
}

impl GrowthReport {
    /// e^α, the limit of every one-step growth factor.
    pub fn expected_growth(&self) -> f64 {
        self.alpha.exp()
    }

    /// χ̄⁽⁰⁾ / χ̄⁽ⁱ⁾, the limit of the cross ratios.
    pub fn expected_ratio(&self, i: usize) -> f64 {
        self.chi_bar[0] / self.chi_bar[i]
    }
}

pub fn growth_ratio_estimate(
    law: &ReproductionLaw,
    n: u32,
    reps: u64,
    chis: &[Characteristic],
    seed: u64,
    max_vertices: usize,
) -> Result<GrowthReport, CharacteristicError> {
    if chis.is_empty() {
        return Err(CharacteristicError::NoCharacteristics);
    }
    if n == 0 {
        return Err(CharacteristicError::LevelTooSmall);
    }
    match classify_criticality(law) {
        Criticality::Supercritical => {}
        c => return Err(CharacteristicError::NotSupercritical(c)),
    }
    match check_nonperiodicity(law) {
        1 => {}
        d => return Err(CharacteristicError::Periodic(d)),
    }
    let alpha = solve_malthusian(law, DEFAULT_TOL)?.alpha;
    let chi_bar = chis
        .iter()
        .map(|c| chi_bar(c, law, alpha))
        .collect::<Result<Vec<_>, _>>()?;

    let rows = run_replicates(reps, seed, |replicate, rng| {
        let tree = grow_stopped_tree_capped(law, n, max_vertices, rng)?;
        Ok::<_, TreeError>(GrowthRow {
            replicate,
            survived: !tree.is_extinct(),
            current: chis.iter().map(|c| population_sum_at(&tree, c, n)).collect(),
            previous: chis.iter().map(|c| population_sum_at(&tree, c, n - 1)).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let survivors: Vec<&GrowthRow> = rows.iter().filter(|r| r.survived).collect();
    if survivors.is_empty() {
        return Err(CharacteristicError::AllExtinct);
    }
    let median_of = |f: &dyn Fn(&GrowthRow) -> Option<f64>| {
        let values: Vec<f64> = survivors.iter().filter_map(|r| f(r)).collect();
        median(&values).unwrap_or(f64::NAN)
    };
    let median_growth = (0..chis.len()).map(|i| median_of(&|r| r.growth(i))).collect();
    let median_ratio = (0..chis.len()).map(|i| median_of(&|r| r.ratio(i))).collect();
    Ok(GrowthReport {
        level: n,
        replicates: reps,
        survivors: survivors.len(),
        alpha,
        names: chis.iter().map(|c| c.name.clone()).collect(),
        chi_bar,
        rows,
        median_growth,
        median_ratio,
    })
}
