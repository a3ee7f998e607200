//! Size-biased lives of immortal individuals.
//!
//! An immortal mother with life `(n₁,…,n_k)` whose `j`-th daughter carries
//! the immortal lineage on has probability `e^{-α n_j} p_k(n₁,…,n_k)`. At
//! the Malthusian α these masses sum to one.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::law::{LifeOutcome, ReproductionLaw};

/// Largest accepted |Σ e^{-αn} m_n − 1| when building a spine law.
pub const MALTHUS_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpineError {
    #[error("alpha = {alpha} is not Malthusian for this law (residual {residual:e})")]
    NotMalthusian { alpha: f64, residual: f64 },
    #[error("rank {rank} exceeds offspring number {offspring}")]
    RankOutOfRange { rank: usize, offspring: usize },
}

/// A life together with the rank of the immortal daughter (0 = mortal).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpineLife {
    rank: usize,
    life: LifeOutcome,
}

impl SpineLife {
    pub fn new(rank: usize, life: LifeOutcome) -> Result<Self, SpineError> {
        if rank > life.offspring() {
            return Err(SpineError::RankOutOfRange {
                rank,
                offspring: life.offspring(),
            });
        }
        Ok(Self { rank, life })
    }

    pub fn mortal(life: LifeOutcome) -> Self {
        Self { rank: 0, life }
    }

    /// γ: rank of the immortal daughter, 0 for a mortal life.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn life(&self) -> &LifeOutcome {
        &self.life
    }

    pub fn is_immortal(&self) -> bool {
        self.rank > 0
    }

    /// τ_γ, the age at which the immortal daughter is born.
    pub fn regeneration_age(&self) -> Option<u32> {
        if self.rank == 0 {
            None
        } else {
            self.life.bearing_age(self.rank)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineEntry {
    /// Index into the base law's atoms.
    pub atom: usize,
    /// Rank j of the immortal daughter, 1-based.
    pub rank: usize,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct SpineLaw {
    base: ReproductionLaw,
    alpha: f64,
    entries: Vec<SpineEntry>,
    regeneration: BTreeMap<u32, f64>,
    sampler: WeightedIndex<f64>,
}

pub fn build_spine_law(law: &ReproductionLaw, alpha: f64) -> Result<SpineLaw, SpineError> {
    let means = law.litter_means();
    let residual = (means.discounted(alpha) - 1.0).abs();
    if residual.is_nan() || residual >= MALTHUS_GUARD {
        return Err(SpineError::NotMalthusian { alpha, residual });
    }
    let mut entries = Vec::new();
    for (atom, a) in law.atoms().iter().enumerate() {
        for (i, &age) in a.life.ages().iter().enumerate() {
            entries.push(SpineEntry {
                atom,
                rank: i + 1,
                mass: (-alpha * f64::from(age)).exp() * a.mass,
            });
        }
    }
    let regeneration = means
        .support()
        .map(|(n, m)| (n, (-alpha * f64::from(n)).exp() * m))
        .collect();
    let sampler = WeightedIndex::new(entries.iter().map(|e| e.mass))
        .map_err(|_| SpineError::NotMalthusian { alpha, residual })?;
    Ok(SpineLaw {
        base: law.clone(),
        alpha,
        entries,
        regeneration,
        sampler,
    })
}

impl SpineLaw {
    pub fn base(&self) -> &ReproductionLaw {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// All `(atom, j)` cells with their size-biased mass, ordered by atom
    /// then rank.
    pub fn table(&self) -> &[SpineEntry] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub fn ages_of(&self, entry: &SpineEntry) -> &[u32] {
        self.base.atoms()[entry.atom].life.ages()
    }

    /// Mass p̂_{k,j}(ages) of a given life and rank.
    pub fn probability(&self, life: &LifeOutcome, rank: usize) -> f64 {
        if rank == 0 || rank > life.offspring() {
            return 0.0;
        }
        let p = self.base.probability_of(life);
        (-self.alpha * f64::from(life.ages()[rank - 1])).exp() * p
    }

    /// p̂_k, indexed by k.
    pub fn offspring_marginal(&self) -> Vec<f64> {
        let max_k = self
            .base
            .atoms()
            .iter()
            .map(|a| a.life.offspring())
            .max()
            .unwrap_or(0);
        let mut pmf = vec![0.0; max_k + 1];
        for e in &self.entries {
            pmf[self.base.atoms()[e.atom].life.offspring()] += e.mass;
        }
        pmf
    }

    /// p̃_j, indexed by j (slot 0 is zero).
    pub fn rank_marginal(&self) -> Vec<f64> {
        let max_j = self.entries.iter().map(|e| e.rank).max().unwrap_or(0);
        let mut pmf = vec![0.0; max_j + 1];
        for e in &self.entries {
            pmf[e.rank] += e.mass;
        }
        pmf
    }

    /// P̂(τ_γ = n) = e^{-αn} m_n.
    pub fn regeneration_pmf(&self) -> &BTreeMap<u32, f64> {
        &self.regeneration
    }

    /// Σ n P̂(τ_γ = n), the mean age at childbearing β.
    pub fn mean_regeneration_age(&self) -> f64 {
        self.regeneration
            .iter()
            .map(|(&n, &p)| f64::from(n) * p)
            .sum()
    }

    /// Index into [`table`](Self::table) of a random immortal life.
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> &SpineEntry {
        &self.entries[self.sampler.sample(rng)]
    }

    pub fn sample_spine_life<R: Rng + ?Sized>(&self, rng: &mut R) -> SpineLife {
        let e = self.sample_entry(rng);
        SpineLife {
            rank: e.rank,
            life: self.base.atoms()[e.atom].life.clone(),
        }
    }

    /// Regeneration ages of `count` consecutive immortals, i.e. the
    /// interarrival times along the immortal lineage.
    pub fn sample_regeneration_ages<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<u32> {
        (0..count)
            .map(|_| {
                let e = self.sample_entry(rng);
                self.ages_of(e)[e.rank - 1]
            })
            .collect()
    }
}
