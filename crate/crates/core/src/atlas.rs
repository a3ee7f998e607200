//! Exact enumeration of stopped trees.
//!
//! For a finite-support law every stopped tree `[T]_n` has finitely many
//! outcomes. Their probabilities follow the subtree recursion
//!
//! ```text
//! P([T]_n = t) = p_k(n₁,…,n_k) · Π_{i : n_i ≤ n} P([T]_{n−n_i} = t⁽ⁱ⁾)
//! ```
//!
//! and, for trees carrying an immortal stub `y = (j, y₋₁)`,
//!
//! ```text
//! P̂(t, y) = e^{-α n_j} p_k(n₁,…,n_k) · P̂([T̂]_{n−n_j} = (t⁽ʲ⁾, y₋₁))
//!           · Π_{i ≠ j : n_i ≤ n} P([T]_{n−n_i} = t⁽ⁱ⁾).
//! ```
//!
//! Atlases at every depth below `n` are built first and reused.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::law::ReproductionLaw;
use crate::malthus::check_nonperiodicity;
use crate::spine::SpineLaw;
use crate::stats::CompensatedSum;
use crate::tree::{SpinedTree, StoppedTree, TreeError, VertexLabel};

pub const DEFAULT_MAX_ENTRIES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtlasError {
    #[error("atlas at level {level} exceeds {limit} entries")]
    AtlasTooLarge { level: u32, limit: usize },
    #[error("law has period {period}; rescale time by {period} before verifying")]
    Periodic { period: u32 },
    #[error("law has no reproduction, so no Malthusian parameter exists")]
    NoReproduction,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// All ordinary stopped trees at one level, keyed by canonical encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeAtlas {
    level: u32,
    entries: BTreeMap<String, f64>,
}

impl TreeAtlas {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(k, &p)| (k.as_str(), p))
    }

    pub fn probability(&self, encoding: &str) -> f64 {
        self.entries.get(encoding).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().copied().sum::<CompensatedSum>().value()
    }

    pub fn trees(&self) -> impl Iterator<Item = Result<(StoppedTree, f64), TreeError>> + '_ {
        self.entries
            .iter()
            .map(|(k, &p)| StoppedTree::from_encoding(self.level, k).map(|t| (t, p)))
    }
}

/// All trees with an immortal stub at one level, keyed by
/// `(tree encoding, immortal label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinedAtlas {
    level: u32,
    entries: BTreeMap<(String, VertexLabel), f64>,
}

impl SpinedAtlas {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &VertexLabel, f64)> + '_ {
        self.entries.iter().map(|((t, y), &p)| (t.as_str(), y, p))
    }

    pub fn probability(&self, encoding: &str, y: &VertexLabel) -> f64 {
        self.entries
            .get(&(encoding.to_string(), y.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().copied().sum::<CompensatedSum>().value()
    }

    /// P̂([T]_n = t), summing over the immortal stub.
    pub fn tree_marginal(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, CompensatedSum> = BTreeMap::new();
        for ((t, _), &p) in &self.entries {
            out.entry(t.clone()).or_default().add(p);
        }
        out.into_iter().map(|(t, s)| (t, s.value())).collect()
    }
}

type Ordinary = Vec<(String, f64)>;
type Spined = Vec<(String, VertexLabel, f64)>;

fn ages_prefix(ages: &[u32]) -> String {
    let inner: Vec<String> = ages.iter().map(u32::to_string).collect();
    format!("[{}]", inner.join(","))
}

fn ordinary_levels(
    law: &ReproductionLaw,
    n: u32,
    max_entries: usize,
) -> Result<Vec<Ordinary>, AtlasError> {
    let mut levels: Vec<Ordinary> = Vec::with_capacity(n as usize + 1);
    for d in 0..=n {
        let mut out: Ordinary = Vec::new();
        if law.p0() > 0.0 {
            out.push(("[]".to_string(), law.p0()));
        }
        for atom in law.atoms() {
            let ages = atom.life.ages();
            let size: f64 = ages
                .iter()
                .map(|&a| if a <= d { levels[(d - a) as usize].len() as f64 } else { 1.0 })
                .product();
            if out.len() as f64 + size > max_entries as f64 {
                return Err(AtlasError::AtlasTooLarge {
                    level: d,
                    limit: max_entries,
                });
            }
            let mut prefix = ages_prefix(ages);
            product(&levels, d, ages, 0, &mut prefix, atom.mass, &mut out);
        }
        levels.push(out);
    }
    Ok(levels)
}

// Cartesian product over daughters `i..`, appending finished entries.
fn product(
    levels: &[Ordinary],
    d: u32,
    ages: &[u32],
    i: usize,
    prefix: &mut String,
    prob: f64,
    out: &mut Ordinary,
) {
    if i == ages.len() {
        out.push((prefix.clone(), prob));
        return;
    }
    let a = ages[i];
    let mark = prefix.len();
    if a > d {
        prefix.push('+');
        prefix.push_str(&a.to_string());
        product(levels, d, ages, i + 1, prefix, prob, out);
    } else {
        for (sub, p) in &levels[(d - a) as usize] {
            prefix.push_str(sub);
            product(levels, d, ages, i + 1, prefix, prob * p, out);
            prefix.truncate(mark);
        }
    }
    prefix.truncate(mark);
}

pub fn enumerate_stopped_trees(law: &ReproductionLaw, n: u32) -> Result<TreeAtlas, AtlasError> {
    enumerate_stopped_trees_capped(law, n, DEFAULT_MAX_ENTRIES)
}

pub fn enumerate_stopped_trees_capped(
    law: &ReproductionLaw,
    n: u32,
    max_entries: usize,
) -> Result<TreeAtlas, AtlasError> {
    let mut levels = ordinary_levels(law, n, max_entries)?;
    let top = levels.pop().expect("at least level 0");
    Ok(TreeAtlas {
        level: n,
        entries: top.into_iter().collect(),
    })
}

pub fn enumerate_spined_trees(spine_law: &SpineLaw, n: u32) -> Result<SpinedAtlas, AtlasError> {
    enumerate_spined_trees_capped(spine_law, n, DEFAULT_MAX_ENTRIES)
}

pub fn enumerate_spined_trees_capped(
    spine_law: &SpineLaw,
    n: u32,
    max_entries: usize,
) -> Result<SpinedAtlas, AtlasError> {
    let law = spine_law.base();
    let ordinary = ordinary_levels(law, n, max_entries)?;
    let mut spined: Vec<Spined> = Vec::with_capacity(n as usize + 1);
    for d in 0..=n {
        let mut out: Spined = Vec::new();
        for entry in spine_law.table() {
            let ages = spine_law.ages_of(entry);
            let j = entry.rank - 1;
            let size: f64 = ages
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    if a > d {
                        1.0
                    } else if i == j {
                        spined[(d - a) as usize].len() as f64
                    } else {
                        ordinary[(d - a) as usize].len() as f64
                    }
                })
                .product();
            if out.len() as f64 + size > max_entries as f64 {
                return Err(AtlasError::AtlasTooLarge {
                    level: d,
                    limit: max_entries,
                });
            }
            let mut job = SpinedProduct {
                ordinary: &ordinary,
                spined: &spined,
                d,
                ages,
                j,
                out: &mut out,
            };
            let mut prefix = ages_prefix(ages);
            job.run(0, &mut prefix, None, entry.mass);
        }
        spined.push(out);
    }
    let top = spined.pop().expect("at least level 0");
    Ok(SpinedAtlas {
        level: n,
        entries: top.into_iter().map(|(t, y, p)| ((t, y), p)).collect(),
    })
}

struct SpinedProduct<'a> {
    ordinary: &'a [Ordinary],
    spined: &'a [Spined],
    d: u32,
    ages: &'a [u32],
    j: usize,
    out: &'a mut Spined,
}

impl SpinedProduct<'_> {
    fn run(&mut self, i: usize, prefix: &mut String, y: Option<&VertexLabel>, prob: f64) {
        if i == self.ages.len() {
            let y = y.expect("the immortal daughter is always placed").clone();
            self.out.push((prefix.clone(), y, prob));
            return;
        }
        let a = self.ages[i];
        let rank = i as u32 + 1;
        let mark = prefix.len();
        if a > self.d {
            prefix.push('+');
            prefix.push_str(&a.to_string());
            if i == self.j {
                let y = VertexLabel::from_path(&[rank]);
                self.run(i + 1, prefix, Some(&y), prob);
            } else {
                self.run(i + 1, prefix, y, prob);
            }
        } else if i == self.j {
            let spined = self.spined;
            for (sub, rest, p) in &spined[(self.d - a) as usize] {
                prefix.push_str(sub);
                let y = rest.prepend(rank);
                self.run(i + 1, prefix, Some(&y), prob * p);
                prefix.truncate(mark);
            }
        } else {
            let ordinary = self.ordinary;
            for (sub, p) in &ordinary[(self.d - a) as usize] {
                prefix.push_str(sub);
                self.run(i + 1, prefix, y, prob * p);
                prefix.truncate(mark);
            }
        }
        prefix.truncate(mark);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeOfMeasureReport {
    pub level: u32,
    pub trees: usize,
    pub spined_entries: usize,
    pub ordinary_mass: f64,
    pub spined_mass: f64,
    /// max_t |P̂([T]_n = t) − N_n(t) P([T]_n = t)|
    pub max_deviation: f64,
    /// max_{t,y} |P̂(t, y) − e^{-ασ_y} P(t)|
    pub max_pair_deviation: f64,
    pub passed: bool,
}

fn require_aperiodic(law: &ReproductionLaw) -> Result<(), AtlasError> {
    match check_nonperiodicity(law) {
        0 => Err(AtlasError::NoReproduction),
        1 => Ok(()),
        period => Err(AtlasError::Periodic { period }),
    }
}

/// Checks `P̂([T]_n = t) = E(N_n; [T]_n = t) = N_n(t) P([T]_n = t)` for every
/// tree `t` of the atlas. The martingale value is computed from the decoded
/// tree, independently of both recursions.
pub fn verify_change_of_measure(
    law: &ReproductionLaw,
    spine_law: &SpineLaw,
    n: u32,
    tol: f64,
) -> Result<ChangeOfMeasureReport, AtlasError> {
    verify_change_of_measure_capped(law, spine_law, n, tol, DEFAULT_MAX_ENTRIES)
}

pub fn verify_change_of_measure_capped(
    law: &ReproductionLaw,
    spine_law: &SpineLaw,
    n: u32,
    tol: f64,
    max_entries: usize,
) -> Result<ChangeOfMeasureReport, AtlasError> {
    require_aperiodic(law)?;
    let alpha = spine_law.alpha();
    let atlas = enumerate_stopped_trees_capped(law, n, max_entries)?;
    let spined = enumerate_spined_trees_capped(spine_law, n, max_entries)?;
    let mut biased = spined.tree_marginal();
    let mut max_deviation: f64 = 0.0;
    for (key, p) in atlas.entries() {
        let tree = StoppedTree::from_encoding(n, key)?;
        let weighted = tree.nerman_martingale(alpha) * p;
        let hat = biased.remove(key).unwrap_or(0.0);
        max_deviation = max_deviation.max((hat - weighted).abs());
    }
    // trees seen only under the biased law
    for hat in biased.values() {
        max_deviation = max_deviation.max(hat.abs());
    }
    let mut max_pair_deviation: f64 = 0.0;
    let mut decoded: HashMap<&str, StoppedTree> = HashMap::new();
    for (key, y, hat) in spined.entries() {
        if !decoded.contains_key(key) {
            decoded.insert(key, StoppedTree::from_encoding(n, key)?);
        }
        let tree = &decoded[key];
        let dev = match tree.find(y).map(|i| tree.vertex(i)) {
            Some(v) if v.is_stub() => {
                (hat - (-alpha * f64::from(v.birth())).exp() * atlas.probability(key)).abs()
            }
            _ => hat.abs(),
        };
        max_pair_deviation = max_pair_deviation.max(dev);
    }
    let ordinary_mass = atlas.total_mass();
    let spined_mass = spined.total_mass();
    let passed = max_deviation <= tol
        && max_pair_deviation <= tol
        && (ordinary_mass - 1.0).abs() <= tol
        && (spined_mass - 1.0).abs() <= tol;
    Ok(ChangeOfMeasureReport {
        level: n,
        trees: atlas.len(),
        spined_entries: spined.len(),
        ordinary_mass,
        spined_mass,
        max_deviation,
        max_pair_deviation,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub level: u32,
    pub trees: usize,
    /// |Σ_t P(t) N_n(t) − 1|
    pub mean_deviation: f64,
    /// Trees in the level n + 1 atlas used for the one-step check.
    pub extension_trees: usize,
    /// max_t |E(N_{n+1} | [T]_n = t) − N_n(t)|
    pub one_step_deviation: f64,
    /// max_t |Σ_{t' ↦ t} P(t') − P(t)|, the consistency of the two atlases.
    pub marginal_deviation: f64,
    pub passed: bool,
}

/// Checks `E N_n = 1` and `E(N_{n+1} | [T]_n) = N_n` on exact atlases.
pub fn verify_martingale_mean(
    law: &ReproductionLaw,
    alpha: f64,
    n: u32,
    tol: f64,
) -> Result<MartingaleReport, AtlasError> {
    verify_martingale_mean_capped(law, alpha, n, tol, DEFAULT_MAX_ENTRIES)
}

pub fn verify_martingale_mean_capped(
    law: &ReproductionLaw,
    alpha: f64,
    n: u32,
    tol: f64,
    max_entries: usize,
) -> Result<MartingaleReport, AtlasError> {
    require_aperiodic(law)?;
    let atlas = enumerate_stopped_trees_capped(law, n, max_entries)?;
    let mut martingale: HashMap<&str, f64> = HashMap::with_capacity(atlas.len());
    let mut mean = CompensatedSum::default();
    for (key, p) in atlas.entries() {
        let value = StoppedTree::from_encoding(n, key)?.nerman_martingale(alpha);
        mean.add(p * value);
        martingale.insert(key, value);
    }

    let extension = enumerate_stopped_trees_capped(law, n + 1, max_entries)?;
    // per level-n tree: (Σ P(t'), Σ P(t') N_{n+1}(t'))
    let mut sums: HashMap<String, (CompensatedSum, CompensatedSum)> = HashMap::with_capacity(atlas.len());
    for (key, p) in extension.entries() {
        let tree = StoppedTree::from_encoding(n + 1, key)?;
        let value = tree.nerman_martingale(alpha);
        let s = sums.entry(tree.truncate(n).encode()).or_default();
        s.0.add(p);
        s.1.add(p * value);
    }
    let mut one_step_deviation: f64 = 0.0;
    let mut marginal_deviation: f64 = 0.0;
    for (key, p) in atlas.entries() {
        let (mass, weighted) = sums
            .remove(key)
            .map_or((0.0, 0.0), |(m, w)| (m.value(), w.value()));
        marginal_deviation = marginal_deviation.max((mass - p).abs());
        let conditional = if mass > 0.0 { weighted / mass } else { f64::NAN };
        let dev = (conditional - martingale[key]).abs();
        one_step_deviation = if dev.is_nan() { f64::INFINITY } else { one_step_deviation.max(dev) };
    }
    if !sums.is_empty() {
        marginal_deviation = f64::INFINITY;
    }
    let mean_deviation = (mean.value() - 1.0).abs();
    Ok(MartingaleReport {
        level: n,
        trees: atlas.len(),
        mean_deviation,
        extension_trees: extension.len(),
        one_step_deviation,
        marginal_deviation,
        passed: mean_deviation <= tol && one_step_deviation <= tol && marginal_deviation <= tol,
    })
}

/// Rebuilds the spined tree for an atlas entry.
pub fn spined_tree_of(level: u32, encoding: &str, y: &VertexLabel) -> Result<SpinedTree, TreeError> {
    let tree = StoppedTree::from_encoding(level, encoding)?;
    SpinedTree::from_parts(tree, y).ok_or_else(|| TreeError::BadEncoding {
        at: 0,
        reason: format!("{y} is not a coming-generation vertex"),
    })
}
