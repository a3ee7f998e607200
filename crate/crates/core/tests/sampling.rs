//! Samplers against exact atlases.

use std::collections::BTreeMap;

use cmj_trees::atlas::{enumerate_spined_trees, enumerate_stopped_trees};
use cmj_trees::law::{builtin, ReproductionLaw};
use cmj_trees::malthus::{solve_malthusian, DEFAULT_TOL};
use cmj_trees::replicate::run_replicates;
use cmj_trees::spine::{build_spine_law, SpineLaw};
use cmj_trees::stats::chi_square_gof;
use cmj_trees::tree::{grow_spined_tree, grow_stopped_tree, StoppedTree, VertexLabel};

fn spine_of(law: &ReproductionLaw) -> SpineLaw {
    let alpha = solve_malthusian(law, DEFAULT_TOL).unwrap().alpha;
    build_spine_law(law, alpha).unwrap()
}

fn fit<K: Ord>(counts: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>) -> f64 {
    assert!(counts.keys().all(|k| expected.contains_key(k)), "sampled an impossible outcome");
    let observed: Vec<u64> = expected.keys().map(|k| counts.get(k).copied().unwrap_or(0)).collect();
    let probs: Vec<f64> = expected.values().copied().collect();
    chi_square_gof(&observed, &probs, 5.0).p_value
}

fn ordinary_fit(law: &ReproductionLaw, n: u32, reps: u64, seed: u64) -> f64 {
    let atlas = enumerate_stopped_trees(law, n).unwrap();
    let expected: BTreeMap<String, f64> = atlas.entries().map(|(k, p)| (k.to_string(), p)).collect();
    let mut counts = BTreeMap::new();
    for key in run_replicates(reps, seed, |_, rng| grow_stopped_tree(law, n, rng).unwrap().encode()) {
        *counts.entry(key).or_insert(0) += 1;
    }
    fit(&counts, &expected)
}

fn spined_fit(law: &ReproductionLaw, n: u32, reps: u64, seed: u64) -> f64 {
    let sl = spine_of(law);
    let atlas = enumerate_spined_trees(&sl, n).unwrap();
    let expected: BTreeMap<(String, VertexLabel), f64> =
        atlas.entries().map(|(k, y, p)| ((k.to_string(), y.clone()), p)).collect();
    let mut counts = BTreeMap::new();
    for key in run_replicates(reps, seed, |_, rng| {
        let st = grow_spined_tree(&sl, n, rng).unwrap();
        (st.tree().encode(), st.immortal_stub())
    }) {
        *counts.entry(key).or_insert(0) += 1;
    }
    fit(&counts, &expected)
}

#[test]
fn stopped_trees_match_the_atlas() {
    let p = ordinary_fit(&builtin("LAW-A").unwrap(), 2, 20_000, 1);
    assert!(p > 0.001, "p = {p}");
    let p = ordinary_fit(&builtin("LAW-E").unwrap(), 3, 20_000, 2);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn spined_trees_match_the_atlas() {
    let p = spined_fit(&builtin("LAW-A").unwrap(), 2, 20_000, 3);
    assert!(p > 0.001, "p = {p}");
    let p = spined_fit(&builtin("LAW-E").unwrap(), 3, 20_000, 4);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn deterministic_law_has_one_tree() {
    let b = builtin("LAW-B").unwrap();
    let atlas = enumerate_stopped_trees(&b, 4).unwrap();
    assert_eq!(atlas.len(), 1);
    let sampled = run_replicates(5, 9, |_, rng| grow_stopped_tree(&b, 4, rng).unwrap().encode());
    let (only, p) = atlas.entries().next().unwrap();
    assert_eq!(p, 1.0);
    assert!(sampled.iter().all(|s| s == only));
}

/// Given the tree, the immortal stub is y with probability e^{-ασ_y}/N_n.
#[test]
fn immortal_given_tree_is_weighted_by_birth_time() {
    let law = builtin("LAW-E").unwrap();
    let sl = spine_of(&law);
    let alpha = sl.alpha();
    let n = 3;
    let mut by_tree: BTreeMap<String, BTreeMap<VertexLabel, u64>> = BTreeMap::new();
    for (tree, y) in run_replicates(40_000, 5, |_, rng| {
        let st = grow_spined_tree(&sl, n, rng).unwrap();
        (st.tree().encode(), st.immortal_stub())
    }) {
        *by_tree.entry(tree).or_default().entry(y).or_insert(0) += 1;
    }
    let mut ranked: Vec<_> = by_tree.into_iter().collect();
    ranked.sort_by_key(|(_, c)| std::cmp::Reverse(c.values().sum::<u64>()));
    let mut tested = 0;
    for (encoding, counts) in ranked.iter().take(5) {
        let tree = StoppedTree::from_encoding(n, encoding).unwrap();
        let coming = tree.coming_generation();
        if coming.len() < 2 {
            continue;
        }
        let total = tree.nerman_martingale(alpha);
        let expected: BTreeMap<VertexLabel, f64> = coming
            .into_iter()
            .map(|(y, b)| (y, (-alpha * f64::from(b)).exp() / total))
            .collect();
        let p = fit(counts, &expected);
        assert!(p > 0.001, "tree {encoding}: p = {p}");
        tested += 1;
    }
    assert!(tested >= 3);
}
