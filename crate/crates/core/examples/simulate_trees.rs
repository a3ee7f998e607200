//! Grow stopped trees, print one in its canonical encoding and estimate the
//! mean of the martingale over many replicates.

use cmj_trees::law::builtin;
use cmj_trees::malthus::{solve_malthusian, DEFAULT_TOL};
use cmj_trees::replicate::{replicate_rng, run_replicates};
use cmj_trees::stats::mean_and_standard_error;
use cmj_trees::tree::grow_stopped_tree;

fn main() {
    let law = builtin("LAW-A").unwrap();
    let alpha = solve_malthusian(&law, DEFAULT_TOL).unwrap().alpha;

    let tree = grow_stopped_tree(&law, 3, &mut replicate_rng(1, 0)).unwrap();
    println!("a tree stopped at 3: {}", tree.encode());
    for (label, birth) in tree.coming_generation() {
        println!("  coming vertex {label} born at {birth}");
    }
    println!("  N_3 = {:.6}", tree.nerman_martingale(alpha));

    let values = run_replicates(20_000, 2024, |_, rng| {
        grow_stopped_tree(&law, 10, rng).unwrap().nerman_martingale(alpha)
    });
    let (mean, se) = mean_and_standard_error(&values);
    let extinct = values.iter().filter(|&&v| v == 0.0).count();
    println!("N_10 over {} trees: mean {mean:.4} +- {se:.4}, {extinct} extinct", values.len());
}
