//! Exact checks on enumerated trees: the martingale has mean one, and the
//! size-biased tree law is the ordinary one reweighted by the martingale.

use cmj_trees::atlas::{enumerate_stopped_trees, verify_change_of_measure, verify_martingale_mean};
use cmj_trees::law::builtin;
use cmj_trees::malthus::{solve_malthusian, DEFAULT_TOL};
use cmj_trees::spine::build_spine_law;

fn main() {
    let law = builtin("LAW-A").unwrap();
    let alpha = solve_malthusian(&law, DEFAULT_TOL).unwrap().alpha;
    let spine = build_spine_law(&law, alpha).unwrap();

    let atlas = enumerate_stopped_trees(&law, 1).unwrap();
    for (tree, p) in atlas.entries() {
        println!("{tree:<32} {p:.6}");
    }

    for n in 1..=3 {
        let m = verify_martingale_mean(&law, alpha, n, 1e-12).unwrap();
        let c = verify_change_of_measure(&law, &spine, n, 1e-12).unwrap();
        println!(
            "n={n}: {} trees, |E N - 1| = {:.1e}, one-step {:.1e}, tree-by-tree {:.1e}, passed {}",
            c.trees,
            m.mean_deviation,
            m.one_step_deviation,
            c.max_deviation,
            m.passed && c.passed
        );
    }
}
