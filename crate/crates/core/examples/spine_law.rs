//! The size-biased law of an immortal mother and the regeneration ages
//! along her line.

use cmj_trees::law::builtin;
use cmj_trees::malthus::{solve_malthusian, DEFAULT_TOL};
use cmj_trees::replicate::replicate_rng;
use cmj_trees::spine::build_spine_law;

fn main() {
    let law = builtin("LAW-E").unwrap();
    let alpha = solve_malthusian(&law, DEFAULT_TOL).unwrap().alpha;
    let spine = build_spine_law(&law, alpha).unwrap();

    println!("alpha = {alpha:.6}");
    for e in spine.table() {
        println!("ages {:?}, immortal daughter {} -> {:.6}", spine.ages_of(e), e.rank, e.mass);
    }
    println!("litter size under the biased law: {:?}", spine.offspring_marginal());
    println!("rank of the immortal daughter:    {:?}", spine.rank_marginal());

    let mut rng = replicate_rng(11, 0);
    let ages = spine.sample_regeneration_ages(100_000, &mut rng);
    let mean = ages.iter().map(|&a| f64::from(a)).sum::<f64>() / ages.len() as f64;
    println!("mean regeneration age: sampled {mean:.4}, exact {:.4}", spine.mean_regeneration_age());
}
