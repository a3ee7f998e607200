//! A characteristic that depends on the individual's own life: the number
//! of daughters she has yet to bear.

use cmj_trees::characteristics::{chi_bar, population_sum, Characteristic, Horizon};
use cmj_trees::law::builtin;
use cmj_trees::malthus::{solve_malthusian, DEFAULT_TOL};
use cmj_trees::replicate::replicate_rng;
use cmj_trees::tree::grow_stopped_tree;

fn main() {
    let law = builtin("LAW-E").unwrap();
    let alpha = solve_malthusian(&law, DEFAULT_TOL).unwrap().alpha;
    let pending = Characteristic::new("pending", Horizon::VanishesFrom(law.max_age()), |age, life| {
        life.ages().iter().filter(|&&a| a > age).count() as f64
    });
    let ever = Characteristic::ever_born();

    let tree = grow_stopped_tree(&law, 30, &mut replicate_rng(5, 0)).unwrap();
    if tree.is_extinct() {
        println!("this population died out; try another seed");
        return;
    }
    let (p, e) = (population_sum(&tree, &pending), population_sum(&tree, &ever));
    println!("pending daughters {p}, ever born {e}");
    println!(
        "ratio {:.4}, limit {:.4}",
        p / e,
        chi_bar(&pending, &law, alpha).unwrap() / chi_bar(&ever, &law, alpha).unwrap()
    );
}
