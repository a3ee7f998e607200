//! Malthusian parameters of the built-in laws, and the three ways of
//! turning one litter-size law into a population with overlapping
//! generations.

use cmj_trees::law::{builtin, OffspringPmf, BUILTIN_NAMES};
use cmj_trees::malthus::{check_nonperiodicity, solve_delayed_alpha, solve_longitudinal_alpha, solve_malthusian, DEFAULT_TOL};

fn main() {
    println!("{:<6} {:>10} {:>10} {:>15} {:>6}", "law", "alpha", "beta", "criticality", "period");
    for name in BUILTIN_NAMES {
        let law = builtin(name).unwrap();
        let sol = solve_malthusian(&law, DEFAULT_TOL).unwrap();
        println!(
            "{name:<6} {:>10.7} {:>10.7} {:>15} {:>6}",
            sol.alpha,
            sol.beta,
            sol.criticality.to_string(),
            check_nonperiodicity(&law)
        );
    }

    // every mother has exactly two daughters
    let two = OffspringPmf::constant(2);
    let gw = solve_malthusian(&two.galton_watson_law(), DEFAULT_TOL).unwrap().alpha;
    let longitudinal = solve_longitudinal_alpha(&two).unwrap();
    let delayed = solve_delayed_alpha(&two).unwrap();
    println!();
    println!("litter size 2, all at age 1:       alpha = {gw:.4}");
    println!("litter size 2, one per year:       alpha = {longitudinal:.4}");
    println!("litter size 2, all at age 2:       alpha = {delayed:.4}");
}
