//! One-step growth factors and ratios of population sums settle near e^α
//! and the ratio of the χ̄ constants.

use cmj_trees::characteristics::{growth_ratio_estimate, Characteristic};
use cmj_trees::law::builtin;

fn main() {
    let law = builtin("LAW-E").unwrap();
    let chis = [Characteristic::ever_born(), Characteristic::newborn(), Characteristic::alive(3)];
    let report = growth_ratio_estimate(&law, 25, 2000, &chis, 3, 1_000_000).unwrap();

    println!("{} of {} replicates survived", report.survivors, report.replicates);
    println!("growth: expected {:.4}", report.expected_growth());
    for (i, name) in report.names.iter().enumerate() {
        println!("  {name:<10} median {:.4}", report.median_growth[i]);
    }
    for i in 1..chis.len() {
        println!(
            "{} / {}: median {:.4}, expected {:.4}",
            report.names[0],
            report.names[i],
            report.median_ratio[i],
            report.expected_ratio(i)
        );
    }
}
