//! Reading a law from TOML, and what a bad file reports.

use cmj_trees::law::parse_law;

const GOOD: &str = r#"
p0 = 0.1

[[atoms]]
prob = 0.6
ages = [1, 2]

[[atoms]]
prob = 0.3
ages = [2, 2, 4]
"#;

const BAD: &str = r#"
p0 = 0.5

[[atoms]]
prob = 0.5
ages = [2, 0]
"#;

fn main() {
    let law = parse_law(GOOD).unwrap();
    println!("mean litter size {:.2}, oldest mother {}", law.mean_offspring(), law.max_age());
    for (age, m) in law.litter_means().support() {
        println!("  m_{age} = {m:.2}");
    }
    match parse_law(BAD) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
}
