//! Moment conditions for a finite law and for heavy-tailed delayed
//! families, where finiteness of ν log ν is not needed.

use cmj_trees::law::builtin;
use cmj_trees::moments::{classify_xlogx, MomentValue, TailFamily};

fn show(v: &MomentValue) -> String {
    match v {
        MomentValue::Finite { value, tail_bound } => format!("{value:.6} (tail < {tail_bound:.0e})"),
        MomentValue::Divergent { rule, .. } => format!("divergent: {rule}"),
    }
}

fn main() {
    let families = [
        TailFamily::finite(builtin("LAW-A").unwrap()),
        TailFamily::delayed_zeta2(),
        TailFamily::delayed_power(2.5, 1).unwrap(),
        TailFamily::delayed_zeta2_log(1.5).unwrap(),
    ];
    for f in &families {
        let r = classify_xlogx(f).unwrap();
        println!("{}  alpha {:.5}  beta {}", r.family, r.alpha, show(&r.beta));
        println!("  E xi log xi : {}", show(&r.xi_log_xi));
        println!("  E xi log nu : {}", show(&r.xi_log_nu));
        println!("  E nu log nu : {}", show(&r.nu_log_nu));
        println!("  consistent  : {}", r.consistent);
    }
}
