//! Invariants over randomly generated laws.

use cmj_trees::law::{validate_law, OffspringPmf, RawLaw, ReproductionLaw};
use cmj_trees::malthus::{
    check_nonperiodicity, rescale_time, solve_delayed_alpha, solve_longitudinal_alpha, solve_malthusian, DEFAULT_TOL,
};
use cmj_trees::moments::{classify_xlogx, TailFamily};
use cmj_trees::replicate::replicate_rng;
use cmj_trees::spine::build_spine_law;
use cmj_trees::tree::{grow_stopped_tree, StoppedTree};
use proptest::prelude::*;

fn raw_law(max_atoms: usize, max_age: i64) -> impl Strategy<Value = RawLaw> {
    let atom = (0.05f64..1.0, prop::collection::vec(1..=max_age, 1..4));
    (0.0f64..0.6, prop::collection::vec(atom, 1..=max_atoms)).prop_map(|(p0, atoms)| {
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        RawLaw {
            p0,
            atoms: atoms
                .into_iter()
                .map(|(w, mut ages)| {
                    ages.sort_unstable();
                    ((1.0 - p0) * w / total, ages)
                })
                .collect(),
        }
    })
}

fn law() -> impl Strategy<Value = ReproductionLaw> {
    raw_law(4, 5).prop_map(|r| validate_law(&r).unwrap())
}

fn supercritical_law() -> impl Strategy<Value = ReproductionLaw> {
    law().prop_filter("supercritical", |l| l.mean_offspring() > 1.0 + 1e-6)
}

proptest! {
    #[test]
    fn canonical_form_is_a_fixed_point(l in law()) {
        prop_assert_eq!(validate_law(&l.to_raw()).unwrap(), l);
    }

    #[test]
    fn litter_means_add_up_to_the_mean(l in law()) {
        let means = l.litter_means();
        prop_assert!((means.total() - l.mean_offspring()).abs() < 1e-12);
        prop_assert!((l.offspring_marginal().mean() - l.mean_offspring()).abs() < 1e-12);
    }

    #[test]
    fn reproductive_value_two_ways(l in law(), alpha in -1.0f64..2.0) {
        let direct = l.mean_reproductive_value(alpha);
        let by_age = l.litter_means().discounted(alpha);
        prop_assert!((direct - by_age).abs() < 1e-12 * by_age.max(1.0));
    }

    #[test]
    fn reproductive_value_is_one_at_alpha(l in law()) {
        let sol = solve_malthusian(&l, DEFAULT_TOL).unwrap();
        prop_assert!((l.mean_reproductive_value(sol.alpha) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spine_marginals_agree(l in law()) {
        let sol = solve_malthusian(&l, DEFAULT_TOL).unwrap();
        let sl = build_spine_law(&l, sol.alpha).unwrap();
        let by_k: f64 = sl.offspring_marginal().iter().sum();
        let by_j: f64 = sl.rank_marginal().iter().sum();
        let regen: f64 = sl.regeneration_pmf().values().sum();
        prop_assert!((by_k - 1.0).abs() < 1e-12);
        prop_assert!((by_j - 1.0).abs() < 1e-12);
        prop_assert!((regen - 1.0).abs() < 1e-12);
        prop_assert!((sl.mean_regeneration_age() - sol.beta).abs() < 1e-10 * sol.beta.max(1.0));
        prop_assert_eq!(sl.offspring_marginal()[0], 0.0);
    }

    #[test]
    fn rescaling_removes_the_period(l in law(), d in 2u32..4) {
        let stretched = rescale_time(&l, 1).unwrap();
        prop_assert_eq!(&stretched, &l);
        let raw = l.to_raw();
        let scaled = RawLaw {
            p0: raw.p0,
            atoms: raw.atoms.iter().map(|(m, a)| (*m, a.iter().map(|x| x * i64::from(d)).collect())).collect(),
        };
        let periodic = validate_law(&scaled).unwrap();
        let period = check_nonperiodicity(&periodic);
        prop_assert_eq!(period % d, 0);
        let back = rescale_time(&periodic, d).unwrap();
        prop_assert_eq!(&back, &l);
        let a = solve_malthusian(&periodic, DEFAULT_TOL).unwrap().alpha;
        let b = solve_malthusian(&back, DEFAULT_TOL).unwrap().alpha;
        prop_assert!((a * f64::from(d) - b).abs() < 1e-9);
    }

    #[test]
    fn delayed_below_longitudinal_below_generation_rate(
        probs in prop::collection::vec(0.01f64..1.0, 2..6)
    ) {
        let total: f64 = probs.iter().sum();
        let pmf = OffspringPmf::new(probs.iter().map(|p| p / total).collect()).unwrap();
        prop_assume!(pmf.mean() > 1.01);
        let a1 = pmf.mean().ln();
        let a2 = solve_longitudinal_alpha(&pmf).unwrap();
        let a3 = solve_delayed_alpha(&pmf).unwrap();
        prop_assert!(a3 < a2 && a2 < a1, "{a3} {a2} {a1}");
    }

    #[test]
    fn moment_lattice_holds(l in supercritical_law()) {
        let r = classify_xlogx(&TailFamily::finite(l)).unwrap();
        prop_assert!(r.consistent);
        let (a, b) = (r.xi_log_nu.value().unwrap(), r.nu_log_nu.value().unwrap());
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn sampled_trees_round_trip(l in law(), n in 0u32..5, seed in any::<u64>()) {
        let t = grow_stopped_tree(&l, n, &mut replicate_rng(seed, 0)).unwrap();
        let back = StoppedTree::from_encoding(n, &t.encode()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert!(t.coming_generation().iter().all(|(_, b)| *b > n));
        prop_assert!(t.materialized().all(|(_, b, _)| b <= n));
        if n > 0 {
            let lower = t.truncate(n - 1);
            prop_assert_eq!(lower.truncate(n - 1), lower.clone());
            prop_assert!(lower.total_births() <= t.total_births());
        }
    }
}

/// A fixed corpus of 100 supercritical laws, plus the delayed tail families.
#[test]
fn lattice_over_a_corpus() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, TestRng, TestRunner};
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(Config::default().rng_algorithm));
    let strategy = supercritical_law();
    let mut checked = 0;
    while checked < 100 {
        let l = strategy.new_tree(&mut runner).unwrap().current();
        assert!(classify_xlogx(&TailFamily::finite(l)).unwrap().consistent);
        checked += 1;
    }
    for family in [
        TailFamily::delayed_zeta2(),
        TailFamily::delayed_power(1.5, 1).unwrap(),
        TailFamily::delayed_power(2.5, 3).unwrap(),
        TailFamily::delayed_zeta2_log(0.5).unwrap(),
        TailFamily::delayed_zeta2_log(3.0).unwrap(),
    ] {
        assert!(classify_xlogx(&family).unwrap().consistent, "{family}");
    }
}
