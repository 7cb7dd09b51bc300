mod common;

use std::collections::BTreeSet;

use common::*;
use crn_core::balance::{balance_report, solve_complex_balanced_equilibrium, DEFAULT_TOL};
use crn_core::io::{read_distribution_csv, write_distribution_csv};
use crn_core::state_space::{irreducible_components, reachable_set};
use crn_core::stationary::{master_equation_report, product_form_on, restricted_stationary_solve};
use crn_core::structure::{analyze_structure, subnetwork_deficiency_check};
use crn_core::{parse_network, to_crn_string, tv_distance, FiniteDistribution, Region, State, StateBox};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cap_for(n: usize) -> u32 {
    match n {
        1 => 12,
        2 => 6,
        _ => 4,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_format_round_trips(seed in any::<u64>()) {
        let sys = random_network(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = parse_network(&to_crn_string(&sys)).unwrap();
        prop_assert_eq!(back, sys);
    }

    #[test]
    fn deficiency_is_monotone_under_subnetworks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_network(&mut rng);
        let net = sys.network();
        let r = analyze_structure(net);
        prop_assert_eq!(r.delta + r.s, r.m - r.ell);
        let subset: Vec<usize> = (0..net.n_reactions()).filter(|_| rng.random_bool(0.5)).collect();
        let cmp = subnetwork_deficiency_check(net, &subset);
        prop_assert!(cmp.ok && cmp.subnetwork <= cmp.parent);
    }

    #[test]
    fn components_and_transients_partition_the_box(seed in any::<u64>()) {
        let sys = random_network(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = sys.network();
        let bounds = StateBox::uniform(net.n_species(), cap_for(net.n_species()));
        let report = irreducible_components(net, &Region::Box(bounds.clone())).unwrap();
        let mut seen = BTreeSet::new();
        for comp in &report.components {
            for x in &comp.states {
                prop_assert!(seen.insert(x.clone()), "{:?} listed twice", x);
            }
        }
        for x in &report.transient {
            prop_assert!(seen.insert(x.clone()), "{:?} listed twice", x);
        }
        let all: BTreeSet<State> = bounds.states().collect();
        prop_assert_eq!(seen, all);
        for comp in report.components.iter().filter(|c| !c.truncated) {
            let reach = reachable_set(net, &comp.states[0], &bounds).unwrap();
            let members: BTreeSet<State> = comp.states.iter().cloned().collect();
            prop_assert_eq!(reach.states, members);
        }
    }

    #[test]
    fn complex_balanced_product_form_solves_master_equation(seed in any::<u64>()) {
        let sys = random_weakly_reversible_deficiency_zero(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = solve_complex_balanced_equilibrium(&sys, DEFAULT_TOL).unwrap().unwrap();
        prop_assert!(balance_report(&sys, &c, DEFAULT_TOL).is_complex_balanced);
        let net = sys.network();
        let bounds = StateBox::uniform(net.n_species(), cap_for(net.n_species()));
        let report = irreducible_components(net, &Region::Box(bounds)).unwrap();
        for comp in report.components.iter().filter(|c| !c.truncated && c.len() <= 400) {
            let pi = product_form_on(&c, None, &comp.states).unwrap();
            prop_assert!(master_equation_report(&sys, &pi).unwrap().within(1e-10));
        }
    }

    #[test]
    fn tv_distance_is_a_metric_on_examples(p in proptest::collection::vec(0.01f64..1.0, 1..8), q in proptest::collection::vec(0.01f64..1.0, 1..8)) {
        let dist = |w: &[f64], shift: u32| {
            let total: f64 = w.iter().sum();
            FiniteDistribution::new(
                (0..w.len() as u32).map(|i| st(&[i + shift])).collect(),
                w.iter().map(|v| v / total).collect(),
            )
            .unwrap()
        };
        let a = dist(&p, 0);
        let b = dist(&q, 1);
        let d = tv_distance(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - tv_distance(&b, &a)).abs() <= 1e-15);
        prop_assert_eq!(tv_distance(&a, &a), 0.0);
    }

    #[test]
    fn distribution_csv_round_trips(seed in any::<u64>()) {
        let sys = random_network(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = sys.network();
        let report = irreducible_components(
            net,
            &Region::Box(StateBox::uniform(net.n_species(), cap_for(net.n_species()))),
        )
        .unwrap();
        let Some(comp) = report.components.iter().find(|c| c.len() <= 200) else {
            return Ok(());
        };
        let pi = restricted_stationary_solve(&sys, &comp.states).unwrap();
        let mut buf = Vec::new();
        write_distribution_csv(&mut buf, net, &pi).unwrap();
        let back = read_distribution_csv(buf.as_slice(), net).unwrap();
        prop_assert_eq!(back.support(), pi.support());
        prop_assert!(tv_distance(&back, &pi) <= 1e-15);
    }
}

#[test]
fn every_fixture_parses_and_round_trips() {
    for name in fixture_names() {
        let sys = fixture(&name);
        assert_eq!(parse_network(&to_crn_string(&sys)).unwrap(), sys, "{name}");
    }
}
