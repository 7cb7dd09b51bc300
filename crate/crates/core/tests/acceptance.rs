//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p crn-core --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use crn_core::balance::{solve_complex_balanced_equilibrium, DEFAULT_TOL};
use crn_core::ssa::{empirical_distribution, simulate, simulate_capped};
use crn_core::state_space::{
    active_reactions_on, gamma_system, irreducible_components, reachable_set,
};
use crn_core::stationary::{
    complex_balanced_distribution_check, detect_complex_balance_from_distributions,
    direct_stationary_solve, product_form, product_form_on, restricted_stationary_solve,
    terminal_form_distribution,
};
use crn_core::structure::{
    analyze_structure, conservation_laws, deficiency, is_weakly_reversible,
    subnetwork_deficiency_check, terminal_reactions, terminal_sccs,
};
use crn_core::{
    tv_distance, FiniteDistribution, IrreducibleComponent, MassActionSystem, ProductFormDescriptor,
    Region, State, StateBox,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn slice_components(
    sys: &MassActionSystem,
    init: &[u32],
    cap: u32,
) -> Result<crn_core::ComponentReport, String> {
    let region = Region::Slice {
        init: st(init),
        bounds: StateBox::uniform(sys.n_species(), cap),
    };
    ok(irreducible_components(sys.network(), &region), "components")
}

fn state_set(states: &[State]) -> BTreeSet<State> {
    states.iter().cloned().collect()
}

fn criterion_1() -> Outcome {
    let mut detail = Vec::new();
    for (name, expected) in [
        ("binding.crn", 0),
        ("terminal_drain.crn", 0),
        ("deficiency_one.crn", 1),
    ] {
        let r = analyze_structure(fixture(name).network());
        ensure!(r.delta == expected, "{name}: deficiency {} != {expected}", r.delta);
        detail.push(format!("{name} δ={}", r.delta));
    }
    let sys = fixture("mixed_terminal.crn");
    let net = sys.network();
    let sccs: BTreeSet<BTreeSet<String>> = terminal_sccs(net)
        .iter()
        .map(|s| s.iter().map(|&c| net.complex_label(c)).collect())
        .collect();
    let expected: BTreeSet<BTreeSet<String>> = [vec!["2A", "2B"], vec!["0", "C"]]
        .iter()
        .map(|v| v.iter().map(|s| s.to_string()).collect())
        .collect();
    ensure!(sccs == expected, "terminal SCCs {sccs:?}");
    detail.push("terminal SCCs {2A,2B} {0,C}".into());
    Ok(detail.join(", "))
}

fn criterion_2() -> Outcome {
    let sys = fixture("parity_slices.crn");
    let report = slice_components(&sys, &[6, 0], 6)?;
    let found: BTreeSet<BTreeSet<State>> = report
        .components
        .iter()
        .map(|c| state_set(&c.states))
        .collect();
    let expected: BTreeSet<BTreeSet<State>> = [
        state_set(&[st(&[1, 5]), st(&[3, 3]), st(&[5, 1])]),
        state_set(&[st(&[0, 6])]),
    ]
    .into_iter()
    .collect();
    ensure!(found == expected, "components {found:?}");
    ensure!(
        report.components.iter().all(|c| !c.truncated),
        "a component is flagged truncated"
    );
    let transient = state_set(&report.transient);
    let expected_transient = state_set(&[st(&[6, 0]), st(&[4, 2]), st(&[2, 4])]);
    ensure!(transient == expected_transient, "transient {transient:?}");
    Ok("2 components, 3 transient states, exact".into())
}

fn criterion_3() -> Outcome {
    let mut worst_tv: f64 = 0.0;
    for theta in [2u32, 3, 5] {
        let sys = fixture(&format!("one_way_theta{theta}.crn"));
        let report = slice_components(&sys, &[theta, 0], theta)?;
        ensure!(report.components.len() == 1, "θ={theta}: {} components", report.components.len());
        let comp = &report.components[0];
        ensure!(state_set(&comp.states) == state_set(&simplex2(theta)), "θ={theta}: component is not the slice");
        let direct = ok(direct_stationary_solve(&sys, comp), "direct solve")?;
        let pi = ok(
            product_form(&ProductFormDescriptor {
                c: vec![1.0, 1.0],
                component: comp.clone(),
                species: None,
            }),
            "product form",
        )?;
        let tv = tv_distance(&direct, &pi);
        worst_tv = worst_tv.max(tv);
        ensure!(tv <= 1e-10, "θ={theta}: TV {tv:.3e}");
        let check = ok(complex_balanced_distribution_check(&sys, comp, &pi, 1e-9), "cb check")?;
        ensure!(!check.passed, "θ={theta}: complex balance check passed");
    }
    Ok(format!("max TV {worst_tv:.2e}; complex balance check fails for θ=2,3,5"))
}

fn criterion_4() -> Outcome {
    let sys = fixture("two_levels.crn");
    let mut detail = Vec::new();
    for (total, should_match) in [(4u32, true), (7, true), (5, false)] {
        let report = slice_components(&sys, &[total, 0], total)?;
        ensure!(report.components.len() == 1, "sum {total}: {} components", report.components.len());
        let comp = &report.components[0];
        ensure!(state_set(&comp.states) == state_set(&simplex2(total)), "sum {total}: component is not the slice");
        let direct = ok(direct_stationary_solve(&sys, comp), "direct solve")?;
        let pi = ok(product_form_on(&[1.0, 1.0], None, &comp.states), "product form")?;
        let tv = tv_distance(&direct, &pi);
        if should_match {
            ensure!(tv <= 1e-10, "sum {total}: TV {tv:.3e}");
        } else {
            ensure!(tv > 1e-6, "sum {total}: TV {tv:.3e} unexpectedly small");
        }
        detail.push(format!("sum {total}: TV {tv:.2e}"));
    }
    Ok(detail.join(", "))
}

/// Product form from the solved equilibrium against the direct solve on
/// every closed component of the box. Returns (components, max TV).
fn oracle_equivalence(sys: &MassActionSystem, cap: u32) -> Result<(usize, f64), String> {
    let c = ok(solve_complex_balanced_equilibrium(sys, DEFAULT_TOL), "solve")?
        .ok_or("no complex balanced equilibrium")?;
    let report = ok(
        irreducible_components(sys.network(), &Region::Box(StateBox::uniform(sys.n_species(), cap))),
        "components",
    )?;
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for comp in report.components.iter().filter(|c| !c.truncated) {
        let direct = ok(direct_stationary_solve(sys, comp), "direct solve")?;
        let pi = ok(
            product_form(&ProductFormDescriptor {
                c: c.clone(),
                component: comp.clone(),
                species: None,
            }),
            "product form",
        )?;
        worst = worst.max(tv_distance(&direct, &pi));
        count += 1;
    }
    Ok((count, worst))
}

fn criterion_5() -> Outcome {
    let (n0, tv0) = oracle_equivalence(&fixture("binding.crn"), 15)?;
    ensure!(tv0 <= 1e-10, "binding: TV {tv0:.3e}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut components = n0;
    let mut worst = tv0;
    while accepted < 20 {
        let sys = random_weakly_reversible_deficiency_zero(&mut rng);
        let cap = 15;
        let report = ok(
            irreducible_components(sys.network(), &Region::Box(StateBox::uniform(sys.n_species(), cap))),
            "components",
        )?;
        let closed: Vec<&IrreducibleComponent> =
            report.components.iter().filter(|c| !c.truncated).collect();
        if !closed.iter().any(|c| c.len() >= 2) || closed.iter().any(|c| c.len() > 1500) {
            rejected += 1;
            continue;
        }
        let (n, tv) = oracle_equivalence(&sys, cap).map_err(|e| format!("{sys}: {e}"))?;
        ensure!(tv <= 1e-10, "network\n{sys}\nTV {tv:.3e}");
        accepted += 1;
        components += n;
        worst = worst.max(tv);
    }
    Ok(format!(
        "binding + 20 random networks ({rejected} draws without a closed multi-state component skipped), {components} components, max TV {worst:.2e}"
    ))
}

fn criterion_6() -> Outcome {
    let sys = fixture("terminal_drain.crn");
    let net = sys.network();
    let report = ok(
        irreducible_components(net, &Region::Box(StateBox::uniform(4, 10))),
        "components",
    )?;
    let origin = st(&[0, 0, 0, 0]);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for comp in report.components.iter().filter(|c| !c.truncated && !c.contains(&origin)) {
        let pi = ok(terminal_form_distribution(&sys, comp), "terminal form")?;
        let direct = ok(direct_stationary_solve(&sys, comp), "direct solve")?;
        let tv = tv_distance(&pi, &direct);
        ensure!(tv <= 1e-10, "component {:?}: TV {tv:.3e}", comp.states[0]);
        worst = worst.max(tv);
        checked += 1;
    }
    ensure!(checked > 0, "no component checked");
    let positive = report
        .components
        .iter()
        .filter(|c| active_reactions_on(net, &c.states).len() == net.n_reactions())
        .count();
    ensure!(positive == 0, "{positive} positive components");
    Ok(format!(
        "{checked} components, max TV {worst:.2e}; no positive component among {}",
        report.components.len()
    ))
}

/// Unnormalised weights `∏_{i≤x} θ1[(i−1)(i−2)+θ2] / (i(i−1)(i−2)+θ3 i)`.
fn birth_death_weights(t1: f64, t2: f64, t3: f64, max: u32) -> Vec<f64> {
    let mut w = vec![1.0];
    for i in 1..=max {
        let i = i as f64;
        let ratio = t1 * ((i - 1.0) * (i - 2.0) + t2) / (i * (i - 1.0) * (i - 2.0) + t3 * i);
        w.push(w.last().unwrap() * ratio);
    }
    w
}

fn birth_death_case(name: &str) -> Result<(u32, f64, f64), String> {
    let sys = fixture(name);
    let k = sys.rates();
    let (t1, t2, t3) = (k[2] / k[3], k[0] / k[2], k[1] / k[3]);
    let long = birth_death_weights(t1, t2, t3, 400);
    let total: f64 = long.iter().sum();
    let mut n = 0;
    while long[n + 1..].iter().sum::<f64>() / total >= 1e-14 {
        n += 1;
    }
    let n = n as u32;
    let states: Vec<State> = (0..=n).map(|x| st(&[x])).collect();
    let direct = ok(restricted_stationary_solve(&sys, &states), "direct solve")?;
    let w = &long[..=n as usize];
    let mass: f64 = w.iter().sum();
    let mut worst_rel: f64 = 0.0;
    for (x, p) in direct.iter() {
        let exact = w[x[0] as usize] / mass;
        worst_rel = worst_rel.max(((p - exact) / exact).abs());
    }
    ensure!(worst_rel <= 1e-8, "{name}: pointwise relative error {worst_rel:.3e}");
    let mean: f64 = direct.iter().map(|(x, p)| x[0] as f64 * p).sum();
    let tv = tv_distance(&direct, &poisson(mean, n));
    Ok((n, worst_rel, tv))
}

fn criterion_7() -> Outcome {
    let (n1, rel1, tv1) = birth_death_case("schlogl_poisson.crn")?;
    ensure!(tv1 <= 1e-8, "θ2=θ3: Poisson fit TV {tv1:.3e}");
    let (n2, rel2, tv2) = birth_death_case("schlogl_skewed.crn")?;
    ensure!(tv2 >= 1e-3, "(θ2,θ3)=(1,2): Poisson fit TV {tv2:.3e}");
    Ok(format!(
        "θ2=θ3: x≤{n1}, rel err {rel1:.1e}, Poisson TV {tv1:.1e}; (1,2): x≤{n2}, rel err {rel2:.1e}, Poisson TV {tv2:.1e}"
    ))
}

fn criterion_8() -> Outcome {
    let sys = fixture("dimer_birth.crn");
    let (k1, k2) = (sys.rate(0), sys.rate(1));
    let states: Vec<State> = (0..=40).map(|x| st(&[x])).collect();
    let direct = ok(restricted_stationary_solve(&sys, &states), "direct solve")?;
    let (a, b) = (k2 / k1, k2 / (2.0 * k1));
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut worst: f64 = 0.0;
    for x in 0..=40u32 {
        let mut sum = 0.0;
        for j in 0..=x / 2 {
            let i = x - 2 * j;
            sum += a.powi(i as i32) / fact(i) * b.powi(j as i32) / fact(j);
        }
        let exact = (-1.5 * k2 / k1).exp() * sum;
        worst = worst.max((direct.probability(&[x]) - exact).abs());
    }
    let p0 = direct.probability(&[0]);
    let err0 = (p0 - (-1.5f64).exp()).abs();
    ensure!(err0 <= 1e-8, "π(0) = {p0}, off by {err0:.3e}");
    ensure!(worst <= 1e-10, "max pointwise error {worst:.3e}");
    Ok(format!("|π(0) − e^(−3/2)| = {err0:.1e}, max pointwise error {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let sys = fixture("one_way_theta3.crn");
    let r = ok(
        detect_complex_balance_from_distributions(&sys, &[1.0, 1.0], &StateBox::uniform(2, 8), 1e-9),
        "detector",
    )?;
    ensure!(!r.complex_balanced, "one_way_theta3 detected as complex balanced");
    ensure!(!r.failing_components.is_empty(), "no discriminating component");
    let slice = r
        .components
        .iter()
        .find(|v| !v.truncated && v.size == 4)
        .ok_or("slice of total 3 not found")?;
    ensure!(slice.passed, "product form fails on the slice of total 3");
    let first = &r.components[r.failing_components[0]];
    let first_state = first.worst_state.clone().map(|s| s.0);

    let sys = fixture("binding.crn");
    let c = ok(solve_complex_balanced_equilibrium(&sys, DEFAULT_TOL), "solve")?
        .ok_or("binding: no equilibrium")?;
    let r2 = ok(
        detect_complex_balance_from_distributions(&sys, &c, &StateBox::uniform(3, 6), 1e-9),
        "detector",
    )?;
    ensure!(r2.empirical && r2.algebraic && r2.complex_balanced, "binding: {r2:?}");
    Ok(format!(
        "one_way_theta3: false ({} failing components, first has {} states, worst at {:?}); binding: true by both routes ({} good states)",
        r.failing_components.len(),
        first.size,
        first_state,
        r2.good_states
    ))
}

#[derive(Default)]
struct PropertyTally {
    paths: usize,
    components: usize,
    deficiency_zero_gamma: usize,
    weakly_reversible_lemma: usize,
    subnetworks: usize,
    trajectories: usize,
}

fn check_properties(sys: &MassActionSystem, rng: &mut ChaCha8Rng, tally: &mut PropertyTally) -> Result<(), String> {
    let net = sys.network();
    let n = net.n_species();

    // accessibility along directed paths of the reaction graph
    for _ in 0..3 {
        let mut path = vec![net.reactions()[rng.random_range(0..net.n_reactions())].source];
        for _ in 0..4 {
            let here = *path.last().unwrap();
            let out: Vec<usize> = net
                .reactions()
                .iter()
                .filter(|r| r.source == here)
                .map(|r| r.target)
                .collect();
            if out.is_empty() {
                break;
            }
            path.push(out[rng.random_range(0..out.len())]);
        }
        let y1 = &net.complexes()[path[0]].coefficients;
        let x: Vec<u32> = y1.iter().map(|&v| v + rng.random_range(0..=2)).collect();
        let along: Vec<Vec<u32>> = path
            .iter()
            .map(|&c| {
                let y = &net.complexes()[c].coefficients;
                (0..n).map(|i| x[i] + y[i] - y1[i]).collect()
            })
            .collect();
        let upper: Vec<u32> = (0..n).map(|i| along.iter().map(|v| v[i]).max().unwrap()).collect();
        let reach = ok(reachable_set(net, &State(x.clone()), &StateBox::new(upper)), "reachable")?;
        let end = State(along.last().unwrap().clone());
        ensure!(reach.states.contains(&end), "{net:?}: {end:?} not reachable from {x:?}");
        tally.paths += 1;
    }
    // Γ-networks of closed components
    let cap = match n {
        1 => 12,
        2 => 7,
        3 => 4,
        _ => 3,
    };
    let report = ok(irreducible_components(net, &Region::Box(StateBox::uniform(n, cap))), "components")?;
    let terminal = terminal_reactions(net);
    let wr = is_weakly_reversible(net);
    for comp in report.components.iter().filter(|c| !c.truncated) {
        let g = ok(gamma_system(sys, comp), "gamma")?;
        tally.components += 1;
        if deficiency(&g.subnetwork.network) == 0 {
            tally.deficiency_zero_gamma += 1;
            ensure!(
                is_weakly_reversible(&g.subnetwork.network),
                "{sys}\ncomponent {:?}: Γ-network has deficiency 0 but is not weakly reversible",
                comp.states[0]
            );
            ensure!(
                g.active_reactions.iter().all(|j| terminal.contains(j)),
                "{sys}\ncomponent {:?}: Γ-network is not inside the terminal network",
                comp.states[0]
            );
        }
        if wr {
            for &y in &g.subnetwork.complex_map {
                for incoming in [true, false] {
                    let full: BTreeSet<usize> = (0..net.n_reactions())
                        .filter(|&j| if incoming { net.reactions()[j].target == y } else { net.reactions()[j].source == y })
                        .collect();
                    let restricted: BTreeSet<usize> = g
                        .active_reactions
                        .iter()
                        .copied()
                        .filter(|&j| if incoming { net.reactions()[j].target == y } else { net.reactions()[j].source == y })
                        .collect();
                    ensure!(
                        full == restricted,
                        "{sys}\ncomplex {}: reaction sets differ on component {:?}",
                        net.complex_label(y),
                        comp.states[0]
                    );
                }
            }
            tally.weakly_reversible_lemma += 1;
        }
    }
    // subnetwork deficiency
    for _ in 0..5 {
        let subset: Vec<usize> = (0..net.n_reactions()).filter(|_| rng.random_bool(0.5)).collect();
        let cmp = subnetwork_deficiency_check(net, &subset);
        ensure!(cmp.ok, "{sys}\nsubset {subset:?}: deficiency {} > {}", cmp.subnetwork, cmp.parent);
        tally.subnetworks += 1;
    }
    // conservation laws along simulated trajectories
    let laws = conservation_laws(net);
    let x0 = State((0..n).map(|_| rng.random_range(0..=5)).collect());
    let traj = ok(simulate_capped(sys, &x0, 2.0, rng.random(), 20_000), "simulate")?;
    for w in &laws {
        let level = |x: &State| -> i64 { w.iter().zip(x.iter()).map(|(a, &b)| a * b as i64).sum() };
        let start = level(&traj.states[0]);
        ensure!(
            traj.states.iter().all(|x| level(x) == start),
            "{sys}\nconservation law {w:?} violated along a trajectory"
        );
    }
    tally.trajectories += 1;
    Ok(())
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut tally = PropertyTally::default();
    let names = fixture_names();
    for name in &names {
        check_properties(&fixture(name), &mut rng, &mut tally).map_err(|e| format!("{name}: {e}"))?;
    }
    for _ in 0..200 {
        let sys = random_network(&mut rng);
        check_properties(&sys, &mut rng, &mut tally)?;
    }

    let sys = fixture("one_way_theta3.crn");
    let traj = ok(simulate(&sys, &st(&[3, 0]), 1e4, 2024), "simulate")?;
    let empirical = ok(ok(empirical_distribution(&traj, 0.0), "empirical")?.distribution(), "empirical")?;
    let exact = ok(
        FiniteDistribution::new(simplex2(3), vec![1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0]),
        "exact",
    )?;
    let tv = tv_distance(&empirical, &exact);
    ensure!(tv <= 0.05, "SSA TV {tv:.3e}");
    Ok(format!(
        "{} fixtures + 200 random networks: {} paths, {} components ({} with deficiency zero Γ-network, {} weakly reversible checks), {} subnetworks, {} trajectories; SSA TV {tv:.3}",
        names.len(),
        tally.paths,
        tally.components,
        tally.deficiency_zero_gamma,
        tally.weakly_reversible_lemma,
        tally.subnetworks,
        tally.trajectories
    ))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("structural fixtures", 1, criterion_1),
        ("parity slice components", 1, criterion_2),
        ("one-way slices stationary law", 1, criterion_3),
        ("two-level slices", 1, criterion_4),
        ("product form vs direct solve", 60, criterion_5),
        ("terminal-system pipeline", 5, criterion_6),
        ("birth-death product formula", 5, criterion_7),
        ("non-Poisson dimer birth", 1, criterion_8),
        ("converse detector", 10, criterion_9),
        ("property suites", 300, criterion_10),
    ];
    let mut failures = 0;
    for (i, (title, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panic: {msg}"))
            });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(*budget) => Err(format!(
                "{detail}; exceeded the {budget} s budget"
            )),
            other => other,
        };
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS [{secs:7.3} s] {title}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL [{secs:7.3} s] {title}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
