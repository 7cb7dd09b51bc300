#![allow(dead_code)]

use std::collections::HashSet;

use crn_core::structure::deficiency;
use crn_core::{parse_network, FiniteDistribution, MassActionSystem, ReactionNetwork, State};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn fixture(name: &str) -> MassActionSystem {
    parse_network(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_names() -> Vec<String> {
    let dir = format!("{}/fixtures", env!("CARGO_MANIFEST_DIR"));
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".crn"))
        .collect();
    names.sort();
    names
}

pub fn st(v: &[u32]) -> State {
    State(v.to_vec())
}

pub fn species(n: usize) -> Vec<String> {
    ["A", "B", "C", "D"][..n].iter().map(|s| s.to_string()).collect()
}

/// States of `{x ∈ N² : x_1 + x_2 = total}`.
pub fn simplex2(total: u32) -> Vec<State> {
    (0..=total).map(|a| st(&[a, total - a])).collect()
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize, max_coef: u32) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..=max_coef)).collect()
}

fn random_rates(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.2..5.0)).collect()
}

/// A random network with at most 3 species, 6 complexes and 8 reactions.
pub fn random_network(rng: &mut ChaCha8Rng) -> MassActionSystem {
    loop {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(2..=6usize.min(4usize.pow(n as u32)));
        let mut complexes: Vec<Vec<u32>> = Vec::new();
        while complexes.len() < m {
            let c = random_complex(rng, n, 3);
            if !complexes.contains(&c) {
                complexes.push(c);
            }
        }
        let k = rng.random_range(1..=8);
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..k {
            let a = rng.random_range(0..m);
            let b = rng.random_range(0..m);
            if a != b && seen.insert((a, b)) {
                pairs.push((complexes[a].clone(), complexes[b].clone()));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let Ok(net) = ReactionNetwork::from_reaction_vectors(species(n), &pairs) else {
            continue;
        };
        let rates = random_rates(rng, net.n_reactions());
        return MassActionSystem::new(net, rates).unwrap();
    }
}

/// A random weakly reversible deficiency zero network with at most 3
/// species and 6 complexes. Each linkage class is a directed cycle, with
/// each reverse edge added independently.
pub fn random_weakly_reversible_deficiency_zero(rng: &mut ChaCha8Rng) -> MassActionSystem {
    loop {
        let n = rng.random_range(1..=3);
        let ell = rng.random_range(1..=2);
        let mut complexes: Vec<Vec<u32>> = Vec::new();
        let mut pairs = Vec::new();
        let mut ok = true;
        for _ in 0..ell {
            let size = rng.random_range(2..=3);
            let mut class = Vec::new();
            let mut tries = 0;
            while class.len() < size && tries < 50 {
                tries += 1;
                let c = random_complex(rng, n, 2);
                if !complexes.contains(&c) {
                    complexes.push(c.clone());
                    class.push(c);
                }
            }
            if class.len() < size {
                ok = false;
                break;
            }
            class.shuffle(rng);
            for i in 0..size {
                let (a, b) = (&class[i], &class[(i + 1) % size]);
                pairs.push((a.clone(), b.clone()));
                if size > 2 && rng.random_bool(0.5) {
                    pairs.push((b.clone(), a.clone()));
                }
            }
        }
        if !ok || complexes.len() > 6 {
            continue;
        }
        let Ok(net) = ReactionNetwork::from_reaction_vectors(species(n), &pairs) else {
            continue;
        };
        if deficiency(&net) != 0 {
            continue;
        }
        let rates = random_rates(rng, net.n_reactions());
        return MassActionSystem::new(net, rates).unwrap();
    }
}

/// Poisson(λ) restricted to `0..=max` and renormalised, in one species.
pub fn poisson(lambda: f64, max: u32) -> FiniteDistribution {
    let mut logs = Vec::new();
    let mut lf = 0.0;
    for x in 0..=max {
        if x > 0 {
            lf += (x as f64).ln();
        }
        logs.push(x as f64 * lambda.ln() - lf);
    }
    FiniteDistribution::from_log_weights((0..=max).map(|x| st(&[x])).collect(), &logs).unwrap()
}
