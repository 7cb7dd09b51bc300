//! Reaction networks and mass-action systems.
//!
//! A network is a set of species, a set of complexes (non-negative integer
//! vectors over the species) and a set of directed reactions between
//! complexes. Species ordering is fixed at construction and used for every
//! vector downstream.

use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// A complex as a vector of stoichiometric coefficients, one per species.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Complex {
    pub coefficients: Vec<u32>,
}

impl Complex {
    pub fn new(coefficients: Vec<u32>) -> Self {
        Self { coefficients }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            coefficients: vec![0; n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }

    /// Total molecularity `|y| = Σ y_i`.
    pub fn order(&self) -> u32 {
        self.coefficients.iter().sum()
    }

    pub fn max_coefficient(&self) -> u32 {
        self.coefficients.iter().copied().max().unwrap_or(0)
    }

    /// Component-wise `self ≤ x`.
    pub fn fits_in(&self, x: &[u32]) -> bool {
        self.coefficients.iter().zip(x).all(|(&y, &xi)| y <= xi)
    }

    /// Indices of species with a non-zero coefficient.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
}

/// A reaction network `(species, complexes, reactions)`.
///
/// Construction validates the structural invariants: no self-loops, no
/// duplicate reactions or complexes, and no species or complex that is not
/// used by some reaction. The reaction list may be empty, in which case the
/// network has no complexes but may still declare species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct ReactionNetwork {
    species: Vec<Species>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
}

#[derive(Deserialize)]
struct RawNetwork {
    species: Vec<Species>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
}

impl TryFrom<RawNetwork> for ReactionNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        for (i, s) in raw.species.iter().enumerate() {
            if s.index != i {
                return Err(Error::InvalidNetwork(format!(
                    "species '{}' has index {} at position {}",
                    s.name, s.index, i
                )));
            }
        }
        let names = raw.species.into_iter().map(|s| s.name).collect();
        ReactionNetwork::new(names, raw.complexes, raw.reactions)
    }
}

impl ReactionNetwork {
    pub fn new(
        species_names: Vec<String>,
        complexes: Vec<Complex>,
        reactions: Vec<Reaction>,
    ) -> Result<Self> {
        let n = species_names.len();
        let mut seen_names = HashSet::new();
        for name in &species_names {
            if !seen_names.insert(name.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate species '{name}'")));
            }
        }
        let mut seen_complexes = HashSet::new();
        for (i, c) in complexes.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(Error::InvalidNetwork(format!(
                    "complex {i} has {} coefficients, expected {n}",
                    c.coefficients.len()
                )));
            }
            if !seen_complexes.insert(c) {
                return Err(Error::InvalidNetwork(format!("complex {i} is duplicated")));
            }
        }
        let mut seen_reactions = HashSet::new();
        let mut used = vec![false; complexes.len()];
        for (j, r) in reactions.iter().enumerate() {
            if r.source >= complexes.len() || r.target >= complexes.len() {
                return Err(Error::InvalidNetwork(format!(
                    "reaction {j} refers to a missing complex"
                )));
            }
            if r.source == r.target {
                return Err(Error::InvalidNetwork(format!("reaction {j} is a self-loop")));
            }
            if !seen_reactions.insert((r.source, r.target)) {
                return Err(Error::InvalidNetwork(format!("reaction {j} is duplicated")));
            }
            used[r.source] = true;
            used[r.target] = true;
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidNetwork(format!(
                "complex {i} is not part of any reaction"
            )));
        }
        if !reactions.is_empty() {
            for (i, name) in species_names.iter().enumerate() {
                if complexes.iter().all(|c| c.coefficients[i] == 0) {
                    return Err(Error::InvalidNetwork(format!(
                        "species '{name}' is not part of any complex"
                    )));
                }
            }
        }
        let species = species_names
            .into_iter()
            .enumerate()
            .map(|(index, name)| Species { name, index })
            .collect();
        Ok(Self {
            species,
            complexes,
            reactions,
        })
    }

    /// Builds a network from reactions given as `(source, target)` coefficient
    /// vectors. Complexes are deduplicated in first-appearance order.
    pub fn from_reaction_vectors(
        species_names: Vec<String>,
        pairs: &[(Vec<u32>, Vec<u32>)],
    ) -> Result<Self> {
        let mut complexes: Vec<Complex> = Vec::new();
        let mut lookup: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut intern = |v: &Vec<u32>| -> usize {
            *lookup.entry(v.clone()).or_insert_with(|| {
                complexes.push(Complex::new(v.clone()));
                complexes.len() - 1
            })
        };
        let reactions: Vec<Reaction> = pairs
            .iter()
            .map(|(s, t)| Reaction {
                source: intern(s),
                target: intern(t),
            })
            .collect();
        Self::new(species_names, complexes, reactions)
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_complexes(&self) -> usize {
        self.complexes.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn source(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].source]
    }

    pub fn target(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].target]
    }

    pub fn find_reaction(&self, source: usize, target: usize) -> Option<usize> {
        self.reactions
            .iter()
            .position(|r| r.source == source && r.target == target)
    }

    pub fn complex_index(&self, coefficients: &[u32]) -> Option<usize> {
        self.complexes
            .iter()
            .position(|c| c.coefficients == coefficients)
    }

    /// The reaction vector `target − source`.
    pub fn reaction_vector(&self, reaction: usize) -> Vec<i64> {
        let s = self.source(reaction);
        let t = self.target(reaction);
        s.coefficients
            .iter()
            .zip(&t.coefficients)
            .map(|(&a, &b)| b as i64 - a as i64)
            .collect()
    }

    /// `n × k` integer matrix whose column `j` is the reaction vector of reaction `j`.
    pub fn stoichiometric_matrix(&self) -> DMatrix<i64> {
        let n = self.n_species();
        let k = self.n_reactions();
        let mut m = DMatrix::zeros(n, k);
        for j in 0..k {
            for (i, v) in self.reaction_vector(j).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Human-readable label such as `A + 2B` or `0`.
    pub fn complex_label(&self, complex: usize) -> String {
        let c = &self.complexes[complex];
        if c.is_zero() {
            return "0".to_string();
        }
        c.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| {
                if k == 1 {
                    self.species[i].name.clone()
                } else {
                    format!("{k}{}", self.species[i].name)
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn reaction_label(&self, reaction: usize) -> String {
        let r = self.reactions[reaction];
        format!(
            "{} -> {}",
            self.complex_label(r.source),
            self.complex_label(r.target)
        )
    }
}

/// A reaction network together with strictly positive mass-action rate constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem")]
pub struct MassActionSystem {
    network: ReactionNetwork,
    rates: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSystem {
    network: ReactionNetwork,
    rates: Vec<f64>,
}

impl TryFrom<RawSystem> for MassActionSystem {
    type Error = Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        MassActionSystem::new(raw.network, raw.rates)
    }
}

impl MassActionSystem {
    pub fn new(network: ReactionNetwork, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != network.n_reactions() {
            return Err(Error::InvalidNetwork(format!(
                "{} rates given for {} reactions",
                rates.len(),
                network.n_reactions()
            )));
        }
        if let Some(j) = rates.iter().position(|&k| !(k.is_finite() && k > 0.0)) {
            return Err(Error::InvalidNetwork(format!(
                "rate of reaction {j} must be positive and finite, got {}",
                rates[j]
            )));
        }
        Ok(Self { network, rates })
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.network
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, reaction: usize) -> f64 {
        self.rates[reaction]
    }

    pub fn n_species(&self) -> usize {
        self.network.n_species()
    }

    pub fn n_reactions(&self) -> usize {
        self.network.n_reactions()
    }

    /// Stochastic mass-action propensity `κ · x!/(x − y)!` if `x ≥ y`, else `0`.
    pub fn rate_function(&self, reaction: usize, x: &[u32]) -> f64 {
        let y = self.network.source(reaction);
        match falling_factorial(x, &y.coefficients) {
            Some(FallingFactorial::Exact(v)) => self.rates[reaction] * v as f64,
            Some(FallingFactorial::Approx(v)) => self.rates[reaction] * v,
            None => 0.0,
        }
    }

    /// Deterministic mass-action rate `κ · z^y`.
    pub fn deterministic_rate(&self, reaction: usize, z: &[f64]) -> f64 {
        self.rates[reaction] * monomial(z, &self.network.source(reaction).coefficients)
    }

    /// Sum of all propensities at `x`.
    pub fn total_propensity(&self, x: &[u32]) -> f64 {
        (0..self.n_reactions()).map(|j| self.rate_function(j, x)).sum()
    }
}

impl fmt::Display for MassActionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parse::to_crn_string(self))
    }
}

enum FallingFactorial {
    Exact(u128),
    Approx(f64),
}

/// `∏ x_i (x_i − 1) ⋯ (x_i − y_i + 1)`, or `None` unless `x ≥ y`.
fn falling_factorial(x: &[u32], y: &[u32]) -> Option<FallingFactorial> {
    let mut exact: u128 = 1;
    let mut overflow = false;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi < yi {
            return None;
        }
        for t in 0..yi {
            match exact.checked_mul((xi - t) as u128) {
                Some(v) => exact = v,
                None => overflow = true,
            }
        }
    }
    if !overflow {
        return Some(FallingFactorial::Exact(exact));
    }
    let mut approx = 1.0f64;
    for (&xi, &yi) in x.iter().zip(y) {
        for t in 0..yi {
            approx *= (xi - t) as f64;
        }
    }
    Some(FallingFactorial::Approx(approx))
}

/// `z^y = ∏ z_i^{y_i}` with `0^0 = 1`.
pub fn monomial(z: &[f64], y: &[u32]) -> f64 {
    z.iter()
        .zip(y)
        .filter(|(_, &e)| e > 0)
        .map(|(&zi, &e)| zi.powi(e as i32))
        .product()
}
