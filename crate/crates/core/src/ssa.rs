//! Exact stochastic simulation (Gillespie's direct method) and time-weighted
//! empirical distributions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MassActionSystem;
use crate::state_space::State;
use crate::stationary::FiniteDistribution;

pub use crate::stationary::tv_distance;

/// Identifier of the random number generator recorded in trajectories.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Jump times, starting with 0.
    pub times: Vec<f64>,
    /// State entered at each jump time; the first is the initial condition.
    pub states: Vec<State>,
    /// Reaction fired at each jump (one fewer than `states`).
    pub reactions: Vec<usize>,
    pub seed: u64,
    pub rng: String,
    pub t_end: f64,
    /// The last state has total propensity zero.
    pub absorbed: bool,
    /// The jump limit was reached; `t_end` is then the last jump time.
    #[serde(default)]
    pub capped: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Time of absorption, if the trajectory was absorbed.
    pub fn absorption_time(&self) -> Option<f64> {
        self.absorbed.then(|| *self.times.last().expect("non-empty"))
    }
}

/// Simulates the CTMC from `x0` until `t_end` or absorption.
pub fn simulate(sys: &MassActionSystem, x0: &State, t_end: f64, seed: u64) -> Result<Trajectory> {
    simulate_capped(sys, x0, t_end, seed, usize::MAX)
}

/// [`simulate`] with at most `max_jumps` jumps, for networks that may
/// explode in finite time.
pub fn simulate_capped(
    sys: &MassActionSystem,
    x0: &State,
    t_end: f64,
    seed: u64,
    max_jumps: usize,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    if x0.len() != sys.n_species() {
        return Err(Error::InvalidInput(format!(
            "initial state has {} entries but the network has {} species",
            x0.len(),
            sys.n_species()
        )));
    }
    let net = sys.network();
    let vectors: Vec<Vec<i64>> = (0..net.n_reactions()).map(|j| net.reaction_vector(j)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        reactions: Vec::new(),
        seed,
        rng: RNG_ALGORITHM.to_string(),
        t_end,
        absorbed: false,
        capped: false,
    };
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut rates = vec![0.0; net.n_reactions()];
    loop {
        if traj.reactions.len() >= max_jumps {
            traj.capped = true;
            traj.t_end = t;
            break;
        }
        for (j, r) in rates.iter_mut().enumerate() {
            *r = sys.rate_function(j, &x);
        }
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            traj.absorbed = true;
            break;
        }
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / total;
        if t >= t_end {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (j, &r) in rates.iter().enumerate() {
            if r > 0.0 {
                chosen = Some(j);
                acc += r;
                if target < acc {
                    break;
                }
            }
        }
        let j = chosen.expect("some reaction is active");
        x = x
            .shifted(&vectors[j])
            .ok_or_else(|| Error::Numerical("reaction drove a count negative".into()))?;
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.reactions.push(j);
    }
    Ok(traj)
}

/// Time-weighted occupancy over `[burn_in, t_end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub support: Vec<State>,
    /// Normalised occupancy fractions matching `support`.
    pub weights: Vec<f64>,
    /// Length of the averaging window (summed over merged runs).
    pub total_weight: f64,
}

impl EmpiricalDistribution {
    fn from_times(times: BTreeMap<State, f64>) -> Self {
        let total: f64 = times.values().sum();
        let (support, weights) = times.into_iter().map(|(s, w)| (s, w / total)).unzip();
        Self {
            support,
            weights,
            total_weight: total,
        }
    }

    /// Pools two estimates, weighting each by its window length.
    pub fn merge(&self, other: &Self) -> Self {
        let mut times = BTreeMap::new();
        for d in [self, other] {
            for (s, w) in d.support.iter().zip(&d.weights) {
                *times.entry(s.clone()).or_insert(0.0) += w * d.total_weight;
            }
        }
        Self::from_times(times)
    }

    pub fn distribution(&self) -> Result<FiniteDistribution> {
        FiniteDistribution::new(self.support.clone(), self.weights.clone())
    }
}

pub fn empirical_distribution(traj: &Trajectory, burn_in: f64) -> Result<EmpiricalDistribution> {
    if !(burn_in >= 0.0 && burn_in < traj.t_end) {
        return Err(Error::InvalidInput(format!(
            "burn-in {burn_in} must lie in [0, {})",
            traj.t_end
        )));
    }
    if let Some(t) = traj.absorption_time() {
        if t < burn_in {
            return Err(Error::AbsorbedBeforeBurnIn { time: t, burn_in });
        }
    }
    let mut times = BTreeMap::new();
    for (k, state) in traj.states.iter().enumerate() {
        let start = traj.times[k].max(burn_in);
        let end = traj.times.get(k + 1).copied().unwrap_or(traj.t_end);
        if end > start {
            *times.entry(state.clone()).or_insert(0.0) += end - start;
        }
    }
    Ok(EmpiricalDistribution::from_times(times))
}
