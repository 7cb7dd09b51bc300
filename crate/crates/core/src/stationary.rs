//! Stationary distributions on irreducible components.
//!
//! Product-form Poisson-like distributions `π(x) ∝ ∏ c_i^{x_i} / x_i!`,
//! master-equation residuals, the per-complex balance check, a direct
//! linear-solve oracle, the terminal-system form for deficiency zero
//! networks, and the converse detector that decides complex balance from
//! stationary distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::balance::{balance_report, solve_complex_balanced_equilibrium, Concentration};
use crate::error::{Error, Result};
use crate::network::MassActionSystem;
use crate::state_space::{
    active_reactions_on, certify_essential, gamma_system, irreducible_components,
    is_positive_component, Essentiality, IrreducibleComponent, Region, State, StateBox,
};
use crate::structure::{deficiency, terminal_network, terminal_reactions};

/// Relative residual accepted from the direct solver.
pub const DIRECT_SOLVE_TOL: f64 = 1e-12;

/// Probability distribution on a finite, lexicographically sorted support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct FiniteDistribution {
    support: Vec<State>,
    probabilities: Vec<f64>,
    /// `ln M`, where `M` is the reciprocal of the unnormalised mass, for
    /// distributions built from closed-form weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    log_normalizer: Option<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<State>,
    probabilities: Vec<f64>,
    #[serde(default)]
    log_normalizer: Option<f64>,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        let mut d = FiniteDistribution::new(raw.support, raw.probabilities)?;
        d.log_normalizer = raw.log_normalizer;
        Ok(d)
    }
}

impl FiniteDistribution {
    /// Builds a distribution from states and probabilities. Entries are
    /// sorted by state; the probabilities must be non-negative and sum to 1
    /// within `1e-9`, and are renormalised exactly.
    pub fn new(support: Vec<State>, probabilities: Vec<f64>) -> Result<Self> {
        if support.len() != probabilities.len() {
            return Err(Error::InvalidInput(format!(
                "{} states but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut pairs: Vec<(State, f64)> = support.into_iter().zip(probabilities).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate state in support".into()));
        }
        let dim = pairs[0].0.len();
        if pairs.iter().any(|(s, _)| s.len() != dim) {
            return Err(Error::InvalidInput("states of different dimension".into()));
        }
        let (support, probabilities): (Vec<State>, Vec<f64>) =
            pairs.into_iter().map(|(s, p)| (s, p / total)).unzip();
        Ok(Self {
            support,
            probabilities,
            log_normalizer: None,
        })
    }

    /// Normalises `exp(log_weights)` with a single exponentiation per state.
    pub fn from_log_weights(support: Vec<State>, log_weights: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("log weights are not finite".into()));
        }
        let shifted: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = shifted.iter().sum();
        let probabilities = shifted.iter().map(|w| w / total).collect();
        let mut d = Self::new(support, probabilities)?;
        d.log_normalizer = Some(-(max + total.ln()));
        Ok(d)
    }

    pub fn point_mass(x: State) -> Self {
        Self {
            support: vec![x],
            probabilities: vec![1.0],
            log_normalizer: None,
        }
    }

    pub fn support(&self) -> &[State] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn log_normalizer(&self) -> Option<f64> {
        self.log_normalizer
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn index_of(&self, x: &[u32]) -> Option<usize> {
        self.support.binary_search_by(|s| s.0.as_slice().cmp(x)).ok()
    }

    /// `π(x)`, zero off the support.
    pub fn probability(&self, x: &[u32]) -> f64 {
        self.index_of(x).map_or(0.0, |i| self.probabilities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, f64)> {
        self.support.iter().zip(self.probabilities.iter().copied())
    }

    /// Marginal distribution of one species.
    pub fn marginal(&self, species: usize) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (x, p) in self.iter() {
            *out.entry(x[species]).or_insert(0.0) += p;
        }
        out
    }
}

/// `½ Σ |a(x) − b(x)|` over the union of the supports.
pub fn tv_distance(a: &FiniteDistribution, b: &FiniteDistribution) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    let (sa, sb) = (a.support(), b.support());
    let (pa, pb) = (a.probabilities(), b.probabilities());
    while i < sa.len() || j < sb.len() {
        match (sa.get(i), sb.get(j)) {
            (Some(x), Some(y)) if x == y => {
                sum += (pa[i] - pb[j]).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                sum += pa[i];
                i += 1;
            }
            (Some(_), None) => {
                sum += pa[i];
                i += 1;
            }
            _ => {
                sum += pb[j];
                j += 1;
            }
        }
    }
    (0.5 * sum).min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductFormDescriptor {
    pub c: Concentration,
    pub component: IrreducibleComponent,
    /// Species included in the product; all species when `None`. Omitted
    /// species are constant on the component and absorbed into `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Vec<usize>>,
}

/// `ln x!` for `x` up to `max`.
fn ln_factorials(max: u32) -> Vec<f64> {
    let mut table = Vec::with_capacity(max as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `Σ_i (x_i ln c_i − ln x_i!)` over the selected species for every state.
pub fn product_log_weights(
    c: &[f64],
    species: Option<&[usize]>,
    states: &[State],
) -> Result<Vec<f64>> {
    let all: Vec<usize>;
    let species = match species {
        Some(s) => s,
        None => {
            all = (0..c.len()).collect();
            &all
        }
    };
    if let Some(x) = states.iter().find(|x| x.len() != c.len()) {
        return Err(Error::InvalidInput(format!(
            "state {:?} does not match the {} entries of c",
            x.0,
            c.len()
        )));
    }
    let max = states
        .iter()
        .flat_map(|x| species.iter().map(move |&i| x[i]))
        .max()
        .unwrap_or(0);
    let lf = ln_factorials(max);
    let mut out = Vec::with_capacity(states.len());
    for x in states {
        let mut w = 0.0;
        for &i in species {
            if x[i] == 0 {
                continue;
            }
            if !(c[i] > 0.0 && c[i].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "c[{i}] = {} must be positive where the species is present",
                    c[i]
                )));
            }
            w += x[i] as f64 * c[i].ln() - lf[x[i] as usize];
        }
        out.push(w);
    }
    Ok(out)
}

/// `π(x) ∝ ∏ c_i^{x_i} / x_i!` normalised over the component.
pub fn product_form(desc: &ProductFormDescriptor) -> Result<FiniteDistribution> {
    if desc.component.truncated {
        return Err(Error::TruncatedComponent);
    }
    product_form_on(&desc.c, desc.species.as_deref(), &desc.component.states)
}

/// Product form normalised over an arbitrary finite set of states.
pub fn product_form_on(
    c: &[f64],
    species: Option<&[usize]>,
    states: &[State],
) -> Result<FiniteDistribution> {
    if states.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let lw = product_log_weights(c, species, states)?;
    FiniteDistribution::from_log_weights(states.to_vec(), &lw)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `max_x |inflow(x) − outflow(x)|`.
    pub max_residual: f64,
    /// State attaining the maximum.
    pub argmax: Option<State>,
    /// Largest single outflow `π(x) Σ λ(x)`; the natural residual scale.
    pub scale: f64,
    /// `max_residual / scale` (zero when nothing moves).
    pub relative: f64,
}

impl ResidualReport {
    pub fn within(&self, tol: f64) -> bool {
        self.relative <= tol
    }
}

fn master_balance(
    sys: &MassActionSystem,
    dist: &FiniteDistribution,
    drop_outside: bool,
) -> Result<ResidualReport> {
    if dist.dim() != sys.n_species() {
        return Err(Error::InvalidInput(format!(
            "distribution has dimension {} but the network has {} species",
            dist.dim(),
            sys.n_species()
        )));
    }
    let net = sys.network();
    let vectors: Vec<Vec<i64>> = (0..net.n_reactions()).map(|j| net.reaction_vector(j)).collect();
    let negated: Vec<Vec<i64>> = vectors
        .iter()
        .map(|v| v.iter().map(|d| -d).collect())
        .collect();
    let mut report = ResidualReport {
        max_residual: 0.0,
        argmax: None,
        scale: 0.0,
        relative: 0.0,
    };
    for (x, p) in dist.iter() {
        let mut out_rate = 0.0;
        let mut inflow = 0.0;
        for j in 0..net.n_reactions() {
            let rate = sys.rate_function(j, x);
            if rate > 0.0
                && (!drop_outside
                    || x.shifted(&vectors[j]).is_some_and(|t| dist.index_of(&t).is_some()))
            {
                out_rate += rate;
            }
            if let Some(pred) = x.shifted(&negated[j]) {
                let q = dist.probability(&pred);
                if q > 0.0 {
                    inflow += q * sys.rate_function(j, &pred);
                }
            }
        }
        let outflow = p * out_rate;
        report.scale = report.scale.max(outflow);
        let r = (inflow - outflow).abs();
        if r > report.max_residual || report.argmax.is_none() {
            report.max_residual = r;
            report.argmax = Some(x.clone());
        }
    }
    report.relative = if report.scale > 0.0 {
        report.max_residual / report.scale
    } else {
        0.0
    };
    Ok(report)
}

/// Max-norm master-equation residual over the support. Predecessors outside
/// the support contribute zero.
pub fn master_equation_residual(sys: &MassActionSystem, dist: &FiniteDistribution) -> Result<f64> {
    Ok(master_balance(sys, dist, false)?.max_residual)
}

pub fn master_equation_report(
    sys: &MassActionSystem,
    dist: &FiniteDistribution,
) -> Result<ResidualReport> {
    master_balance(sys, dist, false)
}

/// Residual of the chain restricted to the support, with transitions that
/// leave the support removed.
pub fn truncated_master_equation_report(
    sys: &MassActionSystem,
    dist: &FiniteDistribution,
) -> Result<ResidualReport> {
    master_balance(sys, dist, true)
}

/// Off-diagonal transition rates among `states` (sorted), dropping
/// transitions that leave the set. Row `i` holds rates out of state `i`.
fn transition_matrix(sys: &MassActionSystem, states: &[State]) -> Vec<Vec<f64>> {
    let n = states.len();
    let net = sys.network();
    let vectors: Vec<Vec<i64>> = (0..net.n_reactions()).map(|j| net.reaction_vector(j)).collect();
    let mut q = vec![vec![0.0; n]; n];
    for (i, x) in states.iter().enumerate() {
        for (j, v) in vectors.iter().enumerate() {
            let rate = sys.rate_function(j, x);
            if rate == 0.0 {
                continue;
            }
            if let Some(t) = x.shifted(v) {
                if let Ok(k) = states.binary_search(&t) {
                    q[i][k] += rate;
                }
            }
        }
    }
    q
}

/// Stationary vector of an irreducible rate matrix by
/// Grassmann–Taksar–Heyman elimination, which involves no subtractions and
/// keeps every entry to high relative accuracy.
fn gth_solve(mut q: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = q.len();
    let mut pivots = vec![0.0; n];
    for k in (1..n).rev() {
        let s: f64 = q[k][..k].iter().sum();
        if !(s > 0.0) {
            return Err(Error::Numerical(format!(
                "rate matrix is reducible: state {k} has no transition to the remaining states"
            )));
        }
        pivots[k] = s;
        let (upper, lower) = q.split_at_mut(k);
        let row_k = &lower[0][..k];
        for row in upper.iter_mut() {
            let f = row[k] / s;
            if f == 0.0 {
                continue;
            }
            for (a, &b) in row[..k].iter_mut().zip(row_k) {
                *a += f * b;
            }
        }
    }
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    for k in 1..n {
        let mut acc = 0.0;
        for i in 0..k {
            acc += p[i] * q[i][k];
        }
        p[k] = acc / pivots[k];
    }
    let total: f64 = p.iter().sum();
    Ok(p.into_iter().map(|v| v / total).collect())
}

/// Solves the global balance equations on the chain restricted to `states`
/// (transitions leaving the set are dropped) and verifies the result.
pub fn restricted_stationary_solve(
    sys: &MassActionSystem,
    states: &[State],
) -> Result<FiniteDistribution> {
    if states.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut sorted = states.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() == 1 {
        return Ok(FiniteDistribution::point_mass(sorted.remove(0)));
    }
    let p = gth_solve(transition_matrix(sys, &sorted))?;
    if let Some(k) = p.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Numerical(format!(
            "state {:?} has zero stationary mass; the set is not irreducible",
            sorted[k].0
        )));
    }
    let dist = FiniteDistribution::new(sorted, p)?;
    let report = truncated_master_equation_report(sys, &dist)?;
    if !report.within(DIRECT_SOLVE_TOL) {
        return Err(Error::Numerical(format!(
            "direct solve residual {:.3e} relative to flux {:.3e}",
            report.max_residual, report.scale
        )));
    }
    Ok(dist)
}

/// The unique stationary distribution of a finite closed component.
pub fn direct_stationary_solve(
    sys: &MassActionSystem,
    comp: &IrreducibleComponent,
) -> Result<FiniteDistribution> {
    if comp.truncated {
        return Err(Error::TruncatedComponent);
    }
    restricted_stationary_solve(sys, &comp.states)
}

/// Stationary distribution of a truncated component, with the transitions
/// leaving the box removed.
pub fn direct_stationary_solve_truncated(
    sys: &MassActionSystem,
    comp: &IrreducibleComponent,
) -> Result<FiniteDistribution> {
    restricted_stationary_solve(sys, &comp.states)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexBalanceCheck {
    /// Largest `|inflow − outflow|` over complexes of the Γ-network and
    /// states of the component.
    pub max_residual: f64,
    /// Complex (parent index) and state attaining the maximum.
    pub worst: Option<(usize, State)>,
    pub scale: f64,
    pub passed: bool,
}

/// Per-complex probability-flow balance on a component: for every complex
/// `y'` of the Γ-network and `x ∈ Γ`, the flow into `y'` at `x` equals the
/// flow out of `y'` at `x`. `tol` is relative to the largest single flux.
pub fn complex_balanced_distribution_check(
    sys: &MassActionSystem,
    comp: &IrreducibleComponent,
    dist: &FiniteDistribution,
    tol: f64,
) -> Result<ComplexBalanceCheck> {
    let gamma = gamma_system(sys, comp)?;
    let net = sys.network();
    let mut check = ComplexBalanceCheck {
        max_residual: 0.0,
        worst: None,
        scale: 0.0,
        passed: true,
    };
    for &y in &gamma.subnetwork.complex_map {
        let target = &net.complexes()[y].coefficients;
        for x in &comp.states {
            let mut inflow = 0.0;
            let mut outflow = 0.0;
            for &j in &gamma.active_reactions {
                let r = net.reactions()[j];
                if r.target == y {
                    let source = &net.complexes()[r.source].coefficients;
                    let pred: Vec<i64> = (0..x.len())
                        .map(|i| x[i] as i64 - target[i] as i64 + source[i] as i64)
                        .collect();
                    if pred.iter().all(|&v| v >= 0) {
                        let pred: Vec<u32> = pred.iter().map(|&v| v as u32).collect();
                        let q = dist.probability(&pred);
                        if q > 0.0 {
                            inflow += q * sys.rate_function(j, &pred);
                        }
                    }
                }
                if r.source == y {
                    outflow += dist.probability(x) * sys.rate_function(j, x);
                }
            }
            check.scale = check.scale.max(inflow).max(outflow);
            let res = (inflow - outflow).abs();
            if res > check.max_residual || check.worst.is_none() {
                check.max_residual = res;
                check.worst = Some((y, x.clone()));
            }
        }
    }
    check.passed = check.max_residual <= tol * check.scale;
    Ok(check)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub component: IrreducibleComponent,
    pub distribution: FiniteDistribution,
    pub check: ComplexBalanceCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticBalanceReport {
    /// Decided by the deterministic solve.
    pub complex_balanced: bool,
    pub equilibrium: Option<Concentration>,
    /// A positive component found in the box, with its stationary
    /// distribution and the per-complex check on it.
    pub witness: Option<Witness>,
    /// The witness check agrees with the deterministic verdict.
    pub consistent: bool,
}

/// Whether the system has a complex balanced stationary distribution on a
/// positive component. The deterministic solve is definitive; a positive
/// component inside `bounds`, if any, is used as a cross-check.
pub fn stochastically_complex_balanced(
    sys: &MassActionSystem,
    bounds: &StateBox,
    tol: f64,
) -> Result<StochasticBalanceReport> {
    let equilibrium = solve_complex_balanced_equilibrium(sys, tol)?;
    let report = irreducible_components(sys.network(), &Region::Box(bounds.clone()))?;
    let mut witness = None;
    for comp in report.components.iter().filter(|c| !c.truncated) {
        if !is_positive_component(sys, comp)? {
            continue;
        }
        let distribution = match &equilibrium {
            Some(c) => product_form(&ProductFormDescriptor {
                c: c.clone(),
                component: comp.clone(),
                species: None,
            })?,
            None => direct_stationary_solve(sys, comp)?,
        };
        let check = complex_balanced_distribution_check(sys, comp, &distribution, tol.max(1e-9))?;
        witness = Some(Witness {
            component: comp.clone(),
            distribution,
            check,
        });
        break;
    }
    let complex_balanced = equilibrium.is_some();
    let consistent = witness
        .as_ref()
        .map_or(true, |w| w.check.passed == complex_balanced);
    Ok(StochasticBalanceReport {
        complex_balanced,
        equilibrium,
        witness,
        consistent,
    })
}

/// Stationary distribution of a deficiency zero system on a finite
/// component, as a product form built from a complex balanced equilibrium
/// of the terminal system.
pub fn terminal_form_distribution(
    sys: &MassActionSystem,
    comp: &IrreducibleComponent,
) -> Result<FiniteDistribution> {
    let net = sys.network();
    if deficiency(net) != 0 {
        return Err(Error::Hypothesis {
            theorem: "terminal-system theorem",
            detail: format!("the network deficiency is {}, not 0", deficiency(net)),
        });
    }
    if comp.truncated {
        return Err(Error::TruncatedComponent);
    }
    let terminal = terminal_reactions(net);
    let active = active_reactions_on(net, &comp.states);
    if let Some(&j) = active.iter().find(|j| !terminal.contains(j)) {
        return Err(Error::Hypothesis {
            theorem: "terminal-system theorem",
            detail: format!(
                "internal invariant violated: non-terminal reaction {} is active on the component",
                net.reaction_label(j)
            ),
        });
    }
    let sub = terminal_network(net);
    let c = if sub.is_empty() {
        Vec::new()
    } else {
        solve_complex_balanced_equilibrium(&sub.system(sys), crate::balance::DEFAULT_TOL)?
            .ok_or_else(|| {
                Error::Numerical(
                    "internal invariant violated: the terminal system is not complex balanced"
                        .into(),
                )
            })?
    };
    let full = sub.lift(&c, net.n_species(), 1.0);
    product_form_on(&full, Some(&sub.species_map), &comp.states)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentVerdict {
    pub index: usize,
    pub size: usize,
    pub truncated: bool,
    /// States at which the master equation was evaluated. For truncated
    /// components only states whose predecessors are all known are used.
    pub states_checked: usize,
    pub relative_residual: f64,
    pub worst_state: Option<State>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub certificate: Essentiality,
    /// Product form with the given `c` solves the master equation on every
    /// component examined.
    pub empirical: bool,
    /// `c` is a complex balanced equilibrium.
    pub algebraic: bool,
    pub agree: bool,
    pub complex_balanced: bool,
    /// Recurrent states `x` with `min_i x_i` above the good-state bound.
    pub good_states: usize,
    pub good_state_bound: f64,
    pub components: Vec<ComponentVerdict>,
    /// Components on which the product form fails.
    pub failing_components: Vec<usize>,
}

/// Decides whether `c` is a complex balanced equilibrium by testing whether
/// the product form with parameter `c` is stationary on every component in
/// the box, and reports the algebraic check alongside.
pub fn detect_complex_balance_from_distributions(
    sys: &MassActionSystem,
    c: &[f64],
    bounds: &StateBox,
    tol: f64,
) -> Result<DetectionReport> {
    let net = sys.network();
    if c.len() != net.n_species() || c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(
            "c must be a positive vector with one entry per species".into(),
        ));
    }
    let cert = certify_essential(net, bounds)?;
    if cert.class == Essentiality::Neither {
        return Err(Error::Hypothesis {
            theorem: "product-form converse theorem",
            detail: format!(
                "the network is not certified almost essential in the box ({} certified transient states outside the inner half)",
                cert.certified_transient.len()
            ),
        });
    }
    let reach = (0..net.n_reactions())
        .map(|j| net.source(j).max_coefficient() + net.target(j).max_coefficient())
        .max()
        .unwrap_or(0) as f64;
    let bound = reach + cert.transient_radius();

    let report = irreducible_components(net, &Region::Box(bounds.clone()))?;
    let good_states = report
        .components
        .iter()
        .flat_map(|comp| comp.states.iter())
        .filter(|x| x.iter().all(|&v| v as f64 > bound))
        .count();
    if good_states == 0 {
        return Err(Error::BoxTooSmall(format!(
            "no recurrent state with every coordinate above {bound}"
        )));
    }

    let mut verdicts = Vec::new();
    for (index, comp) in report.components.iter().enumerate() {
        let verdict = if comp.truncated {
            truncated_verdict(sys, c, comp, bounds, index, tol)?
        } else {
            let dist = product_form_on(c, None, &comp.states)?;
            let r = master_equation_report(sys, &dist)?;
            ComponentVerdict {
                index,
                size: comp.len(),
                truncated: false,
                states_checked: comp.len(),
                relative_residual: r.relative,
                passed: r.within(tol),
                worst_state: r.argmax,
            }
        };
        verdicts.push(verdict);
    }
    let failing: Vec<usize> = verdicts.iter().filter(|v| !v.passed).map(|v| v.index).collect();
    let empirical = failing.is_empty();
    let algebraic = balance_report(sys, c, tol).is_complex_balanced;
    Ok(DetectionReport {
        certificate: cert.class,
        empirical,
        algebraic,
        agree: empirical == algebraic,
        complex_balanced: empirical && algebraic,
        good_states,
        good_state_bound: bound,
        components: verdicts,
        failing_components: failing,
    })
}

/// Master equation for unnormalised product weights on the part of a
/// truncated component where every predecessor lies in the box and in the
/// component.
fn truncated_verdict(
    sys: &MassActionSystem,
    c: &[f64],
    comp: &IrreducibleComponent,
    bounds: &StateBox,
    index: usize,
    tol: f64,
) -> Result<ComponentVerdict> {
    let net = sys.network();
    let negated: Vec<Vec<i64>> = (0..net.n_reactions())
        .map(|j| net.reaction_vector(j).iter().map(|d| -d).collect())
        .collect();
    let lw = product_log_weights(c, None, &comp.states)?;
    let mut checked: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    'states: for (k, x) in comp.states.iter().enumerate() {
        let mut preds = Vec::new();
        for (j, v) in negated.iter().enumerate() {
            let Some(pred) = x.shifted(v) else { continue };
            if sys.rate_function(j, &pred) == 0.0 {
                continue;
            }
            if !bounds.contains(&pred) {
                continue 'states;
            }
            match comp.index_of(&pred) {
                Some(p) => preds.push((j, p)),
                None => continue 'states,
            }
        }
        checked.push((k, preds));
    }
    let max_lw = checked
        .iter()
        .map(|(k, _)| lw[*k])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut worst = (0.0, None);
    let mut scale: f64 = 0.0;
    for (k, preds) in &checked {
        let x = &comp.states[*k];
        let w = |i: usize| (lw[i] - max_lw).exp();
        let outflow = w(*k) * sys.total_propensity(x);
        let inflow: f64 = preds
            .iter()
            .map(|&(j, p)| w(p) * sys.rate_function(j, &comp.states[p]))
            .sum();
        scale = scale.max(outflow);
        let r = (inflow - outflow).abs();
        if r > worst.0 || worst.1.is_none() {
            worst = (r, Some(x.clone()));
        }
    }
    let relative = if scale > 0.0 { worst.0 / scale } else { 0.0 };
    Ok(ComponentVerdict {
        index,
        size: comp.len(),
        truncated: true,
        states_checked: checked.len(),
        relative_residual: relative,
        worst_state: worst.1,
        passed: relative <= tol,
    })
}
