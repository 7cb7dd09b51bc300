//! Discrete state space of the stochastic system.
//!
//! The chain lives on `Nⁿ`; everything here works inside a finite
//! [`StateBox`]. Irreducible components are the closed classes of the
//! in-box transition graph. A class whose states have a transition leaving
//! the box cannot be certified closed and is flagged `truncated`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::ops::Deref;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{MassActionSystem, ReactionNetwork};
use crate::structure::{conservation_laws, Subnetwork};

/// Molecule counts, one per species.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<u32>);

impl Deref for State {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for State {
    fn from(v: Vec<u32>) -> Self {
        State(v)
    }
}

impl State {
    /// `self + ξ`, or `None` if a coordinate would become negative.
    pub fn shifted(&self, delta: &[i64]) -> Option<State> {
        self.0
            .iter()
            .zip(delta)
            .map(|(&x, &d)| u32::try_from(x as i64 + d).ok())
            .collect::<Option<Vec<_>>>()
            .map(State)
    }
}

/// Inclusive per-species upper bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateBox {
    pub upper: Vec<u32>,
}

impl StateBox {
    pub fn new(upper: Vec<u32>) -> Self {
        Self { upper }
    }

    pub fn uniform(n: usize, cap: u32) -> Self {
        Self {
            upper: vec![cap; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        x.len() == self.upper.len() && x.iter().zip(&self.upper).all(|(a, b)| a <= b)
    }

    pub fn n_states(&self) -> u128 {
        self.upper.iter().map(|&u| u as u128 + 1).product()
    }

    /// All states of the box in lexicographic order.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        let n = self.upper.len();
        let mut next = Some(vec![0u32; n]);
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if succ[i] < self.upper[i] {
                    succ[i] += 1;
                    next = Some(succ);
                    break;
                }
                succ[i] = 0;
            }
            Some(State(current))
        })
    }

    /// The box with every cap halved, used as the "interior" of a certificate.
    pub fn inner_half(&self) -> StateBox {
        StateBox::new(self.upper.iter().map(|u| u / 2).collect())
    }
}

/// Reactions whose source complex fits in `x`.
pub fn active_reactions_at(net: &ReactionNetwork, x: &[u32]) -> Vec<usize> {
    (0..net.n_reactions())
        .filter(|&j| net.source(j).fits_in(x))
        .collect()
}

/// Union of the active reactions over a set of states.
pub fn active_reactions_on<'a>(
    net: &ReactionNetwork,
    states: impl IntoIterator<Item = &'a State>,
) -> Vec<usize> {
    let mut active = vec![false; net.n_reactions()];
    for x in states {
        for j in active_reactions_at(net, x) {
            active[j] = true;
        }
    }
    (0..net.n_reactions()).filter(|&j| active[j]).collect()
}

/// One-step successors `(reaction, x + ξ)` of `x`.
pub fn successors<'a>(
    net: &'a ReactionNetwork,
    x: &'a State,
) -> impl Iterator<Item = (usize, State)> + 'a {
    (0..net.n_reactions()).filter_map(move |j| {
        if net.source(j).fits_in(x) {
            Some((j, x.shifted(&net.reaction_vector(j)).expect("active reaction keeps counts non-negative")))
        } else {
            None
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReachableSet {
    pub states: BTreeSet<State>,
    /// Some transition from a reached state leaves the box.
    pub truncated: bool,
}

/// Breadth-first closure of `x0` under active reactions, cut at the box.
pub fn reachable_set(net: &ReactionNetwork, x0: &State, bounds: &StateBox) -> Result<ReachableSet> {
    if !bounds.contains(x0) {
        return Err(Error::InvalidInput(format!(
            "initial state {:?} is outside the box {:?}",
            x0.0, bounds.upper
        )));
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    let mut truncated = false;
    seen.insert(x0.clone());
    queue.push_back(x0.clone());
    while let Some(x) = queue.pop_front() {
        for (_, next) in successors(net, &x) {
            if !bounds.contains(&next) {
                truncated = true;
            } else if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(ReachableSet {
        states: seen,
        truncated,
    })
}

/// A closed communicating class found inside a box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrreducibleComponent {
    /// Sorted member states.
    pub states: Vec<State>,
    /// A member has a transition out of the box, so closedness is not certified.
    pub truncated: bool,
}

impl IrreducibleComponent {
    pub fn new(mut states: Vec<State>, truncated: bool) -> Self {
        states.sort();
        states.dedup();
        Self { states, truncated }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.states.len() == 1
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        self.index_of(x).is_some()
    }

    pub fn index_of(&self, x: &[u32]) -> Option<usize> {
        self.states.binary_search_by(|s| s.0.as_slice().cmp(x)).ok()
    }
}

/// Where to look for irreducible components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Every state of the box.
    Box(StateBox),
    /// The compatibility class through `init`, intersected with the box.
    Slice { init: State, bounds: StateBox },
}

impl Region {
    pub fn bounds(&self) -> &StateBox {
        match self {
            Region::Box(b) => b,
            Region::Slice { bounds, .. } => bounds,
        }
    }

    pub fn states(&self, net: &ReactionNetwork) -> Result<Vec<State>> {
        if self.bounds().dim() != net.n_species() {
            return Err(Error::InvalidInput(format!(
                "box has {} caps for {} species",
                self.bounds().dim(),
                net.n_species()
            )));
        }
        match self {
            Region::Box(b) => Ok(b.states().collect()),
            Region::Slice { init, bounds } => {
                if !bounds.contains(init) {
                    return Err(Error::InvalidInput(format!(
                        "initial state {:?} is outside the box {:?}",
                        init.0, bounds.upper
                    )));
                }
                let laws = conservation_laws(net);
                let level = |x: &[u32]| -> Vec<i64> {
                    laws.iter()
                        .map(|w| w.iter().zip(x).map(|(&a, &b)| a * b as i64).sum())
                        .collect()
                };
                let target = level(init);
                Ok(bounds.states().filter(|x| level(x) == target).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentReport {
    pub components: Vec<IrreducibleComponent>,
    /// States of the region lying in no closed class ("grey" states).
    pub transient: Vec<State>,
}

impl ComponentReport {
    pub fn component_of(&self, x: &[u32]) -> Option<&IrreducibleComponent> {
        self.components.iter().find(|c| c.contains(x))
    }

    pub fn any_truncated(&self) -> bool {
        self.components.iter().any(|c| c.truncated)
    }
}

/// In-region transition graph with its strongly connected components.
struct TransitionGraph {
    states: Vec<State>,
    succ: Vec<Vec<usize>>,
    exits_box: Vec<bool>,
    sccs: Vec<Vec<usize>>,
    scc_of: Vec<usize>,
}

impl TransitionGraph {
    fn build(net: &ReactionNetwork, states: Vec<State>, bounds: &StateBox) -> Self {
        let index: HashMap<&State, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut succ = vec![Vec::new(); states.len()];
        let mut exits_box = vec![false; states.len()];
        let mut g = DiGraph::<(), ()>::with_capacity(states.len(), states.len());
        let nodes: Vec<_> = (0..states.len()).map(|_| g.add_node(())).collect();
        for (i, x) in states.iter().enumerate() {
            for (_, next) in successors(net, x) {
                match index.get(&next) {
                    Some(&t) => {
                        succ[i].push(t);
                        g.add_edge(nodes[i], nodes[t], ());
                    }
                    None if !bounds.contains(&next) => exits_box[i] = true,
                    // A successor inside the box is always part of the region,
                    // because transitions preserve every conservation law.
                    None => unreachable!("successor {:?} inside box but outside region", next.0),
                }
            }
        }
        let sccs: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| c.into_iter().map(|v| v.index()).collect())
            .collect();
        let mut scc_of = vec![0; states.len()];
        for (ci, c) in sccs.iter().enumerate() {
            for &v in c {
                scc_of[v] = ci;
            }
        }
        Self {
            states,
            succ,
            exits_box,
            sccs,
            scc_of,
        }
    }

    /// `(closed_in_region, touches_box_exit)` for every SCC.
    fn classify(&self) -> Vec<(bool, bool)> {
        self.sccs
            .iter()
            .enumerate()
            .map(|(ci, members)| {
                let closed = members
                    .iter()
                    .all(|&v| self.succ[v].iter().all(|&t| self.scc_of[t] == ci));
                let exits = members.iter().any(|&v| self.exits_box[v]);
                (closed, exits)
            })
            .collect()
    }
}

/// Closed communicating classes of the region, with the remaining states
/// reported as transient.
pub fn irreducible_components(net: &ReactionNetwork, region: &Region) -> Result<ComponentReport> {
    let states = region.states(net)?;
    if states.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let graph = TransitionGraph::build(net, states, region.bounds());
    let mut components = Vec::new();
    let mut transient = Vec::new();
    for ((closed, exits), members) in graph.classify().into_iter().zip(&graph.sccs) {
        let member_states: Vec<State> = members.iter().map(|&v| graph.states[v].clone()).collect();
        if closed {
            components.push(IrreducibleComponent::new(member_states, exits));
        } else {
            transient.extend(member_states);
        }
    }
    components.sort_by(|a, b| a.states[0].cmp(&b.states[0]));
    transient.sort();
    Ok(ComponentReport {
        components,
        transient,
    })
}

/// The Γ-system of a component: the reactions active somewhere on Γ and
/// their inherited rates.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSystem {
    pub component: IrreducibleComponent,
    pub active_reactions: Vec<usize>,
    pub subnetwork: Subnetwork,
    pub rates: Vec<f64>,
}

impl GammaSystem {
    pub fn system(&self) -> MassActionSystem {
        MassActionSystem::new(self.subnetwork.network.clone(), self.rates.clone())
            .expect("inherited rates are positive")
    }
}

pub fn gamma_system(sys: &MassActionSystem, comp: &IrreducibleComponent) -> Result<GammaSystem> {
    if comp.truncated {
        return Err(Error::TruncatedComponent);
    }
    let active = active_reactions_on(sys.network(), &comp.states);
    let subnetwork = Subnetwork::induced(sys.network(), &active);
    let rates = active.iter().map(|&j| sys.rate(j)).collect();
    Ok(GammaSystem {
        component: comp.clone(),
        active_reactions: active,
        subnetwork,
        rates,
    })
}

/// A component is positive when every reaction of the network is active on it.
pub fn is_positive_component(sys: &MassActionSystem, comp: &IrreducibleComponent) -> Result<bool> {
    if comp.truncated {
        return Err(Error::TruncatedComponent);
    }
    Ok(active_reactions_on(sys.network(), &comp.states).len() == sys.n_reactions())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Essentiality {
    Essential,
    AlmostEssential,
    Neither,
}

/// Box-relative evidence for essentiality.
///
/// A state is certified recurrent when it lies in a closed class without
/// box exits, and certified transient when it can reach, inside the box, a
/// certified closed class it does not belong to. Everything else is
/// uncertain. The verdict is `Essential` when no certified transient state
/// exists, `AlmostEssential` when all of them lie in the inner half of the
/// box, and `Neither` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EssentialityCertificate {
    pub class: Essentiality,
    pub bounds: StateBox,
    pub states_examined: usize,
    pub certified_recurrent: usize,
    pub certified_transient: Vec<State>,
    pub uncertain: usize,
}

impl EssentialityCertificate {
    /// Largest Euclidean norm among certified transient states, the box-relative
    /// stand-in for the constant beyond which every state is recurrent.
    pub fn transient_radius(&self) -> f64 {
        self.certified_transient
            .iter()
            .map(|x| x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn certify_essential(net: &ReactionNetwork, bounds: &StateBox) -> Result<EssentialityCertificate> {
    let states: Vec<State> = bounds.states().collect();
    if states.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let graph = TransitionGraph::build(net, states, bounds);
    let classes = graph.classify();
    let n = graph.states.len();
    let certified_closed = |v: usize| {
        let (closed, exits) = classes[graph.scc_of[v]];
        closed && !exits
    };

    let mut pred = vec![Vec::new(); n];
    for (v, succ) in graph.succ.iter().enumerate() {
        for &t in succ {
            pred[t].push(v);
        }
    }
    let mut reaches_closed = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| certified_closed(v)).collect();
    for &v in &queue {
        reaches_closed[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &p in &pred[v] {
            if !reaches_closed[p] {
                reaches_closed[p] = true;
                queue.push_back(p);
            }
        }
    }

    let recurrent = (0..n).filter(|&v| certified_closed(v)).count();
    let transient: Vec<State> = (0..n)
        .filter(|&v| reaches_closed[v] && !certified_closed(v))
        .map(|v| graph.states[v].clone())
        .collect();
    let uncertain = n - recurrent - transient.len();
    let inner = bounds.inner_half();
    let class = if transient.is_empty() {
        Essentiality::Essential
    } else if transient.iter().all(|x| inner.contains(x)) {
        Essentiality::AlmostEssential
    } else {
        Essentiality::Neither
    };
    Ok(EssentialityCertificate {
        class,
        bounds: bounds.clone(),
        states_examined: n,
        certified_recurrent: recurrent,
        certified_transient: transient,
        uncertain,
    })
}
