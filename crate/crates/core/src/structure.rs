//! Structural invariants of a reaction network.
//!
//! Linkage classes are the connected components of the undirected reaction
//! graph. Terminal strongly connected components are the sinks of the SCC
//! condensation of the directed reaction graph, and a reaction is terminal
//! exactly when its source lies in one of them (an edge leaving a sink SCC
//! cannot exist). Rank and left kernel of the stoichiometric matrix are
//! computed over the rationals.

use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{primitive_integer_vector, RationalMatrix};
use crate::network::{Complex, MassActionSystem, Reaction, ReactionNetwork};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub ell: usize,
    pub s: usize,
    pub delta: usize,
    pub linkage_classes: Vec<Vec<usize>>,
    pub terminal_sccs: Vec<Vec<usize>>,
    pub terminal_reactions: Vec<usize>,
    pub weakly_reversible: bool,
    /// Primitive integer basis of `{w : wᵀ(y' − y) = 0 for every reaction}`.
    pub conservation_laws: Vec<Vec<i64>>,
}

/// The subnetwork induced by a subset of reactions. Species and complexes
/// not touched by the subset are dropped; the maps translate induced
/// indices back to the parent network.
#[derive(Clone, Debug, PartialEq)]
pub struct Subnetwork {
    pub reaction_subset: Vec<usize>,
    pub network: ReactionNetwork,
    pub species_map: Vec<usize>,
    pub complex_map: Vec<usize>,
}

impl Subnetwork {
    pub fn induced(parent: &ReactionNetwork, subset: &[usize]) -> Self {
        let reaction_subset: Vec<usize> = subset
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut complex_set = BTreeSet::new();
        for &j in &reaction_subset {
            let r = parent.reactions()[j];
            complex_set.insert(r.source);
            complex_set.insert(r.target);
        }
        let complex_map: Vec<usize> = complex_set.into_iter().collect();
        let species_map: Vec<usize> = (0..parent.n_species())
            .filter(|&i| {
                complex_map
                    .iter()
                    .any(|&c| parent.complexes()[c].coefficients[i] > 0)
            })
            .collect();
        let names = species_map
            .iter()
            .map(|&i| parent.species()[i].name.clone())
            .collect();
        let complexes = complex_map
            .iter()
            .map(|&c| {
                Complex::new(
                    species_map
                        .iter()
                        .map(|&i| parent.complexes()[c].coefficients[i])
                        .collect(),
                )
            })
            .collect();
        let local = |c: usize| complex_map.binary_search(&c).unwrap();
        let reactions = reaction_subset
            .iter()
            .map(|&j| {
                let r = parent.reactions()[j];
                Reaction {
                    source: local(r.source),
                    target: local(r.target),
                }
            })
            .collect();
        let network = ReactionNetwork::new(names, complexes, reactions)
            .expect("induced subnetwork of a valid network is valid");
        Self {
            reaction_subset,
            network,
            species_map,
            complex_map,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.reaction_subset.is_empty()
    }

    /// The subsystem with rates inherited from `parent`.
    pub fn system(&self, parent: &MassActionSystem) -> MassActionSystem {
        let rates = self.reaction_subset.iter().map(|&j| parent.rate(j)).collect();
        MassActionSystem::new(self.network.clone(), rates)
            .expect("inherited rates are positive")
    }

    /// Restricts a parent-species vector to the induced species.
    pub fn project<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.species_map.iter().map(|&i| v[i]).collect()
    }

    /// Embeds an induced-species vector into the parent species, filling the
    /// remaining coordinates with `fill`.
    pub fn lift<T: Copy>(&self, v: &[T], n_parent: usize, fill: T) -> Vec<T> {
        let mut out = vec![fill; n_parent];
        for (&i, &x) in self.species_map.iter().zip(v) {
            out[i] = x;
        }
        out
    }
}

/// Connected components of the undirected reaction graph, each sorted, in
/// order of their smallest complex.
pub fn linkage_classes(net: &ReactionNetwork) -> Vec<Vec<usize>> {
    let m = net.n_complexes();
    let mut uf = UnionFind::<usize>::new(m);
    for r in net.reactions() {
        uf.union(r.source, r.target);
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_to_class = std::collections::HashMap::new();
    for c in 0..m {
        let root = uf.find(c);
        let idx = *root_to_class.entry(root).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[idx].push(c);
    }
    classes
}

/// Strongly connected components of the reaction graph, paired with a flag
/// marking sink components of the condensation.
fn strong_components(net: &ReactionNetwork) -> Vec<(Vec<usize>, bool)> {
    let m = net.n_complexes();
    let mut g = DiGraph::<(), ()>::with_capacity(m, net.n_reactions());
    let nodes: Vec<_> = (0..m).map(|_| g.add_node(())).collect();
    for r in net.reactions() {
        g.add_edge(nodes[r.source], nodes[r.target], ());
    }
    let sccs = tarjan_scc(&g);
    let mut comp_of = vec![0usize; m];
    for (ci, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp_of[v.index()] = ci;
        }
    }
    let mut is_sink = vec![true; sccs.len()];
    for r in net.reactions() {
        if comp_of[r.source] != comp_of[r.target] {
            is_sink[comp_of[r.source]] = false;
        }
    }
    let mut out: Vec<(Vec<usize>, bool)> = sccs
        .into_iter()
        .zip(is_sink)
        .map(|(scc, sink)| {
            let mut v: Vec<usize> = scc.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            (v, sink)
        })
        .collect();
    out.sort();
    out
}

/// Sink SCCs of the reaction graph.
pub fn terminal_sccs(net: &ReactionNetwork) -> Vec<Vec<usize>> {
    strong_components(net)
        .into_iter()
        .filter(|(_, sink)| *sink)
        .map(|(v, _)| v)
        .collect()
}

/// Indices of terminal reactions `ℛ*`.
pub fn terminal_reactions(net: &ReactionNetwork) -> Vec<usize> {
    let mut terminal_complex = vec![false; net.n_complexes()];
    for scc in terminal_sccs(net) {
        for c in scc {
            terminal_complex[c] = true;
        }
    }
    net.reactions()
        .iter()
        .enumerate()
        .filter(|(_, r)| terminal_complex[r.source])
        .map(|(j, _)| j)
        .collect()
}

pub fn is_weakly_reversible(net: &ReactionNetwork) -> bool {
    terminal_reactions(net).len() == net.n_reactions()
}

/// Exact rank of the stoichiometric matrix.
pub fn stoichiometric_rank(net: &ReactionNetwork) -> usize {
    let s = net.stoichiometric_matrix();
    RationalMatrix::from_integers(s.nrows(), s.ncols(), |i, j| s[(i, j)]).rank()
}

/// `δ = m − ℓ − s`.
pub fn deficiency(net: &ReactionNetwork) -> usize {
    let m = net.n_complexes();
    let ell = linkage_classes(net).len();
    let s = stoichiometric_rank(net);
    m.checked_sub(ell + s)
        .expect("deficiency is non-negative for every valid network")
}

/// Basis of the left kernel of the stoichiometric matrix; its dimension is
/// `n − s`. Compatibility classes are the level sets of these laws.
pub fn conservation_laws(net: &ReactionNetwork) -> Vec<Vec<i64>> {
    let s = net.stoichiometric_matrix();
    // left kernel of S = right null space of Sᵀ
    let st = RationalMatrix::from_integers(s.ncols(), s.nrows(), |i, j| s[(j, i)]);
    st.null_space()
        .iter()
        .map(|v| primitive_integer_vector(v))
        .collect()
}

pub fn analyze_structure(net: &ReactionNetwork) -> StructureReport {
    let linkage = linkage_classes(net);
    let sccs = terminal_sccs(net);
    let terminal = terminal_reactions(net);
    let s = stoichiometric_rank(net);
    let m = net.n_complexes();
    let ell = linkage.len();
    let delta = m
        .checked_sub(ell + s)
        .expect("deficiency is non-negative for every valid network");
    StructureReport {
        n: net.n_species(),
        m,
        k: net.n_reactions(),
        ell,
        s,
        delta,
        linkage_classes: linkage,
        terminal_sccs: sccs,
        weakly_reversible: terminal.len() == net.n_reactions(),
        terminal_reactions: terminal,
        conservation_laws: conservation_laws(net),
    }
}

/// The terminal network `𝒢*`, induced by the terminal reactions. May be empty.
pub fn terminal_network(net: &ReactionNetwork) -> Subnetwork {
    Subnetwork::induced(net, &terminal_reactions(net))
}

/// The terminal strongly connected component containing complex `y`.
pub fn terminal_component_of(net: &ReactionNetwork, y: usize) -> Result<Subnetwork> {
    let scc = terminal_sccs(net)
        .into_iter()
        .find(|scc| scc.contains(&y))
        .ok_or(Error::NotTerminal(y))?;
    let reactions: Vec<usize> = net
        .reactions()
        .iter()
        .enumerate()
        .filter(|(_, r)| scc.contains(&r.source))
        .map(|(j, _)| j)
        .collect();
    Ok(Subnetwork::induced(net, &reactions))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DeficiencyComparison {
    pub subnetwork: usize,
    pub parent: usize,
    pub ok: bool,
}

/// Compares the deficiency of the subnetwork induced by `subset` with that
/// of the whole network. `ok` must always hold.
pub fn subnetwork_deficiency_check(net: &ReactionNetwork, subset: &[usize]) -> DeficiencyComparison {
    let sub = Subnetwork::induced(net, subset);
    let d_sub = deficiency(&sub.network);
    let d = deficiency(net);
    DeficiencyComparison {
        subnetwork: d_sub,
        parent: d,
        ok: d_sub <= d,
    }
}
