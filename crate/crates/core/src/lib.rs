//! Structural and stochastic analysis of mass-action reaction networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: species, complexes, reactions and mass-action rate functions.
//! - [`parse`]: the line-oriented `.crn` text format.
//! - [`structure`]: linkage classes, terminal components, deficiency and
//!   conservation laws, computed with exact rational arithmetic.
//! - [`state_space`]: accessibility, irreducible components inside a finite
//!   box, Γ-networks and essential/almost-essential certificates.
//! - [`balance`]: deterministic mass-action dynamics and complex balanced
//!   equilibria.
//! - [`stationary`]: product-form distributions, master-equation checks and
//!   a direct linear-solve oracle.
//! - [`ssa`]: exact stochastic simulation and empirical distributions.
//! - [`io`]: CSV export and import.

pub mod balance;
pub mod error;
pub mod io;
pub mod linalg;
pub mod network;
pub mod parse;
pub mod ssa;
pub mod state_space;
pub mod stationary;
pub mod structure;

pub use error::{Error, Result};
pub use network::{Complex, MassActionSystem, Reaction, ReactionNetwork, Species};
pub use parse::{parse_network, to_crn_string};
pub use ssa::{tv_distance, EmpiricalDistribution, Trajectory};
pub use state_space::{
    ComponentReport, Essentiality, EssentialityCertificate, GammaSystem, IrreducibleComponent,
    Region, State, StateBox,
};
pub use stationary::{FiniteDistribution, ProductFormDescriptor};
pub use structure::{StructureReport, Subnetwork};
