//! Shared inputs for the criterion benchmarks.

use crn_core::{parse_network, MassActionSystem};

pub const BINDING: &str = include_str!("../../core/fixtures/binding.crn");
pub const TERMINAL_DRAIN: &str = include_str!("../../core/fixtures/terminal_drain.crn");
pub const TWO_LEVELS: &str = include_str!("../../core/fixtures/two_levels.crn");
pub const SCHLOGL: &str = include_str!("../../core/fixtures/schlogl_poisson.crn");

pub fn system(text: &str) -> MassActionSystem {
    parse_network(text).expect("bundled networks parse")
}
