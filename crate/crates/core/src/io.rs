//! CSV export and import.
//!
//! Distributions: one column per species followed by `probability`.
//! Trajectories: `time` followed by one column per species.
//! Equilibria: a header of species names and a single row of values.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::network::ReactionNetwork;
use crate::ssa::{EmpiricalDistribution, Trajectory};
use crate::state_space::State;
use crate::stationary::FiniteDistribution;

fn write_states<W: Write>(
    out: W,
    names: &[String],
    rows: impl Iterator<Item = (State, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("probability");
    w.write_record(&header)?;
    for (x, p) in rows {
        let mut record: Vec<String> = x.iter().map(u32::to_string).collect();
        record.push(p.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_distribution_csv<W: Write>(
    out: W,
    net: &ReactionNetwork,
    dist: &FiniteDistribution,
) -> Result<()> {
    write_states(
        out,
        &net.species_names(),
        dist.iter().map(|(x, p)| (x.clone(), p)),
    )
}

pub fn write_empirical_csv<W: Write>(
    out: W,
    net: &ReactionNetwork,
    dist: &EmpiricalDistribution,
) -> Result<()> {
    write_states(
        out,
        &net.species_names(),
        dist.support.iter().cloned().zip(dist.weights.iter().copied()),
    )
}

/// Reads a distribution written by [`write_distribution_csv`]. Columns are
/// matched to species by name, so their order is free; every species and a
/// `probability` column must be present.
pub fn read_distribution_csv<R: Read>(input: R, net: &ReactionNetwork) -> Result<FiniteDistribution> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
    };
    let species_cols = net
        .species_names()
        .iter()
        .map(|n| column(n))
        .collect::<Result<Vec<_>>>()?;
    let prob_col = column("probability")?;
    let mut support = Vec::new();
    let mut probabilities = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let bad = |c: usize| {
            Error::InvalidInput(format!(
                "row {}: cannot parse `{}` in column `{}`",
                row + 2,
                field(c),
                &header[c]
            ))
        };
        let x = species_cols
            .iter()
            .map(|&c| field(c).parse::<u32>().map_err(|_| bad(c)))
            .collect::<Result<Vec<_>>>()?;
        let p = field(prob_col).parse::<f64>().map_err(|_| bad(prob_col))?;
        support.push(State(x));
        probabilities.push(p);
    }
    FiniteDistribution::new(support, probabilities)
}

pub fn write_trajectory_csv<W: Write>(out: W, net: &ReactionNetwork, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(net.species_names());
    w.write_record(&header)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let mut record = vec![t.to_string()];
        record.extend(x.iter().map(u32::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_equilibrium_csv<W: Write>(out: W, net: &ReactionNetwork, c: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(net.species_names())?;
    w.write_record(c.iter().map(f64::to_string))?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
