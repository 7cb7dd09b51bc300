use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use crn_core::balance::{solve_complex_balanced_equilibrium, DEFAULT_TOL};
use crn_core::io::{read_distribution_csv, write_distribution_csv, write_empirical_csv, write_trajectory_csv};
use crn_core::ssa::{empirical_distribution, simulate_capped};
use crn_core::state_space::{active_reactions_on, gamma_system, irreducible_components};
use crn_core::stationary::{
    complex_balanced_distribution_check, direct_stationary_solve, master_equation_report, product_form,
    terminal_form_distribution,
};
use crn_core::structure::{analyze_structure, deficiency, is_weakly_reversible};
use crn_core::{
    parse_network, tv_distance, Error, FiniteDistribution, IrreducibleComponent, MassActionSystem,
    ProductFormDescriptor, Region, State, StateBox,
};
use serde_json::{json, Value};

use crate::{Format, Method, RegionArgs, EXIT_HYPOTHESIS, EXIT_TRUNCATED};

/// What a command prints, plus lines for stderr and the exit code.
pub struct Output {
    pub body: String,
    pub notes: Vec<String>,
    pub code: u8,
}

impl Output {
    fn ok(body: String) -> Self {
        Self {
            body,
            notes: Vec::new(),
            code: 0,
        }
    }
}

fn load(path: &Path) -> anyhow::Result<MassActionSystem> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_network(&text).map_err(|e| anyhow!(e).context(path.display().to_string()))
}

fn parse_counts(text: &str, what: &str) -> anyhow::Result<Vec<u32>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("{what} `{text}`: `{}` is not a count", s.trim())).into())
        })
        .collect()
}

fn parse_state(text: &str, n: usize) -> anyhow::Result<State> {
    let x = parse_counts(text, "initial state")?;
    if x.len() != n {
        bail!(Error::InvalidInput(format!(
            "initial state `{text}` has {} entries but the network has {n} species",
            x.len()
        )));
    }
    Ok(State(x))
}

fn parse_box(text: &str, n: usize) -> anyhow::Result<StateBox> {
    let caps = parse_counts(text, "box")?;
    match caps.len() {
        1 => Ok(StateBox::uniform(n, caps[0])),
        k if k == n => Ok(StateBox::new(caps)),
        k => bail!(Error::InvalidInput(format!(
            "box `{text}` has {k} entries but the network has {n} species"
        ))),
    }
}

fn region(args: &RegionArgs, n: usize) -> anyhow::Result<Region> {
    let bounds = parse_box(&args.caps, n)?;
    Ok(match &args.init {
        Some(init) => Region::Slice {
            init: parse_state(init, n)?,
            bounds,
        },
        None => Region::Box(bounds),
    })
}

fn fmt_state(x: &State) -> String {
    let parts: Vec<String> = x.iter().map(u32::to_string).collect();
    format!("({})", parts.join(", "))
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialise") + "\n"
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> crn_core::Result<()>) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn reject_csv(format: Format, command: &str) -> anyhow::Result<()> {
    if format == Format::Csv {
        bail!(Error::InvalidInput(format!("`{command}` has no CSV output")));
    }
    Ok(())
}

pub fn analyze(file: &Path, format: Format) -> anyhow::Result<Output> {
    reject_csv(format, "analyze")?;
    let sys = load(file)?;
    let net = sys.network();
    let report = analyze_structure(net);
    let equilibrium = solve_complex_balanced_equilibrium(&sys, DEFAULT_TOL).ok().flatten();
    if format == Format::Text {
        let mut s = String::new();
        let label_set = |set: &[usize]| {
            let labels: Vec<String> = set.iter().map(|&c| net.complex_label(c)).collect();
            format!("{{{}}}", labels.join(", "))
        };
        writeln!(s, "species: {}", net.species_names().join(" "))?;
        writeln!(
            s,
            "complexes m = {}, linkage classes ℓ = {}, rank s = {}, deficiency δ = {}",
            report.m, report.ell, report.s, report.delta
        )?;
        writeln!(s, "weakly reversible: {}", report.weakly_reversible)?;
        let classes: Vec<String> = report.linkage_classes.iter().map(|c| label_set(c)).collect();
        writeln!(s, "linkage classes: {}", classes.join(" "))?;
        let sccs: Vec<String> = report.terminal_sccs.iter().map(|c| label_set(c)).collect();
        writeln!(s, "terminal SCCs: {}", sccs.join(" "))?;
        for w in &report.conservation_laws {
            writeln!(s, "conservation law: {w:?}")?;
        }
        match &equilibrium {
            Some(c) => writeln!(s, "complex balanced equilibrium: {c:?}")?,
            None => writeln!(s, "complex balanced equilibrium: none")?,
        }
        return Ok(Output::ok(s));
    }
    let mut v = serde_json::to_value(&report)?;
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("species".into(), json!(net.species_names()));
    obj.insert(
        "complexes".into(),
        json!((0..net.n_complexes()).map(|c| net.complex_label(c)).collect::<Vec<_>>()),
    );
    obj.insert(
        "reactions".into(),
        json!((0..net.n_reactions())
            .map(|j| json!({"label": net.reaction_label(j), "rate": sys.rate(j)}))
            .collect::<Vec<_>>()),
    );
    obj.insert("complex_balanced_equilibrium".into(), json!(equilibrium));
    Ok(Output::ok(to_json(&v)))
}

pub fn components(file: &Path, args: &RegionArgs, format: Format) -> anyhow::Result<Output> {
    reject_csv(format, "components")?;
    let sys = load(file)?;
    let net = sys.network();
    let region = region(args, net.n_species())?;
    let report = irreducible_components(net, &region)?;
    let mut entries = Vec::new();
    let mut text = String::new();
    for (i, comp) in report.components.iter().enumerate() {
        let active = active_reactions_on(net, &comp.states);
        let positive = active.len() == net.n_reactions();
        let gamma = if comp.truncated {
            Value::Null
        } else {
            let g = gamma_system(&sys, comp)?;
            json!({
                "reactions": g.active_reactions.iter().map(|&j| net.reaction_label(j)).collect::<Vec<_>>(),
                "deficiency": deficiency(&g.subnetwork.network),
                "weakly_reversible": is_weakly_reversible(&g.subnetwork.network),
            })
        };
        writeln!(
            text,
            "component {i}: {} states{}{}",
            comp.len(),
            if comp.truncated { ", truncated" } else { "" },
            if positive { ", positive" } else { "" }
        )?;
        if let Some(g) = gamma.as_object() {
            writeln!(
                text,
                "  Γ-network: deficiency {}, weakly reversible {}",
                g["deficiency"], g["weakly_reversible"]
            )?;
        }
        let states: Vec<String> = comp.states.iter().map(fmt_state).collect();
        writeln!(text, "  {}", states.join(" "))?;
        entries.push(json!({
            "size": comp.len(),
            "truncated": comp.truncated,
            "positive": positive,
            "states": comp.states,
            "gamma": gamma,
        }));
    }
    let transient: Vec<String> = report.transient.iter().map(fmt_state).collect();
    writeln!(text, "transient: {}", transient.join(" "))?;
    let truncated = report.any_truncated();
    let body = match format {
        Format::Text => text,
        _ => to_json(&json!({
            "species": net.species_names(),
            "region": region,
            "truncated": truncated,
            "components": entries,
            "transient": report.transient,
        })),
    };
    let mut out = Output::ok(body);
    if truncated {
        out.notes
            .push("warning: some component reaches the box boundary; closedness is not certified".into());
        out.code = EXIT_TRUNCATED;
    }
    Ok(out)
}

fn containing_component(sys: &MassActionSystem, args: &RegionArgs) -> anyhow::Result<IrreducibleComponent> {
    let n = sys.n_species();
    let init = parse_state(
        args.init
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("`--init` is required".into()))?,
        n,
    )?;
    let region = Region::Slice {
        init: init.clone(),
        bounds: parse_box(&args.caps, n)?,
    };
    let report = irreducible_components(sys.network(), &region)?;
    report.component_of(&init).cloned().ok_or_else(|| {
        Error::Hypothesis {
            theorem: "irreducibility",
            detail: format!(
                "{} is transient in the box; start from a state of a closed component",
                fmt_state(&init)
            ),
        }
        .into()
    })
}

pub fn stationary(
    file: &Path,
    args: &RegionArgs,
    method: Method,
    tol: f64,
    format: Format,
) -> anyhow::Result<Output> {
    let sys = load(file)?;
    let net = sys.network();
    let c = match method {
        Method::Product => Some(solve_complex_balanced_equilibrium(&sys, DEFAULT_TOL)?.ok_or_else(|| {
            Error::Hypothesis {
                theorem: "product-form theorem",
                detail: "the system has no complex balanced equilibrium".into(),
            }
        })?),
        _ => None,
    };
    let comp = containing_component(&sys, args)?;
    if comp.truncated {
        bail!(Error::TruncatedComponent);
    }
    let dist: FiniteDistribution = match method {
        Method::Product => product_form(&ProductFormDescriptor {
            c: c.clone().expect("solved above"),
            component: comp.clone(),
            species: None,
        })?,
        Method::Terminal => terminal_form_distribution(&sys, &comp)?,
        Method::Direct => direct_stationary_solve(&sys, &comp)?,
    };
    let residual = master_equation_report(&sys, &dist)?;
    let passed = residual.within(tol);
    let summary = format!(
        "{} states, relative master-equation residual {:.3e} (max {:.3e}, tolerance {tol:e})",
        dist.len(),
        residual.relative,
        residual.max_residual
    );
    let body = match format {
        Format::Csv => csv_string(|buf| write_distribution_csv(buf, net, &dist))?,
        Format::Json => to_json(&json!({
            "method": method_name(method),
            "species": net.species_names(),
            "equilibrium": c,
            "log_normalizer": dist.log_normalizer(),
            "residual": residual,
            "passed": passed,
            "distribution": dist,
        })),
        Format::Text => {
            let mut s = format!("{summary}\n");
            for (x, p) in dist.iter() {
                writeln!(s, "{} {p:.12e}", fmt_state(x))?;
            }
            s
        }
    };
    let mut out = Output::ok(body);
    if format == Format::Csv {
        out.notes.push(summary);
    }
    if !passed {
        out.notes.push(format!(
            "error: residual exceeds tolerance at {}",
            residual.argmax.as_ref().map(fmt_state).unwrap_or_default()
        ));
        out.code = EXIT_HYPOTHESIS;
    }
    Ok(out)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Product => "product",
        Method::Terminal => "terminal",
        Method::Direct => "direct",
    }
}

fn read_distribution(path: &Path, sys: &MassActionSystem) -> anyhow::Result<FiniteDistribution> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    read_distribution_csv(file, sys.network()).map_err(|e| anyhow!(e).context(path.display().to_string()))
}

pub fn verify(
    file: &Path,
    distribution: &Path,
    reference: Option<&Path>,
    tol: f64,
    tv_tol: f64,
    format: Format,
) -> anyhow::Result<Output> {
    reject_csv(format, "verify")?;
    let sys = load(file)?;
    let dist = read_distribution(distribution, &sys)?;
    let residual = master_equation_report(&sys, &dist)?;
    let support = IrreducibleComponent::new(dist.support().to_vec(), false);
    let cb = complex_balanced_distribution_check(&sys, &support, &dist, tol)?;
    let tv = match reference {
        Some(path) => Some(tv_distance(&dist, &read_distribution(path, &sys)?)),
        None => None,
    };
    let master_ok = residual.within(tol);
    let tv_ok = tv.is_none_or(|d| d <= tv_tol);
    let passed = master_ok && tv_ok;
    let body = match format {
        Format::Text => {
            let mut s = String::new();
            writeln!(
                s,
                "master equation: relative residual {:.3e}, max {:.3e}{} [{}]",
                residual.relative,
                residual.max_residual,
                residual
                    .argmax
                    .as_ref()
                    .map(|x| format!(" at {}", fmt_state(x)))
                    .unwrap_or_default(),
                if master_ok { "pass" } else { "fail" }
            )?;
            writeln!(
                s,
                "complex balance: max residual {:.3e} [{}]",
                cb.max_residual,
                if cb.passed { "balanced" } else { "not balanced" }
            )?;
            if let Some(d) = tv {
                writeln!(s, "total variation to reference: {d:.3e} [{}]", if tv_ok { "pass" } else { "fail" })?;
            }
            s
        }
        _ => to_json(&json!({
            "support_size": dist.len(),
            "tol": tol,
            "master_equation": residual,
            "complex_balance": {
                "max_residual": cb.max_residual,
                "worst_complex": cb.worst.as_ref().map(|(y, _)| sys.network().complex_label(*y)),
                "worst_state": cb.worst.as_ref().map(|(_, x)| x),
                "scale": cb.scale,
                "balanced": cb.passed,
            },
            "reference_tv": tv,
            "tv_tol": tv_tol,
            "passed": passed,
        })),
    };
    let mut out = Output::ok(body);
    if !passed {
        out.code = EXIT_HYPOTHESIS;
    }
    Ok(out)
}

pub fn simulate(
    file: &Path,
    init: &str,
    t_end: f64,
    seed: u64,
    burn_in: Option<f64>,
    max_jumps: usize,
    format: Format,
) -> anyhow::Result<Output> {
    let sys = load(file)?;
    let net = sys.network();
    let x0 = parse_state(init, net.n_species())?;
    let traj = simulate_capped(&sys, &x0, t_end, seed, max_jumps)?;
    let mut notes = Vec::new();
    if traj.capped {
        notes.push(format!(
            "warning: stopped after {max_jumps} jumps at t = {}, before t_end = {t_end}",
            traj.t_end
        ));
    }
    let body = match burn_in {
        Some(b) => {
            let emp = empirical_distribution(&traj, b)?;
            match format {
                Format::Csv => csv_string(|buf| write_empirical_csv(buf, net, &emp))?,
                Format::Json => to_json(&json!({
                    "species": net.species_names(),
                    "seed": seed,
                    "rng": traj.rng,
                    "burn_in": b,
                    "t_end": traj.t_end,
                    "jumps": traj.reactions.len(),
                    "empirical": emp,
                })),
                Format::Text => {
                    let mut s = format!("window [{b}, {}], {} jumps\n", traj.t_end, traj.reactions.len());
                    for (x, w) in emp.support.iter().zip(&emp.weights) {
                        writeln!(s, "{} {w:.6}", fmt_state(x))?;
                    }
                    s
                }
            }
        }
        None => match format {
            Format::Csv => csv_string(|buf| write_trajectory_csv(buf, net, &traj))?,
            Format::Json => to_json(&json!({
                "species": net.species_names(),
                "trajectory": traj,
            })),
            Format::Text => {
                let mut s = String::new();
                for (t, x) in traj.times.iter().zip(&traj.states) {
                    writeln!(s, "{t:.6} {}", fmt_state(x))?;
                }
                if traj.absorbed {
                    writeln!(s, "absorbed")?;
                }
                s
            }
        },
    };
    Ok(Output {
        body,
        notes,
        code: 0,
    })
}
