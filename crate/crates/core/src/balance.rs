//! Deterministic mass-action dynamics and complex balanced equilibria.
//!
//! `dz/dt = Σ (y' − y) κ z^y`. A positive `c` is complex balanced when, at
//! every complex, the total flux in equals the total flux out.
//!
//! Complex balanced equilibria are computed from the kinetic Laplacian:
//! for a weakly reversible network, the matrix-tree theorem gives a strictly
//! positive kernel vector `ρ` on each linkage class, and `c` is complex
//! balanced iff `c^y = t_L ρ_y` for a positive scalar `t_L` per linkage
//! class `L`. Taking logarithms turns this into a linear system in `ln c`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ln_rational, RationalMatrix};
use crate::network::{monomial, MassActionSystem};
use crate::structure::{
    conservation_laws, deficiency, is_weakly_reversible, linkage_classes, stoichiometric_rank,
    terminal_component_of, terminal_reactions,
};

pub type Concentration = Vec<f64>;

/// Relative tolerance on complex-balance residuals (relative to the largest
/// complex flux).
pub const DEFAULT_TOL: f64 = 1e-9;

/// Residual of the log-space linear system above which the system is
/// declared not complex balanced.
pub const LOG_SOLVE_TOL: f64 = 1e-8;

pub fn ode_rhs(sys: &MassActionSystem, z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; sys.n_species()];
    for j in 0..sys.n_reactions() {
        let rate = sys.deterministic_rate(j, z);
        for (o, d) in out.iter_mut().zip(sys.network().reaction_vector(j)) {
            *o += d as f64 * rate;
        }
    }
    out
}

/// Analytic Jacobian of [`ode_rhs`].
pub fn jacobian(sys: &MassActionSystem, z: &[f64]) -> DMatrix<f64> {
    let n = sys.n_species();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..sys.n_reactions() {
        let y = &sys.network().source(j).coefficients;
        let xi = sys.network().reaction_vector(j);
        for i in 0..n {
            if y[i] == 0 {
                continue;
            }
            // ∂(z^y)/∂z_i = y_i z^(y − e_i)
            let mut reduced = y.clone();
            reduced[i] -= 1;
            let d = sys.rate(j) * y[i] as f64 * monomial(z, &reduced);
            for (r, &x) in xi.iter().enumerate() {
                jac[(r, i)] += x as f64 * d;
            }
        }
    }
    jac
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFlows {
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
}

impl ComplexFlows {
    /// Largest single complex flux; the natural scale for residuals.
    pub fn scale(&self) -> f64 {
        self.inflow
            .iter()
            .chain(&self.outflow)
            .fold(0.0, |a, &b| a.max(b.abs()))
    }

    pub fn residual(&self) -> Vec<f64> {
        self.inflow
            .iter()
            .zip(&self.outflow)
            .map(|(i, o)| i - o)
            .collect()
    }
}

pub fn complex_flows(sys: &MassActionSystem, c: &[f64]) -> ComplexFlows {
    let m = sys.network().n_complexes();
    let mut inflow = vec![0.0; m];
    let mut outflow = vec![0.0; m];
    for (j, r) in sys.network().reactions().iter().enumerate() {
        let flux = sys.deterministic_rate(j, c);
        outflow[r.source] += flux;
        inflow[r.target] += flux;
    }
    ComplexFlows { inflow, outflow }
}

/// Per-complex inflow minus outflow.
pub fn complex_balance_residual(sys: &MassActionSystem, c: &[f64]) -> Vec<f64> {
    complex_flows(sys, c).residual()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Bound `K` with `‖ode_rhs‖∞ ≤ K · max |complex residual|`: the largest
/// total coefficient of a species over all complexes.
fn complex_matrix_bound(sys: &MassActionSystem) -> f64 {
    let net = sys.network();
    (0..net.n_species())
        .map(|i| net.complexes().iter().map(|c| c.coefficients[i] as f64).sum::<f64>())
        .fold(1.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub point: Concentration,
    pub ode_residual: f64,
    pub cb_residual: f64,
    pub flow_scale: f64,
    pub is_equilibrium: bool,
    pub is_complex_balanced: bool,
}

/// Evaluates both residuals at `c`. The equilibrium threshold is the
/// complex-balance threshold times the bound of [`complex_matrix_bound`], so
/// `is_complex_balanced` implies `is_equilibrium`.
pub fn balance_report(sys: &MassActionSystem, c: &[f64], tol: f64) -> BalanceReport {
    let flows = complex_flows(sys, c);
    let scale = flows.scale();
    let cb_residual = max_abs(&flows.residual());
    let ode_residual = max_abs(&ode_rhs(sys, c));
    let cb_ok = cb_residual <= tol * scale;
    let ode_ok = ode_residual <= tol * scale * complex_matrix_bound(sys);
    BalanceReport {
        point: c.to_vec(),
        ode_residual,
        cb_residual,
        flow_scale: scale,
        is_equilibrium: ode_ok,
        is_complex_balanced: cb_ok,
    }
}

/// Kinetic Laplacian on complexes: entry `(y', y)` is `κ_{y→y'}`, the
/// diagonal holds minus the total outflow rate of each complex.
pub fn kinetic_laplacian(sys: &MassActionSystem) -> DMatrix<f64> {
    let m = sys.network().n_complexes();
    let mut a = DMatrix::zeros(m, m);
    for (j, r) in sys.network().reactions().iter().enumerate() {
        a[(r.target, r.source)] += sys.rate(j);
        a[(r.source, r.source)] -= sys.rate(j);
    }
    a
}

/// `ln ρ_y` for every complex, where `ρ` restricted to each linkage class is
/// the matrix-tree kernel vector of the kinetic Laplacian. Computed exactly
/// over the rationals (every `f64` rate is a rational number).
///
/// Requires a weakly reversible network so that every `ρ_y` is positive.
pub fn tree_constants(sys: &MassActionSystem) -> Result<Vec<f64>> {
    let net = sys.network();
    let mut log_rho = vec![0.0; net.n_complexes()];
    for class in linkage_classes(net) {
        let size = class.len();
        let local = |c: usize| class.binary_search(&c).ok();
        let mut lap = vec![vec![0.0f64; size]; size];
        for (j, r) in net.reactions().iter().enumerate() {
            if let (Some(s), Some(t)) = (local(r.source), local(r.target)) {
                lap[t][s] += sys.rate(j);
                lap[s][s] -= sys.rate(j);
            }
        }
        let full = RationalMatrix::from_floats(size, size, |i, j| lap[i][j]);
        for (yi, &y) in class.iter().enumerate() {
            let keep: Vec<usize> = (0..size).filter(|&i| i != yi).collect();
            let mut minor = RationalMatrix::zeros(size - 1, size - 1);
            for (a, &i) in keep.iter().enumerate() {
                for (b, &j) in keep.iter().enumerate() {
                    minor[(a, b)] = full[(i, j)].clone();
                }
            }
            let mut det = minor.determinant();
            if (size - 1) % 2 == 1 {
                det = -det;
            }
            if det <= num_rational::BigRational::from_integer(0.into()) {
                return Err(Error::Hypothesis {
                    theorem: "matrix-tree kernel positivity",
                    detail: format!(
                        "tree constant of complex {} is not positive; the linkage class is not strongly connected",
                        net.complex_label(y)
                    ),
                });
            }
            log_rho[y] = ln_rational(&det);
        }
    }
    Ok(log_rho)
}

/// Finds a positive complex balanced equilibrium, or `None` if the system
/// is not complex balanced. `tol` is relative to the largest complex flux.
pub fn solve_complex_balanced_equilibrium(
    sys: &MassActionSystem,
    tol: f64,
) -> Result<Option<Concentration>> {
    let net = sys.network();
    let n = net.n_species();
    if net.n_reactions() == 0 {
        return Ok(Some(vec![1.0; n]));
    }
    if !is_weakly_reversible(net) {
        return Ok(None);
    }
    let log_rho = tree_constants(sys)?;
    let classes = linkage_classes(net);
    let m = net.n_complexes();
    let ell = classes.len();

    // y · ln c − a_L = ln ρ_y  for every complex y in linkage class L
    let mut a = DMatrix::zeros(m, n + ell);
    let mut b = DVector::zeros(m);
    for (l, class) in classes.iter().enumerate() {
        for &y in class {
            for (i, &coef) in net.complexes()[y].coefficients.iter().enumerate() {
                a[(y, i)] = coef as f64;
            }
            a[(y, n + l)] = -1.0;
            b[y] = log_rho[y];
        }
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .solve(&b, 1e-12 * svd.singular_values.max().max(1.0))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let ls_residual = (&a * &u - &b).amax();
    if ls_residual > LOG_SOLVE_TOL * b.amax().max(1.0) {
        return Ok(None);
    }
    let mut log_c: Vec<f64> = u.rows(0, n).iter().copied().collect();
    polish_log_concentration(sys, &mut log_c);
    let c: Vec<f64> = log_c.iter().map(|v| v.exp()).collect();
    if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numerical(
            "equilibrium leaves the floating-point range".into(),
        ));
    }
    let report = balance_report(sys, &c, tol);
    if report.is_complex_balanced {
        Ok(Some(c))
    } else {
        Err(Error::Numerical(format!(
            "log-space system is consistent but the complex-balance residual {:.3e} exceeds {:.1e} of the flux scale {:.3e}",
            report.cb_residual, tol, report.flow_scale
        )))
    }
}

/// Gauss–Newton refinement of `ln c` on the scaled complex-balance residual.
fn polish_log_concentration(sys: &MassActionSystem, log_c: &mut [f64]) {
    let net = sys.network();
    let n = net.n_species();
    let m = net.n_complexes();
    let eval = |lc: &[f64]| {
        let c: Vec<f64> = lc.iter().map(|v| v.exp()).collect();
        let flows = complex_flows(sys, &c);
        let scale = flows.scale().max(f64::MIN_POSITIVE);
        (c, flows.residual(), scale)
    };
    let (mut c, mut res, mut scale) = eval(log_c);
    let mut best = max_abs(&res) / scale;
    for _ in 0..20 {
        if best < 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(m, n);
        for (j, r) in net.reactions().iter().enumerate() {
            let y = &net.complexes()[r.source].coefficients;
            let flux = sys.deterministic_rate(j, &c);
            for i in 0..n {
                let d = y[i] as f64 * flux / scale;
                jac[(r.target, i)] += d;
                jac[(r.source, i)] -= d;
            }
        }
        let rhs = DVector::from_iterator(m, res.iter().map(|v| -v / scale));
        let svd = jac.svd(true, true);
        let Ok(step) = svd.solve(&rhs, 1e-12 * svd.singular_values.max().max(1e-300)) else {
            break;
        };
        let candidate: Vec<f64> = log_c.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let (c2, res2, scale2) = eval(&candidate);
        let value = max_abs(&res2) / scale2;
        if !(value < best) {
            break;
        }
        log_c.copy_from_slice(&candidate);
        c = c2;
        res = res2;
        scale = scale2;
        best = value;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalProjection {
    /// Complexes of the terminal component, as parent indices.
    pub complexes: Vec<usize>,
    /// Species of the terminal component, as parent indices.
    pub species: Vec<usize>,
    pub max_residual: f64,
    pub balanced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// Reactions whose source support lies inside `supp x`.
    pub charged_reactions: Vec<usize>,
    /// Charged reactions that are not terminal (must be empty).
    pub non_terminal_charged: Vec<usize>,
    pub projections: Vec<TerminalProjection>,
    pub passed: bool,
}

/// Checks the structure of a (possibly boundary) equilibrium of a
/// deficiency-zero system: every reaction charged at `x` is terminal, and
/// the projection of `x` onto each touched terminal component is complex
/// balanced for that component.
pub fn classify_boundary_equilibrium(
    sys: &MassActionSystem,
    x: &[f64],
    tol: f64,
) -> Result<BoundaryReport> {
    let net = sys.network();
    if deficiency(net) != 0 {
        return Err(Error::Hypothesis {
            theorem: "boundary equilibrium theorem",
            detail: "the network deficiency is not zero".into(),
        });
    }
    let report = balance_report(sys, x, tol);
    if !report.is_equilibrium {
        return Err(Error::Hypothesis {
            theorem: "boundary equilibrium theorem",
            detail: format!("x is not an equilibrium (residual {:.3e})", report.ode_residual),
        });
    }
    let terminal = terminal_reactions(net);
    let charged: Vec<usize> = (0..net.n_reactions())
        .filter(|&j| net.source(j).support().all(|i| x[i] > 0.0))
        .collect();
    let non_terminal: Vec<usize> = charged
        .iter()
        .copied()
        .filter(|j| !terminal.contains(j))
        .collect();

    let mut projections: Vec<TerminalProjection> = Vec::new();
    for &j in &charged {
        if non_terminal.contains(&j) {
            continue;
        }
        let source = net.reactions()[j].source;
        if projections.iter().any(|p| p.complexes.contains(&source)) {
            continue;
        }
        let sub = terminal_component_of(net, source)?;
        let sub_sys = sub.system(sys);
        let projected = sub.project(x);
        let flows = complex_flows(&sub_sys, &projected);
        let max_residual = max_abs(&flows.residual());
        projections.push(TerminalProjection {
            complexes: sub.complex_map.clone(),
            species: sub.species_map.clone(),
            max_residual,
            balanced: max_residual <= tol * flows.scale(),
        });
    }
    let passed = non_terminal.is_empty() && projections.iter().all(|p| p.balanced);
    Ok(BoundaryReport {
        charged_reactions: charged,
        non_terminal_charged: non_terminal,
        projections,
        passed,
    })
}

/// Orthonormal basis (as columns) of the stoichiometric subspace.
pub fn stoichiometric_basis(sys: &MassActionSystem) -> DMatrix<f64> {
    let net = sys.network();
    let n = net.n_species();
    let s = stoichiometric_rank(net);
    if s == 0 {
        return DMatrix::zeros(n, 0);
    }
    let st = net.stoichiometric_matrix().map(|v| v as f64);
    let svd = st.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(n, s, |i, j| u[(i, order[j])])
}

/// True iff every eigenvalue of the Jacobian restricted to the
/// stoichiometric subspace has real part below `−tol`.
pub fn local_stability_check(sys: &MassActionSystem, c: &[f64], tol: f64) -> bool {
    let basis = stoichiometric_basis(sys);
    if basis.ncols() == 0 {
        return true;
    }
    let restricted = basis.transpose() * jacobian(sys, c) * &basis;
    restricted
        .complex_eigenvalues()
        .iter()
        .all(|ev| ev.re < -tol)
}

/// Newton's method in log coordinates for the positive equilibrium in the
/// compatibility class of `class_point`, started from `start`.
pub fn equilibrium_in_class(
    sys: &MassActionSystem,
    class_point: &[f64],
    start: &[f64],
) -> Result<Concentration> {
    let net = sys.network();
    let n = net.n_species();
    if start.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput("starting point must be positive".into()));
    }
    let basis = stoichiometric_basis(sys);
    let laws: Vec<Vec<f64>> = conservation_laws(net)
        .into_iter()
        .map(|w| w.into_iter().map(|v| v as f64).collect())
        .collect();
    let level: Vec<f64> = laws
        .iter()
        .map(|w| w.iter().zip(class_point).map(|(a, b)| a * b).sum())
        .collect();
    let level_scale = level.iter().fold(1.0f64, |a, b| a.max(b.abs()));

    let residual = |u: &[f64]| -> (Vec<f64>, DVector<f64>) {
        let z: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let rhs = DVector::from_vec(ode_rhs(sys, &z));
        let scale = complex_flows(sys, &z).scale().max(f64::MIN_POSITIVE);
        let mut f = DVector::zeros(n);
        let proj = basis.transpose() * rhs / scale;
        for i in 0..basis.ncols() {
            f[i] = proj[i];
        }
        for (k, w) in laws.iter().enumerate() {
            let v: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            f[basis.ncols() + k] = (v - level[k]) / level_scale;
        }
        (z, f)
    };

    let mut u: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let (mut z, mut f) = residual(&u);
    for _ in 0..200 {
        if f.amax() < 1e-13 {
            return Ok(z);
        }
        let scale = complex_flows(sys, &z).scale().max(f64::MIN_POSITIVE);
        let jz = jacobian(sys, &z) * DMatrix::from_diagonal(&DVector::from_vec(z.clone()));
        let mut jac = DMatrix::zeros(n, n);
        let top = basis.transpose() * jz / scale;
        for i in 0..basis.ncols() {
            for j in 0..n {
                jac[(i, j)] = top[(i, j)];
            }
        }
        for (k, w) in laws.iter().enumerate() {
            for j in 0..n {
                jac[(basis.ncols() + k, j)] = w[j] * z[j] / level_scale;
            }
        }
        let Some(step) = jac.lu().solve(&(-&f)) else {
            return Err(Error::Numerical("singular Newton system".into()));
        };
        let mut t = 1.0;
        let current = f.norm();
        loop {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let (z2, f2) = residual(&cand);
            if f2.norm() < current || t < 1e-10 {
                u = cand;
                z = z2;
                f = f2;
                break;
            }
            t *= 0.5;
        }
    }
    if f.amax() < 1e-10 {
        Ok(z)
    } else {
        Err(Error::Numerical(format!(
            "Newton did not converge (residual {:.3e})",
            f.amax()
        )))
    }
}
