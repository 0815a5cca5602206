//! Studies built on the solvers: symmetry metrics, threshold localization,
//! parameter sweeps, two-component concentration and the small-mass
//! concentration profile against the Dirichlet normal derivative.

use crate::eigen::{
    interval_reference, lambda_1d, minimize_auxiliary_with, neumann_lambda, AuxiliaryOptions,
    SYMMETRY_SENTINEL,
};
use crate::energy::{minimize_reduced_from, EnergyReport, ReducedOptions};
use crate::error::{invalid, Error, Result};
use crate::fem::{assemble_load, weighted_cv, Operators, RobinConfig, ScalarField, ThicknessField};
use crate::mesh::{generate_two_discs, Mesh2D, Point};
use crate::sparse::cg_solve;

/// Radius around the flux minimizers that counts as "concentrated".
pub const CONCENTRATION_RADIUS: f64 = 0.1;

/// Relative slack of the monotonicity check on sweep tables.
pub const MONOTONICITY_TOL: f64 = 1e-9;

/// Relative window above the global flux minimum in which local minima
/// count as flux minimizers.
pub const FLUX_MINIMIZER_WINDOW: f64 = 0.01;

const NEUMANN_TOL: f64 = 1e-10;
const DIRICHLET_SOLVE_TOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 50_000;

/// Lumped coefficient of variation of a boundary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symmetry {
    /// `SYMMETRY_SENTINEL` when `degenerate`.
    pub cv: f64,
    /// The weighted mean of the trace is below 1e-14.
    pub degenerate: bool,
}

impl Symmetry {
    fn of(weights: &[f64], values: &[f64]) -> Self {
        match weighted_cv(weights, values) {
            Some(cv) => Self { cv, degenerate: false },
            None => Self {
                cv: SYMMETRY_SENTINEL,
                degenerate: true,
            },
        }
    }
}

/// CV of `|u|` on the boundary of a connected mesh.
pub fn symmetry_metric(mesh: &Mesh2D, u: &ScalarField) -> Result<Symmetry> {
    if mesh.n_components() != 1 {
        return Err(invalid(format!(
            "symmetry metric needs a single boundary component, got {}; use component_symmetry",
            mesh.n_components()
        )));
    }
    Ok(component_symmetry(mesh, u)?.remove(0))
}

/// CV of `|u|` on the boundary of every component.
pub fn component_symmetry(mesh: &Mesh2D, u: &ScalarField) -> Result<Vec<Symmetry>> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            actual: u.len(),
        });
    }
    let trace: Vec<f64> = u.boundary_values(mesh).iter().map(|v| v.abs()).collect();
    Ok(per_component(mesh, &trace)
        .into_iter()
        .map(|(w, v)| Symmetry::of(&w, &v))
        .collect())
}

/// Lumped CV of the thickness on every component (`None` where it vanishes).
pub fn component_thickness_cv(mesh: &Mesh2D, h: &ThicknessField) -> Vec<Option<f64>> {
    per_component(mesh, h.values())
        .into_iter()
        .map(|(w, v)| weighted_cv(&w, &v))
        .collect()
}

/// `Σ wᵢhᵢ` per component divided by the total.
pub fn component_mass_fractions(mesh: &Mesh2D, h: &ThicknessField) -> Vec<f64> {
    let total = h.mass();
    per_component(mesh, h.values())
        .into_iter()
        .map(|(w, v)| w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / total)
        .collect()
}

/// Splits per-slot values into (weights, values) per component.
fn per_component(mesh: &Mesh2D, values: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let trace = mesh.trace();
    let mut out = vec![(Vec::new(), Vec::new()); mesh.n_components()];
    for ((&c, &w), &v) in trace.components().iter().zip(trace.weights()).zip(values) {
        out[c].0.push(w);
        out[c].1.push(v);
    }
    out
}

/// Outcome of a threshold bisection.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    /// Midpoint of the final bracket.
    pub m0: f64,
    /// Final bracket; `λ(lo) > reference > λ(hi)`.
    pub bracket: (f64, f64),
    pub lambda_bracket: (f64, f64),
    /// Λ, the value `λ_m` is compared with.
    pub reference: f64,
    /// Every `(m, λ_m)` probe in evaluation order.
    pub samples: Vec<(f64, f64)>,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

/// Bisection on `probe(m) − reference` for a decreasing `probe`.
///
/// The initial bracket must satisfy `probe(lo) > reference > probe(hi)`;
/// every step keeps that property.
pub fn bisect_threshold(
    reference: f64,
    bracket: (f64, f64),
    tol: f64,
    mut probe: impl FnMut(f64) -> Result<f64>,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(invalid(format!("bracket must satisfy 0 < m_lo < m_hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("bracket tolerance must be positive, got {tol}")));
    }
    let mut samples = Vec::new();
    let mut eval = |m: f64, samples: &mut Vec<(f64, f64)>| -> Result<f64> {
        match probe(m) {
            Ok(l) => {
                samples.push((m, l));
                Ok(l)
            }
            Err(e) => Err(Error::ProbeFailed {
                m,
                samples: samples.clone(),
                source: Box::new(e),
            }),
        }
    };
    let mut l_lo = eval(lo, &mut samples)?;
    let mut l_hi = eval(hi, &mut samples)?;
    if !(l_lo > reference && l_hi < reference) {
        return Err(Error::InvalidBracket {
            m_lo: lo,
            m_hi: hi,
            lambda_lo: l_lo,
            lambda_hi: l_hi,
            reference,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let l = eval(mid, &mut samples)?;
        if l > reference {
            lo = mid;
            l_lo = l;
        } else if l < reference {
            hi = mid;
            l_hi = l;
        } else {
            lo = mid;
            hi = mid;
            l_lo = l;
            l_hi = l;
            break;
        }
        assert!(
            l_lo > reference && l_hi < reference,
            "bisection lost the straddle"
        );
    }
    Ok(ThresholdResult {
        m0: 0.5 * (lo + hi),
        bracket: (lo, hi),
        lambda_bracket: (l_lo, l_hi),
        reference,
        samples,
        n_vertices: 0,
        n_triangles: 0,
    })
}

/// Brackets the mass `m₀` at which `λ_m` crosses the first nonzero Neumann
/// eigenvalue Λ of a connected mesh.
///
/// Each probe adds the minimizers of the neighbouring probes to the
/// restart schedule.
pub fn threshold_m0(
    mesh: &Mesh2D,
    k: RobinConfig,
    bracket: (f64, f64),
    tol: f64,
    opts: &AuxiliaryOptions,
) -> Result<ThresholdResult> {
    let reference = neumann_lambda(mesh, NEUMANN_TOL)?;
    let mut seen: Vec<(f64, ScalarField)> = Vec::new();
    let mut result = bisect_threshold(reference, bracket, tol, |m| {
        let below = seen.iter().filter(|(x, _)| *x < m).max_by(|a, b| a.0.total_cmp(&b.0));
        let above = seen.iter().filter(|(x, _)| *x > m).min_by(|a, b| a.0.total_cmp(&b.0));
        let extra: Vec<ScalarField> = below.into_iter().chain(above).map(|(_, u)| u.clone()).collect();
        let report = minimize_auxiliary_with(mesh, k, m, opts, &extra)?;
        seen.push((m, report.u));
        Ok(report.lambda)
    })?;
    result.n_vertices = mesh.n_vertices();
    result.n_triangles = mesh.n_triangles();
    Ok(result)
}

/// The same bisection on the interval `(0, L)`, where Λ = π²/L². Since
/// `λ_m < Λ` for every `m` this always fails with
/// [`Error::InvalidBracket`].
pub fn threshold_m0_1d(
    k: f64,
    length: f64,
    n: usize,
    bracket: (f64, f64),
    tol: f64,
) -> Result<ThresholdResult> {
    let mut result = bisect_threshold(interval_reference(length), bracket, tol, |m| {
        lambda_1d(k, m, length, n)
    })?;
    result.n_vertices = n;
    Ok(result)
}

/// Which minimization a sweep runs per mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// `λ_m` of the auxiliary eigenvalue problem.
    Eigen,
    /// Minimal energy of the heat-source problem.
    Energy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: f64,
    /// `λ_m` or the minimal energy; `None` if the row failed.
    pub value: Option<f64>,
    /// Boundary CV of `|u|` (over all components together).
    pub symmetry: Option<f64>,
    pub iterations: usize,
    pub best_restart: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_valid(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Pairs of consecutive valid rows whose value rises by more than
    /// `MONOTONICITY_TOL` relative.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let valid: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].is_valid()).collect();
        valid
            .windows(2)
            .filter(|w| {
                let a = self.rows[w[0]].value.expect("valid");
                let b = self.rows[w[1]].value.expect("valid");
                b - a > MONOTONICITY_TOL * a.abs().max(b.abs())
            })
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Fails on the first monotonicity violation.
    pub fn check_monotone(&self) -> Result<()> {
        match self.monotonicity_violations().first() {
            None => Ok(()),
            Some(&(i, j)) => Err(Error::NotMonotone {
                m_lo: self.rows[i].m,
                m_hi: self.rows[j].m,
                value_lo: self.rows[i].value.expect("valid"),
                value_hi: self.rows[j].value.expect("valid"),
            }),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub auxiliary: AuxiliaryOptions,
    pub reduced: ReducedOptions,
}


/// One minimization per mass on a strictly increasing grid.
///
/// Rows run in order and each one is warm-started from the previous
/// minimizer: both objectives decrease pointwise in `m`, so the warm start
/// alone already bounds the new row by the previous one. Failed rows are
/// kept with their error message; call [`SweepTable::check_monotone`] to
/// enforce the monotonicity invariant.
pub fn sweep(
    mesh: &Mesh2D,
    k: RobinConfig,
    m_grid: &[f64],
    kind: SweepKind,
    f: &ScalarField,
    opts: &SweepOptions,
) -> Result<SweepTable> {
    if let Some(&m) = m_grid.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    if m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("m grid must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(m_grid.len());
    let mut previous: Option<ScalarField> = None;
    for &m in m_grid {
        let outcome = match kind {
            SweepKind::Eigen => {
                let extra: Vec<ScalarField> = previous.iter().cloned().collect();
                minimize_auxiliary_with(mesh, k, m, &opts.auxiliary, &extra)
                    .map(|r| (r.lambda, r.symmetry, r.iterations, Some(r.best_restart), r.u))
            }
            SweepKind::Energy => minimize_reduced_from(mesh, k, m, f, &opts.reduced, previous.as_ref())
                .map(|r| {
                    let sym = trace_cv(mesh, &r.u);
                    (r.energy, sym, r.iterations, None, r.u)
                }),
        };
        rows.push(match outcome {
            Ok((value, symmetry, iterations, best_restart, u)) => {
                previous = Some(u);
                SweepRow {
                    m,
                    value: Some(value),
                    symmetry: Some(symmetry),
                    iterations,
                    best_restart,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                m,
                value: None,
                symmetry: None,
                iterations: 0,
                best_restart: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(SweepTable { kind, rows })
}

fn trace_cv(mesh: &Mesh2D, u: &ScalarField) -> f64 {
    let trace: Vec<f64> = u.boundary_values(mesh).iter().map(|v| v.abs()).collect();
    Symmetry::of(mesh.trace().weights(), &trace).cv
}

/// Solves `−Δu₀ = f` with zero trace; boundary entries of the result are 0.
fn dirichlet_solution(mesh: &Mesh2D, ops: &Operators, load: &[f64]) -> Result<Vec<f64>> {
    let interior = crate::eigen::interior_vertices(mesh);
    let mut u = vec![0.0; mesh.n_vertices()];
    if interior.is_empty() {
        return Ok(u);
    }
    let a = ops.stiffness.principal_submatrix(&interior);
    let b: Vec<f64> = interior.iter().map(|&v| load[v]).collect();
    let sol = cg_solve(&a, &b, DIRICHLET_SOLVE_TOL, CG_MAX_ITER)?;
    for (&v, x) in interior.iter().zip(sol.x) {
        u[v] = x;
    }
    Ok(u)
}

/// Outward normal derivative of the Dirichlet solution per boundary trace
/// slot, recovered from the assembly residual `(K u₀ − b)ᵢ / wᵢ`.
pub fn dirichlet_normal_derivative(mesh: &Mesh2D, f: &ScalarField) -> Result<Vec<f64>> {
    let ops = Operators::new(mesh);
    let load = assemble_load(mesh, f)?;
    let u0 = dirichlet_solution(mesh, &ops, &load)?;
    let ku = ops.stiffness.mul(&u0);
    let trace = mesh.trace();
    Ok(trace
        .vertices()
        .iter()
        .zip(trace.weights())
        .map(|(&v, &w)| (ku[v] - load[v]) / w)
        .collect())
}

/// Minimal energy `−½ bᵀu₀` with zero trace, the `m → 0` limit.
pub fn dirichlet_energy(mesh: &Mesh2D, f: &ScalarField) -> Result<f64> {
    let ops = Operators::new(mesh);
    let load = assemble_load(mesh, f)?;
    let u0 = dirichlet_solution(mesh, &ops, &load)?;
    Ok(-0.5 * crate::sparse::dot(&load, &u0))
}

/// Trace slots at local minima of `flux` along each boundary loop that lie
/// within `FLUX_MINIMIZER_WINDOW` (relative) of the global minimum.
pub fn flux_minimizers(mesh: &Mesh2D, flux: &[f64]) -> Result<Vec<usize>> {
    let trace = mesh.trace();
    if flux.len() != trace.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.len(),
            actual: flux.len(),
        });
    }
    let min = flux.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = min + FLUX_MINIMIZER_WINDOW * min.abs();
    let mut out = Vec::new();
    for lp in trace.loops() {
        let slots: Vec<usize> = lp
            .vertices
            .iter()
            .map(|&v| trace.slot(v).expect("loop vertex on trace"))
            .collect();
        let n = slots.len();
        for i in 0..n {
            let (prev, cur, next) = (flux[slots[(i + n - 1) % n]], flux[slots[i]], flux[slots[(i + 1) % n]]);
            if cur <= prev && cur <= next && cur <= cutoff {
                out.push(slots[i]);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ProfileRow {
    pub m: f64,
    /// `hᵢ / m` per trace slot; lumped sum 1.
    pub profile: Vec<f64>,
    /// Lumped mass of the profile within `CONCENTRATION_RADIUS` of the flux
    /// minimizers.
    pub fraction: f64,
    pub energy: f64,
    /// CV of the profile over the whole boundary.
    pub cv: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ConcentrationProfile {
    /// Dirichlet normal derivative per trace slot.
    pub flux: Vec<f64>,
    /// Positions of the flux minimizers.
    pub points: Vec<Point>,
    pub rows: Vec<ProfileRow>,
}

/// Optimal thickness profiles `h_m / m` for a strictly decreasing list of
/// masses, with the share of mass near the minimizers of the Dirichlet
/// normal derivative.
pub fn concentration_profile(
    mesh: &Mesh2D,
    k: RobinConfig,
    f: &ScalarField,
    m_list: &[f64],
    opts: &ReducedOptions,
) -> Result<ConcentrationProfile> {
    if let Some(&m) = m_list.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    if m_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("m list must be strictly decreasing"));
    }
    let flux = dirichlet_normal_derivative(mesh, f)?;
    let trace = mesh.trace();
    let points: Vec<Point> = flux_minimizers(mesh, &flux)?
        .into_iter()
        .map(|s| mesh.vertices()[trace.vertices()[s]])
        .collect();
    let near: Vec<bool> = trace
        .vertices()
        .iter()
        .map(|&v| {
            let p = mesh.vertices()[v];
            points
                .iter()
                .any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= CONCENTRATION_RADIUS)
        })
        .collect();

    let mut rows = Vec::with_capacity(m_list.len());
    let mut previous: Option<ScalarField> = None;
    for &m in m_list {
        let report = minimize_reduced_from(mesh, k, m, f, opts, previous.as_ref())?;
        let profile: Vec<f64> = report.h.values().iter().map(|h| h / m).collect();
        let fraction = trace
            .weights()
            .iter()
            .zip(&profile)
            .zip(&near)
            .filter(|(_, &n)| n)
            .map(|((w, p), _)| w * p)
            .sum();
        rows.push(ProfileRow {
            m,
            cv: weighted_cv(trace.weights(), &profile),
            fraction,
            energy: report.energy,
            iterations: report.iterations,
            profile,
        });
        previous = Some(report.u);
    }
    Ok(ConcentrationProfile { flux, points, rows })
}

/// Optimal insulation of a multi-component mesh and where its mass goes.
#[derive(Debug, Clone)]
pub struct ComponentConcentration {
    /// Mass share per component; sums to 1.
    pub fractions: Vec<f64>,
    /// CV of `h` per component (`None` where `h` vanishes).
    pub thickness_cv: Vec<Option<f64>>,
    pub report: EnergyReport,
}

/// Minimizes the energy on `mesh` and splits the optimal mass by component.
pub fn component_concentration(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    f: &ScalarField,
    opts: &ReducedOptions,
) -> Result<ComponentConcentration> {
    let report = minimize_reduced_from(mesh, k, m, f, opts, None)?;
    Ok(ComponentConcentration {
        fractions: component_mass_fractions(mesh, &report.h),
        thickness_cv: component_thickness_cv(mesh, &report.h),
        report,
    })
}

/// [`component_concentration`] on two discs of radii `r1`, `r2` separated
/// by `gap`, with `f ≡ 1`.
pub fn two_component_concentration(
    r1: f64,
    r2: f64,
    gap: f64,
    k: RobinConfig,
    m: f64,
    level: usize,
) -> Result<ComponentConcentration> {
    let mesh = generate_two_discs(r1, r2, gap, level)?;
    let f = ScalarField::constant(&mesh, 1.0);
    component_concentration(&mesh, k, m, &f, &ReducedOptions::default())
}

/// Energy when the whole mass sits on `component` with constant thickness
/// and every other component is left bare (zero trace there).
pub fn split_energy(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    f: &ScalarField,
    component: usize,
) -> Result<f64> {
    if component >= mesh.n_components() {
        return Err(invalid(format!(
            "component {component} out of range ({} components)",
            mesh.n_components()
        )));
    }
    if !(m > 0.0) {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    let trace = mesh.trace();
    let h = m / trace.component_perimeter(component);
    let ops = Operators::new(mesh);
    let load = assemble_load(mesh, f)?;
    let mut diag = vec![0.0; mesh.n_vertices()];
    let mut bare = vec![false; mesh.n_vertices()];
    for ((&v, &w), &c) in trace.vertices().iter().zip(trace.weights()).zip(trace.components()) {
        if c == component {
            diag[v] = w / (k.k() * h);
        } else {
            bare[v] = true;
        }
    }
    let free: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| !bare[v]).collect();
    let a = ops.stiffness.add_diagonal(&diag)?.principal_submatrix(&free);
    let b: Vec<f64> = free.iter().map(|&v| load[v]).collect();
    let sol = cg_solve(&a, &b, DIRICHLET_SOLVE_TOL, CG_MAX_ITER)?;
    Ok(-0.5 * crate::sparse::dot(&b, &sol.x))
}
