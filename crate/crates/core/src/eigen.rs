//! Decay-rate problem: the Robin eigenproblem for a fixed thickness, the
//! auxiliary nonlinear Rayleigh problem
//!
//! ```text
//! λ_m = min { ∫|∇u|² + (∫_∂Ω |u|)² / (km) : ∫u² = 1 }
//! ```
//!
//! solved by alternating exact thickness updates with linear eigensolves,
//! and the Neumann / Dirichlet reference eigenvalues.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{extrapolate, THICKNESS_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::fem::{weighted_cv, Operators, RobinConfig, ScalarField, ThicknessField};
use crate::mesh::Mesh2D;
use crate::sparse::{eig_smallest_with, EigOptions, SymmetricSparseMatrix};

/// Symmetry metric reported when the boundary trace vanishes.
pub const SYMMETRY_SENTINEL: f64 = 1e30;

/// Smallest eigenpair of `(K + B_h) v = λ M v`, normalized in `M` with
/// positive `M`-weighted mean.
pub fn robin_eig(
    mesh: &Mesh2D,
    h: &ThicknessField,
    k: RobinConfig,
    tol: f64,
) -> Result<(f64, ScalarField)> {
    if let Some(i) = h.values().iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("thickness must be positive (slot {i})")));
    }
    let ops = Operators::new(mesh);
    let problem = AuxProblem::from_mesh(mesh, &ops, k, h.mass());
    let (value, v) = problem.robin_eig(h.values(), None, &EigOptions::with_tol(tol))?;
    Ok((value, ScalarField::from_vec(v)))
}

/// First nonzero Neumann eigenvalue Λ (eigenproblem deflated against
/// constants). Only defined on connected meshes.
pub fn neumann_lambda(mesh: &Mesh2D, tol: f64) -> Result<f64> {
    if mesh.n_components() != 1 {
        return Err(invalid(format!(
            "Neumann eigenvalue needs a connected mesh, got {} components",
            mesh.n_components()
        )));
    }
    let ops = Operators::new(mesh);
    let ones = vec![1.0; mesh.n_vertices()];
    let pair = eig_smallest_with(
        &ops.stiffness,
        &ops.mass,
        &[ones],
        &EigOptions::with_tol(tol),
        None,
    )?;
    Ok(pair.value)
}

/// First Dirichlet eigenvalue Λ₀ (boundary rows and columns removed).
pub fn dirichlet_lambda(mesh: &Mesh2D, tol: f64) -> Result<f64> {
    let ops = Operators::new(mesh);
    let (value, _) = dirichlet_pair(mesh, &ops, &EigOptions::with_tol(tol))?;
    Ok(value)
}

pub(crate) fn interior_vertices(mesh: &Mesh2D) -> Vec<usize> {
    (0..mesh.n_vertices())
        .filter(|&v| mesh.trace().slot(v).is_none())
        .collect()
}

fn dirichlet_pair(mesh: &Mesh2D, ops: &Operators, opts: &EigOptions) -> Result<(f64, Vec<f64>)> {
    let interior = interior_vertices(mesh);
    if interior.is_empty() {
        return Err(invalid("mesh has no interior vertices"));
    }
    let a = ops.stiffness.principal_submatrix(&interior);
    let m = ops.mass.principal_submatrix(&interior);
    let pair = eig_smallest_with(&a, &m, &[], opts, None)?;
    let mut full = vec![0.0; mesh.n_vertices()];
    let sign = if pair.vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for (&v, x) in interior.iter().zip(&pair.vector) {
        full[v] = sign * x;
    }
    Ok((pair.value, full))
}

/// Outcome of [`minimize_auxiliary`].
#[derive(Debug, Clone)]
pub struct EigenReport {
    /// `λ_m`: the auxiliary objective of `u`.
    pub lambda: f64,
    /// Minimizer, `uᵀMu = 1` and `u ≥ 0`.
    pub u: ScalarField,
    /// `hᵢ = m|uᵢ| / Σwⱼ|uⱼ|`.
    pub h: ThicknessField,
    pub best_restart: usize,
    /// Final objective of every restart; `None` for failed runs.
    pub restart_lambdas: Vec<Option<f64>>,
    /// Objective after every iteration, per restart.
    pub traces: Vec<Vec<f64>>,
    /// Lumped coefficient of variation of the boundary trace of `u`.
    pub symmetry: f64,
    pub iterations: usize,
    /// Iterations in which the nodal absolute value was rejected.
    pub fallbacks: usize,
    /// The best iterate vanished on the boundary; `u` is the Dirichlet
    /// eigenfunction and `h` is uniform.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct AuxiliaryOptions {
    pub restarts: usize,
    /// Stop a restart once the relative objective change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual tolerance of the inner linear eigensolves.
    pub eig_tol: f64,
    pub seed: u64,
}

impl Default for AuxiliaryOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            tol: 1e-10,
            max_iter: 3000,
            eig_tol: 1e-9,
            seed: 1,
        }
    }
}

/// Initial condition of one restart.
#[derive(Debug, Clone)]
pub enum Start {
    /// Uniform thickness.
    Uniform,
    /// Thickness `∝ max(1 + amplitude·cos(mode·θ), 0.05)` with θ the polar
    /// angle about the component's circle centre (or centroid).
    Angular { mode: u32, amplitude: f64 },
    /// Seeded random thickness in `[0.2, 1.8]` times the uniform value.
    Random { seed: u64 },
    /// Alternation starts from this field.
    Field(Vec<f64>),
}

/// Restart schedule used by [`minimize_auxiliary`]: the uniform start,
/// then low angular modes on disc meshes or random fields otherwise.
pub fn restart_schedule(mesh: &Mesh2D, restarts: usize, seed: u64) -> Vec<Start> {
    let disc_like = mesh.circles().iter().all(|c| c.is_some());
    let angular = [
        Start::Angular {
            mode: 1,
            amplitude: 0.5,
        },
        Start::Angular {
            mode: 2,
            amplitude: 0.5,
        },
        Start::Angular {
            mode: 1,
            amplitude: 0.95,
        },
    ];
    (0..restarts)
        .map(|r| match r {
            0 => Start::Uniform,
            r if disc_like && r <= angular.len() => angular[r - 1].clone(),
            r => Start::Random {
                seed: seed.wrapping_mul(0x9E37_79B9).wrapping_add(r as u64),
            },
        })
        .collect()
}

/// Minimizes the auxiliary problem over all scheduled restarts.
pub fn minimize_auxiliary(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    opts: &AuxiliaryOptions,
) -> Result<EigenReport> {
    minimize_auxiliary_with(mesh, k, m, opts, &[])
}

/// As [`minimize_auxiliary`], with additional start fields appended to the
/// restart schedule.
pub fn minimize_auxiliary_with(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    opts: &AuxiliaryOptions,
    extra_starts: &[ScalarField],
) -> Result<EigenReport> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    if opts.restarts == 0 {
        return Err(invalid("at least one restart is required"));
    }
    let mut starts = restart_schedule(mesh, opts.restarts, opts.seed);
    starts.extend(extra_starts.iter().map(|s| Start::Field(s.values().to_vec())));

    let ops = Operators::new(mesh);
    let problem = AuxProblem::from_mesh(mesh, &ops, k, m);
    let runs: Vec<Result<Run>> = starts
        .par_iter()
        .map(|s| {
            let h0 = start_thickness(mesh, m, s);
            let field = match s {
                Start::Field(v) => Some(v.as_slice()),
                _ => None,
            };
            problem.alternate(h0.as_deref(), field, opts)
        })
        .collect();

    let best = select_best(&runs, |run| run.symmetry(&problem))
        .ok_or(Error::AllRestartsFailed(runs.len()))?;
    let run = runs[best].as_ref().expect("selected run succeeded");

    let restart_lambdas = runs
        .iter()
        .map(|r| r.as_ref().ok().map(|r| r.lambda))
        .collect();
    let traces = runs
        .iter()
        .map(|r| r.as_ref().map(|r| r.trace.clone()).unwrap_or_default())
        .collect();

    let h = if run.degenerate {
        ThicknessField::uniform(mesh, m)?
    } else {
        ThicknessField::new(mesh, problem.proportional_thickness(&run.u).expect("nonzero trace"))?
    };
    Ok(EigenReport {
        lambda: run.lambda,
        symmetry: run.symmetry(&problem),
        u: ScalarField::from_vec(run.u.clone()),
        h,
        best_restart: best,
        restart_lambdas,
        traces,
        iterations: run.iterations,
        fallbacks: run.fallbacks,
        degenerate: run.degenerate,
    })
}

/// Index of the smallest objective; ties within 1e-10 relative go to the
/// smaller symmetry metric, then to the earlier restart.
fn select_best(runs: &[Result<Run>], symmetry: impl Fn(&Run) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, run) in runs.iter().enumerate() {
        let Ok(run) = run else { continue };
        let sym = symmetry(run);
        best = match best {
            None => Some((i, run.lambda, sym)),
            Some((j, lam, s)) => {
                let tie = (run.lambda - lam).abs() <= 1e-10 * lam.abs();
                if (!tie && run.lambda < lam) || (tie && sym < s) {
                    Some((i, run.lambda, sym))
                } else {
                    Some((j, lam, s))
                }
            }
        };
    }
    best.map(|(i, _, _)| i)
}

fn start_thickness(mesh: &Mesh2D, m: f64, start: &Start) -> Option<Vec<f64>> {
    let trace = mesh.trace();
    let raw: Vec<f64> = match *start {
        Start::Uniform => vec![1.0; trace.len()],
        Start::Angular { mode, amplitude } => trace
            .vertices()
            .iter()
            .zip(trace.components())
            .map(|(&v, &c)| {
                let center = mesh.circles()[c]
                    .map(|circle| circle.center)
                    .unwrap_or_else(|| mesh.component_centroid(c));
                let p = mesh.vertices()[v];
                let theta = (p[1] - center[1]).atan2(p[0] - center[0]);
                (1.0 + amplitude * (mode as f64 * theta).cos()).max(0.05)
            })
            .collect(),
        Start::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..trace.len()).map(|_| rng.gen_range(0.2..1.8)).collect()
        }
        Start::Field(_) => return None,
    };
    let mass: f64 = raw.iter().zip(trace.weights()).map(|(h, w)| h * w).sum();
    Some(raw.iter().map(|h| h * m / mass).collect())
}

/// Discrete auxiliary problem: operators plus lumped boundary data.
pub(crate) struct AuxProblem<'a> {
    stiffness: &'a SymmetricSparseMatrix,
    mass: &'a SymmetricSparseMatrix,
    boundary: Vec<usize>,
    weights: Vec<f64>,
    k: f64,
    m: f64,
    interior: Vec<usize>,
}

struct Run {
    lambda: f64,
    u: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
    fallbacks: usize,
    degenerate: bool,
}

impl Run {
    fn symmetry(&self, problem: &AuxProblem<'_>) -> f64 {
        problem.boundary_cv(&self.u)
    }
}

impl<'a> AuxProblem<'a> {
    pub(crate) fn from_mesh(mesh: &Mesh2D, ops: &'a Operators, k: RobinConfig, m: f64) -> Self {
        Self {
            stiffness: &ops.stiffness,
            mass: &ops.mass,
            boundary: mesh.trace().vertices().to_vec(),
            weights: mesh.trace().weights().to_vec(),
            k: k.k(),
            m,
            interior: interior_vertices(mesh),
        }
    }

    fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn floor(&self) -> f64 {
        THICKNESS_FLOOR * self.m / self.perimeter()
    }

    fn boundary_l1(&self, u: &[f64]) -> f64 {
        self.boundary
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * u[v].abs())
            .sum()
    }

    fn boundary_cv(&self, u: &[f64]) -> f64 {
        let trace: Vec<f64> = self.boundary.iter().map(|&v| u[v].abs()).collect();
        weighted_cv(&self.weights, &trace).unwrap_or(SYMMETRY_SENTINEL)
    }

    /// `(uᵀKu + (Σwᵢ|uᵢ|)²/(km)) / uᵀMu`.
    pub(crate) fn objective(&self, u: &[f64]) -> f64 {
        let s = self.boundary_l1(u);
        (self.stiffness.quadratic_form(u) + s * s / (self.k * self.m)) / self.mass.quadratic_form(u)
    }

    pub(crate) fn proportional_thickness(&self, u: &[f64]) -> Option<Vec<f64>> {
        let s = self.boundary_l1(u);
        let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s == 0.0 || !(s > 1e-14 * scale * self.perimeter()) {
            return None;
        }
        Some(self.boundary.iter().map(|&v| self.m * u[v].abs() / s).collect())
    }

    pub(crate) fn robin_eig(
        &self,
        h: &[f64],
        start: Option<&[f64]>,
        opts: &EigOptions,
    ) -> Result<(f64, Vec<f64>)> {
        let mut d = vec![0.0; self.stiffness.dim()];
        for ((&v, &w), &hv) in self.boundary.iter().zip(&self.weights).zip(h) {
            d[v] = w / (self.k * hv);
        }
        let a = self.stiffness.add_diagonal(&d)?;
        let pair = eig_smallest_with(&a, self.mass, &[], opts, start)?;
        let mut v = pair.vector;
        let mean: f64 = self.mass.mul(&v).iter().sum();
        if mean < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((pair.value, v))
    }

    fn normalize(&self, u: &mut [f64]) {
        let n = self.mass.quadratic_form(u).sqrt();
        u.iter_mut().for_each(|x| *x /= n);
    }

    fn dirichlet_run(&self, opts: &EigOptions, trace: Vec<f64>, iterations: usize, fallbacks: usize) -> Result<Run> {
        if self.interior.is_empty() {
            return Err(invalid("no interior vertices for the degenerate branch"));
        }
        let a = self.stiffness.principal_submatrix(&self.interior);
        let mm = self.mass.principal_submatrix(&self.interior);
        let pair = eig_smallest_with(&a, &mm, &[], opts, None)?;
        let mut u = vec![0.0; self.stiffness.dim()];
        for (&v, x) in self.interior.iter().zip(&pair.vector) {
            u[v] = x.abs();
        }
        self.normalize(&mut u);
        Ok(Run {
            lambda: self.objective(&u),
            u,
            trace,
            iterations,
            fallbacks,
            degenerate: true,
        })
    }

    /// Alternating minimization from an initial thickness or field.
    fn alternate(
        &self,
        h0: Option<&[f64]>,
        field: Option<&[f64]>,
        opts: &AuxiliaryOptions,
    ) -> Result<Run> {
        let eig_opts = EigOptions {
            seed: opts.seed,
            ..EigOptions::with_tol(opts.eig_tol)
        };
        // The previous iterate is an excellent start; skip the extra columns.
        let warm_opts = EigOptions { block: 1, ..eig_opts.clone() };
        let floor = self.floor();
        let mut u: Vec<f64> = match (h0, field) {
            (Some(h), _) => {
                let h: Vec<f64> = h.iter().map(|&x| x.max(floor)).collect();
                let (_, v) = self.robin_eig(&h, None, &eig_opts)?;
                v
            }
            (None, Some(f)) => {
                if f.len() != self.stiffness.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.stiffness.dim(),
                        actual: f.len(),
                    });
                }
                f.to_vec()
            }
            (None, None) => return Err(invalid("restart needs a thickness or a field")),
        };
        if self.mass.quadratic_form(&u) == 0.0 {
            return Err(invalid("start field is zero"));
        }
        u.iter_mut().for_each(|x| *x = x.abs());
        self.normalize(&mut u);
        let mut lambda = self.objective(&u);
        let mut trace = vec![lambda];
        let mut fallbacks = 0;

        for it in 1..=opts.max_iter {
            let Some(h) = self.proportional_thickness(&u) else {
                return self.dirichlet_run(&eig_opts, trace, it - 1, fallbacks);
            };
            let h: Vec<f64> = h.into_iter().map(|x| x.max(floor)).collect();
            let (_, mut v) = self.robin_eig(&h, Some(&u), &warm_opts)?;
            let signed = self.objective(&v);
            let mut abs_v: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            self.normalize(&mut abs_v);
            let abs_obj = self.objective(&abs_v);
            let fallback = abs_obj > signed + 1e-12 * signed.abs();
            let next = if fallback {
                // Nodal |v| raised the stiffness term: keep the signed
                // eigenfunction; the next h-step still uses |v|.
                fallbacks += 1;
                self.normalize(&mut v);
                (v, signed)
            } else {
                (abs_v, abs_obj)
            };
            let rel = (lambda - next.1).abs() / next.1.abs().max(f64::MIN_POSITIVE);
            let previous = std::mem::replace(&mut u, next.0);
            lambda = next.1;
            if rel >= opts.tol && !fallback {
                let project = |x: Vec<f64>| {
                    let mut x: Vec<f64> = x.into_iter().map(f64::abs).collect();
                    self.normalize(&mut x);
                    x
                };
                if let Some((x, l)) = extrapolate(&previous, &u, lambda, |x| self.objective(x), project) {
                    u = x;
                    lambda = l;
                }
            }
            trace.push(lambda);
            if rel < opts.tol {
                u.iter_mut().for_each(|x| *x = x.abs());
                self.normalize(&mut u);
                return Ok(Run {
                    lambda: self.objective(&u),
                    u,
                    trace,
                    iterations: it,
                    fallbacks,
                    degenerate: false,
                });
            }
        }
        Err(Error::NotConverged {
            context: "alternating eigenvalue minimization",
            iterations: opts.max_iter,
            residual: f64::NAN,
            history: trace,
        })
    }
}

/// Tridiagonal P1 stiffness and mass on `n` equispaced points of `(0, L)`.
fn interval_operators(length: f64, n: usize) -> Operators {
    let dx = length / (n - 1) as f64;
    let mut kt = Vec::with_capacity(4 * n);
    let mut mt = Vec::with_capacity(4 * n);
    for i in 0..n - 1 {
        let j = i + 1;
        for (a, b, ks, ms) in [
            (i, i, 1.0, 2.0),
            (j, j, 1.0, 2.0),
            (i, j, -1.0, 1.0),
            (j, i, -1.0, 1.0),
        ] {
            kt.push((a, b, ks / dx));
            mt.push((a, b, ms * dx / 6.0));
        }
    }
    Operators {
        stiffness: SymmetricSparseMatrix::from_triplets(n, &kt).expect("symmetric"),
        mass: SymmetricSparseMatrix::from_triplets(n, &mt).expect("symmetric"),
    }
}

fn interval_problem(ops: &Operators, k: f64, m: f64, n: usize) -> AuxProblem<'_> {
    AuxProblem {
        stiffness: &ops.stiffness,
        mass: &ops.mass,
        boundary: vec![0, n - 1],
        weights: vec![1.0, 1.0],
        k,
        m,
        interior: (1..n - 1).collect(),
    }
}

fn check_interval(k: f64, m: f64, length: f64, n: usize) -> Result<()> {
    RobinConfig::new(k)?;
    if !(m > 0.0) {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    if !(length > 0.0) {
        return Err(invalid(format!("interval length must be positive, got {length}")));
    }
    if n < 10 {
        return Err(invalid(format!("need at least 10 grid points, got {n}")));
    }
    Ok(())
}

/// `λ_m` of the auxiliary problem on the interval `(0, L)` with `n` grid
/// points; the boundary term is `(|u(0)| + |u(L)|)² / (km)`.
pub fn lambda_1d(k: f64, m: f64, length: f64, n: usize) -> Result<f64> {
    Ok(lambda_1d_report(k, m, length, n)?.0)
}

/// `λ_m` on the interval together with the optimal endpoint thicknesses
/// `(h(0), h(L))`.
pub fn lambda_1d_report(k: f64, m: f64, length: f64, n: usize) -> Result<(f64, [f64; 2])> {
    check_interval(k, m, length, n)?;
    let ops = interval_operators(length, n);
    let problem = interval_problem(&ops, k, m, n);
    let opts = AuxiliaryOptions {
        eig_tol: 1e-10,
        ..AuxiliaryOptions::default()
    };
    let starts = [[0.5 * m, 0.5 * m], [0.8 * m, 0.2 * m]];
    let runs: Vec<Result<Run>> = starts
        .iter()
        .map(|h| problem.alternate(Some(h), None, &opts))
        .collect();
    let best = select_best(&runs, |r| r.symmetry(&problem))
        .ok_or(Error::AllRestartsFailed(runs.len()))?;
    let run = runs[best].as_ref().expect("selected run succeeded");
    let h = problem
        .proportional_thickness(&run.u)
        .map(|h| [h[0], h[1]])
        .unwrap_or([0.5 * m, 0.5 * m]);
    Ok((run.lambda, h))
}

/// Linear Robin eigenvalue on `(0, L)` for endpoint thicknesses
/// `h(0) = h0`, `h(L) = h_end`; zero thickness is floored as in the 2D
/// solvers.
pub fn lambda_1d_split(k: f64, h0: f64, h_end: f64, length: f64, n: usize) -> Result<f64> {
    let m = h0 + h_end;
    check_interval(k, m, length, n)?;
    if h0 < 0.0 || h_end < 0.0 {
        return Err(invalid("endpoint thickness must be nonnegative"));
    }
    let ops = interval_operators(length, n);
    let problem = interval_problem(&ops, k, m, n);
    let floor = problem.floor();
    let (value, _) = problem.robin_eig(
        &[h0.max(floor), h_end.max(floor)],
        None,
        &EigOptions::with_tol(1e-10),
    )?;
    Ok(value)
}

/// `π² / L²`: both the first nonzero Neumann and the first Dirichlet
/// eigenvalue of the interval.
pub fn interval_reference(length: f64) -> f64 {
    PI * PI / (length * length)
}

/// Auxiliary objective `J(u)` on a mesh.
pub fn auxiliary_objective(mesh: &Mesh2D, k: RobinConfig, m: f64, u: &ScalarField) -> f64 {
    let ops = Operators::new(mesh);
    AuxProblem::from_mesh(mesh, &ops, k, m).objective(u.values())
}

/// Rayleigh quotient of the Robin form `(uᵀ(K + B_h)u) / uᵀMu`.
pub fn robin_rayleigh_quotient(
    mesh: &Mesh2D,
    h: &ThicknessField,
    k: RobinConfig,
    u: &ScalarField,
) -> Result<f64> {
    let ops = Operators::new(mesh);
    let d = crate::fem::robin_diagonal(mesh, h, k)?;
    let uv = u.values();
    let b: f64 = d.iter().zip(uv).map(|(a, x)| a * x * x).sum();
    Ok((ops.stiffness.quadratic_form(uv) + b) / ops.mass.quadratic_form(uv))
}
