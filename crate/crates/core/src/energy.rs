//! Heat-source problem: the fixed-thickness Robin solve, the reduced convex
//! functional in `u` alone and its minimization by alternating exact
//! `h`-steps and Robin solves.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::fem::{
    assemble_load, boundary_abs_integral_of, robin_diagonal, Operators, RobinConfig, ScalarField,
    ThicknessField,
};
use crate::mesh::Mesh2D;
use crate::sparse::{cg_solve_from, dot};

/// Thickness floor relative to the uniform thickness `m / perimeter`.
pub const THICKNESS_FLOOR: f64 = 1e-8;

/// Relative residual used for the Robin solves.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

const CG_MAX_ITER: usize = 50_000;

/// Outcome of [`minimize_reduced`].
#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// Reduced functional `F(u) = ½uᵀKu + (Σwᵢ|uᵢ|)²/(2km) − bᵀu`.
    pub energy: f64,
    pub u: ScalarField,
    /// Optimal thickness `hᵢ = m|uᵢ| / Σwⱼ|uⱼ|` of the returned `u`.
    pub h: ThicknessField,
    pub iterations: usize,
    pub final_rel_change: f64,
    /// `F` after every Robin solve, starting with the constant-thickness one.
    pub trace: Vec<f64>,
    /// Set when `u` vanishes on the boundary and the choice of `h` is moot.
    pub degenerate: bool,
    /// `bᵀu` of the returned field, so that `energy ≈ −½ load_dot_u`.
    pub load_dot_u: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedOptions {
    /// Stop once the relative energy change drops below this.
    pub tol: f64,
    pub max_outer: usize,
    pub solve_tol: f64,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 5000,
            solve_tol: DEFAULT_SOLVE_TOL,
        }
    }
}

/// Solves `(K + B_h) u = b`, the discrete Robin problem for a fixed
/// thickness.
pub fn solve_robin(
    mesh: &Mesh2D,
    h: &ThicknessField,
    k: RobinConfig,
    f: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    let ops = Operators::new(mesh);
    let b = assemble_load(mesh, f)?;
    solve_robin_with(mesh, &ops, h, k, &b, None, tol)
}

fn check_positive_thickness(h: &ThicknessField) -> Result<()> {
    if let Some(i) = h.values().iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!(
            "thickness must be positive on the boundary (slot {i} is {})",
            h.values()[i]
        )));
    }
    Ok(())
}

pub(crate) fn solve_robin_with(
    mesh: &Mesh2D,
    ops: &Operators,
    h: &ThicknessField,
    k: RobinConfig,
    load: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
) -> Result<ScalarField> {
    check_positive_thickness(h)?;
    let a = ops.stiffness.add_diagonal(&robin_diagonal(mesh, h, k)?)?;
    let sol = cg_solve_from(&a, load, guess, tol, CG_MAX_ITER)?;
    Ok(ScalarField::from_vec(sol.x))
}

/// `½uᵀKu + ½uᵀB_h u − bᵀu`.
pub fn energy_value(
    mesh: &Mesh2D,
    h: &ThicknessField,
    k: RobinConfig,
    f: &ScalarField,
    u: &ScalarField,
) -> Result<f64> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            actual: u.len(),
        });
    }
    let ops = Operators::new(mesh);
    let b = assemble_load(mesh, f)?;
    let d = robin_diagonal(mesh, h, k)?;
    let uv = u.values();
    let boundary: f64 = d.iter().zip(uv).map(|(di, ui)| di * ui * ui).sum();
    Ok(0.5 * ops.stiffness.quadratic_form(uv) + 0.5 * boundary - dot(&b, uv))
}

/// Reduced functional `F(u)` for total mass `m`.
pub fn reduced_functional(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    f: &ScalarField,
    u: &ScalarField,
) -> Result<f64> {
    let ops = Operators::new(mesh);
    let b = assemble_load(mesh, f)?;
    Ok(reduced_functional_with(mesh, &ops, k, m, &b, u.values()))
}

pub(crate) fn reduced_functional_with(
    mesh: &Mesh2D,
    ops: &Operators,
    k: RobinConfig,
    m: f64,
    load: &[f64],
    u: &[f64],
) -> f64 {
    let s = boundary_abs_integral_of(mesh, u);
    0.5 * ops.stiffness.quadratic_form(u) + s * s / (2.0 * k.k() * m) - dot(load, u)
}

/// Exact minimizer of `Σ wᵢuᵢ²/hᵢ` over `{h ≥ 0, Σwᵢhᵢ = m}`:
/// `hᵢ = m|uᵢ| / Σwⱼ|uⱼ|`. `None` when the boundary trace vanishes.
pub fn optimal_thickness(mesh: &Mesh2D, m: f64, u: &ScalarField) -> Result<Option<ThicknessField>> {
    if !(m > 0.0) {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    Ok(optimal_thickness_of(mesh, m, u.values()))
}

pub(crate) fn optimal_thickness_of(mesh: &Mesh2D, m: f64, u: &[f64]) -> Option<ThicknessField> {
    let s = boundary_abs_integral_of(mesh, u);
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(s > 1e-14 * scale * mesh.perimeter()) || s == 0.0 {
        return None;
    }
    let values = mesh
        .trace()
        .vertices()
        .iter()
        .map(|&v| m * u[v].abs() / s)
        .collect();
    Some(ThicknessField::new(mesh, values).expect("nonnegative finite thickness"))
}

pub(crate) fn thickness_floor(mesh: &Mesh2D, m: f64) -> f64 {
    THICKNESS_FLOOR * m / mesh.perimeter()
}

/// Minimizes the reduced functional by alternating the exact `h`-step with
/// Robin solves, starting from the uniform thickness.
pub fn minimize_reduced(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    f: &ScalarField,
    opts: &ReducedOptions,
) -> Result<EnergyReport> {
    minimize_reduced_from(mesh, k, m, f, opts, None)
}

/// As [`minimize_reduced`]; a nonvanishing `start` field replaces the
/// uniform-thickness initialization.
pub fn minimize_reduced_from(
    mesh: &Mesh2D,
    k: RobinConfig,
    m: f64,
    f: &ScalarField,
    opts: &ReducedOptions,
    start: Option<&ScalarField>,
) -> Result<EnergyReport> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(invalid(format!("m must be positive, got {m}")));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let ops = Operators::new(mesh);
    let load = assemble_load(mesh, f)?;
    let floor = thickness_floor(mesh, m);
    let uniform = ThicknessField::uniform(mesh, m)?;

    let h0 = start
        .and_then(|s| optimal_thickness_of(mesh, m, s.values()))
        .map(|h| h.floored(mesh, floor))
        .unwrap_or_else(|| uniform.clone());
    let mut u = solve_robin_with(mesh, &ops, &h0, k, &load, start.map(|s| s.values()), opts.solve_tol)?;
    let mut energy = reduced_functional_with(mesh, &ops, k, m, &load, u.values());
    let mut trace = vec![energy];
    let mut rel_change = f64::INFINITY;

    for it in 1..=opts.max_outer {
        let Some(h) = optimal_thickness_of(mesh, m, u.values()) else {
            return Ok(EnergyReport {
                energy,
                load_dot_u: dot(&load, u.values()),
                u,
                h: uniform,
                iterations: it - 1,
                final_rel_change: 0.0,
                trace,
                degenerate: true,
            });
        };
        let hf = h.floored(mesh, floor);
        let next = solve_robin_with(mesh, &ops, &hf, k, &load, Some(u.values()), opts.solve_tol)?;
        let next_energy = reduced_functional_with(mesh, &ops, k, m, &load, next.values());
        rel_change = (energy - next_energy).abs() / next_energy.abs().max(f64::MIN_POSITIVE);
        let converged = rel_change < opts.tol;
        let previous = std::mem::replace(&mut u, next);
        energy = next_energy;
        if !converged {
            if let Some((x, e)) = extrapolate(previous.values(), u.values(), energy, |x| {
                reduced_functional_with(mesh, &ops, k, m, &load, x)
            }, |x| x) {
                u = ScalarField::from_vec(x);
                energy = e;
            }
        }
        trace.push(energy);
        if converged {
            let h = optimal_thickness_of(mesh, m, u.values()).unwrap_or(uniform);
            return Ok(EnergyReport {
                energy,
                load_dot_u: dot(&load, u.values()),
                u,
                h,
                iterations: it,
                final_rel_change: rel_change,
                trace,
                degenerate: false,
            });
        }
    }
    Err(Error::NotConverged {
        context: "alternating energy minimization",
        iterations: opts.max_outer,
        residual: rel_change,
        history: trace,
    })
}

const MAX_EXTRAPOLATION_DOUBLINGS: usize = 12;

/// Safeguarded extrapolation along the last alternating step: tries
/// `project(next + β(next − prev))` for β = 1, 2, 4, … and keeps the best
/// point while `objective` keeps decreasing below `current`. Near-neutral
/// fixed points (small masses, symmetry-breaking thresholds) otherwise
/// need thousands of plain steps.
pub(crate) fn extrapolate(
    prev: &[f64],
    next: &[f64],
    current: f64,
    objective: impl Fn(&[f64]) -> f64,
    project: impl Fn(Vec<f64>) -> Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut beta = 1.0;
    for _ in 0..MAX_EXTRAPOLATION_DOUBLINGS {
        let trial = project(next.iter().zip(prev).map(|(n, p)| n + beta * (n - p)).collect());
        let value = objective(&trial);
        let bar = best.as_ref().map_or(current, |b| b.1);
        if !(value < bar) {
            break;
        }
        best = Some((trial, value));
        beta *= 2.0;
    }
    best
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: u32) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        _ => Err(invalid(format!("dimension must be 1, 2 or 3, got {d}"))),
    }
}

/// Optimal temperature on the ball `B_R ⊂ ℝᵈ` with unit source:
/// `ū(r) = (R² − r²)/(2d) + km/(d² ω_d R^{d−2})`.
pub fn radial_reference(radius: f64, d: u32, k: f64, m: f64, r: f64) -> Result<f64> {
    let omega = unit_ball_volume(d)?;
    if !(radius > 0.0) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    if !(0.0..=radius).contains(&r) {
        return Err(invalid(format!("r = {r} outside [0, {radius}]")));
    }
    let df = d as f64;
    Ok((radius * radius - r * r) / (2.0 * df)
        + k * m / (df * df * omega * radius.powi(d as i32 - 2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_mass;
    use crate::mesh::{generate_disc, generate_square};

    #[test]
    fn radial_reference_values() {
        let c = radial_reference(1.0, 2, 1.0, 1.0, 0.0).unwrap();
        assert!((c - (0.25 + 1.0 / (4.0 * PI))).abs() < 1e-15);
        assert!((c - 0.329577).abs() < 1e-6);
        let b = radial_reference(1.0, 2, 1.0, 1.0, 1.0).unwrap();
        assert!((b - 0.0795775).abs() < 1e-7);
        for d in 1..=3 {
            let (r, k, m) = (1.7, 0.3, 2.5);
            let df = d as f64;
            let omega = unit_ball_volume(d).unwrap();
            let edge = radial_reference(r, d, k, m, r).unwrap();
            assert!((edge - k * m / (df * df * omega * r.powi(d as i32 - 2))).abs() < 1e-15);
        }
        assert!(radial_reference(1.0, 2, 1.0, 1.0, 1.5).is_err());
        assert!(radial_reference(1.0, 4, 1.0, 1.0, 0.5).is_err());
    }

    /// The closed form satisfies −Δū = 1 and the Robin condition with
    /// constant thickness m/|∂B|, checked by finite differences.
    #[test]
    fn radial_reference_solves_robin_problem() {
        for d in 1..=3u32 {
            let (big_r, k, m) = (1.3, 0.7, 0.9);
            let u = |r: f64| radial_reference(big_r, d, k, m, r).unwrap();
            let df = d as f64;
            let eps = 1e-4;
            let r = 0.6;
            let lap = (u(r + eps) - 2.0 * u(r) + u(r - eps)) / (eps * eps)
                + (df - 1.0) / r * (u(r + eps) - u(r - eps)) / (2.0 * eps);
            assert!((lap + 1.0).abs() < 1e-6, "d={d}");
            let surface = df * unit_ball_volume(d).unwrap() * big_r.powi(d as i32 - 1);
            let h = m / surface;
            let du = (3.0 * u(big_r) - 4.0 * u(big_r - eps) + u(big_r - 2.0 * eps)) / (2.0 * eps);
            let robin = u(big_r) / k + h * du;
            assert!(robin.abs() < 1e-6, "d={d} robin={robin}");
        }
    }

    #[test]
    fn solve_robin_matches_radial_formula_on_disc() {
        let mesh = generate_disc(1.0, 6).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let h = ThicknessField::uniform(&mesh, 1.0).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let u = solve_robin(&mesh, &h, k, &f, 1e-12).unwrap();
        let center = u.values()[0];
        assert!((center - 0.32958).abs() / 0.32958 < 0.01);
        let edge = u.values()[mesh.trace().vertices()[0]];
        assert!((edge - 0.07958).abs() / 0.07958 < 0.01);
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let mesh = generate_square(6).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let h = ThicknessField::uniform(&mesh, 1.0).unwrap();
        let u = solve_robin(&mesh, &h, k, &ScalarField::constant(&mesh, 0.0), 1e-12).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solve_robin_rejects_zero_thickness() {
        let mesh = generate_square(3).unwrap();
        let mut v = vec![0.1; mesh.trace().len()];
        v[0] = 0.0;
        let h = ThicknessField::new(&mesh, v).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        assert!(solve_robin(&mesh, &h, RobinConfig::new(1.0).unwrap(), &f, 1e-10).is_err());
    }

    /// For huge thickness the solution tends to the Neumann regime: the
    /// boundary flux uᵀB_h u = ∫f·ū_boundary stays O(1) while each 1/h
    /// factor drops, so the boundary trace grows ∝ h and the gradient
    /// energy stays bounded.
    #[test]
    fn neumann_degeneration_for_large_thickness() {
        let mesh = generate_square(8).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let ops = Operators::new(&mesh);
        let mut stats = Vec::new();
        for h in [1e4, 1e6] {
            let hf = ThicknessField::new(&mesh, vec![h; mesh.trace().len()]).unwrap();
            let u = solve_robin(&mesh, &hf, k, &f, 1e-13).unwrap();
            let d = robin_diagonal(&mesh, &hf, k).unwrap();
            let bterm: f64 = d.iter().zip(u.values()).map(|(a, b)| a * b * b).sum();
            let mean = u.values().iter().sum::<f64>() / u.len() as f64;
            // K annihilates constants; drop the huge mean before the form.
            let w: Vec<f64> = u.values().iter().map(|x| x - mean).collect();
            let grad = ops.stiffness.quadratic_form(&w);
            stats.push((grad, bterm, mean));
        }
        let (g4, b4, mean4) = stats[0];
        let (g6, b6, mean6) = stats[1];
        assert!((g4 - g6).abs() < 1e-3 * g4.abs().max(1e-3), "{g4} {g6}");
        assert!(g6 < 1.0);
        // Total flux balance makes the boundary term approach ∫f · ū_∂ ≈ ū_∂,
        // i.e. uᵀB_h u ~ (∫f)² k h / |∂Ω| grows ∝ h while 1/h shrinks.
        assert!((mean6 / mean4 - 100.0).abs() < 1.0);
        assert!((b6 / b4 - 100.0).abs() < 1.0);
    }

    #[test]
    fn energy_value_identities() {
        let mesh = generate_square(10).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let h = ThicknessField::uniform(&mesh, 1.0).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let zero = ScalarField::constant(&mesh, 0.0);
        assert_eq!(energy_value(&mesh, &h, k, &f, &zero).unwrap(), 0.0);

        let u = solve_robin(&mesh, &h, k, &f, 1e-13).unwrap();
        let e = energy_value(&mesh, &h, k, &f, &u).unwrap();
        let b = assemble_load(&mesh, &f).unwrap();
        assert!((e + 0.5 * dot(&b, u.values())).abs() <= 1e-8 * e.abs());

        let f2 = ScalarField::constant(&mesh, 2.0);
        let u2 = solve_robin(&mesh, &h, k, &f2, 1e-13).unwrap();
        let e2 = energy_value(&mesh, &h, k, &f2, &u2).unwrap();
        assert!((e2 / e - 4.0).abs() < 1e-8);
    }

    #[test]
    fn minimize_reduced_on_disc_is_radial() {
        let mesh = generate_disc(1.0, 5).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let rep = minimize_reduced(&mesh, k, 1.0, &f, &ReducedOptions::default()).unwrap();
        let trace = mesh.trace();
        let cv = crate::fem::weighted_cv(trace.weights(), rep.h.values()).unwrap();
        assert!(cv < 0.02, "cv {cv}");
        let ubar0 = radial_reference(1.0, 2, 1.0, 1.0, 0.0).unwrap();
        let err = mesh
            .vertices()
            .iter()
            .zip(rep.u.values())
            .map(|(p, u)| {
                let r = p[0].hypot(p[1]).min(1.0);
                (u - radial_reference(1.0, 2, 1.0, 1.0, r).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 0.01 * ubar0, "err {err}");
        assert!((rep.h.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimize_reduced_zero_source_is_degenerate() {
        let mesh = generate_square(6).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let f = ScalarField::constant(&mesh, 0.0);
        let rep = minimize_reduced(&mesh, k, 1.0, &f, &ReducedOptions::default()).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.energy, 0.0);
        assert!(rep.u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn optimization_beats_constant_thickness_on_square() {
        let mesh = generate_square(24).unwrap();
        let k = RobinConfig::new(1.0).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let rep = minimize_reduced(&mesh, k, 1.0, &f, &ReducedOptions::default()).unwrap();
        let h = ThicknessField::uniform(&mesh, 1.0).unwrap();
        let u = solve_robin(&mesh, &h, k, &f, 1e-13).unwrap();
        let e_const = energy_value(&mesh, &h, k, &f, &u).unwrap();
        assert!(rep.energy <= e_const - 1e-6, "{} vs {}", rep.energy, e_const);
        for w in rep.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!((rep.energy + 0.5 * rep.load_dot_u).abs() <= 10.0 * 1e-10 * rep.energy.abs().max(1.0) + 1e-9);
        let _ = assemble_mass(&mesh);
    }
}
