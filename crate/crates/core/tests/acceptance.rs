//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p insulation --test acceptance` runs everything; extra
//! arguments select criteria by number (`-- 4 7`).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use insulation::analysis::{
    component_concentration, concentration_profile, split_energy, sweep, symmetry_metric,
    threshold_m0, SweepKind, SweepOptions,
};
use insulation::eigen::{
    dirichlet_lambda, lambda_1d, lambda_1d_report, lambda_1d_split, minimize_auxiliary,
    neumann_lambda, robin_eig, AuxiliaryOptions,
};
use insulation::energy::{
    minimize_reduced, optimal_thickness, radial_reference, reduced_functional, ReducedOptions,
};
use insulation::fem::{boundary_abs_integral, weighted_cv};
use insulation::mesh::{generate_disc, generate_square, generate_two_discs};
use insulation::{Mesh2D, Result, RobinConfig, ScalarField, ThicknessField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const RADIAL_LEVEL: usize = 6;
const RADIAL_MIN_TRIANGLES: usize = 10_000;
const RADIAL_REL_ERROR: f64 = 0.01;
const RADIAL_H_CV: f64 = 0.02;
const RADIAL_BUDGET: Duration = Duration::from_secs(60);
// Criterion 2
const ENERGY_IDENTITY_TOL: f64 = 1e-6;
// Criterion 3
const EIGEN_REL_TOL: f64 = 0.005;
const NEUMANN_DISC: f64 = 3.3900;
const DIRICHLET_DISC: f64 = 5.7832;
const EIGEN_SQUARE_N: usize = 72;
const EIGEN_SOLVER_TOL: f64 = 1e-10;
// Criterion 4
const THRESHOLD_LEVELS: [usize; 2] = [3, 4];
const THRESHOLD_BRACKET: (f64, f64) = (0.5, 8.0);
const THRESHOLD_TOL: f64 = 0.01;
const THRESHOLD_LEVEL_AGREEMENT: f64 = 0.05;
const ABOVE_THRESHOLD_CV: f64 = 0.02;
const BELOW_THRESHOLD_CV: f64 = 0.10;
const BELOW_THRESHOLD_GAIN: f64 = 1e-4;
/// Regression baseline: finer-level bracket midpoint from the first
/// verified run.
const M0_BASELINE: f64 = 1.8514;
const M0_BASELINE_TOL: f64 = 0.02;
/// At m₀ the constant-thickness Robin coefficient 2π/(km) equals Λ (the
/// radial Robin eigenfunction J₀(√Λ r) then satisfies J₁'(√Λ) = 0), so
/// m₀ = 2π/(kΛ) independently of the bisection.
const M0_ORACLE_TOL: f64 = 0.01;
// Criterion 5
const MONOTONE_GRID: (f64, f64, usize) = (0.05, 20.0, 10);
const MONOTONE_TOL: f64 = 1e-9;
const MONOTONE_DISC_LEVEL: usize = 3;
const MONOTONE_SQUARE_N: usize = 12;
// Criterion 6
const INTERVAL_POINTS: usize = 201;
const INTERVAL_MASSES: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const SPLIT_GRID: usize = 40;
// Criterion 7
const TWO_BALL_LEVEL: usize = 4;
const TWO_BALL_GAP: f64 = 0.25;
const TWO_BALL_FRACTION: f64 = 0.95;
const TWO_BALL_CV: f64 = 0.05;
const EQUAL_SPLIT_TOL: f64 = 1e-6;
// Criterion 8
const CONCENTRATION_N: usize = 40;
const CONCENTRATION_MASSES: [f64; 3] = [1.0, 0.1, 0.01];
const CONCENTRATED_FRACTION: f64 = 0.5;
// Criterion 9
const CONVEXITY_PAIRS: usize = 200;
const PROPORTIONALITY_TOL: f64 = 1e-12;
const DESCENT_SLACK: f64 = 1e-12;
/// Agreement of the closed-form h-step with the iterative oracle.
const ORACLE_TOL: f64 = 1e-6;
const PROPERTY_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn k1() -> RobinConfig {
    RobinConfig::new(1.0).expect("k = 1")
}

fn one(mesh: &Mesh2D) -> ScalarField {
    ScalarField::constant(mesh, 1.0)
}

fn criterion_1() -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    pool.install(|| {
        let start = Instant::now();
        let mesh = generate_disc(1.0, RADIAL_LEVEL)?;
        let report = minimize_reduced(&mesh, k1(), 1.0, &one(&mesh), &ReducedOptions::default())?;
        let elapsed = start.elapsed();
        let u0 = radial_reference(1.0, 2, 1.0, 1.0, 0.0)?;
        let mut err = 0.0f64;
        for (p, u) in mesh.vertices().iter().zip(report.u.values()) {
            let r = p[0].hypot(p[1]).min(1.0);
            err = err.max((u - radial_reference(1.0, 2, 1.0, 1.0, r)?).abs());
        }
        let cv = weighted_cv(mesh.trace().weights(), report.h.values()).unwrap_or(f64::INFINITY);
        let pass = mesh.n_triangles() >= RADIAL_MIN_TRIANGLES
            && err <= RADIAL_REL_ERROR * u0
            && cv <= RADIAL_H_CV
            && elapsed <= RADIAL_BUDGET;
        Ok(outcome(
            pass,
            format!(
                "{} triangles, max|u-ū|/ū(0) = {:.3e}, CV(h) = {:.3e}, {:.1} s on one thread",
                mesh.n_triangles(),
                err / u0,
                cv,
                elapsed.as_secs_f64()
            ),
        ))
    })
}

fn criterion_2() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, mesh) in [("square", generate_square(24)?), ("disc", generate_disc(1.0, 4)?)] {
        let f = one(&mesh);
        let report = minimize_reduced(&mesh, k1(), 1.0, &f, &ReducedOptions::default())?;
        // −½∫fu with the consistent load b = Mf.
        let rhs = -0.5 * report.load_dot_u;
        let e = rel(report.energy, rhs);
        worst = worst.max(e);
        parts.push(format!("{name}: E = {:.10}, rel. gap {:.2e}", report.energy, e));
    }
    Ok(outcome(worst <= ENERGY_IDENTITY_TOL, parts.join("; ")))
}

fn criterion_3() -> Result<Outcome> {
    let disc = generate_disc(1.0, RADIAL_LEVEL)?;
    let square = generate_square(EIGEN_SQUARE_N)?;
    let checks = [
        ("disc Neumann", neumann_lambda(&disc, EIGEN_SOLVER_TOL)?, NEUMANN_DISC),
        ("disc Dirichlet", dirichlet_lambda(&disc, EIGEN_SOLVER_TOL)?, DIRICHLET_DISC),
        ("square Neumann", neumann_lambda(&square, EIGEN_SOLVER_TOL)?, PI * PI),
        ("square Dirichlet", dirichlet_lambda(&square, EIGEN_SOLVER_TOL)?, 2.0 * PI * PI),
    ];
    let pass = checks.iter().all(|(_, v, r)| rel(*v, *r) <= EIGEN_REL_TOL)
        && disc.n_triangles() >= RADIAL_MIN_TRIANGLES
        && square.n_triangles() >= RADIAL_MIN_TRIANGLES;
    let detail = checks
        .iter()
        .map(|(n, v, r)| format!("{n} {v:.5} ({:+.3}%)", 100.0 * (v - r) / r))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(outcome(pass, detail))
}

fn criterion_4() -> Result<Outcome> {
    let opts = AuxiliaryOptions::default();
    let mut m0s = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    for level in THRESHOLD_LEVELS {
        let mesh = generate_disc(1.0, level)?;
        let t = threshold_m0(&mesh, k1(), THRESHOLD_BRACKET, THRESHOLD_TOL, &opts)?;
        parts.push(format!(
            "level {level}: m0 in [{:.4}, {:.4}] (Λ = {:.4}, {} probes)",
            t.bracket.0,
            t.bracket.1,
            t.reference,
            t.samples.len()
        ));
        m0s.push(t.m0);
        let oracle = 2.0 * PI / t.reference;
        pass &= rel(t.m0, oracle) <= M0_ORACLE_TOL;
        parts.push(format!("2π/Λ = {oracle:.4}"));
        if level == THRESHOLD_LEVELS[1] {
            let above = minimize_auxiliary(&mesh, k1(), 4.0 * t.m0, &opts)?;
            let below = minimize_auxiliary(&mesh, k1(), 0.25 * t.m0, &opts)?;
            let cv_above = symmetry_metric(&mesh, &above.u)?.cv;
            let cv_below = symmetry_metric(&mesh, &below.u)?.cv;
            let (constant, _) = robin_eig(
                &mesh,
                &ThicknessField::uniform(&mesh, 0.25 * t.m0)?,
                k1(),
                opts.eig_tol,
            )?;
            let gain = (constant - below.lambda) / constant;
            pass &= cv_above <= ABOVE_THRESHOLD_CV && cv_below >= BELOW_THRESHOLD_CV && gain >= BELOW_THRESHOLD_GAIN;
            parts.push(format!(
                "CV at 4m0 = {cv_above:.2e}, CV at m0/4 = {cv_below:.3}, λ gain over constant h = {gain:.3e}"
            ));
        }
    }
    let agreement = rel(m0s[0], m0s[1]);
    pass &= agreement <= THRESHOLD_LEVEL_AGREEMENT;
    pass &= rel(m0s[1], M0_BASELINE) <= M0_BASELINE_TOL;
    parts.push(format!("levels agree to {:.2}%", 100.0 * agreement));
    Ok(outcome(pass, parts.join("; ")))
}

fn geometric_grid((a, b, n): (f64, f64, usize)) -> Vec<f64> {
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn criterion_5() -> Result<Outcome> {
    let grid = geometric_grid(MONOTONE_GRID);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mesh) in [
        ("disc", generate_disc(1.0, MONOTONE_DISC_LEVEL)?),
        ("square", generate_square(MONOTONE_SQUARE_N)?),
    ] {
        let table = sweep(&mesh, k1(), &grid, SweepKind::Eigen, &one(&mesh), &SweepOptions::default())?;
        let values: Vec<f64> = table.rows.iter().filter_map(|r| r.value).collect();
        let worst = values
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs())
            .fold(f64::NEG_INFINITY, f64::max);
        pass &= values.len() == grid.len() && worst <= MONOTONE_TOL;
        parts.push(format!(
            "{name}: λ {:.4} → {:.4}, largest relative rise {worst:.2e}",
            values[0],
            values[values.len() - 1]
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_6() -> Result<Outcome> {
    let reference = PI * PI;
    let mut pass = true;
    let mut parts = Vec::new();
    for m in INTERVAL_MASSES {
        let l = lambda_1d(1.0, m, 1.0, INTERVAL_POINTS)?;
        pass &= l < reference;
        parts.push(format!("λ({m}) = {l:.6}"));
    }
    let m = 1.0;
    let (best, h) = lambda_1d_report(1.0, m, 1.0, INTERVAL_POINTS)?;
    let mut sweep_min = (f64::INFINITY, 0.0);
    for i in 0..=SPLIT_GRID {
        let h0 = m * i as f64 / SPLIT_GRID as f64;
        let l = lambda_1d_split(1.0, h0, m - h0, 1.0, INTERVAL_POINTS)?;
        if l < sweep_min.0 {
            sweep_min = (l, h0);
        }
    }
    let step = m / SPLIT_GRID as f64;
    let symmetric = (sweep_min.1 - 0.5 * m).abs() <= step && (h[0] - 0.5 * m).abs() <= step;
    pass &= symmetric && best <= sweep_min.0 * (1.0 + 1e-9);
    parts.push(format!(
        "brute force over {} splits: best h(0) = {:.3}, solver h = ({:.4}, {:.4})",
        SPLIT_GRID + 1,
        sweep_min.1,
        h[0],
        h[1]
    ));
    Ok(outcome(pass, parts.join(", ")))
}

fn criterion_7() -> Result<Outcome> {
    let mesh = generate_two_discs(1.0, 0.5, TWO_BALL_GAP, TWO_BALL_LEVEL)?;
    let c = component_concentration(&mesh, k1(), 1.0, &one(&mesh), &ReducedOptions::default())?;
    let big = c.fractions[0];
    let cv = c.thickness_cv[0].unwrap_or(f64::INFINITY);
    let equal = generate_two_discs(1.0, 1.0, TWO_BALL_GAP, TWO_BALL_LEVEL)?;
    let f = one(&equal);
    let a = split_energy(&equal, k1(), 1.0, &f, 0)?;
    let b = split_energy(&equal, k1(), 1.0, &f, 1)?;
    let gap = rel(a, b);
    Ok(outcome(
        big >= TWO_BALL_FRACTION && cv <= TWO_BALL_CV && gap <= EQUAL_SPLIT_TOL,
        format!(
            "mass on larger disc {big:.6}, CV(h) there {cv:.2e}; equal discs: E_A = {a:.10}, E_B = {b:.10} (rel. gap {gap:.1e})"
        ),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let mesh = generate_square(CONCENTRATION_N)?;
    let study = concentration_profile(&mesh, k1(), &one(&mesh), &CONCENTRATION_MASSES, &ReducedOptions::default())?;
    let fr: Vec<f64> = study.rows.iter().map(|r| r.fraction).collect();
    let monotone = fr.windows(2).all(|w| w[1] > w[0]);
    let last = *fr.last().expect("three masses");
    Ok(outcome(
        monotone && last > CONCENTRATED_FRACTION,
        format!(
            "fractions near {} flux minimizers: {}",
            study.points.len(),
            CONCENTRATION_MASSES
                .iter()
                .zip(&fr)
                .map(|(m, f)| format!("m={m}: {f:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

/// Euclidean projection onto `{g ≥ 0, Σg = m}`.
fn project_simplex(v: &[f64], m: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - m) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimizes `Σ wᵢuᵢ²/hᵢ` over `{h ≥ 0, Σwᵢhᵢ = m}` by projected gradient
/// descent with backtracking in the masses `gᵢ = wᵢhᵢ`, where the
/// objective reads `Σ (wᵢuᵢ)²/gᵢ`.
fn projected_gradient_oracle(w: &[f64], u: &[f64], m: f64) -> f64 {
    let c: Vec<f64> = w.iter().zip(u).map(|(w, u)| (w * u).powi(2)).collect();
    let obj = |g: &[f64]| -> f64 {
        c.iter()
            .zip(g)
            .map(|(c, g)| match (*c == 0.0, *g > 0.0) {
                (true, _) => 0.0,
                (false, true) => c / g,
                (false, false) => f64::INFINITY,
            })
            .sum()
    };
    let mut g = vec![m / w.len() as f64; w.len()];
    let mut value = obj(&g);
    let mut step = 1.0;
    for _ in 0..100_000 {
        let grad: Vec<f64> = c.iter().zip(&g).map(|(c, g)| -c / (g * g)).collect();
        let mut improved = false;
        while step > 1e-300 {
            let raw: Vec<f64> = g.iter().zip(&grad).map(|(g, d)| g - step * d).collect();
            let trial = project_simplex(&raw, m);
            let decrease: f64 = grad.iter().zip(&trial).zip(&g).map(|((d, t), g)| d * (g - t)).sum();
            let tv = obj(&trial);
            if tv <= value - 1e-4 * decrease && tv < value {
                g = trial;
                value = tv;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    value
}

fn criterion_9() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut parts = Vec::new();
    let mut pass = true;

    // Descent: every recorded trace is nonincreasing.
    let mut traces = 0;
    let mut worst_rise = f64::NEG_INFINITY;
    for (mesh, m) in [
        (generate_square(10)?, 0.05),
        (generate_square(10)?, 1.0),
        (generate_disc(1.0, 3)?, 0.5),
        (generate_two_discs(1.0, 0.5, 0.25, 2)?, 1.0),
    ] {
        let r = minimize_reduced(&mesh, k1(), m, &one(&mesh), &ReducedOptions::default())?;
        let e = minimize_auxiliary(&mesh, k1(), m, &AuxiliaryOptions::default())?;
        for t in std::iter::once(&r.trace).chain(e.traces.iter()) {
            traces += 1;
            for w in t.windows(2) {
                worst_rise = worst_rise.max((w[1] - w[0]) / w[0].abs());
            }
        }
    }
    pass &= worst_rise <= DESCENT_SLACK;
    parts.push(format!("{traces} traces, largest relative rise {worst_rise:.1e}"));

    // Midpoint convexity of F.
    let mesh = generate_square(6)?;
    let f = one(&mesh);
    let mut violations = 0;
    for _ in 0..CONVEXITY_PAIRS {
        let m: f64 = rng.gen_range(0.05..5.0);
        let a: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = reduced_functional(&mesh, k1(), m, &f, &ScalarField::new(&mesh, a)?)?;
        let fb = reduced_functional(&mesh, k1(), m, &f, &ScalarField::new(&mesh, b)?)?;
        let fm = reduced_functional(&mesh, k1(), m, &f, &ScalarField::new(&mesh, mid)?)?;
        if fm > 0.5 * (fa + fb) + 1e-12 * (fa.abs() + fb.abs()) {
            violations += 1;
        }
    }
    pass &= violations == 0;
    parts.push(format!("{violations}/{CONVEXITY_PAIRS} convexity violations"));

    // h-step against the projected-gradient oracle, ≤ 12 boundary vertices.
    let mut worst_oracle = 0.0f64;
    let mut worst_prop = 0.0f64;
    for n in [2usize, 3] {
        let mesh = generate_square(n)?;
        let trace = mesh.trace();
        for _ in 0..10 {
            let m: f64 = rng.gen_range(0.1..3.0);
            let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let field = ScalarField::new(&mesh, u.clone())?;
            let h = optimal_thickness(&mesh, m, &field)?.expect("nonzero trace");
            let ub: Vec<f64> = trace.vertices().iter().map(|&v| u[v]).collect();
            let closed: f64 = trace
                .weights()
                .iter()
                .zip(&ub)
                .zip(h.values())
                .map(|((w, u), h)| w * u * u / h)
                .sum();
            let oracle = projected_gradient_oracle(trace.weights(), &ub, m);
            let gap = (closed - oracle) / oracle;
            if gap.abs() > worst_oracle.abs() {
                worst_oracle = gap;
            }
            // hᵢ·S = m|uᵢ| and Σwᵢhᵢ = m.
            let s = boundary_abs_integral(&mesh, &field);
            for (hv, u) in h.values().iter().zip(&ub) {
                worst_prop = worst_prop.max((hv * s - m * u.abs()).abs() / m);
            }
            worst_prop = worst_prop.max((h.mass() - m).abs() / m);
            // The closed form attains the lower bound S²/m.
            worst_prop = worst_prop.max((closed - s * s / m).abs() / (s * s / m));
        }
        assert!(trace.len() <= 12);
    }
    pass &= worst_oracle.abs() <= ORACLE_TOL && worst_prop <= PROPORTIONALITY_TOL;
    parts.push(format!(
        "h-step vs projected-gradient oracle: worst relative gap {worst_oracle:.1e}; proportionality error {worst_prop:.1e}"
    ));

    let elapsed = start.elapsed();
    pass &= elapsed <= PROPERTY_BUDGET;
    parts.push(format!("{:.1} s", elapsed.as_secs_f64()));
    Ok(outcome(pass, parts.join("; ")))
}

type Criterion = (usize, &'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 9] = [
        (1, "radial optimum on the disc", criterion_1),
        (2, "energy identity", criterion_2),
        (3, "reference eigenvalues", criterion_3),
        (4, "symmetry-breaking threshold", criterion_4),
        (5, "monotonicity in m", criterion_5),
        (6, "no breaking on the interval", criterion_6),
        (7, "two-ball concentration", criterion_7),
        (8, "small-m concentration on the square", criterion_8),
        (9, "descent and convexity properties", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!(
            "[{}] criterion {id} ({name}): {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
