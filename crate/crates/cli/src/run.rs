//! One run: build the mesh, solve, write every output and the manifest.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use insulation::analysis::{
    component_concentration, concentration_profile, split_energy, sweep, threshold_m0, SweepKind,
    SweepOptions,
};
use insulation::eigen::{minimize_auxiliary, robin_eig, AuxiliaryOptions};
use insulation::energy::{minimize_reduced, radial_reference, ReducedOptions};
use insulation::fem::weighted_cv;
use insulation::mesh::{generate_disc, generate_square, generate_two_discs, load_mesh, refine};
use insulation::{Error as SolverError, Mesh2D, RobinConfig, ScalarField, ThicknessField};

use crate::config::{Domain, Mode, RunConfig, SweepTarget};
use crate::error::{config, io, CliError, Result};
use crate::output::{boundary_csv, sig17, thickness_on_vertices};
use crate::vtk::vtk_string;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn build_mesh(cfg: &RunConfig) -> Result<Mesh2D> {
    let mut mesh = match &cfg.domain {
        Domain::Square { n } => generate_square(*n)?,
        Domain::Disc { radius, level } => generate_disc(*radius, *level)?,
        Domain::TwoDiscs { r1, r2, gap, level } => generate_two_discs(*r1, *r2, *gap, *level)?,
        Domain::File(path) => load_mesh(path)?,
    };
    for _ in 0..cfg.refine {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

/// Outputs of a run in progress: the summary accumulates in memory, data
/// files are written as soon as they are complete.
struct Outputs {
    dir: PathBuf,
    summary: String,
    files: Vec<String>,
}

impl Outputs {
    fn line(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.summary, "{key} = {value}");
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs `cfg` and writes its outputs. `summary.txt` and `manifest.txt` are
/// written even when solving fails, with `partial = true` in the manifest.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let mesh = build_mesh(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let mut out = Outputs {
        dir: cfg.out.clone(),
        summary: String::new(),
        files: Vec::new(),
    };
    mesh_summary(cfg, &mesh, &mut out);
    let result = solve(cfg, &mesh, &mut out);
    if let Err(e) = &result {
        out.line("error", e);
    }
    let summary = std::mem::take(&mut out.summary);
    out.write("summary.txt", &summary)?;
    let manifest = manifest_text(cfg, &out.files, result.as_ref().err());
    let path = cfg.out.join("manifest.txt");
    fs::write(&path, manifest).map_err(io(&path))?;
    result
}

fn manifest_text(cfg: &RunConfig, files: &[String], error: Option<&CliError>) -> String {
    let mut s = String::from("# Replay with: insulate --config manifest.txt\n");
    s.push_str(&cfg.to_text());
    s.push_str("[provenance]\n");
    let _ = writeln!(s, "version = {VERSION}");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "partial = {}", error.is_some());
    if let Some(e) = error {
        let _ = writeln!(s, "exit-code = {}", e.exit_code());
    }
    let _ = writeln!(s, "files = {}", files.join(" "));
    s
}

fn mesh_summary(cfg: &RunConfig, mesh: &Mesh2D, out: &mut Outputs) {
    out.line("mode", cfg.mode);
    out.line("domain", &cfg.domain);
    out.line("refine", cfg.refine);
    out.line("vertices", mesh.n_vertices());
    out.line("triangles", mesh.n_triangles());
    out.line("boundary_vertices", mesh.trace().len());
    out.line("components", mesh.n_components());
    out.line("area", mesh.area());
    out.line("perimeter", mesh.perimeter());
    out.line("k", cfg.k);
    out.line("f", cfg.f_const);
}

fn reduced_options(cfg: &RunConfig) -> ReducedOptions {
    let mut o = ReducedOptions::default();
    if let Some(t) = cfg.tol {
        o.tol = t;
    }
    o
}

fn auxiliary_options(cfg: &RunConfig) -> AuxiliaryOptions {
    let mut o = AuxiliaryOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..AuxiliaryOptions::default()
    };
    if let Some(t) = cfg.tol {
        o.tol = t;
    }
    o
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn solve(cfg: &RunConfig, mesh: &Mesh2D, out: &mut Outputs) -> Result<()> {
    let k = RobinConfig::new(cfg.k)?;
    let f = ScalarField::constant(mesh, cfg.f_const);
    match cfg.mode {
        Mode::Energy => energy(cfg, mesh, k, &f, out),
        Mode::Eigen => eigen(cfg, mesh, k, out),
        Mode::Threshold => threshold(cfg, mesh, k, out),
        Mode::Sweep => mass_sweep(cfg, mesh, k, &f, out),
        Mode::Concentration => concentration(cfg, mesh, k, &f, out),
        Mode::TwoComponent => two_component(cfg, mesh, k, &f, out),
    }
}

fn write_fields(mesh: &Mesh2D, u: &ScalarField, h: &ThicknessField, out: &mut Outputs) -> Result<()> {
    let hv = thickness_on_vertices(mesh, h.values());
    let vtk = vtk_string(mesh, &[("u", u.values()), ("h", &hv)])?;
    out.write("fields.vtk", &vtk)?;
    out.write("boundary.csv", &boundary_csv(mesh, u.values(), h.values()))
}

fn mass(cfg: &RunConfig) -> f64 {
    cfg.m.expect("validated: mode needs m")
}

fn energy(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, f: &ScalarField, out: &mut Outputs) -> Result<()> {
    let m = mass(cfg);
    let r = minimize_reduced(mesh, k, m, f, &reduced_options(cfg))?;
    out.line("m", m);
    out.line("energy", r.energy);
    out.line("iterations", r.iterations);
    out.line("final_rel_change", r.final_rel_change);
    out.line("degenerate", r.degenerate);
    out.line("thickness_mass", r.h.mass());
    out.line("thickness_cv", opt(weighted_cv(mesh.trace().weights(), r.h.values())));
    if let Domain::Disc { radius, .. } = cfg.domain {
        // The optimum for f ≡ c is c times the unit-source radial solution.
        let exact = |p: [f64; 2]| -> Result<f64> {
            let rr = p[0].hypot(p[1]).min(radius);
            Ok(cfg.f_const * radial_reference(radius, 2, cfg.k, m, rr)?)
        };
        let mut dev = 0.0f64;
        for (p, &u) in mesh.vertices().iter().zip(r.u.values()) {
            dev = dev.max((u - exact(*p)?).abs());
        }
        let peak = exact([0.0, 0.0])?.abs();
        out.line("radial_max_deviation", dev);
        out.line("radial_relative_deviation", dev / peak);
    }
    write_fields(mesh, &r.u, &r.h, out)
}

fn eigen(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, out: &mut Outputs) -> Result<()> {
    let m = mass(cfg);
    let opts = auxiliary_options(cfg);
    let r = minimize_auxiliary(mesh, k, m, &opts)?;
    let (uniform, _) = robin_eig(mesh, &ThicknessField::uniform(mesh, m)?, k, opts.eig_tol)?;
    out.line("m", m);
    out.line("lambda", r.lambda);
    out.line("lambda_uniform_thickness", uniform);
    out.line("best_restart", r.best_restart);
    let restarts: Vec<String> = r
        .restart_lambdas
        .iter()
        .map(|l| l.map_or_else(|| "failed".to_string(), |x| x.to_string()))
        .collect();
    out.line("restart_lambdas", restarts.join(" "));
    out.line("symmetry_cv", r.symmetry);
    out.line("iterations", r.iterations);
    out.line("fallbacks", r.fallbacks);
    out.line("degenerate", r.degenerate);
    write_fields(mesh, &r.u, &r.h, out)
}

fn threshold_csv(samples: &[(f64, f64)]) -> String {
    let mut s = String::from("probe,m,lambda\n");
    for (i, (m, l)) in samples.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", sig17(*m), sig17(*l));
    }
    s
}

fn threshold(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, out: &mut Outputs) -> Result<()> {
    if mesh.n_components() != 1 {
        return Err(config("threshold mode needs a connected domain"));
    }
    let r = match threshold_m0(mesh, k, cfg.bracket, cfg.bracket_tol, &auxiliary_options(cfg)) {
        Ok(r) => r,
        Err(e) => {
            if let SolverError::ProbeFailed { samples, .. } = &e {
                out.write("threshold.csv", &threshold_csv(samples))?;
            }
            return Err(e.into());
        }
    };
    out.line("neumann_lambda", r.reference);
    out.line("m0", r.m0);
    out.line("bracket", format!("{} {}", r.bracket.0, r.bracket.1));
    out.line("lambda_bracket", format!("{} {}", r.lambda_bracket.0, r.lambda_bracket.1));
    out.line("probes", r.samples.len());
    out.write("threshold.csv", &threshold_csv(&r.samples))
}

fn mass_sweep(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, f: &ScalarField, out: &mut Outputs) -> Result<()> {
    let grid = cfg.m_grid.expect("validated: mode needs m-grid").values();
    let kind = match cfg.sweep_kind {
        SweepTarget::Eigen => SweepKind::Eigen,
        SweepTarget::Energy => SweepKind::Energy,
    };
    let opts = SweepOptions {
        auxiliary: auxiliary_options(cfg),
        reduced: reduced_options(cfg),
    };
    let table = sweep(mesh, k, &grid, kind, f, &opts)?;
    let mut s = String::from("m,value,symmetry,iterations,best_restart,error\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            sig17(r.m),
            opt(r.value.map(sig17)),
            opt(r.symmetry.map(sig17)),
            r.iterations,
            opt(r.best_restart),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
    out.write("sweep.csv", &s)?;
    let failed = table.rows.iter().filter(|r| !r.is_valid()).count();
    out.line("sweep_kind", format!("{kind:?}").to_lowercase());
    out.line("rows", table.rows.len());
    out.line("failed_rows", failed);
    table.check_monotone()?;
    if failed > 0 {
        return Err(CliError::Incomplete(format!("{failed} of {} sweep rows failed", table.rows.len())));
    }
    Ok(())
}

/// Arclength of every trace slot from the start of its component's loops.
fn slot_arclength(mesh: &Mesh2D) -> Vec<f64> {
    let trace = mesh.trace();
    let pts = mesh.vertices();
    let mut s = vec![0.0; trace.len()];
    let mut acc = vec![0.0; mesh.n_components()];
    for lp in trace.loops() {
        for (i, &v) in lp.vertices.iter().enumerate() {
            if i > 0 {
                let p = pts[lp.vertices[i - 1]];
                acc[lp.component] += (pts[v][0] - p[0]).hypot(pts[v][1] - p[1]);
            }
            s[trace.slot(v).expect("loop vertex on the boundary")] = acc[lp.component];
        }
        let (first, last) = (pts[lp.vertices[0]], pts[*lp.vertices.last().expect("non-empty loop")]);
        acc[lp.component] += (first[0] - last[0]).hypot(first[1] - last[1]);
    }
    s
}

fn concentration(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, f: &ScalarField, out: &mut Outputs) -> Result<()> {
    let mut masses = cfg.m_grid.expect("validated: mode needs m-grid").values();
    masses.reverse();
    let study = concentration_profile(mesh, k, f, &masses, &reduced_options(cfg))?;
    let trace = mesh.trace();
    let arclength = slot_arclength(mesh);
    let mut s = String::from("m,component,arclength,x,y,flux,profile\n");
    for row in &study.rows {
        for (slot, &v) in trace.vertices().iter().enumerate() {
            let p = mesh.vertices()[v];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                sig17(row.m),
                trace.components()[slot],
                sig17(arclength[slot]),
                sig17(p[0]),
                sig17(p[1]),
                sig17(study.flux[slot]),
                sig17(row.profile[slot])
            );
        }
    }
    out.write("concentration.csv", &s)?;
    let points: Vec<String> = study.points.iter().map(|p| format!("({} {})", p[0], p[1])).collect();
    out.line("flux_minimizers", points.join(" "));
    for (i, row) in study.rows.iter().enumerate() {
        out.line(
            &format!("profile[{i}]"),
            format!(
                "m {} energy {} fraction {} cv {} iterations {}",
                row.m,
                row.energy,
                row.fraction,
                opt(row.cv),
                row.iterations
            ),
        );
    }
    Ok(())
}

fn two_component(cfg: &RunConfig, mesh: &Mesh2D, k: RobinConfig, f: &ScalarField, out: &mut Outputs) -> Result<()> {
    if mesh.n_components() < 2 {
        return Err(config("two-component mode needs a domain with at least two components"));
    }
    let m = mass(cfg);
    let c = component_concentration(mesh, k, m, f, &reduced_options(cfg))?;
    out.line("m", m);
    out.line("energy", c.report.energy);
    out.line("iterations", c.report.iterations);
    for (i, frac) in c.fractions.iter().enumerate() {
        out.line(&format!("fraction[{i}]"), frac);
        out.line(&format!("thickness_cv[{i}]"), opt(c.thickness_cv[i]));
        out.line(&format!("energy_all_on[{i}]"), split_energy(mesh, k, m, f, i)?);
    }
    write_fields(mesh, &c.report.u, &c.report.h, out)
}

/// Reads `path` if given, overlays `flags`, and validates the result.
pub fn load_config(path: Option<&Path>, flags: crate::config::Settings) -> Result<RunConfig> {
    let mut settings = match path {
        Some(p) => crate::config::parse_settings(&fs::read_to_string(p).map_err(io(p))?)?,
        None => Default::default(),
    };
    settings.extend(flags);
    RunConfig::from_settings(&settings)
}
