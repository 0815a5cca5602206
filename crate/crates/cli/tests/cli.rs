use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use insulation::mesh::{generate_square, save_mesh};

fn insulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insulate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn value<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
        .unwrap_or_else(|| panic!("no {key} in summary"))
}

#[test]
fn disc_energy_matches_the_radial_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = insulate(&["--mode", "energy", "--domain", "disc:1:4", "--m", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(&out, "summary.txt");
    let dev: f64 = value(&summary, "radial_relative_deviation").parse().unwrap();
    assert!(dev <= 0.01, "{dev}");
    let e: f64 = value(&summary, "energy").parse().unwrap();
    assert!(e < 0.0);
    assert!(read(&out, "manifest.txt").contains("partial = false"));
}

#[test]
fn identical_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = insulate(&[
            "--mode", "sweep", "--domain", "disc:1:2", "--m-grid", "0.5:4:4", "--seed", "7",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (read(&out, "sweep.csv"), read(&out, "summary.txt"))
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn manifest_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = insulate(&[
        "--mode", "eigen", "--domain", "square:6", "--m", "0.4", "--k", "2", "--tol", "1e-9",
        "--restarts", "3", "--seed", "5", "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = dir.path().join("second");
    let manifest = first.join("manifest.txt");
    let o = insulate(&["--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["summary.txt", "boundary.csv", "fields.vtk"] {
        assert_eq!(read(&first, name), read(&second, name), "{name}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "[run]\nmode = energy\n[domain]\ndomain = square:4\n[problem]\nm = 1\nf-const = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = insulate(&["--config", cfg.to_str().unwrap(), "--f-const", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(&out, "summary.txt");
    assert_eq!(value(&summary, "f"), "2");
    assert_eq!(value(&summary, "m"), "1");
}

#[test]
fn vtk_and_boundary_files_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("sq.mesh");
    let mesh = generate_square(3).unwrap();
    save_mesh(&mesh, &mesh_path).unwrap();
    let out = dir.path().join("out");
    let domain = format!("file:{}", mesh_path.display());
    let o = insulate(&["--mode", "energy", "--domain", &domain, "--m", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let vtk = read(&out, "fields.vtk");
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("DATASET UNSTRUCTURED_GRID\n"));
    assert!(vtk.contains(&format!("POINTS {} double\n", mesh.n_vertices())));
    assert!(vtk.contains(&format!("CELLS {} {}\n", mesh.n_triangles(), 4 * mesh.n_triangles())));
    assert!(vtk.contains("SCALARS u double 1\n") && vtk.contains("SCALARS h double 1\n"));

    let csv = read(&out, "boundary.csv");
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), mesh.trace().len() + 1);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
    assert!((rows.last().unwrap()[1] - 4.0).abs() <= 1e-10);
    let mass: f64 = rows[..rows.len() - 1]
        .iter()
        .zip(mesh.trace().vertices())
        .map(|(r, &v)| r[5] * mesh.trace().weights()[mesh.trace().slot(v).unwrap()])
        .sum();
    assert!((mass - 0.5).abs() < 1e-12);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let o = insulate(&["--mode", "energy", "--domain", "square:4", "--m", "-1", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m must be positive"));
    assert!(!Path::new(out).exists());

    for args in [
        &["--mode", "energy", "--m", "1", "--out", out][..],
        &["--mode", "melt", "--domain", "square:4", "--m", "1", "--out", out],
        &["--mode", "sweep", "--domain", "square:4", "--m", "1", "--out", out],
        &["--mode", "energy", "--domain", "file:/nonexistent.mesh", "--m", "1", "--out", out],
        &["--bogus"],
    ] {
        assert_eq!(insulate(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn failed_runs_are_flagged_partial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // λ stays below Λ on the whole bracket, so it cannot straddle.
    let o = insulate(&[
        "--mode", "threshold", "--domain", "disc:1:2", "--bracket", "4:8", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let manifest = read(&out, "manifest.txt");
    assert!(manifest.contains("partial = true"), "{manifest}");
    assert!(read(&out, "summary.txt").contains("error = "));
}
