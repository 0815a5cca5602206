use insulation::analysis::{sweep, symmetry_metric, SweepKind, SweepOptions};
use insulation::eigen::{
    auxiliary_objective, dirichlet_lambda, lambda_1d, minimize_auxiliary, neumann_lambda,
    robin_eig, AuxiliaryOptions,
};
use insulation::fem::{boundary_abs_integral, Operators};
use insulation::mesh::{generate_disc, generate_square, refine};
use insulation::{RobinConfig, ScalarField, ThicknessField};

fn k1() -> RobinConfig {
    RobinConfig::new(1.0).unwrap()
}

#[test]
fn large_mass_is_radial_small_mass_breaks_symmetry() {
    let mesh = generate_disc(1.0, 3).unwrap();
    let opts = AuxiliaryOptions::default();
    let big = minimize_auxiliary(&mesh, k1(), 100.0, &opts).unwrap();
    assert!(symmetry_metric(&mesh, &big.u).unwrap().cv < 0.02);
    let small = minimize_auxiliary(&mesh, k1(), 0.01, &opts).unwrap();
    assert!(small.symmetry > 0.10, "{}", small.symmetry);
}

#[test]
fn report_invariants() {
    for (mesh, m) in [
        (generate_square(8).unwrap(), 0.4),
        (generate_disc(1.0, 3).unwrap(), 1.0),
    ] {
        let r = minimize_auxiliary(&mesh, k1(), m, &AuxiliaryOptions::default()).unwrap();
        let ops = Operators::new(&mesh);
        assert!(r.u.values().iter().all(|&x| x >= -1e-12));
        assert!((ops.mass.quadratic_form(r.u.values()) - 1.0).abs() < 1e-12);
        let j = auxiliary_objective(&mesh, k1(), m, &r.u);
        assert!((j - r.lambda).abs() <= 1e-10 * r.lambda);
        let s = boundary_abs_integral(&mesh, &r.u);
        for (&v, &h) in mesh.trace().vertices().iter().zip(r.h.values()) {
            assert!((h * s - m * r.u.values()[v].abs()).abs() <= 1e-12 * m);
        }
        let (constant, _) = robin_eig(&mesh, &ThicknessField::uniform(&mesh, m).unwrap(), k1(), 1e-10).unwrap();
        assert!(r.lambda <= constant * (1.0 + 1e-10));
        assert!(r.lambda > 0.0 && r.lambda < dirichlet_lambda(&mesh, 1e-10).unwrap());
        assert_eq!(r.restart_lambdas.len(), AuxiliaryOptions::default().restarts);
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let mesh = generate_disc(1.0, 3).unwrap();
    let a = minimize_auxiliary(&mesh, k1(), 0.7, &AuxiliaryOptions::default()).unwrap();
    let b = minimize_auxiliary(&mesh, k1(), 0.7, &AuxiliaryOptions::default()).unwrap();
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.u, b.u);
    assert_eq!(a.best_restart, b.best_restart);
}

#[test]
fn disc_sweep_strictly_decreasing() {
    let mesh = generate_disc(1.0, 3).unwrap();
    let f = ScalarField::constant(&mesh, 1.0);
    let t = sweep(&mesh, k1(), &[0.5, 1.0, 2.0, 4.0], SweepKind::Eigen, &f, &SweepOptions::default()).unwrap();
    t.check_monotone().unwrap();
    let v: Vec<f64> = t.rows.iter().map(|r| r.value.unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    assert!(t.rows.iter().all(|r| r.best_restart.is_some() && r.error.is_none()));
}

#[test]
fn neumann_below_dirichlet_and_decreasing_under_refinement() {
    let coarse = generate_square(6).unwrap();
    let fine = refine(&coarse);
    let n0 = neumann_lambda(&coarse, 1e-10).unwrap();
    let n1 = neumann_lambda(&fine, 1e-10).unwrap();
    assert!(n1 < n0 && n1 > std::f64::consts::PI.powi(2));
    for mesh in [coarse, generate_disc(1.0, 3).unwrap()] {
        assert!(dirichlet_lambda(&mesh, 1e-10).unwrap() > neumann_lambda(&mesh, 1e-10).unwrap());
    }
}

#[test]
fn interval_eigenvalue_vanishes_for_large_mass() {
    let l = [1.0, 10.0, 100.0, 1000.0].map(|m| lambda_1d(1.0, m, 1.0, 101).unwrap());
    assert!(l.windows(2).all(|w| w[1] < w[0]));
    assert!(l[3] < 1e-2);
}

#[test]
fn invalid_inputs_are_rejected() {
    let mesh = generate_square(4).unwrap();
    assert!(minimize_auxiliary(&mesh, k1(), -1.0, &AuxiliaryOptions::default()).is_err());
    let none = AuxiliaryOptions {
        restarts: 0,
        ..AuxiliaryOptions::default()
    };
    assert!(minimize_auxiliary(&mesh, k1(), 1.0, &none).is_err());
    assert!(lambda_1d(1.0, 1.0, 1.0, 5).is_err());
}
