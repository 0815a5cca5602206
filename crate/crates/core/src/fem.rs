//! P1 assembly of the Robin-limit forms: stiffness, consistent mass,
//! lumped boundary Robin term, consistent load and the lumped boundary
//! L¹ functional.

use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh2D, Point};
use crate::sparse::SymmetricSparseMatrix;

/// Per-vertex real field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(mesh: &Mesh2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite field value at vertex {i}")));
        }
        Ok(Self(values))
    }

    pub fn constant(mesh: &Mesh2D, c: f64) -> Self {
        Self(vec![c; mesh.n_vertices()])
    }

    pub fn from_fn(mesh: &Mesh2D, f: impl Fn(Point) -> f64) -> Self {
        Self(mesh.vertices().iter().map(|&p| f(p)).collect())
    }

    /// Wraps values produced by a solver (length already known to match).
    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Values at the boundary trace slots, in trace order.
    pub fn boundary_values(&self, mesh: &Mesh2D) -> Vec<f64> {
        mesh.trace().vertices().iter().map(|&v| self.0[v]).collect()
    }
}

/// Asymptotic ratio `k = ε/δ` of the thin layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinConfig {
    k: f64,
}

impl RobinConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(invalid(format!("k must be positive, got {k}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Insulator thickness per boundary trace slot, with its lumped total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessField {
    values: Vec<f64>,
    mass: f64,
}

impl ThicknessField {
    /// `values[i]` is the thickness at trace slot `i`.
    pub fn new(mesh: &Mesh2D, values: Vec<f64>) -> Result<Self> {
        let trace = mesh.trace();
        if values.len() != trace.len() {
            return Err(Error::DimensionMismatch {
                expected: trace.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|&h| !(h >= 0.0) || !h.is_finite()) {
            return Err(invalid(format!(
                "thickness must be finite and nonnegative, got {} at boundary slot {i}",
                values[i]
            )));
        }
        let mass = weighted_sum(trace.weights(), &values);
        Ok(Self { values, mass })
    }

    /// Constant thickness `m / perimeter`.
    pub fn uniform(mesh: &Mesh2D, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(invalid(format!("m must be positive, got {m}")));
        }
        let h = m / mesh.perimeter();
        Self::new(mesh, vec![h; mesh.trace().len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lumped total `Σ wᵢ hᵢ`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Copy with every entry raised to at least `floor`.
    pub fn floored(&self, mesh: &Mesh2D, floor: f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&h| h.max(floor)).collect();
        let mass = weighted_sum(mesh.trace().weights(), &values);
        Self { values, mass }
    }
}

pub(crate) fn weighted_sum(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Lumped-weighted coefficient of variation of `values` over the trace
/// slots in `slots` (`None` when the weighted mean vanishes).
pub fn weighted_cv(weights: &[f64], values: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    let mean = weighted_sum(weights, values) / total;
    if !(mean.abs() >= 1e-14) {
        return None;
    }
    let var = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / total;
    Some(var.sqrt() / mean.abs())
}

struct Element {
    vertices: [usize; 3],
    area: f64,
    /// Gradients of the barycentric basis functions.
    grads: [Point; 3],
}

fn element(mesh: &Mesh2D, t: usize) -> Element {
    let tri = mesh.triangles()[t];
    let p = tri.map(|v| mesh.vertices()[v]);
    let area = mesh.triangle_area(t);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        // Inward normal of the opposite edge scaled by its length / (2A).
        grads[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
    }
    Element {
        vertices: tri,
        area,
        grads,
    }
}

/// `∫ ∇φᵢ·∇φⱼ`.
pub fn assemble_stiffness(mesh: &Mesh2D) -> SymmetricSparseMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let e = element(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                let g = e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1];
                triplets.push((e.vertices[i], e.vertices[j], e.area * g));
            }
        }
    }
    SymmetricSparseMatrix::from_triplets(mesh.n_vertices(), &triplets)
        .expect("element stiffness is symmetric")
}

/// Consistent P1 mass `∫ φᵢ φⱼ`.
pub fn assemble_mass(mesh: &Mesh2D) -> SymmetricSparseMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let e = element(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                let c = if i == j { 2.0 } else { 1.0 };
                triplets.push((e.vertices[i], e.vertices[j], e.area * c / 12.0));
            }
        }
    }
    SymmetricSparseMatrix::from_triplets(mesh.n_vertices(), &triplets)
        .expect("element mass is symmetric")
}

/// Full-length diagonal `wᵢ / (k hᵢ)` on boundary vertices, zero elsewhere.
pub fn robin_diagonal(mesh: &Mesh2D, h: &ThicknessField, k: RobinConfig) -> Result<Vec<f64>> {
    let trace = mesh.trace();
    if h.values().len() != trace.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.len(),
            actual: h.values().len(),
        });
    }
    let mut d = vec![0.0; mesh.n_vertices()];
    for (slot, (&v, &w)) in trace.vertices().iter().zip(trace.weights()).enumerate() {
        let hv = h.values()[slot];
        if hv == 0.0 {
            return Err(Error::ZeroThickness { vertex: v });
        }
        d[v] = w / (k.k() * hv);
    }
    Ok(d)
}

/// Lumped boundary Robin matrix `(1/k) ∫ uφ/h`.
pub fn assemble_robin_boundary(
    mesh: &Mesh2D,
    h: &ThicknessField,
    k: RobinConfig,
) -> Result<SymmetricSparseMatrix> {
    Ok(SymmetricSparseMatrix::from_diagonal(&robin_diagonal(mesh, h, k)?))
}

/// Consistent load `∫ f φᵢ` with `f` interpolated in P1.
pub fn assemble_load(mesh: &Mesh2D, f: &ScalarField) -> Result<Vec<f64>> {
    if f.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            actual: f.len(),
        });
    }
    let fv = f.values();
    let mut b = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let sum: f64 = tri.iter().map(|&v| fv[v]).sum();
        for &v in &tri {
            b[v] += area * (sum + fv[v]) / 12.0;
        }
    }
    Ok(b)
}

/// Lumped `∫_{∂Ω} |u|`.
pub fn boundary_abs_integral(mesh: &Mesh2D, u: &ScalarField) -> f64 {
    boundary_abs_integral_of(mesh, u.values())
}

pub(crate) fn boundary_abs_integral_of(mesh: &Mesh2D, u: &[f64]) -> f64 {
    let trace = mesh.trace();
    trace
        .vertices()
        .iter()
        .zip(trace.weights())
        .map(|(&v, &w)| w * u[v].abs())
        .sum()
}

/// Stiffness and mass of one mesh, assembled once and shared by solvers.
#[derive(Debug, Clone)]
pub struct Operators {
    pub stiffness: SymmetricSparseMatrix,
    pub mass: SymmetricSparseMatrix,
}

impl Operators {
    pub fn new(mesh: &Mesh2D) -> Self {
        Self {
            stiffness: assemble_stiffness(mesh),
            mass: assemble_mass(mesh),
        }
    }
}
