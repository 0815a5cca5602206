//! Symmetric sparse matrices, Jacobi-preconditioned conjugate gradients and
//! a deflated shift-and-invert subspace iteration for the smallest
//! generalized eigenpair.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Rows per rayon task in matrix-vector products.
const PAR_CHUNK: usize = 2048;

/// Multiple of `ε‖A‖‖x‖` below which a CG residual counts as converged.
const ROUNDING_SLACK: f64 = 100.0;

/// Seed of the default power-iteration start vector.
pub const DEFAULT_EIG_SEED: u64 = 0x1A5E_ED01;

/// Symmetric matrix in compressed-row storage with both triangles stored.
/// Every row stores its diagonal entry, even when it is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricSparseMatrix {
    /// Sums duplicate triplets. Fails if the result is not symmetric to
    /// 1e-14 relative.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            row.push((i, 0.0));
        }
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(invalid(format!("triplet ({i}, {j}) outside {n}x{n} matrix")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let a = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        if !a.is_symmetric(1e-14) {
            return Err(invalid("assembled matrix is not symmetric"));
        }
        Ok(a)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| {
            self.row(i)
                .all(|(j, v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }

    /// `y = A x`. Rows are independent, so the parallel product is
    /// bit-identical to the sequential one.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row = |i: usize| -> f64 {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            s
        };
        if self.n >= 2 * PAR_CHUNK {
            y.par_chunks_mut(PAR_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let base = c * PAR_CHUNK;
                    for (o, yi) in chunk.iter_mut().enumerate() {
                        *yi = row(base + o);
                    }
                });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    /// Copy with `d` added to the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: d.len(),
            });
        }
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            let r = out.row_ptr[i]..out.row_ptr[i + 1];
            let k = out.col_idx[r.clone()]
                .binary_search(&i)
                .expect("diagonal is always stored");
            out.values[r.start + k] += di;
        }
        Ok(out)
    }

    /// `alpha * self + beta * other` on the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for i in 0..self.n {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ja, va)), Some((jb, vb))) => {
                        if ja == jb {
                            col_idx.push(ja);
                            values.push(alpha * va + beta * vb);
                            a.next();
                            b.next();
                        } else if ja < jb {
                            col_idx.push(ja);
                            values.push(alpha * va);
                            a.next();
                        } else {
                            col_idx.push(jb);
                            values.push(beta * vb);
                            b.next();
                        }
                    }
                    (Some((ja, va)), None) => {
                        col_idx.push(ja);
                        values.push(alpha * va);
                        a.next();
                    }
                    (None, Some((jb, vb))) => {
                        col_idx.push(jb);
                        values.push(beta * vb);
                        b.next();
                    }
                    (None, None) => break,
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Principal submatrix on the given (sorted, distinct) indices.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &i in keep {
            for (j, v) in self.row(i) {
                if new_index[j] != usize::MAX {
                    col_idx.push(new_index[j]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Sequential dot product (fixed summation order).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual `‖Ax − b‖ / ‖b‖`.
    pub residual: f64,
    /// Relative (recursive) residual after every iteration.
    pub history: Vec<f64>,
}

/// Solves `A x = b` for SPD `A` with Jacobi-preconditioned CG from `x = 0`.
pub fn cg_solve(
    a: &SymmetricSparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    cg_solve_from(a, b, None, tol, max_iter)
}

/// As [`cg_solve`], optionally warm-started from `x0`.
pub fn cg_solve_from(
    a: &SymmetricSparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("CG tolerance must be positive, got {tol}")));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
        });
    }
    let a_norm = a.norm_inf();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x0.len(),
            })
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.mul(&x);
        axpy(-1.0, &ax, &mut r);
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut ap = vec![0.0; n];

    // Outer loop restarts from the true residual whenever the recursive
    // residual claims convergence but the true one disagrees.
    loop {
        let mut rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(CgSolution {
                x,
                iterations,
                residual: rel,
                history,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.mul_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NotConverged {
                    context: "conjugate gradients (matrix not positive definite)",
                    iterations,
                    residual: rel,
                    history,
                });
            }
            let alpha = rz / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            iterations += 1;
            rel = norm(&r) / bnorm;
            history.push(rel);
            if rel <= tol {
                break;
            }
            for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
                *zi = ri * di;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        let ax = a.mul(&x);
        r = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let true_rel = norm(&r) / bnorm;
        // Below `ε‖A‖‖x‖` the residual is rounding noise; nearly singular
        // systems (Neumann limits) stagnate there.
        let noise = ROUNDING_SLACK * f64::EPSILON * a_norm * norm(&x) / bnorm;
        if true_rel <= tol.max(noise) {
            return Ok(CgSolution {
                x,
                iterations,
                residual: true_rel,
                history,
            });
        }
        if iterations >= max_iter || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotConverged {
                context: "conjugate gradients",
                iterations,
                residual: true_rel,
                history,
            });
        }
    }
}

/// Options for [`eig_smallest_with`].
#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Relative eigen-residual target `‖Av − λMv‖ ≤ tol ‖Av‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub cg_max_iter: usize,
    /// Columns of the subspace iteration. Extra columns separate the wanted
    /// eigenvalue from close neighbours; one suffices for a good start.
    pub block: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            seed: DEFAULT_EIG_SEED,
            cg_max_iter: 20_000,
            block: 3,
        }
    }
}

impl EigOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized so that `vᵀ M v = 1`.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Smallest eigenpair of `A v = λ M v` on the `M`-orthogonal complement of
/// `deflation`, from a seeded random start.
pub fn eig_smallest(
    a: &SymmetricSparseMatrix,
    m: &SymmetricSparseMatrix,
    deflation: &[Vec<f64>],
    tol: f64,
) -> Result<EigenPair> {
    eig_smallest_with(a, m, deflation, &EigOptions::with_tol(tol), None)
}

/// `M`-orthonormal basis of `vectors` (modified Gram-Schmidt, two passes).
pub fn m_orthonormalize(m: &SymmetricSparseMatrix, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                actual: v.len(),
            });
        }
        let original = m.quadratic_form(v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            project_out(m, &basis, &mut w);
        }
        let nrm = m.quadratic_form(&w).sqrt();
        if !(nrm > 1e-10 * original) {
            return Err(invalid("deflation vectors are linearly dependent"));
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        basis.push(w);
    }
    Ok(basis)
}

fn project_out(m: &SymmetricSparseMatrix, basis: &[Vec<f64>], w: &mut [f64]) {
    if basis.is_empty() {
        return;
    }
    let mw = m.mul(w);
    let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, &mw)).collect();
    for (q, c) in basis.iter().zip(coeffs) {
        axpy(-c, q, w);
    }
}

/// Shift-and-invert subspace iteration with CG inner solves and a
/// Rayleigh–Ritz step on a small block.
///
/// When `A` annihilates constants (pure Neumann) the inner operator is
/// `A + σM` with `σ = 1e-8 · trace(A) / dim`. Convergence needs both a
/// relative eigenvalue change below 1e-10 and the residual test on the
/// lowest Ritz pair. `start`, if given, seeds the first column.
pub fn eig_smallest_with(
    a: &SymmetricSparseMatrix,
    m: &SymmetricSparseMatrix,
    deflation: &[Vec<f64>],
    opts: &EigOptions,
    start: Option<&[f64]>,
) -> Result<EigenPair> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.dim(),
        });
    }
    if n == 0 {
        return Err(invalid("empty eigenproblem"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("eigen tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(s) = start {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.len(),
            });
        }
    }
    let basis = m_orthonormalize(m, deflation)?;
    if basis.len() >= n {
        return Err(invalid("deflation space fills the whole space"));
    }
    if opts.block == 0 {
        return Err(invalid("block size must be positive"));
    }
    let p = opts.block.min(n - basis.len());

    let sigma = if annihilates_constants(a) {
        1e-8 * a.trace() / n as f64
    } else {
        0.0
    };
    let shifted = if sigma > 0.0 {
        a.linear_combination(1.0, m, sigma)?
    } else {
        a.clone()
    };
    let a_scale = a.norm_inf();
    let inner_tol = (opts.tol * 1e-3).clamp(1e-13, 1e-8);

    // Stationarity on the deflated space only holds modulo span(M b).
    let m_basis: Vec<Vec<f64>> = basis.iter().map(|b| m.mul(b)).collect();
    let strip = |r: &mut Vec<f64>| {
        for (b, mb) in basis.iter().zip(&m_basis) {
            let c = dot(b, r);
            axpy(-c, mb, r);
        }
    };
    // Unless span(basis) is invariant under A, projecting A⁻¹Mx does not
    // invert the compressed operator; correct with the Schur complement of
    // the constraint, built from Z = A⁻¹MB.
    let invariant = basis.iter().all(|b| {
        let mut r = a.mul(b);
        let scale = norm(&r);
        strip(&mut r);
        norm(&r) <= 1e-12 * scale.max(a_scale * norm(b))
    });
    let schur = if invariant || basis.is_empty() {
        None
    } else {
        let z = m_basis
            .iter()
            .map(|mb| cg_solve(&shifted, mb, inner_tol, opts.cg_max_iter).map(|s| s.x))
            .collect::<Result<Vec<_>>>()?;
        let k = basis.len();
        let s = DMatrix::from_fn(k, k, |i, j| dot(&m_basis[i], &z[j]));
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| invalid("deflated operator is singular"))?;
        Some((z, s_inv))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(p);
    if let Some(s) = start {
        block.push(s.to_vec());
    }
    while block.len() < p {
        let lo = if block.is_empty() { 0.5 } else { -1.0 };
        block.push((0..n).map(|_| rng.gen_range(lo..1.5)).collect());
    }
    let mut x = orthonormal_block(m, &basis, block, &mut rng)?;
    let (mut theta, rotated) = rayleigh_ritz(a, m, x);
    x = rotated;

    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        // Each inverse solve starts from the exact answer for an eigenvector.
        let solved: Vec<Result<Vec<f64>>> = x
            .par_iter()
            .zip(&theta)
            .map(|(col, &t)| {
                let rhs = m.mul(col);
                let denom = t + sigma;
                let guess: Vec<f64> = if denom.abs() > 1e-300 {
                    col.iter().map(|v| v / denom).collect()
                } else {
                    col.clone()
                };
                let mut y = cg_solve_from(&shifted, &rhs, Some(&guess), inner_tol, opts.cg_max_iter)?.x;
                if let Some((z, s_inv)) = &schur {
                    let c: Vec<f64> = m_basis.iter().map(|mb| dot(mb, &y)).collect();
                    for (j, zj) in z.iter().enumerate() {
                        let coef: f64 = (0..c.len()).map(|i| s_inv[(j, i)] * c[i]).sum();
                        axpy(-coef, zj, &mut y);
                    }
                }
                Ok(y)
            })
            .collect();
        let y = solved.into_iter().collect::<Result<Vec<_>>>()?;
        let y = orthonormal_block(m, &basis, y, &mut rng).map_err(|_| Error::NotConverged {
            context: "subspace iteration (block collapsed)",
            iterations: it,
            residual: f64::NAN,
            history: history.clone(),
        })?;
        let (new_theta, rotated) = rayleigh_ritz(a, m, y);
        x = rotated;

        let v = &x[0];
        let av = a.mul(v);
        let mv = m.mul(v);
        let lambda = new_theta[0];
        let mut res: Vec<f64> = av.iter().zip(&mv).map(|(ai, mi)| ai - lambda * mi).collect();
        strip(&mut res);
        let res_norm = norm(&res);
        let av_norm = norm(&av);
        let floor = 1e-14 * a_scale * norm(v);
        let rel_res = res_norm / av_norm.max(floor).max(f64::MIN_POSITIVE);
        history.push(rel_res);
        let change = (lambda - theta[0]).abs();
        theta = new_theta;
        if change <= 1e-10 * lambda.abs() + 1e-15 * a_scale && res_norm <= opts.tol * av_norm + floor {
            let mut vector = x.swap_remove(0);
            let value = a.quadratic_form(&vector) / m.quadratic_form(&vector);
            if let Some(s) = start {
                // Keep the orientation of the caller's guess.
                if dot(s, &m.mul(&vector)) < 0.0 {
                    vector.iter_mut().for_each(|c| *c = -*c);
                }
            }
            return Ok(EigenPair {
                value,
                vector,
                iterations: it,
                residual: rel_res,
            });
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NotConverged {
        context: "subspace iteration",
        iterations: opts.max_iter,
        residual,
        history,
    })
}

/// M-orthonormalizes `block` against `basis` and itself; a column that
/// collapses is replaced by a fresh random one.
fn orthonormal_block(
    m: &SymmetricSparseMatrix,
    basis: &[Vec<f64>],
    block: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for col in block {
        let mut w = col;
        let mut accepted = false;
        for _attempt in 0..4 {
            let original = m.quadratic_form(&w).sqrt();
            for _ in 0..2 {
                project_out(m, basis, &mut w);
                project_out(m, &out, &mut w);
            }
            let nrm = m.quadratic_form(&w).sqrt();
            if nrm.is_finite() && nrm > 1e-10 * original && nrm > 0.0 {
                w.iter_mut().for_each(|x| *x /= nrm);
                accepted = true;
                break;
            }
            w = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
        if !accepted {
            return Err(invalid("could not complete an orthonormal block"));
        }
        out.push(w);
    }
    Ok(out)
}

/// Ritz values (ascending) and vectors of `A` on the span of an
/// M-orthonormal block.
fn rayleigh_ritz(
    a: &SymmetricSparseMatrix,
    m: &SymmetricSparseMatrix,
    x: Vec<Vec<f64>>,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = x.len();
    let ax: Vec<Vec<f64>> = x.iter().map(|c| a.mul(c)).collect();
    let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&x[i], &ax[j]) + dot(&x[j], &ax[i])));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = m.dim();
    let theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut v = vec![0.0; n];
            for (r, col) in x.iter().enumerate() {
                axpy(eig.eigenvectors[(r, c)], col, &mut v);
            }
            v
        })
        .collect();
    (theta, vectors)
}

fn annihilates_constants(a: &SymmetricSparseMatrix) -> bool {
    let ones = vec![1.0; a.dim()];
    let r = a.mul(&ones);
    let diag_max = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    diag_max > 0.0 && r.iter().all(|v| v.abs() <= 1e-10 * diag_max)
}
