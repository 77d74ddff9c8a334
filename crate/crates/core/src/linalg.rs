//! Iterative linear algebra shared by the solvers.
//!
//! - Preconditioned conjugate gradients over operator closures, so the same
//!   loop serves assembled CSR systems and matrix-free reduced operators.
//! - Convergence is declared on the true residual: when the recurrence claims
//!   convergence the residual is recomputed from scratch and iteration
//!   continues if the recurrence had drifted.
//! - Symmetric Dirichlet elimination that preserves positive definiteness.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual |b - A x| / |b| (2-norms).
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator given as a closure. `precond` applies an approximate inverse.
/// Converges when |b - A x| <= max(tol |b|, abs_tol); `abs_tol` is the
/// caller's rounding floor for operators whose matvec cannot be evaluated
/// more accurately than that. Fails on indefinite directions met while the
/// residual is still far above the threshold.
pub fn pcg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }
    let threshold = (tol * b_norm).max(abs_tol);

    let mut x = match x0 {
        Some(v) => {
            assert_eq!(v.len(), n, "warm start length {} does not match system size {n}", v.len());
            v.to_vec()
        }
        None => vec![0.0; n],
    };
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut r_norm = norm2(&r);

    let mut iterations = 0;
    while r_norm > threshold && iterations < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            if r_norm > 1e3 * threshold {
                return Err(Error::Numerical(format!(
                    "conjugate gradients met an indefinite direction, p'Ap = {pap} at iteration {iterations}"
                )));
            }
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        r_norm = norm2(&r);
        if r_norm <= threshold {
            let ax = apply(&x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            r_norm = norm2(&r);
            if r_norm <= threshold {
                break;
            }
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Ok((
        x,
        SolveReport {
            iterations,
            residual: r_norm / b_norm,
            converged: r_norm <= threshold,
        },
    ))
}

/// Jacobi-preconditioned CG on an assembled CSR matrix.
pub fn solve_spd(
    matrix: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let diag = matrix.diagonal();
    for (i, d) in diag.iter().enumerate() {
        if *d <= 0.0 {
            return Err(Error::Numerical(format!(
                "matrix diagonal entry {d} at row {i} is not positive"
            )));
        }
    }
    let apply = |x: &[f64]| matrix.matvec(x);
    let precond = |r: &[f64]| -> Vec<f64> { r.iter().zip(&diag).map(|(ri, di)| ri / di).collect() };
    pcg(&apply, &precond, b, None, tol, 0.0, max_iter)
}

pub const DEFAULT_LIN_TOL: f64 = 1e-10;

/// Default iteration allowance for a system of the given size.
pub fn default_max_iter(dim: usize) -> usize {
    10 * dim.max(100)
}

/// Eliminates the constrained DOFs symmetrically: constrained rows reduce to
/// their diagonal, couplings move to the right-hand side, and the constrained
/// right-hand side entries become diagonal * value.
pub fn apply_dirichlet(
    matrix: &SparseMatrix,
    b: &mut [f64],
    constraints: &[(usize, f64)],
) -> Result<SparseMatrix> {
    let n = matrix.dim;
    let mut fixed = vec![false; n];
    let mut value = vec![0.0; n];
    for &(i, v) in constraints {
        if i >= n {
            return Err(Error::invalid(format!(
                "dirichlet constraint index {i} outside system of size {n}"
            )));
        }
        fixed[i] = true;
        value[i] = v;
    }
    let diag = matrix.diagonal();

    let mut triplets = Vec::with_capacity(matrix.nnz());
    for row in 0..n {
        if fixed[row] {
            triplets.push((row, row, diag[row]));
            continue;
        }
        for (col, v) in matrix.row(row) {
            if fixed[col] {
                b[row] -= v * value[col];
            } else {
                triplets.push((row, col, v));
            }
        }
    }
    for &(i, _) in constraints {
        b[i] = diag[i] * value[i];
    }
    SparseMatrix::from_triplets(n, &triplets)
}
