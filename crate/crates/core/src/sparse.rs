//! Compressed sparse row matrices for the assembled finite-element systems.
//!
//! - Built from (row, col, value) triplets; duplicate entries are summed in
//!   column order within each row so repeated assembly is bitwise reproducible.
//! - Square matrices only; every system here (mass, stiffness, Robin boundary)
//!   is square and symmetric up to rounding.

use crate::error::{Error, Result};

/// Square CSR matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles a `dim` x `dim` matrix from triplets. Duplicates are summed;
    /// the sort is stable so entries for the same position add in insertion
    /// order. Sums with magnitude below 1e-300 are dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::invalid(format!(
                    "triplet index ({r}, {c}) outside {dim} x {dim} matrix"
                )));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));

        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut pos = 0;
        for row in 0..dim {
            while pos < order.len() && triplets[order[pos]].0 == row {
                let col = triplets[order[pos]].1;
                let mut sum = 0.0;
                while pos < order.len()
                    && triplets[order[pos]].0 == row
                    && triplets[order[pos]].1 == col
                {
                    sum += triplets[order[pos]].2;
                    pos += 1;
                }
                if sum.abs() >= 1e-300 {
                    col_indices.push(col);
                    values.push(sum);
                }
            }
            row_offsets[row + 1] = col_indices.len();
        }
        Ok(SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.dim,
            "matvec input length {} does not match matrix dim {}",
            x.len(),
            self.dim
        );
        let mut y = vec![0.0; self.dim];
        for row in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_offsets[row]..self.row_offsets[row + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[row] = acc;
        }
        y
    }

    /// Entries of row `row` as (col, value) pairs.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_offsets[row]..self.row_offsets[row + 1])
            .map(move |k| (self.col_indices[k], self.values[k]))
    }

    /// Diagonal entries (0 where absent).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for row in 0..self.dim {
            for (col, v) in self.row(row) {
                if col == row {
                    d[row] = v;
                }
            }
        }
        d
    }

    /// A scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// alpha * A + beta * B over the union sparsity pattern.
    pub fn linear_combination(alpha: f64, a: &SparseMatrix, beta: f64, b: &SparseMatrix) -> Result<SparseMatrix> {
        if a.dim != b.dim {
            return Err(Error::invalid(format!(
                "cannot combine matrices of dims {} and {}",
                a.dim, b.dim
            )));
        }
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        for row in 0..a.dim {
            for (col, v) in a.row(row) {
                triplets.push((row, col, alpha * v));
            }
            for (col, v) in b.row(row) {
                triplets.push((row, col, beta * v));
            }
        }
        SparseMatrix::from_triplets(a.dim, &triplets)
    }

    /// max |A_ij - A_ji| over all stored positions.
    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.dim {
            for (col, v) in self.row(row) {
                let mut vt = 0.0;
                for (c2, v2) in self.row(col) {
                    if c2 == row {
                        vt = v2;
                    }
                }
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    /// Largest row sum of absolute values; an upper bound on the operator
    /// infinity norm.
    pub fn max_row_abs_sum(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.dim {
            let s: f64 = self.row(row).map(|(_, v)| v.abs()).sum();
            worst = worst.max(s);
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for row in 0..self.dim {
            for (col, v) in self.row(row) {
                d[row][col] = v;
            }
        }
        d
    }
}
