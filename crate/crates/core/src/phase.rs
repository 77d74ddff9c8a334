//! Constrained phase-fraction system at fixed temperature.
//!
//! The pair chi = (beta2+, beta3+) solves a linear elliptic variational
//! inequality over the triangle K = {chi2 >= 0, chi3 >= 0, chi2 + chi3 <= 1}
//! imposed at every node. The operator couples the two components through the
//! variant matrix V (the Gram matrix [[2, 1], [1, 2]] of the three-fraction
//! description, or the identity for the reduced variant) acting on
//! c M + (upsilon + kappa) A; the thermal driving force
//! (l_a / T0)(T+ - T0) loads the austenite component only.
//!
//! Solver layout:
//! - a 2x2 mean-shift step solves the best uniform update exactly (it is the
//!   homogeneous problem itself, since the stiffness annihilates constants),
//! - a primal-dual active-set outer loop pins nodes to the edges and vertices
//!   of K and solves the remaining equality-constrained system by conjugate
//!   gradients under a two-level Jacobi preconditioner,
//! - exact nodal quadratic-program Gauss-Seidel sweeps break active-set
//!   cycles.
//!
//! Residuals are always evaluated in integrated (weak) units from a fresh
//! matrix-vector product with per-component means subtracted before the
//! stiffness, which keeps the achievable residual far below the nodal
//! rounding floor of the raw row sums.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_scalar_mass, assemble_scalar_stiffness, boundary_load_vector,
};
use crate::field::ScalarField;
use crate::linalg::{pcg, SolveReport};
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::MaterialParams;
pub use crate::params::PhaseVariant;
use crate::sparse::SparseMatrix;

/// Vertices of the feasible triangle K.
pub const K_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Default convergence tolerance of the phase solve.
pub const DEFAULT_VI_TOL: f64 = 1e-10;

/// Post-collision martensite and austenite fractions at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePair {
    pub chi2: ScalarField,
    pub chi3: ScalarField,
}

impl PhasePair {
    /// The first martensite fraction 1 - chi2 - chi3.
    pub fn beta1(&self) -> ScalarField {
        ScalarField::from_values(
            self.chi2
                .values
                .iter()
                .zip(&self.chi3.values)
                .map(|(a, b)| 1.0 - a - b)
                .collect(),
        )
    }

    /// Worst nodal violation of the triangle constraints (0 when feasible).
    pub fn feasibility_violation(&self) -> f64 {
        self.chi2
            .values
            .iter()
            .zip(&self.chi3.values)
            .map(|(&x, &y)| (-x).max(-y).max(x + y - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Constraint reaction densities (J/m^3 per unit fraction) at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionPair {
    pub xi2: ScalarField,
    pub xi3: ScalarField,
}

/// Extended outcome of a phase solve.
#[derive(Debug, Clone)]
pub struct PhaseSolveInfo {
    pub report: SolveReport,
    /// Largest magnitude of the assembled load vector (weak units).
    pub load_inf: f64,
    /// Final stationarity violation in weak units.
    pub kkt_weak: f64,
    /// Final worst nodal constraint violation.
    pub feasibility: f64,
}

/// Euclidean nearest point of the triangle K.
pub fn project_onto_k(p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    if x >= 0.0 && y >= 0.0 && x + y <= 1.0 {
        return p;
    }
    let cand = [
        [x.clamp(0.0, 1.0), 0.0],
        [0.0, y.clamp(0.0, 1.0)],
        {
            let t = ((x - y + 1.0) / 2.0).clamp(0.0, 1.0);
            [t, 1.0 - t]
        },
    ];
    let mut best = cand[0];
    let mut best_d = f64::INFINITY;
    for c in cand {
        let d = (c[0] - x) * (c[0] - x) + (c[1] - y) * (c[1] - y);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Nearest point of K in the metric induced by an SPD 2x2 matrix.
pub fn project_onto_k_in_metric(p: [f64; 2], metric: [[f64; 2]; 2]) -> [f64; 2] {
    let g = [
        -(metric[0][0] * p[0] + metric[0][1] * p[1]),
        -(metric[1][0] * p[0] + metric[1][1] * p[1]),
    ];
    qp2_triangle(metric, g, &K_VERTICES)
}

/// Minimizes 1/2 y' H y + g' y over a (possibly degenerate) triangle with an
/// SPD or positive semidefinite H: tries the unconstrained stationary point,
/// the three clamped edge minimizers, and the vertices.
pub(crate) fn qp2_triangle(h: [[f64; 2]; 2], g: [f64; 2], tri: &[[f64; 2]; 3]) -> [f64; 2] {
    let objective = |y: [f64; 2]| -> f64 {
        0.5 * (y[0] * (h[0][0] * y[0] + h[0][1] * y[1]) + y[1] * (h[1][0] * y[0] + h[1][1] * y[1]))
            + g[0] * y[0]
            + g[1] * y[1]
    };

    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if det > 0.0 {
        let y = [
            (-g[0] * h[1][1] + g[1] * h[0][1]) / det,
            (-g[1] * h[0][0] + g[0] * h[1][0]) / det,
        ];
        let d1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
        let d2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
        let area2 = d1[0] * d2[1] - d1[1] * d2[0];
        if area2.abs() > 0.0 {
            let r = [y[0] - tri[0][0], y[1] - tri[0][1]];
            let s = (r[0] * d2[1] - r[1] * d2[0]) / area2;
            let t = (d1[0] * r[1] - d1[1] * r[0]) / area2;
            let margin = 1e-14;
            if s >= -margin && t >= -margin && s + t <= 1.0 + margin {
                return y;
            }
        }
    }

    let mut best = tri[0];
    let mut best_j = objective(tri[0]);
    for v in &tri[1..] {
        let j = objective(*v);
        if j < best_j {
            best_j = j;
            best = *v;
        }
    }
    for e in 0..3 {
        let p = tri[e];
        let q = tri[(e + 1) % 3];
        let d = [q[0] - p[0], q[1] - p[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        if dd == 0.0 {
            continue;
        }
        let hd = [h[0][0] * d[0] + h[0][1] * d[1], h[1][0] * d[0] + h[1][1] * d[1]];
        let denom = d[0] * hd[0] + d[1] * hd[1];
        let hp = [h[0][0] * p[0] + h[0][1] * p[1], h[1][0] * p[0] + h[1][1] * p[1]];
        let slope = d[0] * (hp[0] + g[0]) + d[1] * (hp[1] + g[1]);
        let t = if denom > 0.0 {
            (-slope / denom).clamp(0.0, 1.0)
        } else if slope >= 0.0 {
            0.0
        } else {
            1.0
        };
        let y = [p[0] + t * d[0], p[1] + t * d[1]];
        let j = objective(y);
        if j < best_j {
            best_j = j;
            best = y;
        }
    }
    best
}

fn clip_to_k(v: [f64; 2]) -> [f64; 2] {
    let x = v[0].clamp(0.0, 1.0);
    let y = v[1].clamp(0.0, 1.0);
    if x + y > 1.0 {
        project_onto_k([x, y])
    } else {
        [x, y]
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Free2 { idx: usize },
    Line { idx: usize, o: [f64; 2], dir: [f64; 2] },
    Fixed { at: [f64; 2] },
}

struct PhaseSystem<'a> {
    mesh: &'a Mesh,
    mass: SparseMatrix,
    stiff: SparseMatrix,
    lumped: Vec<f64>,
    v: [[f64; 2]; 2],
    c: f64,
    upk: f64,
    b: [Vec<f64>; 2],
    b_inf: f64,
    mass_row_max: f64,
    stiff_row_max: f64,
}

impl<'a> PhaseSystem<'a> {
    /// c M v + (upsilon + kappa) A (v - mean(v)); subtracting the mean is
    /// exact because the stiffness annihilates constants, and it removes the
    /// cancellation noise of near-uniform fields.
    fn apply_strand(&self, v: &[f64]) -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let shifted: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let av = self.stiff.matvec(&shifted);
        let mv = self.mass.matvec(v);
        (0..v.len())
            .map(|i| self.c * mv[i] + self.upk * av[i])
            .collect()
    }

    fn apply_full(&self, x: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let q = [self.apply_strand(&x[0]), self.apply_strand(&x[1])];
        let n = x[0].len();
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for a in 0..2 {
            for i in 0..n {
                out[a][i] = self.v[a][0] * q[0][i] + self.v[a][1] * q[1][i];
            }
        }
        out
    }

    fn residual(&self, x: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let hx = self.apply_full(x);
        let n = x[0].len();
        let mut r = [vec![0.0; n], vec![0.0; n]];
        for a in 0..2 {
            for i in 0..n {
                r[a][i] = self.b[a][i] - hx[a][i];
            }
        }
        r
    }

    fn diag_scalar(&self, i: usize) -> f64 {
        let mut m = 0.0;
        let mut s = 0.0;
        for (col, v) in self.mass.row(i) {
            if col == i {
                m = v;
            }
        }
        for (col, v) in self.stiff.row(i) {
            if col == i {
                s = v;
            }
        }
        self.c * m + self.upk * s
    }

    /// Smallest weak-units residual representable for the current iterate;
    /// convergence demands no more than this from the arithmetic.
    fn representability_floor(&self, x: &[Vec<f64>; 2]) -> f64 {
        let mut chi_max = 0.0f64;
        let mut dev_max = 0.0f64;
        for strand in x {
            let mean = strand.iter().sum::<f64>() / strand.len() as f64;
            for v in strand {
                chi_max = chi_max.max(v.abs());
                dev_max = dev_max.max((v - mean).abs());
            }
        }
        64.0 * f64::EPSILON
            * (self.c * self.mass_row_max * chi_max.max(1.0)
                + self.upk * self.stiff_row_max * dev_max
                + self.b_inf)
    }

    /// Largest nodal stationarity violation in weak units: for the weak
    /// residual R_i, the negative part of R_i . (chi_i - p) over the three
    /// vertices p of K. Zero exactly at a solution of the inequality.
    fn kkt_violation(&self, x: &[Vec<f64>; 2], r: &[Vec<f64>; 2]) -> f64 {
        let n = x[0].len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let chi = [x[0][i], x[1][i]];
            let res = [r[0][i], r[1][i]];
            for p in K_VERTICES {
                let along = res[0] * (chi[0] - p[0]) + res[1] * (chi[1] - p[1]);
                worst = worst.max(-along);
            }
        }
        worst
    }

    fn feasibility(&self, x: &[Vec<f64>; 2]) -> f64 {
        let n = x[0].len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let (c2, c3) = (x[0][i], x[1][i]);
            worst = worst.max((-c2).max(-c3).max(c2 + c3 - 1.0).max(0.0));
        }
        worst
    }

    /// Best uniform feasible update: the homogeneous problem in the shift,
    /// whose Hessian is exactly c |domain| V because the stiffness
    /// annihilates constants. Solves uniform-data cases in one step.
    fn mean_shift(&self, x: &mut [Vec<f64>; 2], r: &[Vec<f64>; 2]) {
        let n = x[0].len();
        let mut min2 = f64::INFINITY;
        let mut min3 = f64::INFINITY;
        let mut max_sum = f64::NEG_INFINITY;
        for i in 0..n {
            min2 = min2.min(x[0][i]);
            min3 = min3.min(x[1][i]);
            max_sum = max_sum.max(x[0][i] + x[1][i]);
        }
        let a = -min2;
        let b = -min3;
        let d = 1.0 - max_sum;
        let tri = [[a, b], [d - b, b], [a, d - a]];

        let volume: f64 = (0..self.mesh.triangle_count())
            .map(|t| self.mesh.triangle_area(t))
            .sum();
        let h = [
            [self.c * volume * self.v[0][0], self.c * volume * self.v[0][1]],
            [self.c * volume * self.v[1][0], self.c * volume * self.v[1][1]],
        ];
        let g = [
            -r[0].iter().sum::<f64>(),
            -r[1].iter().sum::<f64>(),
        ];
        let delta = qp2_triangle(h, g, &tri);
        for i in 0..n {
            let shifted = clip_to_k([x[0][i] + delta[0], x[1][i] + delta[1]]);
            x[0][i] = shifted[0];
            x[1][i] = shifted[1];
        }
    }

    /// One ascending sweep of exact nodal quadratic programs over K.
    fn gs_sweep(&self, x: &mut [Vec<f64>; 2]) {
        let n = x[0].len();
        for i in 0..n {
            let mut q = [0.0; 2];
            for b_idx in 0..2 {
                let mut m_dot = 0.0;
                for (col, v) in self.mass.row(i) {
                    m_dot += v * x[b_idx][col];
                }
                let mut a_dot = 0.0;
                for (col, v) in self.stiff.row(i) {
                    a_dot += v * x[b_idx][col];
                }
                q[b_idx] = self.c * m_dot + self.upk * a_dot;
            }
            let s_ii = self.diag_scalar(i);
            let xi = [x[0][i], x[1][i]];
            let h = [
                [s_ii * self.v[0][0], s_ii * self.v[0][1]],
                [s_ii * self.v[1][0], s_ii * self.v[1][1]],
            ];
            let mut g = [0.0; 2];
            for a in 0..2 {
                let row_full = self.v[a][0] * q[0] + self.v[a][1] * q[1];
                let diag_part = s_ii * (self.v[a][0] * xi[0] + self.v[a][1] * xi[1]);
                g[a] = row_full - diag_part - self.b[a][i];
            }
            let v_new = clip_to_k(qp2_triangle(h, g, &K_VERTICES));
            x[0][i] = v_new[0];
            x[1][i] = v_new[1];
        }
    }

    /// Per-node active constraints for the next equality-constrained solve,
    /// from the primal-dual test mu_j + gamma g_j > 0 with multipliers
    /// decomposed out of the weak residual.
    fn active_signature(&self, x: &[Vec<f64>; 2], r: &[Vec<f64>; 2]) -> Vec<u8> {
        let near = 1e-9;
        let n = x[0].len();
        let mut sig = Vec::with_capacity(n);
        for i in 0..n {
            let (c2, c3) = (x[0][i], x[1][i]);
            let g = [-c2, -c3, c2 + c3 - 1.0];
            let cur = [g[0] >= -near, g[1] >= -near, g[2] >= -near];
            let m = self.lumped[i];
            let xi = [r[0][i] / m, r[1][i] / m];

            let mut mu = [0.0f64; 3];
            match (cur[0], cur[1], cur[2]) {
                (false, false, false) => {}
                (true, false, false) => mu[0] = -xi[0],
                (false, true, false) => mu[1] = -xi[1],
                (false, false, true) => mu[2] = 0.5 * (xi[0] + xi[1]),
                (true, true, _) => {
                    mu[0] = -xi[0];
                    mu[1] = -xi[1];
                }
                (true, false, true) => {
                    mu[2] = xi[1];
                    mu[0] = xi[1] - xi[0];
                }
                (false, true, true) => {
                    mu[2] = xi[0];
                    mu[1] = xi[0] - xi[1];
                }
            }

            let gamma = 3.0 * self.diag_scalar(i) / m;
            let mut active = [false; 3];
            let mut score = [0.0f64; 3];
            for j in 0..3 {
                score[j] = mu[j] + gamma * g[j];
                active[j] = score[j] > 0.0;
            }
            if active[0] && active[1] && active[2] {
                let weakest = (0..3).min_by(|&a, &b| score[a].total_cmp(&score[b])).unwrap();
                active[weakest] = false;
            }
            sig.push(active[0] as u8 | (active[1] as u8) << 1 | (active[2] as u8) << 2);
        }
        sig
    }

    fn kinds_from_signature(&self, sig: &[u8]) -> (Vec<NodeKind>, usize) {
        let mut kinds = Vec::with_capacity(sig.len());
        let mut next = 0usize;
        for &s in sig {
            let kind = match s {
                0 => {
                    let k = NodeKind::Free2 { idx: next };
                    next += 2;
                    k
                }
                0b001 => {
                    let k = NodeKind::Line {
                        idx: next,
                        o: [0.0, 0.0],
                        dir: [0.0, 1.0],
                    };
                    next += 1;
                    k
                }
                0b010 => {
                    let k = NodeKind::Line {
                        idx: next,
                        o: [0.0, 0.0],
                        dir: [1.0, 0.0],
                    };
                    next += 1;
                    k
                }
                0b100 => {
                    let k = NodeKind::Line {
                        idx: next,
                        o: [0.0, 1.0],
                        dir: [1.0, -1.0],
                    };
                    next += 1;
                    k
                }
                0b011 => NodeKind::Fixed { at: [0.0, 0.0] },
                0b101 => NodeKind::Fixed { at: [0.0, 1.0] },
                0b110 => NodeKind::Fixed { at: [1.0, 0.0] },
                _ => unreachable!("all three constraints cannot be active together"),
            };
            kinds.push(kind);
        }
        (kinds, next)
    }

    fn expand(&self, kinds: &[NodeKind], y: &[f64]) -> [Vec<f64>; 2] {
        let n = kinds.len();
        let mut x = [vec![0.0; n], vec![0.0; n]];
        for (i, k) in kinds.iter().enumerate() {
            match *k {
                NodeKind::Free2 { idx } => {
                    x[0][i] = y[idx];
                    x[1][i] = y[idx + 1];
                }
                NodeKind::Line { idx, dir, .. } => {
                    x[0][i] = y[idx] * dir[0];
                    x[1][i] = y[idx] * dir[1];
                }
                NodeKind::Fixed { .. } => {}
            }
        }
        x
    }

    fn contract(&self, kinds: &[NodeKind], n_red: usize, r: &[Vec<f64>; 2]) -> Vec<f64> {
        let mut y = vec![0.0; n_red];
        for (i, k) in kinds.iter().enumerate() {
            match *k {
                NodeKind::Free2 { idx } => {
                    y[idx] = r[0][i];
                    y[idx + 1] = r[1][i];
                }
                NodeKind::Line { idx, dir, .. } => {
                    y[idx] = dir[0] * r[0][i] + dir[1] * r[1][i];
                }
                NodeKind::Fixed { .. } => {}
            }
        }
        y
    }

    /// Equality-constrained solve on the current active set by conjugate
    /// gradients, preconditioned by Jacobi plus an exact coarse solve in the
    /// span of the componentwise-constant fields, which carry the near-kernel
    /// of the stiffness-dominated operator.
    fn pdas_solve(
        &self,
        sig: &[u8],
        x: &mut [Vec<f64>; 2],
        lin_tol: f64,
    ) -> Result<()> {
        let (kinds, n_red) = self.kinds_from_signature(sig);
        if n_red == 0 {
            for (i, k) in kinds.iter().enumerate() {
                if let NodeKind::Fixed { at } = k {
                    x[0][i] = at[0];
                    x[1][i] = at[1];
                }
            }
            return Ok(());
        }

        let n = kinds.len();
        let mut offset = [vec![0.0; n], vec![0.0; n]];
        for (i, k) in kinds.iter().enumerate() {
            match *k {
                NodeKind::Line { o, .. } => {
                    offset[0][i] = o[0];
                    offset[1][i] = o[1];
                }
                NodeKind::Fixed { at } => {
                    offset[0][i] = at[0];
                    offset[1][i] = at[1];
                }
                NodeKind::Free2 { .. } => {}
            }
        }
        let h_offset = self.apply_full(&offset);
        let mut rhs_full = [vec![0.0; n], vec![0.0; n]];
        for a in 0..2 {
            for i in 0..n {
                rhs_full[a][i] = self.b[a][i] - h_offset[a][i];
            }
        }
        let rhs = self.contract(&kinds, n_red, &rhs_full);

        let apply = |y: &[f64]| -> Vec<f64> {
            let full = self.expand(&kinds, y);
            let hy = self.apply_full(&full);
            self.contract(&kinds, n_red, &hy)
        };

        let mut diag = vec![0.0; n_red];
        for (i, k) in kinds.iter().enumerate() {
            let s_ii = self.diag_scalar(i);
            match *k {
                NodeKind::Free2 { idx } => {
                    diag[idx] = s_ii * self.v[0][0];
                    diag[idx + 1] = s_ii * self.v[1][1];
                }
                NodeKind::Line { idx, dir, .. } => {
                    let vd = [
                        self.v[0][0] * dir[0] + self.v[0][1] * dir[1],
                        self.v[1][0] * dir[0] + self.v[1][1] * dir[1],
                    ];
                    diag[idx] = s_ii * (dir[0] * vd[0] + dir[1] * vd[1]);
                }
                NodeKind::Fixed { .. } => {}
            }
        }

        let w = [
            self.contract(&kinds, n_red, &[vec![1.0; n], vec![0.0; n]]),
            self.contract(&kinds, n_red, &[vec![0.0; n], vec![1.0; n]]),
        ];
        let hw = [apply(&w[0]), apply(&w[1])];
        let g = [
            [
                w[0].iter().zip(&hw[0]).map(|(a, b)| a * b).sum::<f64>(),
                w[0].iter().zip(&hw[1]).map(|(a, b)| a * b).sum::<f64>(),
            ],
            [
                w[1].iter().zip(&hw[0]).map(|(a, b)| a * b).sum::<f64>(),
                w[1].iter().zip(&hw[1]).map(|(a, b)| a * b).sum::<f64>(),
            ],
        ];
        let g_scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let coarse = g_scale > 0.0 && det > 1e-10 * g_scale * g_scale;
        let g_solve = move |rhs2: [f64; 2]| -> [f64; 2] {
            [
                (rhs2[0] * g[1][1] - rhs2[1] * g[0][1]) / det,
                (rhs2[1] * g[0][0] - rhs2[0] * g[1][0]) / det,
            ]
        };

        let mut start = {
            let shifted = [
                (0..n).map(|i| x[0][i] - offset[0][i]).collect::<Vec<_>>(),
                (0..n).map(|i| x[1][i] - offset[1][i]).collect::<Vec<_>>(),
            ];
            self.contract(&kinds, n_red, &shifted)
        };
        if coarse {
            let h_start = apply(&start);
            let wr = [
                w[0].iter()
                    .zip(rhs.iter().zip(&h_start))
                    .map(|(wi, (bi, hi))| wi * (bi - hi))
                    .sum::<f64>(),
                w[1].iter()
                    .zip(rhs.iter().zip(&h_start))
                    .map(|(wi, (bi, hi))| wi * (bi - hi))
                    .sum::<f64>(),
            ];
            let coef = g_solve(wr);
            for i in 0..n_red {
                start[i] += coef[0] * w[0][i] + coef[1] * w[1][i];
            }
        }

        let mut chi_max = 1.0f64;
        let mut dev_max = 0.0f64;
        for strand in x.iter() {
            let mean = strand.iter().sum::<f64>() / strand.len() as f64;
            for v in strand {
                chi_max = chi_max.max(v.abs());
                dev_max = dev_max.max((v - mean).abs());
            }
        }
        let abs_floor = 2.0
            * f64::EPSILON
            * (self.c * self.mass_row_max * chi_max
                + self.upk * self.stiff_row_max * dev_max
                + self.b_inf)
            * (n_red as f64).sqrt();

        let precond = |r: &[f64]| -> Vec<f64> {
            let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
            if coarse {
                let wr = [
                    w[0].iter().zip(r).map(|(a, b)| a * b).sum::<f64>(),
                    w[1].iter().zip(r).map(|(a, b)| a * b).sum::<f64>(),
                ];
                let coef = g_solve(wr);
                for i in 0..n_red {
                    z[i] += coef[0] * w[0][i] + coef[1] * w[1][i];
                }
            }
            z
        };

        let max_iter = 10 * n_red.max(100);
        let (y, _) = pcg(&apply, &precond, &rhs, Some(&start), lin_tol, abs_floor, max_iter)?;

        let delta = self.expand(&kinds, &y);
        for i in 0..n {
            x[0][i] = offset[0][i] + delta[0][i];
            x[1][i] = offset[1][i] + delta[1][i];
        }
        Ok(())
    }
}

fn hash_signature(sig: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    sig.hash(&mut h);
    h.finish()
}

fn validate_phase_inputs(
    mesh: &Mesh,
    t_plus: &ScalarField,
    beta_minus: [&ScalarField; 3],
    params: &MaterialParams,
) -> Result<usize> {
    let n = mesh.node_count();
    if t_plus.len() != n {
        return Err(Error::invalid(format!(
            "temperature field has {} nodes, mesh has {n}",
            t_plus.len()
        )));
    }
    for (idx, f) in beta_minus.iter().enumerate() {
        if f.len() != n {
            return Err(Error::invalid(format!(
                "starting fraction {} has {} nodes, mesh has {n}",
                idx + 1,
                f.len()
            )));
        }
    }
    params.validate()?;
    if !(params.c > 0.0) {
        return Err(Error::invalid(format!(
            "phase solve needs a positive phase viscosity, got c = {}",
            params.c
        )));
    }
    for i in 0..n {
        let b1 = beta_minus[0].values[i];
        let b2 = beta_minus[1].values[i];
        let b3 = beta_minus[2].values[i];
        let feas = (-b2).max(-b3).max(b2 + b3 - 1.0);
        if feas > 1e-12 || (b1 + b2 + b3 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "starting fractions ({b1}, {b2}, {b3}) at node {i} violate the constraints"
            )));
        }
    }
    Ok(n)
}

fn build_system<'a>(
    mesh: &'a Mesh,
    t_plus: &ScalarField,
    beta_minus: [&ScalarField; 3],
    params: &MaterialParams,
    variant: PhaseVariant,
    h_flux: Option<[f64; 2]>,
) -> Result<PhaseSystem<'a>> {
    let n = mesh.node_count();
    let v = match variant {
        PhaseVariant::UniformDissipation => [[2.0, 1.0], [1.0, 2.0]],
        PhaseVariant::ReducedDissipation => [[1.0, 0.0], [0.0, 1.0]],
    };
    let mass = assemble_scalar_mass(mesh, false)?;
    let stiff = assemble_scalar_stiffness(mesh)?;
    let lumped = assemble_scalar_mass(mesh, true)?.diagonal();
    let c = params.c;
    let upk = params.upsilon + params.kappa;

    let chi_minus = [&beta_minus[1].values, &beta_minus[2].values];
    let mut b = [vec![0.0; n], vec![0.0; n]];
    {
        let mut q = [vec![0.0; n], vec![0.0; n]];
        for (strand, out) in chi_minus.iter().zip(q.iter_mut()) {
            let mean = strand.iter().sum::<f64>() / n as f64;
            let shifted: Vec<f64> = strand.iter().map(|x| x - mean).collect();
            let av = stiff.matvec(&shifted);
            let mv = mass.matvec(strand);
            for i in 0..n {
                out[i] = c * mv[i] + params.upsilon * av[i];
            }
        }
        for a in 0..2 {
            for i in 0..n {
                b[a][i] = v[a][0] * q[0][i] + v[a][1] * q[1][i];
            }
        }
        let s: Vec<f64> = t_plus
            .values
            .iter()
            .map(|t| params.latent_heat / params.t0 * (t - params.t0))
            .collect();
        let ms = mass.matvec(&s);
        for i in 0..n {
            b[1][i] += ms[i];
        }
        if let Some(h) = h_flux {
            let bg = boundary_load_vector(
                mesh,
                &[BoundaryTag::Gamma0, BoundaryTag::Gamma1, BoundaryTag::GammaFree],
            );
            for a in 0..2 {
                let coef = upk * (v[a][0] * h[0] + v[a][1] * h[1]);
                for i in 0..n {
                    b[a][i] += coef * bg[i];
                }
            }
        }
    }
    let b_inf = b.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));

    Ok(PhaseSystem {
        mesh,
        mass_row_max: mass.max_row_abs_sum(),
        stiff_row_max: stiff.max_row_abs_sum(),
        mass,
        stiff,
        lumped,
        v,
        c,
        upk,
        b,
        b_inf,
    })
}

fn finalize(
    system: &PhaseSystem,
    x: [Vec<f64>; 2],
    iterations: usize,
    converged: bool,
) -> (PhasePair, ReactionPair, PhaseSolveInfo) {
    let n = x[0].len();
    let r = system.residual(&x);
    let final_kkt = system.kkt_violation(&x, &r);
    let feasibility = system.feasibility(&x);
    let xi2: Vec<f64> = (0..n).map(|i| r[0][i] / system.lumped[i]).collect();
    let xi3: Vec<f64> = (0..n).map(|i| r[1][i] / system.lumped[i]).collect();

    let pair = PhasePair {
        chi2: ScalarField::from_values(x[0].clone()),
        chi3: ScalarField::from_values(x[1].clone()),
    };
    let reactions = ReactionPair {
        xi2: ScalarField::from_values(xi2),
        xi3: ScalarField::from_values(xi3),
    };
    let info = PhaseSolveInfo {
        report: SolveReport {
            iterations,
            residual: final_kkt / (1.0 + system.b_inf),
            converged,
        },
        load_inf: system.b_inf,
        kkt_weak: final_kkt,
        feasibility,
    };
    (pair, reactions, info)
}

/// Reaction densities and stationarity data of a given iterate at a given
/// temperature, without solving anything.
pub fn evaluate_phase_state(
    mesh: &Mesh,
    t_plus: &ScalarField,
    beta_minus: [&ScalarField; 3],
    chi: &PhasePair,
    params: &MaterialParams,
    variant: PhaseVariant,
    h_flux: Option<[f64; 2]>,
) -> Result<(ReactionPair, PhaseSolveInfo)> {
    let n = validate_phase_inputs(mesh, t_plus, beta_minus, params)?;
    if chi.chi2.len() != n || chi.chi3.len() != n {
        return Err(Error::invalid(format!(
            "iterate has ({}, {}) nodes, mesh has {n}",
            chi.chi2.len(),
            chi.chi3.len()
        )));
    }
    let system = build_system(mesh, t_plus, beta_minus, params, variant, h_flux)?;
    let x = [chi.chi2.values.clone(), chi.chi3.values.clone()];
    let (_, reactions, info) = finalize(&system, x, 0, true);
    Ok((reactions, info))
}

/// Solves the nodal variational inequality for (beta2+, beta3+).
///
/// Returns the fractions, the reaction densities xi = (b - H chi) / lumped
/// mass, and a report whose residual is the weak stationarity violation
/// normalized by 1 + the load maximum.
pub fn solve_phase_vi(
    mesh: &Mesh,
    t_plus: &ScalarField,
    beta_minus: [&ScalarField; 3],
    params: &MaterialParams,
    variant: PhaseVariant,
    tol: f64,
    max_iter: usize,
) -> Result<(PhasePair, ReactionPair, SolveReport)> {
    let (pair, reactions, info) = solve_phase_vi_with(
        mesh, t_plus, beta_minus, params, variant, tol, max_iter, None, None, 1e-11,
    )?;
    Ok((pair, reactions, info.report))
}

/// As `solve_phase_vi` with optional constant boundary flux data per
/// component, a warm-start iterate, and an inner linear tolerance.
/// `max_iter` 0 selects the default outer allowance.
#[allow(clippy::too_many_arguments)]
pub fn solve_phase_vi_with(
    mesh: &Mesh,
    t_plus: &ScalarField,
    beta_minus: [&ScalarField; 3],
    params: &MaterialParams,
    variant: PhaseVariant,
    tol: f64,
    max_iter: usize,
    h_flux: Option<[f64; 2]>,
    warm: Option<&PhasePair>,
    lin_tol: f64,
) -> Result<(PhasePair, ReactionPair, PhaseSolveInfo)> {
    let n = validate_phase_inputs(mesh, t_plus, beta_minus, params)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let chi_minus = [&beta_minus[1].values, &beta_minus[2].values];
    let system = build_system(mesh, t_plus, beta_minus, params, variant, h_flux)?;

    let mut x: [Vec<f64>; 2] = match warm {
        Some(pair) => [pair.chi2.values.clone(), pair.chi3.values.clone()],
        None => [chi_minus[0].clone(), chi_minus[1].clone()],
    };
    for i in 0..n {
        let clipped = clip_to_k([x[0][i], x[1][i]]);
        x[0][i] = clipped[0];
        x[1][i] = clipped[1];
    }

    let outer_cap = if max_iter == 0 {
        (200.0 * (n as f64).sqrt()).ceil() as usize
    } else {
        max_iter
    };

    let mut seen: HashSet<u64> = HashSet::new();
    let mut j_prev = f64::INFINITY;
    let mut converged = false;
    let mut iter = 0usize;
    loop {
        iter += 1;
        let r = system.residual(&x);
        let kkt = system.kkt_violation(&x, &r);
        let threshold = (tol * (1.0 + system.b_inf)).max(system.representability_floor(&x));
        if kkt <= threshold && system.feasibility(&x) <= 1e-13 {
            converged = true;
            break;
        }
        if iter > outer_cap {
            break;
        }
        if iter == 1 {
            system.mean_shift(&mut x, &r);
            continue;
        }

        let j_now = {
            let mut acc = 0.0;
            for a in 0..2 {
                for i in 0..n {
                    acc += -0.5 * x[a][i] * r[a][i] - 0.5 * system.b[a][i] * x[a][i];
                }
            }
            acc
        };
        let sig = system.active_signature(&x, &r);
        let key = hash_signature(&sig);
        let j_tol = 1e-12 * (1.0 + j_now.abs());
        if seen.contains(&key) || j_now > j_prev + j_tol {
            system.gs_sweep(&mut x);
        } else {
            seen.insert(key);
            system.pdas_solve(&sig, &mut x, lin_tol)?;
        }
        j_prev = j_now;
    }

    if !converged {
        for i in 0..n {
            let clipped = clip_to_k([x[0][i], x[1][i]]);
            x[0][i] = clipped[0];
            x[1][i] = clipped[1];
        }
    }

    Ok(finalize(&system, x, iter, converged))
}
