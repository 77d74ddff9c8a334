//! Post-collision velocity and the dissipated work it produces.
//!
//! The velocity jump obeys a percussion balance: mass times the jump equals
//! the divergence of an impulsive viscous stress k_v D(U+ + U-), loaded by a
//! surface percussion on the struck part of the boundary and clamped on the
//! supported part. Discretely, (rho M + k_v A) U+ = L + (rho M - k_v A) U-
//! with A the symmetrized-gradient stiffness and L the traction load.
//!
//! - `solve_velocity` solves for U+ with U+ = 0 on the clamped boundary.
//! - `dissipated_work` evaluates 2 k_v |D((U+ + U-)/2)|^2 per triangle and
//!   projects it to nodes with lumped-mass weights.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_traction, assemble_elastic_stiffness, assemble_vector_mass,
    triangle_gradients,
};
use crate::field::{ScalarField, VectorField};
use crate::linalg::{apply_dirichlet, default_max_iter, solve_spd, SolveReport, DEFAULT_LIN_TOL};
use crate::mesh::{BoundaryTag, Mesh};

/// Surface percussion applied to one tagged boundary region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercussionLoad {
    /// Percussion magnitude (Pa s).
    pub magnitude: f64,
    /// Inclination from the horizontal (radians); the percussion direction is
    /// (cos angle, -sin angle), pressing into a top surface.
    pub angle: f64,
    pub region: BoundaryTag,
}

impl PercussionLoad {
    /// Percussion of the given magnitude and inclination on the loaded region.
    pub fn inclined(magnitude: f64, angle: f64) -> Self {
        PercussionLoad {
            magnitude,
            angle,
            region: BoundaryTag::Gamma1,
        }
    }

    /// Unit direction of the percussion.
    pub fn direction(&self) -> [f64; 2] {
        [self.angle.cos(), -self.angle.sin()]
    }
}

/// Dissipated work density of the collision (J/m^3): exact per-triangle
/// values plus their lumped-mass nodal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationField {
    pub per_triangle: Vec<f64>,
    pub nodal: ScalarField,
}

impl DissipationField {
    /// Spatially uniform dissipated work, as used in prescribed-work runs.
    pub fn uniform(mesh: &Mesh, value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::invalid(format!(
                "dissipated work {value} must be nonnegative"
            )));
        }
        Ok(DissipationField {
            per_triangle: vec![value; mesh.triangle_count()],
            nodal: ScalarField::constant(mesh.node_count(), value),
        })
    }

    /// Builds the field from per-triangle values, projecting to nodes with
    /// lumped-mass weights (area-weighted average of the adjacent triangles).
    pub fn from_triangle_values(mesh: &Mesh, per_triangle: Vec<f64>) -> Result<Self> {
        if per_triangle.len() != mesh.triangle_count() {
            return Err(Error::invalid(format!(
                "got {} triangle values for a mesh of {} triangles",
                per_triangle.len(),
                mesh.triangle_count()
            )));
        }
        for (t, v) in per_triangle.iter().enumerate() {
            if !(*v >= 0.0) {
                return Err(Error::invalid(format!(
                    "dissipated work {v} on triangle {t} must be nonnegative"
                )));
            }
        }
        let mut weighted = vec![0.0; mesh.node_count()];
        let mut weight = vec![0.0; mesh.node_count()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let third = mesh.triangle_area(t) / 3.0;
            for &n in tri {
                weighted[n] += per_triangle[t] * third;
                weight[n] += third;
            }
        }
        let nodal = ScalarField::from_values(
            weighted
                .iter()
                .zip(&weight)
                .map(|(w, m)| if *m > 0.0 { w / m } else { 0.0 })
                .collect(),
        );
        Ok(DissipationField {
            per_triangle,
            nodal,
        })
    }

    /// Load vector with entries equal to the integral of the dissipated work
    /// against each hat function, exact for per-triangle-constant values.
    pub fn load_vector(&self, mesh: &Mesh) -> Vec<f64> {
        let mut load = vec![0.0; mesh.node_count()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let contribution = self.per_triangle[t] * mesh.triangle_area(t) / 3.0;
            for &n in tri {
                load[n] += contribution;
            }
        }
        load
    }

    /// Integral of the dissipated work over the domain (J/m).
    pub fn total(&self, mesh: &Mesh) -> f64 {
        self.per_triangle
            .iter()
            .enumerate()
            .map(|(t, v)| v * mesh.triangle_area(t))
            .sum()
    }
}

/// Solves the percussion balance for the post-collision velocity with the
/// default linear tolerance.
pub fn solve_velocity(
    mesh: &Mesh,
    rho: f64,
    k_v: f64,
    load: &PercussionLoad,
    u_minus: &VectorField,
) -> Result<VectorField> {
    solve_velocity_with(mesh, rho, k_v, load, u_minus, DEFAULT_LIN_TOL, 0).map(|(u, _)| u)
}

/// As `solve_velocity`, returning the linear solve report; `max_iter` 0
/// selects the default allowance.
pub fn solve_velocity_with(
    mesh: &Mesh,
    rho: f64,
    k_v: f64,
    load: &PercussionLoad,
    u_minus: &VectorField,
    tol: f64,
    max_iter: usize,
) -> Result<(VectorField, SolveReport)> {
    if !(rho >= 0.0) || !(k_v > 0.0) {
        return Err(Error::invalid(format!(
            "need rho >= 0 and k_v > 0, got rho = {rho}, k_v = {k_v}"
        )));
    }
    if !(load.magnitude >= 0.0) {
        return Err(Error::invalid(format!(
            "percussion magnitude {} must be nonnegative",
            load.magnitude
        )));
    }
    if u_minus.node_count() != mesh.node_count() {
        return Err(Error::invalid(format!(
            "pre-collision velocity has {} nodes, mesh has {}",
            u_minus.node_count(),
            mesh.node_count()
        )));
    }
    let clamped = mesh.nodes_with_tag(BoundaryTag::Gamma0);
    if clamped.is_empty() && rho == 0.0 {
        return Err(Error::Numerical(
            "no clamped boundary and no mass: the velocity system is singular on rigid motions"
                .to_string(),
        ));
    }

    let mass = assemble_vector_mass(mesh, false)?;
    let stiffness = assemble_elastic_stiffness(mesh)?;
    let system = crate::sparse::SparseMatrix::linear_combination(rho, &mass, k_v, &stiffness)?;

    let mut b = assemble_boundary_traction(mesh, load.region, load.direction(), load.magnitude);
    if u_minus.max_abs() > 0.0 {
        let m_u = mass.matvec(&u_minus.values);
        let a_u = stiffness.matvec(&u_minus.values);
        for i in 0..b.len() {
            b[i] += rho * m_u[i] - k_v * a_u[i];
        }
    }

    let constraints: Vec<(usize, f64)> = clamped
        .iter()
        .flat_map(|&n| [(2 * n, 0.0), (2 * n + 1, 0.0)])
        .collect();
    let reduced = apply_dirichlet(&system, &mut b, &constraints)?;

    let iters = if max_iter == 0 {
        default_max_iter(reduced.dim)
    } else {
        max_iter
    };
    let (x, report) = solve_spd(&reduced, &b, tol, iters)?;
    if !report.converged {
        return Err(Error::Numerical(format!(
            "velocity solve stalled at relative residual {} after {} iterations",
            report.residual, report.iterations
        )));
    }
    Ok((VectorField::from_interleaved(x), report))
}

/// Dissipated work density 2 k_v |D((U+ + U-)/2)|^2, exact per triangle for
/// P1 velocities.
pub fn dissipated_work(
    mesh: &Mesh,
    u_plus: &VectorField,
    u_minus: &VectorField,
    k_v: f64,
) -> Result<DissipationField> {
    if u_plus.node_count() != mesh.node_count() || u_minus.node_count() != mesh.node_count() {
        return Err(Error::invalid(format!(
            "velocity fields with {} and {} nodes do not match mesh with {}",
            u_plus.node_count(),
            u_minus.node_count(),
            mesh.node_count()
        )));
    }
    let mut per_triangle = Vec::with_capacity(mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let (g, _) = triangle_gradients(mesh, t);
        let tri = mesh.triangles[t];
        let mut dwx = [0.0; 2];
        let mut dwy = [0.0; 2];
        for a in 0..3 {
            let up = u_plus.node(tri[a]);
            let um = u_minus.node(tri[a]);
            let w = [0.5 * (up[0] + um[0]), 0.5 * (up[1] + um[1])];
            dwx[0] += w[0] * g[a][0];
            dwx[1] += w[0] * g[a][1];
            dwy[0] += w[1] * g[a][0];
            dwy[1] += w[1] * g[a][1];
        }
        let d11 = dwx[0];
        let d22 = dwy[1];
        let d12 = 0.5 * (dwx[1] + dwy[0]);
        per_triangle.push(2.0 * k_v * (d11 * d11 + d22 * d22 + 2.0 * d12 * d12));
    }
    DissipationField::from_triangle_values(mesh, per_triangle)
}
