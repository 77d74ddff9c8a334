//! Manufactured-solution convergence study.
//!
//! Runs the velocity and thermal discretizations on the unit square against
//! smooth reference fields and reports true L2 errors from a degree-4
//! quadrature, so halving the mesh size should divide the error by four.
//!
//! - Velocity: U* = (sin(pi x) cos(pi y), cos(pi x) sin(pi y)) with unit
//!   density and viscosity; the matching volume force follows from the
//!   strong form of the symmetric-gradient operator, boundary tractions
//!   k_v D(U*) n load the non-clamped boundary, and U* is imposed on the
//!   clamped bottom.
//! - Thermal: T+* = T- + 12 + cos(pi x) cos(pi y) with unit heat capacity
//!   and conductivity, no phase jump; the matching dissipated work stays
//!   positive because 12 exceeds 1 + pi^2, and the reference satisfies the
//!   adiabatic condition exactly on the square.

use crate::error::Result;
use crate::fem::{assemble_elastic_stiffness, assemble_vector_mass};
use crate::field::ScalarField;
use crate::linalg::{apply_dirichlet, solve_spd};
use crate::mesh::{build_structured_mesh, BoundarySpec, BoundaryTag, Mesh};
use crate::params::{MaterialParams, PhaseVariant};
use crate::sparse::SparseMatrix;
use crate::thermal::{solve_thermal_with, ThermalBC};
use crate::velocity::DissipationField;

use std::f64::consts::PI;

/// Errors of one mesh-refinement sweep.
#[derive(Debug, Clone)]
pub struct MmsResult {
    /// Cells per side at each level.
    pub sizes: Vec<usize>,
    pub velocity_errors: Vec<f64>,
    pub thermal_errors: Vec<f64>,
}

impl MmsResult {
    pub fn velocity_rates(&self) -> Vec<f64> {
        rates(&self.velocity_errors)
    }

    pub fn thermal_rates(&self) -> Vec<f64> {
        rates(&self.thermal_errors)
    }
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}

/// Degree-4 triangle quadrature: barycentric coordinates and weights
/// summing to one.
const QUAD_POINTS: [([f64; 3], f64); 6] = [
    (
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        0.109951743655322,
    ),
];

fn u_star(p: [f64; 2]) -> [f64; 2] {
    [
        (PI * p[0]).sin() * (PI * p[1]).cos(),
        (PI * p[0]).cos() * (PI * p[1]).sin(),
    ]
}

/// k_v D(U*) n on the boundary, with D the symmetric gradient.
fn traction_star(p: [f64; 2], normal: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let d11 = PI * (PI * x).cos() * (PI * y).cos();
    let d22 = PI * (PI * x).cos() * (PI * y).cos();
    let d12 = -PI * (PI * x).sin() * (PI * y).sin();
    [
        d11 * normal[0] + d12 * normal[1],
        d12 * normal[0] + d22 * normal[1],
    ]
}

fn t_star(p: [f64; 2], t_base: f64) -> f64 {
    t_base + 12.0 + (PI * p[0]).cos() * (PI * p[1]).cos()
}

fn diss_star(p: [f64; 2]) -> f64 {
    12.0 + (1.0 + PI * PI) * (PI * p[0]).cos() * (PI * p[1]).cos()
}

fn vector_l2_error(mesh: &Mesh, u_h: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangles[t];
        let area = mesh.triangle_area(t);
        let pts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        for (bary, weight) in QUAD_POINTS {
            let p = [
                bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
                bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
            ];
            let mut uh = [0.0, 0.0];
            for v in 0..3 {
                uh[0] += bary[v] * u_h[2 * tri[v]];
                uh[1] += bary[v] * u_h[2 * tri[v] + 1];
            }
            let ex = exact(p);
            let dx = uh[0] - ex[0];
            let dy = uh[1] - ex[1];
            acc += weight * area * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}

fn scalar_l2_error(mesh: &Mesh, t_h: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangles[t];
        let area = mesh.triangle_area(t);
        let pts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        for (bary, weight) in QUAD_POINTS {
            let p = [
                bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
                bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
            ];
            let th = bary[0] * t_h[tri[0]] + bary[1] * t_h[tri[1]] + bary[2] * t_h[tri[2]];
            let d = th - exact(p);
            acc += weight * area * d * d;
        }
    }
    acc.sqrt()
}

/// L2 error of the velocity discretization at n cells per side.
pub fn velocity_mms_error(n: usize) -> Result<f64> {
    let mesh = build_structured_mesh(1.0, 1.0, n, n, BoundarySpec::default())?;
    let nn = mesh.node_count();

    let mass = assemble_vector_mass(&mesh, false)?;
    let stiff = assemble_elastic_stiffness(&mesh)?;
    let system = SparseMatrix::linear_combination(1.0, &mass, 1.0, &stiff)?;

    let a = PI;
    let b = PI;
    let c1 = 1.0 + (a * a + b * (a + b) / 2.0);
    let c2 = 1.0 + (b * b + a * (a + b) / 2.0);
    let mut f_nodal = vec![0.0; 2 * nn];
    for (i, p) in mesh.nodes.iter().enumerate() {
        let u = u_star(*p);
        f_nodal[2 * i] = c1 * u[0];
        f_nodal[2 * i + 1] = c2 * u[1];
    }
    let mut rhs = mass.matvec(&f_nodal);

    for tag in [BoundaryTag::Gamma1, BoundaryTag::GammaFree] {
        for edge in mesh.boundary_edges_with_tag(tag) {
            let normal = edge.normal;
            let load = assemble_boundary_traction_single(&mesh, &edge.nodes, normal);
            for i in 0..2 * nn {
                rhs[i] += load[i];
            }
        }
    }

    let constraints: Vec<(usize, f64)> = mesh
        .nodes_with_tag(BoundaryTag::Gamma0)
        .into_iter()
        .flat_map(|node| {
            let u = u_star(mesh.nodes[node]);
            [(2 * node, u[0]), (2 * node + 1, u[1])]
        })
        .collect();
    let constrained = apply_dirichlet(&system, &mut rhs, &constraints)?;

    let (u_h, _) = solve_spd(&constrained, &rhs, 1e-11, 40 * 2 * nn)?;
    Ok(vector_l2_error(&mesh, &u_h, u_star))
}

fn assemble_boundary_traction_single(
    mesh: &Mesh,
    nodes: &[usize; 2],
    normal: [f64; 2],
) -> Vec<f64> {
    let p = mesh.nodes[nodes[0]];
    let q = mesh.nodes[nodes[1]];
    let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
    let gp = traction_star(p, normal);
    let gq = traction_star(q, normal);
    let mut load = vec![0.0; 2 * mesh.node_count()];
    for c in 0..2 {
        load[2 * nodes[0] + c] += len * (2.0 * gp[c] + gq[c]) / 6.0;
        load[2 * nodes[1] + c] += len * (2.0 * gq[c] + gp[c]) / 6.0;
    }
    load
}

/// L2 error of the thermal discretization at n cells per side.
pub fn thermal_mms_error(n: usize) -> Result<f64> {
    let mesh = build_structured_mesh(1.0, 1.0, n, n, BoundarySpec::default())?;
    let nn = mesh.node_count();
    let t_base = 300.0;

    let params = MaterialParams {
        rho: 1.0,
        k_v: 1.0,
        c: 1.0,
        upsilon: 0.0,
        kappa: 0.0,
        lambda_th: 1.0,
        heat_cap: 1.0,
        latent_heat: 1.0,
        t0: t_base,
        variant: PhaseVariant::UniformDissipation,
    };

    let t_minus = ScalarField::constant(nn, t_base);
    let beta = ScalarField::zeros(nn);
    let per_triangle: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| {
            let tri = mesh.triangles[t];
            let cx = (mesh.nodes[tri[0]][0] + mesh.nodes[tri[1]][0] + mesh.nodes[tri[2]][0]) / 3.0;
            let cy = (mesh.nodes[tri[0]][1] + mesh.nodes[tri[1]][1] + mesh.nodes[tri[2]][1]) / 3.0;
            diss_star([cx, cy])
        })
        .collect();
    let diss = DissipationField::from_triangle_values(&mesh, per_triangle)?;

    let solution = solve_thermal_with(
        &mesh,
        &t_minus,
        &beta,
        &beta,
        &diss,
        &params,
        ThermalBC::Adiabatic,
        1e-11,
        0,
    )?;
    Ok(scalar_l2_error(&mesh, &solution.t_plus.values, |p| {
        t_star(p, t_base)
    }))
}

/// Runs both studies over doubling mesh sizes starting at 8 cells per side.
pub fn run_mms(levels: usize) -> Result<MmsResult> {
    let sizes: Vec<usize> = (0..levels.max(1)).map(|k| 8usize << k).collect();
    let mut velocity_errors = Vec::with_capacity(sizes.len());
    let mut thermal_errors = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        velocity_errors.push(velocity_mms_error(n)?);
        thermal_errors.push(thermal_mms_error(n)?);
    }
    Ok(MmsResult {
        sizes,
        velocity_errors,
        thermal_errors,
    })
}
