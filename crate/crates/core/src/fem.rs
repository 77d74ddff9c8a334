//! P1 finite-element assembly on triangle meshes.
//!
//! - Scalar stiffness, scalar mass (consistent or lumped), and their
//!   vector-valued counterparts on interleaved [x0, y0, x1, y1, ...] degrees
//!   of freedom.
//! - The elastic operator discretizes the symmetrized-gradient form
//!   integral of D(U) : D(V), whose kernel is spanned by the two translations
//!   and the in-plane rigid rotation.
//! - Boundary terms: edge mass matrices for exchange conditions and traction
//!   load vectors, with endpoint-sampled data integrated exactly for data
//!   linear along the edge.

use crate::error::Result;
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::SparseMatrix;

/// Basis gradients and area of triangle `t`.
///
/// Gradient of the hat function of local node `a` is `grads[a]` (1/m);
/// `area` in m^2.
pub fn triangle_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles[t];
    let pa = mesh.nodes[a];
    let pb = mesh.nodes[b];
    let pc = mesh.nodes[c];
    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    let area = 0.5 * det;
    let grads = [
        [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
        [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
        [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
    ];
    (grads, area)
}

/// Scalar stiffness matrix, entries integral of grad(phi_i) . grad(phi_j).
pub fn assemble_scalar_stiffness(mesh: &Mesh) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let (g, area) = triangle_gradients(mesh, t);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let v = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((tri[a], tri[b], v));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.node_count(), &triplets)
}

/// Scalar mass matrix: consistent (A/12 pattern) or lumped (row sums on the
/// diagonal, A/3 per vertex).
pub fn assemble_scalar_mass(mesh: &Mesh, lumped: bool) -> Result<SparseMatrix> {
    let mut triplets = Vec::new();
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles[t];
        if lumped {
            for a in 0..3 {
                triplets.push((tri[a], tri[a], area / 3.0));
            }
        } else {
            for a in 0..3 {
                for b in 0..3 {
                    let w = if a == b { 2.0 } else { 1.0 };
                    triplets.push((tri[a], tri[b], w * area / 12.0));
                }
            }
        }
    }
    SparseMatrix::from_triplets(mesh.node_count(), &triplets)
}

/// Vector mass matrix on interleaved DOFs; same entries as the scalar mass on
/// each component.
pub fn assemble_vector_mass(mesh: &Mesh, lumped: bool) -> Result<SparseMatrix> {
    let scalar = assemble_scalar_mass(mesh, lumped)?;
    let mut triplets = Vec::with_capacity(2 * scalar.nnz());
    for row in 0..scalar.dim {
        for (col, v) in scalar.row(row) {
            triplets.push((2 * row, 2 * col, v));
            triplets.push((2 * row + 1, 2 * col + 1, v));
        }
    }
    SparseMatrix::from_triplets(2 * mesh.node_count(), &triplets)
}

/// Elastic stiffness on interleaved DOFs: entries integral of
/// D(phi_a e_c) : D(phi_b e_d) with D the symmetrized gradient.
pub fn assemble_elastic_stiffness(mesh: &Mesh) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(36 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let (g, area) = triangle_gradients(mesh, t);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let (ax, ay) = (g[a][0], g[a][1]);
                let (bx, by) = (g[b][0], g[b][1]);
                let xx = area * (ax * bx + 0.5 * (ay * by));
                let yy = area * (ay * by + 0.5 * (ax * bx));
                let xy = area * (0.5 * (ay * bx));
                let yx = area * (0.5 * (ax * by));
                triplets.push((2 * tri[a], 2 * tri[b], xx));
                triplets.push((2 * tri[a] + 1, 2 * tri[b] + 1, yy));
                triplets.push((2 * tri[a], 2 * tri[b] + 1, xy));
                triplets.push((2 * tri[a] + 1, 2 * tri[b], yx));
            }
        }
    }
    SparseMatrix::from_triplets(2 * mesh.node_count(), &triplets)
}

/// Load vector of a constant traction `scale * g` over the edges tagged
/// `tag`, on interleaved DOFs. Each edge endpoint receives L/2 of the pull.
pub fn assemble_boundary_traction(
    mesh: &Mesh,
    tag: BoundaryTag,
    g: [f64; 2],
    scale: f64,
) -> Vec<f64> {
    let mut load = vec![0.0; 2 * mesh.node_count()];
    for e in mesh.boundary_edges_with_tag(tag) {
        let w = 0.5 * e.length * scale;
        for n in e.nodes {
            load[2 * n] += w * g[0];
            load[2 * n + 1] += w * g[1];
        }
    }
    load
}

/// Boundary mass matrix over the edges carrying any of `tags`: per edge
/// (L/6) [[2, 1], [1, 2]] on scalar DOFs.
pub fn assemble_boundary_mass(mesh: &Mesh, tags: &[BoundaryTag]) -> Result<SparseMatrix> {
    let mut triplets = Vec::new();
    for &tag in tags {
        for e in mesh.boundary_edges_with_tag(tag) {
            let [p, q] = e.nodes;
            let w = e.length / 6.0;
            triplets.push((p, p, 2.0 * w));
            triplets.push((q, q, 2.0 * w));
            triplets.push((p, q, w));
            triplets.push((q, p, w));
        }
    }
    SparseMatrix::from_triplets(mesh.node_count(), &triplets)
}

/// Scalar load vector with entry integral of phi_i over the edges carrying
/// any of `tags`: L/2 per adjacent edge endpoint.
pub fn boundary_load_vector(mesh: &Mesh, tags: &[BoundaryTag]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.node_count()];
    for &tag in tags {
        for e in mesh.boundary_edges_with_tag(tag) {
            for n in e.nodes {
                load[n] += 0.5 * e.length;
            }
        }
    }
    load
}

/// Total length of the edges carrying any of `tags` (m).
pub fn boundary_length(mesh: &Mesh, tags: &[BoundaryTag]) -> f64 {
    tags.iter()
        .flat_map(|&tag| mesh.boundary_edges_with_tag(tag))
        .map(|e| e.length)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, BoundarySpec};

    fn unit_right_triangle() -> Mesh {
        Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![],
        }
    }

    #[test]
    fn scalar_stiffness_of_unit_right_triangle() {
        let m = unit_right_triangle();
        let s = assemble_scalar_stiffness(&m).unwrap().to_dense();
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    s[i][j], expected[i][j],
                    "stiffness entry ({i}, {j}) = {} should be {}",
                    s[i][j], expected[i][j]
                );
            }
        }
    }

    #[test]
    fn consistent_mass_of_unit_right_triangle() {
        let m = unit_right_triangle();
        let mass = assemble_scalar_mass(&m, false).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!(
                    (mass[i][j] - expected).abs() < 1e-16,
                    "mass entry ({i}, {j}) = {} should be {expected}",
                    mass[i][j]
                );
            }
        }
    }

    #[test]
    fn lumped_mass_of_unit_right_triangle() {
        let m = unit_right_triangle();
        let mass = assemble_scalar_mass(&m, true).unwrap();
        let d = mass.diagonal();
        for (i, v) in d.iter().enumerate() {
            assert!((v - 1.0 / 6.0).abs() < 1e-16, "lumped mass at node {i} = {v} should be 1/6");
        }
        assert_eq!(mass.nnz(), 3, "lumped mass should be diagonal, nnz = {}", mass.nnz());
    }

    #[test]
    fn mass_total_equals_domain_area() {
        let m = build_structured_mesh(2.0, 3.0, 4, 5, BoundarySpec::default()).unwrap();
        for lumped in [false, true] {
            let mass = assemble_scalar_mass(&m, lumped).unwrap();
            let ones = vec![1.0; m.node_count()];
            let total: f64 = mass.matvec(&ones).iter().sum();
            assert!(
                (total - 6.0).abs() < 1e-12,
                "mass total {total} should equal the domain area 6 (lumped = {lumped})"
            );
        }
    }

    #[test]
    fn stiffness_annihilates_constants_exactly_on_dyadic_grids() {
        let m = build_structured_mesh(1.0, 1.0, 8, 8, BoundarySpec::default()).unwrap();
        let s = assemble_scalar_stiffness(&m).unwrap();
        let ones = vec![1.0; m.node_count()];
        let r = s.matvec(&ones);
        let worst = r.iter().fold(0.0f64, |w, v| w.max(v.abs()));
        assert_eq!(worst, 0.0, "stiffness times constant should vanish exactly, got {worst}");
    }

    #[test]
    fn stiffness_annihilates_constants_to_rounding_on_physical_grids() {
        let m = build_structured_mesh(1e-3, 1e-3, 8, 8, BoundarySpec::default()).unwrap();
        let s = assemble_scalar_stiffness(&m).unwrap();
        let ones = vec![1.0; m.node_count()];
        let r = s.matvec(&ones);
        let worst = r.iter().fold(0.0f64, |w, v| w.max(v.abs()));
        let scale = s.max_row_abs_sum();
        assert!(
            worst <= 16.0 * f64::EPSILON * scale,
            "constant residual {worst} should be rounding-level against row scale {scale}"
        );
    }

    #[test]
    fn assembled_matrices_are_exactly_symmetric() {
        let m = build_structured_mesh(1e-3, 2e-3, 5, 4, BoundarySpec::default()).unwrap();
        for matrix in [
            assemble_scalar_stiffness(&m).unwrap(),
            assemble_scalar_mass(&m, false).unwrap(),
            assemble_elastic_stiffness(&m).unwrap(),
        ] {
            assert_eq!(matrix.max_abs_asymmetry(), 0.0);
        }
    }

    #[test]
    fn elastic_stiffness_kernel_holds_rigid_motions() {
        let m = build_structured_mesh(1.0, 1.0, 3, 3, BoundarySpec::default()).unwrap();
        let a = assemble_elastic_stiffness(&m).unwrap();
        let n = m.node_count();
        let mut shift_x = vec![0.0; 2 * n];
        let mut shift_y = vec![0.0; 2 * n];
        let mut spin = vec![0.0; 2 * n];
        for i in 0..n {
            shift_x[2 * i] = 1.0;
            shift_y[2 * i + 1] = 1.0;
            spin[2 * i] = -m.nodes[i][1];
            spin[2 * i + 1] = m.nodes[i][0];
        }
        for (name, v) in [("shift_x", shift_x), ("shift_y", shift_y), ("rotation", spin)] {
            let r = a.matvec(&v);
            let worst = r.iter().fold(0.0f64, |w, x| w.max(x.abs()));
            assert!(worst < 1e-14, "elastic operator on rigid motion {name} leaves {worst}");
        }
    }

    #[test]
    fn elastic_stiffness_is_positive_semidefinite() {
        use nalgebra::DMatrix;
        let m = build_structured_mesh(1.0, 1.0, 2, 2, BoundarySpec::default()).unwrap();
        let a = assemble_elastic_stiffness(&m).unwrap();
        let dense = a.to_dense();
        let n = dense.len();
        let mat = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let eigs = mat.symmetric_eigenvalues();
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-12, "smallest elastic eigenvalue {min} should be nonnegative");
    }

    #[test]
    fn constant_traction_on_single_top_edge() {
        let m = build_structured_mesh(1.0, 1.0, 1, 1, BoundarySpec::default()).unwrap();
        let load = assemble_boundary_traction(&m, BoundaryTag::Gamma1, [0.0, -1.0], 2.0);
        let mut expected = vec![0.0; 8];
        expected[2 * 2 + 1] = -1.0;
        expected[2 * 3 + 1] = -1.0;
        assert_eq!(load, expected);
    }

    #[test]
    fn boundary_mass_on_single_edge() {
        let m = build_structured_mesh(1.0, 1.0, 1, 1, BoundarySpec::default()).unwrap();
        let b = assemble_boundary_mass(&m, &[BoundaryTag::Gamma1]).unwrap().to_dense();
        assert!((b[2][2] - 2.0 / 6.0).abs() < 1e-16);
        assert!((b[3][3] - 2.0 / 6.0).abs() < 1e-16);
        assert!((b[2][3] - 1.0 / 6.0).abs() < 1e-16);
        assert!((b[3][2] - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(b[0][0], 0.0);
    }

    #[test]
    fn boundary_load_vector_covers_tagged_length() {
        let m = build_structured_mesh(1.0, 1.0, 4, 4, BoundarySpec::default()).unwrap();
        let b = boundary_load_vector(&m, &[BoundaryTag::Gamma0]);
        let total: f64 = b.iter().sum();
        assert!((total - 1.0).abs() < 1e-15, "clamped load total {total} should equal length 1");
        assert!((boundary_length(&m, &[BoundaryTag::Gamma0]) - 1.0).abs() < 1e-15);
    }
}
