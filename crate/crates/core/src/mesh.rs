//! Structured triangulations of a rectangle.
//!
//! - Nodes on an (nx+1) x (ny+1) grid, node (i, j) at index `j * (nx + 1) + i`
//!   with coordinates (i * W / nx, j * H / ny) so nested refinements share
//!   exact coordinates.
//! - Each grid cell splits along its lower-left to upper-right diagonal into
//!   two counterclockwise triangles.
//! - Boundary edges run counterclockwise around the rectangle and carry a
//!   region tag: the clamped part of the boundary, the loaded part, or free.

use crate::error::{Error, Result};

/// Tag attached to each boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Clamped: velocity fixed to zero.
    Gamma0,
    /// Loaded: surface percussion applied here.
    Gamma1,
    /// Traction-free elsewhere.
    GammaFree,
}

/// Where a tagged region lives on the rectangle boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRegion {
    /// Region absent from the boundary.
    Empty,
    /// The whole bottom side y = 0.
    Bottom,
    /// Centered band of the top side of the given fraction of the width,
    /// fraction in (0, 1].
    TopCentered { fraction: f64 },
}

/// Placement of the clamped and loaded regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub gamma0: BoundaryRegion,
    pub gamma1: BoundaryRegion,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            gamma0: BoundaryRegion::Bottom,
            gamma1: BoundaryRegion::TopCentered {
                fraction: 1.0 / 3.0,
            },
        }
    }
}

/// One boundary edge: node pair in counterclockwise order plus its tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// A tagged boundary edge with its outward unit normal and length (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedEdge {
    pub nodes: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

/// Conforming triangulation of [0, W] x [0, H].
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Node coordinates (m).
    pub nodes: Vec<[f64; 2]>,
    /// Triangles as counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges in counterclockwise orientation.
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t`; positive for counterclockwise triangles.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Total mesh area (m^2).
    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|t| self.triangle_area(t)).sum()
    }

    /// Boundary edges carrying `tag`, with outward normals.
    pub fn boundary_edges_with_tag(&self, tag: BoundaryTag) -> Vec<TaggedEdge> {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| {
                let p = self.nodes[e.nodes[0]];
                let q = self.nodes[e.nodes[1]];
                let dx = q[0] - p[0];
                let dy = q[1] - p[1];
                let len = dx.hypot(dy);
                TaggedEdge {
                    nodes: e.nodes,
                    normal: [dy / len, -dx / len],
                    length: len,
                }
            })
            .collect()
    }

    /// Sorted, deduplicated node indices on edges carrying `tag`.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Checks positive triangle areas and in-range connectivity.
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            for &n in tri {
                if n >= self.nodes.len() {
                    return Err(Error::invalid(format!(
                        "triangle {t} references node {n} but mesh has {} nodes",
                        self.nodes.len()
                    )));
                }
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }
        for (k, e) in self.boundary_edges.iter().enumerate() {
            for &n in &e.nodes {
                if n >= self.nodes.len() {
                    return Err(Error::invalid(format!(
                        "boundary edge {k} references node {n} but mesh has {} nodes",
                        self.nodes.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds the structured mesh of [0, width] x [0, height] with `nx` by `ny`
/// cells and tags the boundary according to `spec`.
pub fn build_structured_mesh(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    spec: BoundarySpec,
) -> Result<Mesh> {
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::invalid(format!(
            "mesh dimensions must be positive, got width = {width}, height = {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "mesh resolution must be at least 1 x 1, got {nx} x {ny}"
        )));
    }
    for region in [spec.gamma0, spec.gamma1] {
        if let BoundaryRegion::TopCentered { fraction } = region {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid(format!(
                    "top band fraction must lie in (0, 1], got {fraction}"
                )));
            }
        }
    }

    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * (width / nx as f64), j as f64 * (height / ny as f64)]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = idx(i, j);
            let n10 = idx(i + 1, j);
            let n01 = idx(i, j + 1);
            let n11 = idx(i + 1, j + 1);
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }

    enum Side {
        Bottom,
        Right,
        Top,
        Left,
    }

    let tag_for = |side: &Side, mid: [f64; 2]| -> BoundaryTag {
        let matches_region = |region: BoundaryRegion| -> bool {
            match region {
                BoundaryRegion::Empty => false,
                BoundaryRegion::Bottom => matches!(side, Side::Bottom),
                BoundaryRegion::TopCentered { fraction } => {
                    matches!(side, Side::Top)
                        && (mid[0] - width / 2.0).abs() <= width * fraction / 2.0
                }
            }
        };
        if matches_region(spec.gamma0) {
            BoundaryTag::Gamma0
        } else if matches_region(spec.gamma1) {
            BoundaryTag::Gamma1
        } else {
            BoundaryTag::GammaFree
        }
    };

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut push_edge = |a: usize, b: usize, side: Side| {
        let mid = [
            0.5 * (nodes[a][0] + nodes[b][0]),
            0.5 * (nodes[a][1] + nodes[b][1]),
        ];
        boundary_edges.push(BoundaryEdge {
            nodes: [a, b],
            tag: tag_for(&side, mid),
        });
    };
    for i in 0..nx {
        push_edge(idx(i, 0), idx(i + 1, 0), Side::Bottom);
    }
    for j in 0..ny {
        push_edge(idx(nx, j), idx(nx, j + 1), Side::Right);
    }
    for i in (0..nx).rev() {
        push_edge(idx(i + 1, ny), idx(i, ny), Side::Top);
    }
    for j in (0..ny).rev() {
        push_edge(idx(0, j + 1), idx(0, j), Side::Left);
    }

    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cell_mesh_matches_hand_count() {
        let m = build_structured_mesh(1.0, 1.0, 1, 1, BoundarySpec::default()).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        assert_eq!(m.boundary_edges.len(), 4);
        assert_eq!(m.triangles[0], [0, 1, 3]);
        assert_eq!(m.triangles[1], [0, 3, 2]);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_mesh_counts_and_coordinates() {
        let m = build_structured_mesh(2.0, 1.0, 2, 2, BoundarySpec::default()).unwrap();
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.triangle_count(), 8);
        assert_eq!(m.boundary_edges.len(), 8);
        assert_eq!(m.nodes[4], [1.0, 0.5]);
        assert_eq!(m.nodes[8], [2.0, 1.0]);
        for t in 0..m.triangle_count() {
            let a = m.triangle_area(t);
            assert!((a - 0.25).abs() < 1e-15, "triangle {t} area {a} should be 0.25");
        }
    }

    #[test]
    fn default_three_by_three_tags_one_top_edge() {
        let m = build_structured_mesh(1.0, 1.0, 3, 3, BoundarySpec::default()).unwrap();
        let g1 = m.boundary_edges_with_tag(BoundaryTag::Gamma1);
        assert_eq!(g1.len(), 1, "expected exactly 1 loaded edge, got {}", g1.len());
        let g0 = m.boundary_edges_with_tag(BoundaryTag::Gamma0);
        assert_eq!(g0.len(), 3, "expected 3 clamped edges, got {}", g0.len());
        let p = m.nodes[g1[0].nodes[0]];
        let q = m.nodes[g1[0].nodes[1]];
        let mid = 0.5 * (p[0] + q[0]);
        assert!((mid - 0.5).abs() < 1e-15, "loaded edge midpoint x = {mid} should be 0.5");
    }

    #[test]
    fn outward_normals_point_out_of_the_rectangle() {
        let m = build_structured_mesh(1.0, 1.0, 2, 2, BoundarySpec::default()).unwrap();
        for tag in [BoundaryTag::Gamma0, BoundaryTag::Gamma1, BoundaryTag::GammaFree] {
            for e in m.boundary_edges_with_tag(tag) {
                let p = m.nodes[e.nodes[0]];
                let q = m.nodes[e.nodes[1]];
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                let center_to_mid = [mid[0] - 0.5, mid[1] - 0.5];
                let dot = e.normal[0] * center_to_mid[0] + e.normal[1] * center_to_mid[1];
                assert!(dot > 0.0, "normal {:?} at midpoint {:?} points inward", e.normal, mid);
                let len = (e.normal[0].powi(2) + e.normal[1].powi(2)).sqrt();
                assert!((len - 1.0).abs() < 1e-15, "normal length {len} should be 1");
            }
        }
    }

    #[test]
    fn loaded_band_covers_a_third_of_the_top_on_fine_mesh() {
        let spec = BoundarySpec {
            gamma0: BoundaryRegion::Bottom,
            gamma1: BoundaryRegion::TopCentered {
                fraction: 1.0 / 3.0,
            },
        };
        let m = build_structured_mesh(1e-3, 1e-3, 100, 100, spec).unwrap();
        let g1 = m.boundary_edges_with_tag(BoundaryTag::Gamma1);
        assert_eq!(g1.len(), 34, "expected 34 loaded edges on a 100-cell top side, got {}", g1.len());
        let total: f64 = g1.iter().map(|e| e.length).sum();
        assert!(
            (total - 0.34e-3).abs() < 1e-12,
            "loaded band length {total} should be 3.4e-4"
        );
    }

    #[test]
    fn empty_clamped_region_leaves_bottom_free() {
        let spec = BoundarySpec {
            gamma0: BoundaryRegion::Empty,
            gamma1: BoundaryRegion::TopCentered { fraction: 1.0 },
        };
        let m = build_structured_mesh(1.0, 1.0, 2, 2, spec).unwrap();
        assert!(m.boundary_edges_with_tag(BoundaryTag::Gamma0).is_empty());
        assert_eq!(m.boundary_edges_with_tag(BoundaryTag::Gamma1).len(), 2);
        assert_eq!(m.boundary_edges_with_tag(BoundaryTag::GammaFree).len(), 6);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(build_structured_mesh(0.0, 1.0, 2, 2, BoundarySpec::default()).is_err());
        assert!(build_structured_mesh(1.0, 1.0, 0, 2, BoundarySpec::default()).is_err());
        let bad = BoundarySpec {
            gamma0: BoundaryRegion::Bottom,
            gamma1: BoundaryRegion::TopCentered { fraction: 1.5 },
        };
        assert!(build_structured_mesh(1.0, 1.0, 2, 2, bad).is_err());
    }

    #[test]
    fn tagged_nodes_are_sorted_and_unique() {
        let m = build_structured_mesh(1.0, 1.0, 3, 3, BoundarySpec::default()).unwrap();
        let bottom = m.nodes_with_tag(BoundaryTag::Gamma0);
        assert_eq!(bottom, vec![0, 1, 2, 3]);
        let loaded = m.nodes_with_tag(BoundaryTag::Gamma1);
        assert_eq!(loaded.len(), 2);
        for n in loaded {
            assert_eq!(m.nodes[n][1], 1.0, "loaded node {n} should sit on the top side");
        }
    }

    #[test]
    fn refinement_shares_coarse_coordinates() {
        let coarse = build_structured_mesh(1e-3, 1e-3, 4, 4, BoundarySpec::default()).unwrap();
        let fine = build_structured_mesh(1e-3, 1e-3, 8, 8, BoundarySpec::default()).unwrap();
        for j in 0..=4usize {
            for i in 0..=4usize {
                let pc = coarse.nodes[j * 5 + i];
                let pf = fine.nodes[(2 * j) * 9 + 2 * i];
                assert_eq!(pc, pf, "coarse node ({i}, {j}) should appear exactly in the fine mesh");
            }
        }
    }
}
