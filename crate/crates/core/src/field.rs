//! Nodal field containers for P1 finite elements.
//!
//! - `ScalarField`: one coefficient per mesh node (K for temperatures,
//!   dimensionless for volume fractions, J/m^3 for work densities).
//! - `VectorField`: one 2D vector per mesh node (m/s for velocities), stored
//!   interleaved as `[x0, y0, x1, y1, ...]`.

/// Per-node scalar coefficients; length equals the mesh node count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(node_count: usize) -> Self {
        ScalarField {
            values: vec![0.0; node_count],
        }
    }

    pub fn constant(node_count: usize, value: f64) -> Self {
        ScalarField {
            values: vec![value; node_count],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute entry (0 for an empty field).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-node 2D vectors stored interleaved; `values.len()` is twice the node count.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(node_count: usize) -> Self {
        VectorField {
            values: vec![0.0; 2 * node_count],
        }
    }

    pub fn from_interleaved(values: Vec<f64>) -> Self {
        assert!(
            values.len() % 2 == 0,
            "interleaved vector storage must have even length, got {}",
            values.len()
        );
        VectorField { values }
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / 2
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    pub fn set_node(&mut self, i: usize, v: [f64; 2]) {
        self.values[2 * i] = v[0];
        self.values[2 * i + 1] = v[1];
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
