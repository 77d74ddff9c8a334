//! Material description of the shape-memory alloy.
//!
//! All quantities in SI units; configuration files use engineering units and
//! convert on load.

use crate::error::{Error, Result};

/// Choice of dissipation weighting in the discrete phase system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseVariant {
    /// Couples the two martensite fractions through the Gram matrix
    /// [[2, 1], [1, 2]] of the three-fraction description.
    UniformDissipation,
    /// Treats the two martensite fractions independently.
    ReducedDissipation,
}

/// Material parameters of the alloy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Mass density (kg/m^3).
    pub rho: f64,
    /// Viscosity modulus of the collision response (Pa s).
    pub k_v: f64,
    /// Phase change viscosity (J s/m^3).
    pub c: f64,
    /// Phase interaction modulus (Pa).
    pub upsilon: f64,
    /// Interfacial energy modulus (Pa), weights phase gradients.
    pub kappa: f64,
    /// Thermal conductivity times the collision duration (W s/(K m)).
    pub lambda_th: f64,
    /// Volumetric heat capacity (J/(m^3 K)).
    pub heat_cap: f64,
    /// Latent heat density of the austenite-martensite transition (J/m^3).
    pub latent_heat: f64,
    /// Phase equilibrium temperature (K).
    pub t0: f64,
    pub variant: PhaseVariant,
}

impl MaterialParams {
    /// Ni-Ti values used throughout the worked examples.
    pub fn nickel_titanium() -> Self {
        MaterialParams {
            rho: 6500.0,
            k_v: 1.0e6,
            c: 4.0e6,
            upsilon: 5.0e5,
            kappa: 5.0e5,
            lambda_th: 18.0,
            heat_cap: 5.4e6,
            latent_heat: 8.0e7,
            t0: 332.75,
            variant: PhaseVariant::UniformDissipation,
        }
    }

    /// Rejects parameter sets outside the model's admissible range.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, bool); 9] = [
            ("rho", self.rho, self.rho >= 0.0),
            ("k_v", self.k_v, self.k_v > 0.0),
            ("c", self.c, self.c >= 0.0),
            ("upsilon", self.upsilon, self.upsilon >= 0.0),
            ("kappa", self.kappa, self.kappa >= 0.0),
            ("lambda_th", self.lambda_th, self.lambda_th >= 0.0),
            ("heat_cap", self.heat_cap, self.heat_cap >= 0.0),
            ("latent_heat", self.latent_heat, self.latent_heat > 0.0),
            ("t0", self.t0, self.t0 > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::invalid(format!(
                    "material parameter {name} = {value} outside admissible range"
                )));
            }
        }
        Ok(())
    }

    /// Dissipation weighting matrix of the chosen variant.
    pub fn dissipation_matrix(&self) -> [[f64; 2]; 2] {
        match self.variant {
            PhaseVariant::UniformDissipation => [[2.0, 1.0], [1.0, 2.0]],
            PhaseVariant::ReducedDissipation => [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}
