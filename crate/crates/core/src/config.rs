//! Run configuration: TOML files in engineering units.
//!
//! Impulse viscosities and percussion magnitudes are given in MPa.s,
//! energies in MJ/m^3, lengths in mm, and angles in degrees; the accessors
//! convert to the SI base quantities the solvers expect. Files round-trip
//! exactly: parsing and re-serializing preserves every value bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{FixedPointConfig, PreState};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_mesh, BoundaryRegion, BoundarySpec, Mesh};
use crate::params::{MaterialParams, PhaseVariant};
use crate::thermal::ThermalBC;
use crate::velocity::PercussionLoad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Body width (mm).
    #[serde(default = "default_extent")]
    pub width_mm: f64,
    /// Body height (mm).
    #[serde(default = "default_extent")]
    pub height_mm: f64,
    #[serde(default = "default_cells")]
    pub nx: usize,
    #[serde(default = "default_cells")]
    pub ny: usize,
    /// Width fraction of the centered loaded segment on the top edge.
    #[serde(default = "default_gamma1_fraction")]
    pub gamma1_fraction: f64,
}

fn default_extent() -> f64 {
    1.0
}
fn default_cells() -> usize {
    100
}
fn default_gamma1_fraction() -> f64 {
    1.0 / 3.0
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            width_mm: default_extent(),
            height_mm: default_extent(),
            nx: default_cells(),
            ny: default_cells(),
            gamma1_fraction: default_gamma1_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Mass density (kg/m^3).
    pub rho: f64,
    /// Velocity impulse viscosity (MPa.s).
    pub k_v_mpa_s: f64,
    /// Phase impulse viscosity (MJ/m^3).
    pub c_mj: f64,
    /// Phase gradient-free dissipation modulus (MPa).
    pub upsilon_mpa: f64,
    /// Interfacial energy modulus (MPa).
    pub kappa_mpa: f64,
    /// Thermal conductivity impulse (W.s/(K.m)).
    pub lambda_w_s: f64,
    /// Volumetric heat capacity (MJ/(m^3.K)).
    pub heat_capacity_mj: f64,
    /// Austenite latent heat (MJ/m^3).
    pub latent_heat_mj: f64,
    /// Phase-change temperature (K).
    pub t0_k: f64,
    /// Dissipation variant: "uniform" or "reduced".
    #[serde(default = "default_variant")]
    pub variant: String,
}

fn default_variant() -> String {
    "uniform".to_string()
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            rho: 6500.0,
            k_v_mpa_s: 1.0,
            c_mj: 4.0,
            upsilon_mpa: 0.5,
            kappa_mpa: 0.5,
            lambda_w_s: 18.0,
            heat_capacity_mj: 5.4,
            latent_heat_mj: 80.0,
            t0_k: 332.75,
            variant: default_variant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    /// Percussion magnitude (MPa.s).
    pub magnitude_mpa_s: f64,
    /// Stroke angle from the horizontal (degrees, 0 to 180).
    pub angle_deg: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            magnitude_mpa_s: 20.0,
            angle_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Pre-collision temperature (K).
    pub t_minus_k: f64,
    /// Pre-collision fractions (beta1, beta2, beta3).
    #[serde(default = "default_beta_minus")]
    pub beta_minus: [f64; 3],
}

fn default_beta_minus() -> [f64; 3] {
    [0.5, 0.5, 0.0]
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            t_minus_k: 299.475,
            beta_minus: default_beta_minus(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBcConfig {
    /// "adiabatic" or "robin".
    #[serde(default = "default_bc_kind")]
    pub kind: String,
    /// Exchange impulse coefficient (W.s/(K.m^2)), Robin only.
    #[serde(default)]
    pub h_coeff: f64,
    /// Outside temperature (K), Robin only.
    #[serde(default = "default_t_ext")]
    pub t_ext_k: f64,
}

fn default_bc_kind() -> String {
    "adiabatic".to_string()
}
fn default_t_ext() -> f64 {
    300.0
}

impl Default for ThermalBcConfig {
    fn default() -> Self {
        ThermalBcConfig {
            kind: default_bc_kind(),
            h_coeff: 0.0,
            t_ext_k: default_t_ext(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_lin_tol")]
    pub lin_tol: f64,
    #[serde(default = "default_vi_tol")]
    pub vi_tol: f64,
}

fn default_fp_tol() -> f64 {
    1e-8
}
fn default_fp_max_iter() -> usize {
    200
}
fn default_relaxation() -> f64 {
    1.0
}
fn default_lin_tol() -> f64 {
    1e-10
}
fn default_vi_tol() -> f64 {
    1e-10
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            relaxation: default_relaxation(),
            lin_tol: default_lin_tol(),
            vi_tol: default_vi_tol(),
        }
    }
}

/// Complete description of one collision run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub thermal_bc: ThermalBcConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("parse", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("serialize", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        if !(m.width_mm > 0.0) {
            return Err(Error::config(
                "mesh.width_mm",
                format!("{} must be positive", m.width_mm),
            ));
        }
        if !(m.height_mm > 0.0) {
            return Err(Error::config(
                "mesh.height_mm",
                format!("{} must be positive", m.height_mm),
            ));
        }
        if m.nx == 0 || m.ny == 0 {
            return Err(Error::config(
                "mesh.nx",
                format!("cell counts ({}, {}) must be at least 1", m.nx, m.ny),
            ));
        }
        if !(m.gamma1_fraction > 0.0 && m.gamma1_fraction <= 1.0) {
            return Err(Error::config(
                "mesh.gamma1_fraction",
                format!("{} must lie in (0, 1]", m.gamma1_fraction),
            ));
        }

        let mat = &self.material;
        let positives = [
            ("material.k_v_mpa_s", mat.k_v_mpa_s),
            ("material.latent_heat_mj", mat.latent_heat_mj),
            ("material.t0_k", mat.t0_k),
        ];
        for (key, value) in positives {
            if !(value > 0.0) {
                return Err(Error::config(key, format!("{value} must be positive")));
            }
        }
        let non_negatives = [
            ("material.rho", mat.rho),
            ("material.c_mj", mat.c_mj),
            ("material.upsilon_mpa", mat.upsilon_mpa),
            ("material.kappa_mpa", mat.kappa_mpa),
            ("material.lambda_w_s", mat.lambda_w_s),
            ("material.heat_capacity_mj", mat.heat_capacity_mj),
        ];
        for (key, value) in non_negatives {
            if !(value >= 0.0) {
                return Err(Error::config(key, format!("{value} must not be negative")));
            }
        }
        if mat.variant != "uniform" && mat.variant != "reduced" {
            return Err(Error::config(
                "material.variant",
                format!("unknown variant {:?}, expected \"uniform\" or \"reduced\"", mat.variant),
            ));
        }

        if !(self.load.magnitude_mpa_s >= 0.0) {
            return Err(Error::config(
                "load.magnitude_mpa_s",
                format!("{} must not be negative", self.load.magnitude_mpa_s),
            ));
        }
        if !(self.load.angle_deg >= 0.0 && self.load.angle_deg <= 180.0) {
            return Err(Error::config(
                "load.angle_deg",
                format!("{} must lie in [0, 180]", self.load.angle_deg),
            ));
        }

        if !(self.initial.t_minus_k > 0.0) {
            return Err(Error::config(
                "initial.t_minus_k",
                format!("{} must be positive", self.initial.t_minus_k),
            ));
        }
        let beta = self.initial.beta_minus;
        let sum = beta[0] + beta[1] + beta[2];
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "initial.beta_minus",
                format!("fractions {beta:?} sum to {sum}, expected 1"),
            ));
        }
        for (i, value) in beta.iter().enumerate() {
            if !(*value >= -1e-12 && *value <= 1.0 + 1e-12) {
                return Err(Error::config(
                    "initial.beta_minus",
                    format!("fraction {} = {value} lies outside [0, 1]", i + 1),
                ));
            }
        }

        let bc = &self.thermal_bc;
        match bc.kind.as_str() {
            "adiabatic" => {}
            "robin" => {
                if !(bc.h_coeff >= 0.0) {
                    return Err(Error::config(
                        "thermal_bc.h_coeff",
                        format!("{} must not be negative", bc.h_coeff),
                    ));
                }
                if !(bc.t_ext_k > 0.0) {
                    return Err(Error::config(
                        "thermal_bc.t_ext_k",
                        format!("{} must be positive", bc.t_ext_k),
                    ));
                }
            }
            other => {
                return Err(Error::config(
                    "thermal_bc.kind",
                    format!("unknown kind {other:?}, expected \"adiabatic\" or \"robin\""),
                ));
            }
        }

        let s = &self.solver;
        if !(s.fp_tol > 0.0) {
            return Err(Error::config(
                "solver.fp_tol",
                format!("{} must be positive", s.fp_tol),
            ));
        }
        if s.fp_max_iter == 0 {
            return Err(Error::config("solver.fp_max_iter", "must be at least 1"));
        }
        if !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(Error::config(
                "solver.relaxation",
                format!("{} must lie in (0, 1]", s.relaxation),
            ));
        }
        if !(s.lin_tol > 0.0) {
            return Err(Error::config(
                "solver.lin_tol",
                format!("{} must be positive", s.lin_tol),
            ));
        }
        if !(s.vi_tol > 0.0) {
            return Err(Error::config(
                "solver.vi_tol",
                format!("{} must be positive", s.vi_tol),
            ));
        }
        Ok(())
    }

    /// Material parameters in SI base units.
    pub fn material_params(&self) -> MaterialParams {
        let m = &self.material;
        MaterialParams {
            rho: m.rho,
            k_v: m.k_v_mpa_s * 1e6,
            c: m.c_mj * 1e6,
            upsilon: m.upsilon_mpa * 1e6,
            kappa: m.kappa_mpa * 1e6,
            lambda_th: m.lambda_w_s,
            heat_cap: m.heat_capacity_mj * 1e6,
            latent_heat: m.latent_heat_mj * 1e6,
            t0: m.t0_k,
            variant: self.phase_variant(),
        }
    }

    pub fn phase_variant(&self) -> PhaseVariant {
        if self.material.variant == "reduced" {
            PhaseVariant::ReducedDissipation
        } else {
            PhaseVariant::UniformDissipation
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let spec = BoundarySpec {
            gamma0: BoundaryRegion::Bottom,
            gamma1: BoundaryRegion::TopCentered {
                fraction: self.mesh.gamma1_fraction,
            },
        };
        build_structured_mesh(
            self.mesh.width_mm * 1e-3,
            self.mesh.height_mm * 1e-3,
            self.mesh.nx,
            self.mesh.ny,
            spec,
        )
    }

    pub fn percussion_load(&self) -> PercussionLoad {
        PercussionLoad::inclined(
            self.load.magnitude_mpa_s * 1e6,
            self.load.angle_deg.to_radians(),
        )
    }

    pub fn pre_state(&self, mesh: &Mesh) -> PreState {
        PreState::uniform_with(mesh, self.initial.t_minus_k, self.initial.beta_minus)
    }

    pub fn thermal_bc(&self) -> ThermalBC {
        match self.thermal_bc.kind.as_str() {
            "robin" => ThermalBC::Robin {
                h_coeff: self.thermal_bc.h_coeff,
                t_ext: self.thermal_bc.t_ext_k,
            },
            _ => ThermalBC::Adiabatic,
        }
    }

    pub fn fixed_point(&self) -> FixedPointConfig {
        FixedPointConfig {
            tol: self.solver.fp_tol,
            max_iter: self.solver.fp_max_iter,
            relaxation: self.solver.relaxation,
        }
    }
}
