//! Python bindings for the collision solver.
//!
//! The module exposes the homogeneous closed-form solutions, the fraction
//! projection, and the full finite-element collision run:
//!
//! - `Material`: parameter set in SI units, defaulting to the Ni-Ti values.
//! - `project_k(x, y)`: Euclidean projection onto the fraction triangle.
//! - `mixture_window`, `solve_0d`, `sweep_0d`: homogeneous post-collision states.
//! - `run_collision(config_path, ...)`: collision run driven by a TOML file,
//!   returning a summary dict with the nodal result arrays.
//!
//! Errors map to `ValueError` for rejected inputs and `RuntimeError` for
//! solver failures.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sma_collide::closedform::{self, ClosedFormInput};
use sma_collide::config::RunConfig;
use sma_collide::coupling::{solve_collision_detailed, CollisionSource};
use sma_collide::output;
use sma_collide::params::{MaterialParams, PhaseVariant};
use sma_collide::phase;
use sma_collide::velocity::DissipationField;
use sma_collide::Error;

fn to_py(err: Error) -> PyErr {
    match &err {
        Error::InvalidArgument(_) | Error::Config { .. } => PyValueError::new_err(err.to_string()),
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Material parameters in SI base units (kg/m^3, Pa.s, J/m^3, Pa,
/// W.s/(K.m), J/(m^3.K), K). The defaults are the Ni-Ti set.
#[pyclass(module = "sma_collide_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct Material {
    #[pyo3(get)]
    pub rho: f64,
    #[pyo3(get)]
    pub k_v: f64,
    #[pyo3(get)]
    pub c: f64,
    #[pyo3(get)]
    pub upsilon: f64,
    #[pyo3(get)]
    pub kappa: f64,
    #[pyo3(get)]
    pub lambda_th: f64,
    #[pyo3(get)]
    pub heat_cap: f64,
    #[pyo3(get)]
    pub latent_heat: f64,
    #[pyo3(get)]
    pub t0: f64,
    /// Dissipation variant: "uniform" or "reduced".
    #[pyo3(get)]
    pub variant: String,
}

impl Material {
    fn params(&self) -> PyResult<MaterialParams> {
        let variant = match self.variant.as_str() {
            "uniform" => PhaseVariant::UniformDissipation,
            "reduced" => PhaseVariant::ReducedDissipation,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown variant {other:?}, expected \"uniform\" or \"reduced\""
                )))
            }
        };
        let p = MaterialParams {
            rho: self.rho,
            k_v: self.k_v,
            c: self.c,
            upsilon: self.upsilon,
            kappa: self.kappa,
            lambda_th: self.lambda_th,
            heat_cap: self.heat_cap,
            latent_heat: self.latent_heat,
            t0: self.t0,
            variant,
        };
        p.validate().map_err(to_py)?;
        Ok(p)
    }
}

#[pymethods]
impl Material {
    #[new]
    #[pyo3(signature = (rho=6500.0, k_v=1e6, c=4e6, upsilon=5e5, kappa=5e5,
        lambda_th=18.0, heat_cap=5.4e6, latent_heat=8e7, t0=332.75, variant=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rho: f64,
        k_v: f64,
        c: f64,
        upsilon: f64,
        kappa: f64,
        lambda_th: f64,
        heat_cap: f64,
        latent_heat: f64,
        t0: f64,
        variant: Option<String>,
    ) -> PyResult<Self> {
        let material = Material {
            rho,
            k_v,
            c,
            upsilon,
            kappa,
            lambda_th,
            heat_cap,
            latent_heat,
            t0,
            variant: variant.unwrap_or_else(|| "uniform".to_string()),
        };
        material.params()?;
        Ok(material)
    }

    fn __repr__(&self) -> String {
        format!(
            "Material(rho={}, k_v={}, c={}, upsilon={}, kappa={}, lambda_th={}, \
             heat_cap={}, latent_heat={}, t0={}, variant={:?})",
            self.rho,
            self.k_v,
            self.c,
            self.upsilon,
            self.kappa,
            self.lambda_th,
            self.heat_cap,
            self.latent_heat,
            self.t0,
            self.variant
        )
    }
}

fn resolve_params(material: Option<&Material>) -> PyResult<MaterialParams> {
    match material {
        Some(m) => m.params(),
        None => Ok(MaterialParams::nickel_titanium()),
    }
}

/// Euclidean projection of a fraction pair onto the triangle
/// {x >= 0, y >= 0, x + y <= 1}.
#[pyfunction]
fn project_k(x: f64, y: f64) -> (f64, f64) {
    let q = phase::project_onto_k([x, y]);
    (q[0], q[1])
}

/// Open interval of dissipated work densities (J/m^3) that produce a
/// Mixture regime from the cold two-martensite start.
#[pyfunction]
#[pyo3(signature = (t_minus, material=None))]
fn mixture_window(t_minus: f64, material: Option<Material>) -> PyResult<(f64, f64)> {
    let params = resolve_params(material.as_ref())?;
    Ok(closedform::mixture_window(t_minus, &params))
}

/// Homogeneous post-collision state for a symmetric martensite start.
///
/// Returns a dict with "regime", "t_plus" and "beta_plus".
#[pyfunction]
#[pyo3(signature = (t_minus, diss_work, beta_minus=(0.5, 0.5, 0.0), material=None))]
fn solve_0d<'py>(
    py: Python<'py>,
    t_minus: f64,
    diss_work: f64,
    beta_minus: (f64, f64, f64),
    material: Option<Material>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = resolve_params(material.as_ref())?;
    let input = ClosedFormInput::new(
        t_minus,
        [beta_minus.0, beta_minus.1, beta_minus.2],
        diss_work,
        &params,
    );
    let sol = closedform::solve_0d(&input).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("regime", sol.regime.label())?;
    d.set_item("t_plus", sol.t_plus)?;
    d.set_item(
        "beta_plus",
        (sol.beta_plus[0], sol.beta_plus[1], sol.beta_plus[2]),
    )?;
    Ok(d)
}

/// Tabulates the homogeneous solution over an evenly spaced range of
/// dissipated work densities. Returns a list of dicts, one per sample.
#[pyfunction]
#[pyo3(signature = (t_minus, diss_min, diss_max, samples, material=None))]
fn sweep_0d<'py>(
    py: Python<'py>,
    t_minus: f64,
    diss_min: f64,
    diss_max: f64,
    samples: usize,
    material: Option<Material>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let params = resolve_params(material.as_ref())?;
    let rows = closedform::sweep_0d(t_minus, &params, diss_min, diss_max, samples).map_err(to_py)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let d = PyDict::new(py);
        d.set_item("diss_work", row.diss_work)?;
        d.set_item("t_plus", row.t_plus)?;
        d.set_item("beta3_plus", row.beta3_plus)?;
        d.set_item("regime", row.regime.label())?;
        out.push(d);
    }
    Ok(out)
}

/// Runs the collision described by a TOML config file.
///
/// `prescribed_diss` skips the velocity solve and imposes a uniform
/// dissipated work density (J/m^3) instead. `write_outputs_to` writes the
/// CSV, VTK and diagnostics files into that directory.
///
/// Returns a dict with run metadata ("nodes", "converged", "iterations",
/// "regime_counts", "dissipated_total", "energy_residual") and the nodal
/// arrays ("x", "y", "t_plus", "beta1_plus", "beta2_plus", "beta3_plus",
/// "u_plus" as (ux, uy) pairs).
#[pyfunction]
#[pyo3(signature = (config_path, prescribed_diss=None, write_outputs_to=None))]
fn run_collision<'py>(
    py: Python<'py>,
    config_path: PathBuf,
    prescribed_diss: Option<f64>,
    write_outputs_to: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::load_file(&config_path).map_err(to_py)?;
    let mesh = cfg.build_mesh().map_err(to_py)?;
    let params = cfg.material_params();
    let pre = cfg.pre_state(&mesh);
    let load = cfg.percussion_load();
    let prescribed = match prescribed_diss {
        Some(value) => Some(DissipationField::uniform(&mesh, value).map_err(to_py)?),
        None => None,
    };
    let source = match &prescribed {
        Some(d) => CollisionSource::Prescribed(d),
        None => CollisionSource::Percussion(&load),
    };
    let result = solve_collision_detailed(
        &mesh,
        &params,
        &pre,
        source,
        cfg.thermal_bc(),
        cfg.fixed_point(),
        cfg.phase_variant(),
        cfg.solver.vi_tol,
        cfg.solver.lin_tol,
        None,
        None,
    )
    .map_err(to_py)?;

    if let Some(dir) = &write_outputs_to {
        output::write_csv(dir.join("fields.csv"), &mesh, &result)
            .and_then(|_| output::write_vtk(dir.join("fields.vtk"), &mesh, &result))
            .and_then(|_| output::write_diagnostics(dir.join("diagnostics.json"), &result))
            .map_err(to_py)?;
    }

    let n = mesh.node_count();
    let d = PyDict::new(py);
    d.set_item("nodes", n)?;
    d.set_item("converged", result.diagnostics.converged)?;
    d.set_item("iterations", result.diagnostics.iterations)?;
    d.set_item("final_update", result.diagnostics.final_update)?;
    d.set_item("dissipated_total", result.diagnostics.dissipated_total)?;
    d.set_item("energy_residual", result.diagnostics.energy_residual)?;
    d.set_item("x", mesh.nodes.iter().map(|p| p[0]).collect::<Vec<f64>>())?;
    d.set_item("y", mesh.nodes.iter().map(|p| p[1]).collect::<Vec<f64>>())?;
    d.set_item("t_plus", result.t_plus.values.clone())?;
    d.set_item("beta1_plus", result.beta_plus[0].values.clone())?;
    d.set_item("beta2_plus", result.beta_plus[1].values.clone())?;
    d.set_item("beta3_plus", result.beta_plus[2].values.clone())?;
    let u: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v = result.u_plus.node(i);
            (v[0], v[1])
        })
        .collect();
    d.set_item("u_plus", u)?;
    Ok(d)
}

#[pymodule]
fn sma_collide_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Material>()?;
    m.add_function(wrap_pyfunction!(project_k, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_window, m)?)?;
    m.add_function(wrap_pyfunction!(solve_0d, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_0d, m)?)?;
    m.add_function(wrap_pyfunction!(run_collision, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
