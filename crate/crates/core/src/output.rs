//! Result writers: nodal CSV, legacy VTK, and a JSON diagnostics record.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use crate::coupling::CollisionResult;
use crate::error::{Error, Result};
use crate::linalg::SolveReport;
use crate::mesh::Mesh;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// One row per node: coordinates, velocity jump, temperature, fractions,
/// and the nodal dissipated-work density.
pub fn write_csv(path: impl AsRef<Path>, mesh: &Mesh, result: &CollisionResult) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    writeln!(w, "x,y,Ux,Uy,T_plus,beta1,beta2,beta3,diss").map_err(io_err)?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        let u = result.u_plus.node(i);
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p[0],
            p[1],
            u[0],
            u[1],
            result.t_plus.values[i],
            result.beta_plus[0].values[i],
            result.beta_plus[1].values[i],
            result.beta_plus[2].values[i],
            result.diss.nodal.values[i],
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

/// Legacy ASCII VTK unstructured grid with point data for the scalar
/// fields and the velocity jump.
pub fn write_vtk(path: impl AsRef<Path>, mesh: &Mesh, result: &CollisionResult) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);

    writeln!(w, "# vtk DataFile Version 3.0").map_err(io_err)?;
    writeln!(w, "post-collision fields").map_err(io_err)?;
    writeln!(w, "ASCII").map_err(io_err)?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID").map_err(io_err)?;

    writeln!(w, "POINTS {} double", mesh.node_count()).map_err(io_err)?;
    for p in &mesh.nodes {
        writeln!(w, "{:.9e} {:.9e} 0.0", p[0], p[1]).map_err(io_err)?;
    }

    let m = mesh.triangle_count();
    writeln!(w, "CELLS {m} {}", 4 * m).map_err(io_err)?;
    for tri in &mesh.triangles {
        writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2]).map_err(io_err)?;
    }
    writeln!(w, "CELL_TYPES {m}").map_err(io_err)?;
    for _ in 0..m {
        writeln!(w, "5").map_err(io_err)?;
    }

    writeln!(w, "POINT_DATA {}", mesh.node_count()).map_err(io_err)?;
    let scalars: [(&str, &[f64]); 5] = [
        ("T_plus", &result.t_plus.values),
        ("beta1", &result.beta_plus[0].values),
        ("beta2", &result.beta_plus[1].values),
        ("beta3", &result.beta_plus[2].values),
        ("diss", &result.diss.nodal.values),
    ];
    for (name, values) in scalars {
        writeln!(w, "SCALARS {name} double 1").map_err(io_err)?;
        writeln!(w, "LOOKUP_TABLE default").map_err(io_err)?;
        for v in values {
            writeln!(w, "{v:.9e}").map_err(io_err)?;
        }
    }
    writeln!(w, "VECTORS U_plus double").map_err(io_err)?;
    for i in 0..mesh.node_count() {
        let u = result.u_plus.node(i);
        writeln!(w, "{:.9e} {:.9e} 0.0", u[0], u[1]).map_err(io_err)?;
    }
    finish(w, path)
}

fn report_json(report: &SolveReport) -> serde_json::Value {
    json!({
        "iterations": report.iterations,
        "residual": report.residual,
        "converged": report.converged,
    })
}

/// Machine-readable run record.
pub fn write_diagnostics(path: impl AsRef<Path>, result: &CollisionResult) -> Result<()> {
    let path = path.as_ref();
    let d = &result.diagnostics;
    let t_max = result
        .t_plus
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let beta3_max = result.beta_plus[2]
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let record = json!({
        "fixed_point": {
            "iterations": d.iterations,
            "converged": d.converged,
            "final_update": d.final_update,
            "update_norms": d.update_norms,
            "relaxation_final": d.relaxation_final,
        },
        "velocity": d.velocity_report.as_ref().map(report_json),
        "thermal": report_json(&d.thermal_report),
        "phase": {
            "report": report_json(&d.phase_report),
            "load_inf": d.phase_load_inf,
            "kkt_weak": d.phase_kkt_weak,
            "feasibility": d.phase_feasibility,
        },
        "invariants": {
            "iterate_feasibility_max": d.iterate_feasibility_max,
            "iterate_mass_balance_max": d.iterate_mass_balance_max,
            "energy_residual": d.energy_residual,
            "negative_temperature": d.negative_temperature,
        },
        "summary": {
            "dissipated_total": d.dissipated_total,
            "t_plus_max": t_max,
            "beta3_plus_max": beta3_max,
        },
    });
    let mut w = create(path)?;
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Numerical(format!("diagnostics serialization failed: {e}")))?;
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    w.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(w, path)
}
