//! Command-line driver.
//!
//! - `collide <config> [--out DIR] [--prescribed-diss W]` runs the coupled
//!   solve and writes fields.csv, fields.vtk and diagnostics.json.
//! - `closed-form <config> --diss W` evaluates the homogeneous solution.
//! - `sweep <config> --diss-min A --diss-max B --samples N` prints a CSV
//!   table of the closed form over a dissipated-work range.
//! - `mms --levels K` prints manufactured-solution errors and rates.
//! - `project x y` prints the projection of a point onto the phase triangle.
//!
//! Exit codes: 0 on success, 1 on solver failure or non-convergence,
//! 2 on usage or configuration errors.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::closedform::{solve_0d, sweep_0d, ClosedFormInput};
use crate::config::RunConfig;
use crate::coupling::{solve_collision_detailed, CollisionSource};
use crate::error::Error;
use crate::mms::run_mms;
use crate::output;
use crate::phase::project_onto_k;
use crate::velocity::DissipationField;

#[derive(Debug, Parser)]
#[command(
    name = "smac",
    version,
    about = "Post-collision state of a shape-memory-alloy body under percussion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the coupled collision solve described by a TOML config.
    Collide {
        config: PathBuf,
        /// Directory receiving fields.csv, fields.vtk and diagnostics.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Bypass the velocity solve and inject this uniform dissipated
        /// work (J/m^3).
        #[arg(long, allow_negative_numbers = true)]
        prescribed_diss: Option<f64>,
    },
    /// Evaluate the homogeneous closed form at one dissipated-work value.
    ClosedForm {
        config: PathBuf,
        /// Dissipated work density (J/m^3).
        #[arg(long, allow_negative_numbers = true)]
        diss: f64,
    },
    /// Print the closed-form response over a dissipated-work range as CSV.
    Sweep {
        config: PathBuf,
        /// Range start (J/m^3).
        #[arg(long, allow_negative_numbers = true)]
        diss_min: f64,
        /// Range end (J/m^3).
        #[arg(long, allow_negative_numbers = true)]
        diss_max: f64,
        #[arg(long)]
        samples: usize,
    },
    /// Manufactured-solution convergence report for the field solvers.
    Mms {
        /// Number of uniform refinements starting from an 8x8 mesh.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Project a point onto the admissible phase triangle.
    Project {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
    },
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn cli_main(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::Collide {
            config,
            out,
            prescribed_diss,
        } => run_collide(&config, &out, prescribed_diss),
        Command::ClosedForm { config, diss } => run_closed_form(&config, diss),
        Command::Sweep {
            config,
            diss_min,
            diss_max,
            samples,
        } => run_sweep(&config, diss_min, diss_max, samples),
        Command::Mms { levels } => run_mms_report(levels),
        Command::Project { x, y } => {
            let p = project_onto_k([x, y]);
            println!("({:.16e}, {:.16e})", p[0], p[1]);
            0
        }
    }
}

/// Exit code for an error raised after the configuration was accepted.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn load_config(path: &Path) -> Result<RunConfig, i32> {
    match RunConfig::load_file(path) {
        Ok(cfg) => Ok(cfg),
        Err(err) => {
            eprintln!("error: {err}");
            Err(2)
        }
    }
}

fn run_collide(config: &Path, out: &Path, prescribed_diss: Option<f64>) -> i32 {
    let cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let mesh = match cfg.build_mesh() {
        Ok(mesh) => mesh,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    let params = cfg.material_params();
    let pre = cfg.pre_state(&mesh);
    let load = cfg.percussion_load();

    let prescribed = match prescribed_diss {
        Some(w) => match DissipationField::uniform(&mesh, w) {
            Ok(d) => Some(d),
            Err(err) => {
                eprintln!("error: {err}");
                return 2;
            }
        },
        None => None,
    };
    let source = match &prescribed {
        Some(d) => CollisionSource::Prescribed(d),
        None => CollisionSource::Percussion(&load),
    };

    let result = match solve_collision_detailed(
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
    ) {
        Ok(result) => result,
        Err(err) => {
            eprintln!("error: {err}");
            return exit_code(&err);
        }
    };

    let csv_path = out.join("fields.csv");
    let vtk_path = out.join("fields.vtk");
    let diag_path = out.join("diagnostics.json");
    let written = output::write_csv(&csv_path, &mesh, &result)
        .and_then(|_| output::write_vtk(&vtk_path, &mesh, &result))
        .and_then(|_| output::write_diagnostics(&diag_path, &result));
    if let Err(err) = written {
        eprintln!("error: {err}");
        return 1;
    }

    let diag = &result.diagnostics;
    println!(
        "collide: {} nodes, {} fixed-point iterations, converged = {}",
        mesh.node_count(),
        diag.iterations,
        diag.converged
    );
    println!(
        "  max T+ = {:.6} K, max beta3+ = {:.6}, dissipated work = {:.6e} J/m",
        result.t_plus.values.iter().cloned().fold(f64::MIN, f64::max),
        result.beta_plus[2]
            .values
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max),
        diag.dissipated_total
    );
    println!(
        "  wrote {}, {}, {}",
        csv_path.display(),
        vtk_path.display(),
        diag_path.display()
    );
    if !diag.converged {
        eprintln!(
            "collide: fixed point stopped after {} iterations with update {:.3e} above tol {:.3e}",
            diag.iterations, diag.final_update, cfg.solver.fp_tol
        );
        return 1;
    }
    0
}

fn run_closed_form(config: &Path, diss: f64) -> i32 {
    let cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let params = cfg.material_params();
    let input = ClosedFormInput::new(cfg.initial.t_minus_k, cfg.initial.beta_minus, diss, &params);
    match solve_0d(&input) {
        Ok(sol) => {
            println!("regime = {}", sol.regime.label());
            println!("T_plus = {:.16e}", sol.t_plus);
            println!(
                "beta_plus = ({:.16e}, {:.16e}, {:.16e})",
                sol.beta_plus[0], sol.beta_plus[1], sol.beta_plus[2]
            );
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn run_sweep(config: &Path, diss_min: f64, diss_max: f64, samples: usize) -> i32 {
    let cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let params = cfg.material_params();
    let rows = match sweep_0d(cfg.initial.t_minus_k, &params, diss_min, diss_max, samples) {
        Ok(rows) => rows,
        Err(err) => {
            eprintln!("error: {err}");
            return exit_code(&err);
        }
    };
    println!("diss,T_plus,beta3_plus,regime");
    for row in &rows {
        println!(
            "{:.16e},{:.16e},{:.16e},{}",
            row.diss_work,
            row.t_plus,
            row.beta3_plus,
            row.regime.label()
        );
    }
    0
}

fn run_mms_report(levels: usize) -> i32 {
    let report = match run_mms(levels) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: {err}");
            return exit_code(&err);
        }
    };
    println!("n,velocity_L2,thermal_L2");
    for (k, n) in report.sizes.iter().enumerate() {
        println!(
            "{},{:.6e},{:.6e}",
            n, report.velocity_errors[k], report.thermal_errors[k]
        );
    }
    let velocity_rates = report.velocity_rates();
    let thermal_rates = report.thermal_rates();
    for k in 0..velocity_rates.len() {
        println!(
            "rate {}->{}: velocity {:.3}, thermal {:.3}",
            report.sizes[k],
            report.sizes[k + 1],
            velocity_rates[k],
            thermal_rates[k]
        );
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn argv(line: &str) -> Vec<String> {
        line.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn unknown_subcommand_exits_2() {
        assert_eq!(cli_main(&argv("smac frobnicate")), 2);
        assert_eq!(cli_main(&argv("smac")), 2);
    }

    #[test]
    fn help_and_version_exit_0() {
        assert_eq!(cli_main(&argv("smac --help")), 0);
        assert_eq!(cli_main(&argv("smac --version")), 0);
        assert_eq!(cli_main(&argv("smac collide --help")), 0);
    }

    #[test]
    fn project_accepts_negative_coordinates() {
        assert_eq!(cli_main(&argv("smac project -0.25 0.5")), 0);
        assert_eq!(cli_main(&argv("smac project 2 2")), 0);
    }

    #[test]
    fn missing_config_exits_2() {
        assert_eq!(
            cli_main(&argv("smac closed-form /no/such/file.toml --diss 0")),
            2
        );
    }

    #[test]
    fn collide_prescribed_writes_outputs() {
        let dir = tempfile::tempdir().expect("tempdir");
        let config_path = dir.path().join("tiny.toml");
        fs::write(
            &config_path,
            "[mesh]\nnx = 4\nny = 4\n\n[solver]\nfp_max_iter = 80\n",
        )
        .expect("write config");
        let out_dir = dir.path().join("results");
        let line = format!(
            "smac collide {} --out {} --prescribed-diss 2.8e8",
            config_path.display(),
            out_dir.display()
        );
        assert_eq!(cli_main(&argv(&line)), 0, "collide run failed: {line}");
        for name in ["fields.csv", "fields.vtk", "diagnostics.json"] {
            assert!(
                out_dir.join(name).is_file(),
                "missing output file {name} in {}",
                out_dir.display()
            );
        }
    }

    #[test]
    fn negative_prescribed_diss_exits_2() {
        let dir = tempfile::tempdir().expect("tempdir");
        let config_path = dir.path().join("tiny.toml");
        fs::write(&config_path, "[mesh]\nnx = 2\nny = 2\n").expect("write config");
        let line = format!(
            "smac collide {} --out {} --prescribed-diss -1.0",
            config_path.display(),
            dir.path().join("o").display()
        );
        assert_eq!(cli_main(&argv(&line)), 2);
    }
}
