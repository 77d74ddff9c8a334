//! Full collision orchestration.
//!
//! - The velocity jump is solved once up front: the dissipated work depends
//!   only on the mechanical data, so the coupling runs one way from
//!   mechanics into the thermo-phase pair.
//! - Temperature and phase fractions are then iterated to a fixed point:
//!   thermal balance at the current fraction guess, phase inequality at the
//!   resulting temperature, optionally under-relaxed. The iteration starts
//!   from the pre-collision fractions.
//! - Convergence is measured on the unrelaxed fixed-point residual: the
//!   largest nodal |T_solved - T_iterate| / (1 + |T|) and |change in each
//!   fraction|, both below the tolerance.
//! - A prescribed-dissipation mode bypasses the velocity solve entirely and
//!   injects a given dissipated-work field.
//!
//! After convergence one extra thermal solve aligns the temperature with the
//! final fractions, and the constraint reactions are re-evaluated against
//! that final temperature.

use crate::error::{Error, Result};
use crate::fem::{assemble_scalar_mass, assemble_scalar_stiffness, boundary_length};
use crate::field::{ScalarField, VectorField};
use crate::linalg::{SolveReport, DEFAULT_LIN_TOL};
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::{MaterialParams, PhaseVariant};
use crate::phase::{
    evaluate_phase_state, solve_phase_vi_with, PhasePair, ReactionPair, DEFAULT_VI_TOL,
};
use crate::thermal::{energy_balance_residual, solve_thermal_with, ThermalBC};
use crate::velocity::{dissipated_work, solve_velocity_with, DissipationField, PercussionLoad};

/// State of the body immediately before the collision.
#[derive(Debug, Clone)]
pub struct PreState {
    pub u_minus: VectorField,
    /// Pre-collision temperature (K).
    pub t_minus: ScalarField,
    /// Pre-collision phase fractions (beta1, beta2, beta3).
    pub beta_minus: [ScalarField; 3],
}

impl PreState {
    /// Body at rest at a uniform temperature in the cold two-martensite
    /// mixture (1/2, 1/2, 0).
    pub fn uniform(mesh: &Mesh, t_minus: f64) -> Self {
        Self::uniform_with(mesh, t_minus, [0.5, 0.5, 0.0])
    }

    /// Body at rest at a uniform temperature with given uniform fractions.
    pub fn uniform_with(mesh: &Mesh, t_minus: f64, beta: [f64; 3]) -> Self {
        let n = mesh.node_count();
        PreState {
            u_minus: VectorField::zeros(n),
            t_minus: ScalarField::constant(n, t_minus),
            beta_minus: [
                ScalarField::constant(n, beta[0]),
                ScalarField::constant(n, beta[1]),
                ScalarField::constant(n, beta[2]),
            ],
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.node_count();
        if self.u_minus.node_count() != n {
            return Err(Error::invalid(format!(
                "pre-collision velocity has {} nodes, mesh has {n}",
                self.u_minus.node_count()
            )));
        }
        if self.t_minus.len() != n {
            return Err(Error::invalid(format!(
                "pre-collision temperature has {} nodes, mesh has {n}",
                self.t_minus.len()
            )));
        }
        for (i, t) in self.t_minus.values.iter().enumerate() {
            if !(*t > 0.0) {
                return Err(Error::invalid(format!(
                    "pre-collision temperature {t} at node {i} must be positive"
                )));
            }
        }
        for (c, f) in self.beta_minus.iter().enumerate() {
            if f.len() != n {
                return Err(Error::invalid(format!(
                    "pre-collision fraction {} has {} nodes, mesh has {n}",
                    c + 1,
                    f.len()
                )));
            }
        }
        Ok(())
    }
}

/// Controls of the thermo-phase fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointConfig {
    /// Threshold on the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Under-relaxation factor in (0, 1]; halved automatically when the
    /// update norm grows for two consecutive iterations.
    pub relaxation: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tol: 1e-8,
            max_iter: 200,
            relaxation: 1.0,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!(
                "fixed-point tolerance {} must be positive",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("fixed-point iteration budget must be at least 1"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::invalid(format!(
                "relaxation factor {} must lie in (0, 1]",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Record of one full collision solve.
#[derive(Debug, Clone)]
pub struct CouplingDiagnostics {
    /// Outer fixed-point iterations performed.
    pub iterations: usize,
    pub converged: bool,
    /// Fixed-point residual after each outer iteration.
    pub update_norms: Vec<f64>,
    pub final_update: f64,
    pub relaxation_final: f64,
    pub velocity_report: Option<SolveReport>,
    /// Report of the closing thermal solve.
    pub thermal_report: SolveReport,
    /// Report of the last phase solve inside the loop.
    pub phase_report: SolveReport,
    /// Largest magnitude of the final phase load vector (weak units).
    pub phase_load_inf: f64,
    /// Stationarity violation of the returned fractions against the final
    /// temperature (weak units).
    pub phase_kkt_weak: f64,
    pub phase_feasibility: f64,
    /// Worst nodal K-violation seen over all outer iterates.
    pub iterate_feasibility_max: f64,
    /// Worst nodal |beta1 + beta2 + beta3 - 1| seen over all outer iterates.
    pub iterate_mass_balance_max: f64,
    pub negative_temperature: bool,
    /// Relative global energy balance defect; None under Robin exchange.
    pub energy_residual: Option<f64>,
    /// Total dissipated work over the body (J).
    pub dissipated_total: f64,
}

/// Post-collision fields.
#[derive(Debug, Clone)]
pub struct CollisionResult {
    pub u_plus: VectorField,
    pub t_plus: ScalarField,
    /// (beta1+, beta2+, beta3+) nodal fields.
    pub beta_plus: [ScalarField; 3],
    pub reactions: ReactionPair,
    pub diss: DissipationField,
    pub diagnostics: CouplingDiagnostics,
}

/// Where the dissipated work comes from.
pub enum CollisionSource<'a> {
    /// Solve the velocity jump under this percussion and differentiate it.
    Percussion(&'a PercussionLoad),
    /// Take this dissipated-work field as given and skip the velocity solve.
    Prescribed(&'a DissipationField),
}

/// Solves the full collision: velocity jump, then the thermo-phase fixed
/// point. Non-convergence of the fixed point is reported in the
/// diagnostics, not as an error.
pub fn solve_collision(
    mesh: &Mesh,
    params: &MaterialParams,
    pre: &PreState,
    load: &PercussionLoad,
    bc: ThermalBC,
    fp: FixedPointConfig,
    variant: PhaseVariant,
) -> Result<CollisionResult> {
    solve_collision_detailed(
        mesh,
        params,
        pre,
        CollisionSource::Percussion(load),
        bc,
        fp,
        variant,
        DEFAULT_VI_TOL,
        DEFAULT_LIN_TOL,
        None,
        None,
    )
}

/// As `solve_collision` with the dissipated work prescribed directly.
pub fn solve_collision_prescribed(
    mesh: &Mesh,
    params: &MaterialParams,
    pre: &PreState,
    diss: &DissipationField,
    bc: ThermalBC,
    fp: FixedPointConfig,
    variant: PhaseVariant,
) -> Result<CollisionResult> {
    solve_collision_detailed(
        mesh,
        params,
        pre,
        CollisionSource::Prescribed(diss),
        bc,
        fp,
        variant,
        DEFAULT_VI_TOL,
        DEFAULT_LIN_TOL,
        None,
        None,
    )
}

/// Full-control entry point: explicit inner tolerances, optional phase
/// boundary flux data, and an optional starting guess for the fractions.
#[allow(clippy::too_many_arguments)]
pub fn solve_collision_detailed(
    mesh: &Mesh,
    params: &MaterialParams,
    pre: &PreState,
    source: CollisionSource,
    bc: ThermalBC,
    fp: FixedPointConfig,
    variant: PhaseVariant,
    vi_tol: f64,
    lin_tol: f64,
    h_flux: Option<[f64; 2]>,
    beta_guess: Option<[&ScalarField; 3]>,
) -> Result<CollisionResult> {
    params.validate()?;
    pre.validate(mesh)?;
    fp.validate()?;
    let n = mesh.node_count();

    let (u_plus, velocity_report, diss) = match source {
        CollisionSource::Percussion(load) => {
            let (u, report) =
                solve_velocity_with(mesh, params.rho, params.k_v, load, &pre.u_minus, lin_tol, 0)?;
            let d = dissipated_work(mesh, &u, &pre.u_minus, params.k_v)?;
            (u, Some(report), d)
        }
        CollisionSource::Prescribed(d) => {
            if d.per_triangle.len() != mesh.triangle_count() || d.nodal.len() != n {
                return Err(Error::invalid(format!(
                    "prescribed dissipation covers {} triangles and {} nodes, mesh has {} and {}",
                    d.per_triangle.len(),
                    d.nodal.len(),
                    mesh.triangle_count(),
                    n
                )));
            }
            (pre.u_minus.clone(), None, d.clone())
        }
    };

    let beta_minus_refs = [
        &pre.beta_minus[0],
        &pre.beta_minus[1],
        &pre.beta_minus[2],
    ];
    let init = match beta_guess {
        Some(g) => [g[1].clone(), g[2].clone()],
        None => [pre.beta_minus[1].clone(), pre.beta_minus[2].clone()],
    };
    let mut chi_iter = PhasePair {
        chi2: init[0].clone(),
        chi3: init[1].clone(),
    };
    let mut t_iter = pre.t_minus.clone();

    let mut omega = fp.relaxation;
    let mut update_norms: Vec<f64> = Vec::new();
    let mut increases = 0usize;
    let mut converged = false;
    let mut negative_temperature = false;
    let mut feas_max: f64 = chi_iter.feasibility_violation();
    let mut mass_max: f64 = 0.0;
    let mut last_phase_report: Option<SolveReport> = None;
    let mut iterations = 0usize;

    for k in 1..=fp.max_iter {
        iterations = k;
        let thermal = solve_thermal_with(
            mesh,
            &pre.t_minus,
            &chi_iter.chi3,
            &pre.beta_minus[2],
            &diss,
            params,
            bc,
            lin_tol,
            0,
        )?;
        negative_temperature |= thermal.negative_temperature;
        let t_sol = thermal.t_plus;

        let t_new = ScalarField::from_values(
            t_iter
                .values
                .iter()
                .zip(&t_sol.values)
                .map(|(cur, sol)| (1.0 - omega) * cur + omega * sol)
                .collect(),
        );

        let (chi_sol, _, info) = solve_phase_vi_with(
            mesh,
            &t_new,
            beta_minus_refs,
            params,
            variant,
            vi_tol,
            0,
            h_flux,
            Some(&chi_iter),
            lin_tol * 0.1,
        )?;
        if !info.report.converged {
            return Err(Error::Numerical(format!(
                "phase solve stalled at outer iteration {k} with normalized residual {}",
                info.report.residual
            )));
        }

        let mut t_update: f64 = 0.0;
        for (sol, cur) in t_sol.values.iter().zip(&t_iter.values) {
            t_update = t_update.max((sol - cur).abs() / (1.0 + sol.abs()));
        }
        let mut beta_update: f64 = 0.0;
        for i in 0..n {
            let d2 = (chi_sol.chi2.values[i] - chi_iter.chi2.values[i]).abs();
            let d3 = (chi_sol.chi3.values[i] - chi_iter.chi3.values[i]).abs();
            let d1 = ((chi_sol.chi2.values[i] + chi_sol.chi3.values[i])
                - (chi_iter.chi2.values[i] + chi_iter.chi3.values[i]))
                .abs();
            beta_update = beta_update.max(d2).max(d3).max(d1);
        }
        let update = t_update.max(beta_update);
        update_norms.push(update);

        let chi_new = PhasePair {
            chi2: ScalarField::from_values(
                (0..n)
                    .map(|i| {
                        (1.0 - omega) * chi_iter.chi2.values[i] + omega * chi_sol.chi2.values[i]
                    })
                    .collect(),
            ),
            chi3: ScalarField::from_values(
                (0..n)
                    .map(|i| {
                        (1.0 - omega) * chi_iter.chi3.values[i] + omega * chi_sol.chi3.values[i]
                    })
                    .collect(),
            ),
        };

        feas_max = feas_max.max(chi_new.feasibility_violation());
        let beta1 = chi_new.beta1();
        for i in 0..n {
            let sum = beta1.values[i] + chi_new.chi2.values[i] + chi_new.chi3.values[i];
            mass_max = mass_max.max((sum - 1.0).abs());
        }

        t_iter = t_new;
        chi_iter = chi_new;
        last_phase_report = Some(info.report);

        if update_norms.len() >= 2 && update > update_norms[update_norms.len() - 2] {
            increases += 1;
            if increases >= 2 {
                omega *= 0.5;
                increases = 0;
            }
        } else {
            increases = 0;
        }

        if update <= fp.tol {
            converged = true;
            break;
        }
    }

    let final_thermal = solve_thermal_with(
        mesh,
        &pre.t_minus,
        &chi_iter.chi3,
        &pre.beta_minus[2],
        &diss,
        params,
        bc,
        lin_tol,
        0,
    )?;
    negative_temperature |= final_thermal.negative_temperature;
    let t_plus = final_thermal.t_plus;

    let (reactions, eval_info) = evaluate_phase_state(
        mesh,
        &t_plus,
        beta_minus_refs,
        &chi_iter,
        params,
        variant,
        h_flux,
    )?;

    let energy_residual = match bc {
        ThermalBC::Adiabatic => Some(energy_balance_residual(
            mesh,
            &pre.t_minus,
            &t_plus,
            &pre.beta_minus[2],
            &chi_iter.chi3,
            &diss,
            params,
        )?),
        ThermalBC::Robin { .. } => None,
    };

    let dissipated_total = diss.total(mesh);
    let beta1 = chi_iter.beta1();
    let diagnostics = CouplingDiagnostics {
        iterations,
        converged,
        final_update: update_norms.last().copied().unwrap_or(0.0),
        update_norms,
        relaxation_final: omega,
        velocity_report,
        thermal_report: final_thermal.report,
        phase_report: last_phase_report.expect("the fixed-point loop runs at least once"),
        phase_load_inf: eval_info.load_inf,
        phase_kkt_weak: eval_info.kkt_weak,
        phase_feasibility: eval_info.feasibility,
        iterate_feasibility_max: feas_max,
        iterate_mass_balance_max: mass_max,
        negative_temperature,
        energy_residual,
        dissipated_total,
    };

    Ok(CollisionResult {
        u_plus,
        t_plus,
        beta_plus: [beta1, chi_iter.chi2, chi_iter.chi3],
        reactions,
        diss,
        diagnostics,
    })
}

/// Mechanical and thermal data of one stability-probe run.
#[derive(Debug, Clone)]
pub struct ProbeData {
    pub load: PercussionLoad,
    /// Uniform extra dissipated work added over the body (J/m^3).
    pub extra_source: f64,
    /// Constant phase boundary flux data for the two fractions.
    pub h_flux: [f64; 2],
}

impl ProbeData {
    pub fn new(load: PercussionLoad) -> Self {
        ProbeData {
            load,
            extra_source: 0.0,
            h_flux: [0.0, 0.0],
        }
    }
}

/// Ratio of the solution distance to the data distance for two collision
/// runs: (|T1 - T2|_V + sum |chi_i,1 - chi_i,2|_V) over the weighted data
/// differences, with |v|_V the discrete H1 norm sqrt(v' (A + M) v).
///
/// Both runs must converge; identical data is rejected.
#[allow(clippy::too_many_arguments)]
pub fn stability_probe(
    mesh: &Mesh,
    params: &MaterialParams,
    pre: &PreState,
    bc: ThermalBC,
    fp: FixedPointConfig,
    variant: PhaseVariant,
    first: &ProbeData,
    second: &ProbeData,
) -> Result<f64> {
    let dir1 = first.load.direction();
    let dir2 = second.load.direction();
    let dg = {
        let gx = first.load.magnitude * dir1[0] - second.load.magnitude * dir2[0];
        let gy = first.load.magnitude * dir1[1] - second.load.magnitude * dir2[1];
        (gx * gx + gy * gy).sqrt()
    };
    let dh = (first.h_flux[0] - second.h_flux[0]).abs()
        + (first.h_flux[1] - second.h_flux[1]).abs();
    let df = (first.extra_source - second.extra_source).abs();

    let gamma1_len = boundary_length(mesh, &[BoundaryTag::Gamma1]);
    let perimeter = boundary_length(
        mesh,
        &[BoundaryTag::Gamma0, BoundaryTag::Gamma1, BoundaryTag::GammaFree],
    );
    let area = mesh.total_area();
    let den = dg * gamma1_len.sqrt() + dh * perimeter.sqrt() + df * area.sqrt();
    if den == 0.0 {
        return Err(Error::invalid(
            "stability probe needs two distinct data sets, got identical loads, sources, and fluxes",
        ));
    }

    let run = |data: &ProbeData| -> Result<(ScalarField, ScalarField, ScalarField)> {
        let (u, _) =
            solve_velocity_with(mesh, params.rho, params.k_v, &data.load, &pre.u_minus, DEFAULT_LIN_TOL, 0)?;
        let base = dissipated_work(mesh, &u, &pre.u_minus, params.k_v)?;
        let combined = DissipationField::from_triangle_values(
            mesh,
            base.per_triangle
                .iter()
                .map(|v| v + data.extra_source)
                .collect(),
        )?;
        let result = solve_collision_detailed(
            mesh,
            params,
            pre,
            CollisionSource::Prescribed(&combined),
            bc,
            fp,
            variant,
            DEFAULT_VI_TOL,
            DEFAULT_LIN_TOL,
            Some(data.h_flux),
            None,
        )?;
        if !result.diagnostics.converged {
            return Err(Error::Numerical(format!(
                "stability probe run did not converge within {} iterations, last update {}",
                result.diagnostics.iterations, result.diagnostics.final_update
            )));
        }
        let [_, chi2, chi3] = result.beta_plus;
        Ok((result.t_plus, chi2, chi3))
    };

    let (t1, c21, c31) = run(first)?;
    let (t2, c22, c32) = run(second)?;

    let stiff = assemble_scalar_stiffness(mesh)?;
    let mass = assemble_scalar_mass(mesh, false)?;
    let v_norm = |a: &ScalarField, b: &ScalarField| -> f64 {
        let d: Vec<f64> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x - y)
            .collect();
        let ad = stiff.matvec(&d);
        let md = mass.matvec(&d);
        let mut acc = 0.0;
        for i in 0..d.len() {
            acc += d[i] * (ad[i] + md[i]);
        }
        acc.max(0.0).sqrt()
    };
    let numerator = v_norm(&t1, &t2) + v_norm(&c21, &c22) + v_norm(&c31, &c32);
    Ok(numerator / den)
}
