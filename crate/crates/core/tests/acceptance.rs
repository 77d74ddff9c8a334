//! Acceptance gate: one test per criterion, tolerances pinned in place.
//!
//! The full-scale collision scenario (100x100 mesh, inclined 20 MPa.s
//! percussion on a cold Ni-Ti square) is solved once and shared between
//! the constraint, energy-balance, and field-structure criteria.
//!
//! Criteria with runtime budgets assert them with `Instant`; each test
//! prints one PASS line with the measured margins.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sma_collide::closedform::{
    brute_force_0d, mixture_window, solve_0d, sweep_0d, ClosedFormInput, Regime,
};
use sma_collide::config::RunConfig;
use sma_collide::coupling::{
    solve_collision_detailed, stability_probe, CollisionResult, CollisionSource, FixedPointConfig,
    PreState, ProbeData,
};
use sma_collide::field::ScalarField;
use sma_collide::mesh::{build_structured_mesh, BoundarySpec, BoundaryTag, Mesh};
use sma_collide::mms::run_mms;
use sma_collide::params::{MaterialParams, PhaseVariant};
use sma_collide::thermal::ThermalBC;
use sma_collide::velocity::{DissipationField, PercussionLoad};
use sma_collide::Error;

fn ni_ti() -> MaterialParams {
    MaterialParams::nickel_titanium()
}

fn fig1_config() -> RunConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig1.toml");
    RunConfig::load_file(path).expect("configs/fig1.toml must load")
}

struct Fig1Run {
    mesh: Mesh,
    result: CollisionResult,
    seconds: f64,
}

fn fig1() -> &'static Fig1Run {
    static RUN: OnceLock<Fig1Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = fig1_config();
        let mesh = cfg.build_mesh().unwrap();
        let params = cfg.material_params();
        let pre = cfg.pre_state(&mesh);
        let load = cfg.percussion_load();
        let started = Instant::now();
        let result = solve_collision_detailed(
            &mesh,
            &params,
            &pre,
            CollisionSource::Percussion(&load),
            cfg.thermal_bc(),
            cfg.fixed_point(),
            cfg.phase_variant(),
            cfg.solver.vi_tol,
            cfg.solver.lin_tol,
            None,
            None,
        )
        .unwrap();
        let seconds = started.elapsed().as_secs_f64();
        assert!(
            result.diagnostics.converged,
            "scenario run stopped after {} iterations with update {}",
            result.diagnostics.iterations, result.diagnostics.final_update
        );
        Fig1Run {
            mesh,
            result,
            seconds,
        }
    })
}

#[test]
fn criterion_1_closed_form_identities() {
    let started = Instant::now();
    let p = ni_ti();
    assert_eq!(p.c, 0.05 * p.latent_heat, "identities assume c = l_a / 20");
    let t_minus = 299.475;
    let (lo, hi) = mixture_window(t_minus, &p);
    let span = hi - lo;
    let coeff = 2.0 * p.latent_heat / (3.0 * p.c * p.t0);

    let samples = 400;
    let mut worst_beta: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for k in 0..samples {
        let w = lo + span * (k as f64 + 0.5) / samples as f64;
        let input = ClosedFormInput::new(t_minus, [0.5, 0.5, 0.0], w, &p);
        let sol = solve_0d(&input).unwrap();
        assert_eq!(
            sol.regime,
            Regime::Mixture,
            "work {w} inside the window must be a mixture"
        );

        let beta_pred = coeff * (sol.t_plus - p.t0);
        let beta_rel = (sol.beta_plus[2] - beta_pred).abs()
            / sol.beta_plus[2].abs().max(beta_pred.abs());
        worst_beta = worst_beta.max(beta_rel);

        let lhs = (p.heat_cap + 2.0 * p.latent_heat * p.latent_heat / (3.0 * p.c * p.t0))
            * sol.t_plus;
        let rhs = w + p.heat_cap * t_minus + 2.0 * p.latent_heat * p.latent_heat / (3.0 * p.c);
        let energy_rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
        worst_energy = worst_energy.max(energy_rel);
    }
    assert!(
        worst_beta <= 1e-10,
        "fraction identity off by {worst_beta:.3e} relative, budget 1e-10"
    );
    assert!(
        worst_energy <= 1e-10,
        "temperature identity off by {worst_energy:.3e} relative, budget 1e-10"
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(1),
        "took {elapsed:?}, budget 1 s"
    );
    println!(
        "PASS criterion 1: mixture identities hold to {:.2e} and {:.2e} relative (budget 1e-10) in {elapsed:?}",
        worst_beta, worst_energy
    );
}

#[test]
fn criterion_2_closed_form_matches_the_grid_oracle() {
    let started = Instant::now();
    let p = ni_ti();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut worst_t: f64 = 0.0;
    let mut worst_beta: f64 = 0.0;
    for case in 0..200 {
        let t_minus: f64 = rng.gen_range(260.0..340.0);
        let b3: f64 = if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        };
        let rest = (1.0 - b3) / 2.0;
        let diss: f64 = rng.gen_range(0.0..6.0e8);
        let input = ClosedFormInput::new(t_minus, [rest, rest, b3], diss, &p);
        let exact = solve_0d(&input).unwrap();
        let oracle = brute_force_0d(&input).unwrap();

        if exact.regime != oracle.regime {
            let near_edge = exact.beta_plus[2].min(1.0 - exact.beta_plus[2]) <= 1e-5
                || oracle.beta_plus[2].min(1.0 - oracle.beta_plus[2]) <= 1e-5;
            assert!(
                near_edge,
                "case {case}: regimes {:?} vs {:?} disagree away from the clamp bounds",
                exact.regime, oracle.regime
            );
        }
        let dt = (exact.t_plus - oracle.t_plus).abs();
        let db = (exact.beta_plus[2] - oracle.beta_plus[2]).abs();
        assert!(
            dt <= 1e-4,
            "case {case} (T- {t_minus}, beta3- {b3}, work {diss}): temperatures differ by {dt}"
        );
        assert!(
            db <= 1e-5,
            "case {case} (T- {t_minus}, beta3- {b3}, work {diss}): austenite differs by {db}"
        );
        worst_t = worst_t.max(dt);
        worst_beta = worst_beta.max(db);
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "took {elapsed:?}, budget 1 min"
    );
    println!(
        "PASS criterion 2: 200 randomized starts agree with the grid oracle to {:.2e} K and {:.2e} (budgets 1e-4, 1e-5) in {elapsed:?}",
        worst_t, worst_beta
    );
}

#[test]
fn criterion_3_uniform_prescribed_runs_match_the_homogeneous_solution() {
    let started = Instant::now();
    let p = ni_ti();
    let t_minus = 299.475;
    let (lo, hi) = mixture_window(t_minus, &p);
    let fp = FixedPointConfig {
        tol: 1e-12,
        max_iter: 400,
        relaxation: 1.0,
    };

    let mut worst: f64 = 0.0;
    for diss in [0.5 * lo, 0.5 * (lo + hi), 1.2 * hi] {
        let input = ClosedFormInput::new(t_minus, [0.5, 0.5, 0.0], diss, &p);
        let oracle = solve_0d(&input).unwrap();
        for n in [1usize, 2, 4, 8, 16, 32] {
            let mesh =
                build_structured_mesh(1e-3, 1e-3, n, n, BoundarySpec::default()).unwrap();
            let pre = PreState::uniform(&mesh, t_minus);
            let field = DissipationField::uniform(&mesh, diss).unwrap();
            let result = solve_collision_detailed(
                &mesh,
                &p,
                &pre,
                CollisionSource::Prescribed(&field),
                ThermalBC::Adiabatic,
                fp,
                PhaseVariant::UniformDissipation,
                1e-12,
                1e-12,
                None,
                None,
            )
            .unwrap();
            assert!(
                result.diagnostics.converged,
                "{n}x{n} mesh at work {diss} stopped at update {}",
                result.diagnostics.final_update
            );
            for i in 0..mesh.node_count() {
                let dt = (result.t_plus.values[i] - oracle.t_plus).abs();
                assert!(
                    dt <= 1e-8,
                    "{n}x{n} mesh at work {diss}, node {i}: temperature {} vs homogeneous {}",
                    result.t_plus.values[i],
                    oracle.t_plus
                );
                worst = worst.max(dt);
                for c in 0..3 {
                    let db = (result.beta_plus[c].values[i] - oracle.beta_plus[c]).abs();
                    assert!(
                        db <= 1e-8,
                        "{n}x{n} mesh at work {diss}, node {i}: fraction {} is {} vs homogeneous {}",
                        c + 1,
                        result.beta_plus[c].values[i],
                        oracle.beta_plus[c]
                    );
                    worst = worst.max(db);
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "took {elapsed:?}, budget 1 min"
    );
    println!(
        "PASS criterion 3: uniform runs on 1x1 through 32x32 meshes match the homogeneous solution to {:.2e} (budget 1e-8) in {elapsed:?}",
        worst
    );
}

#[test]
fn criterion_4_constraints_on_the_scenario_run() {
    let run = fig1();
    let d = &run.result.diagnostics;

    let mut mass: f64 = 0.0;
    let mut feas: f64 = 0.0;
    for i in 0..run.mesh.node_count() {
        let b1 = run.result.beta_plus[0].values[i];
        let b2 = run.result.beta_plus[1].values[i];
        let b3 = run.result.beta_plus[2].values[i];
        mass = mass.max((b1 + b2 + b3 - 1.0).abs());
        feas = feas
            .max(-b2)
            .max(-b3)
            .max(b2 + b3 - 1.0)
            .max(0.0);
    }
    assert!(mass <= 1e-12, "mass balance violation {mass:.3e}, budget 1e-12");
    assert!(feas <= 1e-12, "feasibility violation {feas:.3e}, budget 1e-12");
    assert!(
        d.iterate_mass_balance_max <= 1e-12,
        "iterate mass balance violation {:.3e}, budget 1e-12",
        d.iterate_mass_balance_max
    );
    assert!(
        d.iterate_feasibility_max <= 1e-12,
        "iterate feasibility violation {:.3e}, budget 1e-12",
        d.iterate_feasibility_max
    );
    let budget = 1e-8 * (1.0 + d.phase_load_inf);
    assert!(
        d.phase_kkt_weak <= budget,
        "complementarity residual {:.3e} exceeds {budget:.3e}",
        d.phase_kkt_weak
    );
    assert!(
        run.seconds < 300.0,
        "scenario run took {:.1} s, budget 5 min",
        run.seconds
    );
    println!(
        "PASS criterion 4: mass {:.2e}, feasibility {:.2e} (budgets 1e-12), complementarity {:.2e} of {:.2e}, run {:.1} s of 300",
        mass, feas, d.phase_kkt_weak, budget, run.seconds
    );
}

#[test]
fn criterion_5_energy_balance_on_the_scenario_run() {
    let run = fig1();
    let residual = run
        .result
        .diagnostics
        .energy_residual
        .expect("adiabatic runs report the energy residual");
    assert!(
        residual <= 1e-9,
        "energy balance defect {residual:.3e}, budget 1e-9"
    );
    println!(
        "PASS criterion 5: relative energy balance defect {:.2e} (budget 1e-9)",
        residual
    );
}

#[test]
fn criterion_6_manufactured_solution_rates() {
    let started = Instant::now();
    let result = run_mms(4).unwrap();
    let velocity = result.velocity_rates();
    let thermal = result.thermal_rates();
    assert_eq!(velocity.len(), 3, "8x8 to 64x64 gives three refinements");
    for (k, rate) in velocity.iter().enumerate() {
        assert!(
            *rate >= 1.9,
            "velocity rate {rate:.3} at refinement {k} below 1.9; errors {:?}",
            result.velocity_errors
        );
    }
    for (k, rate) in thermal.iter().enumerate() {
        assert!(
            *rate >= 1.9,
            "thermal rate {rate:.3} at refinement {k} below 1.9; errors {:?}",
            result.thermal_errors
        );
    }
    println!(
        "PASS criterion 6: L2 rates velocity {:?}, thermal {:?} (budget 1.9) in {:?}",
        velocity
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        thermal
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        started.elapsed()
    );
}

#[test]
fn criterion_7_sweep_monotonicity_and_transitions() {
    let p = ni_ti();
    let rows = sweep_0d(299.475, &p, 0.0, 6.0e8, 1000).unwrap();
    assert_eq!(rows.len(), 1000);
    for (k, pair) in rows.windows(2).enumerate() {
        assert!(
            pair[1].t_plus > pair[0].t_plus,
            "temperature not strictly increasing between samples {k} and {}: {} vs {}",
            k + 1,
            pair[0].t_plus,
            pair[1].t_plus
        );
        assert!(
            pair[1].beta3_plus >= pair[0].beta3_plus,
            "austenite decreases between samples {k} and {}: {} vs {}",
            k + 1,
            pair[0].beta3_plus,
            pair[1].beta3_plus
        );
    }
    let transitions: Vec<(usize, Regime, Regime)> = rows
        .windows(2)
        .enumerate()
        .filter(|(_, pair)| pair[0].regime != pair[1].regime)
        .map(|(k, pair)| (k, pair[0].regime, pair[1].regime))
        .collect();
    assert_eq!(
        transitions.len(),
        2,
        "expected exactly two regime transitions, got {transitions:?}"
    );
    assert_eq!(
        (transitions[0].1, transitions[0].2),
        (Regime::NoTransformation, Regime::Mixture),
        "first transition {transitions:?}"
    );
    assert_eq!(
        (transitions[1].1, transitions[1].2),
        (Regime::Mixture, Regime::FullAustenite),
        "second transition {transitions:?}"
    );
    println!(
        "PASS criterion 7: 1000-sample sweep is monotone with transitions at samples {} and {}",
        transitions[0].0, transitions[1].0
    );
}

#[test]
fn criterion_8_stability_and_uniqueness() {
    let mut cfg = fig1_config();
    cfg.mesh.nx = 16;
    cfg.mesh.ny = 16;
    let mesh = cfg.build_mesh().unwrap();
    let params = cfg.material_params();
    let pre = cfg.pre_state(&mesh);
    let load = cfg.percussion_load();
    let fp = FixedPointConfig {
        tol: 1e-10,
        max_iter: 400,
        relaxation: 1.0,
    };
    let variant = cfg.phase_variant();
    let base = ProbeData::new(load);

    let mut ratios = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let perturbed = ProbeData::new(PercussionLoad::inclined(
            load.magnitude * (1.0 + eps),
            load.angle,
        ));
        let ratio = stability_probe(
            &mesh,
            &params,
            &pre,
            ThermalBC::Adiabatic,
            fp,
            variant,
            &base,
            &perturbed,
        )
        .unwrap();
        assert!(
            ratio.is_finite() && ratio > 0.0,
            "probe ratio {ratio} at eps {eps} must be finite and positive"
        );
        ratios.push(ratio);
    }
    let largest = ratios.iter().cloned().fold(0.0f64, f64::max);
    let smallest = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        largest <= 3.0 * smallest,
        "probe ratios {ratios:?} spread beyond a factor 3 as the perturbation shrinks"
    );
    assert!(
        ratios[2] <= 3.0 * ratios[0],
        "probe ratio grows as the perturbation shrinks: {ratios:?}"
    );

    let mut f_only = ProbeData::new(load);
    f_only.extra_source = 1e-3 * 2.8e8;
    let f_ratio = stability_probe(
        &mesh,
        &params,
        &pre,
        ThermalBC::Adiabatic,
        fp,
        variant,
        &base,
        &f_only,
    )
    .unwrap();
    assert!(
        f_ratio.is_finite() && f_ratio > 0.0,
        "source-only probe ratio {f_ratio} must be finite and positive"
    );

    match stability_probe(
        &mesh,
        &params,
        &pre,
        ThermalBC::Adiabatic,
        fp,
        variant,
        &base,
        &base,
    ) {
        Err(Error::InvalidArgument(_)) => {}
        other => panic!("identical probe data must be rejected, got {other:?}"),
    }

    let fp_unique = FixedPointConfig::default();
    let n = mesh.node_count();
    let cold = [
        ScalarField::constant(n, 0.5),
        ScalarField::constant(n, 0.5),
        ScalarField::constant(n, 0.0),
    ];
    let hot = [
        ScalarField::constant(n, 0.0),
        ScalarField::constant(n, 0.0),
        ScalarField::constant(n, 1.0),
    ];
    let solve_from = |guess: &[ScalarField; 3]| {
        let result = solve_collision_detailed(
            &mesh,
            &params,
            &pre,
            CollisionSource::Percussion(&load),
            ThermalBC::Adiabatic,
            fp_unique,
            variant,
            cfg.solver.vi_tol,
            cfg.solver.lin_tol,
            None,
            Some([&guess[0], &guess[1], &guess[2]]),
        )
        .unwrap();
        assert!(result.diagnostics.converged);
        result
    };
    let a = solve_from(&cold);
    let b = solve_from(&hot);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let dt = (a.t_plus.values[i] - b.t_plus.values[i]).abs()
            / (1.0 + a.t_plus.values[i].abs());
        worst = worst.max(dt);
        for c in 0..3 {
            worst =
                worst.max((a.beta_plus[c].values[i] - b.beta_plus[c].values[i]).abs());
        }
    }
    let budget = 10.0 * fp_unique.tol;
    assert!(
        worst <= budget,
        "martensite and austenite starts land {worst:.3e} apart, budget {budget:.1e}"
    );
    println!(
        "PASS criterion 8: probe ratios {ratios:?} stay bounded, source-only ratio {f_ratio:.3e}, identical data rejected, two starts agree to {worst:.2e} (budget {budget:.1e})"
    );
}

#[test]
fn criterion_9_scenario_field_structure() {
    let run = fig1();
    let mesh = &run.mesh;
    let result = &run.result;

    let mut tagged = vec![false; mesh.node_count()];
    for tag in [BoundaryTag::Gamma0, BoundaryTag::Gamma1] {
        for i in mesh.nodes_with_tag(tag) {
            tagged[i] = true;
        }
    }
    let argmax = |values: &[f64]| -> usize {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        best
    };

    let hot = argmax(&result.t_plus.values);
    assert!(
        tagged[hot],
        "temperature maximum at node {hot} {:?} lies on neither the loaded nor the clamped boundary",
        mesh.nodes[hot]
    );
    let most_austenite = argmax(&result.beta_plus[2].values);
    assert!(
        tagged[most_austenite],
        "austenite maximum at node {most_austenite} {:?} lies on neither the loaded nor the clamped boundary",
        mesh.nodes[most_austenite]
    );
    let beta3_max = result.beta_plus[2].values[most_austenite];
    assert!(
        beta3_max > 0.0,
        "the stroke must produce some austenite, max is {beta3_max}"
    );

    let mut worst_split: f64 = 0.0;
    for i in 0..mesh.node_count() {
        worst_split = worst_split
            .max((result.beta_plus[0].values[i] - result.beta_plus[1].values[i]).abs());
    }
    assert!(
        worst_split <= 1e-9,
        "martensite variants split by {worst_split:.3e}, budget 1e-9"
    );

    let u_max = result.u_plus.max_abs();
    assert!(
        u_max > 1e-3,
        "post-collision velocity {u_max} should be well away from zero"
    );
    println!(
        "PASS criterion 9: T+ max {:.3} K and beta3+ max {:.4} sit on the loaded/clamped boundary, variants split {:.1e}, |U+| max {:.3} m/s",
        result.t_plus.values[hot], beta3_max, worst_split, u_max
    );
}
