//! Homogeneous (single-point) solution of the collision model.
//!
//! With spatially uniform data the post-collision temperature and phase
//! fractions satisfy a scalar complementarity problem: the jump of the
//! austenite fraction is a clamped linear function of the dissipated work.
//! The module provides
//! - `solve_0d`: the exact piecewise solution with regime enumeration,
//! - `brute_force_0d`: an independent grid-search oracle over the feasible
//!   triangle that never uses the closed form,
//! - `sweep_0d`: tabulation over a range of dissipated works.

use crate::error::{Error, Result};
use crate::params::MaterialParams;
use crate::phase::project_onto_k;

/// Transformation regime, classified by the austenite fraction after the
/// collision: 0, strictly between 0 and 1, or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NoTransformation,
    Mixture,
    FullAustenite,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::NoTransformation => "no-transformation",
            Regime::Mixture => "mixture",
            Regime::FullAustenite => "full-austenite",
        }
    }
}

/// Uniform pre-collision state and the material constants the homogeneous
/// model needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormInput {
    /// Pre-collision temperature (K).
    pub t_minus: f64,
    /// Pre-collision fractions (martensite 1, martensite 2, austenite),
    /// summing to 1.
    pub beta_minus: [f64; 3],
    /// Dissipated work density of the collision (J/m^3).
    pub diss_work: f64,
    /// Phase change viscosity (J s/m^3).
    pub c: f64,
    /// Volumetric heat capacity (J/(m^3 K)).
    pub heat_cap: f64,
    /// Latent heat density (J/m^3).
    pub latent_heat: f64,
    /// Phase equilibrium temperature (K).
    pub t0: f64,
}

impl ClosedFormInput {
    pub fn new(t_minus: f64, beta_minus: [f64; 3], diss_work: f64, params: &MaterialParams) -> Self {
        ClosedFormInput {
            t_minus,
            beta_minus,
            diss_work,
            c: params.c,
            heat_cap: params.heat_cap,
            latent_heat: params.latent_heat,
            t0: params.t0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_minus > 0.0) {
            return Err(Error::invalid(format!(
                "pre-collision temperature {} must be positive",
                self.t_minus
            )));
        }
        if !(self.diss_work >= 0.0) {
            return Err(Error::invalid(format!(
                "dissipated work {} must be nonnegative",
                self.diss_work
            )));
        }
        let sum: f64 = self.beta_minus.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "fractions {:?} sum to {sum}, expected 1",
                self.beta_minus
            )));
        }
        for (i, b) in self.beta_minus.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(b) {
                return Err(Error::invalid(format!(
                    "fraction {i} = {b} outside [0, 1]"
                )));
            }
        }
        if !(self.c >= 0.0) || !(self.heat_cap > 0.0) || !(self.latent_heat > 0.0) || !(self.t0 > 0.0)
        {
            return Err(Error::invalid(format!(
                "material constants (c = {}, C = {}, l_a = {}, T0 = {}) outside admissible range",
                self.c, self.heat_cap, self.latent_heat, self.t0
            )));
        }
        Ok(())
    }
}

/// Post-collision homogeneous state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSolution {
    pub regime: Regime,
    /// Post-collision temperature (K).
    pub t_plus: f64,
    /// Post-collision fractions summing to 1.
    pub beta_plus: [f64; 3],
}

/// The open interval of dissipated works (J/m^3) producing a Mixture regime
/// from the symmetric state with no initial austenite.
pub fn mixture_window(t_minus: f64, params: &MaterialParams) -> (f64, f64) {
    let lo = params.heat_cap * (params.t0 - t_minus);
    let hi = lo
        + (3.0 * params.c * params.heat_cap * params.t0
            + 2.0 * params.latent_heat * params.latent_heat)
            / (2.0 * params.latent_heat);
    (lo, hi)
}

/// Exact piecewise solution of the homogeneous model for a symmetric
/// martensite start (beta1 = beta2).
///
/// The austenite jump d minimizes a strictly convex scalar objective over
/// [-beta3, 1-beta3]: d = clamp(d*), with
/// d* = (l_a / T0) (T- - T0 + W/C) / (3c/2 + l_a^2 / (C T0)),
/// and T+ = T- + (W - l_a d) / C from the energy balance. Ties at the clamp
/// bounds classify into the adjacent boundary regime, so outputs are
/// continuous across thresholds. With c = 0 the interior branch returns
/// T+ = T0 and the un-dissipative austenite jump from the energy balance.
pub fn solve_0d(input: &ClosedFormInput) -> Result<ClosedFormSolution> {
    input.validate()?;
    let [b1, b2, b3] = input.beta_minus;
    if (b1 - b2).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "starting fractions ({b1}, {b2}) are not symmetric; use brute_force_0d for general starts"
        )));
    }
    let c = input.c;
    let heat_cap = input.heat_cap;
    let l_a = input.latent_heat;
    let t0 = input.t0;
    let w = input.diss_work;
    let t_minus = input.t_minus;

    let slope = 1.5 * c + l_a * l_a / (heat_cap * t0);
    let excess = t_minus - t0 + w / heat_cap;
    let d_star = (l_a / t0) * excess / slope;

    let (regime, beta3_plus) = if d_star <= -b3 {
        (Regime::NoTransformation, 0.0)
    } else if d_star >= 1.0 - b3 {
        (Regime::FullAustenite, 1.0)
    } else {
        (Regime::Mixture, b3 + d_star)
    };

    let (t_plus, beta_plus) = match regime {
        Regime::NoTransformation if b3 == 0.0 => {
            (t_minus + w / heat_cap, input.beta_minus)
        }
        _ => {
            let d = beta3_plus - b3;
            let t_plus = t_minus + (w - l_a * d) / heat_cap;
            let rest = 0.5 * (1.0 - beta3_plus);
            (t_plus, [rest, rest, beta3_plus])
        }
    };

    Ok(ClosedFormSolution {
        regime,
        t_plus,
        beta_plus,
    })
}

struct KktContext {
    /// beta2 and beta3 before the collision.
    b2m: f64,
    b3m: f64,
    c: f64,
    /// Coefficient of the austenite jump inside the driving force.
    sv: f64,
    /// Driving force at zero austenite jump.
    s0: f64,
    /// Normalization of the projected-residual map.
    scale: f64,
}

impl KktContext {
    fn new(input: &ClosedFormInput) -> Self {
        let sv = input.latent_heat * input.latent_heat / (input.heat_cap * input.t0);
        let s0 = (input.latent_heat / input.t0)
            * (input.t_minus - input.t0 + input.diss_work / input.heat_cap);
        KktContext {
            b2m: input.beta_minus[1],
            b3m: input.beta_minus[2],
            c: input.c,
            sv,
            s0,
            scale: 1.5 * input.c + sv,
        }
    }

    /// Norm of chi - project(chi - r(chi)/scale); zero exactly at solutions
    /// of the stationarity-plus-constraint system.
    fn score(&self, chi2: f64, chi3: f64) -> f64 {
        let u = chi2 - self.b2m;
        let v = chi3 - self.b3m;
        let r1 = self.c * (2.0 * u + v);
        let r2 = self.c * (u + 2.0 * v) + self.sv * v - self.s0;
        let p = project_onto_k([chi2 - r1 / self.scale, chi3 - r2 / self.scale]);
        let f1 = chi2 - p[0];
        let f2 = chi3 - p[1];
        (f1 * f1 + f2 * f2).sqrt()
    }
}

fn scan_grid(
    ctx: &KktContext,
    lo2: f64,
    hi2: f64,
    lo3: f64,
    hi3: f64,
    step: f64,
    best: &mut (f64, [f64; 2]),
) {
    let lo2 = lo2.max(0.0);
    let lo3 = lo3.max(0.0);
    let hi2 = hi2.min(1.0);
    let hi3 = hi3.min(1.0);
    if hi2 < lo2 || hi3 < lo3 {
        return;
    }
    let i2_lo = (lo2 / step).ceil() as i64;
    let i2_hi = (hi2 / step).floor() as i64;
    for i2 in i2_lo..=i2_hi {
        let chi2 = i2 as f64 * step;
        let i3_lo = (lo3 / step).ceil() as i64;
        let row_hi3 = hi3.min(1.0 - chi2);
        let i3_hi = (row_hi3 / step).floor() as i64;
        for i3 in i3_lo..=i3_hi {
            let chi3 = i3 as f64 * step;
            let s = ctx.score(chi2, chi3);
            if s < best.0 {
                *best = (s, [chi2, chi3]);
            }
        }
        let hyp3 = 1.0 - chi2;
        if hyp3 >= lo3 && hyp3 <= hi3 {
            let s = ctx.score(chi2, hyp3);
            if s < best.0 {
                *best = (s, [chi2, hyp3]);
            }
        }
    }
}

/// Grid-search oracle for the homogeneous model, valid for any start in the
/// feasible triangle. Scans (beta2+, beta3+) with the temperature eliminated
/// through the energy balance, scoring each candidate by the projected
/// stationarity residual, then refines around the minimizer down to a
/// 1e-7 grid.
pub fn brute_force_0d(input: &ClosedFormInput) -> Result<ClosedFormSolution> {
    input.validate()?;
    let ctx = KktContext::new(input);
    let mut best = (f64::INFINITY, [0.0, 0.0]);

    let coarse = 1e-3;
    scan_grid(&ctx, 0.0, 1.0, 0.0, 1.0, coarse, &mut best);
    let mut shifted = best;
    let half = 0.5 * coarse;
    let scan_shifted = |b: &mut (f64, [f64; 2])| {
        let i_max = (1.0 / coarse) as i64;
        for i2 in 0..i_max {
            let chi2 = half + i2 as f64 * coarse;
            for i3 in 0..i_max {
                let chi3 = half + i3 as f64 * coarse;
                if chi2 + chi3 > 1.0 {
                    break;
                }
                let s = ctx.score(chi2, chi3);
                if s < b.0 {
                    *b = (s, [chi2, chi3]);
                }
            }
        }
    };
    scan_shifted(&mut shifted);
    if shifted.0 < best.0 {
        best = shifted;
    }

    let mut prev_step = coarse;
    for step in [1e-4, 1e-5, 1e-6, 1e-7] {
        let [c2, c3] = best.1;
        let reach = 12.0 * prev_step.max(step * 16.0);
        scan_grid(
            &ctx,
            c2 - reach,
            c2 + reach,
            c3 - reach,
            c3 + reach,
            step,
            &mut best,
        );
        prev_step = step;
    }

    let [mut chi2, mut chi3] = best.1;
    let snap = 1.5e-7;
    let regime = if chi3 <= snap {
        chi3 = 0.0;
        Regime::NoTransformation
    } else if chi3 >= 1.0 - snap {
        chi3 = 1.0;
        chi2 = 0.0;
        Regime::FullAustenite
    } else {
        Regime::Mixture
    };
    chi2 = chi2.clamp(0.0, 1.0 - chi3);

    let t_plus = input.t_minus
        + (input.diss_work - input.latent_heat * (chi3 - input.beta_minus[2])) / input.heat_cap;
    Ok(ClosedFormSolution {
        regime,
        t_plus,
        beta_plus: [1.0 - chi2 - chi3, chi2, chi3],
    })
}

/// One row of a dissipated-work sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Dissipated work density (J/m^3).
    pub diss_work: f64,
    /// Post-collision temperature (K).
    pub t_plus: f64,
    pub beta3_plus: f64,
    pub regime: Regime,
}

/// Tabulates the homogeneous solution from the symmetric martensite start
/// (1/2, 1/2, 0) over dissipated works evenly spaced in
/// [diss_min, diss_max]. A degenerate range produces a single row.
pub fn sweep_0d(
    t_minus: f64,
    params: &MaterialParams,
    diss_min: f64,
    diss_max: f64,
    samples: usize,
) -> Result<Vec<SweepRow>> {
    if samples == 0 {
        return Err(Error::invalid("sweep needs at least 1 sample".to_string()));
    }
    if !(diss_min >= 0.0) || diss_max < diss_min {
        return Err(Error::invalid(format!(
            "sweep range [{diss_min}, {diss_max}] must be ordered and nonnegative"
        )));
    }
    let beta_minus = [0.5, 0.5, 0.0];
    let count = if diss_max == diss_min { 1 } else { samples };
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let w = if count == 1 {
            diss_min
        } else {
            diss_min + (diss_max - diss_min) * i as f64 / (count - 1) as f64
        };
        let sol = solve_0d(&ClosedFormInput::new(t_minus, beta_minus, w, params))?;
        rows.push(SweepRow {
            diss_work: w,
            t_plus: sol.t_plus,
            beta3_plus: sol.beta_plus[2],
            regime: sol.regime,
        });
    }
    Ok(rows)
}
