//! Body-bias design: the optimal ON/OFF angle, the body-signal amplitude
//! and DC level that realize it, and the attenuated-feedback realization.
//!
//! With the triode region removed (`φ2 = π/2`) the closed-form squared RMS
//! of the effective ISF is proportional to
//! `sin φ1 · (π + 2φ1 + (5/3)sin 2φ1 − (4/3)cot φ1)`, whose non-trivial
//! zero `φ1* ≈ 16.172°` is found by a bracketed solve. Forcing the ON/OFF
//! argument to `sin φ1*` and the saturation/triode argument to 1 gives
//!
//! ```text
//! A1    = (A + (A − V_DC0)/(1 − sin φ1*)) / n
//! V_DC1 = (V_Th0 + (A·sin φ1* − V_DC0)/(1 − sin φ1*)) / n
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::isf::{EffectiveIsf, NoiseSource};
use crate::metrics::{rms2, rms_f_no_triode};
use crate::numerics::{brent, golden_section_min};
use crate::regions::{BoundaryAngles, SteadyStateConfig};

/// Default tolerance for [`solve_phi1_star`] (rad).
pub const PHI1_TOL: f64 = 1e-15;

/// Distance kept from the bracket ends, where `cot φ` is singular or the
/// function is flat.
const BRACKET_EPS: f64 = 1e-6;

/// Root of `π + 2φ + (5/3)sin 2φ − (4/3)cot φ` in `(0, π/2)`.
pub fn solve_phi1_star(tolerance: f64) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tolerance}")));
    }
    Ok(brent(rms_f_no_triode, BRACKET_EPS, FRAC_PI_2 - BRACKET_EPS, tolerance)?.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub phi1_star_rad: f64,
    pub phi1_star_deg: f64,
    pub sin_phi1_star: f64,
    /// Body AC amplitude A1 (V).
    pub a1: f64,
    /// Body DC level V_DC1 (V).
    pub vdc1: f64,
    /// A1 computed through the body factor `n` instead of `√Φs/γ`.
    pub a1_n_form: f64,
    pub vdc1_n_form: f64,
    /// `|V_DC1 / A1|`
    pub ratio: f64,
    /// Value of the angle equation at `φ1*`.
    pub root_residual: f64,
    /// `| |V_DC1/A1| − |V_Th0/V_DC0 − 1| |`
    pub ratio_residual: f64,
    /// Set when `V_DC0 = A`: the ON/OFF angle becomes `0/0`.
    pub degenerate: bool,
}

impl DesignSolution {
    /// Steady state with the designed body drive.
    pub fn steady_state(&self, a: f64, vdc0: f64, omega: f64) -> SteadyStateConfig {
        SteadyStateConfig { a, vdc0, a1: self.a1, vdc1: self.vdc1, omega }
    }
}

pub fn body_bias_design(a: f64, vdc0: f64, params: &DeviceParams) -> Result<DesignSolution> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("amplitude must be positive, got {a}")));
    }
    if params.gamma_body == 0.0 {
        return Err(Error::NoBodyControl);
    }
    if !(params.phi_s > 0.0) {
        return Err(Error::Domain(format!("phi_s must be positive, got {}", params.phi_s)));
    }
    let phi1 = solve_phi1_star(PHI1_TOL)?;
    let s = phi1.sin();
    let vth0 = params.vth0;

    let a1_inner = a + (a - vdc0) / (1.0 - s);
    let vdc1_inner = vth0 + (a * s - vdc0) / (1.0 - s);

    let k = params.phi_s.sqrt() / params.gamma_body;
    let n = params.gamma_body / params.phi_s.sqrt();
    let (a1, vdc1) = (k * a1_inner, k * vdc1_inner);
    let ratio = (vdc1 / a1).abs();

    Ok(DesignSolution {
        phi1_star_rad: phi1,
        phi1_star_deg: phi1.to_degrees(),
        sin_phi1_star: s,
        a1,
        vdc1,
        a1_n_form: a1_inner / n,
        vdc1_n_form: vdc1_inner / n,
        ratio,
        root_residual: rms_f_no_triode(phi1),
        ratio_residual: (ratio - (vth0 / vdc0 - 1.0).abs()).abs(),
        degenerate: vdc0 == a,
    })
}

/// `|V_Th0/V_DD − 1|`, the target `|V_DC1/A1|` when `A ≈ V_DC0 ≈ V_DD`.
pub fn design_ratio(vth0: f64, vdd: f64) -> Result<f64> {
    if !(vdd > 0.0) {
        return Err(Error::Domain(format!("vdd must be positive, got {vdd}")));
    }
    Ok((vth0 / vdd - 1.0).abs())
}

/// Body drive `V_B = −V_b + K·(AC part of the drain voltage)`, coupled
/// through `C_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRealization {
    /// Attenuation factor K.
    pub k: f64,
    /// DC bias shift V_b (V); the body DC level is `−V_b`.
    pub vb: f64,
    /// Coupling capacitance (F).
    pub cc: f64,
}

impl FeedbackRealization {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.k) {
            return Err(Error::Domain(format!("attenuation k must be in [0, 1), got {}", self.k)));
        }
        if !(self.cc > 0.0) {
            return Err(Error::Domain(format!("coupling capacitance must be positive, got {}", self.cc)));
        }
        if !self.vb.is_finite() {
            return Err(Error::Domain("vb must be finite".into()));
        }
        Ok(())
    }
}

/// `| |V_b/(K·V_DD)| − |V_Th0/V_DD − 1| |`
pub fn feedback_check(real: &FeedbackRealization, vth0: f64, vdd: f64) -> Result<f64> {
    if real.k == 0.0 {
        return Err(Error::Singularity("attenuation k = 0 in the feedback ratio".into()));
    }
    Ok(((real.vb / (real.k * vdd)).abs() - design_ratio(vth0, vdd)?).abs())
}

/// Feedback realization with `V_b = K·V_DD·|V_Th0/V_DD − 1|`.
pub fn feedback_synthesize(k: f64, vth0: f64, vdd: f64, cc: f64) -> Result<FeedbackRealization> {
    let real = FeedbackRealization { k, vb: k * vdd * design_ratio(vth0, vdd)?, cc };
    real.validate()?;
    Ok(real)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsArgmin {
    pub phi1_rad: f64,
    pub phi1_deg: f64,
    pub rms2: f64,
}

/// Numeric minimizer of the quadrature squared RMS of the closed-form
/// thermal construction over `φ1` with `φ2 = π/2`. Diagnostic only.
pub fn rms2_argmin(lo: f64, hi: f64) -> Result<RmsArgmin> {
    if !(0.0 < lo && lo < hi && hi <= FRAC_PI_2) {
        return Err(Error::Argument(format!("need 0 < lo < hi <= pi/2, got [{lo}, {hi}]")));
    }
    let eval = |phi1: f64| {
        let g = EffectiveIsf::paper(&BoundaryAngles::from_radians(phi1, PI / 2.0, 0.0), NoiseSource::Thermal);
        rms2(&g).unwrap_or(f64::INFINITY)
    };
    let (x, fx) = golden_section_min(eval, lo, hi, 1e-8);
    Ok(RmsArgmin { phi1_rad: x, phi1_deg: x.to_degrees(), rms2: fx })
}
