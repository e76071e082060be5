//! DC coefficient `C0` and squared RMS of effective ISFs, their closed
//! forms, and the close-in phase-noise expressions.
//!
//! Quadrature over the first-principles construction is authoritative. The
//! closed forms are evaluated as written and reported next to it; they are
//! not expected to agree (the trigonometric construction integrates to a
//! `C0` of exactly zero for every angle triple, and the closed RMS
//! expression can go negative).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::device::{noise_psd, DeviceParams, NoiseKind};
use crate::error::{Error, Result};
use crate::isf::{EffectiveIsf, NoiseSource};
use crate::numerics::integrate_piecewise;
use crate::regions::{boundary_angles, waveforms_at, BoundaryAngles, SteadyStateConfig, Transistor, PHI_X_NOTE};

/// Absolute tolerance on the raw integrals.
pub const QUAD_TOL: f64 = 1e-10;

pub fn c0(gamma_eff: &EffectiveIsf) -> Result<f64> {
    c0_with_tolerance(gamma_eff, QUAD_TOL)
}

pub fn c0_with_tolerance(gamma_eff: &EffectiveIsf, tol: f64) -> Result<f64> {
    let q = integrate_piecewise(|t| gamma_eff.eval(t), &gamma_eff.breakpoints(), tol)?;
    Ok(q.value / PI)
}

pub fn rms2(gamma_eff: &EffectiveIsf) -> Result<f64> {
    rms2_with_tolerance(gamma_eff, QUAD_TOL)
}

pub fn rms2_with_tolerance(gamma_eff: &EffectiveIsf, tol: f64) -> Result<f64> {
    let q = integrate_piecewise(
        |t| {
            let v = gamma_eff.eval(t);
            v * v
        },
        &gamma_eff.breakpoints(),
        tol,
    )?;
    Ok(q.value / TAU)
}

/// `(sin²φ2 − sin φ1·sin φX) / 2π`
pub fn c0_closed_form(angles: &BoundaryAngles) -> f64 {
    let (s1, s2, sx) = (angles.phi1.value.sin(), angles.phi2.value.sin(), angles.phix.value.sin());
    (s2 * s2 - s1 * sx) / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerNull {
    /// `sin φX` that makes the closed-form `C0` vanish.
    pub sin_phix: f64,
    /// False when `|sin φX| > 1`, i.e. no real angle achieves it.
    pub feasible: bool,
}

/// `sin φX = sin²φ2 / sin φ1`
pub fn flicker_null_phix(angles: &BoundaryAngles) -> Result<FlickerNull> {
    let s1 = angles.phi1.value.sin();
    if s1 == 0.0 {
        return Err(Error::Singularity("sin(phi1) = 0 in the flicker-null condition".into()));
    }
    let s2 = angles.phi2.value.sin();
    let sin_phix = s2 * s2 / s1;
    Ok(FlickerNull { sin_phix, feasible: sin_phix.abs() <= 1.0 })
}

/// `2φ1 + 2φ2 + (5/3)sin 2φ1 + sin 2φ2 − (4/3)cot φ1`
pub fn rms_f(phi1: f64, phi2: f64) -> f64 {
    2.0 * phi1 + 2.0 * phi2 + 5.0 / 3.0 * (2.0 * phi1).sin() + (2.0 * phi2).sin() - 4.0 / 3.0 / phi1.tan()
}

/// `π − 2φ2 − sin 2φ2`
pub fn rms_g(phi2: f64) -> f64 {
    PI - 2.0 * phi2 - (2.0 * phi2).sin()
}

/// `f` with the triode region removed (`φ2 = π/2`):
/// `π + 2φ1 + (5/3)sin 2φ1 − (4/3)cot φ1`.
pub fn rms_f_no_triode(phi1: f64) -> f64 {
    PI + 2.0 * phi1 + 5.0 / 3.0 * (2.0 * phi1).sin() - 4.0 / 3.0 / phi1.tan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedRms2 {
    pub value: f64,
    /// Set when the expression is negative, which a squared RMS cannot be.
    pub negative: bool,
}

/// `(sin φ1·f(φ1, φ2) + sin φX·g(φ2)) / 8π`
pub fn rms2_closed_form(angles: &BoundaryAngles) -> Result<ClosedRms2> {
    let (p1, p2, px) = (angles.phi1.value, angles.phi2.value, angles.phix.value);
    if p1 == 0.0 {
        return Err(Error::Singularity("cot(phi1) is singular at phi1 = 0".into()));
    }
    let value = (p1.sin() * rms_f(p1, p2) + px.sin() * rms_g(p2)) / (8.0 * PI);
    Ok(ClosedRms2 { value, negative: value < 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankParams {
    /// Inductance (H).
    pub l: f64,
    /// Capacitance (F).
    pub c: f64,
    /// Parallel loss resistance (Ω).
    pub rp: f64,
}

impl TankParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l", self.l), ("c", self.c), ("rp", self.rp)] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("tank {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Resonant angular frequency `1/√(LC)`.
    pub fn omega0(&self) -> f64 {
        1.0 / (self.l * self.c).sqrt()
    }

    /// Peak tank charge `C·A` for output amplitude `a`.
    pub fn q_max(&self, a: f64) -> f64 {
        self.c * a
    }
}

fn db_or_sentinel(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn check_pn_args(q_max: f64, offset: f64) -> Result<()> {
    if !(offset > 0.0) {
        return Err(Error::Domain(format!("offset must be positive, got {offset}")));
    }
    if !(q_max > 0.0) {
        return Err(Error::Domain(format!("q_max must be positive, got {q_max}")));
    }
    Ok(())
}

/// `10·log10(C0²/(8·q_max²) · psd · ω_corner / Δω³)` in dBc/Hz; `−∞` when
/// the argument is not positive.
pub fn phase_noise_flicker(c0: f64, q_max: f64, psd: f64, omega_corner: f64, offset: f64) -> Result<f64> {
    check_pn_args(q_max, offset)?;
    Ok(db_or_sentinel(c0 * c0 / (8.0 * q_max * q_max) * psd * omega_corner / offset.powi(3)))
}

/// `10·log10(Γ²rms/(4·q_max²) · psd / Δω²)` in dBc/Hz; `−∞` when the
/// argument is not positive.
pub fn phase_noise_thermal(rms2: f64, q_max: f64, psd: f64, offset: f64) -> Result<f64> {
    check_pn_args(q_max, offset)?;
    Ok(db_or_sentinel(rms2 / (4.0 * q_max * q_max) * psd / (offset * offset)))
}

/// Serde adapter writing non-finite dB values as strings (`"-inf"`).
pub mod dbc_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_db(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => super::parse_db(&s).ok_or_else(|| de::Error::custom(format!("bad dB value '{s}'"))),
        }
    }
}

/// Text form of a dB value; non-finite values become `-inf`, `inf`, `nan`.
pub fn format_db(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn parse_db(s: &str) -> Option<f64> {
    match s.trim() {
        "-inf" => Some(f64::NEG_INFINITY),
        "inf" => Some(f64::INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoisePoint {
    pub offset_hz: f64,
    #[serde(with = "dbc_serde")]
    pub flicker_dbc: f64,
    #[serde(with = "dbc_serde")]
    pub thermal_dbc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quadrature: f64,
    pub closed_form: f64,
    pub abs_diff: f64,
    /// `abs_diff / |quadrature|`; absent when the quadrature value is zero.
    pub rel_diff: Option<f64>,
    /// Quadrature of the closed-form construction's own integrand.
    pub closed_form_integrand: f64,
}

impl Comparison {
    fn new(quadrature: f64, closed_form: f64, closed_form_integrand: f64) -> Self {
        let abs_diff = (quadrature - closed_form).abs();
        let rel_diff = (quadrature.abs() > 1e-15).then(|| abs_diff / quadrature.abs());
        Comparison { quadrature, closed_form, abs_diff, rel_diff, closed_form_integrand }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub rad: f64,
    pub deg: f64,
    pub argument: f64,
    pub valid: bool,
}

impl From<crate::regions::Angle> for AngleReport {
    fn from(a: crate::regions::Angle) -> Self {
        AngleReport { rad: a.value, deg: a.degrees(), argument: a.argument, valid: a.valid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglesReport {
    pub phi1: AngleReport,
    pub phi2: AngleReport,
    pub phix: AngleReport,
    pub phi1_raw_rad: f64,
    pub phix_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsfMetrics {
    pub angles: AnglesReport,
    pub c0: Comparison,
    pub rms2: Comparison,
    pub rms2_closed_form_negative: bool,
    pub thermal_clipped_samples: usize,
    pub flicker_null: Option<FlickerNull>,
    /// Peak flicker PSD at the corner frequency (A²/Hz).
    pub flicker_psd: f64,
    /// Peak thermal PSD (A²/Hz).
    pub thermal_psd: f64,
    pub q_max: f64,
    pub phase_noise: Vec<PhaseNoisePoint>,
}

/// Full metric report for M1 at a steady-state operating point.
pub fn isf_metrics(
    config: &SteadyStateConfig,
    params: &DeviceParams,
    tank: &TankParams,
    flicker_corner_hz: f64,
    offsets_hz: &[f64],
) -> Result<IsfMetrics> {
    tank.validate()?;
    if !(flicker_corner_hz > 0.0) {
        return Err(Error::Domain(format!("flicker corner must be positive, got {flicker_corner_hz}")));
    }
    let angles = boundary_angles(config, params)?;

    let fp_flicker = EffectiveIsf::first_principles(config, params, NoiseSource::Flicker, Transistor::M1)?;
    let fp_thermal = EffectiveIsf::first_principles(config, params, NoiseSource::Thermal, Transistor::M1)?;
    let paper_flicker = EffectiveIsf::paper(&angles, NoiseSource::Flicker);
    let paper_thermal = EffectiveIsf::paper(&angles, NoiseSource::Thermal);

    let c0_q = c0(&fp_flicker)?;
    let rms2_q = rms2(&fp_thermal)?;
    let c0_cf = c0_closed_form(&angles);
    let rms2_cf = rms2_closed_form(&angles)?;

    let peak_gm_psd = |kind| -> Result<f64> {
        let mut peak: f64 = 0.0;
        for k in 0..4096 {
            let b = waveforms_at(config, TAU * k as f64 / 4096.0, Transistor::M1);
            peak = peak.max(noise_psd(params, &b, kind)?);
        }
        Ok(peak)
    };
    let flicker_psd = peak_gm_psd(NoiseKind::Flicker(flicker_corner_hz))?;
    let thermal_psd = peak_gm_psd(NoiseKind::Thermal)?;
    let q_max = tank.q_max(config.a);

    let phase_noise = offsets_hz
        .iter()
        .map(|&f| {
            let dw = TAU * f;
            Ok(PhaseNoisePoint {
                offset_hz: f,
                flicker_dbc: phase_noise_flicker(c0_q, q_max, flicker_psd, TAU * flicker_corner_hz, dw)?,
                thermal_dbc: phase_noise_thermal(rms2_q, q_max, thermal_psd, dw)?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(IsfMetrics {
        angles: AnglesReport {
            phi1: angles.phi1.into(),
            phi2: angles.phi2.into(),
            phix: angles.phix.into(),
            phi1_raw_rad: angles.phi1_raw,
            phix_note: PHI_X_NOTE.into(),
        },
        c0: Comparison::new(c0_q, c0_cf, c0(&paper_flicker)?),
        rms2: Comparison::new(rms2_q, rms2_cf.value, rms2(&paper_thermal)?),
        rms2_closed_form_negative: rms2_cf.negative,
        thermal_clipped_samples: paper_thermal.clip_count(4096),
        flicker_null: flicker_null_phix(&angles).ok(),
        flicker_psd,
        thermal_psd,
        q_max,
        phase_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::tests::reference_device;
    use crate::isf::{effective_isf, Isf, Nmf, SampledCurve};
    use crate::regions::{schedule, RegionSchedule};
    use proptest::prelude::*;

    const PHI1_STAR: f64 = 0.282_253_649_566_194_12;

    fn always_on() -> RegionSchedule {
        schedule(&BoundaryAngles::from_radians(PI / 2.0, PI / 2.0, 0.0), Transistor::M1)
    }

    fn sampled(f: impl Fn(f64) -> f64 + Copy) -> EffectiveIsf {
        let one = SampledCurve::from_fn("one", 1024, |_| 1.0).unwrap();
        let g = SampledCurve::from_fn("g", 1024, f).unwrap();
        effective_isf(Isf::Sampled(g), Nmf::Sampled(one), always_on()).unwrap()
    }

    #[test]
    fn c0_basic_shapes() {
        let one = SampledCurve::from_fn("one", 1024, |_| 1.0).unwrap();
        let cos = effective_isf(Isf::Cosine(1.0), Nmf::Sampled(one), always_on()).unwrap();
        assert!(c0(&cos).unwrap().abs() < 1e-12);
        assert!((rms2(&cos).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rms2(&sampled(|_| 0.0)).unwrap(), 0.0);

        // Unity on [0, π], cut off on (π, 2π).
        let one = SampledCurve::from_fn("one", 1024, |_| 1.0).unwrap();
        let upper = schedule(&BoundaryAngles::from_radians(0.0, PI / 2.0, 0.0), Transistor::M1);
        let half = effective_isf(Isf::Sampled(one.clone()), Nmf::Sampled(one), upper).unwrap();
        assert!((c0(&half).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_c0_examples() {
        let a = BoundaryAngles::from_radians(30f64.to_radians(), 30f64.to_radians(), 30f64.to_radians());
        assert!(c0_closed_form(&a).abs() < 1e-16);
        let a = BoundaryAngles::from_radians(16.172f64.to_radians(), PI / 2.0, 20f64.to_radians());
        assert!((c0_closed_form(&a) - 0.143_993_833_547_668_76).abs() < 1e-15);
    }

    #[test]
    fn flicker_null_examples() {
        let a = BoundaryAngles::from_radians(0.4, 0.4, 0.0);
        assert!((flicker_null_phix(&a).unwrap().sin_phix - 0.4f64.sin()).abs() < 1e-15);
        let a = BoundaryAngles::from_radians(16.172f64.to_radians(), PI / 2.0, 0.0);
        let n = flicker_null_phix(&a).unwrap();
        assert!((n.sin_phix - 3.590_383_427_313_702).abs() < 1e-12);
        assert!(!n.feasible);
        let a = BoundaryAngles::from_radians(PI / 6.0, PI / 6.0, 0.0);
        assert!((flicker_null_phix(&a).unwrap().sin_phix - 0.5).abs() < 1e-15);
        let a = BoundaryAngles::from_radians(0.0, 0.3, 0.0);
        assert!(matches!(flicker_null_phix(&a), Err(Error::Singularity(_))));
    }

    #[test]
    fn closed_form_rms2_examples() {
        assert!(rms_g(PI / 2.0).abs() < 1e-15);
        let a = BoundaryAngles::from_radians(PHI1_STAR, PI / 2.0, 0.3);
        assert!(rms2_closed_form(&a).unwrap().value.abs() < 1e-14);
        let a = BoundaryAngles::from_radians(0.0, PI / 2.0, 0.3);
        assert!(matches!(rms2_closed_form(&a), Err(Error::Singularity(_))));
        let small = BoundaryAngles::from_radians(0.05, PI / 2.0, 0.3);
        assert!(rms2_closed_form(&small).unwrap().negative);
    }

    #[test]
    fn paper_thermal_rms2_matches_exact_oracle() {
        // Exact piecewise integration at 40 digits.
        let a = BoundaryAngles::from_radians(PHI1_STAR, PI / 2.0, 0.0);
        let g = EffectiveIsf::paper(&a, NoiseSource::Thermal);
        assert!((rms2(&g).unwrap() - 0.024_369_452_910_688_99).abs() < 1e-8);
    }

    #[test]
    fn rms2_stable_under_tighter_quadrature() {
        let p = reference_device();
        let c = SteadyStateConfig { a: 1.2, vdc0: 1.2, a1: 0.0, vdc1: 0.0, omega: 1.0 };
        let g = EffectiveIsf::first_principles(&c, &p, NoiseSource::Thermal, Transistor::M1).unwrap();
        let coarse = rms2_with_tolerance(&g, 1e-9).unwrap();
        let fine = rms2_with_tolerance(&g, 1e-12).unwrap();
        assert!((coarse - fine).abs() < 1e-8);
    }

    #[test]
    fn phase_noise_examples() {
        assert_eq!(phase_noise_flicker(0.0, 1e-12, 1e-20, 1e6, 1e5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(phase_noise_thermal(0.0, 1e-12, 1e-20, 1e5).unwrap(), f64::NEG_INFINITY);

        let base = phase_noise_flicker(0.1, 1e-12, 1e-20, 1e6, 1e5).unwrap();
        let dq = phase_noise_flicker(0.1, 2e-12, 1e-20, 1e6, 1e5).unwrap();
        let dw = phase_noise_flicker(0.1, 1e-12, 1e-20, 1e6, 2e5).unwrap();
        assert!((base - dq - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((base - dw - 30.0 * 2f64.log10()).abs() < 1e-12);

        let t = phase_noise_thermal(0.5, 1e-12, 1e-22, TAU * 1e6).unwrap();
        assert!((t - (-124.994_497_237_081_74)).abs() < 1e-9);
        let t2 = phase_noise_thermal(0.5, 1e-12, 1e-22, 2.0 * TAU * 1e6).unwrap();
        assert!((t - t2 - 20.0 * 2f64.log10()).abs() < 1e-12);

        assert!(matches!(phase_noise_thermal(0.5, 1e-12, 1e-22, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sentinel_serializes_as_string() {
        let p = PhaseNoisePoint { offset_hz: 1e3, flicker_dbc: f64::NEG_INFINITY, thermal_dbc: -120.5 };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: PhaseNoisePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn metrics_report_shape() {
        let p = reference_device();
        let c = SteadyStateConfig { a: 1.2, vdc0: 1.2, a1: 0.0, vdc1: 0.0, omega: TAU * 1e9 };
        let tank = TankParams { l: 1e-9, c: 1e-12, rp: 500.0 };
        let m = isf_metrics(&c, &p, &tank, 1e6, &[1e4, 1e5, 1e6]).unwrap();
        assert_eq!(m.phase_noise.len(), 3);
        assert!(m.rms2.quadrature > 0.0);
        assert!(m.c0.quadrature.abs() < 1e-9);
        assert!(m.c0.closed_form_integrand.abs() < 1e-9);
        let json = serde_json::to_value(&m).unwrap();
        assert!(json["c0"]["abs_diff"].is_number());
        assert!(json["phase_noise"][0]["thermal_dbc"].is_number());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn closed_form_flicker_construction_has_zero_dc(
            p1 in 0.0f64..PI / 2.0, p2 in 0.0f64..PI / 2.0, px in -PI / 2.0..PI / 2.0
        ) {
            let a = BoundaryAngles::from_radians(p1, p2, px);
            let g = EffectiveIsf::paper(&a, NoiseSource::Flicker);
            prop_assert!(c0(&g).unwrap().abs() < 1e-9);
        }

        #[test]
        fn no_triode_f_matches_general_f(p1 in 0.01f64..PI / 2.0) {
            prop_assert!((rms_f(p1, PI / 2.0) - rms_f_no_triode(p1)).abs() < 1e-12 * rms_f_no_triode(p1).abs().max(1.0));
        }

        #[test]
        fn phase_noise_decreases_with_offset(f in 1.0f64..1e8, k in 1.001f64..10.0) {
            let a = phase_noise_flicker(0.2, 1e-12, 1e-20, 1e6, f).unwrap();
            let b = phase_noise_flicker(0.2, 1e-12, 1e-20, 1e6, k * f).unwrap();
            prop_assert!(b < a);
            let a = phase_noise_thermal(0.2, 1e-12, 1e-22, f).unwrap();
            let b = phase_noise_thermal(0.2, 1e-12, 1e-22, k * f).unwrap();
            prop_assert!(b < a);
        }
    }
}
