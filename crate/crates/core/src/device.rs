//! Three-terminal NMOS model: body-effect threshold, square-law drain
//! current, the three-partial transconductance, and channel noise PSDs.
//!
//! The source is grounded, so all voltages are source-referenced. The
//! transconductance used throughout is the sum of the partial derivatives
//! of the drain current with respect to gate, bulk and drain voltage:
//!
//! * saturation: `gm = β(n+1)(V_GS + n·V_BS − V_Th0)`
//! * triode:     `gm = β(V_GS + n(V_DS + V_BS) − V_Th0)`
//! * cut-off:    `gm = 0`
//!
//! with `β = μnCox·w/l` and `n = γ/√Φs`. Channel-length modulation is
//! ignored (`r_ds = ∞`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Mobility–oxide-capacitance product μnCox (A/V²).
    pub mu_cox: f64,
    /// Gate oxide capacitance per unit area Cox (F/m²).
    pub cox: f64,
    /// Channel width (m).
    pub w: f64,
    /// Channel length (m).
    pub l: f64,
    /// Zero-bias threshold voltage (V).
    pub vth0: f64,
    /// Body-effect coefficient γ (V^½).
    pub gamma_body: f64,
    /// Surface potential Φs (V).
    pub phi_s: f64,
    /// Flicker-noise coefficient (V²·F).
    pub kf: f64,
    /// Channel thermal-noise coefficient.
    pub gamma_ch: f64,
    /// Absolute temperature (K).
    pub temperature: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu_cox", self.mu_cox),
            ("cox", self.cox),
            ("w", self.w),
            ("l", self.l),
            ("phi_s", self.phi_s),
            ("gamma_ch", self.gamma_ch),
            ("temperature", self.temperature),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.gamma_body >= 0.0) || !self.gamma_body.is_finite() {
            return Err(Error::Domain(format!(
                "gamma_body must be non-negative, got {}",
                self.gamma_body
            )));
        }
        if !(self.kf >= 0.0) || !self.kf.is_finite() {
            return Err(Error::Domain(format!("kf must be non-negative, got {}", self.kf)));
        }
        if !self.vth0.is_finite() {
            return Err(Error::Domain("vth0 must be finite".into()));
        }
        Ok(())
    }

    /// Current factor β = μnCox·w/l (A/V²).
    pub fn beta(&self) -> f64 {
        self.mu_cox * self.w / self.l
    }

    /// Electron mobility μn = μnCox / Cox (m²/V·s).
    pub fn mobility(&self) -> f64 {
        self.mu_cox / self.cox
    }
}

/// Source-referenced terminal voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub vgs: f64,
    pub vds: f64,
    pub vbs: f64,
}

impl BiasPoint {
    pub fn new(vgs: f64, vds: f64, vbs: f64) -> Self {
        Self { vgs, vds, vbs }
    }

    fn is_finite(&self) -> bool {
        self.vgs.is_finite() && self.vds.is_finite() && self.vbs.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatingRegion {
    Saturation,
    Triode,
    CutOff,
}

impl OperatingRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatingRegion::Saturation => "saturation",
            OperatingRegion::Triode => "triode",
            OperatingRegion::CutOff => "cutoff",
        }
    }
}

impl std::str::FromStr for OperatingRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saturation" => Ok(OperatingRegion::Saturation),
            "triode" => Ok(OperatingRegion::Triode),
            "cutoff" => Ok(OperatingRegion::CutOff),
            other => Err(Error::Argument(format!("unknown region '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdModel {
    /// `V_Th0 + γ(√(Φs − V_BS) − √Φs)`
    Exact,
    /// Truncated power series in `V_BS` with the given number of terms.
    Maclaurin(u32),
    /// `V_Th0 − n·V_BS`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Flicker noise evaluated at frequency `f` (Hz).
    Flicker(f64),
    Thermal,
}

/// Linearized body factor `n = γ/√Φs`.
pub fn body_factor(params: &DeviceParams) -> Result<f64> {
    if !(params.phi_s > 0.0) {
        return Err(Error::Domain(format!("phi_s must be positive, got {}", params.phi_s)));
    }
    Ok(params.gamma_body / params.phi_s.sqrt())
}

pub fn threshold_voltage(params: &DeviceParams, vbs: f64, model: ThresholdModel) -> Result<f64> {
    let phi_s = params.phi_s;
    if !(phi_s > 0.0) {
        return Err(Error::Domain(format!("phi_s must be positive, got {phi_s}")));
    }
    match model {
        ThresholdModel::Exact => {
            if vbs >= phi_s {
                return Err(Error::Domain(format!(
                    "exact threshold needs vbs < phi_s ({vbs} >= {phi_s})"
                )));
            }
            Ok(params.vth0 + params.gamma_body * ((phi_s - vbs).sqrt() - phi_s.sqrt()))
        }
        ThresholdModel::Maclaurin(0) => {
            Err(Error::Argument("Maclaurin order must be at least 1".into()))
        }
        ThresholdModel::Maclaurin(order) => {
            // Σ_{k=1}^{order} (−1)^k / k! · γ / √(Φs^(2k−1)) · V_BS^k, written as a
            // running product to stay accurate for large orders.
            let mut term = params.gamma_body * phi_s.sqrt();
            let mut sum = 0.0;
            for k in 1..=order {
                term *= -vbs / (phi_s * k as f64);
                sum += term;
            }
            Ok(params.vth0 + sum)
        }
        ThresholdModel::Linear => Ok(params.vth0 - body_factor(params)? * vbs),
    }
}

/// Overdrive with the linear threshold: `V_GS + n·V_BS − V_Th0`.
fn overdrive(params: &DeviceParams, bias: &BiasPoint) -> f64 {
    let n = params.gamma_body / params.phi_s.sqrt();
    bias.vgs + n * bias.vbs - params.vth0
}

/// Operating region under the linear threshold model.
///
/// Cut-off when `V_GS < V_Th`; triode when `V_DS < V_GS − V_Th`; saturation
/// otherwise, so both boundary ties classify as saturation.
pub fn classify(params: &DeviceParams, bias: &BiasPoint) -> OperatingRegion {
    let vov = overdrive(params, bias);
    if vov < 0.0 {
        OperatingRegion::CutOff
    } else if bias.vds < vov {
        OperatingRegion::Triode
    } else {
        OperatingRegion::Saturation
    }
}

pub fn drain_current(params: &DeviceParams, bias: &BiasPoint) -> Result<f64> {
    if !bias.is_finite() {
        return Err(Error::Domain(format!("non-finite bias {bias:?}")));
    }
    Ok(drain_current_unchecked(params, bias))
}

/// Drain current without the finiteness check.
#[inline]
pub fn drain_current_unchecked(params: &DeviceParams, bias: &BiasPoint) -> f64 {
    SquareLaw::new(params).drain_current(bias.vgs, bias.vds, bias.vbs)
}

pub fn transconductance(params: &DeviceParams, bias: &BiasPoint) -> Result<f64> {
    if !bias.is_finite() {
        return Err(Error::Domain(format!("non-finite bias {bias:?}")));
    }
    Ok(transconductance_unchecked(params, bias))
}

#[inline]
pub fn transconductance_unchecked(params: &DeviceParams, bias: &BiasPoint) -> f64 {
    SquareLaw::new(params).transconductance(bias.vgs, bias.vds, bias.vbs)
}

/// The square-law equations with `β`, `n` and `V_Th0` precomputed, for
/// inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareLaw {
    pub beta: f64,
    pub n: f64,
    pub vth0: f64,
}

impl SquareLaw {
    #[inline]
    pub fn new(params: &DeviceParams) -> Self {
        Self { beta: params.beta(), n: params.gamma_body / params.phi_s.sqrt(), vth0: params.vth0 }
    }

    #[inline]
    pub fn drain_current(&self, vgs: f64, vds: f64, vbs: f64) -> f64 {
        let vov = vgs + self.n * vbs - self.vth0;
        if vov < 0.0 {
            0.0
        } else if vds < vov {
            self.beta * (vov - 0.5 * vds) * vds
        } else {
            0.5 * self.beta * vov * vov
        }
    }

    #[inline]
    pub fn region(&self, vgs: f64, vds: f64, vbs: f64) -> OperatingRegion {
        let vov = vgs + self.n * vbs - self.vth0;
        if vov < 0.0 {
            OperatingRegion::CutOff
        } else if vds < vov {
            OperatingRegion::Triode
        } else {
            OperatingRegion::Saturation
        }
    }

    #[inline]
    pub fn transconductance(&self, vgs: f64, vds: f64, vbs: f64) -> f64 {
        let vov = vgs + self.n * vbs - self.vth0;
        if vov < 0.0 {
            0.0
        } else if vds < vov {
            self.beta * (vov + self.n * vds)
        } else {
            self.beta * (self.n + 1.0) * vov
        }
    }
}

/// Drain-current noise PSD (A²/Hz): `kf/(Cox·w·l)·gm²/f` for flicker and
/// `4·kB·T·γ·gm` for thermal. Zero in cut-off.
///
/// Thermal PSD is floored at zero: a negative triode `gm` only occurs for
/// reverse drain bias, where the square-law model is not meaningful.
pub fn noise_psd(params: &DeviceParams, bias: &BiasPoint, kind: NoiseKind) -> Result<f64> {
    let gm = transconductance(params, bias)?;
    psd_from_gm(params, gm, kind)
}

/// Noise PSD for a given transconductance.
pub fn psd_from_gm(params: &DeviceParams, gm: f64, kind: NoiseKind) -> Result<f64> {
    match kind {
        NoiseKind::Flicker(f) => {
            if !(f > 0.0) {
                return Err(Error::Domain(format!("flicker frequency must be positive, got {f}")));
            }
            Ok(params.kf / (params.cox * params.w * params.l) / f * gm * gm)
        }
        NoiseKind::Thermal => Ok(4.0 * BOLTZMANN * params.temperature * params.gamma_ch * gm.max(0.0)),
    }
}

/// The same PSDs written out per region with the transconductance already
/// substituted (μn, Cox, w, l appear explicitly). Independent of
/// [`noise_psd`]; kept for cross-checking.
pub fn noise_psd_expanded(params: &DeviceParams, bias: &BiasPoint, kind: NoiseKind) -> Result<f64> {
    if !bias.is_finite() {
        return Err(Error::Domain(format!("non-finite bias {bias:?}")));
    }
    let n = body_factor(params)?;
    let mu = params.mobility();
    let (cox, w, l) = (params.cox, params.w, params.l);
    let sat_term = bias.vgs + n * bias.vbs - params.vth0;
    let triode_term = bias.vgs + n * (bias.vds + bias.vbs) - params.vth0;
    let region = classify(params, bias);
    let kt4 = 4.0 * BOLTZMANN * params.temperature * params.gamma_ch;
    match kind {
        NoiseKind::Flicker(f) => {
            if !(f > 0.0) {
                return Err(Error::Domain(format!("flicker frequency must be positive, got {f}")));
            }
            let k = params.kf * mu * mu * cox * w / (l * l * l * f);
            Ok(match region {
                OperatingRegion::Saturation => k * (n + 1.0).powi(2) * sat_term * sat_term,
                OperatingRegion::Triode => k * triode_term * triode_term,
                OperatingRegion::CutOff => 0.0,
            })
        }
        NoiseKind::Thermal => Ok(match region {
            OperatingRegion::Saturation => kt4 * mu * cox * w * (n + 1.0) / l * sat_term,
            OperatingRegion::Triode => (kt4 * mu * cox * w / l * triode_term).max(0.0),
            OperatingRegion::CutOff => 0.0,
        }),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn reference_device() -> DeviceParams {
        DeviceParams {
            mu_cox: 1e-4,
            cox: 8.6e-3,
            w: 10e-6,
            l: 1e-6,
            vth0: 0.5,
            gamma_body: 0.5,
            phi_s: 0.7,
            kf: 1e-25,
            gamma_ch: 2.0 / 3.0,
            temperature: 300.0,
        }
    }

    #[test]
    fn body_factor_examples() {
        let mut p = reference_device();
        p.gamma_body = 0.0;
        assert_eq!(body_factor(&p).unwrap(), 0.0);
        p.gamma_body = 0.5;
        assert!((body_factor(&p).unwrap() - 0.597_614_304_667_196_8).abs() < 1e-15);
        p.gamma_body = 1.0;
        p.phi_s = 1.0;
        assert_eq!(body_factor(&p).unwrap(), 1.0);
        p.phi_s = 0.0;
        assert!(matches!(body_factor(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn threshold_zero_bias_is_vth0_for_every_model() {
        let p = reference_device();
        for m in [ThresholdModel::Exact, ThresholdModel::Linear, ThresholdModel::Maclaurin(1), ThresholdModel::Maclaurin(7)] {
            assert_eq!(threshold_voltage(&p, 0.0, m).unwrap(), p.vth0);
        }
    }

    #[test]
    fn maclaurin_first_order_is_linear() {
        let p = reference_device();
        for vbs in [-0.3, 0.2] {
            let a = threshold_voltage(&p, vbs, ThresholdModel::Maclaurin(1)).unwrap();
            let b = threshold_voltage(&p, vbs, ThresholdModel::Linear).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_threshold_hand_value() {
        // 0.5 + 0.5(√0.5 − √0.7), evaluated to 40 digits with mpmath.
        let p = reference_device();
        let v = threshold_voltage(&p, 0.2, ThresholdModel::Exact).unwrap();
        assert!((v - 0.435_223_377_326_236).abs() < 1e-15);
    }

    #[test]
    fn threshold_errors() {
        let p = reference_device();
        assert!(matches!(threshold_voltage(&p, 0.7, ThresholdModel::Exact), Err(Error::Domain(_))));
        assert!(matches!(
            threshold_voltage(&p, 0.1, ThresholdModel::Maclaurin(0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn maclaurin_series_converges_to_its_closed_sum() {
        // The series with coefficients (−1)^k/k!·γ/Φs^(k−½) sums to
        // γ√Φs(exp(−V_BS/Φs) − 1); successive truncations approach it
        // monotonically in error once k exceeds |V_BS|/Φs.
        let p = reference_device();
        for vbs in [-0.3, -0.1, 0.15, 0.3] {
            let limit = p.vth0 + p.gamma_body * p.phi_s.sqrt() * ((-vbs / p.phi_s).exp() - 1.0);
            let mut prev = f64::INFINITY;
            for k in 1..=12 {
                let err = (threshold_voltage(&p, vbs, ThresholdModel::Maclaurin(k)).unwrap() - limit).abs();
                assert!(err <= prev + 1e-16, "vbs={vbs} k={k}");
                prev = err;
            }
            assert!(prev < 1e-12);
        }
    }

    #[test]
    fn linear_vs_exact_error_over_range() {
        // With n = γ/√Φs the linear slope is twice the tangent slope of the
        // exact model at V_BS = 0, so the worst error on [−0.3, 0.3] V is at
        // −0.3 V: n·0.3 − γ(√1.0 − √0.7) = 0.09761…
        let p = reference_device();
        let worst = (0..=600)
            .map(|i| -0.3 + 0.001 * i as f64)
            .map(|vbs| {
                let lin = threshold_voltage(&p, vbs, ThresholdModel::Linear).unwrap();
                let ex = threshold_voltage(&p, vbs, ThresholdModel::Exact).unwrap();
                (lin - ex).abs()
            })
            .fold(0.0, f64::max);
        let expected = 0.597_614_304_667_196_8 * 0.3 - 0.5 * (1.0 - 0.7f64.sqrt());
        assert!((worst - expected).abs() < 1e-12, "{worst}");
    }

    #[test]
    fn drain_current_examples() {
        let mut p = reference_device();
        let n = body_factor(&p).unwrap();
        let vbs = -0.2;
        let zero_ov = BiasPoint::new(p.vth0 - n * vbs, 1.0, vbs);
        assert_eq!(drain_current(&p, &zero_ov).unwrap(), 0.0);

        // μCox = 1e-4, w/l = 10, V_ov = 0.3 → 4.5e-5 A
        p.gamma_body = 0.0;
        let sat = BiasPoint::new(p.vth0 + 0.3, 1.0, 0.0);
        assert!((drain_current(&p, &sat).unwrap() - 4.5e-5).abs() < 1e-18);
    }

    #[test]
    fn drain_current_continuous_at_triode_boundary() {
        let p = reference_device();
        let n = body_factor(&p).unwrap();
        let (vgs, vbs) = (1.4, -0.3);
        let vov = vgs + n * vbs - p.vth0;
        let at = drain_current(&p, &BiasPoint::new(vgs, vov, vbs)).unwrap();
        let below = drain_current(&p, &BiasPoint::new(vgs, vov * (1.0 - 1e-14), vbs)).unwrap();
        assert_eq!(classify(&p, &BiasPoint::new(vgs, vov, vbs)), OperatingRegion::Saturation);
        assert!(((at - below) / at).abs() < 1e-12);
    }

    #[test]
    fn transconductance_examples() {
        let mut p = reference_device();
        assert_eq!(transconductance(&p, &BiasPoint::new(0.0, 1.0, 0.0)).unwrap(), 0.0);

        // n = 0.6 exactly: γ = 0.6, Φs = 1. V_GS + n·V_BS − V_Th0 = 0.5.
        p.gamma_body = 0.6;
        p.phi_s = 1.0;
        let b = BiasPoint::new(1.0 + 0.6 * 0.2, 2.0, -0.2);
        assert!((transconductance(&p, &b).unwrap() - 8e-4).abs() < 1e-15);

        p.gamma_body = 0.0;
        let b = BiasPoint::new(1.2, 2.0, 0.4);
        assert!((transconductance(&p, &b).unwrap() - 1e-3 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn noise_in_cutoff_is_zero() {
        let p = reference_device();
        let off = BiasPoint::new(0.1, 1.0, 0.0);
        assert_eq!(noise_psd(&p, &off, NoiseKind::Flicker(1e3)).unwrap(), 0.0);
        assert_eq!(noise_psd(&p, &off, NoiseKind::Thermal).unwrap(), 0.0);
    }

    #[test]
    fn flicker_requires_positive_frequency() {
        let p = reference_device();
        let b = BiasPoint::new(1.0, 1.0, 0.0);
        assert!(matches!(noise_psd(&p, &b, NoiseKind::Flicker(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn doubling_gm_scales_psds() {
        let p = reference_device();
        let f1 = psd_from_gm(&p, 1e-3, NoiseKind::Flicker(1e3)).unwrap();
        let f2 = psd_from_gm(&p, 2e-3, NoiseKind::Flicker(1e3)).unwrap();
        let t1 = psd_from_gm(&p, 1e-3, NoiseKind::Thermal).unwrap();
        let t2 = psd_from_gm(&p, 2e-3, NoiseKind::Thermal).unwrap();
        assert!((f2 / f1 - 4.0).abs() < 1e-14);
        assert!((t2 / t1 - 2.0).abs() < 1e-14);
    }

    fn arb_bias() -> impl Strategy<Value = BiasPoint> {
        (-1.0f64..3.0, 0.0f64..3.0, -1.0f64..0.6).prop_map(|(g, d, b)| BiasPoint::new(g, d, b))
    }

    proptest! {
        #[test]
        fn expanded_forms_match_generic(bias in arb_bias(), f in 1.0f64..1e7) {
            let p = reference_device();
            for kind in [NoiseKind::Flicker(f), NoiseKind::Thermal] {
                let a = noise_psd(&p, &bias, kind).unwrap();
                let b = noise_psd_expanded(&p, &bias, kind).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-300);
            }
        }

        #[test]
        fn classification_is_total(vgs in -1e3f64..1e3, vds in -1e3f64..1e3, vbs in -1e3f64..1e3) {
            let p = reference_device();
            let r = classify(&p, &BiasPoint::new(vgs, vds, vbs));
            let hits = [OperatingRegion::Saturation, OperatingRegion::Triode, OperatingRegion::CutOff]
                .iter().filter(|&&x| x == r).count();
            prop_assert_eq!(hits, 1);
        }
    }
}
