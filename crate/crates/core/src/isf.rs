//! Impulse sensitivity functions, noise modulating functions (NMF) and
//! effective ISFs.
//!
//! Two constructions of the effective ISF are offered:
//!
//! * [`Construction::PaperClosedForm`]: `cos θ` times the trigonometric NMF
//!   `sin((φ−θ)/2)·cos((φ+θ)/2)` (flicker) or its square root (thermal),
//!   with `φ = φ1` on saturation intervals and `φ = φX` on triode intervals.
//! * [`Construction::FirstPrinciples`]: any ISF times the NMF obtained from
//!   the device PSD along the steady-state waveforms, normalized to its
//!   peak over the period.
//!
//! Both are zero on cut-off intervals.

use std::f64::consts::{PI, TAU};

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::device::{noise_psd, DeviceParams, NoiseKind, OperatingRegion};
use crate::error::{Error, Result};
use crate::numerics::wrap_angle;
use crate::regions::{
    boundary_angles, region_at, schedule, waveforms_at, BoundaryAngles, RegionSchedule, SteadyStateConfig,
    Transistor,
};

/// Reference frequency at which flicker PSDs are sampled for normalization.
pub const FLICKER_REFERENCE_HZ: f64 = 1e3;

/// Smallest accepted grid.
pub const MIN_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSource {
    Flicker,
    Thermal,
}

impl NoiseSource {
    fn device_kind(self) -> NoiseKind {
        match self {
            NoiseSource::Flicker => NoiseKind::Flicker(FLICKER_REFERENCE_HZ),
            NoiseSource::Thermal => NoiseKind::Thermal,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseSource::Flicker => "flicker",
            NoiseSource::Thermal => "thermal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    PaperClosedForm,
    FirstPrinciples,
}

/// Uniform samples over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < MIN_GRID || !n.is_power_of_two() {
            return Err(Error::Argument(format!(
                "grid size must be a power of two of at least {MIN_GRID}, got {n}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("curve values must be finite".into()));
        }
        Ok(SampledCurve { label: label.into(), values })
    }

    /// Samples `f` at `θ_k = 2πk/n`.
    pub fn from_fn(label: impl Into<String>, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect();
        Self::new(label, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn theta(&self, k: usize) -> f64 {
        TAU * k as f64 / self.values.len() as f64
    }

    /// Linear interpolation, periodic in θ.
    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.values.len();
        let x = wrap_angle(theta) / TAU * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let frac = x - k as f64;
        let a = self.values[k];
        let b = self.values[(k + 1) % n];
        a + (b - a) * frac
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (self.theta(k), v))
    }
}

/// ISF of a periodic waveform, `Γ = V′/(V′² + V″²)`, with derivatives taken
/// spectrally on the waveform scaled to a unit fundamental amplitude.
///
/// A pure sinusoid `c + A·sin(θ + ψ)` maps to exactly `cos(θ + ψ)`.
pub fn isf_numeric(waveform: &SampledCurve) -> Result<SampledCurve> {
    let n = waveform.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut spec: Vec<Complex64> = waveform.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);

    let fundamental = 2.0 * spec[1].norm() / n as f64;
    let scale = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(fundamental > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateWaveform("waveform has no fundamental component".into()));
    }

    let norm = 1.0 / (fundamental * n as f64);
    // Bins at rounding level would be amplified by up to (n/2)² in V''.
    let floor = 1e-13 * scale;
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    let mut d2 = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n {
        // Signed wavenumber; the Nyquist bin has no well-defined odd derivative.
        let m = if k < n / 2 {
            k as f64
        } else if k > n / 2 {
            k as f64 - n as f64
        } else {
            0.0
        };
        if spec[k].norm() <= floor {
            continue;
        }
        let c = spec[k] * norm;
        d1[k] = c * Complex64::new(0.0, m);
        d2[k] = c * -(m * m);
    }
    if spec[n / 2].norm() > floor {
        let c = spec[n / 2] * norm;
        let m = (n / 2) as f64;
        d2[n / 2] = c * -(m * m);
    }
    inv.process(&mut d1);
    inv.process(&mut d2);

    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let (v1, v2) = (d1[k].re, d2[k].re);
        let den = v1 * v1 + v2 * v2;
        if !(den > 1e-9) {
            return Err(Error::DegenerateWaveform(format!(
                "V'^2 + V''^2 vanishes at theta = {:.6}",
                waveform.theta(k)
            )));
        }
        values.push(v1 / den);
    }
    SampledCurve::new(format!("isf({})", waveform.label), values)
}

/// Value of the trigonometric NMF together with whether a negative
/// square-root argument was clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfValue {
    pub value: f64,
    pub clipped: bool,
}

/// `sin((φ−θ)/2)·cos((φ+θ)/2)`, equal to `½(sin φ − sin θ)`.
fn half_angle_form(phi: f64, theta: f64) -> f64 {
    ((phi - theta) / 2.0).sin() * ((phi + theta) / 2.0).cos()
}

/// Trigonometric NMF for M1 in the given region.
pub fn nmf_paper(angles: &BoundaryAngles, region: OperatingRegion, source: NoiseSource, theta: f64) -> Result<NmfValue> {
    let phi = match region {
        OperatingRegion::Saturation => angles.phi1.value,
        OperatingRegion::Triode => angles.phix.value,
        OperatingRegion::CutOff => {
            return Err(Error::Argument("the trigonometric NMF is not defined in cut-off".into()))
        }
    };
    Ok(nmf_form(phi, source, theta))
}

fn nmf_form(phi: f64, source: NoiseSource, theta: f64) -> NmfValue {
    let f = half_angle_form(phi, theta);
    match source {
        NoiseSource::Flicker => NmfValue { value: f, clipped: false },
        NoiseSource::Thermal if f < 0.0 => NmfValue { value: 0.0, clipped: true },
        NoiseSource::Thermal => NmfValue { value: f.sqrt(), clipped: false },
    }
}

/// NMF of one transistor derived from its noise PSD along the steady-state
/// waveforms, normalized to the PSD peak over the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceNmf {
    pub config: SteadyStateConfig,
    pub params: DeviceParams,
    pub source: NoiseSource,
    pub transistor: Transistor,
    /// Peak PSD over the period (A²/Hz; flicker at the reference frequency).
    pub peak_psd: f64,
}

impl DeviceNmf {
    /// Locates the PSD peak. Along the waveforms every region's
    /// transconductance is affine in `sin θ`, so the peak lies at
    /// `θ = π/2`, `3π/2` or a region boundary; a dense grid is added as a
    /// safeguard.
    pub fn new(config: &SteadyStateConfig, params: &DeviceParams, source: NoiseSource, transistor: Transistor) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        let mut candidates: Vec<f64> = (0..4096).map(|k| TAU * k as f64 / 4096.0).collect();
        candidates.extend([PI / 2.0, 1.5 * PI]);
        if let Ok(angles) = boundary_angles(config, params) {
            for iv in schedule(&angles, transistor).intervals {
                for t in [iv.start, iv.end] {
                    candidates.extend([t, t - 1e-12, t + 1e-12]);
                }
            }
        }
        let mut peak: f64 = 0.0;
        for t in candidates {
            let psd = noise_psd(params, &waveforms_at(config, t, transistor), source.device_kind())?;
            peak = peak.max(psd);
        }
        if !(peak > 0.0) {
            return Err(Error::DegenerateNoise(format!(
                "{} PSD of {} is zero over the whole period",
                source.as_str(),
                transistor.as_str()
            )));
        }
        Ok(DeviceNmf { config: *config, params: *params, source, transistor, peak_psd: peak })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let bias = waveforms_at(&self.config, theta, self.transistor);
        let psd = noise_psd(&self.params, &bias, self.source.device_kind()).unwrap_or(0.0);
        let ratio = psd / self.peak_psd;
        match self.source {
            NoiseSource::Flicker => ratio,
            NoiseSource::Thermal => ratio.sqrt(),
        }
    }
}

/// Sampled first-principles NMF on an `n`-point grid; the grid maximum is 1.
pub fn nmf_first_principles(
    config: &SteadyStateConfig,
    params: &DeviceParams,
    source: NoiseSource,
    transistor: Transistor,
    n: usize,
) -> Result<SampledCurve> {
    config.validate()?;
    params.validate()?;
    let kind = source.device_kind();
    let psd: Vec<f64> = (0..n)
        .map(|k| noise_psd(params, &waveforms_at(config, TAU * k as f64 / n as f64, transistor), kind))
        .collect::<Result<_>>()?;
    let peak = psd.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::DegenerateNoise(format!(
            "{} PSD of {} is zero over the whole period",
            source.as_str(),
            transistor.as_str()
        )));
    }
    let values = psd
        .into_iter()
        .map(|p| match source {
            NoiseSource::Flicker => p / peak,
            NoiseSource::Thermal => (p / peak).sqrt(),
        })
        .collect();
    SampledCurve::new(
        format!("nmf_{}_{}", source.as_str(), transistor.as_str()),
        values,
    )
}

/// ISF factor of an effective ISF.
#[derive(Debug, Clone, PartialEq)]
pub enum Isf {
    /// `sign · cos θ`
    Cosine(f64),
    Sampled(SampledCurve),
}

impl Isf {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            Isf::Cosine(sign) => sign * theta.cos(),
            Isf::Sampled(c) => c.eval(theta),
        }
    }
}

/// NMF factor of an effective ISF.
#[derive(Debug, Clone, PartialEq)]
pub enum Nmf {
    /// Trigonometric form keyed by region.
    Paper { angles: BoundaryAngles, source: NoiseSource },
    Device(DeviceNmf),
    Sampled(SampledCurve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveIsf {
    pub construction: Construction,
    pub isf: Isf,
    pub nmf: Nmf,
    pub schedule: RegionSchedule,
}

/// Pairs an ISF with an NMF on a region schedule.
pub fn effective_isf(isf: Isf, nmf: Nmf, schedule: RegionSchedule) -> Result<EffectiveIsf> {
    if let (Isf::Sampled(a), Nmf::Sampled(b)) = (&isf, &nmf) {
        if a.len() != b.len() {
            return Err(Error::Argument(format!(
                "grid mismatch: ISF has {} samples, NMF has {}",
                a.len(),
                b.len()
            )));
        }
    }
    let construction = match nmf {
        Nmf::Paper { .. } => Construction::PaperClosedForm,
        _ => Construction::FirstPrinciples,
    };
    Ok(EffectiveIsf { construction, isf, nmf, schedule })
}

impl EffectiveIsf {
    /// The closed-form construction for M1: `cos θ` times the trigonometric
    /// NMF on the schedule implied by `angles`.
    pub fn paper(angles: &BoundaryAngles, source: NoiseSource) -> Self {
        EffectiveIsf {
            construction: Construction::PaperClosedForm,
            isf: Isf::Cosine(1.0),
            nmf: Nmf::Paper { angles: *angles, source },
            schedule: schedule(angles, Transistor::M1),
        }
    }

    /// First-principles construction for `transistor`, with the analytic ISF
    /// of its drain node (`−cos θ` for M1, `+cos θ` for M2).
    pub fn first_principles(
        config: &SteadyStateConfig,
        params: &DeviceParams,
        source: NoiseSource,
        transistor: Transistor,
    ) -> Result<Self> {
        let angles = boundary_angles(config, params)?;
        let sign = match transistor {
            Transistor::M1 => -1.0,
            Transistor::M2 => 1.0,
        };
        Ok(EffectiveIsf {
            construction: Construction::FirstPrinciples,
            isf: Isf::Cosine(sign),
            nmf: Nmf::Device(DeviceNmf::new(config, params, source, transistor)?),
            schedule: schedule(&angles, transistor),
        })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_counted(theta).0
    }

    /// Value at `theta` and whether a square-root argument was clipped.
    pub fn eval_counted(&self, theta: f64) -> (f64, bool) {
        let region = region_at(&self.schedule, theta);
        if region == OperatingRegion::CutOff {
            return (0.0, false);
        }
        let (alpha, clipped) = match &self.nmf {
            Nmf::Paper { angles, source } => {
                let v = nmf_paper(angles, region, *source, theta).expect("region is not cut-off");
                (v.value, v.clipped)
            }
            Nmf::Device(d) => (d.eval(theta), false),
            Nmf::Sampled(c) => (c.eval(theta), false),
        };
        (self.isf.eval(theta) * alpha, clipped)
    }

    /// Points in `[0, 2π]` where the integrand may be non-smooth: region
    /// boundaries, zero crossings of clipped square roots, and grid nodes of
    /// sampled factors.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = self.schedule.breakpoints();
        if let Nmf::Paper { angles, .. } = &self.nmf {
            for phi in [angles.phi1.value, angles.phix.value] {
                pts.extend([wrap_angle(phi), wrap_angle(PI - phi)]);
            }
        }
        let mut grid = |n: usize| pts.extend((1..n).map(|k| TAU * k as f64 / n as f64));
        if let Isf::Sampled(c) = &self.isf {
            grid(c.len());
        }
        if let Nmf::Sampled(c) = &self.nmf {
            grid(c.len());
        }
        pts.push(0.0);
        pts.push(TAU);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Samples the effective ISF on an `n`-point grid.
    pub fn sample(&self, n: usize) -> Result<SampledCurve> {
        let label = match self.construction {
            Construction::PaperClosedForm => "gamma_eff_paper",
            Construction::FirstPrinciples => "gamma_eff_first_principles",
        };
        SampledCurve::from_fn(label, n, |t| self.eval(t))
    }

    /// Number of grid points (out of `n`) at which a thermal square-root
    /// argument was negative and clipped to zero.
    pub fn clip_count(&self, n: usize) -> usize {
        (0..n).filter(|&k| self.eval_counted(TAU * k as f64 / n as f64).1).count()
    }
}
