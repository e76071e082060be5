//! Phase-noise estimation from zero-crossing times.
//!
//! The phase of the differential output is sampled once per cycle at its
//! rising zero crossings: a least-squares line `t_k ≈ t0 + k·T` defines the
//! carrier, and the timing residual `e_k` maps to phase `φ_k = −2π·e_k/T`.
//! The one-sided PSD of `φ` comes from Welch averaging (Hann window, 50%
//! overlap, per-segment linear detrend) and `L(Δf) = 10·log10(S_φ/2)`.
//!
//! The segment length is chosen per offset: about [`BINS_PER_OFFSET`] bins
//! below the offset, capped by the longest length that still yields
//! [`MIN_SEGMENTS`] segments. High offsets thus average many short
//! segments instead of a handful of long ones.

use std::f64::consts::TAU;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::dbc_serde;

/// Minimum number of averaged segments.
pub const MIN_SEGMENTS: usize = 8;
/// Lowest usable offset, in bins of the segment DFT.
pub const MIN_BINS: f64 = 4.0;
/// Target resolution of each offset, in bins.
pub const BINS_PER_OFFSET: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Ok,
    BelowResolution,
    AboveLimit,
}

impl Availability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Availability::Ok => "ok",
            Availability::BelowResolution => "below_resolution",
            Availability::AboveLimit => "above_limit",
        }
    }
}

impl std::str::FromStr for Availability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Availability::Ok),
            "below_resolution" => Ok(Availability::BelowResolution),
            "above_limit" => Ok(Availability::AboveLimit),
            other => Err(Error::Argument(format!("unknown spectrum flag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub offset_hz: f64,
    /// `L(Δf)` in dBc/Hz; NaN when unavailable.
    #[serde(with = "dbc_serde")]
    pub l_dbc_hz: f64,
    pub flag: Availability,
    /// Segments averaged for this offset (0 when unavailable).
    pub segments: usize,
    /// Window equivalent noise bandwidth for this offset (Hz).
    pub rbw_hz: f64,
}

impl SpectrumPoint {
    pub fn value(&self) -> Option<f64> {
        (self.flag == Availability::Ok).then_some(self.l_dbc_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseSpectrum {
    pub points: Vec<SpectrumPoint>,
    pub window: String,
    /// Segment count and length of the finest-resolution estimate.
    pub segments: usize,
    pub segment_len: usize,
    /// Phase sample rate (one sample per carrier cycle).
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    /// Equivalent noise bandwidth of the finest-resolution estimate.
    pub resolution_bandwidth_hz: f64,
    pub min_offset_hz: f64,
    pub max_offset_hz: f64,
}

/// Averaged periodogram.
#[derive(Debug, Clone)]
pub struct Psd {
    /// Bin frequencies `k·fs/n` for `k = 0..=n/2`.
    pub freqs: Vec<f64>,
    /// One-sided PSD (units²/Hz).
    pub psd: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
}

/// Segment length giving at least [`MIN_SEGMENTS`] half-overlapping segments.
pub fn segment_len_for(n: usize) -> usize {
    // (n − m)/(m/2) + 1 ≥ 8  ⇔  m ≤ 2n/9
    let m = 2 * n / (MIN_SEGMENTS + 1);
    m & !1
}

fn detrend(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let mean_x = x.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (k, v) in x.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (v - mean_x);
        sxx += dk * dk;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    for (k, v) in x.iter_mut().enumerate() {
        *v -= mean_x + slope * (k as f64 - mean_k);
    }
}

/// Welch PSD with Hann window, 50% overlap and per-segment linear detrend.
pub fn welch(x: &[f64], fs: f64, segment_len: usize) -> Result<Psd> {
    let m = segment_len;
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::Argument(format!("segment length must be even and >= 4, got {m}")));
    }
    if x.len() < m {
        return Err(Error::Argument(format!("{} samples are fewer than one segment of {m}", x.len())));
    }
    let step = m / 2;
    let window: Vec<f64> = (0..m).map(|k| 0.5 - 0.5 * (TAU * k as f64 / m as f64).cos()).collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut acc = vec![0.0; m / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    let mut seg = vec![0.0; m];
    let mut count = 0;
    let mut start = 0;
    while start + m <= x.len() {
        seg.copy_from_slice(&x[start..start + m]);
        detrend(&mut seg);
        for ((b, s), w) in buf.iter_mut().zip(&seg).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wpow * count as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, a)| if k == 0 || k == m / 2 { a * scale } else { 2.0 * a * scale })
        .collect();
    let freqs = (0..=m / 2).map(|k| k as f64 * fs / m as f64).collect();
    Ok(Psd { freqs, psd, segments: count, segment_len: m })
}

impl Psd {
    /// Log-log interpolation between the bins bracketing `f`.
    pub fn interpolate(&self, f: f64) -> f64 {
        let df = self.freqs[1];
        let k = ((f / df).floor() as usize).clamp(1, self.freqs.len() - 2);
        let (f0, f1) = (self.freqs[k], self.freqs[k + 1]);
        let (s0, s1) = (self.psd[k], self.psd[k + 1]);
        if s0 > 0.0 && s1 > 0.0 {
            let t = (f / f0).ln() / (f1 / f0).ln();
            (s0.ln() + t * (s1.ln() - s0.ln())).exp()
        } else {
            s0 + (f - f0) / (f1 - f0) * (s1 - s0)
        }
    }

    /// Least-squares slope of `10·log10(S)` per decade over bins in `[lo, hi]`.
    pub fn slope_db_per_decade(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .freqs
            .iter()
            .zip(&self.psd)
            .filter(|(f, s)| **f >= lo && **f <= hi && **s > 0.0)
            .map(|(f, s)| (f.log10(), 10.0 * s.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Phase samples (rad) and carrier period from rising crossing times.
pub fn phase_from_crossings(crossings: &[f64]) -> Result<(Vec<f64>, f64)> {
    if crossings.len() < 3 {
        return Err(Error::DegenerateWaveform(format!("only {} zero crossings", crossings.len())));
    }
    let n = crossings.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let t0 = crossings[0];
    let rel: Vec<f64> = crossings.iter().map(|t| t - t0).collect();
    let mean_t = rel.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (k, t) in rel.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (t - mean_t);
        sxx += dk * dk;
    }
    let period = sxy / sxx;
    if !(period > 0.0) {
        return Err(Error::DegenerateWaveform("crossing times are not increasing".into()));
    }
    let phase = rel
        .iter()
        .enumerate()
        .map(|(k, t)| -TAU * (t - mean_t - period * (k as f64 - mean_k)) / period)
        .collect();
    Ok((phase, period))
}

fn check_offsets(offsets: &[f64]) -> Result<()> {
    if offsets.is_empty() {
        return Err(Error::Argument("no offsets requested".into()));
    }
    if offsets.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::Argument("offsets must be positive and finite".into()));
    }
    if offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("offsets must be strictly increasing".into()));
    }
    Ok(())
}

/// `L(Δf)` at each offset from a sequence of rising crossing times.
pub fn spectrum_from_crossings(crossings: &[f64], offsets: &[f64]) -> Result<PhaseNoiseSpectrum> {
    check_offsets(offsets)?;
    let (phase, period) = phase_from_crossings(crossings)?;
    let fs = 1.0 / period;
    let m = segment_len_for(phase.len());
    if m < 8 {
        return Err(Error::Resolution { min_offset_hz: f64::INFINITY });
    }
    let min_offset = MIN_BINS * fs / m as f64;
    let max_offset = fs / 4.0;
    if offsets.iter().all(|f| *f < min_offset || *f > max_offset) && offsets[0] < min_offset {
        return Err(Error::Resolution { min_offset_hz: min_offset });
    }
    let mut cache: Vec<Psd> = Vec::new();
    let mut points = Vec::with_capacity(offsets.len());
    for &f in offsets {
        let flag = if f < min_offset {
            Availability::BelowResolution
        } else if f > max_offset {
            Availability::AboveLimit
        } else {
            Availability::Ok
        };
        if flag != Availability::Ok {
            points.push(SpectrumPoint { offset_hz: f, l_dbc_hz: f64::NAN, flag, segments: 0, rbw_hz: f64::NAN });
            continue;
        }
        let len = (((BINS_PER_OFFSET * fs / f) / 2.0).round() as usize * 2).clamp(8, m);
        let psd = match cache.iter().position(|p| p.segment_len == len) {
            Some(i) => &cache[i],
            None => {
                cache.push(welch(&phase, fs, len)?);
                cache.last().expect("just pushed")
            }
        };
        let sv = psd.interpolate(f);
        points.push(SpectrumPoint {
            offset_hz: f,
            l_dbc_hz: if sv > 0.0 { 10.0 * (sv / 2.0).log10() } else { f64::NEG_INFINITY },
            flag,
            segments: psd.segments,
            rbw_hz: 1.5 * fs / len as f64,
        });
    }
    Ok(PhaseNoiseSpectrum {
        points,
        window: "hann".into(),
        segments: (phase.len() - m) / (m / 2) + 1,
        segment_len: m,
        sample_rate_hz: fs,
        carrier_hz: fs,
        resolution_bandwidth_hz: 1.5 * fs / m as f64,
        min_offset_hz: min_offset,
        max_offset_hz: max_offset,
    })
}

/// Cubic (Lagrange) root in `(0, 1]` of the segment `y1 → y2`, with `y0`
/// and `y3` the neighbouring samples; the crossing lies at `k1 + frac`.
pub(crate) fn cubic_crossing(y0: f64, y1: f64, y2: f64, y3: f64) -> f64 {
    // Nodes at −1, 0, 1, 2.
    let p = |x: f64| {
        let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut x = y1 / (y1 - y2);
    for _ in 0..60 {
        let h = 1e-7;
        let fx = p(x);
        if fx < 0.0 { lo = x } else { hi = x }
        let d = (p(x + h) - p(x - h)) / (2.0 * h);
        let mut nx = x - fx / d;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() < 1e-15 {
            return nx;
        }
        x = nx;
    }
    x
}
