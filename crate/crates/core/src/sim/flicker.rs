//! 1/f noise from a bank of first-order low-pass filtered white sources.
//!
//! Stage `k` is an Ornstein–Uhlenbeck process with corner `f_k`; corners
//! are log-spaced with ratio `r` between `corner/1000` and `10·corner`.
//! A dense bank of Lorentzians with per-stage variance `ln r` sums to a
//! one-sided PSD of `1/f` inside the band, so the output has unit flicker
//! level: `S_x(f) ≈ 1/f`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerSynthConfig {
    pub num_octave_stages: usize,
    /// Centre of the 1/f band (Hz). The band spans `corner/1000 ..= 10·corner`.
    pub corner_hz: f64,
}

impl FlickerSynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_octave_stages < 2 {
            return Err(Error::Domain(format!(
                "flicker synthesizer needs at least 2 stages, got {}",
                self.num_octave_stages
            )));
        }
        if !(self.corner_hz > 0.0) || !self.corner_hz.is_finite() {
            return Err(Error::Domain(format!("flicker corner must be positive, got {}", self.corner_hz)));
        }
        Ok(())
    }

    pub fn band(&self) -> (f64, f64) {
        (self.corner_hz * 1e-3, self.corner_hz * 10.0)
    }

    /// Stage corner frequencies, ascending.
    pub fn stage_corners(&self) -> Vec<f64> {
        let (lo, hi) = self.band();
        let n = self.num_octave_stages;
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        (0..n).map(|k| lo * ratio.powi(k as i32)).collect()
    }

    fn stage_variance(&self) -> f64 {
        let (lo, hi) = self.band();
        (hi / lo).ln() / (self.num_octave_stages - 1) as f64
    }
}

#[derive(Debug, Clone)]
struct Stage {
    decay: f64,
    drive: f64,
    x: f64,
}

/// Sampled generator. The bank is advanced every `hold` calls with the
/// exact OU transition and held in between.
#[derive(Debug, Clone)]
pub struct FlickerSynth {
    stages: Vec<Stage>,
    hold: u32,
    countdown: u32,
    value: f64,
}

impl FlickerSynth {
    pub fn new<R: Rng>(config: &FlickerSynthConfig, dt: f64, hold: u32, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if !(dt > 0.0) || hold == 0 {
            return Err(Error::Domain("flicker sample step must be positive".into()));
        }
        let h = dt * hold as f64;
        let (_, hi) = config.band();
        if hi >= 0.5 / h {
            return Err(Error::Domain(format!(
                "flicker band edge {hi:.3e} Hz exceeds the update Nyquist {:.3e} Hz",
                0.5 / h
            )));
        }
        let var = config.stage_variance();
        let stages = config
            .stage_corners()
            .into_iter()
            .map(|fk| {
                let decay = (-std::f64::consts::TAU * fk * h).exp();
                let x = var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                Stage { decay, drive: (var * (1.0 - decay * decay)).sqrt(), x }
            })
            .collect::<Vec<_>>();
        let value = stages.iter().map(|s| s.x).sum();
        Ok(Self { stages, hold, countdown: hold, value })
    }

    /// Current sample, advancing the bank when the hold expires.
    #[inline]
    pub fn next<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let out = self.value;
        self.countdown -= 1;
        if self.countdown == 0 {
            self.countdown = self.hold;
            let mut sum = 0.0;
            for s in &mut self.stages {
                let xi: f64 = rng.sample(StandardNormal);
                s.x = s.decay * s.x + s.drive * xi;
                sum += s.x;
            }
            self.value = sum;
        }
        out
    }

    /// Analytic one-sided PSD of the bank at `f` (continuous-time, before
    /// the hold).
    pub fn model_psd(config: &FlickerSynthConfig, f: f64) -> f64 {
        let var = config.stage_variance();
        config
            .stage_corners()
            .into_iter()
            .map(|fk| {
                let tau = 1.0 / (std::f64::consts::TAU * fk);
                4.0 * var * tau / (1.0 + (std::f64::consts::TAU * f * tau).powi(2))
            })
            .sum()
    }
}
