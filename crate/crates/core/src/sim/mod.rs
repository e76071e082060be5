//! Noisy transient simulation of the cross-coupled LC oscillator.
//!
//! Each output node sees an inductor from V_DD, a capacitor to ground and
//! a loss resistor to V_DD. M1 (drain O1, gate O2) and M2 (drain O2, gate
//! O1) have grounded sources. With feedback enabled the body of each device
//! follows its own drain through a first-order high-pass:
//! `V_Bi = −V_b + K·HP(V_Oi)`, corner `ω0/100`.
//!
//! The deterministic part is advanced with fixed-step RK4. Channel noise
//! is added after each step as a charge increment on the node capacitor:
//! thermal as white current with the instantaneous `4kTγ·gm`, flicker as
//! `√(kf/(Cox·w·l))·gm·x(t)` with `x` a unit 1/f process.
//!
//! The phase is tracked through rising zero crossings of `V_O1 − V_O2`,
//! located by cubic interpolation.

mod compare;
mod flicker;
mod spectrum;

pub use compare::{compare_configs, ComparisonReport, OffsetSummary, SeedComparison};
pub use flicker::{FlickerSynth, FlickerSynthConfig};
pub use spectrum::{
    phase_from_crossings, segment_len_for, spectrum_from_crossings, welch, Availability, PhaseNoiseSpectrum,
    Psd, SpectrumPoint, MIN_BINS, MIN_SEGMENTS,
};

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::FeedbackRealization;
use crate::device::{DeviceParams, OperatingRegion, SquareLaw, BOLTZMANN};
use crate::error::{Error, Result};
use crate::metrics::TankParams;
use crate::regions::{SteadyStateConfig, Transistor};

/// Offsets at which the reference 1-GHz-class oscillator is characterised.
pub const REFERENCE_OFFSETS_HZ: [f64; 6] = [1e4, 3e4, 6e5, 1e6, 1e7, 1e8];
/// Carrier the reference offsets belong to.
pub const REFERENCE_CARRIER_HZ: f64 = 1e9;
/// Default desk-scale carrier.
pub const DESK_F0_HZ: f64 = 1e7;
/// Fraction of the run discarded as start-up.
pub const SETTLE_FRACTION: f64 = 0.1;
/// Flicker bank update interval, in integrator steps.
pub const FLICKER_HOLD: u32 = 16;
/// The body high-pass corner sits this factor below `ω0`.
pub const HP_CORNER_RATIO: f64 = 100.0;

/// Reference offsets scaled to carrier `f0`.
pub fn scaled_offsets(f0: f64) -> Vec<f64> {
    REFERENCE_OFFSETS_HZ.iter().map(|f| f * f0 / REFERENCE_CARRIER_HZ).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseEnable {
    pub thermal: bool,
    pub flicker: bool,
}

impl NoiseEnable {
    pub const OFF: NoiseEnable = NoiseEnable { thermal: false, flicker: false };
    pub const ALL: NoiseEnable = NoiseEnable { thermal: true, flicker: true };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tank: TankParams,
    pub device: DeviceParams,
    /// Supply voltage (V); also the DC level of both outputs.
    pub vdd: f64,
    /// `None` grounds both bodies (conventional oscillator).
    pub feedback: Option<FeedbackRealization>,
    /// Integrator step (s).
    pub dt: f64,
    /// Simulated time (s).
    pub duration: f64,
    pub seed: u64,
    pub noise_enable: NoiseEnable,
    pub flicker_synth: FlickerSynthConfig,
    /// Initial differential offset `V_O1 − V_O2` (V) that starts the oscillation.
    pub initial_kick: f64,
    /// Trace decimation: one sample every `trace_stride` steps.
    pub trace_stride: usize,
    /// Number of trailing trace samples kept.
    pub trace_points: usize,
}

impl SimConfig {
    /// Desk-scale oscillator at 10 MHz: 1 nF, 253 nH, 1 kΩ (Q ≈ 63);
    /// W/L = 20/1 µm. `kf` puts the 1/f³ region over the lower scaled
    /// offsets.
    pub fn desk_scale(feedback: Option<FeedbackRealization>) -> Self {
        let c = 1e-9;
        let l = 1.0 / ((TAU * DESK_F0_HZ).powi(2) * c);
        let tank = TankParams { l, c, rp: 1e3 };
        let device = DeviceParams {
            mu_cox: 2e-4,
            cox: 8.6e-3,
            w: 20e-6,
            l: 1e-6,
            vth0: 0.5,
            gamma_body: 0.5,
            phi_s: 0.7,
            kf: 1e-23,
            gamma_ch: 2.0 / 3.0,
            temperature: 300.0,
        };
        let f0 = 1.0 / (TAU * (l * c).sqrt());
        Self {
            tank,
            device,
            vdd: 1.8,
            feedback,
            dt: 1.0 / (200.0 * f0),
            duration: 4000.0 / f0,
            seed: 1,
            noise_enable: NoiseEnable::ALL,
            flicker_synth: FlickerSynthConfig { num_octave_stages: 12, corner_hz: 1e5 },
            initial_kick: 0.1,
            trace_stride: 10,
            trace_points: 4000,
        }
    }

    /// Resonant frequency `1/(2π√(LC))`.
    pub fn f0(&self) -> f64 {
        self.tank.omega0() / TAU
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f0()
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.tank.validate()?;
        self.device.validate()?;
        if let Some(fb) = &self.feedback {
            fb.validate()?;
        }
        if !(self.vdd > 0.0) || !self.vdd.is_finite() {
            return Err(Error::Domain(format!("vdd must be positive, got {}", self.vdd)));
        }
        let f0 = self.f0();
        if !(self.dt > 0.0) || self.dt >= 1.0 / (50.0 * f0) {
            return Err(Error::Domain(format!(
                "dt = {:.3e} s must be positive and below 1/(50·f0) = {:.3e} s",
                self.dt,
                1.0 / (50.0 * f0)
            )));
        }
        // Allow for rounding of duration·f0 when it is given as a product.
        if !(self.duration * f0 >= 2000.0 * (1.0 - 1e-9)) {
            return Err(Error::Domain(format!(
                "duration covers {:.1} periods, at least 2000 are required",
                self.duration * f0
            )));
        }
        if !self.initial_kick.is_finite() {
            return Err(Error::Domain("initial_kick must be finite".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::Domain("trace_stride must be at least 1".into()));
        }
        self.flicker_synth.validate()
    }
}

/// Tank state: output voltages and inductor currents (flowing from V_DD
/// into the node).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState {
    pub v1: f64,
    pub v2: f64,
    pub il1: f64,
    pub il2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub v_o1: f64,
    pub v_o2: f64,
    pub v_b1: f64,
    pub v_b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub transistor: Transistor,
    pub saturation: f64,
    pub triode: f64,
    pub cutoff: f64,
}

impl Occupancy {
    pub fn fraction(&self, region: OperatingRegion) -> f64 {
        match region {
            OperatingRegion::Saturation => self.saturation,
            OperatingRegion::Triode => self.triode,
            OperatingRegion::CutOff => self.cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub dt: f64,
    pub duration: f64,
    /// Start of the steady-state window (s).
    pub settle_time: f64,
    /// Rising zero crossings of `V_O1 − V_O2` over the whole run (s).
    pub crossings: Vec<f64>,
    /// Decimated tail of the waveforms.
    pub trace: Vec<TracePoint>,
    /// Region occupancy over the steady-state window.
    pub occupancy: [Occupancy; 2],
    /// Steady-state single-ended amplitude of `V_O1` (V).
    pub amplitude: f64,
    /// Steady-state mean of `V_O1` (V).
    pub vdc: f64,
    pub feedback: Option<FeedbackRealization>,
}

impl SimTrace {
    /// Crossings after the settle window.
    pub fn steady_crossings(&self) -> &[f64] {
        let start = self.crossings.partition_point(|t| *t < self.settle_time);
        &self.crossings[start..]
    }

    /// Oscillation frequency from the steady crossings.
    pub fn frequency(&self) -> Result<f64> {
        let (_, period) = phase_from_crossings(self.steady_crossings())?;
        Ok(1.0 / period)
    }

    /// Sinusoidal steady state with the measured amplitude and DC level,
    /// for comparison with the analytic region schedule.
    pub fn steady_state(&self) -> Result<SteadyStateConfig> {
        let (a1, vdc1) = match &self.feedback {
            Some(fb) => (fb.k * self.amplitude, -fb.vb),
            None => (0.0, 0.0),
        };
        Ok(SteadyStateConfig { a: self.amplitude, vdc0: self.vdc, a1, vdc1, omega: TAU * self.frequency()? })
    }
}

type State = [f64; 6];

/// Fixed-step integrator; `simulate` drives it, tests can step it directly.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    law: SquareLaw,
    inv_c: f64,
    inv_l: f64,
    g: f64,
    x: State,
    step: u64,
    k: f64,
    vb: f64,
    inv_tau: f64,
    thermal_rng: ChaCha8Rng,
    flicker_rng: ChaCha8Rng,
    flicker: Option<[FlickerSynth; 2]>,
    thermal_scale: f64,
    flicker_scale: f64,
    limit: f64,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let c = config.clone();
        let (k, vb, inv_tau) = match &c.feedback {
            Some(fb) => (fb.k, fb.vb, c.tank.omega0() / HP_CORNER_RATIO),
            None => (0.0, 0.0, 0.0),
        };
        let mut thermal_rng = ChaCha8Rng::seed_from_u64(c.seed);
        thermal_rng.set_stream(1);
        let mut flicker_rng = ChaCha8Rng::seed_from_u64(c.seed);
        flicker_rng.set_stream(2);
        let flicker = if c.noise_enable.flicker {
            let a = FlickerSynth::new(&c.flicker_synth, c.dt, FLICKER_HOLD, &mut flicker_rng)?;
            let b = FlickerSynth::new(&c.flicker_synth, c.dt, FLICKER_HOLD, &mut flicker_rng)?;
            Some([a, b])
        } else {
            None
        };
        let d = &c.device;
        let cap = c.tank.c;
        // One-sided current PSD S over dt carries charge variance S·dt/2.
        let thermal_scale = (2.0 * BOLTZMANN * d.temperature * d.gamma_ch * c.dt).sqrt() / cap;
        let flicker_scale = (d.kf / (d.cox * d.w * d.l)).sqrt() * c.dt / cap;

        let v1 = c.vdd + 0.5 * c.initial_kick;
        let v2 = c.vdd - 0.5 * c.initial_kick;
        let mut sim = Self {
            limit: 10.0 * c.vdd,
            law: SquareLaw::new(&c.device),
            inv_c: 1.0 / c.tank.c,
            inv_l: 1.0 / c.tank.l,
            g: 1.0 / c.tank.rp,
            config: c,
            x: [v1, v2, 0.0, 0.0, 0.0, 0.0],
            step: 0,
            k,
            vb,
            inv_tau,
            thermal_rng,
            flicker_rng,
            flicker,
            thermal_scale,
            flicker_scale,
        };
        // Start the inductors at the DC bias current and the high-pass
        // states at the DC output level.
        let vdd = sim.config.vdd;
        let idc = sim.dc_current();
        sim.x[2] = idc;
        sim.x[3] = idc;
        sim.x[4] = vdd;
        sim.x[5] = vdd;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn state(&self) -> TankState {
        TankState { v1: self.x[0], v2: self.x[1], il1: self.x[2], il2: self.x[3] }
    }

    /// `½C(v1−V_DD)² + ½L·(iL1 − i_dc)²` summed over both nodes, with the
    /// currents measured from their initial DC value.
    pub fn tank_energy(&self) -> f64 {
        let t = &self.config.tank;
        let vdd = self.config.vdd;
        let idc = self.dc_current();
        let e = |v: f64, i: f64| 0.5 * t.c * (v - vdd).powi(2) + 0.5 * t.l * (i - idc).powi(2);
        e(self.x[0], self.x[2]) + e(self.x[1], self.x[3])
    }

    fn dc_current(&self) -> f64 {
        let vdd = self.config.vdd;
        self.law.drain_current(vdd, vdd, -self.vb)
    }

    /// Body voltages `(V_B1, V_B2)`.
    pub fn body_voltages(&self) -> (f64, f64) {
        self.bodies(&self.x)
    }

    #[inline]
    fn bodies(&self, x: &State) -> (f64, f64) {
        if self.config.feedback.is_some() {
            (-self.vb + self.k * (x[0] - x[4]), -self.vb + self.k * (x[1] - x[5]))
        } else {
            (0.0, 0.0)
        }
    }

    /// Regions of M1 and M2 at the current state.
    pub fn regions(&self) -> (OperatingRegion, OperatingRegion) {
        let x = &self.x;
        let (b1, b2) = self.bodies(x);
        (self.law.region(x[1], x[0], b1), self.law.region(x[0], x[1], b2))
    }

    #[inline]
    fn derivative(&self, x: &State) -> State {
        let vdd = self.config.vdd;
        let (b1, b2) = self.bodies(x);
        let id1 = self.law.drain_current(x[1], x[0], b1);
        let id2 = self.law.drain_current(x[0], x[1], b2);
        [
            (x[2] - (x[0] - vdd) * self.g - id1) * self.inv_c,
            (x[3] - (x[1] - vdd) * self.g - id2) * self.inv_c,
            (vdd - x[0]) * self.inv_l,
            (vdd - x[1]) * self.inv_l,
            (x[0] - x[4]) * self.inv_tau,
            (x[1] - x[5]) * self.inv_tau,
        ]
    }

    /// Advance one step.
    pub fn step(&mut self) -> Result<()> {
        let h = self.config.dt;
        let x = self.x;

        let k1 = self.derivative(&x);
        let k2 = self.derivative(&axpy(&x, 0.5 * h, &k1));
        let k3 = self.derivative(&axpy(&x, 0.5 * h, &k2));
        let k4 = self.derivative(&axpy(&x, h, &k3));
        let h6 = h * (1.0 / 6.0);
        let mut next = x;
        for i in 0..6 {
            next[i] += h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }

        let noise = self.config.noise_enable;
        if noise.thermal || noise.flicker {
            let (b1, b2) = self.bodies(&x);
            let gm1 = self.law.transconductance(x[1], x[0], b1);
            let gm2 = self.law.transconductance(x[0], x[1], b2);
            if noise.thermal {
                let xi1: f64 = self.thermal_rng.sample(StandardNormal);
                let xi2: f64 = self.thermal_rng.sample(StandardNormal);
                next[0] -= self.thermal_scale * gm1.max(0.0).sqrt() * xi1;
                next[1] -= self.thermal_scale * gm2.max(0.0).sqrt() * xi2;
            }
            if let Some([f1, f2]) = &mut self.flicker {
                let x1 = f1.next(&mut self.flicker_rng);
                let x2 = f2.next(&mut self.flicker_rng);
                next[0] -= self.flicker_scale * gm1 * x1;
                next[1] -= self.flicker_scale * gm2 * x2;
            }
        }

        self.step += 1;
        let mag = next[0].abs().max(next[1].abs());
        if !(mag <= self.limit) {
            return Err(Error::Instability { step: self.step, magnitude: mag });
        }
        self.x = next;
        Ok(())
    }
}

#[inline]
fn axpy(x: &State, a: f64, d: &State) -> State {
    let mut out = *x;
    for i in 0..6 {
        out[i] += a * d[i];
    }
    out
}

/// Run the configured transient and collect crossings, the decimated
/// trace tail, occupancy and amplitude.
pub fn simulate(config: &SimConfig) -> Result<SimTrace> {
    let mut sim = Simulator::new(config)?;
    let c = sim.config().clone();
    let n = c.steps();
    let dt = c.dt;
    let settle_step = (SETTLE_FRACTION * n as f64).ceil() as u64;
    let check_step = n / 4;
    let period_steps = (c.period() / dt).round() as u64;
    let window_start = check_step.saturating_sub(2 * period_steps);
    let threshold = 0.01 * c.vdd;

    let mut crossings = Vec::with_capacity((c.duration * c.f0() * 1.05) as usize + 8);
    let mut trace = VecDeque::with_capacity(c.trace_points.min(1 << 20));
    let mut counts = [[0u64; 3]; 2];
    let mut steady = 0u64;
    let (mut vsum, mut vmax, mut vmin) = (0.0, f64::NEG_INFINITY, f64::INFINITY);
    let mut window_peak: f64 = 0.0;
    // Last four samples of V_O1 − V_O2, oldest first.
    let mut hist = [0.0; 4];
    let s0 = sim.state();
    hist[3] = s0.v1 - s0.v2;
    let region_index = |r: OperatingRegion| match r {
        OperatingRegion::Saturation => 0,
        OperatingRegion::Triode => 1,
        OperatingRegion::CutOff => 2,
    };

    for j in 1..=n {
        sim.step()?;
        let s = sim.state();
        let vd = s.v1 - s.v2;
        hist.rotate_left(1);
        hist[3] = vd;
        // A rising crossing between samples j−2 and j−1, bracketed by j−3 and j.
        if j >= 3 && hist[1] < 0.0 && hist[2] >= 0.0 {
            let frac = spectrum::cubic_crossing(hist[0], hist[1], hist[2], hist[3]);
            crossings.push(((j - 2) as f64 + frac) * dt);
        }
        if j > window_start && j <= check_step {
            window_peak = window_peak.max(0.5 * vd.abs());
        }
        if j == check_step && window_peak < threshold {
            return Err(Error::NoOscillation { amplitude: window_peak, threshold, time: j as f64 * dt });
        }
        if j >= settle_step {
            steady += 1;
            vsum += s.v1;
            vmax = vmax.max(s.v1);
            vmin = vmin.min(s.v1);
            let (r1, r2) = sim.regions();
            counts[0][region_index(r1)] += 1;
            counts[1][region_index(r2)] += 1;
        }
        if c.trace_points > 0 && j % c.trace_stride as u64 == 0 {
            if trace.len() == c.trace_points {
                trace.pop_front();
            }
            let (b1, b2) = sim.body_voltages();
            trace.push_back(TracePoint { t: j as f64 * dt, v_o1: s.v1, v_o2: s.v2, v_b1: b1, v_b2: b2 });
        }
    }

    let frac = |k: usize, r: usize| counts[k][r] as f64 / steady.max(1) as f64;
    let occupancy = [Transistor::M1, Transistor::M2].map(|tr| {
        let k = tr as usize;
        Occupancy { transistor: tr, saturation: frac(k, 0), triode: frac(k, 1), cutoff: frac(k, 2) }
    });
    Ok(SimTrace {
        dt,
        duration: n as f64 * dt,
        settle_time: settle_step as f64 * dt,
        crossings,
        trace: trace.into(),
        occupancy,
        amplitude: 0.5 * (vmax - vmin),
        vdc: vsum / steady.max(1) as f64,
        feedback: c.feedback,
    })
}

/// `L(Δf)` of a trace after discarding the settle window.
pub fn phase_noise_spectrum(trace: &SimTrace, offsets: &[f64]) -> Result<PhaseNoiseSpectrum> {
    spectrum_from_crossings(trace.steady_crossings(), offsets)
}
