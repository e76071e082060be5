//! Steady-state terminal waveforms of the cross-coupled pair and the
//! operating-region schedule of each transistor over one period.
//!
//! With `s = sin θ` the overdrive of M1 under the linear threshold is
//! `(V_DC0 + n·V_DC1 − V_Th0) + (A − n·A1)·s` and its triode condition is
//! `(2A − n·A1)·s > V_Th0 − n·V_DC1`. Both are affine in `s`, so each
//! boundary is one arcsine angle plus the sign of its denominator:
//!
//! * ON iff `sgn(A − n·A1)·(s + sin φ1) ≥ 0`
//! * saturated (when ON) iff `sgn(2A − n·A1)·(sin φ2 − s) ≥ 0`
//!
//! For the usual case of both slopes positive and `0 ≤ φ1 ≤ φ2` this is
//! saturation on `[0, φ2] ∪ [π−φ2, π+φ1] ∪ [2π−φ1, 2π)`, triode on
//! `(φ2, π−φ2)` and cut-off on `(π+φ1, 2π−φ1)`. The sign form also covers
//! the other orderings, including the body-bias design point where the
//! ON/OFF slope is negative. M2 sees the same waveforms half a period later.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::device::{body_factor, BiasPoint, DeviceParams, OperatingRegion};
use crate::error::{Denominator, Error, Result};
use crate::numerics::wrap_angle;

/// Slack allowed on arcsine arguments before they are flagged invalid.
/// Arguments this close to ±1 also snap to ±1: asin is vertical there, so
/// a rounding error of one ulp in the argument would otherwise open a
/// region interval of about 1e-8 rad.
const ASIN_SLACK: f64 = 1e-12;

/// Note attached to exported φX values.
pub const PHI_X_NOTE: &str = "phiX uses the triode boundary expression without the V_DC0 = A = V_DD substitution";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateConfig {
    /// Output AC amplitude A (V).
    pub a: f64,
    /// Output DC level V_DC0 (V).
    pub vdc0: f64,
    /// Body AC amplitude A1 (V).
    pub a1: f64,
    /// Body DC level V_DC1 (V).
    pub vdc1: f64,
    /// Angular oscillation frequency (rad/s).
    pub omega: f64,
}

impl SteadyStateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::Domain(format!("amplitude a must be positive, got {}", self.a)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Domain(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.a1 >= 0.0) || !self.a1.is_finite() {
            return Err(Error::Domain(format!("body amplitude a1 must be non-negative, got {}", self.a1)));
        }
        if !self.vdc0.is_finite() || !self.vdc1.is_finite() {
            return Err(Error::Domain("DC levels must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transistor {
    M1,
    M2,
}

impl Transistor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Transistor::M1 => "M1",
            Transistor::M2 => "M2",
        }
    }

    /// Phase lag of this device's waveforms relative to M1.
    fn shift(&self) -> f64 {
        match self {
            Transistor::M1 => 0.0,
            Transistor::M2 => PI,
        }
    }
}

impl std::str::FromStr for Transistor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M1" | "m1" => Ok(Transistor::M1),
            "M2" | "m2" => Ok(Transistor::M2),
            other => Err(Error::Argument(format!("unknown transistor '{other}'"))),
        }
    }
}

/// Terminal voltages of a transistor at phase `theta`.
pub fn waveforms_at(config: &SteadyStateConfig, theta: f64, transistor: Transistor) -> BiasPoint {
    let s = match transistor {
        Transistor::M1 => theta.sin(),
        Transistor::M2 => -theta.sin(),
    };
    BiasPoint {
        vgs: config.vdc0 + config.a * s,
        vds: config.vdc0 - config.a * s,
        vbs: config.vdc1 - config.a1 * s,
    }
}

/// An arcsine angle together with its (unclamped) argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    /// Angle in radians, in `[−π/2, π/2]`.
    pub value: f64,
    pub argument: f64,
    /// False when the argument left `[−1, 1]` and was clamped.
    pub valid: bool,
}

impl Angle {
    pub fn from_argument(argument: f64) -> Self {
        let valid = argument.abs() <= 1.0 + ASIN_SLACK;
        let snapped = if (argument.abs() - 1.0).abs() <= ASIN_SLACK { argument.signum() } else { argument };
        Angle {
            value: snapped.clamp(-1.0, 1.0).asin(),
            argument,
            valid,
        }
    }

    pub fn from_radians(value: f64) -> Self {
        Angle { value, argument: value.sin(), valid: value.abs() <= PI / 2.0 + ASIN_SLACK }
    }

    pub fn degrees(&self) -> f64 {
        self.value.to_degrees()
    }

    /// Sine of the (clamped) angle.
    pub fn sin(&self) -> f64 {
        self.argument.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAngles {
    /// ON/OFF angle, positive when the device conducts through `θ = 0`.
    pub phi1: Angle,
    /// Saturation/triode angle.
    pub phi2: Angle,
    /// Auxiliary triode angle used by the closed-form triode NMF.
    pub phix: Angle,
    /// The ON/OFF angle with the opposite sign convention (`−φ1`).
    pub phi1_raw: f64,
    /// Sign of `A − n·A1`.
    pub on_slope: f64,
    /// Sign of `2A − n·A1`.
    pub sat_slope: f64,
}

impl BoundaryAngles {
    /// Angles given directly in radians, with both slopes positive.
    pub fn from_radians(phi1: f64, phi2: f64, phix: f64) -> Self {
        BoundaryAngles {
            phi1: Angle::from_radians(phi1),
            phi2: Angle::from_radians(phi2),
            phix: Angle::from_radians(phix),
            phi1_raw: -phi1,
            on_slope: 1.0,
            sat_slope: 1.0,
        }
    }

    pub fn all_valid(&self) -> bool {
        self.phi1.valid && self.phi2.valid && self.phix.valid
    }

    /// Region of M1 at phase `theta` implied by the angles.
    pub fn m1_region(&self, theta: f64) -> OperatingRegion {
        let s = theta.sin();
        if self.on_slope * (s + self.phi1.sin()) < 0.0 {
            OperatingRegion::CutOff
        } else if self.sat_slope * (self.phi2.sin() - s) >= 0.0 {
            OperatingRegion::Saturation
        } else {
            OperatingRegion::Triode
        }
    }
}

fn checked_ratio(num: f64, den: f64, which: Denominator) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::DegenerateConfig(which));
    }
    Ok(num / den)
}

pub fn boundary_angles(config: &SteadyStateConfig, params: &DeviceParams) -> Result<BoundaryAngles> {
    let n = body_factor(params)?;
    let (a, a1, vdc0, vdc1, vth0) = (config.a, config.a1, config.vdc0, config.vdc1, params.vth0);

    let on_den = a - n * a1;
    let sat_den = 2.0 * a - n * a1;
    let aux_den = (1.0 - n) * a - n * a1;

    let phi1 = Angle::from_argument(checked_ratio(vdc0 + n * vdc1 - vth0, on_den, Denominator::OnOff)?);
    let phi2 = Angle::from_argument(checked_ratio(vth0 - n * vdc1, sat_den, Denominator::SatTriode)?);
    let phix = Angle::from_argument(checked_ratio(
        vth0 - n * vdc1 - (n + 1.0) * vdc0,
        aux_den,
        Denominator::TriodeAux,
    )?);

    Ok(BoundaryAngles {
        phi1,
        phi2,
        phix,
        phi1_raw: -phi1.value,
        on_slope: on_den.signum(),
        sat_slope: sat_den.signum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub region: OperatingRegion,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Half-open intervals `[start, end)` partitioning `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSchedule {
    pub transistor: Transistor,
    pub intervals: Vec<Interval>,
}

impl RegionSchedule {
    /// Total angle spent in `region`.
    pub fn occupancy(&self, region: OperatingRegion) -> f64 {
        self.intervals.iter().filter(|i| i.region == region).map(Interval::len).sum()
    }

    /// Interval boundaries in ascending order, starting at 0 and ending at 2π.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.intervals.iter().map(|i| i.start).collect();
        b.push(TAU);
        b
    }
}

pub fn schedule(angles: &BoundaryAngles, transistor: Transistor) -> RegionSchedule {
    let shift = transistor.shift();
    let (p1, p2) = (angles.phi1.value, angles.phi2.value);
    let mut cuts: Vec<f64> = [PI + p1, TAU - p1, p2, PI - p2]
        .iter()
        .map(|&x| wrap_angle(x - shift))
        .collect();
    cuts.push(0.0);
    cuts.push(TAU);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut intervals: Vec<Interval> = Vec::new();
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let region = angles.m1_region(0.5 * (w[0] + w[1]) + shift);
        match intervals.last_mut() {
            Some(last) if last.region == region => last.end = w[1],
            _ => intervals.push(Interval { start: w[0], end: w[1], region }),
        }
    }
    RegionSchedule { transistor, intervals }
}

pub fn region_at(schedule: &RegionSchedule, theta: f64) -> OperatingRegion {
    let t = wrap_angle(theta);
    let idx = schedule.intervals.partition_point(|i| i.start <= t);
    schedule.intervals[idx.saturating_sub(1)].region
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{classify, tests::reference_device};
    use proptest::prelude::*;

    fn typical() -> SteadyStateConfig {
        // Conventional bias: body grounded, DC at the supply.
        SteadyStateConfig { a: 1.2, vdc0: 1.2, a1: 0.0, vdc1: 0.0, omega: 1.0 }
    }

    #[test]
    fn waveform_examples() {
        let c = SteadyStateConfig { a: 1.8, vdc0: 1.8, a1: 0.3, vdc1: -0.2, omega: 1.0 };
        let b = waveforms_at(&c, 0.0, Transistor::M1);
        assert_eq!((b.vgs, b.vds, b.vbs), (1.8, 1.8, -0.2));
        let b = waveforms_at(&c, PI / 2.0, Transistor::M1);
        assert!((b.vgs - 3.6).abs() < 1e-15 && b.vds.abs() < 1e-15);
        for th in [0.1, 1.3, 4.0] {
            let m2 = waveforms_at(&c, th, Transistor::M2);
            let m1 = waveforms_at(&c, th + PI, Transistor::M1);
            assert!((m2.vgs - m1.vgs).abs() < 1e-14);
            assert!((m2.vds - m1.vds).abs() < 1e-14);
            assert!((m2.vbs - m1.vbs).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_argument_is_clamped_and_flagged() {
        let a = Angle::from_argument(1.2);
        assert!(!a.valid);
        assert_eq!(a.value, PI / 2.0);
        let a = Angle::from_argument(-1.2);
        assert!(!a.valid);
        assert_eq!(a.value, -PI / 2.0);
        assert!(Angle::from_argument(1.0 + 1e-14).valid);
    }

    #[test]
    fn zero_body_factor_ignores_body_amplitude() {
        let mut p = reference_device();
        p.gamma_body = 0.0;
        let mut c = typical();
        let x = boundary_angles(&c, &p).unwrap();
        c.a1 = 0.7;
        let y = boundary_angles(&c, &p).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_denominators_are_named() {
        // n = 0.5 exactly, so the products below cancel without rounding.
        let mut p = reference_device();
        p.phi_s = 1.0;
        let mut c = typical();
        c.a1 = 2.0 * c.a;
        assert!(matches!(boundary_angles(&c, &p), Err(Error::DegenerateConfig(Denominator::OnOff))));
        c.a1 = 4.0 * c.a;
        assert!(matches!(boundary_angles(&c, &p), Err(Error::DegenerateConfig(Denominator::SatTriode))));
        c.a1 = c.a;
        assert!(matches!(boundary_angles(&c, &p), Err(Error::DegenerateConfig(Denominator::TriodeAux))));
    }

    #[test]
    fn conventional_schedule_layout() {
        let angles = BoundaryAngles::from_radians(0.3, 0.9, 0.0);
        let s = schedule(&angles, Transistor::M1);
        let expect = [
            (0.0, 0.9, OperatingRegion::Saturation),
            (0.9, PI - 0.9, OperatingRegion::Triode),
            (PI - 0.9, PI + 0.3, OperatingRegion::Saturation),
            (PI + 0.3, TAU - 0.3, OperatingRegion::CutOff),
            (TAU - 0.3, TAU, OperatingRegion::Saturation),
        ];
        assert_eq!(s.intervals.len(), expect.len());
        for (i, (a, b, r)) in s.intervals.iter().zip(expect) {
            assert!((i.start - a).abs() < 1e-15 && (i.end - b).abs() < 1e-15 && i.region == r);
        }
        let m2 = schedule(&angles, Transistor::M2);
        assert_eq!(region_at(&m2, 0.1), OperatingRegion::Saturation);
        assert_eq!(region_at(&m2, PI / 2.0), OperatingRegion::CutOff);
        assert_eq!(region_at(&m2, 3.0 * PI / 2.0), OperatingRegion::Triode);
    }

    #[test]
    fn right_angle_phi2_removes_triode() {
        let s = schedule(&BoundaryAngles::from_radians(16.172f64.to_radians(), PI / 2.0, 0.0), Transistor::M1);
        assert_eq!(s.occupancy(OperatingRegion::Triode), 0.0);
        assert_eq!(region_at(&s, 0.0), OperatingRegion::Saturation);
        assert_eq!(region_at(&s, 1.5 * PI), OperatingRegion::CutOff);
        assert_eq!(region_at(&s, TAU + 0.01), region_at(&s, 0.01));
    }

    #[test]
    fn both_right_angles_saturate_everywhere() {
        let s = schedule(&BoundaryAngles::from_radians(PI / 2.0, PI / 2.0, 0.0), Transistor::M1);
        assert_eq!(s.intervals.len(), 1);
        assert_eq!(s.intervals[0].region, OperatingRegion::Saturation);
        assert_eq!((s.intervals[0].start, s.intervals[0].end), (0.0, TAU));
    }

    #[test]
    fn boundary_points_belong_to_the_next_interval() {
        let s = schedule(&BoundaryAngles::from_radians(0.3, 0.9, 0.0), Transistor::M1);
        let cut = s.intervals[1].start;
        assert_eq!(region_at(&s, cut), OperatingRegion::Triode);
    }

    fn arb_config() -> impl Strategy<Value = SteadyStateConfig> {
        (0.2f64..2.0, 0.0f64..2.5, 0.0f64..1.5, -1.0f64..0.6)
            .prop_map(|(a, vdc0, a1, vdc1)| SteadyStateConfig { a, vdc0, a1, vdc1, omega: 1.0 })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn schedule_matches_pointwise_classification(c in arb_config()) {
            let p = reference_device();
            let Ok(angles) = boundary_angles(&c, &p) else { return Ok(()) };
            for tr in [Transistor::M1, Transistor::M2] {
                let s = schedule(&angles, tr);
                // Partition of [0, 2π) with distinct neighbours.
                prop_assert_eq!(s.intervals[0].start, 0.0);
                prop_assert_eq!(s.intervals.last().unwrap().end, TAU);
                for w in s.intervals.windows(2) {
                    prop_assert_eq!(w[0].end, w[1].start);
                    prop_assert!(w[0].region != w[1].region);
                }
                let mut mismatches = 0;
                for k in 0..10_000 {
                    let th = TAU * (k as f64 + 0.5) / 10_000.0;
                    if region_at(&s, th) != classify(&p, &waveforms_at(&c, th, tr)) {
                        mismatches += 1;
                    }
                }
                prop_assert_eq!(mismatches, 0);
            }
        }

        #[test]
        fn m2_is_m1_half_a_period_later(c in arb_config(), th in 0.0f64..TAU) {
            let p = reference_device();
            let Ok(angles) = boundary_angles(&c, &p) else { return Ok(()) };
            let m1 = schedule(&angles, Transistor::M1);
            let m2 = schedule(&angles, Transistor::M2);
            prop_assert_eq!(region_at(&m2, th), region_at(&m1, th + PI));
        }

        #[test]
        fn angles_invariant_under_voltage_scaling(c in arb_config(), k in 0.1f64..10.0) {
            let p = reference_device();
            let Ok(x) = boundary_angles(&c, &p) else { return Ok(()) };
            let scaled = SteadyStateConfig { a: k * c.a, vdc0: k * c.vdc0, a1: k * c.a1, vdc1: k * c.vdc1, omega: c.omega };
            let mut q = p;
            q.vth0 *= k;
            let y = boundary_angles(&scaled, &q).unwrap();
            for (u, v) in [(x.phi1, y.phi1), (x.phi2, y.phi2), (x.phix, y.phix)] {
                prop_assert!((u.argument - v.argument).abs() <= 1e-12 * u.argument.abs().max(1.0));
            }
        }
    }
}
