//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON text. The `*_json` functions hold
//! the logic and run natively too, which is how they are tested.

use lcvco_isf::design::{body_bias_design, design_ratio, feedback_synthesize, DesignSolution, FeedbackRealization};
use lcvco_isf::isf::{EffectiveIsf, NoiseSource};
use lcvco_isf::metrics::{c0, rms2};
use lcvco_isf::output::{schedule_rows, ScheduleRow};
use lcvco_isf::sim::SimConfig;
use lcvco_isf::{boundary_angles, schedule, DeviceParams, SteadyStateConfig, Transistor};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Page inputs; missing fields fall back to the desk-scale device.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Inputs {
    pub vdd: f64,
    pub a: f64,
    pub vth0: f64,
    pub gamma_body: f64,
    pub phi_s: f64,
    pub k: f64,
    /// Body drive for `regions`; `None` uses the optimum design.
    pub a1: Option<f64>,
    pub vdc1: Option<f64>,
    /// Samples of the effective ISF curve returned by `regions`.
    pub points: usize,
}

impl Default for Inputs {
    fn default() -> Self {
        let d = SimConfig::desk_scale(None).device;
        Inputs {
            vdd: 1.8,
            a: 1.2,
            vth0: d.vth0,
            gamma_body: d.gamma_body,
            phi_s: d.phi_s,
            k: 0.33,
            a1: None,
            vdc1: None,
            points: 256,
        }
    }
}

impl Inputs {
    fn device(&self) -> DeviceParams {
        DeviceParams {
            vth0: self.vth0,
            gamma_body: self.gamma_body,
            phi_s: self.phi_s,
            ..SimConfig::desk_scale(None).device
        }
    }
}

#[derive(Debug, Serialize)]
struct DesignOut {
    solution: DesignSolution,
    design_ratio: f64,
    feedback: FeedbackRealization,
}

#[derive(Debug, Serialize)]
struct RegionsOut {
    a1: f64,
    vdc1: f64,
    phi1_deg: f64,
    phi2_deg: f64,
    phix_deg: f64,
    schedule: Vec<ScheduleRow>,
    /// `[θ (deg), Γ_eff thermal, Γ_eff flicker]` of M1, closed-form construction.
    curve: Vec<[f64; 3]>,
    c0: f64,
    rms2: f64,
}

fn parse(input: &str) -> Result<Inputs, String> {
    if input.trim().is_empty() {
        return Ok(Inputs::default());
    }
    serde_json::from_str(input).map_err(|e| format!("bad input: {e}"))
}

pub fn design_json(input: &str) -> Result<String, String> {
    let i = parse(input)?;
    let solution = body_bias_design(i.a, i.vdd, &i.device()).map_err(|e| e.to_string())?;
    let out = DesignOut {
        solution,
        design_ratio: design_ratio(i.vth0, i.vdd).map_err(|e| e.to_string())?,
        feedback: feedback_synthesize(i.k, i.vth0, i.vdd, lcvco_isf::config::DEFAULT_CC).map_err(|e| e.to_string())?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn regions_json(input: &str) -> Result<String, String> {
    let i = parse(input)?;
    let p = i.device();
    let (a1, vdc1) = match (i.a1, i.vdc1) {
        (Some(a1), Some(vdc1)) => (a1, vdc1),
        (None, None) => {
            let d = body_bias_design(i.a, i.vdd, &p).map_err(|e| e.to_string())?;
            (d.a1, d.vdc1)
        }
        _ => return Err("give both a1 and vdc1, or neither".into()),
    };
    let ss = SteadyStateConfig { a: i.a, vdc0: i.vdd, a1, vdc1, omega: 1.0 };
    let angles = boundary_angles(&ss, &p).map_err(|e| e.to_string())?;
    let thermal = EffectiveIsf::paper(&angles, NoiseSource::Thermal);
    let flicker = EffectiveIsf::paper(&angles, NoiseSource::Flicker);
    let n = i.points.clamp(16, 4096);
    let curve = (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            [th.to_degrees(), thermal.eval(th), flicker.eval(th)]
        })
        .collect();
    let out = RegionsOut {
        a1,
        vdc1,
        phi1_deg: angles.phi1.degrees(),
        phi2_deg: angles.phi2.degrees(),
        phix_deg: angles.phix.degrees(),
        schedule: [Transistor::M1, Transistor::M2].iter().flat_map(|&t| schedule_rows(&schedule(&angles, t))).collect(),
        curve,
        c0: c0(&flicker).map_err(|e| e.to_string())?,
        rms2: rms2(&thermal).map_err(|e| e.to_string())?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Optimum body drive and feedback realization.
#[wasm_bindgen]
pub fn design(input: &str) -> Result<String, JsValue> {
    design_json(input).map_err(|e| JsValue::from_str(&e))
}

/// Boundary angles, schedules and effective-ISF curves for a body drive.
#[wasm_bindgen]
pub fn regions(input: &str) -> Result<String, JsValue> {
    regions_json(input).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_defaults_match_reference_values() {
        let v: serde_json::Value = serde_json::from_str(&design_json("").unwrap()).unwrap();
        assert!((v["design_ratio"].as_f64().unwrap() - 13.0 / 18.0).abs() < 1e-12);
        assert!((v["feedback"]["vb"].as_f64().unwrap() - 0.429).abs() < 1e-12);
        assert!((v["solution"]["phi1_star_deg"].as_f64().unwrap() - 16.172).abs() < 0.01);
    }

    #[test]
    fn design_point_has_no_triode_interval() {
        let v: serde_json::Value = serde_json::from_str(&regions_json("{}").unwrap()).unwrap();
        let sched = v["schedule"].as_array().unwrap();
        let triode: f64 = sched
            .iter()
            .filter(|r| r["transistor"] == "M1" && r["region"] == "triode")
            .map(|r| r["end_rad"].as_f64().unwrap() - r["start_rad"].as_f64().unwrap())
            .sum();
        assert!(triode < 1e-6, "{triode}");
        assert!(v["c0"].as_f64().unwrap().abs() < 1e-9);
        assert_eq!(v["curve"].as_array().unwrap().len(), 256);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(design_json("{\"vdd\": \"x\"}").is_err());
        assert!(regions_json("{\"a1\": 0.3}").is_err());
    }
}
