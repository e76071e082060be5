//! One function per subcommand: `write` produces the files, `scalars` the
//! headline numbers used by `sweep`.

use std::f64::consts::TAU;
use std::path::PathBuf;

use lcvco_isf::design::{body_bias_design, design_ratio, feedback_check, feedback_synthesize, DesignSolution, FeedbackRealization};
use lcvco_isf::device::OperatingRegion;
use lcvco_isf::isf::{isf_numeric, EffectiveIsf, Isf, Nmf, NoiseSource, SampledCurve};
use lcvco_isf::metrics::{AnglesReport, IsfMetrics};
use lcvco_isf::output::{schedule_rows, spectrum_rows, write_json, write_rows};
use lcvco_isf::regions::{waveforms_at, BoundaryAngles, PHI_X_NOTE};
use lcvco_isf::sim::{ComparisonReport, PhaseNoiseSpectrum, SimConfig, SimTrace};
use lcvco_isf::{
    boundary_angles, compare_configs, isf_metrics, phase_noise_spectrum, region_at, schedule, simulate, Result,
    SteadyStateConfig, ToolConfig, Transistor,
};
use serde::Serialize;

use crate::{RunOptions, Target};

/// Reference attenuation used when neither `--k` nor `[sim] k` is given.
pub const DEFAULT_K: f64 = 0.33;

const REGIONS: [OperatingRegion; 3] = [OperatingRegion::Saturation, OperatingRegion::Triode, OperatingRegion::CutOff];

#[derive(Debug, Serialize)]
struct Quantity<'a> {
    quantity: &'a str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct OccupancyRow {
    transistor: Transistor,
    region: OperatingRegion,
    occupancy_rad: f64,
    occupancy_deg: f64,
    fraction: f64,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    theta_rad: f64,
    theta_deg: f64,
    region: OperatingRegion,
    isf: f64,
    isf_numeric: f64,
    nmf_flicker: f64,
    nmf_thermal: f64,
    gamma_eff_flicker: f64,
    gamma_eff_thermal: f64,
}

#[derive(Debug, Serialize)]
struct DesignReport {
    a: f64,
    vdc0: f64,
    vth0: f64,
    solution: DesignSolution,
    design_ratio: f64,
    feedback: FeedbackRealization,
    feedback_residual: f64,
}

#[derive(Debug, Serialize)]
struct SimulationReport<'a> {
    frequency_hz: f64,
    amplitude: f64,
    vdc: f64,
    settle_time: f64,
    crossings: usize,
    occupancy: &'a [lcvco_isf::sim::Occupancy; 2],
    steady_state: SteadyStateConfig,
    spectrum: &'a PhaseNoiseSpectrum,
}

fn angles_report(angles: &BoundaryAngles) -> AnglesReport {
    AnglesReport {
        phi1: angles.phi1.into(),
        phi2: angles.phi2.into(),
        phix: angles.phix.into(),
        phi1_raw_rad: angles.phi1_raw,
        phix_note: PHI_X_NOTE.into(),
    }
}

fn design(cfg: &ToolConfig, opts: &RunOptions) -> Result<DesignReport> {
    let ss = cfg.steady_state;
    let vth0 = cfg.device.vth0;
    let solution = body_bias_design(ss.a, ss.vdc0, &cfg.device)?;
    let configured = cfg.sim.as_ref().and_then(|s| s.feedback);
    let k = opts.k.or(configured.map(|f| f.k)).unwrap_or(DEFAULT_K);
    let cc = configured.map_or(lcvco_isf::config::DEFAULT_CC, |f| f.cc);
    let feedback = feedback_synthesize(k, vth0, ss.vdc0, cc)?;
    Ok(DesignReport {
        a: ss.a,
        vdc0: ss.vdc0,
        vth0,
        solution,
        design_ratio: design_ratio(vth0, ss.vdc0)?,
        feedback,
        feedback_residual: feedback_check(&feedback, vth0, ss.vdc0)?,
    })
}

fn curve_rows(eff: [&EffectiveIsf; 2], numeric: &SampledCurve) -> Vec<CurveRow> {
    let nmf = |e: &EffectiveIsf, th: f64, region| -> f64 {
        if region == OperatingRegion::CutOff {
            return 0.0;
        }
        match &e.nmf {
            Nmf::Paper { angles, source } => {
                lcvco_isf::isf::nmf_paper(angles, region, *source, th).map_or(0.0, |v| v.value)
            }
            Nmf::Device(d) => d.eval(th),
            Nmf::Sampled(c) => c.eval(th),
        }
    };
    (0..numeric.len())
        .map(|k| {
            let th = numeric.theta(k);
            let region = region_at(&eff[0].schedule, th);
            let isf = match &eff[0].isf {
                Isf::Cosine(s) => s * th.cos(),
                Isf::Sampled(c) => c.eval(th),
            };
            CurveRow {
                theta_rad: th,
                theta_deg: th.to_degrees(),
                region,
                isf,
                isf_numeric: numeric.values[k],
                nmf_flicker: nmf(eff[0], th, region),
                nmf_thermal: nmf(eff[1], th, region),
                gamma_eff_flicker: eff[0].eval(th),
                gamma_eff_thermal: eff[1].eval(th),
            }
        })
        .collect()
}

fn run_simulation(cfg: &ToolConfig) -> Result<(SimTrace, PhaseNoiseSpectrum)> {
    let trace = simulate(cfg.sim()?)?;
    let spectrum = phase_noise_spectrum(&trace, &cfg.offsets_hz)?;
    Ok((trace, spectrum))
}

fn run_compare(cfg: &ToolConfig) -> Result<ComparisonReport> {
    let proposed: &SimConfig = cfg.sim()?;
    let base = SimConfig { feedback: None, ..proposed.clone() };
    compare_configs(&base, proposed, &cfg.offsets_hz, &cfg.seeds)
}

fn metrics(cfg: &ToolConfig) -> Result<IsfMetrics> {
    isf_metrics(&cfg.steady_state, &cfg.device, &cfg.tank, cfg.flicker_corner_hz, &cfg.offsets_hz)
}

/// Runs `target` and writes its artefacts; returns the written paths.
pub fn write(target: Target, cfg: &ToolConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    match target {
        Target::Regions => {
            let angles = boundary_angles(&cfg.steady_state, &cfg.device)?;
            let scheds = [schedule(&angles, Transistor::M1), schedule(&angles, Transistor::M2)];
            let rows: Vec<_> = scheds.iter().flat_map(schedule_rows).collect();
            write_rows(&emit("regions_schedule.csv"), rows)?;
            let occ = scheds.iter().flat_map(|s| {
                REGIONS.map(|region| {
                    let rad = s.occupancy(region);
                    OccupancyRow {
                        transistor: s.transistor,
                        region,
                        occupancy_rad: rad,
                        occupancy_deg: rad.to_degrees(),
                        fraction: rad / TAU,
                    }
                })
            });
            write_rows(&emit("regions_occupancy.csv"), occ)?;
            write_json(&emit("regions_angles.json"), &angles_report(&angles))?;
        }
        Target::Isf => {
            let ss = &cfg.steady_state;
            let angles = boundary_angles(ss, &cfg.device)?;
            let waveform = SampledCurve::from_fn("v_ds_m1", opts.points, |th| waveforms_at(ss, th, Transistor::M1).vds)?;
            let numeric = isf_numeric(&waveform)?;
            let paper = [NoiseSource::Flicker, NoiseSource::Thermal].map(|s| EffectiveIsf::paper(&angles, s));
            write_rows(&emit("isf_paper.csv"), curve_rows([&paper[0], &paper[1]], &numeric))?;
            let fp = [
                EffectiveIsf::first_principles(ss, &cfg.device, NoiseSource::Flicker, Transistor::M1)?,
                EffectiveIsf::first_principles(ss, &cfg.device, NoiseSource::Thermal, Transistor::M1)?,
            ];
            write_rows(&emit("isf_first_principles.csv"), curve_rows([&fp[0], &fp[1]], &numeric))?;
        }
        Target::Metrics => {
            write_json(&emit("metrics.json"), &metrics(cfg)?)?;
        }
        Target::Design => {
            let rep = design(cfg, opts)?;
            write_json(&emit("design.json"), &rep)?;
            let table = [
                Quantity { quantity: "phi1_star_rad", value: rep.solution.phi1_star_rad },
                Quantity { quantity: "phi1_star_deg", value: rep.solution.phi1_star_deg },
                Quantity { quantity: "a1", value: rep.solution.a1 },
                Quantity { quantity: "vdc1", value: rep.solution.vdc1 },
                Quantity { quantity: "ratio", value: rep.solution.ratio },
                Quantity { quantity: "design_ratio", value: rep.design_ratio },
                Quantity { quantity: "k", value: rep.feedback.k },
                Quantity { quantity: "vb", value: rep.feedback.vb },
                Quantity { quantity: "feedback_residual", value: rep.feedback_residual },
            ];
            write_rows(&emit("design.csv"), table)?;
        }
        Target::Simulate => {
            let (trace, spectrum) = run_simulation(cfg)?;
            write_rows(&emit("trace.csv"), &trace.trace)?;
            write_rows(&emit("spectrum.csv"), spectrum_rows(&spectrum))?;
            let report = SimulationReport {
                frequency_hz: trace.frequency()?,
                amplitude: trace.amplitude,
                vdc: trace.vdc,
                settle_time: trace.settle_time,
                crossings: trace.crossings.len(),
                occupancy: &trace.occupancy,
                steady_state: trace.steady_state()?,
                spectrum: &spectrum,
            };
            write_json(&emit("simulate.json"), &report)?;
        }
        Target::Compare => {
            let rep = run_compare(cfg)?;
            write_rows(&emit("compare.csv"), &rep.summary)?;
            write_json(&emit("compare.json"), &rep)?;
        }
    }
    Ok(written)
}

fn at(name: &str, offset: f64) -> String {
    format!("{name}@{offset}")
}

/// Headline numbers of `target`, as `(quantity, value)` pairs.
pub fn scalars(target: Target, cfg: &ToolConfig, opts: &RunOptions) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    match target {
        Target::Regions => {
            let angles = boundary_angles(&cfg.steady_state, &cfg.device)?;
            out.push(("phi1_deg".into(), angles.phi1.degrees()));
            out.push(("phi2_deg".into(), angles.phi2.degrees()));
            out.push(("phix_deg".into(), angles.phix.degrees()));
            let m1 = schedule(&angles, Transistor::M1);
            for r in REGIONS {
                out.push((format!("m1_{}_fraction", r.as_str()), m1.occupancy(r) / TAU));
            }
        }
        Target::Isf => {
            let angles = boundary_angles(&cfg.steady_state, &cfg.device)?;
            let ss = &cfg.steady_state;
            let pairs = [
                ("c0_paper", EffectiveIsf::paper(&angles, NoiseSource::Flicker), true),
                ("rms2_paper", EffectiveIsf::paper(&angles, NoiseSource::Thermal), false),
                (
                    "c0_first_principles",
                    EffectiveIsf::first_principles(ss, &cfg.device, NoiseSource::Flicker, Transistor::M1)?,
                    true,
                ),
                (
                    "rms2_first_principles",
                    EffectiveIsf::first_principles(ss, &cfg.device, NoiseSource::Thermal, Transistor::M1)?,
                    false,
                ),
            ];
            for (name, eff, dc) in pairs {
                let v = if dc { lcvco_isf::metrics::c0(&eff)? } else { lcvco_isf::metrics::rms2(&eff)? };
                out.push((name.into(), v));
            }
        }
        Target::Metrics => {
            let m = metrics(cfg)?;
            out.push(("c0_quadrature".into(), m.c0.quadrature));
            out.push(("c0_closed_form".into(), m.c0.closed_form));
            out.push(("rms2_quadrature".into(), m.rms2.quadrature));
            out.push(("rms2_closed_form".into(), m.rms2.closed_form));
            for p in &m.phase_noise {
                out.push((at("L_flicker_dbc_hz", p.offset_hz), p.flicker_dbc));
                out.push((at("L_thermal_dbc_hz", p.offset_hz), p.thermal_dbc));
            }
        }
        Target::Design => {
            let rep = design(cfg, opts)?;
            out.push(("phi1_star_deg".into(), rep.solution.phi1_star_deg));
            out.push(("a1".into(), rep.solution.a1));
            out.push(("vdc1".into(), rep.solution.vdc1));
            out.push(("ratio".into(), rep.solution.ratio));
            out.push(("design_ratio".into(), rep.design_ratio));
            out.push(("vb".into(), rep.feedback.vb));
            out.push(("feedback_residual".into(), rep.feedback_residual));
        }
        Target::Simulate => {
            let (trace, spectrum) = run_simulation(cfg)?;
            out.push(("frequency_hz".into(), trace.frequency()?));
            out.push(("amplitude".into(), trace.amplitude));
            out.push(("vdc".into(), trace.vdc));
            for p in &spectrum.points {
                out.push((at("L_dbc_hz", p.offset_hz), p.value().unwrap_or(f64::NAN)));
            }
        }
        Target::Compare => {
            let rep = run_compare(cfg)?;
            for s in &rep.summary {
                out.push((at("delta_mean_db", s.offset_hz), s.mean_db.unwrap_or(f64::NAN)));
                out.push((at("seeds_improved", s.offset_hz), s.seeds_improved as f64));
            }
        }
    }
    Ok(out)
}
