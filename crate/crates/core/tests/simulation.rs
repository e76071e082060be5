use std::f64::consts::TAU;

use lcvco_isf::design::feedback_synthesize;
use lcvco_isf::device::OperatingRegion;
use lcvco_isf::regions::{boundary_angles, schedule, Transistor};
use lcvco_isf::sim::{
    compare_configs, phase_noise_spectrum, simulate, welch, Availability, FlickerSynth, FlickerSynthConfig,
    NoiseEnable, SimConfig, DESK_F0_HZ,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short(feedback: bool, periods: f64) -> SimConfig {
    let fb = feedback.then(|| feedback_synthesize(0.33, 0.5, 1.8, 1e-12).unwrap());
    SimConfig { duration: periods / DESK_F0_HZ, ..SimConfig::desk_scale(fb) }
}

#[test]
fn noiseless_trace_sits_below_numerical_floor() {
    let cfg = SimConfig { noise_enable: NoiseEnable::OFF, ..short(false, 20_000.0) };
    let tr = simulate(&cfg).unwrap();
    let spec = phase_noise_spectrum(&tr, &[1e5, 3e5, 1e6]).unwrap();
    for p in &spec.points {
        assert_eq!(p.flag, Availability::Ok);
        assert!(p.l_dbc_hz < -150.0, "{p:?}");
    }
}

#[test]
fn doubling_thermal_psd_adds_three_db() {
    let base = SimConfig { noise_enable: NoiseEnable { thermal: true, flicker: false }, ..short(false, 20_000.0) };
    let mut hot = base.clone();
    hot.device.temperature *= 2.0;
    let offsets = [1e5, 3e5, 1e6];
    let a = phase_noise_spectrum(&simulate(&base).unwrap(), &offsets).unwrap();
    let b = phase_noise_spectrum(&simulate(&hot).unwrap(), &offsets).unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let d = pb.l_dbc_hz - pa.l_dbc_hz;
        assert!((d - 3.0103).abs() < 0.5, "offset {}: {d} dB", pa.offset_hz);
    }
}

#[test]
fn flicker_generator_slope_is_minus_ten_db_per_decade() {
    let cfg = FlickerSynthConfig { num_octave_stages: 12, corner_hz: 1e4 };
    let dt = 2e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut g = FlickerSynth::new(&cfg, dt, 1, &mut rng).unwrap();
    let x: Vec<f64> = (0..1 << 20).map(|_| g.next(&mut rng)).collect();
    let psd = welch(&x, 1.0 / dt, 1 << 16).unwrap();
    let slope = psd.slope_db_per_decade(cfg.corner_hz / 100.0, cfg.corner_hz).unwrap();
    assert!((slope + 10.0).abs() < 1.0, "slope {slope}");
}

#[test]
fn occupancy_matches_analytic_schedule_at_measured_amplitude() {
    for feedback in [false, true] {
        let cfg = SimConfig { noise_enable: NoiseEnable::OFF, ..short(feedback, 4000.0) };
        let tr = simulate(&cfg).unwrap();
        let ss = tr.steady_state().unwrap();
        let angles = boundary_angles(&ss, &cfg.device).unwrap();
        for (k, tr_id) in [Transistor::M1, Transistor::M2].into_iter().enumerate() {
            let sched = schedule(&angles, tr_id);
            for region in [OperatingRegion::Saturation, OperatingRegion::Triode, OperatingRegion::CutOff] {
                let analytic = sched.occupancy(region) / TAU;
                let simulated = tr.occupancy[k].fraction(region);
                assert!(
                    (analytic - simulated).abs() < 0.03,
                    "feedback {feedback} {tr_id:?} {region:?}: {simulated} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn compare_report_is_deterministic() {
    let base = short(false, 2000.0);
    let prop = short(true, 2000.0);
    let a = compare_configs(&base, &prop, &[3e5, 1e6], &[5]).unwrap();
    let b = compare_configs(&base, &prop, &[3e5, 1e6], &[5]).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
