//! Conventional-versus-proposed comparison over several seeds.

use serde::{Deserialize, Serialize};

use super::{phase_noise_spectrum, simulate, PhaseNoiseSpectrum, SimConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub base_amplitude: f64,
    pub proposed_amplitude: f64,
    pub base: PhaseNoiseSpectrum,
    pub proposed: PhaseNoiseSpectrum,
    /// `L_base − L_proposed` (dB) per offset; positive is an improvement.
    pub delta_db: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSummary {
    pub offset_hz: f64,
    pub mean_db: Option<f64>,
    /// Sample standard deviation over resolved seeds.
    pub spread_db: Option<f64>,
    pub seeds_resolved: usize,
    pub seeds_improved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub offsets_hz: Vec<f64>,
    pub seeds: Vec<SeedComparison>,
    pub summary: Vec<OffsetSummary>,
}

fn same_except_feedback(a: &SimConfig, b: &SimConfig) -> bool {
    let mut b = b.clone();
    b.feedback = a.feedback;
    *a == b
}

fn delta(base: Option<f64>, proposed: Option<f64>) -> Option<f64> {
    match (base, proposed) {
        (Some(x), Some(y)) if x == y => Some(0.0),
        (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some(x - y),
        _ => None,
    }
}

fn run_pair(base: &SimConfig, proposed: &SimConfig, offsets: &[f64], seed: u64) -> Result<SeedComparison> {
    let run = |cfg: &SimConfig| -> Result<(f64, PhaseNoiseSpectrum)> {
        let trace = simulate(&cfg.with_seed(seed))?;
        Ok((trace.amplitude, phase_noise_spectrum(&trace, offsets)?))
    };
    let (b, p) = join(|| run(base), || run(proposed));
    let ((base_amplitude, base_spec), (proposed_amplitude, proposed_spec)) = (b?, p?);
    let delta_db = base_spec
        .points
        .iter()
        .zip(&proposed_spec.points)
        .map(|(b, p)| delta(b.value(), p.value()))
        .collect();
    Ok(SeedComparison { seed, base_amplitude, proposed_amplitude, base: base_spec, proposed: proposed_spec, delta_db })
}

/// Runs `base` and `proposed` for every seed and summarises
/// `ΔL = L_base − L_proposed` per offset.
pub fn compare_configs(base: &SimConfig, proposed: &SimConfig, offsets: &[f64], seeds: &[u64]) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }
    if !same_except_feedback(base, proposed) {
        return Err(Error::Argument("compared configurations may differ only in feedback".into()));
    }
    let per_seed = map_seeds(seeds, |s| run_pair(base, proposed, offsets, s));
    let seeds_out = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = offsets
        .iter()
        .enumerate()
        .map(|(i, &offset_hz)| {
            let vals: Vec<f64> = seeds_out.iter().filter_map(|s| s.delta_db[i]).collect();
            let n = vals.len();
            let mean = (n > 0).then(|| vals.iter().sum::<f64>() / n as f64);
            let spread = mean.map(|m| {
                if n > 1 {
                    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                }
            });
            OffsetSummary {
                offset_hz,
                mean_db: mean,
                spread_db: spread,
                seeds_resolved: n,
                seeds_improved: vals.iter().filter(|v| **v > 0.0).count(),
            }
        })
        .collect();
    Ok(ComparisonReport { offsets_hz: offsets.to_vec(), seeds: seeds_out, summary })
}

#[cfg(feature = "parallel")]
fn join<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

#[cfg(feature = "parallel")]
fn map_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_seeds<T>(seeds: &[u64], f: impl Fn(u64) -> T) -> Vec<T> {
    seeds.iter().map(|&s| f(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DESK_F0_HZ;

    #[test]
    fn identical_configs_give_zero_improvement() {
        let mut cfg = SimConfig::desk_scale(None);
        cfg.duration = 2000.0 / DESK_F0_HZ;
        let rep = compare_configs(&cfg, &cfg, &[3e5, 1e6], &[7]).unwrap();
        for s in &rep.summary {
            assert_eq!(s.mean_db, Some(0.0));
        }
    }

    #[test]
    fn rejects_configs_differing_elsewhere() {
        let a = SimConfig::desk_scale(None);
        let mut b = a.clone();
        b.vdd = 1.2;
        assert!(matches!(compare_configs(&a, &b, &[1e5], &[1]), Err(Error::Argument(_))));
    }

    #[test]
    fn delta_handles_missing_and_infinite_values() {
        assert_eq!(delta(Some(-100.0), Some(-103.0)), Some(3.0));
        assert_eq!(delta(Some(f64::NEG_INFINITY), Some(f64::NEG_INFINITY)), Some(0.0));
        assert_eq!(delta(Some(-100.0), None), None);
    }
}
