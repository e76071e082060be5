//! Phase-noise analysis for body-biased NMOS cross-coupled LC oscillators.
//!
//! The crate walks the chain from a square-law device model with body
//! effect, through the per-transistor operating-region schedule over one
//! oscillation cycle, to impulse sensitivity functions (ISF), noise
//! modulating functions (NMF), their DC and RMS coefficients, and finally
//! close-in phase noise. A body-bias design solver and a noisy transient
//! simulator close the loop; [`config`] and [`output`] handle files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod design;
pub mod device;
pub mod error;
pub mod isf;
pub mod metrics;
pub mod numerics;
pub mod output;
pub mod regions;
pub mod sim;

pub use config::{parse_config, parse_config_str, ToolConfig};
pub use design::{body_bias_design, design_ratio, feedback_check, feedback_synthesize, solve_phi1_star};
pub use device::{DeviceParams, OperatingRegion};
pub use error::{Denominator, Error, Result};
pub use metrics::{isf_metrics, TankParams};
pub use regions::{boundary_angles, region_at, schedule, SteadyStateConfig, Transistor};
pub use sim::{compare_configs, phase_noise_spectrum, simulate, SimConfig};
