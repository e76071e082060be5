//! Numerical building blocks: bracketed root finding and adaptive quadrature.

pub mod quadrature;
pub mod roots;

pub use quadrature::{integrate, integrate_piecewise, Quadrature};
pub use roots::{bisect, brent, golden_section_min, Root};

use std::f64::consts::TAU;

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}
