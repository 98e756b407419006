//! Unit conventions shared by every module.

use std::f64::consts::PI;

/// Wavenumber of the probe transition.
pub const K: f64 = 2.0 * PI;

/// Photon coupling constant g²/c.
pub const G2_OVER_C: f64 = 3.0 / (8.0 * PI);

/// Collective decay rate of an infinite array with lattice constant `a`.
pub fn gamma_c_infinite(a: f64) -> f64 {
    3.0 / (4.0 * PI * a * a)
}
