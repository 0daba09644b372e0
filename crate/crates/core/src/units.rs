//! Unit conventions.
//!
//! Time is measured in nanoseconds. Angular frequencies and rates are in
//! rad/ns (equivalently 2π·GHz). Device files quote linewidths and couplings
//! as ordinary frequencies in MHz (the `κ/2π` convention) and coherence times
//! in microseconds; the helpers below convert between the two.

use std::f64::consts::PI;

/// `f` in MHz (as `ω/2π`) to rad/ns.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e-3
}

/// rad/ns to MHz (as `ω/2π`).
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// GHz to rad/ns.
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz
}

/// Decay rate in 1/ns for a lifetime given in µs. Infinite lifetimes map to
/// a zero rate.
pub fn rate_from_us(t_us: f64) -> f64 {
    if t_us.is_infinite() {
        0.0
    } else {
        1.0 / (t_us * 1e3)
    }
}
