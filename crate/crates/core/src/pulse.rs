//! Shaped-photon drive generation.
//!
//! A transmon prepared in `|f⟩` and driven on the `|f,0⟩ ↔ |g,1⟩` transition
//! with the coupling produced by [`emission_drive`] releases a single photon
//! whose amplitude follows the hyperbolic-secant envelope of
//! [`photon_envelope`]. Driving the receiving node with the time-reversed
//! profile ([`absorption_drive`]) absorbs the same photon.

use serde::{Deserialize, Serialize};

use crate::error::PulseError;
use crate::qops::C64;
use crate::units::{angular_to_mhz, mhz_to_angular};

/// Sampled complex effective coupling `g̃(t) = g_mag(t)·e^{i·phase(t)}`.
///
/// `g_mag`, `kappa_eff` and `kappa_t` are angular rates in rad/ns; `t` is in ns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveEnvelope {
    pub t: Vec<f64>,
    pub g_mag: Vec<f64>,
    pub phase: Vec<f64>,
    pub kappa_eff: f64,
    pub kappa_t: f64,
}

/// Uniform grid `t0, t0+dt, …` with `round((t1-t0)/dt)` steps.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt).round().max(1.0) as usize;
    (0..=n).map(|i| t0 + i as f64 * dt).collect()
}

/// Envelope grid used for exported waveforms: 0.1 ns over ±300 ns.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(-300.0, 300.0, 0.1)
}

fn check_grid(t: &[f64]) -> Result<(), PulseError> {
    if t.len() < 2 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PulseError::BadGrid);
    }
    Ok(())
}

fn trapezoid(t: &[f64], y: impl Fn(usize) -> f64) -> f64 {
    (1..t.len())
        .map(|i| 0.5 * (y(i) + y(i - 1)) * (t[i] - t[i - 1]))
        .sum()
}

impl DriveEnvelope {
    pub fn zero(t: Vec<f64>, kappa_eff: f64, kappa_t: f64) -> Self {
        let n = t.len();
        Self {
            t,
            g_mag: vec![0.0; n],
            phase: vec![0.0; n],
            kappa_eff,
            kappa_t,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn sample(&self, i: usize) -> C64 {
        C64::from_polar(self.g_mag[i], self.phase[i])
    }

    /// Linearly interpolated complex coupling; zero outside the grid.
    pub fn value_at(&self, time: f64) -> C64 {
        let n = self.t.len();
        if n == 0 || time < self.t[0] || time > self.t[n - 1] {
            return C64::new(0.0, 0.0);
        }
        let k = self.t.partition_point(|&x| x <= time);
        if k == 0 {
            return self.sample(0);
        }
        if k >= n {
            return self.sample(n - 1);
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = (time - t0) / (t1 - t0);
        self.sample(k - 1) * (1.0 - w) + self.sample(k) * w
    }

    fn interp_real(&self, values: &[f64], time: f64) -> f64 {
        let k = self.t.partition_point(|&x| x <= time);
        if k == 0 {
            return values[0];
        }
        if k >= self.t.len() {
            return values[values.len() - 1];
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = (time - t0) / (t1 - t0);
        values[k - 1] * (1.0 - w) + values[k] * w
    }

    pub fn peak(&self) -> f64 {
        self.g_mag.iter().copied().fold(0.0, f64::max)
    }

    /// `∫|g̃|² dt` by the trapezoid rule (rad²/ns).
    pub fn energy(&self) -> f64 {
        trapezoid(&self.t, |i| self.g_mag[i] * self.g_mag[i])
    }

    /// Moves the time axis by `offset` without resampling.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.t.iter_mut().for_each(|x| *x += offset);
        out
    }

    /// CSV with columns `t_ns, g_mag_MHz, phase_rad` (9 significant digits).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_ns,g_mag_MHz,phase_rad\n");
        for i in 0..self.t.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                crate::io::fmt9(self.t[i]),
                crate::io::fmt9(angular_to_mhz(self.g_mag[i])),
                crate::io::fmt9(self.phase[i])
            ));
        }
        s
    }
}

/// Photon amplitude `φ(t) = ½√κ_eff · sech(κ_eff t / 2)` (units 1/√ns), so
/// that `∫φ² dt = 1`.
pub fn photon_envelope(t: f64, kappa_eff: f64) -> f64 {
    0.5 * kappa_eff.sqrt() / (0.5 * kappa_eff * t).cosh()
}

/// Coupling that makes a resonator of linewidth `kappa_t` emit the photon of
/// [`photon_envelope`]. Written in a form that stays finite for large `|t|`.
pub fn emission_coupling(t: f64, kappa_eff: f64, kappa_t: f64) -> f64 {
    let r = kappa_t / kappa_eff;
    let x = kappa_eff * t;
    if x < 0.0 {
        let e = x.exp();
        kappa_eff * (0.5 * x).exp() / (2.0 * (1.0 + e)) * (1.0 - e + (1.0 + e) * r)
            / ((1.0 + e) * r - e).sqrt()
    } else {
        let e = (-x).exp();
        kappa_eff / (2.0 * (1.0 + e)) * ((e - 1.0) + (e + 1.0) * r) / ((e + 1.0) * r - 1.0).sqrt()
    }
}

/// Samples the emission coupling on `grid`. Rates in rad/ns.
pub fn emission_drive(grid: &[f64], kappa_eff: f64, kappa_t: f64) -> Result<DriveEnvelope, PulseError> {
    if !(kappa_eff > 0.0) {
        return Err(PulseError::NonPositiveRate(kappa_eff));
    }
    if !(kappa_t > 0.0) {
        return Err(PulseError::NonPositiveRate(kappa_t));
    }
    if kappa_eff > kappa_t * (1.0 + 1e-12) {
        return Err(PulseError::BandwidthTooLarge { kappa_eff, kappa_t });
    }
    check_grid(grid)?;
    let g_mag = grid
        .iter()
        .map(|&t| emission_coupling(t, kappa_eff, kappa_t.max(kappa_eff)))
        .collect();
    Ok(DriveEnvelope {
        t: grid.to_vec(),
        g_mag,
        phase: vec![0.0; grid.len()],
        kappa_eff,
        kappa_t,
    })
}

/// Time-reversed drive `g̃*(−t)`: magnitude mirrored about `t = 0` and the
/// phase profile mirrored and negated.
pub fn absorption_drive(emission: &DriveEnvelope) -> DriveEnvelope {
    absorption_drive_with(emission, true)
}

/// As [`absorption_drive`]; `conjugate = false` mirrors the phase without
/// negating it.
pub fn absorption_drive_with(emission: &DriveEnvelope, conjugate: bool) -> DriveEnvelope {
    let sign = if conjugate { -1.0 } else { 1.0 };
    DriveEnvelope {
        t: emission.t.iter().rev().map(|&x| -x).collect(),
        g_mag: emission.g_mag.iter().rev().copied().collect(),
        phase: emission.phase.iter().rev().map(|&p| sign * p).collect(),
        kappa_eff: emission.kappa_eff,
        kappa_t: emission.kappa_t,
    }
}

/// Calibration of the `f0g1` drive: ac Stark shift `Δ/2π = quad_coeff·ε²`
/// and coupling `g̃/2π = lin_coeff·ε`, both in MHz for a dimensionless drive
/// amplitude `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarkModel {
    pub quad_coeff: f64,
    pub lin_coeff: f64,
}

impl StarkModel {
    /// Node A: unit amplitude gives the 6.0 MHz maximum coupling.
    pub fn node_a() -> Self {
        Self {
            quad_coeff: 12.0,
            lin_coeff: 6.0,
        }
    }

    /// Node B: unit amplitude gives the 6.7 MHz maximum coupling.
    pub fn node_b() -> Self {
        Self {
            quad_coeff: 15.0,
            lin_coeff: 6.7,
        }
    }

    /// Drive amplitude producing coupling `g` (rad/ns).
    pub fn amplitude(&self, g: f64) -> f64 {
        angular_to_mhz(g) / self.lin_coeff
    }

    /// Stark shift (rad/ns) while the coupling is `g`.
    pub fn shift(&self, g: f64) -> f64 {
        let eps = self.amplitude(g);
        mhz_to_angular(self.quad_coeff * eps * eps)
    }
}

/// Phase profile that keeps the drive resonant with the Stark-shifted
/// transition: `phase(t) = −∫ Δ(t′) dt′`, starting from zero.
pub fn stark_phase_track(env: &DriveEnvelope, model: &StarkModel) -> Result<DriveEnvelope, PulseError> {
    if model.lin_coeff == 0.0 {
        return Err(PulseError::ZeroLinearCoefficient);
    }
    let mut out = env.clone();
    let mut acc = 0.0;
    out.phase[0] = 0.0;
    for i in 1..env.t.len() {
        let dt = env.t[i] - env.t[i - 1];
        acc -= 0.5 * (model.shift(env.g_mag[i]) + model.shift(env.g_mag[i - 1])) * dt;
        out.phase[i] = acc;
    }
    Ok(out)
}

/// Switches the drive off from `tau` onwards, freezing the phase at its value
/// at `tau`. A `tau` at the last sample leaves the pulse untouched.
pub fn truncate(env: &DriveEnvelope, tau: f64) -> Result<DriveEnvelope, PulseError> {
    if env.is_empty() || tau < env.start() || tau > env.end() {
        return Err(PulseError::OutsideGrid(tau));
    }
    if tau == env.end() {
        return Ok(env.clone());
    }
    let frozen = env.interp_real(&env.phase, tau);
    let mut out = env.clone();
    for i in 0..out.t.len() {
        if out.t[i] >= tau {
            out.g_mag[i] = 0.0;
            out.phase[i] = frozen;
        }
    }
    Ok(out)
}
