use core::f64::consts::PI;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::sequence::{cpmg_filter, filter_function, PulseSequence};

/// ω′ = ω_e + λA_z/2.
#[inline]
pub fn shifted_larmor(omega_e: f64, lambda: f64, a_z: f64) -> f64 {
    omega_e + lambda * a_z / 2.0
}

#[inline]
fn magnus_from_filter(a_perp: f64, lambda: f64, w: f64, f: f64) -> f64 {
    if a_perp == 0.0 || lambda == 0.0 || w == 0.0 {
        return 1.0;
    }
    (lambda * a_perp / (2.0 * w) * f).cos()
}

/// L = cos[(λA_⊥/2ω′) F(ω′, t)].
pub fn coherence_magnus(a_z: f64, a_perp: f64, lambda: f64, omega_e: f64, seq: &PulseSequence) -> f64 {
    let w = shifted_larmor(omega_e, lambda, a_z);
    magnus_from_filter(a_perp, lambda, w, filter_function(seq, w))
}

/// [`coherence_magnus`] for CPMG-N at total time `t`.
#[inline]
pub fn magnus_cpmg(n: usize, t: f64, a_z: f64, a_perp: f64, lambda: f64, omega_e: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let w = shifted_larmor(omega_e, lambda, a_z);
    magnus_from_filter(a_perp, lambda, w, cpmg_filter(n, w, t))
}

/// Dip time π(2q−1)N/ω′.
pub fn dip_time(n: usize, q: usize, omega_e: f64, lambda: f64, a_z: f64) -> Result<f64> {
    let w = shifted_larmor(omega_e, lambda, a_z);
    if !(w > 0.0) {
        return Err(Error::NonPositiveFrequency(w));
    }
    if q == 0 || n == 0 {
        return Err(crate::error::invalid("dip order and pulse count start at 1"));
    }
    Ok(PI * (2 * q - 1) as f64 * n as f64 / w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum DepthMode {
    Quantum,
    Semiclassical,
}

/// Depth of the dip: cos(x) or exp(−x²/2) with x = λA_⊥N/ω′.
pub fn dip_depth(n: usize, a_z: f64, a_perp: f64, lambda: f64, omega_e: f64, mode: DepthMode) -> f64 {
    let w = shifted_larmor(omega_e, lambda, a_z);
    if a_perp == 0.0 || lambda == 0.0 {
        return 1.0;
    }
    let x = lambda * a_perp * n as f64 / w;
    match mode {
        DepthMode::Quantum => x.cos(),
        DepthMode::Semiclassical => (-x * x / 2.0).exp(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipPrediction {
    pub order: usize,
    /// μs
    pub time: f64,
    pub depth: f64,
}

/// Predicted dip of order `q` for a single weakly coupled spin.
pub fn predict_dip(
    n: usize,
    q: usize,
    a_z: f64,
    a_perp: f64,
    lambda: f64,
    omega_e: f64,
    mode: DepthMode,
) -> Result<DipPrediction> {
    Ok(DipPrediction {
        order: q,
        time: dip_time(n, q, omega_e, lambda, a_z)?,
        depth: dip_depth(n, a_z, a_perp, lambda, omega_e, mode),
    })
}
