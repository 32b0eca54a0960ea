//! Unit conventions and physical constants.
//!
//! Internal frequencies are angular (rad/μs). Tabulated constants below are
//! the published *linear* values; use [`angular`] to ingest them.

use core::f64::consts::TAU;

/// μ₀ħ/4π in simulation units: `DIPOLAR_PREFACTOR * γ₁ * γ₂ / R³` is the
/// dipolar coupling in rad/μs for γ in rad/(μs·G) and R in nm.
///
/// In SI the coupling is `1e-7 * ħ * γ₁γ₂ / R³`; converting γ (×1e10), R
/// (×1e-9) and the result (÷1e6) leaves ħ·1e34.
pub const DIPOLAR_PREFACTOR: f64 = 1.054_571_817;

/// Zero-field splitting of the NV ground-state triplet, MHz.
pub const ZERO_FIELD_SPLITTING_MHZ: f64 = 2870.0;

/// NV electron gyromagnetic ratio, MHz/G (signed).
pub const GAMMA_NV_MHZ_PER_GAUSS: f64 = -2.8;

/// ¹³C gyromagnetic ratio, MHz/G (signed).
pub const GAMMA_C13_MHZ_PER_GAUSS: f64 = 1.0705e-3;

/// Cubic lattice constant of diamond, nm.
pub const DIAMOND_LATTICE_NM: f64 = 0.357;

/// Natural abundance of ¹³C.
pub const C13_NATURAL_ABUNDANCE: f64 = 0.011;

/// Linear frequency (MHz, or MHz/G) to angular (rad/μs, or rad/(μs·G)).
#[inline]
pub fn angular(linear: f64) -> f64 {
    TAU * linear
}

/// Angular frequency back to linear.
#[inline]
pub fn linear(angular: f64) -> f64 {
    angular / TAU
}

/// NV electron gyromagnetic ratio in rad/(μs·G).
pub fn gamma_nv() -> f64 {
    angular(GAMMA_NV_MHZ_PER_GAUSS)
}

/// ¹³C gyromagnetic ratio in rad/(μs·G).
pub fn gamma_c13() -> f64 {
    angular(GAMMA_C13_MHZ_PER_GAUSS)
}

/// Zero-field splitting Δ in rad/μs.
pub fn zero_field_splitting() -> f64 {
    angular(ZERO_FIELD_SPLITTING_MHZ)
}
