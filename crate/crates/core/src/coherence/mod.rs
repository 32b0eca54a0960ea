//! Sensor coherence under CPMG control.
//!
//! Three engines are provided: a Gaussian spectral integral
//! ([`coherence_semiclassical`]), the first-order Magnus closed form
//! ([`coherence_magnus`]) and exact bifurcated evolution of the environment
//! ([`ExactEngine`]). [`coherence_curve`] samples any of them over a time grid.

mod analytic;
mod curve;
mod exact;
mod spectrum;

pub use analytic::{
    coherence_magnus, dip_depth, dip_time, magnus_cpmg, predict_dip, shifted_larmor, DepthMode, DipPrediction,
};
pub use curve::{coherence_curve, CoherenceCurve, CurveEvaluator, EngineKind, Scenario, TimeGrid, DEFAULT_SAMPLES};
pub use exact::{coherence_quantum_exact, ExactEngine};
pub use spectrum::{
    coherence_semiclassical, model_noise_spectrum, semiclassical_cpmg, target_noise_spectrum, NoiseSpectrum,
    SpectralLine,
};
