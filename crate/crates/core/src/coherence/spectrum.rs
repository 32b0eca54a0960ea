use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::nv::DephasingModel;
use crate::sequence::{cpmg_filter, filter_function, PulseSequence};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralLine {
    /// rad/μs
    pub omega: f64,
    /// Integrated spectral weight, (rad/μs)².
    pub weight: f64,
}

/// Discrete noise spectrum, symmetric in ω.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseSpectrum {
    pub lines: Vec<SpectralLine>,
}

impl NoiseSpectrum {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn extend(&mut self, other: &NoiseSpectrum) {
        self.lines.extend_from_slice(&other.lines);
    }
}

/// Two lines at ±ω′ with ω′ = ω_e + λA_z/2, each of weight (π/4)(λA_⊥)².
pub fn target_noise_spectrum(a_z: f64, a_perp: f64, lambda: f64, omega_e: f64) -> NoiseSpectrum {
    if a_perp == 0.0 || lambda == 0.0 {
        return NoiseSpectrum::default();
    }
    if lambda * a_z.hypot(a_perp) > 0.1 * omega_e.abs() {
        log::warn!("coupling is not small against the Larmor frequency; the two-line spectrum is approximate");
    }
    let w = omega_e + lambda * a_z / 2.0;
    let weight = PI / 4.0 * (lambda * a_perp) * (lambda * a_perp);
    NoiseSpectrum {
        lines: alloc::vec![SpectralLine { omega: w, weight }, SpectralLine { omega: -w, weight }],
    }
}

/// Spectrum of β under H₀ for a maximally mixed environment:
/// lines at E_m − E_n with weight (2π/d)|β_mn|². Static parts are dropped.
pub fn model_noise_spectrum(model: &DephasingModel) -> Result<NoiseSpectrum> {
    let eig = eigh(&model.h0)?;
    let b = eig.to_eigenbasis(&model.beta)?;
    let d = model.dim;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut lines = Vec::new();
    for m in 0..d {
        for n in 0..d {
            let omega = eig.values[m] - eig.values[n];
            let w = 2.0 * PI / d as f64 * b[(m, n)].norm_sqr();
            if omega.abs() <= 1e-12 * scale || w == 0.0 {
                continue;
            }
            lines.push(SpectralLine { omega, weight: w });
        }
    }
    Ok(NoiseSpectrum { lines })
}

fn gaussian_exponent(spec: &NoiseSpectrum, filter: impl Fn(f64) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for line in &spec.lines {
        if line.omega == 0.0 {
            return Err(Error::ZeroFrequencyLine);
        }
        let f = filter(line.omega);
        acc += line.weight * f * f / (line.omega * line.omega);
    }
    Ok(-acc / (4.0 * PI))
}

/// L = exp[−(1/4π) Σ_k w_k F²(ω_k, t)/ω_k²].
pub fn coherence_semiclassical(spec: &NoiseSpectrum, seq: &PulseSequence) -> Result<f64> {
    Ok(gaussian_exponent(spec, |w| filter_function(seq, w))?.exp())
}

/// [`coherence_semiclassical`] for CPMG-N at total time `t` without building the schedule.
pub fn semiclassical_cpmg(spec: &NoiseSpectrum, n: usize, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok(gaussian_exponent(spec, |w| cpmg_filter(n, w, t))?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nv::EnvSpin;
    use crate::sequence::cpmg_times;

    #[test]
    fn empty_spectrum_is_coherent() {
        let s = target_noise_spectrum(0.3, 0.0, 0.1, 1.76);
        assert!(s.is_empty());
        assert_eq!(coherence_semiclassical(&s, &cpmg_times(30, 50.0).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn lines_sit_at_shifted_larmor() {
        let s = target_noise_spectrum(0.0, 0.2, 0.1, 1.76);
        assert_eq!(s.lines[0].omega, 1.76);
        assert_eq!(s.lines[1].omega, -1.76);
        let s = target_noise_spectrum(-1.3, 0.74, 0.0929, 1.7593);
        assert!((s.lines[0].omega - (1.7593 - 0.0929 * 1.3 / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_frequency_line_rejected() {
        let s = NoiseSpectrum { lines: alloc::vec![SpectralLine { omega: 0.0, weight: 1.0 }] };
        assert_eq!(semiclassical_cpmg(&s, 4, 1.0).unwrap_err(), Error::ZeroFrequencyLine);
    }

    #[test]
    fn depth_at_dip() {
        let (lambda, a_perp, omega_e, n) = (0.09, 0.3, 1.76, 30usize);
        let s = target_noise_spectrum(0.0, a_perp, lambda, omega_e);
        let t = PI * n as f64 / omega_e;
        let l = semiclassical_cpmg(&s, n, t).unwrap();
        let want = (-((n * n) as f64) * (lambda * a_perp).powi(2) / (2.0 * omega_e * omega_e)).exp();
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn off_resonance_is_flat() {
        let (lambda, a_perp, omega_e, n) = (0.09, 0.3, 1.76, 30usize);
        let s = target_noise_spectrum(0.0, a_perp, lambda, omega_e);
        let t = 0.7 * PI * n as f64 / omega_e;
        let l = semiclassical_cpmg(&s, n, t).unwrap();
        assert!((l - 1.0).abs() < 1e-3);
    }

    #[test]
    fn model_spectrum_matches_two_line_form() {
        let (lambda, a_z, a_perp, omega_e) = (0.05, 0.02, 0.03, 1.76);
        let m = DephasingModel::from_env_spins(lambda, 10.0, &[EnvSpin::from_components(omega_e, a_z, a_perp)], false)
            .unwrap();
        let s = model_noise_spectrum(&m).unwrap();
        let t = target_noise_spectrum(a_z, a_perp, lambda, omega_e);
        assert_eq!(s.lines.len(), 2);
        let total: f64 = s.lines.iter().map(|l| l.weight).sum();
        let want: f64 = t.lines.iter().map(|l| l.weight).sum();
        // The eigenbasis of H₀ is tilted by ~λA_⊥/2ω′, which shifts the weight at that order.
        assert!((total - want).abs() / want < 1e-3);
        let wp = s.lines.iter().map(|l| l.omega).fold(0.0f64, f64::max);
        assert!((wp - t.lines[0].omega).abs() < 1e-6);
    }
}
