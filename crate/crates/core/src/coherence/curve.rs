use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use num_complex::Complex64;

use super::analytic::magnus_cpmg;
use super::exact::ExactEngine;
use super::spectrum::{semiclassical_cpmg, target_noise_spectrum, NoiseSpectrum};
use crate::bath::{cce2_cpmg, BathRealization};
use crate::error::{invalid, Result};
use crate::nv::{
    effective_bystander_spin, nv_eigensystem, target_env_spin, DephasingModel, EnvSpin, FieldConfig, SensorConfig,
    TargetSpec,
};

/// Samples per first-dip window.
pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum EngineKind {
    Magnus,
    #[cfg_attr(feature = "serde", serde(alias = "quantum-exact"))]
    Exact,
    Semiclassical,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Magnus => "magnus",
            EngineKind::Exact => "exact",
            EngineKind::Semiclassical => "semiclassical",
        }
    }
}

impl FromStr for EngineKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnus" => Ok(EngineKind::Magnus),
            "exact" | "quantum-exact" => Ok(EngineKind::Exact),
            "semiclassical" => Ok(EngineKind::Semiclassical),
            other => Err(invalid(alloc::format!("unknown engine '{other}'"))),
        }
    }
}

impl core::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniform time grid `start + j·step`, j = 0..len.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, stop: f64, len: usize) -> Result<Self> {
        if len < 2 || !(stop > start) || !(start >= 0.0) {
            return Err(invalid("time grid needs len >= 2 and 0 <= start < stop"));
        }
        Ok(Self { start, step: (stop - start) / (len - 1) as f64, len })
    }

    /// `samples` points over [0.5, 1.5]·t0.
    pub fn window(t0: f64, samples: usize) -> Result<Self> {
        Self::new(0.5 * t0, 1.5 * t0, samples)
    }

    /// Canonical first-dip window of CPMG-N for a spin of Larmor frequency
    /// `omega_e`: [0.5, 1.5]·πN/ω_e. Curves and libraries share it, so
    /// their samples coincide.
    pub fn first_dip(pulses: usize, omega_e: f64, samples: usize) -> Result<Self> {
        if !(omega_e > 0.0) {
            return Err(crate::Error::NonPositiveFrequency(omega_e));
        }
        Self::window(PI * pulses as f64 / omega_e, samples)
    }

    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn stop(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.at(j)).collect()
    }
}

/// Sampled coherence of one sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceCurve {
    /// μs
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub engine: EngineKind,
    pub pulses: usize,
    pub label: String,
}

/// Everything that shapes one sensor's coherence.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub sensor: SensorConfig,
    pub field: FieldConfig,
    pub target: Option<TargetSpec>,
    pub bystanders: Vec<SensorConfig>,
    pub quadratic: bool,
    pub bath: Option<BathRealization>,
}

impl Scenario {
    pub fn new(sensor: SensorConfig, field: FieldConfig) -> Self {
        Self { sensor, field, target: None, bystanders: Vec::new(), quadratic: false, bath: None }
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_bystanders(mut self, others: Vec<SensorConfig>) -> Self {
        self.bystanders = others;
        self
    }

    /// Environment spins seen by the sensor (target first).
    pub fn env_spins(&self) -> Result<Vec<EnvSpin>> {
        let mut spins = Vec::new();
        if let Some(t) = &self.target {
            spins.push(target_env_spin(&self.sensor, &self.field, t)?);
        }
        for o in &self.bystanders {
            spins.push(effective_bystander_spin(&self.sensor, o, &self.field)?.spin);
        }
        Ok(spins)
    }
}

#[derive(Clone, Debug)]
enum Prepared {
    Magnus,
    Semiclassical(NoiseSpectrum),
    Exact(Vec<ExactEngine>),
}

/// A scenario prepared for repeated CPMG-N evaluation at varying total time.
#[derive(Clone, Debug)]
pub struct CurveEvaluator<'a> {
    kind: EngineKind,
    pulses: usize,
    lambda: f64,
    spins: Vec<EnvSpin>,
    prepared: Prepared,
    bath: Option<&'a BathRealization>,
}

impl<'a> CurveEvaluator<'a> {
    pub fn new(scenario: &'a Scenario, pulses: usize, kind: EngineKind) -> Result<Self> {
        scenario.sensor.validate()?;
        scenario.field.validate()?;
        let eig = nv_eigensystem(&scenario.sensor, &scenario.field)?;
        let spins = scenario.env_spins()?;
        let mut ev = Self::from_spins(eig.lambda, eig.splitting, spins, pulses, kind, scenario.quadratic)?;
        ev.bath = scenario.bath.as_ref();
        Ok(ev)
    }

    /// Evaluator for explicit environment spins of a sensor with factor
    /// `lambda` and splitting `splitting` (no bath).
    pub fn from_spins(
        lambda: f64,
        splitting: f64,
        spins: Vec<EnvSpin>,
        pulses: usize,
        kind: EngineKind,
        quadratic: bool,
    ) -> Result<Self> {
        if pulses == 0 {
            return Err(invalid("pulse count must be >= 1"));
        }
        let prepared = match kind {
            EngineKind::Magnus => Prepared::Magnus,
            EngineKind::Semiclassical => {
                let mut spec = NoiseSpectrum::default();
                for s in &spins {
                    spec.extend(&target_noise_spectrum(s.a_z(), s.a_perp(), lambda, s.larmor));
                }
                Prepared::Semiclassical(spec)
            }
            EngineKind::Exact => {
                if quadratic && spins.len() > 1 {
                    // h² couples the spins; evolve the joint space.
                    let m = DephasingModel::from_env_spins(lambda, splitting, &spins, true)?;
                    Prepared::Exact(alloc::vec![ExactEngine::new(&m)?])
                } else {
                    let mut engines = Vec::with_capacity(spins.len());
                    for s in &spins {
                        let m = DephasingModel::from_env_spins(lambda, splitting, core::slice::from_ref(s), quadratic)?;
                        engines.push(ExactEngine::new(&m)?);
                    }
                    Prepared::Exact(engines)
                }
            }
        };
        Ok(Self { kind, pulses, lambda, spins, prepared, bath: None })
    }

    pub fn engine(&self) -> EngineKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn spins(&self) -> &[EnvSpin] {
        &self.spins
    }

    /// L at total time `t` (μs).
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        let n = self.pulses;
        let env = match &self.prepared {
            Prepared::Magnus => self
                .spins
                .iter()
                .map(|s| magnus_cpmg(n, t, s.a_z(), s.a_perp(), self.lambda, s.larmor))
                .product(),
            Prepared::Semiclassical(spec) => semiclassical_cpmg(spec, n, t)?,
            Prepared::Exact(engines) => {
                engines.iter().map(|e| e.coherence_cpmg(n, t)).fold(Complex64::new(1.0, 0.0), |a, b| a * b).re
            }
        };
        Ok(match self.bath {
            Some(b) => env * cce2_cpmg(b, n, t).re,
            None => env,
        })
    }
}

/// Samples L over `times` for CPMG-N.
pub fn coherence_curve(scenario: &Scenario, pulses: usize, times: &[f64], engine: EngineKind) -> Result<CoherenceCurve> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(invalid("time grid must be non-negative and strictly increasing"));
    }
    let ev = CurveEvaluator::new(scenario, pulses, engine)?;
    let values = times.iter().map(|&t| ev.eval(t)).collect::<Result<Vec<_>>>()?;
    Ok(CoherenceCurve { times: times.to_vec(), values, engine, pulses, label: scenario.sensor.id.clone() })
}
