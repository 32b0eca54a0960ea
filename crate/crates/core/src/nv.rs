//! NV sensor eigensystem and the pure-dephasing model of its environment.
//!
//! The sensor ground triplet in the basis {|+1⟩, |0⟩, |−1⟩} is
//!
//! ```text
//! | Δ+ω   0   ε  |
//! |  0    0   0  |
//! |  ε    0  Δ−ω |
//! ```
//!
//! with ω = |γ| B∥ and strain ε. The qubit is |0⟩ ↔ |+⟩, and every coupling
//! along the sensor axis is scaled by λ = ω/√(ε² + ω²) = ⟨+|S_z|+⟩.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::geometry::{axis_111, dipolar_tensor, Frame, Vec3};
use crate::linalg::{embed, spin_operators, ComplexMatrix, C64};
use crate::units;

/// Largest environment dimension accepted for dense evolution.
pub const MAX_ENV_DIM: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorConfig {
    pub id: String,
    /// nm
    pub position: Vec3,
    /// Unit vector.
    pub axis: Vec3,
    /// ε, rad/μs.
    pub strain: f64,
    /// Signed, rad/(μs·G).
    pub gamma: f64,
    /// Δ, rad/μs.
    pub zero_field_splitting: f64,
}

impl SensorConfig {
    /// Sensor along [111] with tabulated NV constants; strain given in MHz.
    pub fn new(id: impl Into<String>, position: Vec3, strain_mhz: f64) -> Self {
        Self {
            id: id.into(),
            position,
            axis: axis_111(),
            strain: units::angular(strain_mhz),
            gamma: units::gamma_nv(),
            zero_field_splitting: units::zero_field_splitting(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() {
            return Err(invalid(format!("sensor {}: non-finite position", self.id)));
        }
        if !(self.strain >= 0.0) || !self.strain.is_finite() {
            return Err(invalid(format!("sensor {}: strain must be finite and >= 0", self.id)));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("sensor {}: axis must be a unit vector", self.id)));
        }
        if !(self.zero_field_splitting > 0.0) || !self.gamma.is_finite() || self.gamma == 0.0 {
            return Err(invalid(format!("sensor {}: zero-field splitting and gamma must be nonzero", self.id)));
        }
        if self.zero_field_splitting < 100.0 * self.strain {
            log::warn!(
                "sensor {}: zero-field splitting is less than 100x the strain; secular treatment is questionable",
                self.id
            );
        }
        Ok(())
    }

    pub fn frame(&self) -> Result<Frame> {
        Frame::from_axis(self.axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldConfig {
    /// Gauss.
    pub magnitude: f64,
    /// Unit vector.
    pub direction: Vec3,
}

impl FieldConfig {
    /// Field of `gauss` along [111].
    pub fn along_111(gauss: f64) -> Self {
        Self { magnitude: gauss, direction: axis_111() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return Err(invalid("field magnitude must be finite and >= 0"));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid("field direction must be a unit vector"));
        }
        Ok(())
    }

    /// Field component along `axis`, gauss.
    pub fn projected(&self, axis: &Vec3) -> f64 {
        self.magnitude * self.direction.dot(axis)
    }

    /// Larmor frequency |γ|·B of a free spin, rad/μs.
    pub fn larmor(&self, gamma: f64) -> f64 {
        gamma.abs() * self.magnitude
    }
}

/// ω_NV = |γ| · |B·axis|.
pub fn sensor_larmor(sensor: &SensorConfig, field: &FieldConfig) -> f64 {
    sensor.gamma.abs() * field.projected(&sensor.axis).abs()
}

/// λ = ω/√(ε² + ω²).
pub fn renormalization_factor(strain: f64, omega_nv: f64) -> Result<f64> {
    if strain == 0.0 && omega_nv == 0.0 {
        return Err(invalid("renormalization factor undefined for zero strain and zero field"));
    }
    if !(strain >= 0.0) || !(omega_nv >= 0.0) {
        return Err(invalid("strain and Larmor frequency must be >= 0"));
    }
    Ok(omega_nv / strain.hypot(omega_nv))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NvEigensystem {
    pub e_plus: f64,
    pub e_zero: f64,
    pub e_minus: f64,
    /// Components on {|+1⟩, |0⟩, |−1⟩}.
    pub plus: [C64; 3],
    pub minus: [C64; 3],
    pub lambda: f64,
    /// E = √(ε² + ω²); the qubit splitting is Δ + E.
    pub splitting: f64,
    pub omega_nv: f64,
    pub strain: f64,
    pub zero_field_splitting: f64,
}

impl NvEigensystem {
    pub fn qubit_frequency(&self) -> f64 {
        self.e_plus - self.e_zero
    }

    /// ⟨+|S_z|−⟩ = −ε/E.
    pub fn sz_plus_minus(&self) -> f64 {
        let p = &self.plus;
        let m = &self.minus;
        (p[0].conj() * m[0] - p[2].conj() * m[2]).re
    }

    /// The 3×3 sensor Hamiltonian this eigensystem diagonalises.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        let d = self.zero_field_splitting;
        let mut h = ComplexMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(d + self.omega_nv, 0.0);
        h[(2, 2)] = C64::new(d - self.omega_nv, 0.0);
        h[(0, 2)] = C64::new(self.strain, 0.0);
        h[(2, 0)] = C64::new(self.strain, 0.0);
        h
    }
}

pub fn nv_eigensystem(sensor: &SensorConfig, field: &FieldConfig) -> Result<NvEigensystem> {
    let omega = sensor_larmor(sensor, field);
    eigensystem_from(sensor.strain, omega, sensor.zero_field_splitting)
}

/// Eigensystem from strain, axial Larmor frequency and Δ (all rad/μs).
pub fn eigensystem_from(strain: f64, omega: f64, zfs: f64) -> Result<NvEigensystem> {
    let lambda = renormalization_factor(strain, omega)?;
    let e = strain.hypot(omega);
    // |+⟩ ∝ (ω+E, ε), |−⟩ ∝ (−ε, ω+E); avoids the cancellation in ω − E.
    let u = omega + e;
    let norm = u.hypot(strain);
    let plus = [C64::new(u / norm, 0.0), C64::new(0.0, 0.0), C64::new(strain / norm, 0.0)];
    let minus = [C64::new(-strain / norm, 0.0), C64::new(0.0, 0.0), C64::new(u / norm, 0.0)];
    Ok(NvEigensystem {
        e_plus: zfs + e,
        e_zero: 0.0,
        e_minus: zfs - e,
        plus,
        minus,
        lambda,
        splitting: e,
        omega_nv: omega,
        strain,
        zero_field_splitting: zfs,
    })
}

/// The remote electron spin being located.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetSpec {
    pub position: Vec3,
    /// Signed, rad/(μs·G).
    pub gamma: f64,
}

impl TargetSpec {
    /// Free electron with the tabulated NV gyromagnetic ratio.
    pub fn electron(position: Vec3) -> Self {
        Self { position, gamma: units::gamma_nv() }
    }
}

/// Spin-1/2 in the environment: `H = larmor·S_z + λ (coupling·S)` in its own
/// frame, with the coupling canonicalised to `(A_⊥, 0, A_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvSpin {
    pub larmor: f64,
    /// Unrenormalised coupling to the sensor's S_z, rad/μs.
    pub coupling: Vec3,
}

impl EnvSpin {
    pub fn from_components(larmor: f64, a_z: f64, a_perp: f64) -> Self {
        Self { larmor, coupling: Vec3::new(a_perp.abs(), 0.0, a_z) }
    }

    pub fn a_z(&self) -> f64 {
        self.coupling.z()
    }

    pub fn a_perp(&self) -> f64 {
        self.coupling.x().hypot(self.coupling.y())
    }
}

fn quantisation_axis(sensor: &SensorConfig, field: &FieldConfig) -> Vec3 {
    if field.magnitude > 0.0 {
        field.direction
    } else {
        sensor.axis
    }
}

/// The target as an environment spin of `sensor`.
pub fn target_env_spin(sensor: &SensorConfig, field: &FieldConfig, target: &TargetSpec) -> Result<EnvSpin> {
    let t = dipolar_tensor(target.position - sensor.position, sensor.gamma, target.gamma)?;
    let a = t.row(&sensor.axis);
    let z = quantisation_axis(sensor, field);
    let a_z = a.dot(&z);
    let a_perp = (a - z * a_z).norm();
    Ok(EnvSpin::from_components(field.larmor(target.gamma), a_z, a_perp))
}

/// Another NV sensor seen from `sensor`, reduced to its |+⟩↔|−⟩ pseudo-spin.
#[derive(Clone, Debug, PartialEq)]
pub struct BystanderSpin {
    pub id: String,
    pub spin: EnvSpin,
    /// axis_i · 𝔸_ij · axis_j, rad/μs.
    pub a_zz: f64,
    /// λ_i λ_j |a_zz|, rad/μs.
    pub renormalized_coupling: f64,
    pub flip_flop_suppressed: bool,
}

pub fn effective_bystander_spin(
    sensor: &SensorConfig,
    other: &SensorConfig,
    field: &FieldConfig,
) -> Result<BystanderSpin> {
    let t = dipolar_tensor(other.position - sensor.position, sensor.gamma, other.gamma)?;
    let a_zz = t.project(&sensor.axis, &other.axis);
    let own = nv_eigensystem(sensor, field)?;
    let eig = nv_eigensystem(other, field)?;
    // S_z of the other sensor on {|+⟩, |−⟩} is λ_j σ_z + ⟨+|S_z|−⟩ σ_x.
    let spin = EnvSpin {
        larmor: 2.0 * eig.splitting,
        coupling: Vec3::new(2.0 * a_zz * eig.sz_plus_minus().abs(), 0.0, 2.0 * a_zz * eig.lambda),
    };
    let renormalized = own.lambda * eig.lambda * a_zz.abs();
    let suppressed = (sensor.strain - other.strain).abs() > 10.0 * renormalized;
    if !suppressed {
        log::warn!(
            "sensors {} and {}: strain difference does not dominate their dipolar coupling; flip-flops are not suppressed",
            sensor.id,
            other.id
        );
    }
    Ok(BystanderSpin {
        id: other.id.clone(),
        spin,
        a_zz,
        renormalized_coupling: renormalized,
        flip_flop_suppressed: suppressed,
    })
}

/// Environment Hamiltonians conditioned on the sensor state.
#[derive(Clone, Debug)]
pub struct DephasingModel {
    pub dim: usize,
    pub lambda: f64,
    /// E = √(ε² + ω²).
    pub splitting: f64,
    pub spins: Vec<EnvSpin>,
    /// Environment Hamiltonian with the sensor in |0⟩.
    pub h_zero: ComplexMatrix,
    /// Environment Hamiltonian with the sensor in |+⟩, including E.
    pub h_plus: ComplexMatrix,
    /// Noise field h = Σ A_k·S_k (unrenormalised).
    pub noise_field: ComplexMatrix,
    /// β = λh (+ h²/2E when the quadratic term is on).
    pub beta: ComplexMatrix,
    /// H₀ = H_env + β/2.
    pub h0: ComplexMatrix,
    pub quadratic: bool,
}

impl DephasingModel {
    /// Builds the model from environment spins directly.
    pub fn from_env_spins(lambda: f64, splitting: f64, spins: &[EnvSpin], quadratic: bool) -> Result<Self> {
        let n = spins.len();
        if n >= usize::BITS as usize || (1usize << n) > MAX_ENV_DIM {
            let dim = if n >= usize::BITS as usize { usize::MAX } else { 1usize << n };
            return Err(Error::DimensionOverflow { dim, max: MAX_ENV_DIM });
        }
        let dim = 1usize << n;
        let dims: Vec<usize> = core::iter::repeat(2).take(n).collect();
        let (sx, sy, sz) = spin_operators(0.5)?;
        let mut h_env = ComplexMatrix::zeros(dim, dim);
        let mut h = ComplexMatrix::zeros(dim, dim);
        for (k, s) in spins.iter().enumerate() {
            let [ax, ay, az] = s.coupling.0;
            let local = sz.scale_real(s.larmor);
            h_env = h_env.add(&embed(&local, k, &dims)?)?;
            let coupling = sx.scale_real(ax).add(&sy.scale_real(ay))?.add(&sz.scale_real(az))?;
            h = h.add(&embed(&coupling, k, &dims)?)?;
        }
        let mut beta = h.scale_real(lambda);
        if quadratic {
            if !(splitting > 0.0) {
                return Err(invalid("quadratic term needs a positive sensor splitting"));
            }
            beta = beta.add(&h.matmul(&h)?.scale_real(0.5 / splitting))?;
        }
        let h0 = h_env.add(&beta.scale_real(0.5))?;
        let h_plus = h_env.add(&beta)?.add(&ComplexMatrix::identity(dim).scale_real(splitting))?;
        Ok(Self {
            dim,
            lambda,
            splitting,
            spins: spins.to_vec(),
            h_zero: h_env,
            h_plus,
            noise_field: h,
            beta,
            h0,
            quadratic,
        })
    }

    /// `H₀ + β/2` (sensor in |+⟩, constant splitting dropped).
    pub fn branch_plus(&self) -> ComplexMatrix {
        self.h0.add(&self.beta.scale_real(0.5)).expect("same shape")
    }

    /// `H₀ − β/2` (sensor in |0⟩).
    pub fn branch_zero(&self) -> ComplexMatrix {
        self.h0.sub(&self.beta.scale_real(0.5)).expect("same shape")
    }
}

/// Pure-dephasing model of `sensor` with an optional target and bystander sensors.
pub fn build_dephasing_model(
    sensor: &SensorConfig,
    field: &FieldConfig,
    target: Option<&TargetSpec>,
    bystanders: &[SensorConfig],
    quadratic: bool,
) -> Result<DephasingModel> {
    sensor.validate()?;
    field.validate()?;
    let eig = nv_eigensystem(sensor, field)?;
    let mut spins = Vec::new();
    if let Some(t) = target {
        spins.push(target_env_spin(sensor, field, t)?);
    }
    for other in bystanders {
        other.validate()?;
        spins.push(effective_bystander_spin(sensor, other, field)?.spin);
    }
    DephasingModel::from_env_spins(eig.lambda, eig.splitting, &spins, quadratic)
}
