//! Vectors, local frames and the magnetic dipole-dipole tensor.

use core::ops::{Add, Mul, Neg, Sub};

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::units::DIPOLAR_PREFACTOR;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);
    pub const Z: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Result<Vec3> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("cannot normalise a zero or non-finite vector"));
        }
        Ok(*self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Unit vector along the crystal [111] direction, the default NV axis.
pub fn axis_111() -> Vec3 {
    let s = 1.0 / 3.0f64.sqrt();
    Vec3([s, s, s])
}

/// Right-handed orthonormal frame with `z` along a given axis.
///
/// The transverse `x` is fixed deterministically: the component of the lab
/// axis least aligned with `z`, orthogonalised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl Frame {
    pub fn from_axis(axis: Vec3) -> Result<Frame> {
        let z = axis.normalized()?;
        let a = z.0.map(f64::abs);
        let pick = if a[0] <= a[1] && a[0] <= a[2] {
            Vec3([1.0, 0.0, 0.0])
        } else if a[1] <= a[2] {
            Vec3([0.0, 1.0, 0.0])
        } else {
            Vec3([0.0, 0.0, 1.0])
        };
        let x = (pick - z * pick.dot(&z)).normalized()?;
        let y = z.cross(&x);
        Ok(Frame { x, y, z })
    }

    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3([v.dot(&self.x), v.dot(&self.y), v.dot(&self.z)])
    }

    pub fn to_global(&self, v: Vec3) -> Vec3 {
        self.x * v.0[0] + self.y * v.0[1] + self.z * v.0[2]
    }
}

/// Polar coordinates (R, θ, φ) of `v` in `frame`; θ ∈ [0, π], φ ∈ (−π, π].
pub fn polar_coordinates(v: Vec3, frame: &Frame) -> (f64, f64, f64) {
    let l = frame.to_local(v);
    let r = l.norm();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (l.z() / r).clamp(-1.0, 1.0).acos();
    let phi = l.y().atan2(l.x());
    (r, theta, phi)
}

/// Point at polar coordinates (R, θ, φ) around `origin` in `frame`.
pub fn from_polar(origin: Vec3, frame: &Frame, r: f64, theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    origin + frame.to_global(Vec3([r * st * cp, r * st * sp, r * ct]))
}

/// Dipole-dipole coupling tensor between two spins, rad/μs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipolarTensor {
    pub tensor: [[f64; 3]; 3],
    pub gamma1: f64,
    pub gamma2: f64,
    pub displacement: Vec3,
}

impl DipolarTensor {
    /// `u · 𝔸 · v`.
    pub fn project(&self, u: &Vec3, v: &Vec3) -> f64 {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += u.0[a] * self.tensor[a][b] * v.0[b];
            }
        }
        acc
    }

    /// `u · 𝔸` as a vector.
    pub fn row(&self, u: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (b, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|a| u.0[a] * self.tensor[a][b]).sum();
        }
        Vec3(out)
    }

    pub fn trace(&self) -> f64 {
        self.tensor[0][0] + self.tensor[1][1] + self.tensor[2][2]
    }
}

/// `𝔸_ab = K γ1 γ2 / R³ (δ_ab − 3 n_a n_b)` for displacement `r` (nm).
pub fn dipolar_tensor(r: Vec3, gamma1: f64, gamma2: f64) -> Result<DipolarTensor> {
    let big_r = r.norm();
    if !(big_r > 0.0) {
        return Err(Error::ZeroDisplacement);
    }
    if !big_r.is_finite() {
        return Err(invalid("non-finite displacement"));
    }
    let n = r * (1.0 / big_r);
    let p = DIPOLAR_PREFACTOR * gamma1 * gamma2 / (big_r * big_r * big_r);
    let mut tensor = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            tensor[a][b] = p * (delta - 3.0 * n.0[a] * n.0[b]);
            tensor[b][a] = tensor[a][b];
        }
    }
    Ok(DipolarTensor { tensor, gamma1, gamma2, displacement: r })
}

/// Longitudinal and transverse dipolar components, scaled by `lambda`.
///
/// Returns `(A_z, A_⊥)` with `A_⊥ ≥ 0`.
pub fn dipolar_components(r: f64, theta: f64, gamma1: f64, gamma2: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("distance must be positive"));
    }
    if !(0.0..=core::f64::consts::PI).contains(&theta) {
        return Err(invalid("polar angle must lie in [0, pi]"));
    }
    let p = lambda * DIPOLAR_PREFACTOR * gamma1 * gamma2 / (r * r * r);
    let (s, c) = theta.sin_cos();
    Ok((p * (1.0 - 3.0 * c * c), (p * 3.0 * s * c).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nv::renormalization_factor;
    use crate::units::{angular, gamma_nv};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // Projection of the full tensor onto a local z and its transverse plane.
    fn project_components(r: f64, theta: f64, phi: f64, lambda: f64) -> (f64, f64) {
        let g = gamma_nv();
        let frame = Frame::from_axis(axis_111()).unwrap();
        let disp = from_polar(Vec3::ZERO, &frame, r, theta, phi);
        let t = dipolar_tensor(disp, g, g).unwrap();
        let z = frame.z;
        let zz = t.project(&z, &z);
        let row = t.row(&z);
        let perp = (row - z * zz).norm();
        (lambda * zz, lambda * perp)
    }

    #[test]
    fn electron_pair_at_one_nm() {
        let g = gamma_nv();
        let t = dipolar_tensor(Vec3::new(0.0, 0.0, 1.0), g, g).unwrap();
        // Prefactor = K γ² / R³; the zz entry is −2× that.
        let pref = -t.tensor[2][2] / 2.0;
        let mhz = pref / angular(1.0);
        assert!((mhz - 52.0).abs() < 0.1, "{mhz}");
    }

    #[test]
    fn zero_displacement_rejected() {
        assert_eq!(dipolar_tensor(Vec3::ZERO, 1.0, 1.0).unwrap_err(), Error::ZeroDisplacement);
        assert!(dipolar_components(0.0, 0.3, 1.0, 1.0, 1.0).is_err());
        assert!(dipolar_components(-1.0, 0.3, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn axial_and_magic_angle() {
        let g = gamma_nv();
        let (_, perp) = dipolar_components(5.0, 0.0, g, g, 1.0).unwrap();
        assert_eq!(perp, 0.0);
        let magic = (1.0 / 3.0f64.sqrt()).acos();
        let (az, _) = dipolar_components(5.0, magic, g, g, 1.0).unwrap();
        assert!(az.abs() < 1e-14);
    }

    #[test]
    fn sensor_a_layout_components() {
        let lambda = renormalization_factor(angular(3.0), 0.1 * gamma_nv().abs()).unwrap();
        let theta = 19.56f64.to_radians();
        let (az, ap) = dipolar_components(7.46, theta, gamma_nv(), gamma_nv(), lambda).unwrap();
        let (oz, op) = project_components(7.46, theta, 0.7, lambda);
        assert!(rel(az, oz) < 1e-10);
        assert!(rel(ap, op) < 1e-10);
        // Raw couplings (λ = 1) frozen from the projection oracle.
        let (rz, rp) = project_components(7.46, theta, 0.0, 1.0);
        assert!((rz - -1.3080).abs() < 1e-3, "{rz}");
        assert!((rp - 0.7440).abs() < 1e-3, "{rp}");
    }

    #[test]
    fn frame_is_orthonormal() {
        for axis in [axis_111(), Vec3::Z, Vec3::new(1.0, -2.0, 0.5)] {
            let f = Frame::from_axis(axis).unwrap();
            assert!((f.x.norm() - 1.0).abs() < 1e-15);
            assert!(f.x.dot(&f.z).abs() < 1e-15);
            assert!((f.x.cross(&f.y).dot(&f.z) - 1.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn tensor_is_symmetric_traceless_and_cubic(x in -9.0f64..9.0, y in -9.0f64..9.0, z in -9.0f64..9.0) {
            let r = Vec3::new(x, y, z);
            prop_assume!(r.norm() > 0.2);
            let g = gamma_nv();
            let t = dipolar_tensor(r, g, g).unwrap();
            let scale = t.tensor[0][0].abs().max(t.tensor[2][2].abs()).max(t.tensor[0][1].abs());
            prop_assert!(t.trace().abs() <= 1e-12 * scale);
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert_eq!(t.tensor[a][b], t.tensor[b][a]);
                }
            }
            let t2 = dipolar_tensor(r * 2.0, g, g).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert!((t2.tensor[a][b] * 8.0 - t.tensor[a][b]).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn components_match_tensor_projection(r in 2.0f64..30.0, theta in 0.0f64..PI, phi in -PI..PI, lambda in 0.01f64..1.0) {
            let g = gamma_nv();
            let (az, ap) = dipolar_components(r, theta, g, g, lambda).unwrap();
            let (oz, op) = project_components(r, theta, phi, lambda);
            let scale = lambda * crate::units::DIPOLAR_PREFACTOR * g * g / (r * r * r);
            prop_assert!((az - oz).abs() <= 1e-10 * scale);
            prop_assert!((ap - op).abs() <= 1e-10 * scale);
        }

        #[test]
        fn components_mirror_symmetric(r in 2.0f64..30.0, theta in 0.0f64..PI) {
            let g = gamma_nv();
            let a = dipolar_components(r, theta, g, g, 0.1).unwrap();
            let b = dipolar_components(r, PI - theta, g, g, 0.1).unwrap();
            let scale = 0.1 * crate::units::DIPOLAR_PREFACTOR * g * g / (r * r * r);
            prop_assert!((a.0 - b.0).abs() <= 1e-13 * scale);
            prop_assert!((a.1 - b.1).abs() <= 1e-13 * scale);
        }
    }
}
