//! ¹³C nuclear spin bath on the diamond lattice and its pair-correlation
//! (CCE-2) contribution to sensor decoherence under CPMG.
//!
//! The bath is treated secularly along the field direction b̂. With the
//! sensor in |+⟩ nucleus m sees a static field a_m = λ (axis·𝔸_m)·b̂; pairs
//! couple through the flip-flop part of their secular dipolar interaction.
//! On the flip-flop subspace {|↑↓⟩, |↓↑⟩} a pair is a pseudo-spin with
//!
//! ```text
//! H₊ = (δ/2) σ_z + X σ_x,   H₀ = X σ_x,   δ = a_m − a_n,   X = −D_zz/4
//! ```
//!
//! while the parallel subspace only picks up phases that an echo removes.

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::coherence::ExactEngine;
use crate::error::{invalid, Result};
use crate::geometry::{dipolar_tensor, Vec3};
use crate::linalg::Mat2Exp;
use crate::nv::{nv_eigensystem, FieldConfig, SensorConfig};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathSpec {
    pub seed: u64,
    pub abundance: f64,
    /// nm
    pub cutoff: f64,
    /// nm
    pub lattice_constant: f64,
    /// Minimum |D_zz| and |δ| for a pair to be kept, rad/μs.
    pub pair_floor: f64,
}

impl BathSpec {
    pub fn natural(seed: u64) -> Self {
        Self {
            seed,
            abundance: units::C13_NATURAL_ABUNDANCE,
            cutoff: 8.0,
            lattice_constant: units::DIAMOND_LATTICE_NM,
            pair_floor: units::angular(1e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(invalid("abundance must lie in [0, 1]"));
        }
        if !(self.cutoff > 0.0) || !(self.lattice_constant > 0.0) || !(self.pair_floor >= 0.0) {
            return Err(invalid("cutoff and lattice constant must be positive, pair floor non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathSpin {
    /// Relative to the sensor, nm.
    pub position: Vec3,
    /// λ·(axis·𝔸), rad/μs.
    pub hyperfine: Vec3,
    /// Secular part along the field, rad/μs.
    pub secular: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathPair {
    pub i: usize,
    pub j: usize,
    /// b̂·𝔻·b̂, rad/μs.
    pub dzz: f64,
    /// a_i − a_j, rad/μs.
    pub detuning: f64,
}

impl BathPair {
    pub fn flip_flop(&self) -> f64 {
        -self.dzz / 4.0
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathRealization {
    pub spec: BathSpec,
    pub sites_in_cutoff: usize,
    pub lambda: f64,
    /// Unit vector b̂.
    pub quantisation_axis: Vec3,
    pub gamma_n: f64,
    pub spins: Vec<BathSpin>,
    /// Sorted by (i, j).
    pub pairs: Vec<BathPair>,
}

/// Carbon sites of a diamond lattice within `cutoff` of a vacancy at the
/// origin, excluding the vacancy and its nitrogen at (a/4)(1,1,1).
/// Order is deterministic (cell x, y, z, then basis).
pub fn carbon_sites(cutoff: f64, a: f64) -> Vec<Vec3> {
    const BASIS: [[f64; 3]; 8] = [
        [0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
        [0.25, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.75, 0.25, 0.75],
        [0.75, 0.75, 0.25],
    ];
    let m = (cutoff / a).ceil() as i64 + 1;
    let c2 = cutoff * cutoff;
    let nitrogen = [0.25, 0.25, 0.25];
    let mut out = Vec::new();
    for x in -m..=m {
        for y in -m..=m {
            for z in -m..=m {
                for b in &BASIS {
                    let f = [x as f64 + b[0], y as f64 + b[1], z as f64 + b[2]];
                    if f == [0.0; 3] || f == nitrogen {
                        continue;
                    }
                    let p = Vec3([f[0] * a, f[1] * a, f[2] * a]);
                    if p.dot(&p) <= c2 {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws a bath around `sensor`: every carbon site within the cutoff hosts a
/// ¹³C with probability `abundance`, decided in site order from a ChaCha8
/// stream seeded with `spec.seed`.
pub fn generate_bath(spec: &BathSpec, sensor: &SensorConfig, field: &FieldConfig) -> Result<BathRealization> {
    spec.validate()?;
    sensor.validate()?;
    field.validate()?;
    let lambda = nv_eigensystem(sensor, field)?.lambda;
    let b = if field.magnitude > 0.0 { field.direction } else { sensor.axis };
    let gamma_n = units::gamma_c13();
    let sites = carbon_sites(spec.cutoff, spec.lattice_constant);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spins = Vec::new();
    for &p in &sites {
        if uniform(&mut rng) < spec.abundance {
            let t = dipolar_tensor(p, sensor.gamma, gamma_n)?;
            let hyperfine = t.row(&sensor.axis) * lambda;
            spins.push(BathSpin { position: p, hyperfine, secular: hyperfine.dot(&b) });
        }
    }
    let pairs = enumerate_pairs(&spins, gamma_n, &b, spec.pair_floor)?;
    Ok(BathRealization {
        spec: *spec,
        sites_in_cutoff: sites.len(),
        lambda,
        quantisation_axis: b,
        gamma_n,
        spins,
        pairs,
    })
}

fn enumerate_pairs(spins: &[BathSpin], gamma_n: f64, b: &Vec3, floor: f64) -> Result<Vec<BathPair>> {
    // |D_zz| ≤ 2Kγ²/r³ bounds the search radius.
    let k = 2.0 * units::DIPOLAR_PREFACTOR * gamma_n * gamma_n;
    let r_max2 = if floor > 0.0 { (k / floor).powf(2.0 / 3.0) } else { f64::INFINITY };
    let mut pairs = Vec::new();
    for i in 0..spins.len() {
        for j in i + 1..spins.len() {
            let d = spins[j].position - spins[i].position;
            if d.dot(&d) > r_max2 {
                continue;
            }
            let dzz = dipolar_tensor(d, gamma_n, gamma_n)?.project(b, b);
            let detuning = spins[i].secular - spins[j].secular;
            if dzz.abs() > floor && detuning.abs() > floor {
                pairs.push(BathPair { i, j, dzz, detuning });
            }
        }
    }
    Ok(pairs)
}

fn pseudo_spin_engine(pair: &BathPair) -> ExactEngine {
    let x = pair.flip_flop();
    ExactEngine::qubit(
        Mat2Exp { h0: 0.0, h: [x, 0.0, pair.detuning / 2.0] },
        Mat2Exp { h0: 0.0, h: [x, 0.0, 0.0] },
    )
}

/// Pair coherence on the full 4-dimensional pair space under CPMG-N.
pub fn pair_cluster_coherence(pair: &BathPair, n: usize, t: f64) -> Complex64 {
    let l = pseudo_spin_engine(pair).coherence_cpmg(n, t);
    (Complex64::new(1.0, 0.0) + l) * 0.5
}

/// Single-spin contribution cos(a∫f/2) − i sin(a∫f/2); unity for CPMG.
fn single_spin(_spin: &BathSpin, _n: usize, _t: f64) -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Counts of pair correlations kept raw because the sub-cluster product was below 1e-12.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClampReport {
    pub clamped: usize,
}

/// CCE-2 coherence of `pairs` at one time: Π L_pair / (L_i L_j).
pub fn cce2_pairs(bath: &BathRealization, pairs: &[BathPair], n: usize, t: f64, report: &mut ClampReport) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for p in pairs {
        let raw = pair_cluster_coherence(p, n, t);
        let sub = single_spin(&bath.spins[p.i], n, t) * single_spin(&bath.spins[p.j], n, t);
        let contrib = if sub.norm() < 1e-12 {
            report.clamped += 1;
            raw
        } else {
            raw / sub
        };
        acc *= contrib;
    }
    acc
}

/// CCE-2 bath coherence at total time `t` over every stored pair.
pub fn cce2_cpmg(bath: &BathRealization, n: usize, t: f64) -> Complex64 {
    let mut report = ClampReport::default();
    let l = cce2_pairs(bath, &bath.pairs, n, t, &mut report);
    if report.clamped > 0 {
        log::warn!("{} pair correlations clamped to their raw value", report.clamped);
    }
    l
}

/// Real part of the CCE-2 coherence over a grid.
pub fn cce2_coherence(bath: &BathRealization, n: usize, times: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| cce2_cpmg(bath, n, t).re).collect()
}

/// Each spin paired only with its nearest bath neighbour (a subset of the
/// stored pairs), used to gauge how far the full pair set has converged.
pub fn nearest_neighbour_pairs(bath: &BathRealization) -> Vec<BathPair> {
    let s = &bath.spins;
    let mut keep = Vec::new();
    for i in 0..s.len() {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..s.len() {
            if i == j {
                continue;
            }
            let d = s[j].position - s[i].position;
            let r2 = d.dot(&d);
            if best.is_none_or(|(b, _)| r2 < b) {
                best = Some((r2, j));
            }
        }
        if let Some((_, j)) = best {
            keep.push((i.min(j), i.max(j)));
        }
    }
    keep.sort_unstable();
    keep.dedup();
    bath.pairs.iter().filter(|p| keep.binary_search(&(p.i, p.j)).is_ok()).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron_all, spin_operators, ComplexMatrix};
    use proptest::prelude::*;

    fn sensor() -> SensorConfig {
        SensorConfig::new("A", Vec3::ZERO, 3.0)
    }

    // Brute-force secular Hamiltonians of a two-spin bath on the 4-dim space.
    fn pair_branches(a1: f64, a2: f64, dzz: f64, zeeman: f64) -> (ComplexMatrix, ComplexMatrix) {
        let (sx, sy, sz) = spin_operators(0.5).unwrap();
        let i2 = ComplexMatrix::identity(2);
        let op = |a: &ComplexMatrix, b: &ComplexMatrix| kron_all(&[a.clone(), b.clone()]).unwrap();
        let zz = op(&sz, &sz);
        let flip = op(&sx, &sx).add(&op(&sy, &sy)).unwrap();
        let dip = zz.sub(&flip.scale_real(0.5)).unwrap().scale_real(dzz);
        let z1 = op(&sz, &i2);
        let z2 = op(&i2, &sz);
        let bare = z1.add(&z2).unwrap().scale_real(zeeman).add(&dip).unwrap();
        let plus = bare.add(&z1.scale_real(a1)).unwrap().add(&z2.scale_real(a2)).unwrap();
        (plus, bare)
    }

    #[test]
    fn zero_abundance_is_empty() {
        let mut spec = BathSpec::natural(1);
        spec.abundance = 0.0;
        spec.cutoff = 3.0;
        let b = generate_bath(&spec, &sensor(), &FieldConfig::along_111(0.1)).unwrap();
        assert!(b.spins.is_empty() && b.pairs.is_empty());
        assert_eq!(cce2_coherence(&b, 30, &[0.0, 100.0, 900.0]), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn site_count_and_poisson_occupancy() {
        let a = units::DIAMOND_LATTICE_NM;
        let cutoff = 4.0;
        let sites = carbon_sites(cutoff, a);
        // 8 atoms per a³ minus vacancy and nitrogen; the shell boundary adds O(R²) noise.
        let expected = 8.0 * 4.0 / 3.0 * core::f64::consts::PI * cutoff.powi(3) / a.powi(3) - 2.0;
        assert!((sites.len() as f64 - expected).abs() / expected < 0.01, "{} vs {expected}", sites.len());
        let mut spec = BathSpec::natural(0);
        spec.cutoff = cutoff;
        for seed in 0..5 {
            spec.seed = seed;
            let b = generate_bath(&spec, &sensor(), &FieldConfig::along_111(0.1)).unwrap();
            let mean = spec.abundance * sites.len() as f64;
            assert!((b.spins.len() as f64 - mean).abs() < 5.0 * mean.sqrt());
        }
    }

    #[test]
    fn nearest_neighbours_are_bonded() {
        let a = units::DIAMOND_LATTICE_NM;
        let sites = carbon_sites(0.5, a);
        let bond = a * 3.0f64.sqrt() / 4.0;
        // Vacancy neighbours other than nitrogen are carbons.
        let n_bonded = sites.iter().filter(|p| (p.norm() - bond).abs() < 1e-9).count();
        assert_eq!(n_bonded, 3);
    }

    #[test]
    fn determinism() {
        let mut spec = BathSpec::natural(42);
        spec.cutoff = 3.0;
        let f = FieldConfig::along_111(0.1);
        assert_eq!(generate_bath(&spec, &sensor(), &f).unwrap(), generate_bath(&spec, &sensor(), &f).unwrap());
    }

    #[test]
    fn invisible_and_static_pairs() {
        let p = BathPair { i: 0, j: 1, dzz: 0.0, detuning: 0.3 };
        let q = BathPair { i: 0, j: 1, dzz: 0.2, detuning: 0.0 };
        for t in [10.0, 300.0, 999.0] {
            assert!((pair_cluster_coherence(&p, 30, t) - 1.0).norm() < 1e-12);
            assert!((pair_cluster_coherence(&q, 30, t) - 1.0).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn pair_matches_four_level_exact(a1 in -0.5f64..0.5, a2 in -0.5f64..0.5, dzz in -0.01f64..0.01,
                                         zeeman in 0.0f64..0.01, n in 1usize..40, t in 1.0f64..1000.0) {
            let (hp, h0) = pair_branches(a1, a2, dzz, zeeman);
            let exact = ExactEngine::from_branches(&hp, &h0).unwrap().coherence_cpmg(n, t);
            let pair = BathPair { i: 0, j: 1, dzz, detuning: a1 - a2 };
            let cce = pair_cluster_coherence(&pair, n, t);
            prop_assert!((exact - cce).norm() < 1e-10, "exact {} cce {}", exact, cce);
        }
    }
}
