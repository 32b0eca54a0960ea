use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, ComplexMatrix, HermitianEigen, Mat2Exp, Unitary};
use crate::nv::{DephasingModel, MAX_ENV_DIM};
use crate::sequence::{PulseSequence, SequenceFamily};

#[derive(Clone, Debug)]
enum Backend {
    Scalar,
    Qubit { a: Mat2Exp, b: Mat2Exp },
    Dense { a: HermitianEigen, b: HermitianEigen },
}

/// Exact bifurcated evolution: L = (1/d) Tr[U₀† U₊], where U₊ (U₀) evolves
/// the environment with the sensor starting in |+⟩ (|0⟩) and swapping
/// branches at every pulse.
///
/// Branch Hamiltonians are H₀ ± β/2; the sensor splitting is a c-number
/// that cancels for balanced sequences and is dropped (rotating frame).
#[derive(Clone, Debug)]
pub struct ExactEngine {
    backend: Backend,
    dim: usize,
}

impl ExactEngine {
    pub fn new(model: &DephasingModel) -> Result<Self> {
        Self::from_branches(&model.branch_plus(), &model.branch_zero())
    }

    /// Engine for branch Hamiltonians `h_a` (sensor in |+⟩) and `h_b` (in |0⟩).
    pub fn from_branches(h_a: &ComplexMatrix, h_b: &ComplexMatrix) -> Result<Self> {
        let dim = h_a.rows();
        if !h_a.is_square() || h_a.rows() != h_b.rows() || !h_b.is_square() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "branch Hamiltonians {}x{} and {}x{}",
                h_a.rows(),
                h_a.cols(),
                h_b.rows(),
                h_b.cols()
            )));
        }
        if dim > MAX_ENV_DIM {
            return Err(Error::DimensionOverflow { dim, max: MAX_ENV_DIM });
        }
        let backend = match dim {
            1 => Backend::Scalar,
            2 => Backend::Qubit { a: Mat2Exp::from_hermitian(h_a)?, b: Mat2Exp::from_hermitian(h_b)? },
            _ => Backend::Dense { a: eigh(h_a)?, b: eigh(h_b)? },
        };
        Ok(Self { backend, dim })
    }

    /// Engine for a two-level environment given in closed form.
    pub fn qubit(a: Mat2Exp, b: Mat2Exp) -> Self {
        Self { backend: Backend::Qubit { a, b }, dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Complex coherence (1/d) Tr[U₀† U₊].
    pub fn coherence_complex(&self, seq: &PulseSequence) -> Complex64 {
        match seq.family {
            SequenceFamily::Cpmg => self.coherence_cpmg(seq.pulses, seq.total),
        }
    }

    pub fn coherence(&self, seq: &PulseSequence) -> f64 {
        self.coherence_complex(seq).re
    }

    /// CPMG-N at total time `t` from two cached half-interval propagators.
    pub fn coherence_cpmg(&self, n: usize, t: f64) -> Complex64 {
        if t == 0.0 || n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let tau = t / (2 * n) as f64;
        match &self.backend {
            Backend::Scalar => Complex64::new(1.0, 0.0),
            Backend::Qubit { a, b } => cpmg_overlap(&a.propagator(tau), &b.propagator(tau), n, self.dim),
            Backend::Dense { a, b } => cpmg_overlap(&a.propagator(tau), &b.propagator(tau), n, self.dim),
        }
    }

    /// Product of one propagator per free-evolution segment; valid for any schedule.
    pub fn coherence_segmentwise(&self, seq: &PulseSequence) -> Complex64 {
        if let Backend::Scalar = self.backend {
            return Complex64::new(1.0, 0.0);
        }
        let mut up: Option<ComplexMatrix> = None;
        let mut u0: Option<ComplexMatrix> = None;
        for (dt, sign) in seq.segments() {
            let (pa, pb) = match &self.backend {
                Backend::Qubit { a, b } => (a.propagator(dt).to_matrix(), b.propagator(dt).to_matrix()),
                Backend::Dense { a, b } => (a.propagator(dt), b.propagator(dt)),
                Backend::Scalar => unreachable!(),
            };
            let (next_p, next_0) = if sign > 0.0 { (pa, pb) } else { (pb, pa) };
            up = Some(match up {
                None => next_p,
                Some(u) => next_p.compose(&u),
            });
            u0 = Some(match u0 {
                None => next_0,
                Some(u) => next_0.compose(&u),
            });
        }
        let (up, u0) = (up.expect("at least one segment"), u0.expect("at least one segment"));
        u0.dagger().compose(&up).tr() / self.dim as f64
    }
}

/// With a = e^{−iH_a τ}, b = e^{−iH_b τ} and C = a·b·b·a, D = b·a·a·b:
/// N even gives U₊ = C^{N/2}, U₀ = D^{N/2}; N odd prepends b·a and a·b.
fn cpmg_overlap<U: Unitary>(a: &U, b: &U, n: usize, dim: usize) -> Complex64 {
    let ab = a.compose(b);
    let ba = b.compose(a);
    let c = ab.compose(&ba);
    let d = ba.compose(&ab);
    let (up, u0) = if n % 2 == 0 {
        (c.power(n / 2), d.power(n / 2))
    } else {
        (ba.compose(&c.power(n / 2)), ab.compose(&d.power(n / 2)))
    };
    u0.dagger().compose(&up).tr() / dim as f64
}

/// Real part of the exact coherence for `model` under `seq`.
pub fn coherence_quantum_exact(model: &DephasingModel, seq: &PulseSequence) -> Result<f64> {
    let l = ExactEngine::new(model)?.coherence_complex(seq);
    if l.im.abs() > 1e-9 {
        log::warn!("exact coherence has imaginary part {:.3e}", l.im);
    }
    Ok(l.re)
}
