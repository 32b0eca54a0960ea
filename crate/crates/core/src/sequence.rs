//! Dynamical-decoupling schedules and their filter functions.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum SequenceFamily {
    Cpmg,
}

/// Ideal instantaneous π pulses applied at `times` within `[0, total]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub family: SequenceFamily,
    pub pulses: usize,
    /// μs
    pub total: f64,
    /// μs, strictly increasing.
    pub times: Vec<f64>,
    pub note: Option<String>,
}

/// CPMG-N: pulses at `(2k−1)t/2N`, k = 1..N.
pub fn cpmg_times(n: usize, t: f64) -> Result<PulseSequence> {
    if n == 0 {
        return Err(invalid("pulse count must be >= 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("total time must be positive"));
    }
    let times = (1..=n).map(|k| (2 * k - 1) as f64 * t / (2 * n) as f64).collect();
    Ok(PulseSequence { family: SequenceFamily::Cpmg, pulses: n, total: t, times, note: None })
}

impl PulseSequence {
    /// CPMG-N specified by the half pulse spacing τ (t = 2Nτ).
    pub fn cpmg_from_tau(n: usize, tau: f64) -> Result<Self> {
        cpmg_times(n, 2.0 * n as f64 * tau)
    }

    /// XY8-k with ideal pulses, which has the timing of CPMG-8k.
    pub fn xy8(k: usize, t: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("XY8 repetition count must be >= 1"));
        }
        let mut s = cpmg_times(8 * k, t)?;
        s.note = Some(alloc::format!("XY8-{k} evaluated as CPMG-{} (ideal pulses)", 8 * k));
        Ok(s)
    }

    /// Pulse spacing 2τ = t/N.
    pub fn spacing(&self) -> f64 {
        self.total / self.pulses as f64
    }

    /// Free-evolution intervals `(duration, sign)` in time order.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.times.len() + 1);
        let mut prev = 0.0;
        let mut sign = 1.0;
        for &tk in self.times.iter().chain(core::iter::once(&self.total)) {
            out.push((tk - prev, sign));
            prev = tk;
            sign = -sign;
        }
        out
    }
}

/// f(t′) = (−1)^k on [t_k, t_{k+1}), right-continuous at the pulses.
pub fn modulation_function(seq: &PulseSequence, t: f64) -> Result<f64> {
    if !(0.0..=seq.total).contains(&t) {
        return Err(invalid("time outside the sequence"));
    }
    let flips = seq.times.partition_point(|&tk| tk <= t);
    Ok(if flips % 2 == 0 { 1.0 } else { -1.0 })
}

/// F(ω) = |Σ_k (−1)^k (e^{iωt_{k+1}} − e^{iωt_k})| by direct summation.
pub fn filter_function_direct(seq: &PulseSequence, omega: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut prev = Complex64::new(1.0, 0.0);
    let mut sign = 1.0;
    for &tk in seq.times.iter().chain(core::iter::once(&seq.total)) {
        let cur = Complex64::cis(omega * tk);
        acc += (cur - prev) * sign;
        prev = cur;
        sign = -sign;
    }
    acc.norm()
}

/// Filter function of `seq`, closed form for CPMG.
pub fn filter_function(seq: &PulseSequence, omega: f64) -> f64 {
    match seq.family {
        SequenceFamily::Cpmg => cpmg_filter(seq.pulses, omega, seq.total),
    }
}

/// Closed-form CPMG-N filter:
/// `4 sin²(ωt/4N) |trig(ωt/2) / cos(ωt/2N)|`, trig = cos (N odd) or sin (N even).
///
/// The phase ωt is carried as a double-double so the result keeps its
/// relative accuracy near the zeros of F.
pub fn cpmg_filter(n: usize, omega: f64, t: f64) -> f64 {
    let nf = n as f64;
    let x = Phase::product(omega, t);
    let envelope = {
        let s = x.div(4.0 * nf).sin();
        4.0 * s * s
    };
    let u = x.div(2.0 * nf);
    let c = u.cos();
    let ratio = if c.abs() > 0.1 {
        let half = x.div(2.0);
        let num = if n % 2 == 1 { half.cos() } else { half.sin() };
        (num / c).abs()
    } else {
        // Near a pole both factors vanish; with u = π/2 + mπ + δ the ratio
        // is |sin(Nδ)/sin δ| for either parity.
        let k = ((u.hi - FRAC_PI_2) / PI).round() + 0.5;
        let delta = k.mul_add(-PI, u.hi) - k * PI_LO + u.lo;
        if delta.abs() < 1e-12 {
            nf
        } else {
            ((nf * delta).sin() / delta.sin()).abs()
        }
    };
    envelope * ratio
}

/// π − f64(π).
const PI_LO: f64 = 1.2246467991473532e-16;

/// |ωt| as an unevaluated sum hi + lo.
#[derive(Clone, Copy)]
struct Phase {
    hi: f64,
    lo: f64,
}

impl Phase {
    fn product(a: f64, b: f64) -> Self {
        let hi = a * b;
        let lo = a.mul_add(b, -hi);
        if hi < 0.0 {
            Self { hi: -hi, lo: -lo }
        } else {
            Self { hi, lo }
        }
    }

    fn div(self, d: f64) -> Self {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi);
        Self { hi: q, lo: (r + self.lo) / d }
    }

    fn sin(self) -> f64 {
        self.hi.sin() + self.lo * self.hi.cos()
    }

    fn cos(self) -> f64 {
        self.hi.cos() - self.lo * self.hi.sin()
    }
}
