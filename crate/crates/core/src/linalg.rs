//! Dense complex matrices, a Hermitian eigensolver and spin operators.
//!
//! Sizes here are small (2 to a few hundred), so everything is a plain
//! row-major `Vec`. Matrix exponentials of Hermitian generators go through
//! the eigendecomposition; 2×2 generators have a closed form in [`Mat2Exp`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
use num_traits::{Float, One, Zero};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Relative Hermiticity tolerance accepted by [`propagator`].
pub const HERMITIAN_TOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "({}x{}) * ({}x{})",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::zero() {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "({}x{}) vs ({}x{})",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        Self::from_fn(rows, cols, |r, c| {
            self[(r / rhs.rows, c / rhs.cols)] * rhs[(r % rhs.rows, c % rhs.cols)]
        })
    }

    /// ‖H − H†‖_F / ‖H‖_F (0 for the zero matrix).
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut dev = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                dev += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        dev.sqrt() / norm
    }

    /// ‖U†U − I‖_F.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint().matmul(self).expect("square by construction");
        p.sub(&Self::identity(self.cols)).expect("same shape").frobenius_norm()
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Kronecker product of a nonempty list, in order.
pub fn kron_all(ms: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = ms.split_first().ok_or_else(|| invalid("kron_all of an empty list"))?;
    Ok(rest.iter().fold(first.clone(), |acc, m| acc.kron(m)))
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` in slot `index` of a register with `dims`.
pub fn embed(op: &ComplexMatrix, index: usize, dims: &[usize]) -> Result<ComplexMatrix> {
    if index >= dims.len() || dims[index] != op.rows() || !op.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot embed {}x{} operator at slot {index} of {dims:?}",
            op.rows(),
            op.cols()
        )));
    }
    let before: usize = dims[..index].iter().product();
    let after: usize = dims[index + 1..].iter().product();
    Ok(ComplexMatrix::identity(before).kron(op).kron(&ComplexMatrix::identity(after)))
}

/// Spin matrices (Sx, Sy, Sz) in the Sz eigenbasis ordered m = s, s−1, …, −s.
pub fn spin_operators(s: f64) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    let dim = if s == 0.5 {
        2
    } else if s == 1.0 {
        3
    } else {
        return Err(Error::UnsupportedSpin(s));
    };
    let m = |i: usize| s - i as f64;
    let mut sp = ComplexMatrix::zeros(dim, dim);
    for i in 1..dim {
        // <m+1|S+|m> = sqrt(s(s+1) − m(m+1))
        let mi = m(i);
        sp[(i - 1, i)] = C64::new((s * (s + 1.0) - mi * (mi + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = sp.add(&sm)?.scale_real(0.5);
    let sy = sp.sub(&sm)?.scale(C64::new(0.0, -0.5));
    let sz = ComplexMatrix::from_fn(dim, dim, |r, c| if r == c { C64::new(m(r), 0.0) } else { C64::zero() });
    Ok((sx, sy, sz))
}

/// Eigendecomposition `H = V diag(values) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(−iHt)`.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let phases: Vec<C64> = self.values.iter().map(|&e| C64::cis(-e * t)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = C64::zero();
                for k in 0..n {
                    acc += v[(r, k)] * phases[k] * v[(c, k)].conj();
                }
                out[(r, c)] = acc;
            }
        }
        out
    }

    /// `V† M V`: an operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.vectors.adjoint().matmul(m)?.matmul(&self.vectors)
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
pub fn eigh(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!("eigh of a {}x{} matrix", h.rows(), h.cols())));
    }
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let n = h.rows();
    // Work on the exactly Hermitian part.
    let mut a = ComplexMatrix::from_fn(n, n, |r, c| (h[(r, c)] + h[(c, r)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-16 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-18 * scale {
                    continue;
                }
                let ph = apq / mag; // e^{iφ}
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e = ph.conj(); // e^{−iφ}
                // Columns: A ← A G.
                for r in 0..n {
                    let ap = a[(r, p)];
                    let aq = a[(r, q)];
                    a[(r, p)] = ap * c - aq * e * s;
                    a[(r, q)] = ap * s + aq * e * c;
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * c - vq * e * s;
                    v[(r, q)] = vp * s + vq * e * c;
                }
                // Rows: A ← G† A.
                for col in 0..n {
                    let ap = a[(p, col)];
                    let aq = a[(q, col)];
                    a[(p, col)] = ap * c - aq * ph * s;
                    a[(q, col)] = ap * s + aq * ph * c;
                }
                a[(p, q)] = C64::zero();
                a[(q, p)] = C64::zero();
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// `exp(−iHt)` for Hermitian `H`.
pub fn propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    Ok(eigh(h)?.propagator(t))
}

/// 2×2 complex matrix on the stack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]);

    #[inline]
    pub fn mul(&self, b: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &b.0;
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    #[inline]
    pub fn adjoint(&self) -> Mat2 {
        let a = &self.0;
        Mat2([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |r, c| self.0[r][c])
    }
}

/// Closed-form propagator of a Hermitian 2×2 generator `h0·I + h·σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2Exp {
    pub h0: f64,
    pub h: [f64; 3],
}

impl Mat2Exp {
    /// Decomposes a Hermitian 2×2 matrix into `h0·I + h·σ`.
    pub fn from_hermitian(m: &ComplexMatrix) -> Result<Self> {
        if m.rows() != 2 || m.cols() != 2 {
            return Err(Error::DimensionMismatch(format!("expected 2x2, got {}x{}", m.rows(), m.cols())));
        }
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let off = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
        Ok(Self { h0: 0.5 * (a + d), h: [off.re, -off.im, 0.5 * (a - d)] })
    }

    /// `exp(−i(h0 + h·σ)t)`.
    #[inline]
    pub fn propagator(&self, t: f64) -> Mat2 {
        let [hx, hy, hz] = self.h;
        let norm = (hx * hx + hy * hy + hz * hz).sqrt();
        let phase = C64::cis(-self.h0 * t);
        let (cos, sinc) = if norm * t.abs() < 1e-8 {
            (1.0 - 0.5 * (norm * t) * (norm * t), t)
        } else {
            let (s, c) = (norm * t).sin_cos();
            (c, s / norm)
        };
        // cos·I − i·(sin/|h|)·(h·σ)
        let x = -I * sinc;
        let m = Mat2([
            [C64::new(cos, 0.0) + x * hz, x * C64::new(hx, -hy)],
            [x * C64::new(hx, hy), C64::new(cos, 0.0) - x * hz],
        ]);
        Mat2([[m.0[0][0] * phase, m.0[0][1] * phase], [m.0[1][0] * phase, m.0[1][1] * phase]])
    }
}

/// The few operations the CPMG power routine needs.
pub trait Unitary: Sized + Clone {
    fn identity_like(&self) -> Self;
    fn compose(&self, rhs: &Self) -> Self;
    fn dagger(&self) -> Self;
    fn tr(&self) -> C64;
    fn dimension(&self) -> usize;

    /// `self^k` by repeated squaring.
    fn power(&self, mut k: usize) -> Self {
        let mut acc = self.identity_like();
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.compose(&base);
            }
        }
        acc
    }
}

impl Unitary for Mat2 {
    fn identity_like(&self) -> Self {
        Mat2::IDENTITY
    }
    fn compose(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }
    fn dagger(&self) -> Self {
        self.adjoint()
    }
    fn tr(&self) -> C64 {
        self.trace()
    }
    fn dimension(&self) -> usize {
        2
    }
}

impl Unitary for ComplexMatrix {
    fn identity_like(&self) -> Self {
        ComplexMatrix::identity(self.rows)
    }
    fn compose(&self, rhs: &Self) -> Self {
        self.matmul(rhs).expect("unitaries of equal dimension")
    }
    fn dagger(&self) -> Self {
        self.adjoint()
    }
    fn tr(&self) -> C64 {
        self.trace()
    }
    fn dimension(&self) -> usize {
        self.rows
    }
}

/// `Tr[A† B]` without forming the product.
pub fn overlap_trace<U: Unitary>(a: &U, b: &U) -> C64 {
    a.dagger().compose(b).tr()
}
