//! Dense complex linear algebra for the small Hilbert spaces of the lab.
//!
//! Every space here has dimension at most 64, so operators are stored as
//! plain row-major `Vec<Complex64>` and all routines are direct loops.
//! Tensor products follow the "left factor is the slowest index" convention:
//! `(a ⊗ b)[i * dim_b + j] = a[i] * b[j]`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default absolute tolerance for comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues above this (negative) threshold are treated as round-off and
/// clamped to zero by [`hermitian_sqrt`].
pub const PSD_TOL: f64 = 1e-12;

/// Relative cutoff below which eigenvalues are zeroed before taking roots.
/// Jacobi leaves residues of order `n * eps * |λ_max|` on exactly singular
/// inputs; their square roots would otherwise leak `~1e-8` into fidelities.
const ROOT_CUTOFF: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 100;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub(crate) fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A vector in a finite-dimensional Hilbert space. Not necessarily normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: Vec<Complex64>,
}

impl Ket {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::EmptyDimension);
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { amps })
    }

    /// Builds a ket from real amplitudes.
    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| real(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "ket dimension must be positive");
        Self {
            amps: vec![Complex64::default(); dim],
        }
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut k = Self::zeros(dim);
        k.amps[index] = real(1.0);
        k
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale(real(1.0 / n)))
    }

    pub fn scale(&self, factor: Complex64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Ket) -> Operator {
        assert_eq!(self.dim(), other.dim(), "outer product of unequal dims");
        let n = self.dim();
        Operator::from_fn(n, |i, j| self.amps[i] * other.amps[j].conj())
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> Operator {
        self.outer(self)
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ket { amps }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Contracts the first tensor factor (dimension `self.dim() / rest`) with
    /// the bra `⟨bra|`, leaving an unnormalised vector on the remaining factor.
    pub fn contract_first(&self, bra: &Ket) -> Result<Ket> {
        let first = bra.dim();
        if !self.dim().is_multiple_of(first) {
            return Err(Error::DimensionMismatch {
                expected: first,
                found: self.dim(),
            });
        }
        let rest = self.dim() / first;
        let mut out = vec![Complex64::default(); rest];
        for (s, b) in bra.amps.iter().enumerate() {
            let bc = b.conj();
            for (k, o) in out.iter_mut().enumerate() {
                *o += bc * self.amps[s * rest + k];
            }
        }
        Ok(Ket { amps: out })
    }
}

impl Add for &Ket {
    type Output = Ket;
    fn add(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim());
        Ket {
            amps: self
                .amps
                .iter()
                .zip(&rhs.amps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Ket {
    type Output = Ket;
    fn sub(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim());
        Ket {
            amps: self
                .amps
                .iter()
                .zip(&rhs.amps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<&Ket> for f64 {
    type Output = Ket;
    fn mul(self, rhs: &Ket) -> Ket {
        rhs.scale(real(self))
    }
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<Complex64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self {
            dim,
            data: vec![Complex64::default(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { real(1.0) } else { real(0.0) })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_rows(dim, data.iter().map(|&x| real(x)).collect())
    }

    /// Operator whose columns are the given kets.
    pub fn from_columns(cols: &[Ket]) -> Result<Self> {
        let n = cols.len();
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        if let Some(bad) = cols.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self::from_fn(n, |i, j| cols[j].get(i)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { real(values[i]) } else { real(0.0) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn column(&self, j: usize) -> Ket {
        Ket {
            amps: (0..self.dim).map(|i| self.get(i, j)).collect(),
        }
    }

    pub fn dagger(&self) -> Operator {
        Operator::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "matmul of unequal dims");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::default() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        assert_eq!(self.dim, ket.dim(), "apply of unequal dims");
        let n = self.dim;
        Ket {
            amps: (0..n)
                .map(|i| (0..n).map(|j| self.data[i * n + j] * ket.amps[j]).sum())
                .collect(),
        }
    }

    /// `⟨a|self|b⟩`.
    pub fn sandwich(&self, a: &Ket, b: &Ket) -> Complex64 {
        a.inner(&self.apply(b))
    }

    pub fn tensor(&self, other: &Operator) -> Operator {
        let (n, m) = (self.dim, other.dim);
        Operator::from_fn(n * m, |r, c| {
            self.get(r / m, c / m) * other.get(r % m, c % m)
        })
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.dagger()
            .matmul(self)
            .max_abs_diff(&Operator::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    /// Hermitian within `tol` and no eigenvalue below `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let (values, _) = eigh(self);
        values.iter().all(|&v| v >= -tol)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

/// Hermitian positive-semidefinite operator, possibly sub-normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validates Hermiticity and positivity within `1e-12`.
    pub fn new(op: Operator) -> Result<Self> {
        let residual = op.hermiticity_residual();
        if residual > PSD_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let (values, _) = eigh(&op);
        if let Some(&min) = values.iter().find(|&&v| v < -PSD_TOL) {
            return Err(Error::NotPositive { eigenvalue: min });
        }
        Ok(Self { op })
    }

    /// `|k⟩⟨k|`, keeping the ket's norm as the trace.
    pub fn from_ket(k: &Ket) -> Self {
        Self { op: k.projector() }
    }

    /// Weighted mixture `Σ |k⟩⟨k|` of unnormalised kets.
    pub fn from_kets(kets: &[&Ket]) -> Result<Self> {
        let first = kets.first().ok_or(Error::EmptyInput)?;
        let mut op = Operator::zeros(first.dim());
        for k in kets {
            if k.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: k.dim(),
                });
            }
            op = &op + &k.projector();
        }
        Ok(Self { op })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            op: self.op.scale(real(1.0 / t)),
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            op: self.op.tensor(&other.op),
        }
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Operator) -> DensityMatrix {
        DensityMatrix {
            op: u.matmul(&self.op).matmul(&u.dagger()),
        }
    }
}

/// Tensor product of two kets.
pub fn tensor_kets(a: &Ket, b: &Ket) -> Ket {
    a.tensor(b)
}

/// Tensor product of two operators.
pub fn tensor_ops(a: &Operator, b: &Operator) -> Operator {
    a.tensor(b)
}

/// Partial trace over every factor not listed in `keep`.
///
/// `dims` gives the factor dimensions (left factor slowest) and `keep` the
/// indices of the factors to retain, in the order they should appear.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() || dims.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: total,
        });
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            found: keep.iter().copied().max().unwrap_or(0) + 1,
        });
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Flat index from per-factor digits.
    let flat = |digits: &[usize]| digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d);
    let split = |mut idx: usize, which: &[usize], out: &mut [usize]| {
        for &f in which.iter().rev() {
            out[f] = idx % dims[f];
            idx /= dims[f];
        }
    };

    let op = rho.as_operator();
    let mut out = Operator::zeros(kept_dim);
    let mut row = vec![0usize; dims.len()];
    let mut col = vec![0usize; dims.len()];
    for i in 0..kept_dim {
        split(i, keep, &mut row);
        for j in 0..kept_dim {
            split(j, keep, &mut col);
            let mut acc = Complex64::default();
            for t in 0..traced_dim {
                split(t, &traced, &mut row);
                split(t, &traced, &mut col);
                acc += op.get(flat(&row), flat(&col));
            }
            out.set(i, j, acc);
        }
    }
    Ok(DensityMatrix { op: out })
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues in ascending order and the unitary whose
/// columns are the matching eigenvectors.
///
/// Only the Hermitian part of `m` is used.
pub fn eigh(m: &Operator) -> (Vec<f64>, Operator) {
    let n = m.dim();
    // Work on the Hermitian part so tiny asymmetries cannot stall the sweep.
    let mut a = Operator::from_fn(n, |i, j| (m.get(i, j) + m.get(j, i).conj()) * 0.5);
    let mut v = Operator::identity(n);

    let scale = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    let threshold = f64::EPSILON * f64::EPSILON * scale * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).norm_sqr())
            .sum();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                let pc = phase.conj();
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * pc * s);
                    a.set(k, q, akp * s + akq * pc * c);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * phase * s);
                    a.set(q, k, apk * s + aqk * phase * c);
                }
                a.set(p, q, Complex64::default());
                a.set(q, p, Complex64::default());
                a.set(p, p, real(a.get(p, p).re));
                a.set(q, q, real(a.get(q, q).re));
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * pc * s);
                    v.set(k, q, vkp * s + vkq * pc * c);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
    let values = order.iter().map(|&i| a.get(i, i).re).collect();
    let vectors = Operator::from_fn(n, |r, c| v.get(r, order[c]));
    (values, vectors)
}

/// `V diag(f(λ)) V†` for a Hermitian `m`.
fn spectral_map(values: &[f64], vectors: &Operator, f: impl Fn(f64) -> f64) -> Operator {
    let n = vectors.dim();
    let mapped: Vec<f64> = values.iter().map(|&x| f(x)).collect();
    Operator::from_fn(n, |i, j| {
        (0..n)
            .filter(|&k| mapped[k] != 0.0)
            .map(|k| vectors.get(i, k) * vectors.get(j, k).conj() * mapped[k])
            .sum()
    })
}

fn checked_spectrum(m: &Operator) -> Result<(Vec<f64>, Operator)> {
    let residual = m.hermiticity_residual();
    if residual > PSD_TOL.max(DEFAULT_TOL * 1e-2) {
        return Err(Error::NotHermitian { residual });
    }
    let (mut values, vectors) = eigh(m);
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for v in values.iter_mut() {
        if *v < -PSD_TOL {
            return Err(Error::NotPositive { eigenvalue: *v });
        }
        if *v <= ROOT_CUTOFF * top {
            *v = 0.0;
        }
    }
    Ok((values, vectors))
}

/// Principal square root of a Hermitian PSD operator.
///
/// Eigenvalues in `[-1e-12, 0)` and relative round-off residues are clamped
/// to zero; anything more negative is reported as [`Error::NotPositive`].
pub fn hermitian_sqrt(m: &Operator) -> Result<Operator> {
    let (values, vectors) = checked_spectrum(m)?;
    Ok(spectral_map(&values, &vectors, f64::sqrt))
}

/// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
pub fn pure_fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.inner(b).norm_sqr() / (na * nb)).min(1.0))
}

/// Uhlmann fidelity `(Tr √(√ρ₀ ρ₁ √ρ₀))²` of two unit-trace density matrices.
pub fn mixed_fidelity(r0: &DensityMatrix, r1: &DensityMatrix) -> Result<f64> {
    if r0.dim() != r1.dim() {
        return Err(Error::DimensionMismatch {
            expected: r0.dim(),
            found: r1.dim(),
        });
    }
    let s0 = hermitian_sqrt(r0.as_operator())?;
    let inner = s0.matmul(r1.as_operator()).matmul(&s0);
    // Symmetrise away the rounding asymmetry of the triple product.
    let inner = Operator::from_fn(inner.dim(), |i, j| {
        (inner.get(i, j) + inner.get(j, i).conj()) * 0.5
    });
    let (values, _) = checked_spectrum(&inner)?;
    let root_trace: f64 = values.iter().map(|v| v.sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Haar-random unitary: QR of a complex Ginibre matrix, with the phases of
/// `R`'s diagonal absorbed so the distribution is exactly Haar.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let mut cols: Vec<Ket> = (0..dim)
        .map(|_| Ket {
            amps: (0..dim)
                .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect(),
        })
        .collect();
    // Modified Gram-Schmidt yields R with a positive real diagonal.
    for j in 0..dim {
        for k in 0..j {
            let proj = cols[k].inner(&cols[j]);
            let shifted = &cols[j] - &cols[k].scale(proj);
            cols[j] = shifted;
        }
        let n = cols[j].norm();
        cols[j] = cols[j].scale(real(1.0 / n));
    }
    Operator::from_columns(&cols).expect("square by construction")
}

/// Orthonormal completion: extends orthonormal `given` vectors to a full
/// basis of their space, trying computational basis vectors in order.
pub fn complete_basis(given: &[Ket], dim: usize) -> Vec<Ket> {
    let mut basis: Vec<Ket> = given.to_vec();
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut cand = Ket::basis(dim, i);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.inner(&cand);
                cand = &cand - &b.scale(proj);
            }
        }
        let n = cand.norm();
        if n > 1e-8 {
            basis.push(cand.scale(real(1.0 / n)));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ket<R: Rng>(dim: usize, rng: &mut R) -> Ket {
        Ket::new(
            (0..dim)
                .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect(),
        )
        .unwrap()
    }

    fn random_psd<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> Operator {
        let mut acc = Operator::zeros(dim);
        for _ in 0..rank {
            acc = &acc + &random_ket(dim, rng).projector();
        }
        acc.scale(real(1.0 / acc.trace().re))
    }

    #[test]
    fn tensor_basis_and_identity() {
        let e0 = Ket::basis(2, 0);
        assert_eq!(e0.tensor(&e0), Ket::basis(4, 0));
        assert_eq!(
            Operator::identity(2).tensor(&Operator::identity(2)),
            Operator::identity(4)
        );
    }

    #[test]
    fn tensor_norm_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_ket(3, &mut rng);
            let b = random_ket(4, &mut rng);
            let direct: f64 = a
                .amplitudes()
                .iter()
                .flat_map(|x| b.amplitudes().iter().map(move |y| (x * y).norm_sqr()))
                .sum::<f64>()
                .sqrt();
            assert!((a.tensor(&b).norm() - a.norm() * b.norm()).abs() < 1e-12);
            assert!((direct - a.norm() * b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = DensityMatrix::new(random_psd(2, 2, &mut rng)).unwrap();
        let omega = DensityMatrix::new(random_psd(4, 3, &mut rng)).unwrap();
        let joint = rho.tensor(&omega);
        let first = partial_trace(&joint, &[2, 4], &[0]).unwrap();
        let second = partial_trace(&joint, &[2, 4], &[1]).unwrap();
        assert!(first.as_operator().max_abs_diff(rho.as_operator()) < 1e-12);
        assert!(second.as_operator().max_abs_diff(omega.as_operator()) < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Ket::from_real(&[s, 0.0, 0.0, s]).unwrap();
        let reduced = partial_trace(&DensityMatrix::from_ket(&bell), &[2, 2], &[0]).unwrap();
        let half = Operator::identity(2).scale(real(0.5));
        assert!(reduced.as_operator().max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_psd(8, 3, &mut rng);
            let b = random_psd(8, 5, &mut rng);
            let w: f64 = rng.random();
            let mix = &a.scale(real(w)) + &b.scale(real(1.0 - w));
            let ta = partial_trace(&DensityMatrix::new(a).unwrap(), &[2, 4], &[1]).unwrap();
            let tb = partial_trace(&DensityMatrix::new(b).unwrap(), &[2, 4], &[1]).unwrap();
            let tm =
                partial_trace(&DensityMatrix::new(mix.clone()).unwrap(), &[2, 4], &[1]).unwrap();
            let combo = &ta.as_operator().scale(real(w)) + &tb.as_operator().scale(real(1.0 - w));
            assert!(tm.as_operator().max_abs_diff(&combo) < 1e-13);
            assert!((tm.trace() - mix.trace().re).abs() < 1e-13);
            assert!(tm.as_operator().is_hermitian(1e-13));
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = DensityMatrix::from_ket(&Ket::basis(4, 0));
        assert!(matches!(
            partial_trace(&rho, &[2, 3], &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for dim in [1, 2, 3, 4, 8, 16] {
            let g = Operator::from_fn(dim, |_, _| {
                c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let h = &g + &g.dagger();
            let (values, vectors) = eigh(&h);
            assert!(vectors.is_unitary(1e-12));
            let rebuilt = vectors
                .matmul(&Operator::diagonal(&values))
                .matmul(&vectors.dagger());
            assert!(rebuilt.max_abs_diff(&h) < 1e-11, "dim {dim}");
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sqrt_of_simple_matrices() {
        let id = Operator::identity(3);
        assert!(hermitian_sqrt(&id).unwrap().max_abs_diff(&id) < 1e-15);
        let d = Operator::diagonal(&[4.0, 9.0]);
        let r = hermitian_sqrt(&d).unwrap();
        assert!(r.max_abs_diff(&Operator::diagonal(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 4, 8] {
            for rank in 1..=dim {
                let m = random_psd(dim, rank, &mut rng);
                let r = hermitian_sqrt(&m).unwrap();
                assert!(r.is_hermitian(1e-13));
                assert!(r.matmul(&r).max_abs_diff(&m) <= 1e-10);
            }
        }
    }

    #[test]
    fn sqrt_rejects_negative_spectrum() {
        let m = Operator::diagonal(&[1.0, -1e-6]);
        assert!(matches!(hermitian_sqrt(&m), Err(Error::NotPositive { .. })));
        let tiny = Operator::diagonal(&[1.0, -1e-13]);
        let r = hermitian_sqrt(&tiny).unwrap();
        assert_eq!(r.get(1, 1), real(0.0));
    }

    #[test]
    fn pure_fidelity_basics() {
        let e0 = Ket::basis(2, 0);
        let e1 = Ket::basis(2, 1);
        assert_eq!(pure_fidelity(&e0, &e0).unwrap(), 1.0);
        assert_eq!(pure_fidelity(&e0, &e1).unwrap(), 0.0);
        assert_eq!(pure_fidelity(&e0, &Ket::zeros(2)), Err(Error::ZeroVector));
        // normalisation is internal
        assert!((pure_fidelity(&e0.scale(real(3.0)), &e0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_fidelity_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = DensityMatrix::new(random_psd(4, 2, &mut rng)).unwrap();
        assert!((mixed_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);
        let a = DensityMatrix::new(Operator::diagonal(&[0.5, 0.5, 0.0, 0.0])).unwrap();
        let b = DensityMatrix::new(Operator::diagonal(&[0.0, 0.0, 0.3, 0.7])).unwrap();
        assert!(mixed_fidelity(&a, &b).unwrap() < 1e-15);
    }

    #[test]
    fn mixed_fidelity_matches_pure_on_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in [2, 4] {
            for _ in 0..50 {
                let a = random_ket(dim, &mut rng).normalized().unwrap();
                let b = random_ket(dim, &mut rng).normalized().unwrap();
                let pure = pure_fidelity(&a, &b).unwrap();
                let mixed =
                    mixed_fidelity(&DensityMatrix::from_ket(&a), &DensityMatrix::from_ket(&b))
                        .unwrap();
                assert!((pure - mixed).abs() <= 1e-10, "{pure} vs {mixed}");
            }
        }
    }

    #[test]
    fn mixed_fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for i in 0..100 {
            let dim = [2, 4][i % 2];
            let rank0 = 1 + i % dim;
            let rank1 = 1 + (i / 2) % dim;
            let a = DensityMatrix::new(random_psd(dim, rank0, &mut rng)).unwrap();
            let b = DensityMatrix::new(random_psd(dim, rank1, &mut rng)).unwrap();
            let ab = mixed_fidelity(&a, &b).unwrap();
            let ba = mixed_fidelity(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-10, "{ab} vs {ba}");
        }
    }

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 4, 8, 16] {
            let u = haar_unitary(dim, &mut rng);
            assert!(u.unitarity_residual() <= 1e-12);
        }
    }

    #[test]
    fn contract_first_projects_signal_factor() {
        let a = Ket::from_real(&[0.6, 0.8]).unwrap();
        let b = Ket::from_real(&[1.0, 2.0, 3.0]).unwrap();
        let joint = a.tensor(&b);
        let out = joint.contract_first(&Ket::basis(2, 1)).unwrap();
        assert!(out.max_abs_diff(&(0.8 * &b)) < 1e-15);
    }

    #[test]
    fn completion_is_orthonormal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let given = vec![Ket::from_real(&[s, s, 0.0]).unwrap()];
        let full = complete_basis(&given, 3);
        let u = Operator::from_columns(&full).unwrap();
        assert!(u.is_unitary(1e-14));
    }
}
