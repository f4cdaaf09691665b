//! Small dense complex linear algebra.
//!
//! Everything here works on the tiny matrices that show up in link-level
//! beamforming (a few tens of antennas at most), so storage is a flat
//! row-major `Vec<Complex64>` and the algorithms are the textbook ones.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PapcError, Result};

/// A complex column vector.
pub type ComplexVector = Vec<Complex64>;

/// Relative asymmetry accepted by [`dominant_eigenpair`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default residual tolerance of the power iteration.
pub const EIGEN_TOL: f64 = 1e-10;
/// Iteration cap of the power iteration.
pub const EIGEN_MAX_ITER: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `x^H y`.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm2(x: &[Complex64]) -> f64 {
    norm_sqr(x).sqrt()
}

pub fn scale(x: &[Complex64], s: Complex64) -> ComplexVector {
    x.iter().map(|v| v * s).collect()
}

pub fn conj(x: &[Complex64]) -> ComplexVector {
    x.iter().map(|v| v.conj()).collect()
}

pub fn all_finite(x: &[Complex64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(
            n,
            n,
            |i, j| if i == j { c64(1.0, 0.0) } else { c64(0.0, 0.0) },
        )
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PapcError::Dimension(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(PapcError::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(PapcError::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_diag(d: &[Complex64]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { c64(0.0, 0.0) })
    }

    /// Rank-one outer product `u v^H`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^H x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        assert_eq!(x.len(), self.rows, "adjoint_mul_vec dimension mismatch");
        let mut out = vec![c64(0.0, 0.0); self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == c64(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= rel_tol * self.max_abs().max(1.0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Diagonal noise covariance `R_n = diag(variances)`, in watts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalNoise {
    variances: Vec<f64>,
}

impl DiagonalNoise {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(PapcError::Dimension(
                "noise covariance must be non-empty".into(),
            ));
        }
        if let Some((j, v)) = variances
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(PapcError::Domain(format!(
                "noise variance of receiver {j} must be positive and finite, got {v}"
            )));
        }
        Ok(Self { variances })
    }

    /// `sigma2 * I_m`.
    pub fn white(m: usize, sigma2: f64) -> Result<Self> {
        Self::new(vec![sigma2; m])
    }

    /// Reads the diagonal of a covariance matrix; off-diagonal entries must be zero.
    pub fn from_matrix(r: &ComplexMatrix) -> Result<Self> {
        if !r.is_square() {
            return Err(PapcError::Dimension(
                "noise covariance must be square".into(),
            ));
        }
        let mut d = Vec::with_capacity(r.rows());
        for i in 0..r.rows() {
            for j in 0..r.cols() {
                if i != j && r[(i, j)].norm() != 0.0 {
                    return Err(PapcError::Domain(
                        "noise covariance must be diagonal".into(),
                    ));
                }
            }
            if r[(i, i)].im != 0.0 {
                return Err(PapcError::Domain("noise variances must be real".into()));
            }
            d.push(r[(i, i)].re);
        }
        Self::new(d)
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_diag(
            &self
                .variances
                .iter()
                .map(|&v| c64(v, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    /// `R_n x`.
    pub fn apply(&self, x: &[Complex64]) -> ComplexVector {
        x.iter().zip(&self.variances).map(|(a, v)| a * v).collect()
    }

    /// `R_n^{-1} x`.
    pub fn solve(&self, x: &[Complex64]) -> ComplexVector {
        x.iter().zip(&self.variances).map(|(a, v)| a / v).collect()
    }

    /// `x^H R_n x`.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        x.iter()
            .zip(&self.variances)
            .map(|(a, v)| a.norm_sqr() * v)
            .sum()
    }
}

/// `H^H R_n^{-1} H`, Hermitian positive semidefinite by construction.
pub fn whitened_gram(h: &ComplexMatrix, noise: &DiagonalNoise) -> Result<ComplexMatrix> {
    if noise.dim() != h.rows() {
        return Err(PapcError::Dimension(format!(
            "channel has {} receivers but noise covariance has {}",
            h.rows(),
            noise.dim()
        )));
    }
    let n = h.cols();
    let mut out = ComplexMatrix::zeros(n, n);
    for (r, &var) in noise.variances().iter().enumerate() {
        let row = h.row(r);
        let inv = 1.0 / var;
        for a in 0..n {
            let ha = row[a].conj() * inv;
            for b in a..n {
                out[(a, b)] += ha * row[b];
            }
        }
    }
    for a in 0..n {
        out[(a, a)].im = 0.0;
        for b in 0..a {
            out[(a, b)] = out[(b, a)].conj();
        }
    }
    Ok(out)
}

/// Largest eigenvalue of a Hermitian PSD matrix with a unit eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianEigen {
    pub value: f64,
    pub vector: ComplexVector,
}

/// Rotates `x` so that its first non-negligible entry is real and positive.
pub fn canonical_phase(x: &mut [Complex64]) {
    let max = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(lead) = x.iter().find(|v| v.norm() > 1e-10 * max) {
        let rot = lead.conj() / lead.norm();
        for v in x.iter_mut() {
            *v *= rot;
        }
    }
}

fn power_iterate(
    a: &ComplexMatrix,
    start: ComplexVector,
    tol: f64,
    max_iter: usize,
) -> HermitianEigen {
    let scale = a.trace().re.max(a.max_abs());
    let mut x = start;
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut best = HermitianEigen {
        value: 0.0,
        vector: x.clone(),
    };
    let mut best_res = f64::INFINITY;
    for _ in 0..max_iter {
        let ax = a.mul_vec(&x);
        let value = dot(&x, &ax).re;
        let res = ax
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if res < best_res {
            best_res = res;
            best = HermitianEigen {
                value,
                vector: x.clone(),
            };
        }
        if res <= tol * scale {
            break;
        }
        let n = norm2(&ax);
        if n == 0.0 {
            // Start vector lies in the null space.
            break;
        }
        x = ax.into_iter().map(|v| v / n).collect();
    }
    best
}

/// Dominant eigenpair of a Hermitian PSD matrix by power iteration.
///
/// The iteration starts from the normalized all-ones vector. A second start with
/// fixed, irrational phases guards against the all-ones vector being orthogonal
/// to the dominant eigenspace; the larger Rayleigh quotient wins. The returned
/// vector carries the canonical phase.
pub fn dominant_eigenpair(a: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    dominant_eigenpair_with(a, tol, EIGEN_MAX_ITER)
}

pub fn dominant_eigenpair_with(
    a: &ComplexMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(PapcError::Contract(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_hermitian(HERMITIAN_TOL) {
        return Err(PapcError::Contract(format!(
            "matrix is not Hermitian (defect {:.3e})",
            a.hermitian_defect()
        )));
    }
    let n = a.rows();
    if a.max_abs() == 0.0 {
        let mut e1 = vec![c64(0.0, 0.0); n];
        e1[0] = c64(1.0, 0.0);
        return Ok(HermitianEigen {
            value: 0.0,
            vector: e1,
        });
    }

    let ones = vec![c64(1.0, 0.0); n];
    let mut best = power_iterate(a, ones, tol, max_iter);
    if n > 1 {
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let alt: ComplexVector = (0..n)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * golden * (i + 1) as f64))
            .collect();
        let second = power_iterate(a, alt, tol, max_iter);
        if second.value > best.value * (1.0 + 1e-9) {
            best = second;
        }
    }
    canonical_phase(&mut best.vector);
    best.value = best.value.max(0.0);
    Ok(best)
}

/// `[Re x; Im x]`.
pub fn real_embedding_vector(x: &[Complex64]) -> Vec<f64> {
    x.iter()
        .map(|v| v.re)
        .chain(x.iter().map(|v| v.im))
        .collect()
}

/// `[[Re A, -Im A], [Im A, Re A]]`, stored row-major as a `2r x 2c` matrix.
pub fn real_embedding_matrix(a: &ComplexMatrix) -> (usize, usize, Vec<f64>) {
    let (r, c) = (a.rows(), a.cols());
    let mut out = vec![0.0; 4 * r * c];
    let w = 2 * c;
    for i in 0..r {
        for j in 0..c {
            let v = a[(i, j)];
            out[i * w + j] = v.re;
            out[i * w + j + c] = -v.im;
            out[(i + r) * w + j] = v.im;
            out[(i + r) * w + j + c] = v.re;
        }
    }
    (2 * r, 2 * c, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, c, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn residual(a: &ComplexMatrix, e: &HermitianEigen) -> f64 {
        let ax = a.mul_vec(&e.vector);
        ax.iter()
            .zip(&e.vector)
            .map(|(p, q)| (p - q * e.value).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn diagonal_dominant_pair() {
        let a = ComplexMatrix::from_diag(&[c64(2.0, 0.0), c64(1.0, 0.0)]);
        let e = dominant_eigenpair(&a, EIGEN_TOL).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10);
        assert!((e.vector[0] - c64(1.0, 0.0)).norm() < 1e-8);
        assert!(e.vector[1].norm() < 1e-8);
    }

    #[test]
    fn identity_degenerate_spectrum() {
        let a = ComplexMatrix::identity(3);
        let e = dominant_eigenpair(&a, EIGEN_TOL).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!((norm2(&e.vector) - 1.0).abs() < 1e-12);
        assert!(residual(&a, &e) < 1e-10);
        assert_eq!(e.vector[0].im, 0.0);
        assert!(e.vector[0].re > 0.0);
    }

    #[test]
    fn zero_matrix_gives_first_basis_vector() {
        let e = dominant_eigenpair(&ComplexMatrix::zeros(3, 3), EIGEN_TOL).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.vector, vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(
            dominant_eigenpair(&a, EIGEN_TOL),
            Err(PapcError::Contract(_))
        ));
    }

    #[test]
    fn ones_orthogonal_to_dominant_space() {
        // v = [1, -1]/sqrt(2) is orthogonal to the all-ones start vector.
        let v = [c64(1.0, 0.0), c64(-1.0, 0.0)];
        let a = ComplexMatrix::outer(&v, &v);
        let e = dominant_eigenpair(&a, EIGEN_TOL).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn whitened_gram_scalar_and_identity() {
        let h = ComplexMatrix::from_rows(1, 1, vec![c64(2.0, 0.0)]).unwrap();
        let g = whitened_gram(&h, &DiagonalNoise::new(vec![4.0]).unwrap()).unwrap();
        assert_eq!(g[(0, 0)], c64(1.0, 0.0));
        let g = whitened_gram(
            &ComplexMatrix::identity(3),
            &DiagonalNoise::white(3, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(g, ComplexMatrix::identity(3));
    }

    #[test]
    fn whitened_gram_matches_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_matrix(&mut rng, 4, 3);
        let noise = DiagonalNoise::new(vec![0.5, 1.0, 2.0, 0.25]).unwrap();
        let direct = h
            .adjoint()
            .matmul(&ComplexMatrix::from_diag(
                &noise
                    .variances()
                    .iter()
                    .map(|v| c64(1.0 / v, 0.0))
                    .collect::<Vec<_>>(),
            ))
            .matmul(&h);
        let fast = whitened_gram(&h, &noise).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((direct[(i, j)] - fast[(i, j)]).norm() < 1e-12);
            }
        }
        assert!(fast.hermitian_defect() < 1e-12);
    }

    #[test]
    fn nonpositive_noise_is_domain_error() {
        assert!(matches!(
            DiagonalNoise::new(vec![1.0, 0.0]),
            Err(PapcError::Domain(_))
        ));
        assert!(matches!(
            DiagonalNoise::new(vec![-1.0]),
            Err(PapcError::Domain(_))
        ));
    }

    #[test]
    fn embedding_definitions() {
        assert_eq!(real_embedding_vector(&[c64(1.0, 2.0)]), vec![1.0, 2.0]);
        let a = ComplexMatrix::from_rows(1, 1, vec![c64(0.0, 1.0)]).unwrap();
        let (r, c, d) = real_embedding_matrix(&a);
        assert_eq!((r, c), (2, 2));
        assert_eq!(d, vec![0.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn embedding_preserves_quadratic_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let b = random_matrix(&mut rng, 5, 4);
            let a = b.adjoint().matmul(&b);
            let x: ComplexVector = (0..4)
                .map(|_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>()))
                .collect();
            let complex_form = dot(&x, &a.mul_vec(&x)).re;
            let xr = real_embedding_vector(&x);
            let (n, _, ar) = real_embedding_matrix(&a);
            let mut real_form = 0.0;
            for i in 0..n {
                for j in 0..n {
                    real_form += xr[i] * ar[i * n + j] * xr[j];
                }
            }
            assert!((complex_form - real_form).abs() < 1e-12);
        }
    }
}
