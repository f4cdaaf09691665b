#![allow(dead_code)]

use num_complex::Complex64;
use papc::linalg::ComplexMatrix;
use papc::single_carrier::LinkInstance;
use papc::{DiagonalNoise, PowerConstraints};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cvec<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| cn(rng)).collect()
}

pub fn cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn budgets<R: Rng>(rng: &mut R, n: usize) -> PowerConstraints {
    PowerConstraints::new((0..n).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap()
}

pub fn noise<R: Rng>(rng: &mut R, m: usize) -> DiagonalNoise {
    DiagonalNoise::new((0..m).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

pub fn link<R: Rng>(rng: &mut R, m: usize, n: usize) -> LinkInstance {
    let h = cmat(rng, m, n);
    let r = noise(rng, m);
    let pc = budgets(rng, n);
    LinkInstance::new(h, r, pc).unwrap()
}

/// Uniform point of the feasible polydisc `|z_i| <= sqrt(p_i)`.
pub fn feasible_point<R: Rng>(rng: &mut R, pc: &PowerConstraints) -> Vec<Complex64> {
    pc.sqrt_budgets()
        .iter()
        .map(|s| {
            let r = s * rng.random::<f64>().sqrt();
            Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

/// Point with every magnitude on its budget and random phases.
pub fn boundary_point<R: Rng>(rng: &mut R, pc: &PowerConstraints) -> Vec<Complex64> {
    pc.sqrt_budgets()
        .iter()
        .map(|s| Complex64::from_polar(*s, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// `|g^H z|^2 - 2 Re(g^H z)`, computed directly.
pub fn qcqp(z: &[Complex64], g: &[Complex64]) -> f64 {
    let s: Complex64 = g.iter().zip(z).map(|(a, b)| a.conj() * b).sum();
    s.norm_sqr() - 2.0 * s.re
}

pub fn rng_range<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}
