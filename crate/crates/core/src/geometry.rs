//! Feasible-set geometry of per-antenna power constraints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PapcError, Result};
use crate::linalg::ComplexVector;

/// Absolute tolerance on power margins when deciding feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Per-antenna power budgets `p_i > 0` (watts) and their total `p_T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerConstraints {
    p: Vec<f64>,
    sqrt_p: Vec<f64>,
    total: f64,
}

impl PowerConstraints {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(PapcError::Dimension("power budget vector is empty".into()));
        }
        if let Some((i, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(PapcError::Domain(format!(
                "power budget of antenna {i} must be positive and finite, got {v}"
            )));
        }
        let total = p.iter().sum();
        let sqrt_p = p.iter().map(|v| v.sqrt()).collect();
        Ok(Self { p, sqrt_p, total })
    }

    /// `n` antennas sharing the same budget.
    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn budgets(&self) -> &[f64] {
        &self.p
    }

    pub fn sqrt_budgets(&self) -> &[f64] {
        &self.sqrt_p
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Budgets multiplied by `factor` (e.g. `1/K` for an equal split over carriers).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.p.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(PapcError::Dimension(format!(
                "vector has {len} entries but there are {} antenna budgets",
                self.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for PowerConstraints {
    type Error = PapcError;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PowerConstraints> for Vec<f64> {
    fn from(pc: PowerConstraints) -> Self {
        pc.p
    }
}

/// Unit phasor of `x`, with the phase of zero taken as 0.
#[inline]
pub fn unit_phase(x: Complex64) -> Complex64 {
    let r = x.norm();
    if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        x / r
    }
}

/// Closest point of the constant-modulus set `{z : |z_i| = sqrt(p_i)}` to `x`.
///
/// Keeps the phase of every entry and replaces its magnitude by `sqrt(p_i)`.
pub fn p_projection(x: &[Complex64], pc: &PowerConstraints) -> Result<ComplexVector> {
    pc.check_dim(x.len())?;
    Ok(x.iter()
        .zip(pc.sqrt_budgets())
        .map(|(v, s)| unit_phase(*v) * *s)
        .collect())
}

/// Weighted l1 norm `sum_i sqrt(p_i) |x_i|`.
pub fn p_norm(x: &[Complex64], pc: &PowerConstraints) -> Result<f64> {
    pc.check_dim(x.len())?;
    Ok(x.iter()
        .zip(pc.sqrt_budgets())
        .map(|(v, s)| s * v.norm())
        .sum())
}

/// `p_i - |z_i|^2` per antenna.
pub fn feasibility_margins(z: &[Complex64], pc: &PowerConstraints) -> Result<Vec<f64>> {
    pc.check_dim(z.len())?;
    Ok(z.iter()
        .zip(pc.budgets())
        .map(|(v, p)| p - v.norm_sqr())
        .collect())
}

/// `p_i - sum_k |z_{i,k}|^2`, the budgets left over after all carriers.
pub fn multicarrier_margins(zs: &[ComplexVector], pc: &PowerConstraints) -> Result<Vec<f64>> {
    let used = antenna_powers(zs, pc.len())?;
    Ok(pc.budgets().iter().zip(used).map(|(p, u)| p - u).collect())
}

/// Total power per antenna summed over carriers, accumulated in carrier order.
pub fn antenna_powers(zs: &[ComplexVector], n: usize) -> Result<Vec<f64>> {
    let mut used = vec![0.0; n];
    for (k, z) in zs.iter().enumerate() {
        if z.len() != n {
            return Err(PapcError::Dimension(format!(
                "carrier {k} has {} transmit weights, expected {n}",
                z.len()
            )));
        }
        for (u, v) in used.iter_mut().zip(z) {
            *u += v.norm_sqr();
        }
    }
    Ok(used)
}

pub fn is_feasible(zs: &[ComplexVector], pc: &PowerConstraints, tol: f64) -> Result<bool> {
    Ok(multicarrier_margins(zs, pc)?.iter().all(|m| *m >= -tol))
}
