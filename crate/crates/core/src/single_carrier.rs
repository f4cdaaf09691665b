//! Single-carrier MMSE and max-gain beamforming under per-antenna power budgets.
//!
//! For a fixed receive vector `w` the transmit problem only sees the effective
//! MISO channel `g = H^H w` and reduces to the convex QCQP
//!
//! ```text
//! minimize |g^H z|^2 - 2 Re(g^H z)   subject to |z_i|^2 <= p_i,
//! ```
//!
//! which [`papc_mmse_precoder`] solves in closed form where possible and by the
//! dual solver otherwise. The Gauss-Seidel routines alternate that step with the
//! optimal combiner.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PapcError, Result};
use crate::geometry::{p_norm, p_projection, PowerConstraints};
use crate::linalg::{
    dominant_eigenpair, dot, norm2, whitened_gram, ComplexMatrix, ComplexVector, DiagonalNoise,
    EIGEN_TOL,
};
use crate::multicarrier::{self, kkt_residuals_multicarrier, DualOptions, KktResiduals};

/// One narrowband link `s_hat = w^H H z s + w^H n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkInstance {
    /// `m x n` channel from `n` transmit to `m` receive antennas.
    pub h: ComplexMatrix,
    pub noise: DiagonalNoise,
    pub pc: PowerConstraints,
}

impl LinkInstance {
    pub fn new(h: ComplexMatrix, noise: DiagonalNoise, pc: PowerConstraints) -> Result<Self> {
        if noise.dim() != h.rows() {
            return Err(PapcError::Dimension(format!(
                "channel has {} receivers, noise covariance has {}",
                h.rows(),
                noise.dim()
            )));
        }
        if pc.len() != h.cols() {
            return Err(PapcError::Dimension(format!(
                "channel has {} transmitters, {} power budgets given",
                h.cols(),
                pc.len()
            )));
        }
        Ok(Self { h, noise, pc })
    }

    pub fn n_tx(&self) -> usize {
        self.h.cols()
    }

    pub fn n_rx(&self) -> usize {
        self.h.rows()
    }

    fn check(&self, z: &[Complex64], w: Option<&[Complex64]>) -> Result<()> {
        if z.len() != self.n_tx() {
            return Err(PapcError::Dimension(format!(
                "transmit vector has {} entries, expected {}",
                z.len(),
                self.n_tx()
            )));
        }
        if let Some(w) = w {
            if w.len() != self.n_rx() {
                return Err(PapcError::Dimension(format!(
                    "receive vector has {} entries, expected {}",
                    w.len(),
                    self.n_rx()
                )));
            }
        }
        Ok(())
    }
}

/// Output of an alternating design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformerPair {
    pub z: ComplexVector,
    pub w: ComplexVector,
    /// MSE of `(z, w)` for MMSE designs; gain `|w^H H z|^2` for max-gain designs.
    pub objective: f64,
    /// Objective at initialization followed by its value after every full cycle.
    pub trace: Vec<f64>,
    /// Objective after every half step (transmit update, then receive update).
    pub half_steps: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Which closed form (or the numerical fallback) produced a precoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecoderCase {
    /// `||g||_P <= 1`: all constraints active, `z = [g]^P`.
    ActiveProjection,
    /// `min |g_i| >= 1 / sum sqrt(p_k)`: budget-weighted inverse channel.
    InactiveWeighted,
    /// `|g_i| >= 1 / (n sqrt(p_i))`: uniform inverse channel.
    InactiveUniform,
    /// Projected dual ascent with a single carrier.
    DualFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSolution {
    pub z: ComplexVector,
    pub lambda: Vec<f64>,
    pub case: PrecoderCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussSeidelOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GaussSeidelOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Normalized MSE `|w^H H z - 1|^2 + w^H R_n w` for unit-power symbols.
pub fn mse(z: &[Complex64], w: &[Complex64], link: &LinkInstance) -> Result<f64> {
    link.check(z, Some(w))?;
    let hz = link.h.mul_vec(z);
    let fwd = dot(w, &hz);
    Ok((fwd - 1.0).norm_sqr() + link.noise.quad_form(w))
}

/// MMSE receive vector `R_n^{-1} H z / (1 + z^H H^H R_n^{-1} H z)`.
pub fn mmse_combiner(z: &[Complex64], link: &LinkInstance) -> Result<ComplexVector> {
    link.check(z, None)?;
    Ok(mmse_combiner_parts(z, &link.h, &link.noise))
}

pub(crate) fn mmse_combiner_parts(
    z: &[Complex64],
    h: &ComplexMatrix,
    noise: &DiagonalNoise,
) -> ComplexVector {
    let hz = h.mul_vec(z);
    let whitened = noise.solve(&hz);
    let snr = dot(&hz, &whitened).re;
    whitened.into_iter().map(|v| v / (1.0 + snr)).collect()
}

/// `z^H H^H R_n^{-1} H z`, the post-combining SNR of the MMSE receiver.
pub(crate) fn whitened_energy(z: &[Complex64], h: &ComplexMatrix, noise: &DiagonalNoise) -> f64 {
    let hz = h.mul_vec(z);
    hz.iter()
        .zip(noise.variances())
        .map(|(v, s)| v.norm_sqr() / s)
        .sum()
}

/// MSE reached by the MMSE combiner: `1 / (1 + z^H H^H R_n^{-1} H z)`.
pub fn resultant_mse(z: &[Complex64], link: &LinkInstance) -> Result<f64> {
    link.check(z, None)?;
    Ok(1.0 / (1.0 + whitened_energy(z, &link.h, &link.noise)))
}

/// Unit-norm dominant eigenvector of `H^H R_n^{-1} H` (canonical phase) and its eigenvalue.
pub fn dominant_direction(
    h: &ComplexMatrix,
    noise: &DiagonalNoise,
) -> Result<(ComplexVector, f64)> {
    let e = dominant_eigenpair(&whitened_gram(h, noise)?, EIGEN_TOL)?;
    Ok((e.vector, e.value))
}

/// Optimal precoder under a total power budget `p_T`: `sqrt(p_T)` times the dominant direction.
pub fn unconstrained_precoder(link: &LinkInstance) -> Result<ComplexVector> {
    let (zeta, _) = dominant_direction(&link.h, &link.noise)?;
    let s = link.pc.total().sqrt();
    Ok(zeta.into_iter().map(|v| v * s).collect())
}

/// Objective of the transmit QCQP, `|g^H z|^2 - 2 Re(g^H z)`.
pub fn qcqp_objective(z: &[Complex64], g: &[Complex64]) -> f64 {
    let c = dot(g, z);
    c.norm_sqr() - 2.0 * c.re
}

/// Optimal transmit vector under per-antenna budgets for the effective channel `g = H^H w`.
///
/// The three closed forms are tried in a fixed order; whenever none applies the
/// problem is handed to the dual solver with a single carrier.
pub fn papc_mmse_precoder(g: &[Complex64], pc: &PowerConstraints) -> Result<PrecoderSolution> {
    pc.check_dim(g.len())?;
    if g.iter().all(|v| v.norm() == 0.0) {
        return Err(PapcError::Domain(
            "effective channel is zero; the precoder phase is undefined".into(),
        ));
    }
    let n = g.len();
    let sqrt_p = pc.sqrt_budgets();
    let g_norm = p_norm(g, pc)?;

    if g_norm <= 1.0 {
        let z = p_projection(g, pc)?;
        let lambda = g
            .iter()
            .zip(sqrt_p)
            .map(|(gi, s)| gi.norm() / s * (1.0 - g_norm))
            .collect();
        return Ok(PrecoderSolution {
            z,
            lambda,
            case: PrecoderCase::ActiveProjection,
        });
    }

    let sum_sqrt: f64 = sqrt_p.iter().sum();
    let min_abs = g.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if min_abs >= 1.0 / sum_sqrt {
        let z = g
            .iter()
            .zip(sqrt_p)
            .map(|(gi, s)| s / sum_sqrt / gi.conj())
            .collect();
        return Ok(PrecoderSolution {
            z,
            lambda: vec![0.0; n],
            case: PrecoderCase::InactiveWeighted,
        });
    }

    let nf = n as f64;
    if g.iter()
        .zip(sqrt_p)
        .all(|(gi, s)| gi.norm() >= 1.0 / (nf * s))
    {
        let z = g.iter().map(|gi| 1.0 / (nf * gi.conj())).collect();
        return Ok(PrecoderSolution {
            z,
            lambda: vec![0.0; n],
            case: PrecoderCase::InactiveUniform,
        });
    }

    let (mut zs, state) =
        multicarrier::solve_papc_precoders(&[g.to_vec()], pc, &DualOptions::default())?;
    Ok(PrecoderSolution {
        z: zs.pop().expect("one carrier in, one carrier out"),
        lambda: state.reported_lambda(),
        case: PrecoderCase::DualFallback,
    })
}

/// KKT residuals of the transmit QCQP at `(z, lambda)`.
pub fn kkt_residuals(
    z: &[Complex64],
    lambda: &[f64],
    g: &[Complex64],
    pc: &PowerConstraints,
) -> Result<KktResiduals> {
    kkt_residuals_multicarrier(&[z.to_vec()], lambda, &[g.to_vec()], pc)
}

/// Multipliers of the active-projection solution, `|g_i| p_i^{-1/2} (1 - ||g||_P)`.
///
/// Each `lambda_i` is the MSE reduction per watt of extra budget on antenna `i`.
pub fn shadow_prices(g: &[Complex64], pc: &PowerConstraints) -> Result<Vec<f64>> {
    let g_norm = p_norm(g, pc)?;
    if g_norm > 1.0 {
        return Err(PapcError::Domain(format!(
            "shadow prices need ||g||_P <= 1, got {g_norm}"
        )));
    }
    Ok(g.iter()
        .zip(pc.sqrt_budgets())
        .map(|(gi, s)| gi.norm() / s * (1.0 - g_norm))
        .collect())
}

/// Jointly optimal weights of a MISO link (one receiver, channel row `h^T`, noise `sigma2`).
pub fn miso_solution(
    h: &[Complex64],
    sigma2: f64,
    pc: &PowerConstraints,
) -> Result<BeamformerPair> {
    pc.check_dim(h.len())?;
    if h.iter().all(|v| v.norm() == 0.0) {
        return Err(PapcError::Domain("MISO channel is zero".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(PapcError::Domain(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let h_norm = p_norm(h, pc)?;
    let w = h_norm / (sigma2 + h_norm * h_norm);
    let z = p_projection(&h.iter().map(|v| v.conj()).collect::<Vec<_>>(), pc)?;
    let mse = (w * h_norm - 1.0).powi(2) + sigma2 * w * w;
    Ok(BeamformerPair {
        z,
        w: vec![Complex64::new(w, 0.0)],
        objective: mse,
        trace: vec![mse],
        half_steps: Vec::new(),
        iterations: 0,
        converged: true,
    })
}

/// Alternating MMSE design: `z <- [H^H w]^P`, `w <- MMSE combiner of z`.
///
/// Starts from the projected dominant direction. The transmit half step is
/// scored with `w / max(1, ||H^H w||_P)`, the receive vector it is optimal for,
/// so `half_steps` is nonincreasing.
pub fn gauss_seidel_mmse(link: &LinkInstance, opts: &GaussSeidelOptions) -> Result<BeamformerPair> {
    let (zeta, _) = dominant_direction(&link.h, &link.noise)?;
    let z0 = p_projection(&zeta, &link.pc)?;
    gauss_seidel_mmse_from(link, z0, opts)
}

pub fn gauss_seidel_mmse_from(
    link: &LinkInstance,
    z0: ComplexVector,
    opts: &GaussSeidelOptions,
) -> Result<BeamformerPair> {
    link.check(&z0, None)?;
    let mut z = z0;
    let mut w = mmse_combiner(&z, link)?;
    let mut current = mse(&z, &w, link)?;
    let mut trace = vec![current];
    let mut half_steps = Vec::new();
    let mut best = (z.clone(), w.clone(), current);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let g = link.h.adjoint_mul_vec(&w);
        let g_norm = p_norm(&g, &link.pc)?;
        z = p_projection(&g, &link.pc)?;
        let w_hat: ComplexVector = w.iter().map(|v| v / g_norm.max(1.0)).collect();
        half_steps.push(mse(&z, &w_hat, link)?);

        w = mmse_combiner(&z, link)?;
        let next = mse(&z, &w, link)?;
        half_steps.push(next);
        trace.push(next);
        if next < best.2 {
            best = (z.clone(), w.clone(), next);
        }
        let delta = (current - next).abs();
        current = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(BeamformerPair {
        z: best.0,
        w: best.1,
        objective: best.2,
        trace,
        half_steps,
        iterations,
        converged,
    })
}

/// Beamforming gain `|w^H H z|^2`.
pub fn gain(z: &[Complex64], w: &[Complex64], h: &ComplexMatrix) -> f64 {
    dot(w, &h.mul_vec(z)).norm_sqr()
}

/// Maximum-ratio combiner `H z / ||H z||`.
pub fn mrc_combiner(z: &[Complex64], h: &ComplexMatrix) -> Result<ComplexVector> {
    let hz = h.mul_vec(z);
    let n = norm2(&hz);
    if n == 0.0 {
        return Err(PapcError::Domain(
            "H z = 0; the MRC direction is undefined".into(),
        ));
    }
    Ok(hz.into_iter().map(|v| v / n).collect())
}

/// Gain-maximizing transmit vector under per-antenna budgets, `[H^H w]^P`.
pub fn papc_maxgain_precoder(
    w: &[Complex64],
    h: &ComplexMatrix,
    pc: &PowerConstraints,
) -> Result<ComplexVector> {
    p_projection(&h.adjoint_mul_vec(w), pc)
}

/// Alternating max-gain design starting from the dominant left singular vector of `H`.
///
/// Convergence is declared on the relative gain change.
pub fn gauss_seidel_maxgain(
    h: &ComplexMatrix,
    pc: &PowerConstraints,
    opts: &GaussSeidelOptions,
) -> Result<BeamformerPair> {
    pc.check_dim(h.cols())?;
    if h.max_abs() == 0.0 {
        return Err(PapcError::Domain("channel is zero".into()));
    }
    let hh = h.matmul(&h.adjoint());
    let mut w = dominant_eigenpair(&hh, EIGEN_TOL)?.vector;
    let mut z = papc_maxgain_precoder(&w, h, pc)?;
    let mut current = gain(&z, &w, h);
    let mut trace = vec![current];
    let mut half_steps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        w = mrc_combiner(&z, h)?;
        half_steps.push(gain(&z, &w, h));
        z = papc_maxgain_precoder(&w, h, pc)?;
        let next = gain(&z, &w, h);
        half_steps.push(next);
        trace.push(next);
        let delta = (next - current).abs();
        current = next;
        if delta < opts.tol * current.max(1.0) {
            converged = true;
            break;
        }
    }
    let w = mrc_combiner(&z, h)?;
    Ok(BeamformerPair {
        objective: gain(&z, &w, h),
        z,
        w,
        trace,
        half_steps,
        iterations,
        converged,
    })
}
