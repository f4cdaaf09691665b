//! Multicarrier sum-MSE design with per-antenna budgets shared across carriers.
//!
//! For fixed combiners the precoders solve
//!
//! ```text
//! minimize  sum_k |g_k^H z_k|^2 - 2 Re(g_k^H z_k)
//! s.t.      sum_k |z_{i,k}|^2 <= p_i,   i = 1..n
//! ```
//!
//! The budgets couple the carriers, but the dual lives on the nonnegative
//! orthant, so [`solve_papc_precoders`] runs projected gradient ascent on the
//! dual and recovers the precoders from the Lagrangian minimizers.
//! [`cyclic_multicarrier`] alternates this with per-carrier MMSE combiners.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PapcError, Result};
use crate::geometry::{antenna_powers, multicarrier_margins, p_projection, PowerConstraints};
use crate::linalg::{dot, ComplexMatrix, ComplexVector, DiagonalNoise};
use crate::single_carrier::{
    dominant_direction, gauss_seidel_mmse, mmse_combiner_parts, qcqp_objective, whitened_energy,
    GaussSeidelOptions, LinkInstance,
};

/// Multipliers below this are reported as inactive constraints.
pub const INACTIVE_LAMBDA: f64 = 1e-8;

/// `K` narrowband channels sharing a frequency-flat noise covariance and one set of budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiCarrierLink {
    pub channels: Vec<ComplexMatrix>,
    pub noise: DiagonalNoise,
    pub pc: PowerConstraints,
}

impl MultiCarrierLink {
    pub fn new(
        channels: Vec<ComplexMatrix>,
        noise: DiagonalNoise,
        pc: PowerConstraints,
    ) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| PapcError::Dimension("at least one carrier is required".into()))?;
        let (m, n) = (first.rows(), first.cols());
        if let Some(k) = channels.iter().position(|h| h.rows() != m || h.cols() != n) {
            return Err(PapcError::Dimension(format!("carrier {k} is not {m}x{n}")));
        }
        if noise.dim() != m {
            return Err(PapcError::Dimension(format!(
                "{m} receivers but noise dimension {}",
                noise.dim()
            )));
        }
        if pc.len() != n {
            return Err(PapcError::Dimension(format!(
                "{n} transmitters but {} budgets",
                pc.len()
            )));
        }
        Ok(Self {
            channels,
            noise,
            pc,
        })
    }

    pub fn carriers(&self) -> usize {
        self.channels.len()
    }

    pub fn n_tx(&self) -> usize {
        self.pc.len()
    }

    pub fn n_rx(&self) -> usize {
        self.noise.dim()
    }

    /// Single-carrier view of carrier `k` with budgets `pc`.
    pub fn carrier_link(&self, k: usize, pc: PowerConstraints) -> LinkInstance {
        LinkInstance {
            h: self.channels[k].clone(),
            noise: self.noise.clone(),
            pc,
        }
    }

    /// MMSE combiner of every carrier for the given precoders.
    pub fn mmse_combiners(&self, zs: &[ComplexVector]) -> Vec<ComplexVector> {
        self.channels
            .iter()
            .zip(zs)
            .map(|(h, z)| mmse_combiner_parts(z, h, &self.noise))
            .collect()
    }

    /// Per-carrier MSE with MMSE combiners, `1 / (1 + z_k^H H_k^H R_n^{-1} H_k z_k)`.
    pub fn resultant_mses(&self, zs: &[ComplexVector]) -> Vec<f64> {
        self.channels
            .iter()
            .zip(zs)
            .map(|(h, z)| 1.0 / (1.0 + whitened_energy(z, h, &self.noise)))
            .collect()
    }

    /// Per-carrier MSE `|w^H H z - 1|^2 + w^H R_n w`.
    pub fn mses(&self, zs: &[ComplexVector], ws: &[ComplexVector]) -> Vec<f64> {
        self.channels
            .iter()
            .zip(zs.iter().zip(ws))
            .map(|(h, (z, w))| (dot(w, &h.mul_vec(z)) - 1.0).norm_sqr() + self.noise.quad_form(w))
            .collect()
    }

    /// Effective MISO channels `g_k = H_k^H w_k`.
    pub fn effective_channels(&self, ws: &[ComplexVector]) -> Vec<ComplexVector> {
        self.channels
            .iter()
            .zip(ws)
            .map(|(h, w)| h.adjoint_mul_vec(w))
            .collect()
    }
}

/// KKT residual groups, one entry per antenna (stationarity is the worst carrier).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max_k |lambda_i z_{i,k} - g_{i,k} (1 - g_k^H z_k)|`.
    pub stationarity: Vec<f64>,
    /// `max(sum_k |z_{i,k}|^2 - p_i, 0)`.
    pub primal: Vec<f64>,
    /// `|lambda_i (sum_k |z_{i,k}|^2 - p_i)|`.
    pub slackness: Vec<f64>,
    /// `max(-lambda_i, 0)`.
    pub dual: Vec<f64>,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .iter()
            .chain(&self.primal)
            .chain(&self.slackness)
            .chain(&self.dual)
            .cloned()
            .fold(0.0, f64::max)
    }
}

fn check_carriers(gs: &[ComplexVector], n: usize) -> Result<()> {
    if gs.is_empty() {
        return Err(PapcError::Dimension("no carriers given".into()));
    }
    if let Some(k) = gs.iter().position(|g| g.len() != n) {
        return Err(PapcError::Dimension(format!(
            "carrier {k} has {} entries, expected {n}",
            gs[k].len()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: &[f64]) -> Result<()> {
    if let Some((i, v)) = lambda
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(PapcError::Domain(format!(
            "multiplier {i} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

pub fn kkt_residuals_multicarrier(
    zs: &[ComplexVector],
    lambda: &[f64],
    gs: &[ComplexVector],
    pc: &PowerConstraints,
) -> Result<KktResiduals> {
    let n = pc.len();
    check_carriers(gs, n)?;
    check_carriers(zs, n)?;
    pc.check_dim(lambda.len())?;
    if zs.len() != gs.len() {
        return Err(PapcError::Dimension(
            "precoder and channel carrier counts differ".into(),
        ));
    }
    let mut stationarity = vec![0.0f64; n];
    for (z, g) in zs.iter().zip(gs) {
        let slack = Complex64::new(1.0, 0.0) - dot(g, z);
        for i in 0..n {
            let r = (z[i] * lambda[i] - g[i] * slack).norm();
            stationarity[i] = stationarity[i].max(r);
        }
    }
    let used = antenna_powers(zs, n)?;
    let excess: Vec<f64> = used.iter().zip(pc.budgets()).map(|(u, p)| u - p).collect();
    Ok(KktResiduals {
        stationarity,
        primal: excess.iter().map(|e| e.max(0.0)).collect(),
        slackness: excess
            .iter()
            .zip(lambda)
            .map(|(e, l)| (e * l).abs())
            .collect(),
        dual: lambda.iter().map(|l| (-l).max(0.0)).collect(),
    })
}

/// Sum over carriers of `|g_k^H z_k|^2 - 2 Re(g_k^H z_k)`.
pub fn primal_objective(zs: &[ComplexVector], gs: &[ComplexVector]) -> f64 {
    zs.iter().zip(gs).map(|(z, g)| qcqp_objective(z, g)).sum()
}

/// `g^H Lambda^{-1} g` restricted to the antennas with positive multipliers.
fn weighted_energy(lambda: &[f64], g: &[Complex64]) -> f64 {
    g.iter()
        .zip(lambda)
        .filter(|(_, l)| **l > 0.0)
        .map(|(gi, l)| gi.norm_sqr() / l)
        .sum()
}

/// First antenna with a zero multiplier that this carrier can reach.
fn boundary_antenna(lambda: &[f64], g: &[Complex64]) -> Option<usize> {
    lambda
        .iter()
        .zip(g)
        .position(|(l, gi)| *l == 0.0 && gi.norm() != 0.0)
}

/// Dual function of the multicarrier transmit problem.
///
/// On the interior of the orthant it is
/// `-sum_k t_k / (1 + t_k) - lambda^T p` with `t_k = g_k^H Lambda^{-1} g_k`;
/// a carrier that reaches an antenna with a zero multiplier contributes `-1`.
pub fn dual_value(lambda: &[f64], gs: &[ComplexVector], pc: &PowerConstraints) -> Result<f64> {
    pc.check_dim(lambda.len())?;
    check_lambda(lambda)?;
    check_carriers(gs, pc.len())?;
    let mut value = 0.0;
    for g in gs {
        if boundary_antenna(lambda, g).is_some() {
            value -= 1.0;
        } else {
            let t = weighted_energy(lambda, g);
            value -= t / (1.0 + t);
        }
    }
    let price: f64 = lambda.iter().zip(pc.budgets()).map(|(l, p)| l * p).sum();
    Ok(value - price)
}

/// Minimizers of the Lagrangian for fixed multipliers.
///
/// Interior: `z_k = Lambda^{-1} g_k / (1 + g_k^H Lambda^{-1} g_k)`. When some
/// `lambda_q = 0` and `g_{k,q} != 0`, the minimizer is not unique and
/// `z_k = e_q / conj(g_{k,q})` is returned for the first such `q`. A carrier with
/// no reachable zero-multiplier antenna uses the interior formula on the
/// antennas with positive multipliers.
pub fn lagrangian_minimizers(lambda: &[f64], gs: &[ComplexVector]) -> Result<Vec<ComplexVector>> {
    check_lambda(lambda)?;
    check_carriers(gs, lambda.len())?;
    Ok(gs.iter().map(|g| minimizer(lambda, g)).collect())
}

fn minimizer(lambda: &[f64], g: &[Complex64]) -> ComplexVector {
    let n = g.len();
    if let Some(q) = boundary_antenna(lambda, g) {
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        z[q] = 1.0 / g[q].conj();
        return z;
    }
    let t = weighted_energy(lambda, g);
    g.iter()
        .zip(lambda)
        .map(|(gi, l)| {
            if *l > 0.0 {
                gi / (l * (1.0 + t))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Gradient of the dual on the interior: `sum_k |z*_{i,k}|^2 - p_i`.
pub fn dual_gradient(
    lambda: &[f64],
    gs: &[ComplexVector],
    pc: &PowerConstraints,
) -> Result<Vec<f64>> {
    pc.check_dim(lambda.len())?;
    if let Some((i, v)) = lambda
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(PapcError::Domain(format!(
            "dual gradient needs strictly positive multipliers; lambda[{i}] = {v}"
        )));
    }
    let zs = lagrangian_minimizers(lambda, gs)?;
    let used = antenna_powers(&zs, pc.len())?;
    Ok(used.iter().zip(pc.budgets()).map(|(u, p)| u - p).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Starting multipliers; `K / p_T` on every antenna when absent.
    pub lambda0: Option<Vec<f64>>,
    pub max_dual_iterations: usize,
    /// Stop once the projected gradient's max-norm falls below this; `1e-9 p_T` when absent.
    pub grad_tol: Option<f64>,
    /// Iterates are kept in `[lambda_floor, inf)^n`.
    pub lambda_floor: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Sweeps of exact per-antenna block minimization applied to the recovered precoders.
    pub polish_sweeps: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            lambda0: None,
            max_dual_iterations: 200,
            grad_tol: None,
            lambda_floor: 1e-12,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
            polish_sweeps: 50,
        }
    }
}

/// Final state of the dual ascent and the primal point recovered from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    /// `d(lambda)` at the final multipliers.
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Lagrangian minimizers the precoders were recovered from, before any repair.
    pub minimizers: Vec<ComplexVector>,
    /// Budget margins of `minimizers`; negative entries were repaired.
    pub pre_repair_margins: Vec<f64>,
    /// Objective of the returned (feasible) precoders.
    pub primal_value: f64,
    /// `primal_value - value`, nonnegative up to rounding by weak duality.
    pub dual_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether `lambda` was taken from the block multipliers of the polished precoders.
    pub primal_multipliers: bool,
    /// Value of `d` after every accepted step, starting at `lambda0`.
    pub trace: Vec<f64>,
}

impl DualState {
    /// Multipliers with values below [`INACTIVE_LAMBDA`] reported as exactly zero.
    pub fn reported_lambda(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|l| if *l < INACTIVE_LAMBDA { 0.0 } else { *l })
            .collect()
    }

    pub fn relative_gap(&self) -> f64 {
        self.dual_gap / self.primal_value.abs().max(1e-300)
    }
}

/// Optimal precoders for fixed effective channels `g_k` under the shared per-antenna budgets.
///
/// Projected gradient ascent on the dual with a backtracking line search, then
/// primal recovery from the Lagrangian minimizers. Recovered precoders that
/// overshoot a budget are scaled down on that antenna, and the result is
/// refined by exact per-antenna block minimization, which keeps feasibility
/// and never increases the objective.
pub fn solve_papc_precoders(
    gs: &[ComplexVector],
    pc: &PowerConstraints,
    opts: &DualOptions,
) -> Result<(Vec<ComplexVector>, DualState)> {
    let n = pc.len();
    check_carriers(gs, n)?;
    if gs.iter().all(|g| g.iter().all(|v| v.norm() == 0.0)) {
        return Err(PapcError::Domain("all effective channels are zero".into()));
    }
    let k = gs.len() as f64;
    let floor = opts.lambda_floor;
    let mut lambda = match &opts.lambda0 {
        Some(l0) => {
            pc.check_dim(l0.len())?;
            check_lambda(l0)?;
            l0.iter().map(|v| v.max(floor)).collect::<Vec<_>>()
        }
        None => vec![(k / pc.total()).max(floor); n],
    };
    let grad_tol = opts.grad_tol.unwrap_or(1e-9 * pc.total());

    let mut value = dual_value(&lambda, gs, pc)?;
    let mut grad = dual_gradient(&lambda, gs, pc)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_dual_iterations {
        if projected_gradient_norm(&lambda, &grad, floor) < grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let cand: Vec<f64> = lambda
                .iter()
                .zip(&grad)
                .map(|(l, g)| (l + alpha * g).max(floor))
                .collect();
            let cand_value = dual_value(&cand, gs, pc)?;
            let ascent: f64 = cand
                .iter()
                .zip(&lambda)
                .zip(&grad)
                .map(|((c, l), g)| g * (c - l))
                .sum();
            if cand_value >= value + opts.armijo * ascent {
                accepted = Some((cand, cand_value));
                break;
            }
            alpha *= opts.shrink;
        }
        match accepted {
            Some((cand, cand_value)) => {
                lambda = cand;
                value = cand_value;
                grad = dual_gradient(&lambda, gs, pc)?;
                trace.push(value);
            }
            // No ascent possible at this resolution.
            None => break,
        }
    }

    let minimizers = lagrangian_minimizers(&lambda, gs)?;
    let pre_repair_margins = multicarrier_margins(&minimizers, pc)?;
    let mut zs = minimizers.clone();
    repair_budgets(&mut zs, pc);
    let mut primal_multipliers = false;
    if let Some(mu) = polish(&mut zs, gs, pc, opts.polish_sweeps) {
        // The block multipliers of the polished point are a dual candidate; near
        // the origin the ascent can stall on badly scaled coordinates.
        let cand: Vec<f64> = mu.iter().map(|m| m.max(floor)).collect();
        let cand_value = dual_value(&cand, gs, pc)?;
        if cand_value > value {
            lambda = cand;
            value = cand_value;
            grad = dual_gradient(&lambda, gs, pc)?;
            trace.push(value);
            primal_multipliers = true;
            converged = converged || projected_gradient_norm(&lambda, &grad, floor) < grad_tol;
        }
    }
    let primal_value = primal_objective(&zs, gs);

    let state = DualState {
        lambda,
        value,
        gradient: grad,
        minimizers,
        pre_repair_margins,
        primal_value,
        dual_gap: primal_value - value,
        iterations,
        converged,
        primal_multipliers,
        trace,
    };
    Ok((zs, state))
}

fn projected_gradient_norm(lambda: &[f64], grad: &[f64], floor: f64) -> f64 {
    lambda
        .iter()
        .zip(grad)
        .map(|(l, g)| {
            if *l <= floor && *g < 0.0 {
                0.0
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Scales every antenna whose total power exceeds its budget back onto the budget.
fn repair_budgets(zs: &mut [ComplexVector], pc: &PowerConstraints) {
    let used = antenna_powers(zs, pc.len()).expect("dimensions checked by caller");
    for (i, (u, p)) in used.iter().zip(pc.budgets()).enumerate() {
        if *u > *p {
            let s = (p / u).sqrt();
            for z in zs.iter_mut() {
                z[i] *= s;
            }
        }
    }
}

/// Exact block coordinate descent over antennas.
///
/// With the other antennas fixed, antenna `i` solves
/// `min sum_k |r_k + conj(g_{i,k}) x_k|^2  s.t.  sum_k |x_k|^2 <= p_i`,
/// whose solution is `x_k = -g_{i,k} r_k / (|g_{i,k}|^2 + mu)` with `mu >= 0`
/// found by bisection on the budget. Returns the multipliers `mu` of the last sweep.
fn polish(
    zs: &mut [ComplexVector],
    gs: &[ComplexVector],
    pc: &PowerConstraints,
    sweeps: usize,
) -> Option<Vec<f64>> {
    if sweeps == 0 {
        return None;
    }
    let mut mus = vec![0.0; pc.len()];
    let n = pc.len();
    let kk = gs.len();
    let mut fwd: Vec<Complex64> = zs.iter().zip(gs).map(|(z, g)| dot(g, z)).collect();
    let mut objective = primal_objective(zs, gs);
    let mut resid = vec![Complex64::new(0.0, 0.0); kk];
    let mut gain2 = vec![0.0; kk];

    for _ in 0..sweeps {
        for i in 0..n {
            for k in 0..kk {
                let b = gs[k][i].conj();
                resid[k] = fwd[k] - b * zs[k][i] - 1.0;
                gain2[k] = b.norm_sqr();
            }
            let power = |mu: f64| -> f64 {
                (0..kk)
                    .filter(|&k| gain2[k] > 0.0)
                    .map(|k| gain2[k] * resid[k].norm_sqr() / (gain2[k] + mu).powi(2))
                    .sum()
            };
            let budget = pc.budgets()[i];
            let mu = if power(0.0) <= budget {
                0.0
            } else {
                let total: f64 = (0..kk).map(|k| gain2[k] * resid[k].norm_sqr()).sum();
                let (mut lo, mut hi) = (0.0, (total / budget).sqrt());
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if power(mid) > budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            };
            mus[i] = mu;
            for k in 0..kk {
                let x = if gain2[k] > 0.0 {
                    -gs[k][i] * resid[k] / (gain2[k] + mu)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                zs[k][i] = x;
                fwd[k] = resid[k] + 1.0 + gs[k][i].conj() * x;
            }
        }
        let next = primal_objective(zs, gs);
        let improved = objective - next;
        objective = next;
        if improved <= 1e-15 * (1.0 + objective.abs()) {
            break;
        }
    }
    Some(mus)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicOptions {
    pub max_cyclic_iterations: usize,
    pub dual: DualOptions,
}

impl Default for CyclicOptions {
    fn default() -> Self {
        Self {
            max_cyclic_iterations: 20,
            dual: DualOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiCarrierSolution {
    pub z: Vec<ComplexVector>,
    /// MMSE combiners of the final precoders.
    pub w: Vec<ComplexVector>,
    pub sum_mse: f64,
    pub per_carrier_mse: Vec<f64>,
    /// Duality gap of the last precoder update.
    pub dual_gap: f64,
    /// Sum-MSE with MMSE combiners at initialization and after every cycle.
    pub sum_mse_trace: Vec<f64>,
    /// Dual state of the last precoder update, with the effective channels it used.
    pub dual_state: Option<DualState>,
    pub effective_channels: Vec<ComplexVector>,
}

/// Cyclic multicarrier precoder/combiner design.
///
/// Starts from the projected dominant directions with equal power per carrier,
/// then alternates MMSE combiners with the dual precoder solve.
pub fn cyclic_multicarrier(
    link: &MultiCarrierLink,
    opts: &CyclicOptions,
) -> Result<MultiCarrierSolution> {
    let mut zs = projected_eigenvector_precoders(link)?;
    let mut trace = vec![link.resultant_mses(&zs).iter().sum::<f64>()];
    let mut last_state = None;
    let mut last_gs = Vec::new();

    for _ in 0..opts.max_cyclic_iterations {
        let ws = link.mmse_combiners(&zs);
        let gs = link.effective_channels(&ws);
        if gs.iter().all(|g| g.iter().all(|v| v.norm() == 0.0)) {
            break;
        }
        let (next, state) = solve_papc_precoders(&gs, &link.pc, &opts.dual)?;
        zs = next;
        trace.push(link.resultant_mses(&zs).iter().sum::<f64>());
        last_state = Some(state);
        last_gs = gs;
    }

    let ws = link.mmse_combiners(&zs);
    let per_carrier_mse = link.mses(&zs, &ws);
    Ok(MultiCarrierSolution {
        sum_mse: per_carrier_mse.iter().sum(),
        per_carrier_mse,
        dual_gap: last_state.as_ref().map_or(0.0, |s| s.dual_gap),
        sum_mse_trace: trace,
        dual_state: last_state,
        effective_channels: last_gs,
        z: zs,
        w: ws,
    })
}

/// `K^{-1/2} [zeta_k]^P` on every carrier.
pub fn projected_eigenvector_precoders(link: &MultiCarrierLink) -> Result<Vec<ComplexVector>> {
    let s = 1.0 / (link.carriers() as f64).sqrt();
    link.channels
        .iter()
        .map(|h| {
            let (zeta, _) = dominant_direction(h, &link.noise)?;
            Ok(p_projection(&zeta, &link.pc)?
                .into_iter()
                .map(|v| v * s)
                .collect())
        })
        .collect()
}

/// Single-carrier Gauss-Seidel on each carrier with budgets `p_i / K`.
pub fn percarrier_cyclic_precoders(
    link: &MultiCarrierLink,
    opts: &GaussSeidelOptions,
) -> Result<(Vec<ComplexVector>, Vec<ComplexVector>)> {
    let pc = link.pc.scaled(1.0 / link.carriers() as f64)?;
    let mut zs = Vec::with_capacity(link.carriers());
    let mut ws = Vec::with_capacity(link.carriers());
    for k in 0..link.carriers() {
        let r = gauss_seidel_mmse(&link.carrier_link(k, pc.clone()), opts)?;
        zs.push(r.z);
        ws.push(r.w);
    }
    Ok((zs, ws))
}

/// Minimizes `sum_k 1 / (1 + q_k sigma_k)` over `q >= 0`, `sum q_k = p_total`.
///
/// KKT gives `q_k = max(0, (mu sigma_k)^{-1/2} - 1/sigma_k)`; `mu` is found by
/// bisection in log scale.
pub fn water_fill(sigmas: &[f64], p_total: f64) -> Result<Vec<f64>> {
    if !(p_total > 0.0 && p_total.is_finite()) {
        return Err(PapcError::Domain(format!(
            "total power must be positive, got {p_total}"
        )));
    }
    let top = sigmas.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(PapcError::Domain("every carrier has zero gain".into()));
    }
    let alloc = |mu: f64| -> Vec<f64> {
        sigmas
            .iter()
            .map(|&s| {
                if s > 0.0 {
                    (1.0 / (mu * s).sqrt() - 1.0 / s).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let total = |mu: f64| alloc(mu).iter().sum::<f64>();
    // total(top) = 0; shrink lo until the budget is exceeded.
    let mut hi = top.ln();
    let mut lo = hi - 1.0;
    while total(lo.exp()) < p_total {
        lo -= 2.0 * (hi - lo);
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid.exp()) > p_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = alloc(lo.exp());
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v *= p_total / s);
    Ok(q)
}

/// Optimal precoders under a single total power budget `p_total` over all antennas and carriers.
pub fn total_power_precoders(link: &MultiCarrierLink, p_total: f64) -> Result<Vec<ComplexVector>> {
    let mut dirs = Vec::with_capacity(link.carriers());
    let mut sigmas = Vec::with_capacity(link.carriers());
    for h in &link.channels {
        let (zeta, sigma) = dominant_direction(h, &link.noise)?;
        dirs.push(zeta);
        sigmas.push(sigma);
    }
    let q = water_fill(&sigmas, p_total)?;
    Ok(dirs
        .into_iter()
        .zip(q)
        .map(|(zeta, qk)| zeta.into_iter().map(|v| v * qk.sqrt()).collect())
        .collect())
}

/// Total-power precoders with every over-budget antenna scaled down onto its budget.
pub fn naive_scaled_precoders(link: &MultiCarrierLink) -> Result<Vec<ComplexVector>> {
    let mut zs = total_power_precoders(link, link.pc.total())?;
    repair_budgets(&mut zs, &link.pc);
    Ok(zs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    /// Antennas whose total power exceeds the budget by more than a relative 1e-9.
    pub count: usize,
    /// `100 * max_i (used_i / p_i - 1)`, clamped at 0.
    pub max_percent: f64,
}

pub fn violation_stats(zs: &[ComplexVector], pc: &PowerConstraints) -> Result<ViolationStats> {
    let used = antenna_powers(zs, pc.len())?;
    let mut count = 0;
    let mut worst = 0.0f64;
    for (u, p) in used.iter().zip(pc.budgets()) {
        if *u > p * (1.0 + 1e-9) {
            count += 1;
        }
        worst = worst.max(100.0 * (u / p - 1.0));
    }
    Ok(ViolationStats {
        count,
        max_percent: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c64(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn random_gs(rng: &mut ChaCha8Rng, n: usize, k: usize, scale: f64) -> Vec<ComplexVector> {
        (0..k)
            .map(|_| (0..n).map(|_| cn(rng) * scale).collect())
            .collect()
    }

    fn random_pc(rng: &mut ChaCha8Rng, n: usize) -> PowerConstraints {
        PowerConstraints::new((0..n).map(|_| rng.random_range(0.1..1.0)).collect()).unwrap()
    }

    #[test]
    fn dual_value_examples() {
        let pc = PowerConstraints::uniform(1, 1.0).unwrap();
        let g = vec![vec![c64(1.0, 0.0)]];
        assert!((dual_value(&[1.0], &g, &pc).unwrap() + 1.5).abs() < 1e-15);
        let pc = PowerConstraints::uniform(3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gs = random_gs(&mut rng, 3, 4, 1.0);
        assert_eq!(dual_value(&[0.0; 3], &gs, &pc).unwrap(), -4.0);
        assert!(dual_value(&[-1.0, 1.0, 1.0], &gs, &pc).is_err());
    }

    #[test]
    fn minimizer_examples() {
        let z = lagrangian_minimizers(&[1.0], &[vec![c64(1.0, 0.0)]]).unwrap();
        assert_eq!(z, vec![vec![c64(0.5, 0.0)]]);
        let e1 = vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)];
        let z = lagrangian_minimizers(&[2.0, 0.0, 1.0], std::slice::from_ref(&e1)).unwrap();
        assert_eq!(z[0], e1);
    }

    #[test]
    fn minimizers_solve_stationarity_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..7);
            let gs = random_gs(&mut rng, n, 3, 1.0);
            let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
            let zs = lagrangian_minimizers(&lambda, &gs).unwrap();
            for (g, z) in gs.iter().zip(&zs) {
                let c = dot(g, z);
                for i in 0..n {
                    // (g g^H + Lambda) z = g
                    let lhs = g[i] * c + z[i] * lambda[i];
                    assert!((lhs - g[i]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn gradient_example_and_stationary_point() {
        let pc = PowerConstraints::uniform(1, 1.0).unwrap();
        let g = vec![vec![c64(1.0, 0.0)]];
        let grad = dual_gradient(&[1.0], &g, &pc).unwrap();
        assert!((grad[0] + 0.75).abs() < 1e-15);
        let h = 1e-6;
        let fd = (dual_value(&[1.0 + h], &g, &pc).unwrap()
            - dual_value(&[1.0 - h], &g, &pc).unwrap())
            / (2.0 * h);
        assert!((fd - grad[0]).abs() < 1e-8);
        // Budgets equal to the minimizer powers make lambda stationary.
        let lambda = [0.7, 1.3];
        let gs = vec![
            vec![c64(0.4, 0.1), c64(-0.2, 0.5)],
            vec![c64(1.0, 0.0), c64(0.0, 0.3)],
        ];
        let zs = lagrangian_minimizers(&lambda, &gs).unwrap();
        let pc = PowerConstraints::new(antenna_powers(&zs, 2).unwrap()).unwrap();
        let grad = dual_gradient(&lambda, &gs, &pc).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-15));
        assert!(dual_gradient(&[0.0, 1.0], &gs, &pc).is_err());
    }

    #[test]
    fn weak_duality_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4;
        let pc = random_pc(&mut rng, n);
        let gs = random_gs(&mut rng, n, 3, 0.8);
        for _ in 0..20 {
            let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..5.0)).collect();
            let d = dual_value(&lambda, &gs, &pc).unwrap();
            for _ in 0..100 {
                let mut zs = random_gs(&mut rng, n, 3, 1.0);
                repair_budgets(&mut zs, &pc);
                assert!(d <= primal_objective(&zs, &gs) + 1e-12);
            }
        }
    }

    #[test]
    fn solver_reaches_small_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let pc = random_pc(&mut rng, 4);
            let gs = random_gs(&mut rng, 4, 8, 0.5);
            let opts = DualOptions {
                max_dual_iterations: 5000,
                ..DualOptions::default()
            };
            let (zs, state) = solve_papc_precoders(&gs, &pc, &opts).unwrap();
            assert!(multicarrier_margins(&zs, &pc)
                .unwrap()
                .iter()
                .all(|m| *m >= -1e-9));
            assert!(state.dual_gap >= -1e-9);
            assert!(state.relative_gap() <= 1e-5, "gap {}", state.relative_gap());
        }
    }

    #[test]
    fn symmetric_instance_splits_power_equally() {
        let pc = PowerConstraints::uniform(3, 0.4).unwrap();
        let g = vec![c64(0.2, 0.0); 3];
        let gs = vec![g; 4];
        let (zs, _) = solve_papc_precoders(&gs, &pc, &DualOptions::default()).unwrap();
        let first = zs[0][0].norm_sqr();
        for z in &zs {
            for v in z {
                assert!((v.norm_sqr() - first).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn water_fill_cases() {
        assert_eq!(water_fill(&[2.5], 3.0).unwrap(), vec![3.0]);
        let q = water_fill(&[1.7; 5], 2.0).unwrap();
        assert!(q.iter().all(|v| (v - 0.4).abs() < 1e-12));
        assert!(water_fill(&[0.0, 0.0], 1.0).is_err());
        // Weak carriers are switched off.
        let q = water_fill(&[100.0, 0.001], 0.1).unwrap();
        assert_eq!(q[1], 0.0);
    }

    #[test]
    fn violation_stats_cases() {
        let pc = PowerConstraints::new(vec![1.0, 0.5]).unwrap();
        let feasible = vec![vec![c64(0.5, 0.0), c64(0.0, 0.5)]];
        assert_eq!(
            violation_stats(&feasible, &pc).unwrap(),
            ViolationStats {
                count: 0,
                max_percent: 0.0
            }
        );
        let over = vec![vec![c64(3.2f64.sqrt(), 0.0), c64(0.1, 0.0)]];
        let s = violation_stats(&over, &pc).unwrap();
        assert_eq!(s.count, 1);
        assert!((s.max_percent - 220.0).abs() < 1e-9);
    }

    #[test]
    fn repair_halves_fourfold_violation() {
        let pc = PowerConstraints::new(vec![1.0, 1.0]).unwrap();
        let mut zs = vec![vec![c64(2.0, 0.0), c64(0.5, 0.0)]];
        repair_budgets(&mut zs, &pc);
        assert_eq!(zs[0], vec![c64(1.0, 0.0), c64(0.5, 0.0)]);
    }
}
