//! Scenario generation and the seeded Monte-Carlo comparison of precoder designs.
//!
//! Every trial owns two ChaCha20 streams derived from `(seed, trial_index)`:
//! stream `2 t` draws the budgets and noise variances, stream `2 t + 1` the
//! channel taps. Trials therefore produce identical results regardless of
//! which thread runs them or in what order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PapcError, Result};
use crate::geometry::{multicarrier_margins, PowerConstraints, FEASIBILITY_TOL};
use crate::linalg::{dot, ComplexMatrix, ComplexVector, DiagonalNoise};
use crate::multicarrier::{
    cyclic_multicarrier, naive_scaled_precoders, percarrier_cyclic_precoders,
    projected_eigenvector_precoders, total_power_precoders, violation_stats, CyclicOptions,
    DualOptions, MultiCarrierLink, ViolationStats,
};
use crate::single_carrier::GaussSeidelOptions;

/// The precoder designs compared by the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Cyclic multicarrier design with the dual precoder solve.
    CyclicMulticarrier,
    /// Projected dominant eigenvector per carrier, equal power per carrier.
    ProjectedEigenvector,
    /// Single-carrier Gauss-Seidel per carrier with budgets `p_i / K`.
    PercarrierCyclic,
    /// Water-filled dominant eigenvectors under the total budget (ignores per-antenna budgets).
    TotalPower,
    /// Total-power weights with over-budget antennas scaled down.
    NaiveScaled,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CyclicMulticarrier,
        Method::ProjectedEigenvector,
        Method::PercarrierCyclic,
        Method::TotalPower,
        Method::NaiveScaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CyclicMulticarrier => "cyclic_multicarrier",
            Method::ProjectedEigenvector => "projected_eigenvector",
            Method::PercarrierCyclic => "percarrier_cyclic",
            Method::TotalPower => "total_power",
            Method::NaiveScaled => "naive_scaled",
        }
    }

    /// Whether the method is expected to respect the per-antenna budgets.
    pub fn respects_budgets(self) -> bool {
        self != Method::TotalPower
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PapcError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                PapcError::Config(format!(
                    "unknown method '{s}', expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Experiment parameters. Missing keys take the defaults of the reference scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Transmit antennas.
    pub n: usize,
    /// Receive antennas.
    pub m: usize,
    /// Carriers.
    #[serde(rename = "K")]
    pub k: usize,
    pub bandwidth_hz: f64,
    pub fc_hz: f64,
    /// RMS delay spread of the exponential power-delay profile.
    pub delay_spread_s: f64,
    pub p_min_w: f64,
    pub p_max_w: f64,
    pub noise_floor_dbw: f64,
    pub noise_spread_db: f64,
    pub trials: usize,
    pub cyclic_iters: usize,
    pub dual_iters: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 20,
            m: 10,
            k: 128,
            bandwidth_hz: 10e6,
            fc_hz: 2e9,
            delay_spread_s: 4e-6,
            p_min_w: 0.1,
            p_max_w: 1.0,
            noise_floor_dbw: -20.0,
            noise_spread_db: 10.0,
            trials: 400,
            cyclic_iters: 20,
            dual_iters: 200,
            seed: 1,
            methods: default_methods(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PapcError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(PapcError::Config(format!("{field}: {why}")));
        for (field, v) in [
            ("n", self.n),
            ("m", self.m),
            ("K", self.k),
            ("trials", self.trials),
            ("dual_iters", self.dual_iters),
        ] {
            if v == 0 {
                return bad(field, "must be at least 1".into());
            }
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(
                "bandwidth_hz",
                format!("must be positive, got {}", self.bandwidth_hz),
            );
        }
        if !(self.fc_hz > 0.0 && self.fc_hz.is_finite()) {
            return bad("fc_hz", format!("must be positive, got {}", self.fc_hz));
        }
        if !(self.delay_spread_s >= 0.0 && self.delay_spread_s.is_finite()) {
            return bad(
                "delay_spread_s",
                format!("must be nonnegative, got {}", self.delay_spread_s),
            );
        }
        if !(self.p_min_w > 0.0 && self.p_min_w.is_finite()) {
            return bad("p_min_w", format!("must be positive, got {}", self.p_min_w));
        }
        if !(self.p_max_w >= self.p_min_w && self.p_max_w.is_finite()) {
            return bad(
                "p_max_w",
                format!("must be finite and >= p_min_w, got {}", self.p_max_w),
            );
        }
        if !self.noise_floor_dbw.is_finite() {
            return bad("noise_floor_dbw", "must be finite".into());
        }
        if !(self.noise_spread_db >= 0.0 && self.noise_spread_db.is_finite()) {
            return bad(
                "noise_spread_db",
                format!("must be nonnegative, got {}", self.noise_spread_db),
            );
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return bad("methods", "duplicate entries".into());
        }
        if self.decay_taps().round() >= self.k as f64 && self.k > 1 {
            return bad(
                "delay_spread_s",
                format!(
                    "delay spread of {:.1} samples exceeds the {} carriers",
                    self.decay_taps(),
                    self.k
                ),
            );
        }
        Ok(())
    }

    /// Decay constant of the power-delay profile in taps.
    pub fn decay_taps(&self) -> f64 {
        self.delay_spread_s * self.bandwidth_hz
    }

    /// Number of channel taps: `4x` the decay constant, at most `K - 1`, at least 1.
    pub fn tap_count(&self) -> usize {
        let l0 = self.decay_taps();
        if l0 <= 0.0 {
            return 1;
        }
        let cap = self.k.saturating_sub(1).max(1);
        ((4.0 * l0).round() as usize).clamp(1, cap)
    }

    /// Normalized exponential power-delay profile.
    pub fn tap_profile(&self) -> Vec<f64> {
        let l0 = self.decay_taps();
        let count = self.tap_count();
        let raw: Vec<f64> = if l0 <= 0.0 {
            vec![1.0]
        } else {
            (0..count).map(|l| (-(l as f64) / l0).exp()).collect()
        };
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    fn opts(&self) -> CyclicOptions {
        CyclicOptions {
            max_cyclic_iterations: self.cyclic_iters,
            dual: DualOptions {
                max_dual_iterations: self.dual_iters,
                ..DualOptions::default()
            },
        }
    }
}

/// Stream purposes within one trial.
#[derive(Clone, Copy, Debug)]
pub enum StreamPurpose {
    Scenario = 0,
    Channel = 1,
}

/// ChaCha20 stream for `(seed, trial, purpose)`.
pub fn trial_rng(seed: u64, trial_index: u64, purpose: StreamPurpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial_index.wrapping_mul(2).wrapping_add(purpose as u64));
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * (0.5 * variance).sqrt()
}

/// Per-carrier `m x n` channels of independent Rayleigh tapped delay lines.
///
/// `H_k[j, i] = sum_l h_l[j, i] exp(-2 pi i k l / K)` with `h_l ~ CN(0, rho_l)`.
pub fn generate_channel<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<ComplexMatrix>> {
    cfg.validate()?;
    let (n, m, k) = (cfg.n, cfg.m, cfg.k);
    let profile = cfg.tap_profile();
    let twiddle: Vec<Complex64> = (0..k)
        .map(|t| Complex64::from_polar(1.0, -std::f64::consts::TAU * t as f64 / k as f64))
        .collect();
    let mut channels = vec![ComplexMatrix::zeros(m, n); k];
    let mut taps = vec![Complex64::new(0.0, 0.0); profile.len()];
    for j in 0..m {
        for i in 0..n {
            for (t, rho) in taps.iter_mut().zip(&profile) {
                *t = complex_normal(rng, *rho);
            }
            for (kk, h) in channels.iter_mut().enumerate() {
                h[(j, i)] = taps
                    .iter()
                    .enumerate()
                    .map(|(l, t)| t * twiddle[(kk * l) % k])
                    .sum();
            }
        }
    }
    Ok(channels)
}

/// Per-antenna budgets uniform in `[p_min_w, p_max_w]` and diagonal noise uniform in dBW.
pub fn generate_scenario<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(PowerConstraints, DiagonalNoise)> {
    cfg.validate()?;
    let p = (0..cfg.n)
        .map(|_| cfg.p_min_w + (cfg.p_max_w - cfg.p_min_w) * rng.random::<f64>())
        .collect();
    let noise = (0..cfg.m)
        .map(|_| {
            10f64.powf((cfg.noise_floor_dbw + cfg.noise_spread_db * rng.random::<f64>()) / 10.0)
        })
        .collect();
    Ok((PowerConstraints::new(p)?, DiagonalNoise::new(noise)?))
}

/// Draws the link of trial `trial_index`.
pub fn trial_link(cfg: &ScenarioConfig, trial_index: u64) -> Result<MultiCarrierLink> {
    let (pc, noise) = generate_scenario(
        cfg,
        &mut trial_rng(cfg.seed, trial_index, StreamPurpose::Scenario),
    )?;
    let channels = generate_channel(
        cfg,
        &mut trial_rng(cfg.seed, trial_index, StreamPurpose::Channel),
    )?;
    MultiCarrierLink::new(channels, noise, pc)
}

/// Post-combining SNR in dB, `|w^H H z|^2 / (w^H R_n w)`.
pub fn carrier_snr(
    z: &[Complex64],
    w: &[Complex64],
    h: &ComplexMatrix,
    noise: &DiagonalNoise,
) -> Result<f64> {
    let noise_power = noise.quad_form(w);
    if noise_power == 0.0 {
        return Err(PapcError::Domain(
            "zero combiner; carrier SNR is undefined".into(),
        ));
    }
    let signal = dot(w, &h.mul_vec(z)).norm_sqr();
    Ok(10.0 * (signal / noise_power).log10())
}

/// Result of one method in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    /// Carrier SNRs in dB, one per carrier.
    pub snr_db: Vec<f64>,
    pub sum_mse: f64,
    pub violations: ViolationStats,
    /// Smallest per-antenna budget margin (watts).
    pub min_margin: f64,
    /// Duality gap of the final precoder update (cyclic method only).
    pub dual_gap: Option<f64>,
    /// Wall-clock seconds; excluded from equality checks.
    #[serde(skip)]
    pub seconds: f64,
}

impl MethodOutcome {
    /// Equality of every deterministic field.
    pub fn same_numbers(&self, other: &Self) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.seconds = 0.0;
        b.seconds = 0.0;
        a == b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialResult {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn same_numbers(&self, other: &Self) -> bool {
        self.trial_index == other.trial_index
            && self.outcomes.len() == other.outcomes.len()
            && self
                .outcomes
                .iter()
                .zip(&other.outcomes)
                .all(|(a, b)| a.same_numbers(b))
    }
}

/// Precoders and combiners of one method on one link.
pub fn design(
    method: Method,
    link: &MultiCarrierLink,
    cfg: &ScenarioConfig,
) -> Result<(Vec<ComplexVector>, Vec<ComplexVector>, Option<f64>)> {
    let opts = cfg.opts();
    match method {
        Method::CyclicMulticarrier => {
            let sol = cyclic_multicarrier(link, &opts)?;
            Ok((sol.z, sol.w, Some(sol.dual_gap)))
        }
        Method::ProjectedEigenvector => {
            let z = projected_eigenvector_precoders(link)?;
            let w = link.mmse_combiners(&z);
            Ok((z, w, None))
        }
        Method::PercarrierCyclic => {
            let (z, w) = percarrier_cyclic_precoders(link, &GaussSeidelOptions::default())?;
            Ok((z, w, None))
        }
        Method::TotalPower => {
            let z = total_power_precoders(link, link.pc.total())?;
            let w = link.mmse_combiners(&z);
            Ok((z, w, None))
        }
        Method::NaiveScaled => {
            let z = naive_scaled_precoders(link)?;
            let w = link.mmse_combiners(&z);
            Ok((z, w, None))
        }
    }
}

pub fn evaluate(
    method: Method,
    link: &MultiCarrierLink,
    z: &[ComplexVector],
    w: &[ComplexVector],
) -> Result<MethodOutcome> {
    let snr_db = link
        .channels
        .iter()
        .zip(z.iter().zip(w))
        .map(|(h, (zk, wk))| carrier_snr(zk, wk, h, &link.noise))
        .collect::<Result<Vec<_>>>()?;
    let margins = multicarrier_margins(z, &link.pc)?;
    Ok(MethodOutcome {
        method,
        snr_db,
        sum_mse: link.mses(z, w).iter().sum(),
        violations: violation_stats(z, &link.pc)?,
        min_margin: margins.iter().cloned().fold(f64::INFINITY, f64::min),
        dual_gap: None,
        seconds: 0.0,
    })
}

/// Runs every configured method on the link of trial `trial_index`.
pub fn run_trial(cfg: &ScenarioConfig, trial_index: u64) -> Result<TrialResult> {
    let link = trial_link(cfg, trial_index)?;
    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let tag = |e: PapcError| PapcError::Trial {
            trial: trial_index,
            method: method.to_string(),
            source: Box::new(e),
        };
        let start = Instant::now();
        let (z, w, gap) = design(method, &link, cfg).map_err(tag)?;
        let mut outcome = evaluate(method, &link, &z, &w).map_err(tag)?;
        outcome.dual_gap = gap;
        outcome.seconds = start.elapsed().as_secs_f64();
        if method.respects_budgets() && outcome.min_margin < -FEASIBILITY_TOL {
            return Err(tag(PapcError::Contract(format!(
                "budget exceeded by {:.3e} W",
                -outcome.min_margin
            ))));
        }
        outcomes.push(outcome);
    }
    Ok(TrialResult {
        trial_index,
        outcomes,
    })
}

/// Empirical CDF: sorted samples with cumulative probabilities `i / N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest sample whose cumulative probability reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let idx = self.probabilities.partition_point(|q| *q < p);
        self.values[idx.min(self.values.len() - 1)]
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<CdfSeries> {
    if samples.is_empty() {
        return Err(PapcError::Domain("empirical CDF of an empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(PapcError::Domain("NaN sample".into()));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let probabilities = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(CdfSeries {
        values,
        probabilities,
    })
}

/// Sample median (mean of the two middle order statistics for even sizes).
pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Pooled statistics of one method over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub snr_cdf: CdfSeries,
    pub violation_count_cdf: CdfSeries,
    pub violation_max_percent_cdf: CdfSeries,
    pub median_snr_db: f64,
    pub median_sum_mse: f64,
    pub median_violation_count: f64,
    pub median_max_percent: f64,
    /// Fraction of trials with at least 7 antennas over budget.
    pub fraction_trials_ge7_violations: f64,
    #[serde(skip)]
    pub seconds_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub config: ScenarioConfig,
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<MethodSummary>,
}

impl ResultSet {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Median carrier-SNR of `a` minus that of `b`, in dB.
    pub fn median_gap_db(&self, a: Method, b: Method) -> Option<f64> {
        Some(self.summary(a)?.median_snr_db - self.summary(b)?.median_snr_db)
    }

    /// Builds the pooled summaries from trial results; the order of `trials` is irrelevant.
    pub fn from_trials(config: ScenarioConfig, mut trials: Vec<TrialResult>) -> Result<Self> {
        trials.sort_by_key(|t| t.trial_index);
        let mut summaries = Vec::with_capacity(config.methods.len());
        for &method in &config.methods {
            let outcomes: Vec<&MethodOutcome> =
                trials.iter().filter_map(|t| t.outcome(method)).collect();
            let snr: Vec<f64> = outcomes
                .iter()
                .flat_map(|o| o.snr_db.iter().cloned())
                .collect();
            let mse: Vec<f64> = outcomes.iter().map(|o| o.sum_mse).collect();
            let counts: Vec<f64> = outcomes.iter().map(|o| o.violations.count as f64).collect();
            let pct: Vec<f64> = outcomes.iter().map(|o| o.violations.max_percent).collect();
            let ge7 =
                counts.iter().filter(|c| **c >= 7.0).count() as f64 / counts.len().max(1) as f64;
            summaries.push(MethodSummary {
                method,
                median_snr_db: median(&snr),
                median_sum_mse: median(&mse),
                median_violation_count: median(&counts),
                median_max_percent: median(&pct),
                fraction_trials_ge7_violations: ge7,
                snr_cdf: empirical_cdf(&snr)?,
                violation_count_cdf: empirical_cdf(&counts)?,
                violation_max_percent_cdf: empirical_cdf(&pct)?,
                seconds_total: outcomes.iter().map(|o| o.seconds).sum(),
            });
        }
        Ok(Self {
            config,
            trials,
            summaries,
        })
    }
}

/// Runs all trials (in parallel on the current rayon pool) and pools the results.
pub fn monte_carlo(cfg: &ScenarioConfig) -> Result<ResultSet> {
    cfg.validate()?;
    let trials = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    ResultSet::from_trials(cfg.clone(), trials)
}
