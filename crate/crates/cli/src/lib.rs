//! Implementation of the `papc` command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use papc::channel_sim::{design, evaluate, monte_carlo, trial_link, Method, ScenarioConfig};
use papc::multicarrier::{
    cyclic_multicarrier, kkt_residuals_multicarrier, CyclicOptions, DualOptions,
};
use papc::report;
use papc::single_carrier::{gauss_seidel_mmse, miso_solution, GaussSeidelOptions};
use papc::PapcError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "papc",
    version,
    about = "MMSE beamforming under per-antenna power constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo comparison and write CDFs, a summary and a manifest.
    Simulate(SimulateArgs),
    /// Solve one trial and print diagnostics for every method.
    Single(SingleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON scenario file; missing keys take the reference defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Worker threads for trial parallelism (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trial index to draw.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Print the per-carrier SNR table.
    #[arg(long)]
    pub carrier_dump: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<PapcError> for CliError {
    fn from(e: PapcError) -> Self {
        match e {
            PapcError::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Reads a JSON scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Config file (or defaults) with command-line overrides applied and validated.
pub fn resolve_config(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("--methods: {e}")))?;
    }
    if args.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    cfg.validate().map_err(CliError::from)?;
    Ok(cfg)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub threads: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    pub method_seconds: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let data = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&data)))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&args.common)?;
    let pool = thread_pool(args.common.threads)?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let rs = pool.install(|| monte_carlo(&cfg))?;
    let finished_at = chrono::Utc::now().to_rfc3339();

    let written = report::write_outputs(&rs, &args.out)
        .map_err(|e| CliError::Runtime(format!("cannot write to {}: {e}", args.out.display())))?;
    let mut files = Vec::with_capacity(written.len());
    for path in &written {
        let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", path.display()));
        files.push(FileEntry {
            name: path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            bytes: std::fs::metadata(path).map_err(io)?.len(),
            sha256: sha256_file(path).map_err(io)?,
        });
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg.clone(),
        threads: args.common.threads,
        started_at,
        finished_at,
        method_seconds: rs
            .summaries
            .iter()
            .map(|s| (s.method.to_string(), s.seconds_total))
            .collect(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain data") + "\n";
    std::fs::write(args.out.join(MANIFEST_FILE), text)
        .map_err(|e| CliError::Runtime(format!("cannot write manifest: {e}")))?;

    println!(
        "{} trials, n={} m={} K={}",
        rs.trials.len(),
        cfg.n,
        cfg.m,
        cfg.k
    );
    println!(
        "{:<24} {:>14} {:>14} {:>12} {:>12}",
        "method", "median SNR dB", "median sumMSE", "viol count", "viol max %"
    );
    for s in &rs.summaries {
        println!(
            "{:<24} {:>14.3} {:>14.5} {:>12.1} {:>12.1}",
            s.method.name(),
            s.median_snr_db,
            s.median_sum_mse,
            s.median_violation_count,
            s.median_max_percent
        );
    }
    println!("outputs written to {}", args.out.display());
    Ok(())
}

/// Text report of one trial.
pub fn single_report(
    cfg: &ScenarioConfig,
    trial: u64,
    carrier_dump: bool,
) -> Result<String, CliError> {
    let link = trial_link(cfg, trial)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "trial {trial}: n={} m={} K={} p_T={:.6} W",
        cfg.n,
        cfg.m,
        cfg.k,
        link.pc.total()
    );

    let mut snrs = Vec::new();
    let _ = writeln!(
        out,
        "\n{:<24} {:>14} {:>12} {:>12}",
        "method", "sum-MSE", "violations", "max viol %"
    );
    for &method in &cfg.methods {
        let (z, w, _) = design(method, &link, cfg)?;
        let o = evaluate(method, &link, &z, &w)?;
        let _ = writeln!(
            out,
            "{:<24} {:>14.8} {:>12} {:>12.2}",
            method.name(),
            o.sum_mse,
            o.violations.count,
            o.violations.max_percent
        );
        snrs.push((method, o.snr_db));
    }

    if cfg.methods.contains(&Method::CyclicMulticarrier) {
        let opts = CyclicOptions {
            max_cyclic_iterations: cfg.cyclic_iters,
            dual: DualOptions {
                max_dual_iterations: cfg.dual_iters,
                ..DualOptions::default()
            },
        };
        let sol = cyclic_multicarrier(&link, &opts)?;
        let _ = writeln!(out, "\ncyclic multicarrier sum-MSE trace:");
        for (i, v) in sol.sum_mse_trace.iter().enumerate() {
            let _ = writeln!(out, "  iter {i:>3}: {v:.12}");
        }
        if let Some(state) = &sol.dual_state {
            let lambda = state.reported_lambda();
            let kkt =
                kkt_residuals_multicarrier(&sol.z, &lambda, &sol.effective_channels, &link.pc)?;
            let worst = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "final dual state: {} iterations, converged = {}",
                state.iterations, state.converged
            );
            let _ = writeln!(out, "  lambda = {:?}", lambda);
            let _ = writeln!(out, "  dual value  = {:.12}", state.value);
            let _ = writeln!(out, "  primal value = {:.12}", state.primal_value);
            let _ = writeln!(
                out,
                "  duality gap = {:.3e} (relative {:.3e})",
                state.dual_gap,
                state.relative_gap()
            );
            let _ = writeln!(
                out,
                "  KKT residuals: stationarity {:.3e}, primal {:.3e}, slackness {:.3e}, dual {:.3e}",
                worst(&kkt.stationarity),
                worst(&kkt.primal),
                worst(&kkt.slackness),
                worst(&kkt.dual)
            );
            let repaired = state
                .pre_repair_margins
                .iter()
                .filter(|m| **m < 0.0)
                .count();
            let _ = writeln!(out, "  antennas repaired after recovery: {repaired}");
        }
    }

    if cfg.k == 1 {
        let gs = gauss_seidel_mmse(
            &link.carrier_link(0, link.pc.clone()),
            &GaussSeidelOptions::default(),
        )?;
        let monotone = gs.half_steps.windows(2).all(|p| p[1] <= p[0] + 1e-12);
        let _ = writeln!(
            out,
            "\nsingle-carrier Gauss-Seidel trace (monotone = {monotone}):"
        );
        for (i, v) in gs.trace.iter().enumerate() {
            let _ = writeln!(out, "  iter {i:>3}: {v:.15}");
        }
    }

    if cfg.m == 1 {
        let _ = writeln!(out, "\nMISO closed form per carrier:");
        for (k, h) in link.channels.iter().enumerate() {
            let miso = miso_solution(h.row(0), link.noise.variances()[0], &link.pc)?;
            let _ = writeln!(
                out,
                "  carrier {k}: |w| = {:.12}, mse = {:.12}",
                miso.w[0].norm(),
                miso.objective
            );
        }
    }

    if carrier_dump {
        let _ = write!(out, "\n{:>7}", "carrier");
        for (m, _) in &snrs {
            let _ = write!(out, " {:>22}", m.name());
        }
        out.push('\n');
        for k in 0..cfg.k {
            let _ = write!(out, "{k:>7}");
            for (_, s) in &snrs {
                let _ = write!(out, " {:>22.4}", s[k]);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn cmd_single(args: &SingleArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&args.common)?;
    let pool = thread_pool(args.common.threads)?;
    let text = pool.install(|| single_report(&cfg, args.trial, args.carrier_dump))?;
    print!("{text}");
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Single(a) => cmd_single(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
