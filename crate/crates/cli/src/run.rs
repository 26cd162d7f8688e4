//! Subcommand dispatch and result files.
//!
//! Every run writes its tables as CSV, a JSON summary and a manifest into the
//! output directory, named after the subcommand. The manifest holds the only
//! time-dependent field, so tables and summaries are reproducible byte for
//! byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tradeoff_core::bounds;
use tradeoff_core::estimator::{fit, noiseless_fit};
use tradeoff_core::experiments::{
    concavity_study, concentration_experiment, hn_tail_audit, identity_audit, rate_scan,
    sandwich_audit, ExperimentConfig, TailRow,
};
use tradeoff_core::landscape::{verify_tau_equals_rstar, Landscape, NoiseDraw, GENERATOR, NORMAL_SAMPLER};

use crate::config::{config_hash, ConfigError, RunConfig};
use crate::output::{write_atomic, Cell, Table};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT_DIR: &str = "tradeoff-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Fit,
    Landscape,
    Concentration,
    RateScan,
    Audit,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Fit => "fit",
            Subcommand::Landscape => "landscape",
            Subcommand::Concentration => "concentration",
            Subcommand::RateScan => "rate-scan",
            Subcommand::Audit => "audit",
        }
    }

    fn stem(&self) -> &'static str {
        match self {
            Subcommand::RateScan => "rate_scan",
            other => other.name(),
        }
    }
}

/// Overrides taken from flags or the environment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] tradeoff_core::Error),
    #[error("cannot start thread pool: {0}")]
    ThreadPool(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 for invalid input, 3 for numerical failure, 1 for output errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(e) if e.is_numerical() => 3,
            RunError::Core(_) | RunError::ThreadPool(_) => 2,
            RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub generator: String,
    pub normal_sampler: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub scenario: String,
    pub subcommand: String,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// False when an acceptance gate failed.
    pub passed: bool,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            4
        }
    }
}

struct Report {
    tables: Vec<(String, Table)>,
    summary: Value,
    passed: bool,
}

pub fn run(sub: Subcommand, config: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let mut cfg = config.experiment.clone();
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let hash = config_hash(&cfg);

    let report = match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?
            .install(|| dispatch(sub, &cfg, &hash))?,
        None => dispatch(sub, &cfg, &hash)?,
    };

    let mut outputs = Vec::new();
    for (name, table) in &report.tables {
        let path = out_dir.join(name);
        write(&path, table.to_csv().as_bytes())?;
        outputs.push(path);
    }
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": sub.name(),
        "scenario": cfg.scenario.name(),
        "config_hash": hash,
        "master_seed": cfg.master_seed,
        "pass": report.passed,
    });
    merge(&mut summary, report.summary);
    let summary_path = out_dir.join(format!("{}_summary.json", sub.stem()));
    write(&summary_path, pretty(&summary).as_bytes())?;
    outputs.push(summary_path);

    let manifest_path = out_dir.join(format!("{}_manifest.json", sub.stem()));
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        master_seed: cfg.master_seed,
        generator: GENERATOR.to_string(),
        normal_sampler: NORMAL_SAMPLER.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        scenario: cfg.scenario.name().to_string(),
        subcommand: sub.name().to_string(),
        outputs,
    };
    write(&manifest_path, pretty(&manifest).as_bytes())?;
    Ok(RunOutcome {
        passed: report.passed,
        manifest,
    })
}

fn pretty<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary values serialize");
    s.push('\n');
    s
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    write_atomic(path, bytes).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn dispatch(sub: Subcommand, cfg: &ExperimentConfig, hash: &str) -> Result<Report, RunError> {
    Ok(match sub {
        Subcommand::Fit => run_fit(cfg, hash)?,
        Subcommand::Landscape => run_landscape(cfg, hash)?,
        Subcommand::Concentration => run_concentration(cfg, hash)?,
        Subcommand::RateScan => run_rate_scan(cfg, hash)?,
        Subcommand::Audit => run_audit(cfg, hash)?,
    })
}

fn tail_cells(row: &TailRow) -> Vec<Cell> {
    vec![
        row.x.into(),
        row.empirical.into(),
        row.empirical_adjusted.into(),
        row.bound.into(),
        row.stderr.into(),
        row.gated.into(),
        row.pass.into(),
    ]
}

const TAIL_COLUMNS: [&str; 7] = ["x", "empirical", "empirical_adjusted", "bound", "stderr", "gated", "pass"];

/// One fit per sample size to `Y = f⁰ + ε` with repetition 0 of the seed.
fn run_fit(cfg: &ExperimentConfig, hash: &str) -> tradeoff_core::Result<Report> {
    let mut table = Table::new(&["n", "i", "x", "f0", "y", "fhat"], cfg.master_seed, hash);
    let mut per_n = Vec::new();
    for &n in &cfg.n_list {
        let p = cfg.problem(n)?;
        let eps = NoiseDraw::<f64>::generate(n, cfg.master_seed, 0);
        let y: Vec<f64> = p.f0().iter().zip(&eps.epsilon).map(|(a, e)| a + e).collect();
        let r = fit(&p, &y)?;
        let r_min = noiseless_fit(&p)?.r_min;
        for (i, &x) in p.grid().points().iter().enumerate() {
            table.push(vec![
                n.into(),
                i.into(),
                x.into(),
                p.f0()[i].into(),
                y[i].into(),
                r.fhat[i].into(),
            ]);
        }
        per_n.push(json!({
            "n": n,
            "lambda": p.lambda(),
            "r_min": r_min,
            "tau": r.tau,
            "fit_error": r.fit_error,
            "penalty": r.penalty,
            "objective": r.objective,
            "kkt_residual": r.kkt_residual,
        }));
    }
    Ok(Report {
        tables: vec![("fit.csv".into(), table)],
        summary: json!({ "per_n": per_n }),
        passed: true,
    })
}

/// `M_n` and `H_n` on the default radius grid for repetition 0.
fn run_landscape(cfg: &ExperimentConfig, hash: &str) -> tradeoff_core::Result<Report> {
    let mut table = Table::new(&["R", "M_n", "H_n", "n", "rep"], cfg.master_seed, hash);
    let mut per_n = Vec::new();
    let mut passed = true;
    for &n in &cfg.n_list {
        let p = cfg.problem(n)?;
        let land = Landscape::new(&p)?;
        let eps = NoiseDraw::generate(n, cfg.master_seed, 0);
        let radii = cfg.radii(&p, land.r_min())?;
        let curve = land.draw(&eps)?.curve(&radii)?;
        for j in 0..radii.len() {
            table.push(vec![
                curve.radii[j].into(),
                curve.m_values[j].into(),
                curve.h_values[j].into(),
                n.into(),
                0u64.into(),
            ]);
        }
        let id = verify_tau_equals_rstar(&p, &eps)?;
        let pass = id.abs_diff <= cfg.identity_tol();
        passed &= pass;
        per_n.push(json!({
            "n": n,
            "lambda": p.lambda(),
            "r_min": land.r_min(),
            "r_star": curve.r_star,
            "h_at_r_star": curve.h_at_r_star,
            "tau": id.tau,
            "identity_abs_diff": id.abs_diff,
            "identity_pass": pass,
        }));
    }
    Ok(Report {
        tables: vec![("landscape.csv".into(), table)],
        summary: json!({ "per_n": per_n }),
        passed,
    })
}

fn run_concentration(cfg: &ExperimentConfig, hash: &str) -> tradeoff_core::Result<Report> {
    let mut header = vec!["n"];
    header.extend(TAIL_COLUMNS);
    let mut table = Table::new(&header, cfg.master_seed, hash);
    let mut per_n = Vec::new();
    let mut passed = true;
    for &n in &cfg.n_list {
        let rep = concentration_experiment(cfg, n)?;
        for row in &rep.rows {
            let mut cells = vec![Cell::from(n)];
            cells.extend(tail_cells(row));
            table.push(cells);
        }
        passed &= rep.pass;
        per_n.push(json!({
            "n": n,
            "lambda": rep.lambda,
            "reps": rep.reps,
            "r_min": rep.r_min,
            "r0_hat": rep.r0_hat,
            "r0_stderr": rep.r0_stderr,
            "identity_max_diff": rep.identity_max_diff,
            "identity_pass": rep.identity_pass,
            "pass": rep.pass,
        }));
    }
    Ok(Report {
        tables: vec![("concentration.csv".into(), table)],
        summary: json!({ "per_n": per_n }),
        passed,
    })
}

fn run_rate_scan(cfg: &ExperimentConfig, hash: &str) -> tradeoff_core::Result<Report> {
    let rep = rate_scan(cfg)?;
    let mut table = Table::new(
        &[
            "n",
            "lambda",
            "r_min",
            "tau_f0",
            "condition2_ratio",
            "r0_hat",
            "r0_stderr",
            "median_tau",
            "median_fit_error",
            "median_penalty",
            "identity_max_diff",
        ],
        cfg.master_seed,
        hash,
    );
    for r in &rep.rows {
        table.push(vec![
            r.n.into(),
            r.lambda.into(),
            r.r_min.into(),
            r.tau_f0.into(),
            r.condition2_ratio.into(),
            r.r0_hat.into(),
            r.r0_stderr.into(),
            r.median_tau.into(),
            r.median_fit_error.into(),
            r.median_penalty.into(),
            r.identity_max_diff.into(),
        ]);
    }
    let r0_hat: Vec<Value> = rep.rows.iter().map(|r| json!({ "n": r.n, "r0_hat": r.r0_hat })).collect();
    let summary = json!({
        "target_slope": rep.target_slope,
        "fitted_slope_r0": rep.fit_r0.slope,
        "fitted_slope_tau": rep.fit_tau.slope,
        "ci_low": rep.fit_r0.ci_low,
        "ci_high": rep.fit_r0.ci_high,
        "tau_ci_low": rep.fit_tau.ci_low,
        "tau_ci_high": rep.fit_tau.ci_high,
        "fitted_slope_fit_error": rep.fit_fit_error.slope,
        "fitted_slope_penalty": rep.fit_penalty.slope,
        "penalty_spread": rep.penalty_spread,
        "condition2_drift": rep.condition2_drift,
        "condition2_flag": rep.condition2_flag,
        "slope_pass": rep.slope_pass,
        "penalty_pass": rep.penalty_pass,
        "identity_pass": rep.identity_pass,
        "r0_hat": r0_hat,
    });
    Ok(Report {
        tables: vec![("rate_scan.csv".into(), table)],
        summary,
        passed: rep.pass,
    })
}

/// Concavity, identity and tail audits per sample size plus the sandwich
/// scaling check across the list.
fn run_audit(cfg: &ExperimentConfig, hash: &str) -> tradeoff_core::Result<Report> {
    let seed = cfg.master_seed;
    let mut concavity = Table::new(
        &["n", "draws", "worst_margin", "violations", "tolerance", "pass"],
        seed,
        hash,
    );
    let mut identity = Table::new(&["n", "draws", "max_abs_diff", "tolerance", "pass"], seed, hash);
    let mut hn_header = vec!["n", "radius"];
    hn_header.extend(TAIL_COLUMNS);
    let mut hn = Table::new(&hn_header, seed, hash);
    let mut passed = true;
    let mut flags = Vec::new();
    for &n in &cfg.n_list {
        let c = concavity_study(cfg, n)?;
        concavity.push(vec![
            n.into(),
            c.draws.into(),
            c.worst_margin.into(),
            c.violations.into(),
            c.tolerance.into(),
            c.pass.into(),
        ]);
        let p = cfg.problem(n)?;
        let id = identity_audit(&p, cfg.reps, seed)?;
        identity.push(vec![
            n.into(),
            id.draws.into(),
            id.max_abs_diff.into(),
            id.tolerance.into(),
            id.pass.into(),
        ]);
        let r_min = Landscape::new(&p)?.r_min();
        let radius = if r_min > 0.0 {
            2.0 * r_min
        } else {
            bounds::k_constants(&cfg.entropy()?, n, p.lambda())?.1
        };
        let tail = hn_tail_audit(&p, radius, cfg.reps, seed)?;
        for row in &tail.rows {
            let mut cells = vec![Cell::from(n), radius.into()];
            cells.extend(tail_cells(row));
            hn.push(cells);
        }
        passed &= c.pass && id.pass && tail.pass;
        flags.push(json!({
            "n": n,
            "concavity_pass": c.pass,
            "identity_pass": id.pass,
            "hn_tail_pass": tail.pass,
        }));
    }
    let sw = sandwich_audit(cfg)?;
    let mut sandwich = Table::new(
        &["n", "lambda", "fitted_k1", "fitted_k2", "theory_k1", "theory_k2", "k2_scaling"],
        seed,
        hash,
    );
    for (pt, s) in sw.points.iter().zip(&sw.k2_scaling) {
        sandwich.push(vec![
            pt.n.into(),
            pt.lambda.into(),
            pt.fitted_k1.into(),
            pt.fitted_k2.into(),
            pt.theory_k1.into(),
            pt.theory_k2.into(),
            (*s).into(),
        ]);
    }
    passed &= sw.pass;
    Ok(Report {
        tables: vec![
            ("concavity.csv".into(), concavity),
            ("identity.csv".into(), identity),
            ("hn_tail.csv".into(), hn),
            ("sandwich.csv".into(), sandwich),
        ],
        summary: json!({
            "per_n": flags,
            "sandwich_max_relative_error": sw.max_relative_error,
            "sandwich_ordered": sw.ordered,
            "sandwich_pass": sw.pass,
        }),
        passed,
    })
}
