//! Experiment runner behind the `dcflow` binary: JSON config in, CSV traces
//! and a JSON report out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use dcflow::analysis::CheckMode;
use serde_json::{Map, Value};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::Report;

/// Exit code when a run completes but a required flag fails.
pub const EXIT_FLAG_FAILED: i32 = 4;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: CheckMode,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    pub out: Option<PathBuf>,
    pub strict_invariance: bool,
    /// Worker threads; `None` reads `DCFLOW_THREADS`, then uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { mode: CheckMode::Certify, seed: None, out: None, strict_invariance: false, threads: None }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub summary: String,
    pub out_dir: PathBuf,
    pub exit_code: i32,
}

fn thread_count(opts: &RunOptions) -> usize {
    opts.threads
        .or_else(|| std::env::var("DCFLOW_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let problem = cfg.problem.build()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let out = experiments::resolve_out(cfg, opts.out.as_deref());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(opts))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let ctx = experiments::Ctx {
        cfg,
        p: problem.inner.as_ref(),
        linear: problem.linear.as_ref(),
        out: out.clone(),
        mode: opts.mode,
        strict_invariance: opts.strict_invariance,
        seed,
        pool: &pool,
    };
    let mut report = Report::default();
    experiments::run(&ctx, &mut report)?;

    let mut header = Map::new();
    header.insert("schema_version".into(), config::SCHEMA_VERSION.into());
    header.insert("experiment".into(), cfg.experiment.as_str().into());
    header.insert("problem".into(), problem.inner.name().into());
    header.insert("dim".into(), problem.inner.dim().into());
    header.insert(
        "mode".into(),
        match opts.mode {
            CheckMode::Certify => "certify",
            CheckMode::ReportOnly => "report_only",
        }
        .into(),
    );
    header.insert("seed".into(), seed.into());
    let json = report.to_json(header);
    let text = serde_json::to_string_pretty(&json).expect("report serializes") + "\n";
    output::write_text(&out.join("report.json"), &text)?;

    let summary = report.summary(&format!("{} on {} -> {}", cfg.experiment.as_str(), problem.inner.name(), out.display()));
    let exit_code = if report.passed() || opts.mode == CheckMode::ReportOnly { 0 } else { EXIT_FLAG_FAILED };
    Ok(Outcome { report: json, summary, out_dir: out, exit_code })
}
