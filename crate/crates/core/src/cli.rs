//! `stprune` command-line tool.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 I/O failure.
//! `STPRUNE_THREADS` caps the worker pool; unset means one worker per core.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::bench::{self, BenchGrid, MIN_REPEATS};
use crate::error::{Error, Result};
use crate::oracle::{self, OracleCheckParams};
use crate::pipeline::{self, Method, Order, PruneConfig, SplitPolicy};
use crate::report::{
    self, BenchReport, ConfigEcho, MetricsDocument, OracleCheckDocument, RefsDocument, RunReport,
    ScalingProbes, StageCounts, SuiteDocument,
};
use crate::rsp::{ViewRing, NUSCENES_RING_NAME};
use crate::stt::{self, write_atomic};
use crate::suite::{self, Engine, SuiteSpec};
use crate::synth::{self, SceneSpec};
use crate::tensor::{Dims, TokenTensor};

pub const THREADS_ENV: &str = "STPRUNE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "stprune", version, about = "Spatio-temporal visual token pruning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic scene: writes OUT and OUT's `.labels.json` sidecar.
    Gen { spec: PathBuf, out: PathBuf },
    /// Prune a token tensor: writes OUTPUT and OUTPUT's `.refs.json` sidecar.
    Prune(PruneArgs),
    /// Score a refs sidecar against scene labels.
    Eval {
        refs: PathBuf,
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-stage wall-time sweep over a size grid.
    Bench {
        /// TOML file with `[[case]]` tables; defaults to a built-in grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = MIN_REPEATS)]
        repeats: usize,
        /// Also run the doubling probes and the stage-order comparison.
        #[arg(long)]
        probes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy against exhaustive max-min dispersion on small random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 14)]
        max_n: usize,
        #[arg(long, default_value_t = 5)]
        max_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-seed retention suite, ST-Prune against the vanilla baseline.
    Suite {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Optimized)]
        engine: EngineArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Optimized,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Vanilla,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PruneArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Flat TOML key-value file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub retention: Option<f64>,
    /// `balanced`, `paper-25`, `paper-10`, or `temporal,spatial`.
    #[arg(long)]
    pub split: Option<String>,
    /// `temporal-first` or `spatial-first`.
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `nuscenes-ring` or comma-separated view labels in tensor view order.
    #[arg(long)]
    pub ring: Option<String>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Allow single-view input (ring scores become constant).
    #[arg(long)]
    pub single_view: bool,
    /// Scene labels; adds retention metrics to the report.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for score maps, written as single-view STT tensors.
    #[arg(long)]
    pub scores_dir: Option<PathBuf>,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub retention: Option<f64>,
    pub split: Option<String>,
    pub order: Option<String>,
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub ring: Option<String>,
    pub single_view: Option<bool>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }
}

fn parse_method(text: &str) -> Result<Method> {
    match text.trim() {
        "st-prune" => Ok(Method::StPrune),
        "vanilla" => Ok(Method::Vanilla),
        other => Err(Error::Config(format!("unknown method {other:?}"))),
    }
}

/// Merge flags over the config file over built-in defaults.
pub fn resolve_config(args: &PruneArgs, file: FileConfig) -> Result<(PruneConfig, String)> {
    let retention = args.retention.or(file.retention).unwrap_or(0.25);
    let split = args
        .split
        .clone()
        .or(file.split)
        .unwrap_or_else(|| "balanced".into());
    let mut cfg = PruneConfig::with_retention(retention, SplitPolicy::parse(&split)?)?;
    if let Some(o) = args.order.as_deref().or(file.order.as_deref()) {
        cfg.order = o.parse::<Order>()?;
    }
    cfg.method = match args.baseline {
        Some(Baseline::Vanilla) => Method::Vanilla,
        None => file.method.as_deref().map(parse_method).transpose()?.unwrap_or_default(),
    };
    cfg.alpha = args.alpha.or(file.alpha).unwrap_or(cfg.alpha);
    cfg.lambda1 = args.lambda1.or(file.lambda1).unwrap_or(cfg.lambda1);
    cfg.lambda2 = args.lambda2.or(file.lambda2).unwrap_or(cfg.lambda2);
    let ring = args
        .ring
        .as_deref()
        .or(file.ring.as_deref())
        .unwrap_or(NUSCENES_RING_NAME);
    cfg.ring = ViewRing::parse(ring)?;
    cfg.allow_single_view = args.single_view || file.single_view.unwrap_or(false);
    cfg.validate()?;
    Ok((cfg, split))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(spec: &Path, out: &Path) -> Result<()> {
    let spec = SceneSpec::from_toml(&fs::read_to_string(spec)?)?;
    let (x, labels) = synth::gen_scene(&spec)?;
    stt::save_stt(&x, out)?;
    write_atomic(&synth::labels_path(out), labels.to_json().as_bytes())
}

fn single_view_map(values: &[f64], frames: usize, patches: usize) -> Result<TokenTensor> {
    TokenTensor::new(
        Dims::new(1, frames, patches, 1),
        values.iter().map(|&v| v as f32).collect(),
    )
}

fn write_scores(dir: &Path, diag: &pipeline::StageDiagnostics) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (v, m) in diag.temporal_scores.iter().enumerate() {
        let x = single_view_map(&m.values, m.frames, m.patches)?;
        stt::save_stt(&x, dir.join(format!("temporal_view{v}.stt")))?;
    }
    for (i, m) in diag.spatial_scores.iter().enumerate() {
        for v in 0..m.views {
            let x = single_view_map(m.view_values(v), 1, m.per_view)?;
            stt::save_stt(&x, dir.join(format!("spatial{i}_view{v}.stt")))?;
        }
    }
    Ok(())
}

pub fn cmd_prune(args: &PruneArgs) -> Result<RunReport> {
    let file = match &args.config {
        Some(p) => FileConfig::from_toml(&fs::read_to_string(p)?)?,
        None => FileConfig::default(),
    };
    let (mut cfg, split) = resolve_config(args, file)?;
    cfg.keep_diagnostics = args.scores_dir.is_some();
    let x = stt::load_stt(&args.input)?;
    let d = x.dims();
    let labels = args.labels.as_deref().map(synth::load_labels).transpose()?;
    if let Some(l) = &labels {
        if l.dims != d {
            return Err(Error::Consistency(format!(
                "labels describe {:?}, tensor is {:?}",
                l.dims, d
            )));
        }
    }
    let (out, timings) = pipeline::st_prune_timed(&x, &cfg)?;
    let metrics = labels
        .as_ref()
        .map(|l| synth::eval_retention(&out.refs, l))
        .transpose()?;
    let first_stage_per_view = match (cfg.method, cfg.order) {
        (Method::StPrune, Order::SpatialFirst) => cfg.per_frame_budget(d)? * d.frames,
        _ => out.budget.k1,
    };
    let counts = StageCounts {
        input_per_view: d.tokens_per_view(),
        first_stage_per_view,
        output_per_view: out.budget.k2,
        output_total: out.token_count(),
    };
    let run = RunReport::new(
        ConfigEcho::new(&cfg, &split),
        d,
        out.tokens.dims(),
        counts,
        timings,
        metrics,
    );
    stt::save_stt(&out.tokens, &args.output)?;
    let refs = RefsDocument::new(d, out.refs.clone());
    write_atomic(&report::refs_path(&args.output), report::to_json(&refs).as_bytes())?;
    if let Some(p) = &args.report {
        write_atomic(p, report::to_json(&run).as_bytes())?;
    }
    if let (Some(dir), Some(diag)) = (&args.scores_dir, &out.diagnostics) {
        write_scores(dir, diag)?;
    }
    Ok(run)
}

fn cmd_eval(refs: &Path, labels: &Path, out: Option<&Path>) -> Result<()> {
    let refs = RefsDocument::from_json(&fs::read_to_string(refs)?)?;
    let labels = synth::load_labels(labels)?;
    if refs.input_dims != labels.dims {
        return Err(Error::Consistency(format!(
            "refs describe {:?}, labels {:?}",
            refs.input_dims, labels.dims
        )));
    }
    let metrics = synth::eval_retention(&refs.refs, &labels)?;
    let kept = refs.refs.iter().map(Vec::len).sum();
    emit(&report::to_json(&MetricsDocument::new(kept, metrics)), out)
}

fn cmd_bench(grid: Option<&Path>, repeats: usize, probes: bool, out: Option<&Path>) -> Result<()> {
    if repeats < MIN_REPEATS {
        return Err(Error::Config(format!(
            "bench needs at least {MIN_REPEATS} repeats, got {repeats}"
        )));
    }
    let grid = match grid {
        Some(p) => BenchGrid::from_toml(&fs::read_to_string(p)?)?,
        None => BenchGrid::default_grid(),
    };
    let mut rows = Vec::with_capacity(grid.cases.len());
    eprintln!("{:>3} {:>3} {:>5} {:>4} {:>7} {:>15} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "V", "T", "P", "C", "keep", "order", "K1", "K2", "score_us", "seed_us", "expand_us", "total_us");
    for case in &grid.cases {
        let row = bench::run_case(case, repeats)?;
        eprintln!(
            "{:>3} {:>3} {:>5} {:>4} {:>7.4} {:>15} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
            case.views, case.frames, case.patches, case.channels, case.retention, case.order.to_string(),
            row.k1, row.k2, row.median.score_us, row.median.seed_us, row.median.expand_us, row.median_total_us
        );
        rows.push(row);
    }
    let probes = if probes {
        let mtp_doubling = bench::mtp_scaling(4, 1024, 128, 128, repeats)?;
        eprintln!("mtp doubling N {} -> {}: ratio {:.3}", mtp_doubling.small, mtp_doubling.large, mtp_doubling.ratio);
        let rsp_precompute_doubling = bench::rsp_precompute_scaling(6, 512, 128, repeats)?;
        eprintln!(
            "rsp precompute doubling M {} -> {}: ratio {:.3}",
            rsp_precompute_doubling.small, rsp_precompute_doubling.large, rsp_precompute_doubling.ratio
        );
        let ordering = bench::ordering_ablation(Dims::new(6, 5, 576, 128), 0.25, repeats)?;
        eprintln!(
            "order temporal-first {} us, spatial-first {} us",
            ordering.temporal_first_us, ordering.spatial_first_us
        );
        Some(ScalingProbes {
            mtp_doubling,
            rsp_precompute_doubling,
            ordering,
        })
    } else {
        None
    };
    emit(&report::to_json(&BenchReport::new(repeats, rows, probes)), out)
}

fn cmd_oracle_check(params: OracleCheckParams, out: Option<&Path>) -> Result<()> {
    let summary = oracle::oracle_check(&params)?;
    eprintln!(
        "{} instances: min ratio {:.6}, mean ratio {:.6}, greedy above optimal {}",
        params.instances, summary.min_ratio, summary.mean_ratio, summary.greedy_above_optimal
    );
    if summary.greedy_above_optimal > 0 {
        return Err(Error::Consistency(
            "greedy objective exceeded the exhaustive optimum".into(),
        ));
    }
    emit(&report::to_json(&OracleCheckDocument::new(summary)), out)
}

fn cmd_suite(spec: &Path, engine: EngineArg, out: Option<&Path>) -> Result<()> {
    let spec = SuiteSpec::from_toml(&fs::read_to_string(spec)?)?;
    let engine = match engine {
        EngineArg::Optimized => Engine::Optimized,
        EngineArg::Naive => Engine::Naive,
    };
    let r = suite::run_suite(&spec, engine)?;
    eprintln!(
        "{} seeds: dynamic recall {:.4} vs {:.4} (margin {:.4}), duplicate elimination {:.4} vs {:.4} (margin {:.4})",
        r.per_seed.len(),
        r.mean_st_prune.dynamic_recall,
        r.mean_vanilla.dynamic_recall,
        r.dynamic_recall_margin,
        r.mean_st_prune.duplicate_elimination_rate,
        r.mean_vanilla.duplicate_elimination_rate,
        r.duplicate_elimination_margin
    );
    emit(&report::to_json(&SuiteDocument::new(r)), out)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out } => cmd_gen(&spec, &out),
        Command::Prune(args) => cmd_prune(&args).map(|_| ()),
        Command::Eval { refs, labels, out } => cmd_eval(&refs, &labels, out.as_deref()),
        Command::Bench {
            grid,
            repeats,
            probes,
            out,
        } => cmd_bench(grid.as_deref(), repeats, probes, out.as_deref()),
        Command::OracleCheck {
            instances,
            max_n,
            max_k,
            seed,
            out,
        } => cmd_oracle_check(
            OracleCheckParams {
                instances,
                max_n,
                max_k,
                seed,
            },
            out.as_deref(),
        ),
        Command::Suite { spec, engine, out } => cmd_suite(&spec, engine, out.as_deref()),
    }
}

fn init_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))
}

/// Process entry point.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
