//! Machine-readable documents written by the command-line tool.
//!
//! Each document carries `schema_version` and `tool_version`; the matching JSON
//! Schemas live under `schemas/`. Fields serialize in declaration order, so a
//! document is byte-stable for identical inputs apart from its timing fields.

use serde::{Deserialize, Serialize};

use crate::bench::{BenchRow, OrderingResult, ScalingProbe};
use crate::error::{Error, Result};
use crate::oracle::OracleCheckSummary;
use crate::pipeline::{PruneConfig, StageTimings};
use crate::suite::SuiteReport;
use crate::synth::RetentionMetrics;
use crate::tensor::{Dims, TokenRef};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn version() -> String {
    TOOL_VERSION.to_string()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report documents serialize");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Document(format!("{what}: {e}")))
}

fn check_schema(found: u32, what: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Document(format!(
            "{what} schema_version {found} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

/// Effective prune settings after flags, config file and defaults are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub retention: f64,
    pub split: String,
    pub temporal_fraction: f64,
    pub spatial_fraction: f64,
    pub order: String,
    pub method: String,
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ring: Vec<String>,
    pub single_view: bool,
}

impl ConfigEcho {
    pub fn new(cfg: &PruneConfig, split: &str) -> Self {
        ConfigEcho {
            retention: cfg.total_retention,
            split: split.to_string(),
            temporal_fraction: cfg.temporal_fraction,
            spatial_fraction: cfg.spatial_fraction,
            order: cfg.order.to_string(),
            method: cfg.method.to_string(),
            alpha: cfg.alpha,
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            ring: cfg.ring.labels().to_vec(),
            single_view: cfg.allow_single_view,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageCounts {
    pub input_per_view: usize,
    pub first_stage_per_view: usize,
    pub output_per_view: usize,
    pub output_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingsUs {
    pub score: u64,
    pub seed: u64,
    pub expand: u64,
    pub assembly: u64,
    pub total: u64,
}

impl From<StageTimings> for TimingsUs {
    fn from(t: StageTimings) -> Self {
        TimingsUs {
            score: t.score_us,
            seed: t.seed_us,
            expand: t.expand_us,
            assembly: t.assembly_us,
            total: t.total_us(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ConfigEcho,
    pub input_dims: Dims,
    pub output_dims: Dims,
    pub counts: StageCounts,
    pub timings_us: TimingsUs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RetentionMetrics>,
}

impl RunReport {
    pub fn new(
        config: ConfigEcho,
        input_dims: Dims,
        output_dims: Dims,
        counts: StageCounts,
        timings: StageTimings,
        metrics: Option<RetentionMetrics>,
    ) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            config,
            input_dims,
            output_dims,
            counts,
            timings_us: timings.into(),
            metrics,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = from_json(text, "run report")?;
        check_schema(r.schema_version, "run report")?;
        Ok(r)
    }
}

/// Which input tokens a pruned tensor holds, row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefsDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub input_dims: Dims,
    /// One row per view, ascending by flat index; row `v` fills output view `v`.
    pub refs: Vec<Vec<TokenRef>>,
}

impl RefsDocument {
    pub fn new(input_dims: Dims, refs: Vec<Vec<TokenRef>>) -> Self {
        RefsDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            input_dims,
            refs,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RefsDocument = from_json(text, "refs document")?;
        check_schema(doc.schema_version, "refs document")?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.input_dims;
        if self.refs.len() != d.views {
            return Err(Error::Consistency(format!(
                "refs list {} views, input has {}",
                self.refs.len(),
                d.views
            )));
        }
        for (v, row) in self.refs.iter().enumerate() {
            for (i, r) in row.iter().enumerate() {
                if r.view != v || r.frame >= d.frames || r.patch >= d.patches || Some(r.flat) != r.frame.checked_mul(d.patches).and_then(|f| f.checked_add(r.patch)) {
                    return Err(Error::Consistency(format!("bad token ref {r:?} in view {v}")));
                }
                if i > 0 && row[i - 1].flat >= r.flat {
                    return Err(Error::Consistency(format!("view {v} refs are not strictly ascending")));
                }
            }
        }
        Ok(())
    }
}

/// `<out>.stt` -> `<out>.refs.json`.
pub fn refs_path(stt_path: &std::path::Path) -> std::path::PathBuf {
    stt_path.with_extension("refs.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub retained_tokens: usize,
    pub metrics: RetentionMetrics,
}

impl MetricsDocument {
    pub fn new(retained_tokens: usize, metrics: RetentionMetrics) -> Self {
        MetricsDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            retained_tokens,
            metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingProbes {
    pub mtp_doubling: ScalingProbe,
    pub rsp_precompute_doubling: ScalingProbe,
    pub ordering: OrderingResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<ScalingProbes>,
}

impl BenchReport {
    pub fn new(repeats: usize, rows: Vec<BenchRow>, probes: Option<ScalingProbes>) -> Self {
        BenchReport {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            repeats,
            rows,
            probes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckDocument {
    pub schema_version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub summary: OracleCheckSummary,
}

impl OracleCheckDocument {
    pub fn new(summary: OracleCheckSummary) -> Self {
        OracleCheckDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            summary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteDocument {
    pub schema_version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub report: SuiteReport,
}

impl SuiteDocument {
    pub fn new(report: SuiteReport) -> Self {
        SuiteDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: version(),
            report,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SuiteDocument = from_json(text, "suite document")?;
        check_schema(doc.schema_version, "suite document")?;
        Ok(doc)
    }
}
