//! End-to-end orchestration: budget allocation, stage ordering and output assembly.
//!
//! The default order runs temporal pruning per view (`T*P -> K1`) and then
//! ring-view spatial pruning on the survivors (`K1 -> K2`). The spatial-first
//! ablation prunes every frame spatially, then runs temporal selection over
//! each view's concatenated survivors.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtp::{self, TemporalScoreMap, TemporalScoreParams};
use crate::rsp::{self, SpatialOptions, SpatialScoreMap, ViewRing};
use crate::select::{self, greedy_expand, weighted_seed, SelectionResult, WeightedSelectParams};
use crate::tensor::{Dims, TokenRef, TokenRows, TokenTensor};

/// Relative tolerance when checking that a split multiplies out to the requested retention.
pub const SPLIT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    TemporalFirst,
    SpatialFirst,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::TemporalFirst => "temporal-first",
            Order::SpatialFirst => "spatial-first",
        })
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "temporal-first" => Ok(Order::TemporalFirst),
            "spatial-first" => Ok(Order::SpatialFirst),
            other => Err(Error::Config(format!("unknown order {other:?}"))),
        }
    }
}

/// Which selection rule drives both stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Score-weighted temporal and ring-view stages.
    #[default]
    StPrune,
    /// Plain max-min dispersion in both stages, seeded by mean similarity.
    Vanilla,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::StPrune => "st-prune",
            Method::Vanilla => "vanilla",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// `(sqrt(total), sqrt(total))`.
    Balanced,
    /// 50% temporal x 50% spatial, nominally 25% overall.
    Paper25,
    /// 32% temporal x 32% spatial, nominally 10% overall.
    Paper10,
    Custom { temporal: f64, spatial: f64 },
}

impl SplitPolicy {
    /// `balanced`, `paper-25`, `paper-10`, or `temporal,spatial`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "balanced" => Ok(SplitPolicy::Balanced),
            "paper-25" => Ok(SplitPolicy::Paper25),
            "paper-10" => Ok(SplitPolicy::Paper10),
            other => {
                let parts: Vec<&str> = other.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "split must be a preset or 'temporal,spatial', got {other:?}"
                    )));
                }
                let parse = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad split fraction {s:?}")))
                };
                Ok(SplitPolicy::Custom {
                    temporal: parse(parts[0])?,
                    spatial: parse(parts[1])?,
                })
            }
        }
    }

    /// Overall retention implied by a preset.
    pub fn nominal_total(&self) -> Option<f64> {
        match self {
            SplitPolicy::Paper25 => Some(0.25),
            SplitPolicy::Paper10 => Some(0.10),
            _ => None,
        }
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitPolicy::Balanced => f.write_str("balanced"),
            SplitPolicy::Paper25 => f.write_str("paper-25"),
            SplitPolicy::Paper10 => f.write_str("paper-10"),
            SplitPolicy::Custom { temporal, spatial } => write!(f, "{temporal},{spatial}"),
        }
    }
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Config(format!("{name} must be in (0, 1], got {x}")));
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b
}

/// Factor an overall retention rate into `(temporal, spatial)` stage fractions.
pub fn budget_split(total: f64, policy: SplitPolicy) -> Result<(f64, f64)> {
    check_fraction("total retention", total)?;
    let pair = match policy {
        SplitPolicy::Balanced => {
            let r = total.sqrt();
            (r, r)
        }
        SplitPolicy::Paper25 => (0.50, 0.50),
        SplitPolicy::Paper10 => (0.32, 0.32),
        SplitPolicy::Custom { temporal, spatial } => (temporal, spatial),
    };
    check_fraction("temporal fraction", pair.0)?;
    check_fraction("spatial fraction", pair.1)?;
    // Presets also accept their rounded headline total (0.10 for 0.32 x 0.32).
    let fits = |reference: f64| relative_gap(reference, total) <= SPLIT_TOLERANCE;
    if !(fits(pair.0 * pair.1) || policy.nominal_total().is_some_and(fits)) {
        return Err(Error::Config(format!(
            "split {policy} does not multiply out to retention {total}"
        )));
    }
    Ok(pair)
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Per-view token budgets after each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub k1: usize,
    pub k2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub total_retention: f64,
    pub temporal_fraction: f64,
    pub spatial_fraction: f64,
    pub order: Order,
    pub method: Method,
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ring: ViewRing,
    pub allow_single_view: bool,
    pub keep_diagnostics: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            total_retention: 0.25,
            temporal_fraction: 0.5,
            spatial_fraction: 0.5,
            order: Order::TemporalFirst,
            method: Method::StPrune,
            alpha: mtp::DEFAULT_ALPHA,
            lambda1: mtp::DEFAULT_LAMBDA1,
            lambda2: rsp::DEFAULT_LAMBDA2,
            ring: ViewRing::nuscenes(),
            allow_single_view: false,
            keep_diagnostics: false,
        }
    }
}

impl PruneConfig {
    pub fn with_retention(total: f64, policy: SplitPolicy) -> Result<Self> {
        let (t, s) = budget_split(total, policy)?;
        Ok(PruneConfig {
            total_retention: total,
            temporal_fraction: t,
            spatial_fraction: s,
            ..PruneConfig::default()
        })
    }

    pub fn temporal_params(&self) -> TemporalScoreParams {
        TemporalScoreParams {
            alpha: self.alpha,
            lambda1: self.lambda1,
        }
    }

    fn spatial_options(&self) -> SpatialOptions {
        SpatialOptions {
            allow_single_view: self.allow_single_view,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("total retention", self.total_retention)?;
        check_fraction("temporal fraction", self.temporal_fraction)?;
        check_fraction("spatial fraction", self.spatial_fraction)?;
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// `K1 = round(tf * T * P)`, `K2 = round(sf * K1)`, both rounded half-up and floored at 1.
    pub fn budget(&self, dims: Dims) -> Result<Budget> {
        self.validate()?;
        let n = dims.tokens_per_view();
        let k1 = round_half_up(self.temporal_fraction * n as f64).clamp(1, n);
        let k2 = round_half_up(self.spatial_fraction * k1 as f64).clamp(1, k1);
        Ok(Budget { k1, k2 })
    }

    /// Per-frame spatial budget used by the spatial-first order; large enough that
    /// the temporal stage can still deliver exactly `K2` tokens per view.
    pub fn per_frame_budget(&self, dims: Dims) -> Result<usize> {
        let b = self.budget(dims)?;
        let by_fraction = round_half_up(self.spatial_fraction * dims.patches as f64);
        let needed = b.k2.div_ceil(dims.frames);
        Ok(by_fraction.max(needed).clamp(1, dims.patches))
    }
}

/// Wall time spent in each phase, summed across both stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub score_us: u64,
    pub seed_us: u64,
    pub expand_us: u64,
    pub assembly_us: u64,
}

impl StageTimings {
    pub fn total_us(&self) -> u64 {
        self.score_us + self.seed_us + self.expand_us + self.assembly_us
    }
}

#[derive(Default)]
struct Clock {
    score: Duration,
    seed: Duration,
    expand: Duration,
    assembly: Duration,
}

impl Clock {
    fn time<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *slot += start.elapsed();
        out
    }

    fn finish(self) -> StageTimings {
        StageTimings {
            score_us: self.score.as_micros() as u64,
            seed_us: self.seed.as_micros() as u64,
            expand_us: self.expand.as_micros() as u64,
            assembly_us: self.assembly.as_micros() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageDiagnostics {
    /// One map per view over the full `T x P` grid.
    pub temporal_scores: Vec<TemporalScoreMap>,
    /// One map for temporal-first, one per frame for spatial-first.
    pub spatial_scores: Vec<SpatialScoreMap>,
    /// Per-view flattened indices surviving the first stage.
    pub intermediate: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedOutput {
    pub input_dims: Dims,
    pub budget: Budget,
    /// `V x 1 x K2 x C`.
    pub tokens: TokenTensor,
    /// `V` rows of `K2` references, ascending by flat index.
    pub refs: Vec<Vec<TokenRef>>,
    pub diagnostics: Option<StageDiagnostics>,
}

impl PrunedOutput {
    pub fn token_count(&self) -> usize {
        self.refs.iter().map(Vec::len).sum()
    }
}

/// Gather rows `indices` of `rows` into a new contiguous buffer.
fn gather(rows: TokenRows<'_>, indices: &[usize]) -> Vec<f32> {
    let mut out = Vec::with_capacity(indices.len() * rows.dim());
    for &i in indices {
        out.extend_from_slice(rows.row(i));
    }
    out
}

fn assemble(x: &TokenTensor, budget: Budget, flat: Vec<Vec<usize>>, diagnostics: Option<StageDiagnostics>) -> Result<PrunedOutput> {
    let d = x.dims();
    let mut data = Vec::with_capacity(d.views * budget.k2 * d.channels);
    let mut refs = Vec::with_capacity(d.views);
    for (v, idx) in flat.into_iter().enumerate() {
        let view = x.view(v);
        let mut row = Vec::with_capacity(idx.len());
        for f in idx {
            data.extend_from_slice(view.row(f));
            row.push(TokenRef::from_flat(v, f, d.patches));
        }
        refs.push(row);
    }
    let tokens = TokenTensor::new(Dims::new(d.views, 1, budget.k2, d.channels), data)?;
    Ok(PrunedOutput {
        input_dims: d,
        budget,
        tokens,
        refs,
        diagnostics,
    })
}

fn check_ring(x: &TokenTensor, cfg: &PruneConfig) -> Result<()> {
    let views = x.dims().views;
    if cfg.ring.len() != views {
        return Err(Error::Config(format!(
            "ring lists {} views but the tensor has {views}",
            cfg.ring.len()
        )));
    }
    if views == 1 && !cfg.allow_single_view {
        return Err(Error::Config(
            "single-view input requires single-view mode".into(),
        ));
    }
    Ok(())
}

pub fn st_prune(x: &TokenTensor, cfg: &PruneConfig) -> Result<PrunedOutput> {
    st_prune_timed(x, cfg).map(|(out, _)| out)
}

pub fn st_prune_timed(x: &TokenTensor, cfg: &PruneConfig) -> Result<(PrunedOutput, StageTimings)> {
    check_ring(x, cfg)?;
    let budget = cfg.budget(x.dims())?;
    match (cfg.method, cfg.order) {
        (Method::Vanilla, _) => vanilla_two_stage(x, budget),
        (Method::StPrune, Order::TemporalFirst) => temporal_first(x, cfg, budget),
        (Method::StPrune, Order::SpatialFirst) => spatial_first(x, cfg, budget),
    }
}

fn temporal_first(x: &TokenTensor, cfg: &PruneConfig, budget: Budget) -> Result<(PrunedOutput, StageTimings)> {
    let d = x.dims();
    let params = cfg.temporal_params();
    let views: Vec<usize> = (0..d.views).collect();
    let mut clock = Clock::default();

    // Stage 1: per-view temporal selection T*P -> K1.
    let tscores: Vec<TemporalScoreMap> = Clock::time(&mut clock.score, || {
        views
            .par_iter()
            .map(|&v| mtp::temporal_score(x.view(v), d.frames, &params))
            .collect::<Result<_>>()
    })?;
    let seeds: Vec<usize> = Clock::time(&mut clock.seed, || {
        views
            .par_iter()
            .map(|&v| weighted_seed(x.view(v), Some(&tscores[v].values), cfg.lambda1))
            .collect::<Result<_>>()
    })?;
    let stage1: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        views
            .par_iter()
            .map(|&v| {
                let p = WeightedSelectParams::weighted(budget.k1, cfg.lambda1, &tscores[v].values);
                greedy_expand(x.view(v), seeds[v], &p)
            })
            .collect::<Result<_>>()
    })?;
    let x1: Vec<Vec<f32>> = Clock::time(&mut clock.assembly, || {
        views
            .iter()
            .map(|&v| gather(x.view(v), &stage1[v].indices))
            .collect()
    });
    let x1_rows: Vec<TokenRows> = x1
        .iter()
        .map(|buf| TokenRows::new(buf, d.channels))
        .collect::<Result<_>>()?;

    // Stage 2: ring-view spatial selection K1 -> K2.
    let sscores = Clock::time(&mut clock.score, || {
        rsp::spatial_score(&x1_rows, &cfg.ring, cfg.spatial_options())
    })?;
    let seeds2: Vec<usize> = Clock::time(&mut clock.seed, || {
        views
            .par_iter()
            .map(|&v| weighted_seed(x1_rows[v], Some(sscores.view_values(v)), cfg.lambda2))
            .collect::<Result<_>>()
    })?;
    let stage2: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        views
            .par_iter()
            .map(|&v| {
                let p = WeightedSelectParams::weighted(budget.k2, cfg.lambda2, sscores.view_values(v));
                greedy_expand(x1_rows[v], seeds2[v], &p)
            })
            .collect::<Result<_>>()
    })?;

    let start = Instant::now();
    let flat: Vec<Vec<usize>> = views
        .iter()
        .map(|&v| stage2[v].indices.iter().map(|&i| stage1[v].indices[i]).collect())
        .collect();
    let diagnostics = cfg.keep_diagnostics.then(|| StageDiagnostics {
        temporal_scores: tscores,
        spatial_scores: vec![sscores],
        intermediate: stage1.into_iter().map(|s| s.indices).collect(),
    });
    let out = assemble(x, budget, flat, diagnostics)?;
    clock.assembly += start.elapsed();
    Ok((out, clock.finish()))
}

fn spatial_first(x: &TokenTensor, cfg: &PruneConfig, budget: Budget) -> Result<(PrunedOutput, StageTimings)> {
    let d = x.dims();
    let params = cfg.temporal_params();
    let per_frame = cfg.per_frame_budget(d)?;
    let views: Vec<usize> = (0..d.views).collect();
    let frames: Vec<usize> = (0..d.frames).collect();
    let mut clock = Clock::default();

    // Stage 1: each frame pruned spatially across the ring, P -> per_frame.
    let tscores: Vec<TemporalScoreMap> = Clock::time(&mut clock.score, || {
        views
            .par_iter()
            .map(|&v| mtp::temporal_score(x.view(v), d.frames, &params))
            .collect::<Result<_>>()
    })?;
    let frame_rows = |t: usize| -> Vec<TokenRows<'_>> { views.iter().map(|&v| x.frame(v, t)).collect() };
    let sscores: Vec<SpatialScoreMap> = Clock::time(&mut clock.score, || {
        frames
            .par_iter()
            .map(|&t| rsp::spatial_score(&frame_rows(t), &cfg.ring, cfg.spatial_options()))
            .collect::<Result<_>>()
    })?;
    let jobs: Vec<(usize, usize)> = frames
        .iter()
        .flat_map(|&t| views.iter().map(move |&v| (t, v)))
        .collect();
    let seeds: Vec<usize> = Clock::time(&mut clock.seed, || {
        jobs.par_iter()
            .map(|&(t, v)| weighted_seed(x.frame(v, t), Some(sscores[t].view_values(v)), cfg.lambda2))
            .collect::<Result<_>>()
    })?;
    let stage1: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        jobs.par_iter()
            .zip(&seeds)
            .map(|(&(t, v), &seed)| {
                let p = WeightedSelectParams::weighted(per_frame, cfg.lambda2, sscores[t].view_values(v));
                greedy_expand(x.frame(v, t), seed, &p)
            })
            .collect::<Result<_>>()
    })?;

    // Survivors per view in flattened (frame, patch) order, with their temporal scores.
    let (survivors, x1, s1): (Vec<Vec<usize>>, Vec<Vec<f32>>, Vec<Vec<f64>>) =
        Clock::time(&mut clock.assembly, || {
            let mut survivors = vec![Vec::with_capacity(per_frame * d.frames); d.views];
            for (&(t, v), sel) in jobs.iter().zip(&stage1) {
                survivors[v].extend(sel.indices.iter().map(|&p| t * d.patches + p));
            }
            let x1 = views.iter().map(|&v| gather(x.view(v), &survivors[v])).collect();
            let s1 = views
                .iter()
                .map(|&v| survivors[v].iter().map(|&f| tscores[v].values[f]).collect())
                .collect();
            (survivors, x1, s1)
        });
    let x1_rows: Vec<TokenRows> = x1
        .iter()
        .map(|buf| TokenRows::new(buf, d.channels))
        .collect::<Result<_>>()?;

    // Stage 2: temporal selection over each view's survivors -> K2.
    let seeds2: Vec<usize> = Clock::time(&mut clock.seed, || {
        views
            .par_iter()
            .map(|&v| weighted_seed(x1_rows[v], Some(&s1[v]), cfg.lambda1))
            .collect::<Result<_>>()
    })?;
    let stage2: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        views
            .par_iter()
            .map(|&v| {
                let p = WeightedSelectParams::weighted(budget.k2, cfg.lambda1, &s1[v]);
                greedy_expand(x1_rows[v], seeds2[v], &p)
            })
            .collect::<Result<_>>()
    })?;

    let start = Instant::now();
    let flat: Vec<Vec<usize>> = views
        .iter()
        .map(|&v| stage2[v].indices.iter().map(|&i| survivors[v][i]).collect())
        .collect();
    let diagnostics = cfg.keep_diagnostics.then(|| StageDiagnostics {
        temporal_scores: tscores,
        spatial_scores: sscores,
        intermediate: survivors,
    });
    let out = assemble(x, budget, flat, diagnostics)?;
    clock.assembly += start.elapsed();
    Ok((out, clock.finish()))
}

/// Two rounds of plain max-min dispersion (`T*P -> K1 -> K2`), each seeded by mean similarity.
pub fn vanilla_two_stage(x: &TokenTensor, budget: Budget) -> Result<(PrunedOutput, StageTimings)> {
    let d = x.dims();
    let views: Vec<usize> = (0..d.views).collect();
    let mut clock = Clock::default();

    let seeds: Vec<usize> = Clock::time(&mut clock.seed, || {
        views
            .par_iter()
            .map(|&v| select::vanilla_seed(x.view(v)))
            .collect::<Result<_>>()
    })?;
    let stage1: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        views
            .par_iter()
            .map(|&v| greedy_expand(x.view(v), seeds[v], &WeightedSelectParams::vanilla(budget.k1)))
            .collect::<Result<_>>()
    })?;
    let x1: Vec<Vec<f32>> = Clock::time(&mut clock.assembly, || {
        views
            .iter()
            .map(|&v| gather(x.view(v), &stage1[v].indices))
            .collect()
    });
    let x1_rows: Vec<TokenRows> = x1
        .iter()
        .map(|buf| TokenRows::new(buf, d.channels))
        .collect::<Result<_>>()?;
    let seeds2: Vec<usize> = Clock::time(&mut clock.seed, || {
        views
            .par_iter()
            .map(|&v| select::vanilla_seed(x1_rows[v]))
            .collect::<Result<_>>()
    })?;
    let stage2: Vec<SelectionResult> = Clock::time(&mut clock.expand, || {
        views
            .par_iter()
            .map(|&v| greedy_expand(x1_rows[v], seeds2[v], &WeightedSelectParams::vanilla(budget.k2)))
            .collect::<Result<_>>()
    })?;

    let start = Instant::now();
    let flat: Vec<Vec<usize>> = views
        .iter()
        .map(|&v| stage2[v].indices.iter().map(|&i| stage1[v].indices[i]).collect())
        .collect();
    let out = assemble(x, budget, flat, None)?;
    clock.assembly += start.elapsed();
    Ok((out, clock.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        assert_eq!(budget_split(0.25, SplitPolicy::Balanced).unwrap(), (0.5, 0.5));
        let (a, b) = budget_split(0.1024, SplitPolicy::Balanced).unwrap();
        assert!((a - 0.32).abs() < 1e-15 && (b - 0.32).abs() < 1e-15);
        assert_eq!(budget_split(1.0, SplitPolicy::Balanced).unwrap(), (1.0, 1.0));
        assert_eq!(budget_split(0.25, SplitPolicy::Paper25).unwrap(), (0.50, 0.50));
        assert_eq!(budget_split(0.10, SplitPolicy::Paper10).unwrap(), (0.32, 0.32));
        assert_eq!(budget_split(0.1024, SplitPolicy::Paper10).unwrap(), (0.32, 0.32));
    }

    #[test]
    fn split_rejections() {
        let custom = |t, s| SplitPolicy::Custom { temporal: t, spatial: s };
        assert!(budget_split(0.25, custom(0.5, 0.4)).is_err());
        assert!(budget_split(0.25, custom(0.25, 1.0)).is_ok());
        assert!(budget_split(0.25, custom(1.25, 0.2)).is_err());
        assert!(budget_split(0.0, SplitPolicy::Balanced).is_err());
        assert!(budget_split(1.5, SplitPolicy::Balanced).is_err());
        assert!(budget_split(0.5, SplitPolicy::Paper25).is_err());
        assert!(budget_split(0.25, SplitPolicy::Paper10).is_err());
        assert!(budget_split(0.097, SplitPolicy::Paper10).is_err());
    }

    #[test]
    fn split_parsing() {
        assert_eq!(SplitPolicy::parse("balanced").unwrap(), SplitPolicy::Balanced);
        assert_eq!(SplitPolicy::parse("paper-10").unwrap(), SplitPolicy::Paper10);
        assert_eq!(
            SplitPolicy::parse(" 0.5, 0.25 ").unwrap(),
            SplitPolicy::Custom { temporal: 0.5, spatial: 0.25 }
        );
        assert!(SplitPolicy::parse("0.5").is_err());
        assert!(SplitPolicy::parse("a,b").is_err());
        assert_eq!("spatial-first".parse::<Order>().unwrap(), Order::SpatialFirst);
        assert!("sideways".parse::<Order>().is_err());
    }

    #[test]
    fn budget_rounding() {
        let cfg = PruneConfig::with_retention(0.25, SplitPolicy::Balanced).unwrap();
        assert_eq!(cfg.budget(Dims::new(6, 5, 64, 8)).unwrap(), Budget { k1: 160, k2: 80 });
        // 0.5 * 5 = 2.5 rounds up; 0.5 * 3 = 1.5 rounds up.
        assert_eq!(cfg.budget(Dims::new(2, 1, 5, 1)).unwrap(), Budget { k1: 3, k2: 2 });
        let tiny = PruneConfig::with_retention(0.01, SplitPolicy::Balanced).unwrap();
        assert_eq!(tiny.budget(Dims::new(2, 1, 3, 1)).unwrap(), Budget { k1: 1, k2: 1 });
    }

    #[test]
    fn per_frame_budget_covers_k2() {
        let cfg = PruneConfig::with_retention(0.25, SplitPolicy::Balanced).unwrap();
        for (t, p) in [(5, 64), (3, 7), (7, 3), (1, 9), (4, 1)] {
            let dims = Dims::new(2, t, p, 4);
            let b = cfg.budget(dims).unwrap();
            let per = cfg.per_frame_budget(dims).unwrap();
            assert!(per * t >= b.k2 && per <= p, "t={t} p={p}");
        }
    }
}
