//! Wall-clock benchmarks: per-stage timing grids, complexity scaling probes and
//! the stage-ordering comparison.
//!
//! Every measurement discards one warm-up run and reports the median of the
//! remaining repeats, timed with the monotonic clock.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtp::{mtp_prune, TemporalScoreParams};
use crate::pipeline::{st_prune_timed, Order, PruneConfig, SplitPolicy, StageTimings};
use crate::rsp::{neighbor_max_similarity, ViewRing};
use crate::synth;
use crate::tensor::{Dims, TokenRows, TokenTensor};

pub const MIN_REPEATS: usize = 5;

/// Median wall time of `repeats` runs after one discarded warm-up.
pub fn median_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<Duration> {
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed());
    }
    times.sort_unstable();
    Ok(times[times.len() / 2])
}

/// Median wall times of two workloads timed alternately, so slow phases of a
/// shared machine land on both sides of a ratio.
pub fn paired_median_times<A, B>(
    repeats: usize,
    mut a: impl FnMut() -> Result<A>,
    mut b: impl FnMut() -> Result<B>,
) -> Result<(Duration, Duration)> {
    a()?;
    b()?;
    let mut ta = Vec::with_capacity(repeats);
    let mut tb = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(a()?);
        ta.push(start.elapsed());
        let start = Instant::now();
        std::hint::black_box(b()?);
        tb.push(start.elapsed());
    }
    ta.sort_unstable();
    tb.sort_unstable();
    Ok((ta[ta.len() / 2], tb[tb.len() / 2]))
}

/// i.i.d. standard-normal tokens.
pub fn random_tensor(dims: Dims, seed: u64) -> Result<TokenTensor> {
    let len = dims
        .checked_len()
        .ok_or_else(|| Error::precondition("dimensions overflow"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..len).map(|_| synth::standard_normal(&mut rng) as f32).collect();
    TokenTensor::new(dims, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub small: usize,
    pub large: usize,
    pub small_us: u64,
    pub large_us: u64,
    pub ratio: f64,
}

fn probe(small: usize, large: usize, a: Duration, b: Duration) -> ScalingProbe {
    ScalingProbe {
        small,
        large,
        small_us: a.as_micros() as u64,
        large_us: b.as_micros() as u64,
        ratio: b.as_secs_f64() / a.as_secs_f64().max(1e-9),
    }
}

/// Temporal stage time for `frames * patches` candidates versus twice as many
/// patches, at a fixed `k1`.
pub fn mtp_scaling(frames: usize, patches: usize, channels: usize, k1: usize, repeats: usize) -> Result<ScalingProbe> {
    let params = TemporalScoreParams::default();
    let small = random_tensor(Dims::new(1, frames, patches, channels), 11)?;
    let large = random_tensor(Dims::new(1, frames, 2 * patches, channels), 11)?;
    let (a, b) = paired_median_times(
        repeats,
        || mtp_prune(small.view(0), frames, k1, &params),
        || mtp_prune(large.view(0), frames, k1, &params),
    )?;
    Ok(probe(frames * patches, 2 * frames * patches, a, b))
}

/// Bilateral similarity precompute time for `m` tokens per view versus `2m`.
pub fn rsp_precompute_scaling(views: usize, m: usize, channels: usize, repeats: usize) -> Result<ScalingProbe> {
    let ring = ViewRing::numbered(views)?;
    let small = random_tensor(Dims::new(views, 1, m, channels), 13)?;
    let large = random_tensor(Dims::new(views, 1, 2 * m, channels), 13)?;
    let small_rows: Vec<TokenRows> = (0..views).map(|v| small.view(v)).collect();
    let large_rows: Vec<TokenRows> = (0..views).map(|v| large.view(v)).collect();
    let (a, b) = paired_median_times(
        repeats,
        || neighbor_max_similarity(&small_rows, &ring),
        || neighbor_max_similarity(&large_rows, &ring),
    )?;
    Ok(probe(m, 2 * m, a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingResult {
    pub dims: Dims,
    pub retention: f64,
    pub temporal_first_us: u64,
    pub spatial_first_us: u64,
    pub temporal_first_tokens: usize,
    pub spatial_first_tokens: usize,
}

/// End-to-end time of both stage orders on one random tensor.
pub fn ordering_ablation(dims: Dims, retention: f64, repeats: usize) -> Result<OrderingResult> {
    let x = random_tensor(dims, 17)?;
    let mut cfg = PruneConfig::with_retention(retention, SplitPolicy::Balanced)?;
    cfg.ring = if dims.views == 6 {
        ViewRing::nuscenes()
    } else {
        ViewRing::numbered(dims.views)?
    };
    let tf_cfg = PruneConfig { order: Order::TemporalFirst, ..cfg.clone() };
    let sf_cfg = PruneConfig { order: Order::SpatialFirst, ..cfg };
    let tf_tokens = st_prune_timed(&x, &tf_cfg)?.0.token_count();
    let sf_tokens = st_prune_timed(&x, &sf_cfg)?.0.token_count();
    let (tf, sf) = paired_median_times(repeats, || st_prune_timed(&x, &tf_cfg), || st_prune_timed(&x, &sf_cfg))?;
    Ok(OrderingResult {
        dims,
        retention,
        temporal_first_us: tf.as_micros() as u64,
        spatial_first_us: sf.as_micros() as u64,
        temporal_first_tokens: tf_tokens,
        spatial_first_tokens: sf_tokens,
    })
}

/// One row of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCase {
    pub views: usize,
    pub frames: usize,
    pub patches: usize,
    pub channels: usize,
    pub retention: f64,
    #[serde(default)]
    pub order: Order,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: BenchCase,
    pub k1: usize,
    pub k2: usize,
    /// Per-phase medians across repeats.
    pub median: StageTimings,
    pub median_total_us: u64,
}

fn median_u64(mut xs: Vec<u64>) -> u64 {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

pub fn run_case(case: &BenchCase, repeats: usize) -> Result<BenchRow> {
    let dims = Dims::new(case.views, case.frames, case.patches, case.channels);
    let x = random_tensor(dims, 23)?;
    let mut cfg = PruneConfig::with_retention(case.retention, SplitPolicy::Balanced)?;
    cfg.order = case.order;
    cfg.ring = ViewRing::numbered(case.views)?;
    cfg.allow_single_view = case.views == 1;
    let budget = cfg.budget(dims)?;
    st_prune_timed(&x, &cfg)?;
    let mut runs = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        runs.push(st_prune_timed(&x, &cfg)?.1);
    }
    let pick = |f: fn(&StageTimings) -> u64| median_u64(runs.iter().map(f).collect());
    Ok(BenchRow {
        case: case.clone(),
        k1: budget.k1,
        k2: budget.k2,
        median: StageTimings {
            score_us: pick(|t| t.score_us),
            seed_us: pick(|t| t.seed_us),
            expand_us: pick(|t| t.expand_us),
            assembly_us: pick(|t| t.assembly_us),
        },
        median_total_us: pick(StageTimings::total_us),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    #[serde(rename = "case")]
    pub cases: Vec<BenchCase>,
}

impl BenchGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: BenchGrid =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        if grid.cases.is_empty() {
            return Err(Error::Config("bench grid has no cases".into()));
        }
        for c in &grid.cases {
            if c.views == 0 || c.frames == 0 || c.patches == 0 || c.channels == 0 {
                return Err(Error::Config(format!("bench case has a zero dimension: {c:?}")));
            }
        }
        Ok(grid)
    }

    /// Doubles `T*P`, `V` and `C` around a small base case, in both orders.
    pub fn default_grid() -> Self {
        let base = BenchCase {
            views: 6,
            frames: 4,
            patches: 64,
            channels: 64,
            retention: 0.25,
            order: Order::TemporalFirst,
        };
        let mut cases = vec![
            base.clone(),
            BenchCase { patches: 128, ..base.clone() },
            BenchCase { frames: 8, ..base.clone() },
            BenchCase { views: 3, ..base.clone() },
            BenchCase { channels: 128, ..base.clone() },
            BenchCase { retention: 0.1024, ..base.clone() },
        ];
        let spatial: Vec<BenchCase> = cases
            .iter()
            .map(|c| BenchCase { order: Order::SpatialFirst, ..c.clone() })
            .collect();
        cases.extend(spatial);
        BenchGrid { cases }
    }
}
