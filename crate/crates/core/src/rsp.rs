//! Ring-view spatial pruning.
//!
//! Views form a cycle; a token that closely matches content in both ring
//! neighbours receives a low spatial score and is penalized during the
//! per-view max-min selection. Cross-view similarity is only consulted while
//! scoring; selection itself never looks outside its own view.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::{greedy_expand, weighted_seed, SelectionResult, WeightedSelectParams};
use crate::tensor::{cosine_from_parts, dot, minmax_normalize, TokenRows};

pub const DEFAULT_LAMBDA2: f64 = 0.8;
pub const NUSCENES_RING_NAME: &str = "nuscenes-ring";
pub const NUSCENES_RING: [&str; 6] = [
    "Front_Left",
    "Front",
    "Front_Right",
    "Back_Right",
    "Back",
    "Back_Left",
];

/// Cyclic camera order. Position `v` in the ring is view `v` of the token tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRing {
    labels: Vec<String>,
}

impl ViewRing {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Config("ring needs at least one view".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::Config(format!("ring label {i} is empty")));
            }
            if labels[..i].contains(l) {
                return Err(Error::Config(format!("duplicate ring label {l:?}")));
            }
        }
        Ok(ViewRing { labels })
    }

    pub fn nuscenes() -> Self {
        ViewRing {
            labels: NUSCENES_RING.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Generic `view0, view1, ...` ring of the given size.
    pub fn numbered(views: usize) -> Result<Self> {
        ViewRing::new((0..views).map(|v| format!("view{v}")))
    }

    /// Accepts `nuscenes-ring` or a comma-separated label list.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == NUSCENES_RING_NAME {
            return Ok(Self::nuscenes());
        }
        ViewRing::new(text.split(',').map(str::trim))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn next(&self, v: usize) -> usize {
        (v + 1) % self.labels.len()
    }

    pub fn prev(&self, v: usize) -> usize {
        (v + self.labels.len() - 1) % self.labels.len()
    }

    /// Same views traversed in the opposite direction, anchored at view 0.
    pub fn reversed(&self) -> Self {
        let n = self.labels.len();
        ViewRing {
            labels: (0..n).map(|i| self.labels[(n - i) % n].clone()).collect(),
        }
    }
}

impl fmt::Display for ViewRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join(","))
    }
}

impl Default for ViewRing {
    fn default() -> Self {
        Self::nuscenes()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialOptions {
    /// Permit single-view rings; every raw score is then 1.
    pub allow_single_view: bool,
}

/// Per-token maximum similarity to each ring neighbour, flattened `v * M + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMax {
    pub per_view: usize,
    pub next: Vec<f64>,
    pub prev: Vec<f64>,
}

/// Bilateral cross-view redundancy scores, flattened `v * M + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialScoreMap {
    pub views: usize,
    pub per_view: usize,
    /// `1 - (max sim to next + max sim to prev) / 2`, in `[0, 2]`.
    pub raw: Vec<f64>,
    /// `raw` min-max normalized within each view.
    pub values: Vec<f64>,
}

impl SpatialScoreMap {
    pub fn view_values(&self, v: usize) -> &[f64] {
        &self.values[v * self.per_view..(v + 1) * self.per_view]
    }

    pub fn view_raw(&self, v: usize) -> &[f64] {
        &self.raw[v * self.per_view..(v + 1) * self.per_view]
    }
}

fn check_views(views: &[TokenRows<'_>], ring: &ViewRing) -> Result<usize> {
    if views.len() != ring.len() {
        return Err(Error::Dimension {
            context: "ring size vs view count",
            expected: ring.len(),
            actual: views.len(),
        });
    }
    let m = views[0].len();
    let c = views[0].dim();
    if m == 0 {
        return Err(Error::precondition("views must hold at least one token"));
    }
    for v in views {
        if v.len() != m {
            return Err(Error::Dimension {
                context: "tokens per view",
                expected: m,
                actual: v.len(),
            });
        }
        if v.dim() != c {
            return Err(Error::Dimension {
                context: "channel dimension",
                expected: c,
                actual: v.dim(),
            });
        }
    }
    Ok(m)
}

/// Row and column maxima of the similarity block between `a` and `b`.
fn block_maxima(a: TokenRows<'_>, a_norms: &[f64], b: TokenRows<'_>, b_norms: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut row_max = vec![f64::NEG_INFINITY; a.len()];
    let mut col_max = vec![f64::NEG_INFINITY; b.len()];
    for (i, x) in a.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for (j, y) in b.iter().enumerate() {
            let s = cosine_from_parts(dot(x, y), a_norms[i], b_norms[j]);
            if s > best {
                best = s;
            }
            if s > col_max[j] {
                col_max[j] = s;
            }
        }
        row_max[i] = best;
    }
    (row_max, col_max)
}

/// One similarity block per adjacent pair `(v, next(v))`; the block's row
/// maxima feed `v`'s next-term and its column maxima feed `next(v)`'s prev-term.
pub fn neighbor_max_similarity(views: &[TokenRows<'_>], ring: &ViewRing) -> Result<NeighborMax> {
    let m = check_views(views, ring)?;
    let n_views = views.len();
    if n_views < 2 {
        return Err(Error::DegenerateRing { views: n_views });
    }
    let norms: Vec<Vec<f64>> = views.iter().map(|v| v.norms()).collect();
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_views)
        .into_par_iter()
        .map(|v| {
            let w = ring.next(v);
            block_maxima(views[v], &norms[v], views[w], &norms[w])
        })
        .collect();
    let mut next = vec![0f64; n_views * m];
    let mut prev = vec![0f64; n_views * m];
    for (v, (row_max, col_max)) in blocks.into_iter().enumerate() {
        let w = ring.next(v);
        next[v * m..(v + 1) * m].copy_from_slice(&row_max);
        prev[w * m..(w + 1) * m].copy_from_slice(&col_max);
    }
    Ok(NeighborMax {
        per_view: m,
        next,
        prev,
    })
}

/// Turn neighbour maxima into raw and per-view normalized spatial scores.
pub fn scores_from_neighbors(nm: &NeighborMax) -> Result<SpatialScoreMap> {
    let m = nm.per_view;
    let raw: Vec<f64> = nm
        .next
        .iter()
        .zip(&nm.prev)
        .map(|(a, b)| 1.0 - 0.5 * (a + b))
        .collect();
    let views = raw.len() / m;
    let mut values = Vec::with_capacity(raw.len());
    for v in 0..views {
        values.extend(minmax_normalize(&raw[v * m..(v + 1) * m])?);
    }
    Ok(SpatialScoreMap {
        views,
        per_view: m,
        raw,
        values,
    })
}

pub fn spatial_score(
    views: &[TokenRows<'_>],
    ring: &ViewRing,
    opts: SpatialOptions,
) -> Result<SpatialScoreMap> {
    let m = check_views(views, ring)?;
    if views.len() == 1 {
        if !opts.allow_single_view {
            return Err(Error::DegenerateRing { views: 1 });
        }
        return Ok(SpatialScoreMap {
            views: 1,
            per_view: m,
            raw: vec![1.0; m],
            values: vec![0.5; m],
        });
    }
    scores_from_neighbors(&neighbor_max_similarity(views, ring)?)
}

/// Per-view seed-then-expand over precomputed spatial scores.
pub fn select_views(
    views: &[TokenRows<'_>],
    scores: &SpatialScoreMap,
    k2: usize,
    lambda2: f64,
) -> Result<Vec<SelectionResult>> {
    views
        .par_iter()
        .enumerate()
        .map(|(v, rows)| {
            let s = scores.view_values(v);
            let seed = weighted_seed(*rows, Some(s), lambda2)?;
            greedy_expand(*rows, seed, &WeightedSelectParams::weighted(k2, lambda2, s))
        })
        .collect()
}

/// Keep `k2` tokens in every view; results come back in ring order.
pub fn rsp_prune(
    views: &[TokenRows<'_>],
    k2: usize,
    lambda2: f64,
    ring: &ViewRing,
    opts: SpatialOptions,
) -> Result<Vec<SelectionResult>> {
    let m = check_views(views, ring)?;
    if k2 == 0 || k2 > m {
        return Err(Error::precondition(format!(
            "spatial budget k2={k2} must be in [1, {m}]"
        )));
    }
    let scores = spatial_score(views, ring, opts)?;
    select_views(views, &scores, k2, lambda2)
}
