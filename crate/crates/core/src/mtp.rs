//! Motion-aware temporal pruning.
//!
//! Each view's `T x P` token grid is flattened frame-major and scored by how
//! far a token drifts from its patch's temporal mean plus an exponential
//! recency bias; the score then steers the shared max-min engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::{greedy_expand, weighted_seed, SelectionResult, WeightedSelectParams};
use crate::tensor::{minmax_normalize, TokenRows};

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_LAMBDA1: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalScoreParams {
    pub alpha: f64,
    pub lambda1: f64,
}

impl Default for TemporalScoreParams {
    fn default() -> Self {
        TemporalScoreParams {
            alpha: DEFAULT_ALPHA,
            lambda1: DEFAULT_LAMBDA1,
        }
    }
}

impl TemporalScoreParams {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::precondition("alpha must be finite"));
        }
        if !self.lambda1.is_finite() || self.lambda1 < 0.0 {
            return Err(Error::precondition("lambda1 must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Temporal importance of every token of one view, flattened `t * P + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalScoreMap {
    pub frames: usize,
    pub patches: usize,
    pub values: Vec<f64>,
    pub motion_term: Vec<f64>,
    pub recency_term: Vec<f64>,
}

impl TemporalScoreMap {
    pub fn at(&self, frame: usize, patch: usize) -> f64 {
        self.values[frame * self.patches + patch]
    }
}

fn check_grid(view_tokens: TokenRows<'_>, frames: usize) -> Result<usize> {
    let n = view_tokens.len();
    if frames == 0 || n == 0 || !n.is_multiple_of(frames) {
        return Err(Error::precondition(format!(
            "{n} tokens do not form a grid of {frames} frames"
        )));
    }
    Ok(n / frames)
}

/// Squared distance of each token to its patch's mean over all frames.
pub fn motion_raw(view_tokens: TokenRows<'_>, frames: usize) -> Result<Vec<f64>> {
    let patches = check_grid(view_tokens, frames)?;
    let c = view_tokens.dim();
    let mut mean = vec![0f64; patches * c];
    for t in 0..frames {
        for p in 0..patches {
            let row = view_tokens.row(t * patches + p);
            for (m, &x) in mean[p * c..(p + 1) * c].iter_mut().zip(row) {
                *m += x as f64;
            }
        }
    }
    for m in &mut mean {
        *m /= frames as f64;
    }
    let mut out = Vec::with_capacity(frames * patches);
    for t in 0..frames {
        for p in 0..patches {
            let row = view_tokens.row(t * patches + p);
            let d: f64 = row
                .iter()
                .zip(&mean[p * c..(p + 1) * c])
                .map(|(&x, &m)| {
                    let e = x as f64 - m;
                    e * e
                })
                .sum();
            out.push(d);
        }
    }
    Ok(out)
}

/// `exp(alpha * (t + 1) / T)` for zero-based frame `t`, so the newest frame gets `exp(alpha)`.
pub fn recency_raw(frame: usize, frames: usize, alpha: f64) -> f64 {
    (alpha * (frame + 1) as f64 / frames as f64).exp()
}

/// Score every token of a `T x P` view grid.
///
/// Both terms are min-max normalized over all `T * P` tokens and their sum
/// is normalized again so the result stays in `[0, 1]`.
pub fn temporal_score(
    view_tokens: TokenRows<'_>,
    frames: usize,
    params: &TemporalScoreParams,
) -> Result<TemporalScoreMap> {
    params.validate()?;
    let patches = check_grid(view_tokens, frames)?;
    let motion_term = minmax_normalize(&motion_raw(view_tokens, frames)?)?;
    let recency: Vec<f64> = (0..frames * patches)
        .map(|i| recency_raw(i / patches, frames, params.alpha))
        .collect();
    let recency_term = minmax_normalize(&recency)?;
    let sum: Vec<f64> = motion_term
        .iter()
        .zip(&recency_term)
        .map(|(m, r)| m + r)
        .collect();
    let values = minmax_normalize(&sum)?;
    Ok(TemporalScoreMap {
        frames,
        patches,
        values,
        motion_term,
        recency_term,
    })
}

/// Keep `k1` of the view's `T * P` tokens; indices are flattened `t * P + p`, ascending.
pub fn mtp_prune(
    view_tokens: TokenRows<'_>,
    frames: usize,
    k1: usize,
    params: &TemporalScoreParams,
) -> Result<SelectionResult> {
    let n = view_tokens.len();
    if k1 == 0 || k1 > n {
        return Err(Error::precondition(format!(
            "temporal budget k1={k1} must be in [1, {n}]"
        )));
    }
    let scores = temporal_score(view_tokens, frames, params)?;
    select_with_scores(view_tokens, k1, params.lambda1, &scores.values)
}

/// Seed and expand over an arbitrary candidate set with precomputed temporal scores.
pub(crate) fn select_with_scores(
    candidates: TokenRows<'_>,
    k: usize,
    lambda1: f64,
    scores: &[f64],
) -> Result<SelectionResult> {
    let seed = weighted_seed(candidates, Some(scores), lambda1)?;
    greedy_expand(
        candidates,
        seed,
        &WeightedSelectParams::weighted(k, lambda1, scores),
    )
}
