//! Ground truth for tests.
//!
//! `exact_maxmin` solves max-min dispersion by enumerating every subset. The
//! `naive_*` functions are deliberately literal: they recompute every
//! similarity from scratch at every step and share no caching or scoring code
//! with the optimized stages, only the scalar primitives of [`crate::tensor`].

use itertools::Itertools;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtp::TemporalScoreParams;
use crate::pipeline::{Budget, PruneConfig};
use crate::rsp::ViewRing;
use crate::select::{self, SelectionResult};
use crate::synth;
use crate::tensor::{cosine_sim, l2_norm, minmax_normalize, Dims, TokenRows, TokenTensor};

pub const MAX_ORACLE_N: usize = 16;
pub const MAX_ORACLE_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub k: usize,
    pub optimal_objective: f64,
    pub optimal_subset: Vec<usize>,
    pub greedy_subset: Vec<usize>,
    pub greedy_objective: f64,
    /// `greedy / optimal`, or 1 when the optimum is 0.
    pub ratio: f64,
}

fn min_pairwise(dist: &[Vec<f64>], subset: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            best = best.min(dist[i][j]);
        }
    }
    best
}

/// Exhaustive max-min dispersion under `d = 1 - cos`, compared with the vanilla greedy.
pub fn exact_maxmin(tokens: TokenRows<'_>, k: usize) -> Result<OracleReport> {
    let n = tokens.len();
    if n > MAX_ORACLE_N || k > MAX_ORACLE_K {
        return Err(Error::OracleScale {
            n,
            k,
            max_n: MAX_ORACLE_N,
            max_k: MAX_ORACLE_K,
        });
    }
    if k < 2 || k > n {
        return Err(Error::precondition(format!(
            "oracle needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut dist = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i][j] = 1.0 - cosine_sim(tokens.row(i), tokens.row(j))?;
            }
        }
    }
    // Combinations arrive in lexicographic order, so strict improvement keeps the smallest tie.
    let mut optimal_subset = Vec::new();
    let mut optimal_objective = f64::NEG_INFINITY;
    for subset in (0..n).combinations(k) {
        let obj = min_pairwise(&dist, &subset);
        if obj > optimal_objective {
            optimal_objective = obj;
            optimal_subset = subset;
        }
    }
    let greedy = select::select_vanilla(tokens, k)?;
    let greedy_objective = min_pairwise(&dist, &greedy.indices);
    let ratio = if optimal_objective == 0.0 {
        1.0
    } else {
        greedy_objective / optimal_objective
    };
    Ok(OracleReport {
        n,
        k,
        optimal_objective,
        optimal_subset,
        greedy_subset: greedy.indices,
        greedy_objective,
        ratio,
    })
}

fn naive_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Literal seed-then-expand: every step recomputes `max_{j in S} sim(x_i, x_j)`.
pub fn naive_seed_expand(tokens: TokenRows<'_>, k: usize, lambda: f64, scores: &[f64]) -> Result<SelectionResult> {
    let n = tokens.len();
    if k == 0 || k > n {
        return Err(Error::precondition(format!("k={k} must be in [1, {n}]")));
    }
    let norms: Vec<f64> = (0..n).map(|i| l2_norm(tokens.row(i))).collect();
    let norm_hat = minmax_normalize(&norms)?;
    let seed_obj: Vec<f64> = if lambda != 0.0 {
        (0..n).map(|i| norm_hat[i] + lambda * scores[i]).collect()
    } else {
        norm_hat
    };
    let mut chosen = vec![naive_argmax(&seed_obj)];
    while chosen.len() < k {
        let mut pick = None;
        let mut pick_val = f64::INFINITY;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let mut worst = f64::NEG_INFINITY;
            for &j in &chosen {
                let s = cosine_sim(tokens.row(i), tokens.row(j))?;
                if s > worst {
                    worst = s;
                }
            }
            let obj = if lambda != 0.0 {
                worst + lambda * (1.0 - scores[i])
            } else {
                worst
            };
            if obj < pick_val {
                pick_val = obj;
                pick = Some(i);
            }
        }
        chosen.push(pick.expect("unselected candidate exists"));
    }
    Ok(SelectionResult::from_trace(chosen))
}

/// Temporal scores by direct transliteration over a `T x P` grid.
pub fn naive_temporal_scores(view_tokens: TokenRows<'_>, frames: usize, alpha: f64) -> Result<Vec<f64>> {
    let n = view_tokens.len();
    if frames == 0 || !n.is_multiple_of(frames) {
        return Err(Error::precondition("token count is not a multiple of frames"));
    }
    let patches = n / frames;
    let c = view_tokens.dim();
    let mut motion = vec![0f64; n];
    let mut recency = vec![0f64; n];
    for t in 0..frames {
        for p in 0..patches {
            let mut dist = 0f64;
            for ch in 0..c {
                let mut sum = 0f64;
                for u in 0..frames {
                    sum += view_tokens.row(u * patches + p)[ch] as f64;
                }
                let mean = sum / frames as f64;
                let e = view_tokens.row(t * patches + p)[ch] as f64 - mean;
                dist += e * e;
            }
            motion[t * patches + p] = dist;
            recency[t * patches + p] = (alpha * (t + 1) as f64 / frames as f64).exp();
        }
    }
    let motion = minmax_normalize(&motion)?;
    let recency = minmax_normalize(&recency)?;
    let combined: Vec<f64> = (0..n).map(|i| motion[i] + recency[i]).collect();
    minmax_normalize(&combined)
}

pub fn naive_mtp_reference(
    view_tokens: TokenRows<'_>,
    frames: usize,
    k1: usize,
    params: &TemporalScoreParams,
) -> Result<SelectionResult> {
    let scores = naive_temporal_scores(view_tokens, frames, params.alpha)?;
    naive_seed_expand(view_tokens, k1, params.lambda1, &scores)
}

/// Raw bilateral scores, computed with a full double loop per token and neighbour.
pub fn naive_spatial_raw(views: &[TokenRows<'_>], ring: &ViewRing) -> Result<Vec<Vec<f64>>> {
    let n_views = views.len();
    if n_views != ring.len() {
        return Err(Error::precondition("ring size differs from view count"));
    }
    let mut raw = Vec::with_capacity(n_views);
    for v in 0..n_views {
        let next = views[(v + 1) % n_views];
        let prev = views[(v + n_views - 1) % n_views];
        let mut row = Vec::with_capacity(views[v].len());
        for i in 0..views[v].len() {
            let x = views[v].row(i);
            let mut best_next = f64::NEG_INFINITY;
            for j in 0..next.len() {
                best_next = best_next.max(cosine_sim(x, next.row(j))?);
            }
            let mut best_prev = f64::NEG_INFINITY;
            for j in 0..prev.len() {
                best_prev = best_prev.max(cosine_sim(x, prev.row(j))?);
            }
            row.push(1.0 - 0.5 * (best_next + best_prev));
        }
        raw.push(row);
    }
    Ok(raw)
}

pub fn naive_rsp_reference(
    views: &[TokenRows<'_>],
    k2: usize,
    lambda2: f64,
    ring: &ViewRing,
) -> Result<Vec<SelectionResult>> {
    let raw = naive_spatial_raw(views, ring)?;
    views
        .iter()
        .zip(&raw)
        .map(|(rows, r)| naive_seed_expand(*rows, k2, lambda2, &minmax_normalize(r)?))
        .collect()
}

/// Literal two-stage max-min with the mean-similarity seed.
pub fn naive_vanilla_select(tokens: TokenRows<'_>, k: usize) -> Result<SelectionResult> {
    let n = tokens.len();
    if k == 0 || k > n {
        return Err(Error::precondition(format!("k={k} must be in [1, {n}]")));
    }
    let mut mean_sim = vec![0f64; n];
    if n > 1 {
        for (i, m) in mean_sim.iter_mut().enumerate() {
            let mut total = 0f64;
            for j in 0..n {
                if j != i {
                    total += cosine_sim(tokens.row(i), tokens.row(j))?;
                }
            }
            *m = total / (n - 1) as f64;
        }
    }
    let mut chosen = vec![naive_argmax(&mean_sim)];
    while chosen.len() < k {
        let mut pick = None;
        let mut pick_val = f64::INFINITY;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let mut worst = f64::NEG_INFINITY;
            for &j in &chosen {
                worst = worst.max(cosine_sim(tokens.row(i), tokens.row(j))?);
            }
            if worst < pick_val {
                pick_val = worst;
                pick = Some(i);
            }
        }
        chosen.push(pick.expect("unselected candidate exists"));
    }
    Ok(SelectionResult::from_trace(chosen))
}

/// Temporal-first pipeline built from the naive stage references; per-view flat indices.
pub fn naive_st_prune(x: &TokenTensor, cfg: &PruneConfig) -> Result<Vec<Vec<usize>>> {
    let d = x.dims();
    let budget = cfg.budget(d)?;
    let params = cfg.temporal_params();
    let mut stage1 = Vec::with_capacity(d.views);
    let mut x1 = Vec::with_capacity(d.views);
    for v in 0..d.views {
        let sel = naive_mtp_reference(x.view(v), d.frames, budget.k1, &params)?;
        let mut buf = Vec::new();
        for &i in &sel.indices {
            buf.extend_from_slice(x.view(v).row(i));
        }
        stage1.push(sel.indices);
        x1.push(buf);
    }
    let rows: Vec<TokenRows> = x1
        .iter()
        .map(|b| TokenRows::new(b, d.channels))
        .collect::<Result<_>>()?;
    let stage2 = naive_rsp_reference(&rows, budget.k2, cfg.lambda2, &cfg.ring)?;
    Ok(stage2
        .iter()
        .zip(&stage1)
        .map(|(s2, s1)| s2.indices.iter().map(|&i| s1[i]).collect())
        .collect())
}

/// Two rounds of [`naive_vanilla_select`]; per-view flat indices.
pub fn naive_vanilla_two_stage(x: &TokenTensor, budget: Budget) -> Result<Vec<Vec<usize>>> {
    let d = x.dims();
    let mut out = Vec::with_capacity(d.views);
    for v in 0..d.views {
        let s1 = naive_vanilla_select(x.view(v), budget.k1)?;
        let mut buf = Vec::new();
        for &i in &s1.indices {
            buf.extend_from_slice(x.view(v).row(i));
        }
        let s2 = naive_vanilla_select(TokenRows::new(&buf, d.channels)?, budget.k2)?;
        out.push(s2.indices.iter().map(|&i| s1.indices[i]).collect());
    }
    Ok(out)
}

/// Settings for the capped exhaustive comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckParams {
    pub instances: usize,
    pub max_n: usize,
    pub max_k: usize,
    pub seed: u64,
}

impl Default for OracleCheckParams {
    fn default() -> Self {
        OracleCheckParams {
            instances: 200,
            max_n: 14,
            max_k: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckSummary {
    pub params: OracleCheckParams,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    /// Instances where the greedy objective exceeded the optimum; must be 0.
    pub greedy_above_optimal: usize,
    pub reports: Vec<OracleReport>,
}

/// Instance `i`: `n` in `[4, max_n]`, `k` in `[2, min(max_k, n)]`, `C` in `[2, 8]`,
/// standard-normal tokens, all drawn from `ChaCha8Rng::seed_from_u64(seed + i)`.
pub fn oracle_instance(params: &OracleCheckParams, i: usize) -> Result<(TokenTensor, usize)> {
    if params.max_n < 4 || params.max_n > MAX_ORACLE_N || params.max_k < 2 || params.max_k > MAX_ORACLE_K {
        return Err(Error::OracleScale {
            n: params.max_n,
            k: params.max_k,
            max_n: MAX_ORACLE_N,
            max_k: MAX_ORACLE_K,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(i as u64));
    let n = 4 + (rng.next_u64() % (params.max_n as u64 - 3)) as usize;
    let k = 2 + (rng.next_u64() % (params.max_k.min(n) as u64 - 1)) as usize;
    let c = 2 + (rng.next_u64() % 7) as usize;
    let data = (0..n * c).map(|_| synth::standard_normal(&mut rng) as f32).collect();
    Ok((TokenTensor::new(Dims::new(1, 1, n, c), data)?, k))
}

pub fn oracle_check(params: &OracleCheckParams) -> Result<OracleCheckSummary> {
    if params.instances == 0 {
        return Err(Error::precondition("oracle check needs at least one instance"));
    }
    let mut reports = Vec::with_capacity(params.instances);
    for i in 0..params.instances {
        let (x, k) = oracle_instance(params, i)?;
        reports.push(exact_maxmin(x.view(0), k)?);
    }
    let min_ratio = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let mean_ratio = reports.iter().map(|r| r.ratio).sum::<f64>() / reports.len() as f64;
    let greedy_above_optimal = reports
        .iter()
        .filter(|r| r.greedy_objective > r.optimal_objective)
        .count();
    Ok(OracleCheckSummary {
        params: *params,
        min_ratio,
        mean_ratio,
        greedy_above_optimal,
        reports,
    })
}
