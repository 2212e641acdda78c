//! Seed-then-expand max-min selection.
//!
//! One engine serves every stage. With no score map (or `lambda == 0`) the
//! expansion is plain greedy max-min dispersion under `d = 1 - cos`; with a
//! score map each candidate additionally pays `lambda * (1 - score)`.

use crate::error::{Error, Result};
use crate::tensor::{cosine_from_parts, dot, minmax_normalize, TokenRows};

#[derive(Debug, Clone, Copy)]
pub struct WeightedSelectParams<'a> {
    pub k: usize,
    pub lambda: f64,
    pub scores: Option<&'a [f64]>,
}

impl<'a> WeightedSelectParams<'a> {
    pub fn vanilla(k: usize) -> Self {
        WeightedSelectParams {
            k,
            lambda: 0.0,
            scores: None,
        }
    }

    pub fn weighted(k: usize, lambda: f64, scores: &'a [f64]) -> Self {
        WeightedSelectParams {
            k,
            lambda,
            scores: Some(scores),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::precondition(format!(
                "retention count k={} must be in [1, {n}]",
                self.k
            )));
        }
        validate_lambda(self.lambda)?;
        if let Some(scores) = self.scores {
            validate_scores(scores, n)?;
        }
        Ok(())
    }

    /// Per-candidate additive penalty, or `None` when the score term is inactive.
    fn penalty(&self) -> Option<Vec<f64>> {
        match self.scores {
            Some(s) if self.lambda != 0.0 => {
                Some(s.iter().map(|&v| self.lambda * (1.0 - v)).collect())
            }
            _ => None,
        }
    }
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::precondition(format!(
            "balancing coefficient must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn validate_scores(scores: &[f64], n: usize) -> Result<()> {
    if scores.len() != n {
        return Err(Error::Dimension {
            context: "score map",
            expected: n,
            actual: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::precondition(format!(
            "scores must lie in [0, 1], found {bad}"
        )));
    }
    Ok(())
}

/// Retained candidate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// Ascending, distinct.
    pub indices: Vec<usize>,
    /// The same indices in the order the greedy loop picked them.
    pub selection_trace: Vec<usize>,
}

impl SelectionResult {
    pub fn from_trace(selection_trace: Vec<usize>) -> Self {
        let mut indices = selection_trace.clone();
        indices.sort_unstable();
        SelectionResult {
            indices,
            selection_trace,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// The token with the highest mean cosine similarity to all other tokens.
pub fn vanilla_seed(tokens: TokenRows<'_>) -> Result<usize> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::precondition("seed selection over zero candidates"));
    }
    if n == 1 {
        return Ok(0);
    }
    // Each pair is evaluated once; row i still accumulates its terms in ascending j.
    let norms = tokens.norms();
    let mut sums = vec![0f64; n];
    for i in 0..n {
        let x = tokens.row(i);
        for j in i + 1..n {
            let s = cosine_from_parts(dot(x, tokens.row(j)), norms[i], norms[j]);
            sums[i] += s;
            sums[j] += s;
        }
    }
    let means = sums.into_iter().map(|s| s / (n - 1) as f64);
    Ok(argmax_lowest(means))
}

/// Argmax of `norm_hat(i) + lambda * scores(i)` where `norm_hat` is the
/// min-max normalized row norm. Scores are ignored when `lambda == 0`.
pub fn weighted_seed(tokens: TokenRows<'_>, scores: Option<&[f64]>, lambda: f64) -> Result<usize> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::precondition("seed selection over zero candidates"));
    }
    validate_lambda(lambda)?;
    if let Some(s) = scores {
        validate_scores(s, n)?;
    }
    let norm_hat = minmax_normalize(&tokens.norms())?;
    Ok(match scores {
        Some(s) if lambda != 0.0 => {
            argmax_lowest(norm_hat.iter().zip(s).map(|(h, v)| h + lambda * v))
        }
        _ => argmax_lowest(norm_hat.into_iter()),
    })
}

/// Grow `{seed}` to `params.k` members, each step taking the unselected
/// candidate with the smallest `max_{j in S} cos(x_i, x_j) + lambda * (1 - score_i)`.
///
/// The running max-similarity of every candidate is updated with a single
/// similarity row per step, so a call costs `O(k * N * C)`.
pub fn greedy_expand(
    tokens: TokenRows<'_>,
    seed: usize,
    params: &WeightedSelectParams<'_>,
) -> Result<SelectionResult> {
    let n = tokens.len();
    params.validate(n)?;
    if seed >= n {
        return Err(Error::precondition(format!(
            "seed {seed} out of range for {n} candidates"
        )));
    }
    let norms = tokens.norms();
    let penalty = params.penalty();

    let mut selected = vec![false; n];
    let mut best_sim = vec![f64::NEG_INFINITY; n];
    let mut trace = Vec::with_capacity(params.k);

    let mut newest = seed;
    selected[seed] = true;
    trace.push(seed);
    while trace.len() < params.k {
        let anchor = tokens.row(newest);
        let anchor_norm = norms[newest];
        let mut pick = usize::MAX;
        let mut pick_val = f64::INFINITY;
        for i in 0..n {
            if selected[i] {
                continue;
            }
            let s = cosine_from_parts(dot(tokens.row(i), anchor), norms[i], anchor_norm);
            if s > best_sim[i] {
                best_sim[i] = s;
            }
            let objective = match &penalty {
                Some(p) => best_sim[i] + p[i],
                None => best_sim[i],
            };
            if objective < pick_val {
                pick = i;
                pick_val = objective;
            }
        }
        debug_assert!(pick < n);
        selected[pick] = true;
        trace.push(pick);
        newest = pick;
    }
    Ok(SelectionResult::from_trace(trace))
}

/// Pure greedy max-min dispersion seeded by [`vanilla_seed`].
pub fn select_vanilla(tokens: TokenRows<'_>, k: usize) -> Result<SelectionResult> {
    let seed = vanilla_seed(tokens)?;
    greedy_expand(tokens, seed, &WeightedSelectParams::vanilla(k))
}

/// [`weighted_seed`] followed by [`greedy_expand`] with the same score map.
pub fn select_weighted(
    tokens: TokenRows<'_>,
    k: usize,
    lambda: f64,
    scores: Option<&[f64]>,
) -> Result<SelectionResult> {
    let seed = weighted_seed(tokens, scores, lambda)?;
    let params = WeightedSelectParams { k, lambda, scores };
    greedy_expand(tokens, seed, &params)
}

/// Smallest pairwise `1 - cos` within `subset`.
pub fn objective_value(tokens: TokenRows<'_>, subset: &[usize]) -> Result<f64> {
    if subset.len() < 2 {
        return Err(Error::precondition(
            "dispersion objective needs at least two members",
        ));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= tokens.len()) {
        return Err(Error::precondition(format!("index {bad} out of range")));
    }
    let mut min_d = f64::INFINITY;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            let d = 1.0 - crate::tensor::cosine_sim(tokens.row(i), tokens.row(j))?;
            if d < min_d {
                min_d = d;
            }
        }
    }
    Ok(min_d)
}
