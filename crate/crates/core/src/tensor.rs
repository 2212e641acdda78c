//! Token tensor storage and the similarity primitives every pruning stage shares.
//!
//! Token data is stored as `f32`; all reductions accumulate in `f64` with a fixed
//! lane order so that results are reproducible bit-for-bit and `dot(x, y)` is
//! exactly equal to `dot(y, x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vectors whose Euclidean norm falls below this are treated as zero vectors.
pub const EPS_NORM: f64 = 1e-12;

/// Shape of a `V x T x P x C` token volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub views: usize,
    pub frames: usize,
    pub patches: usize,
    pub channels: usize,
}

impl Dims {
    pub fn new(views: usize, frames: usize, patches: usize, channels: usize) -> Self {
        Dims {
            views,
            frames,
            patches,
            channels,
        }
    }

    /// Tokens per view (`T * P`).
    pub fn tokens_per_view(&self) -> usize {
        self.frames * self.patches
    }

    /// Total element count, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        self.views
            .checked_mul(self.frames)?
            .checked_mul(self.patches)?
            .checked_mul(self.channels)
    }

    fn validate(&self) -> Result<usize> {
        if self.views == 0 || self.frames == 0 || self.patches == 0 || self.channels == 0 {
            return Err(Error::precondition(format!(
                "every dimension must be >= 1, got {self:?}"
            )));
        }
        self.checked_len()
            .ok_or_else(|| Error::precondition(format!("dimensions overflow: {self:?}")))
    }
}

/// Immutable `V x T x P x C` volume of finite `f32` values in `(v, t, p, c)` row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTensor {
    dims: Dims,
    data: Vec<f32>,
}

impl TokenTensor {
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self> {
        let len = dims.validate()?;
        if data.len() != len {
            return Err(Error::Dimension {
                context: "token tensor data",
                expected: len,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(TokenTensor { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// All `T * P` tokens of one view, flattened frame-major.
    pub fn view(&self, v: usize) -> TokenRows<'_> {
        let stride = self.dims.tokens_per_view() * self.dims.channels;
        TokenRows {
            data: &self.data[v * stride..(v + 1) * stride],
            dim: self.dims.channels,
        }
    }

    /// The `P` tokens of one frame of one view.
    pub fn frame(&self, v: usize, t: usize) -> TokenRows<'_> {
        let d = self.dims;
        let start = ((v * d.frames) + t) * d.patches * d.channels;
        TokenRows {
            data: &self.data[start..start + d.patches * d.channels],
            dim: d.channels,
        }
    }

    pub fn token(&self, v: usize, t: usize, p: usize) -> &[f32] {
        let d = self.dims;
        let start = (((v * d.frames) + t) * d.patches + p) * d.channels;
        &self.data[start..start + d.channels]
    }
}

/// Location of a token inside a [`TokenTensor`]; `flat` is the per-view index `frame * P + patch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenRef {
    pub view: usize,
    pub frame: usize,
    pub patch: usize,
    pub flat: usize,
}

impl TokenRef {
    pub fn new(view: usize, frame: usize, patch: usize, patches: usize) -> Self {
        TokenRef {
            view,
            frame,
            patch,
            flat: frame * patches + patch,
        }
    }

    pub fn from_flat(view: usize, flat: usize, patches: usize) -> Self {
        TokenRef {
            view,
            frame: flat / patches,
            patch: flat % patches,
            flat,
        }
    }
}

/// Borrowed row-major `N x C` matrix of candidate tokens.
#[derive(Debug, Clone, Copy)]
pub struct TokenRows<'a> {
    data: &'a [f32],
    dim: usize,
}

impl<'a> TokenRows<'a> {
    pub fn new(data: &'a [f32], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::precondition("channel dimension must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                context: "token rows",
                expected: (data.len() / dim + 1) * dim,
                actual: data.len(),
            });
        }
        Ok(TokenRows { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &'a [f32]> + 'a {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &'a [f32] {
        self.data
    }

    /// Euclidean norm of every row.
    pub fn norms(&self) -> Vec<f64> {
        self.iter().map(l2_norm).collect()
    }
}

/// Dot product accumulated in `f64` over four fixed lanes.
///
/// Callers must pass equal-length slices.
#[inline]
pub fn dot(x: &[f32], y: &[f32]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0f64; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let (xt, yt) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        acc[0] += a[0] as f64 * b[0] as f64;
        acc[1] += a[1] as f64 * b[1] as f64;
        acc[2] += a[2] as f64 * b[2] as f64;
        acc[3] += a[3] as f64 * b[3] as f64;
    }
    for (a, b) in xt.iter().zip(yt) {
        acc[0] += *a as f64 * *b as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

pub fn l2_norm(x: &[f32]) -> f64 {
    dot(x, x).sqrt()
}

/// Cosine similarity from a precomputed dot product and norms.
#[inline]
pub fn cosine_from_parts(dot: f64, norm_x: f64, norm_y: f64) -> f64 {
    if norm_x < EPS_NORM || norm_y < EPS_NORM {
        0.0
    } else {
        dot / (norm_x * norm_y)
    }
}

/// Cosine similarity; zero when either vector is (numerically) zero.
pub fn cosine_sim(x: &[f32], y: &[f32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "cosine similarity",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::precondition("cosine similarity of empty vectors"));
    }
    Ok(cosine_from_parts(dot(x, y), l2_norm(x), l2_norm(y)))
}

/// Affine map onto `[0, 1]`; a constant input maps to all `0.5`.
pub fn minmax_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Dimension {
            context: "min-max normalization",
            expected: 1,
            actual: 0,
        });
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let range = hi - lo;
    if range > 0.0 {
        Ok(scores.iter().map(|&s| ((s - lo) / range).clamp(0.0, 1.0)).collect())
    } else {
        Ok(vec![0.5; scores.len()])
    }
}

/// Largest cosine similarity between `x` and any member of `set`.
pub fn max_sim_to_set(x: &[f32], set: &[&[f32]]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::precondition("max similarity against an empty set"));
    }
    let mut best = f64::NEG_INFINITY;
    for member in set {
        let s = cosine_sim(x, member)?;
        if s > best {
            best = s;
        }
    }
    Ok(best)
}
