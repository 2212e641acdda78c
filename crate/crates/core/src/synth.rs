//! Synthetic labelled scenes and retention metrics.
//!
//! Scenes mimic the redundancy structure of surround-camera video: per-patch
//! static background with small frame-to-frame noise, moving objects whose
//! tokens random-walk across frames, landmarks that only appear in the newest
//! frame, and newest-frame objects seen by two ring-adjacent cameras at once.
//!
//! Generation is fully determined by the seed. Randomness comes from
//! ChaCha8 (`rand_chacha`, seeded with `seed_from_u64`); normals use the
//! cosine branch of Box-Muller on two successive `f64` draws, and index draws
//! use `next_u64() % n`. The draw order is:
//!
//! 1. per view, a Fisher-Yates shuffle of patch slots (`i = P-1..1`, swap with
//!    `next_u64() % (i+1)`); slots are then dealt to dynamic, landmark and
//!    duplicate roles in that order;
//! 2. per view and patch, a background base vector;
//! 3. per view, frame and patch, a noise vector;
//! 4. per view and dynamic patch, one step vector per frame after the first;
//! 5. per view and landmark patch, one appearance vector;
//! 6. per adjacent pair `(v, next(v))` in ring order, one object vector per duplicate.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Dims, TokenRef, TokenTensor};

pub const LABELS_SCHEMA_VERSION: u32 = 1;
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64/box-muller-cos/mod-index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub views: usize,
    pub frames: usize,
    pub patches: usize,
    pub channels: usize,
    #[serde(default)]
    pub n_dynamic: usize,
    #[serde(default)]
    pub n_landmark: usize,
    #[serde(default)]
    pub n_duplicate: usize,
    pub background_sigma: f64,
    pub feature_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn dims(&self) -> Dims {
        Dims::new(self.views, self.frames, self.patches, self.channels)
    }

    /// Number of ring-adjacent view pairs that receive duplicates.
    pub fn adjacent_pairs(&self) -> usize {
        match self.views {
            0 | 1 => 0,
            2 => 1,
            v => v,
        }
    }

    /// Patch slots per view consumed by duplicates.
    fn duplicate_slots(&self) -> usize {
        match self.views {
            0 | 1 => 0,
            2 => self.n_duplicate,
            _ => 2 * self.n_duplicate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if d.views == 0 || d.frames == 0 || d.patches == 0 || d.channels == 0 {
            return Err(Error::Spec("all dimensions must be >= 1".into()));
        }
        if d.checked_len().is_none_or(|n| n > (1 << 31)) {
            return Err(Error::Spec("scene too large".into()));
        }
        let planted = self.n_dynamic + self.n_landmark + self.duplicate_slots();
        if planted > self.patches {
            return Err(Error::Spec(format!(
                "planted patches per view ({planted}) exceed P={}",
                self.patches
            )));
        }
        if self.n_duplicate > 0 && self.views < 2 {
            return Err(Error::Spec("duplicates need at least two views".into()));
        }
        for (name, x) in [
            ("background_sigma", self.background_sigma),
            ("feature_scale", self.feature_scale),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Spec(format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec =
            toml::from_str(text).map_err(|e| Error::Spec(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Background,
    Dynamic,
    Landmark,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkEnd {
    pub view: usize,
    pub flat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateLink {
    pub a: LinkEnd,
    pub b: LinkEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngIdentity {
    pub algorithm: String,
    pub seed: u64,
}

/// Ground truth for a generated scene; serialized as the `.labels.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneLabels {
    pub schema_version: u32,
    pub dims: Dims,
    /// One role per token in flattened `(v, t, p)` order.
    pub roles: Vec<Role>,
    pub duplicate_links: Vec<DuplicateLink>,
    pub spec: SceneSpec,
    pub rng: RngIdentity,
}

impl SceneLabels {
    pub fn role(&self, view: usize, flat: usize) -> Role {
        self.roles[view * self.dims.tokens_per_view() + flat]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("labels serialize")
    }

    /// Parse and check internal consistency.
    pub fn from_json(text: &str) -> Result<Self> {
        let labels: SceneLabels =
            serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != LABELS_SCHEMA_VERSION {
            return Err(Error::Document(format!(
                "unsupported labels schema version {}",
                self.schema_version
            )));
        }
        let d = self.dims;
        let expected = d
            .frames
            .checked_mul(d.patches)
            .and_then(|per_view| per_view.checked_mul(d.views))
            .ok_or_else(|| Error::Document("labels dims overflow".into()))?;
        if self.roles.len() != expected {
            return Err(Error::Document(format!(
                "labels carry {} roles, dims imply {expected}",
                self.roles.len()
            )));
        }
        let per_view = d.tokens_per_view();
        for link in &self.duplicate_links {
            for end in [link.a, link.b] {
                if end.view >= d.views || end.flat >= per_view {
                    return Err(Error::Document(format!("dangling duplicate link {link:?}")));
                }
                if self.role(end.view, end.flat) != Role::Duplicate {
                    return Err(Error::Document(format!(
                        "duplicate link endpoint {end:?} is not tagged duplicate"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One standard-normal draw (cosine branch of Box-Muller).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
}

fn normal_vec(rng: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    (0..c).map(|_| standard_normal(rng)).collect()
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        slots.swap(i, j);
    }
    slots
}

/// Patch slots dealt to each role in one view.
struct ViewPlan {
    dynamic: Vec<usize>,
    landmark: Vec<usize>,
    free: Vec<usize>,
}

pub fn gen_scene(spec: &SceneSpec) -> Result<(TokenTensor, SceneLabels)> {
    spec.validate()?;
    let d = spec.dims();
    let (nv, nt, np, nc) = (d.views, d.frames, d.patches, d.channels);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let plans: Vec<ViewPlan> = (0..nv)
        .map(|_| {
            let slots = shuffled(&mut rng, np);
            let (dynamic, rest) = slots.split_at(spec.n_dynamic);
            let (landmark, free) = rest.split_at(spec.n_landmark);
            ViewPlan {
                dynamic: dynamic.to_vec(),
                landmark: landmark.to_vec(),
                free: free.to_vec(),
            }
        })
        .collect();

    let base: Vec<Vec<Vec<f64>>> = (0..nv)
        .map(|_| (0..np).map(|_| normal_vec(&mut rng, nc)).collect())
        .collect();

    // tokens[v][t][p] in f64 until the final cast.
    let mut tokens: Vec<Vec<Vec<Vec<f64>>>> = vec![vec![vec![Vec::new(); np]; nt]; nv];
    for v in 0..nv {
        for t in 0..nt {
            for p in 0..np {
                let noise = normal_vec(&mut rng, nc);
                tokens[v][t][p] = base[v][p]
                    .iter()
                    .zip(&noise)
                    .map(|(b, e)| b + spec.background_sigma * e)
                    .collect();
            }
        }
    }

    let mut roles = vec![Role::Background; nv * nt * np];
    let role_idx = |v: usize, t: usize, p: usize| (v * nt + t) * np + p;

    for (v, plan) in plans.iter().enumerate() {
        for &p in &plan.dynamic {
            let mut offset = vec![0f64; nc];
            for t in 0..nt {
                if t > 0 {
                    for (o, s) in offset.iter_mut().zip(normal_vec(&mut rng, nc)) {
                        *o += spec.feature_scale * s;
                    }
                }
                for (x, o) in tokens[v][t][p].iter_mut().zip(&offset) {
                    *x += o;
                }
                roles[role_idx(v, t, p)] = Role::Dynamic;
            }
        }
    }

    let last = nt - 1;
    for (v, plan) in plans.iter().enumerate() {
        for &p in &plan.landmark {
            let appearance = normal_vec(&mut rng, nc);
            tokens[v][last][p] = base[v][p]
                .iter()
                .zip(&appearance)
                .map(|(b, a)| b + spec.feature_scale * a)
                .collect();
            roles[role_idx(v, last, p)] = Role::Landmark;
        }
    }

    let mut links = Vec::new();
    let mut cursor = vec![0usize; nv];
    for v in 0..spec.adjacent_pairs() {
        let w = (v + 1) % nv;
        for _ in 0..spec.n_duplicate {
            let src = plans[v].free[cursor[v]];
            cursor[v] += 1;
            let dst = plans[w].free[cursor[w]];
            cursor[w] += 1;
            let object = normal_vec(&mut rng, nc);
            let token: Vec<f64> = base[v][src]
                .iter()
                .zip(&object)
                .map(|(b, o)| b + spec.feature_scale * o)
                .collect();
            tokens[w][last][dst] = token.clone();
            tokens[v][last][src] = token;
            roles[role_idx(v, last, src)] = Role::Duplicate;
            roles[role_idx(w, last, dst)] = Role::Duplicate;
            links.push(DuplicateLink {
                a: LinkEnd {
                    view: v,
                    flat: last * np + src,
                },
                b: LinkEnd {
                    view: w,
                    flat: last * np + dst,
                },
            });
        }
    }

    let mut data = Vec::with_capacity(nv * nt * np * nc);
    for view in &tokens {
        for frame in view {
            for tok in frame {
                data.extend(tok.iter().map(|&x| x as f32));
            }
        }
    }
    let tensor = TokenTensor::new(d, data)?;
    let labels = SceneLabels {
        schema_version: LABELS_SCHEMA_VERSION,
        dims: d,
        roles,
        duplicate_links: links,
        spec: spec.clone(),
        rng: RngIdentity {
            algorithm: RNG_ALGORITHM.to_string(),
            seed: spec.seed,
        },
    };
    Ok((tensor, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionMetrics {
    pub dynamic_recall: f64,
    pub landmark_recall: f64,
    pub duplicate_elimination_rate: f64,
    pub current_frame_fraction: f64,
}

fn ratio_or_one(hit: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Score a set of retained tokens against scene ground truth.
pub fn eval_retention(refs: &[Vec<TokenRef>], labels: &SceneLabels) -> Result<RetentionMetrics> {
    let d = labels.dims;
    if refs.len() != d.views {
        return Err(Error::Consistency(format!(
            "refs cover {} views, labels {}",
            refs.len(),
            d.views
        )));
    }
    let per_view = d.tokens_per_view();
    let mut kept: HashSet<(usize, usize)> = HashSet::new();
    for (v, row) in refs.iter().enumerate() {
        for r in row {
            if r.view != v || r.flat >= per_view || r.frame >= d.frames || r.patch >= d.patches {
                return Err(Error::Consistency(format!("dangling token ref {r:?}")));
            }
            if r.flat != r.frame * d.patches + r.patch {
                return Err(Error::Consistency(format!("inconsistent token ref {r:?}")));
            }
            kept.insert((v, r.flat));
        }
    }
    let mut planted = [0usize; 2];
    let mut hit = [0usize; 2];
    for v in 0..d.views {
        for f in 0..per_view {
            let slot = match labels.role(v, f) {
                Role::Dynamic => 0,
                Role::Landmark => 1,
                _ => continue,
            };
            planted[slot] += 1;
            if kept.contains(&(v, f)) {
                hit[slot] += 1;
            }
        }
    }
    let both = labels
        .duplicate_links
        .iter()
        .filter(|l| kept.contains(&(l.a.view, l.a.flat)) && kept.contains(&(l.b.view, l.b.flat)))
        .count();
    let last = d.frames - 1;
    let current = kept.iter().filter(|(_, f)| f / d.patches == last).count();
    Ok(RetentionMetrics {
        dynamic_recall: ratio_or_one(hit[0], planted[0]),
        landmark_recall: ratio_or_one(hit[1], planted[1]),
        duplicate_elimination_rate: 1.0 - ratio_or_one(both, labels.duplicate_links.len()),
        current_frame_fraction: if kept.is_empty() {
            0.0
        } else {
            current as f64 / kept.len() as f64
        },
    })
}

/// Sum of per-channel variances over frames for one patch of one view.
pub fn temporal_variance(x: &TokenTensor, v: usize, p: usize) -> f64 {
    let d = x.dims();
    let mut total = 0.0;
    for c in 0..d.channels {
        let vals: Vec<f64> = (0..d.frames).map(|t| x.token(v, t, p)[c] as f64).collect();
        let mean = vals.iter().sum::<f64>() / d.frames as f64;
        total += vals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / d.frames as f64;
    }
    total
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<SceneLabels> {
    SceneLabels::from_json(&std::fs::read_to_string(path)?)
}

/// `scene.stt` -> `scene.labels.json`.
pub fn labels_path(stt_path: &Path) -> std::path::PathBuf {
    stt_path.with_extension("labels.json")
}
