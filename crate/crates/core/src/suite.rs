//! Fixed-seed synthetic retention suite: ST-Prune against the vanilla two-stage baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::pipeline::{self, Method, PruneConfig, SplitPolicy};
use crate::synth::{eval_retention, gen_scene, RetentionMetrics, SceneLabels, SceneSpec};
use crate::tensor::TokenRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    /// Scene template; its `seed` is replaced by each suite seed.
    pub scene: SceneSpec,
    pub seeds: Vec<u64>,
    pub retention: f64,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "balanced".into()
}

impl SuiteSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SuiteSpec =
            toml::from_str(text).map_err(|e| Error::Spec(e.message().to_string()))?;
        spec.scene.validate()?;
        if spec.seeds.is_empty() {
            return Err(Error::Spec("suite needs at least one seed".into()));
        }
        spec.config()?;
        Ok(spec)
    }

    pub fn config(&self) -> Result<PruneConfig> {
        let mut cfg = PruneConfig::with_retention(self.retention, SplitPolicy::parse(&self.split)?)?;
        cfg.ring = crate::rsp::ViewRing::numbered(self.scene.views)?;
        cfg.allow_single_view = self.scene.views == 1;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Optimized,
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub st_prune: RetentionMetrics,
    pub vanilla: RetentionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub engine: Engine,
    pub per_seed: Vec<SeedMetrics>,
    pub mean_st_prune: RetentionMetrics,
    pub mean_vanilla: RetentionMetrics,
    pub dynamic_recall_margin: f64,
    pub duplicate_elimination_margin: f64,
}

fn mean(ms: impl Iterator<Item = RetentionMetrics>) -> RetentionMetrics {
    let mut acc = [0f64; 4];
    let mut n = 0usize;
    for m in ms {
        acc[0] += m.dynamic_recall;
        acc[1] += m.landmark_recall;
        acc[2] += m.duplicate_elimination_rate;
        acc[3] += m.current_frame_fraction;
        n += 1;
    }
    let n = n.max(1) as f64;
    RetentionMetrics {
        dynamic_recall: acc[0] / n,
        landmark_recall: acc[1] / n,
        duplicate_elimination_rate: acc[2] / n,
        current_frame_fraction: acc[3] / n,
    }
}

fn to_refs(flat: Vec<Vec<usize>>, patches: usize) -> Vec<Vec<TokenRef>> {
    flat.into_iter()
        .enumerate()
        .map(|(v, idx)| idx.into_iter().map(|f| TokenRef::from_flat(v, f, patches)).collect())
        .collect()
}

fn run_seed(spec: &SuiteSpec, cfg: &PruneConfig, seed: u64, engine: Engine) -> Result<(RetentionMetrics, RetentionMetrics)> {
    let scene = SceneSpec {
        seed,
        ..spec.scene.clone()
    };
    let (x, labels): (_, SceneLabels) = gen_scene(&scene)?;
    let d = x.dims();
    let (ours, base) = match engine {
        Engine::Optimized => {
            let ours = pipeline::st_prune(&x, cfg)?.refs;
            let vcfg = PruneConfig {
                method: Method::Vanilla,
                ..cfg.clone()
            };
            (ours, pipeline::st_prune(&x, &vcfg)?.refs)
        }
        Engine::Naive => {
            let budget = cfg.budget(d)?;
            (
                to_refs(oracle::naive_st_prune(&x, cfg)?, d.patches),
                to_refs(oracle::naive_vanilla_two_stage(&x, budget)?, d.patches),
            )
        }
    };
    Ok((eval_retention(&ours, &labels)?, eval_retention(&base, &labels)?))
}

pub fn run_suite(spec: &SuiteSpec, engine: Engine) -> Result<SuiteReport> {
    let cfg = spec.config()?;
    let per_seed: Vec<SeedMetrics> = spec
        .seeds
        .iter()
        .map(|&seed| {
            let (st_prune, vanilla) = run_seed(spec, &cfg, seed, engine)?;
            Ok(SeedMetrics {
                seed,
                st_prune,
                vanilla,
            })
        })
        .collect::<Result<_>>()?;
    let mean_st_prune = mean(per_seed.iter().map(|s| s.st_prune));
    let mean_vanilla = mean(per_seed.iter().map(|s| s.vanilla));
    Ok(SuiteReport {
        engine,
        dynamic_recall_margin: mean_st_prune.dynamic_recall - mean_vanilla.dynamic_recall,
        duplicate_elimination_margin: mean_st_prune.duplicate_elimination_rate
            - mean_vanilla.duplicate_elimination_rate,
        per_seed,
        mean_st_prune,
        mean_vanilla,
    })
}
