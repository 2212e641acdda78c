//! Training-free spatio-temporal pruning of multi-view, multi-frame visual tokens.
//!
//! A `V x T x P x C` token volume is reduced to `V x K2 x C` in two stages that
//! share one max-min selection engine: motion-aware temporal pruning per view
//! (`T*P -> K1`), then ring-view spatial pruning across adjacent cameras
//! (`K1 -> K2`). Every retained token is a bit-exact copy of an input token.

pub mod bench;
pub mod cli;
pub mod error;
pub mod mtp;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod rsp;
pub mod select;
pub mod stt;
pub mod suite;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use mtp::{mtp_prune, temporal_score, TemporalScoreMap, TemporalScoreParams};
pub use pipeline::{budget_split, st_prune, Method, Order, PruneConfig, PrunedOutput, SplitPolicy};
pub use rsp::{rsp_prune, spatial_score, SpatialOptions, SpatialScoreMap, ViewRing};
pub use select::{greedy_expand, vanilla_seed, weighted_seed, SelectionResult, WeightedSelectParams};
pub use stt::{load_stt, save_stt};
pub use tensor::{cosine_sim, l2_norm, max_sim_to_set, minmax_normalize, Dims, TokenRef, TokenRows, TokenTensor};
