//! Properties shared by the fuzz targets and the corpus replay test. Each
//! function must return normally on any input; a panic is a finding. The
//! return value says whether the input was accepted.

use stprune::bench::BenchGrid;
use stprune::cli::FileConfig;
use stprune::report::RefsDocument;
use stprune::suite::SuiteSpec;
use stprune::synth::{gen_scene, SceneLabels, SceneSpec};
use stprune::{budget_split, stt, SplitPolicy, ViewRing};

/// Scenes up to this many elements are generated, not just parsed.
const GEN_LIMIT: usize = 1 << 14;

pub fn stt_decode(data: &[u8]) -> bool {
    let Ok(t) = stt::decode(data) else { return false };
    assert_eq!(stt::encode(&t), data);
    true
}

pub fn labels_json(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(labels) = SceneLabels::from_json(text) else { return false };
    assert_eq!(SceneLabels::from_json(&labels.to_json()).unwrap(), labels);
    true
}

pub fn refs_json(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(doc) = RefsDocument::from_json(text) else { return false };
    doc.validate().unwrap();
    true
}

pub fn scene_toml(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(spec) = SceneSpec::from_toml(text) else { return false };
    if spec.dims().checked_len().is_some_and(|n| n <= GEN_LIMIT) {
        let (x, labels) = gen_scene(&spec).unwrap();
        assert_eq!(x.dims(), spec.dims());
        labels.validate().unwrap();
    }
    true
}

pub fn suite_toml(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(spec) = SuiteSpec::from_toml(text) else { return false };
    spec.config().unwrap();
    true
}

pub fn config_toml(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    FileConfig::from_toml(text).is_ok()
}

pub fn bench_grid(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(grid) = BenchGrid::from_toml(text) else { return false };
    assert!(!grid.cases.is_empty());
    true
}

pub fn ring_parse(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(ring) = ViewRing::parse(text) else { return false };
    assert!(!ring.is_empty());
    for v in 0..ring.len() {
        assert_eq!(ring.prev(ring.next(v)), v);
    }
    true
}

pub fn split_parse(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let Ok(policy) = SplitPolicy::parse(text) else { return false };
    for total in [0.1, 0.25, 1.0] {
        if let Ok((t, s)) = budget_split(total, policy) {
            assert!(t > 0.0 && t <= 1.0 && s > 0.0 && s <= 1.0);
        }
    }
    true
}

pub const TARGETS: [(&str, fn(&[u8]) -> bool); 9] = [
    ("stt_decode", stt_decode),
    ("labels_json", labels_json),
    ("refs_json", refs_json),
    ("scene_toml", scene_toml),
    ("suite_toml", suite_toml),
    ("config_toml", config_toml),
    ("bench_grid", bench_grid),
    ("ring_parse", ring_parse),
    ("split_parse", split_parse),
];
