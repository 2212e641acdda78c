use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stprune::report::{RefsDocument, RunReport, SuiteDocument};
use stprune::stt::load_stt;

const BIN: &str = env!("CARGO_BIN_EXE_stprune");
const MANIFEST: &str = env!("CARGO_MANIFEST_DIR");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("STPRUNE_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn schema_check(schema: &str, doc: &Value) {
    let path = Path::new(MANIFEST).join("schemas").join(schema);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SCENE: &str = "views = 3\nframes = 4\npatches = 12\nchannels = 8\nn_dynamic = 2\nn_landmark = 1\nn_duplicate = 1\nbackground_sigma = 0.05\nfeature_scale = 1.0\nseed = 5\n";

struct Scene {
    _dir: tempfile::TempDir,
    root: PathBuf,
    stt: PathBuf,
    labels: PathBuf,
}

fn small_scene() -> Scene {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let spec = root.join("scene.toml");
    fs::write(&spec, SMALL_SCENE).unwrap();
    let stt = root.join("scene.stt");
    ok(&["gen", s(&spec), s(&stt)]);
    Scene {
        labels: root.join("scene.labels.json"),
        _dir: dir,
        root,
        stt,
    }
}

#[test]
fn gen_writes_loadable_tensor_and_valid_labels() {
    let sc = small_scene();
    let x = load_stt(&sc.stt).unwrap();
    assert_eq!(x.dims(), stprune::Dims::new(3, 4, 12, 8));
    schema_check("labels.schema.json", &json(&sc.labels));
    let again = sc.root.join("again.stt");
    ok(&["gen", s(&sc.root.join("scene.toml")), s(&again)]);
    assert_eq!(fs::read(&sc.stt).unwrap(), fs::read(&again).unwrap());
    assert_eq!(fs::read(&sc.labels).unwrap(), fs::read(sc.root.join("again.labels.json")).unwrap());
}

#[test]
fn gen_rejects_overplanted_spec_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, SMALL_SCENE.replace("n_dynamic = 2", "n_dynamic = 12")).unwrap();
    let out = run(&["gen", s(&spec), s(&dir.path().join("x.stt"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceed"));
    assert!(!dir.path().join("x.stt").exists());
    let out = run(&["gen", s(&dir.path().join("missing.toml")), s(&dir.path().join("x.stt"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn prune_budget_examples() {
    let sc = small_scene();
    let out = sc.root.join("full.stt");
    ok(&["prune", s(&sc.stt), s(&out), "--retention", "1.0", "--ring", "a,b,c"]);
    assert_eq!(load_stt(&out).unwrap().data().len(), load_stt(&sc.stt).unwrap().data().len());

    let out = sc.root.join("quarter.stt");
    let report = sc.root.join("quarter.json");
    ok(&["prune", s(&sc.stt), s(&out), "--retention", "0.25", "--split", "0.5,0.5", "--ring", "a,b,c", "--report", s(&report)]);
    // T*P = 48 -> K1 = 24 -> K2 = 12
    let y = load_stt(&out).unwrap();
    assert_eq!(y.dims(), stprune::Dims::new(3, 1, 12, 8));
    let r = RunReport::from_json(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.counts.first_stage_per_view, r.counts.output_per_view, r.counts.output_total), (24, 12, 36));
    assert_eq!(r.config.ring, ["a", "b", "c"]);
    assert_eq!(r.tool_version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn prune_outputs_match_schemas_and_reports_are_stable() {
    let sc = small_scene();
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = sc.root.join(format!("p{i}.stt"));
        let report = sc.root.join(format!("p{i}.json"));
        ok(&["prune", s(&sc.stt), s(&out), "--ring", "a,b,c", "--labels", s(&sc.labels), "--report", s(&report)]);
        let doc = json(&report);
        schema_check("run_report.schema.json", &doc);
        let refs = json(&sc.root.join(format!("p{i}.refs.json")));
        schema_check("refs.schema.json", &refs);
        RefsDocument::from_json(&refs.to_string()).unwrap();
        assert!(doc["metrics"].is_object());
        reports.push(fs::read_to_string(&report).unwrap());
    }
    let strip = |text: &str| -> String {
        text.lines().filter(|l| !l.contains("\"score\"") && !l.contains("\"seed\"") && !l.contains("\"expand\"") && !l.contains("\"assembly\"") && !l.contains("\"total\"")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&reports[0]), strip(&reports[1]));
    assert_eq!(fs::read(sc.root.join("p0.stt")).unwrap(), fs::read(sc.root.join("p1.stt")).unwrap());
    assert_eq!(fs::read(sc.root.join("p0.refs.json")).unwrap(), fs::read(sc.root.join("p1.refs.json")).unwrap());
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let sc = small_scene();
    let cfg = sc.root.join("cfg.toml");
    fs::write(&cfg, "retention = 0.5\norder = \"spatial-first\"\nlambda2 = 0.3\nring = \"x,y,z\"\n").unwrap();
    let report = sc.root.join("r.json");
    ok(&["prune", s(&sc.stt), s(&sc.root.join("o.stt")), "--config", s(&cfg), "--retention", "0.25", "--report", s(&report)]);
    let r = RunReport::from_json(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.config.retention, 0.25);
    assert_eq!(r.config.order, "spatial-first");
    assert_eq!(r.config.lambda2, 0.3);
    assert_eq!(r.config.lambda1, 0.6);
    assert_eq!(r.config.alpha, 2.0);
    assert_eq!(r.config.ring, ["x", "y", "z"]);

    fs::write(&cfg, "retention = 0.5\nshiny = true\n").unwrap();
    assert_eq!(code(&run(&["prune", s(&sc.stt), s(&sc.root.join("o.stt")), "--config", s(&cfg)])), 2);
}

#[test]
fn exit_codes() {
    let sc = small_scene();
    let o = sc.root.join("o.stt");
    // Default ring has six views; the scene has three.
    assert_eq!(code(&run(&["prune", s(&sc.stt), s(&o)])), 2);
    assert_eq!(code(&run(&["prune", s(&sc.root.join("nope.stt")), s(&o), "--ring", "a,b,c"])), 3);
    let corrupt = sc.root.join("corrupt.stt");
    fs::write(&corrupt, b"XXXX0000").unwrap();
    assert_eq!(code(&run(&["prune", s(&corrupt), s(&o), "--ring", "a,b,c"])), 2);
    assert_eq!(code(&run(&["prune", s(&sc.stt), s(&o), "--ring", "a,b,c", "--order", "sideways"])), 2);
    assert_eq!(code(&run(&["prune", s(&sc.stt), s(&o), "--bogus"])), 2);
    assert_eq!(code(&run(&["prune", s(&sc.stt), s(&sc.root.join("no/such/dir/o.stt")), "--ring", "a,b,c"])), 3);
    let bad_threads = Command::new(BIN)
        .args(["prune", s(&sc.stt), s(&o), "--ring", "a,b,c"])
        .env("STPRUNE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 2);
    let one_thread = Command::new(BIN)
        .args(["prune", s(&sc.stt), s(&o), "--ring", "a,b,c"])
        .env("STPRUNE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&one_thread), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn eval_on_identity_pruning_recalls_everything() {
    let sc = small_scene();
    let out = sc.root.join("all.stt");
    ok(&["prune", s(&sc.stt), s(&out), "--retention", "1", "--ring", "a,b,c"]);
    let metrics = sc.root.join("m.json");
    ok(&["eval", s(&sc.root.join("all.refs.json")), s(&sc.labels), "--out", s(&metrics)]);
    let doc = json(&metrics);
    schema_check("metrics.schema.json", &doc);
    assert_eq!(doc["metrics"]["dynamic_recall"], 1.0);
    assert_eq!(doc["metrics"]["landmark_recall"], 1.0);
    assert_eq!(doc["retained_tokens"], 3 * 48);

    let stdout = ok(&["eval", s(&sc.root.join("all.refs.json")), s(&sc.labels)]);
    assert_eq!(stdout.stdout, fs::read(&metrics).unwrap());
}

#[test]
fn scores_export_as_single_view_tensors() {
    let sc = small_scene();
    let dir = sc.root.join("scores");
    ok(&["prune", s(&sc.stt), s(&sc.root.join("o.stt")), "--ring", "a,b,c", "--scores-dir", s(&dir)]);
    let t = load_stt(dir.join("temporal_view0.stt")).unwrap();
    assert_eq!(t.dims(), stprune::Dims::new(1, 4, 12, 1));
    assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let sp = load_stt(dir.join("spatial0_view2.stt")).unwrap();
    assert_eq!(sp.dims(), stprune::Dims::new(1, 1, 24, 1));
}

#[test]
fn single_view_flag() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("one.toml");
    fs::write(&spec, "views = 1\nframes = 3\npatches = 8\nchannels = 4\nn_dynamic = 1\nbackground_sigma = 0.05\nfeature_scale = 1.0\n").unwrap();
    let x = dir.path().join("one.stt");
    ok(&["gen", s(&spec), s(&x)]);
    let o = dir.path().join("o.stt");
    assert_eq!(code(&run(&["prune", s(&x), s(&o), "--ring", "cam"])), 2);
    ok(&["prune", s(&x), s(&o), "--ring", "cam", "--single-view"]);
    // T*P = 24 -> K1 = 12 -> K2 = 6
    assert_eq!(load_stt(&o).unwrap().dims().patches, 6);
}

#[test]
fn baseline_recall_is_lower_on_a_standard_scene() {
    let dir = tempfile::tempdir().unwrap();
    let suite = fs::read_to_string(Path::new(MANIFEST).join("fixtures/standard_suite.toml")).unwrap();
    let scene = suite.split("[scene]").nth(1).unwrap().to_string() + "seed = 0\n";
    let spec = dir.path().join("scene.toml");
    fs::write(&spec, scene).unwrap();
    let x = dir.path().join("s.stt");
    ok(&["gen", s(&spec), s(&x)]);
    let labels = dir.path().join("s.labels.json");
    let report = dir.path().join("r.json");
    let pruned = dir.path().join("o.stt");
    let mut recall = Vec::new();
    for extra in [&[][..], &["--baseline", "vanilla"][..]] {
        let mut args = vec!["prune", s(&x), s(&pruned), "--labels", s(&labels), "--report", s(&report)];
        args.extend_from_slice(extra);
        ok(&args);
        recall.push(RunReport::from_json(&fs::read_to_string(&report).unwrap()).unwrap().metrics.unwrap());
    }
    assert!(recall[1].dynamic_recall < recall[0].dynamic_recall);
    // Same scene and budget as seed 0 of the committed golden suite.
    let golden = SuiteDocument::from_json(&fs::read_to_string(Path::new(MANIFEST).join("fixtures/golden_retention.json")).unwrap()).unwrap();
    assert_eq!(golden.report.per_seed[0].st_prune, recall[0]);
    assert_eq!(golden.report.per_seed[0].vanilla, recall[1]);
}

#[test]
fn bench_and_oracle_check_documents() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "[[case]]\nviews = 2\nframes = 2\npatches = 8\nchannels = 4\nretention = 0.25\n\n[[case]]\nviews = 2\nframes = 2\npatches = 8\nchannels = 4\nretention = 0.25\norder = \"spatial-first\"\n").unwrap();
    let out = dir.path().join("bench.json");
    ok(&["bench", "--grid", s(&grid), "--out", s(&out)]);
    let doc = json(&out);
    schema_check("bench_report.schema.json", &doc);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
    assert_eq!(code(&run(&["bench", "--grid", s(&grid), "--repeats", "3"])), 2);

    let out = dir.path().join("oracle.json");
    let res = ok(&["oracle-check", "--out", s(&out)]);
    let doc = json(&out);
    schema_check("oracle_check.schema.json", &doc);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 200);
    // 1 - cos is half a squared metric, so greedy is only guaranteed a quarter.
    assert!(doc["min_ratio"].as_f64().unwrap() >= 0.25);
    assert_eq!(doc["greedy_above_optimal"], 0);
    assert!(String::from_utf8_lossy(&res.stderr).contains("min ratio"));
    assert_eq!(code(&run(&["oracle-check", "--max-n", "20"])), 2);
}

#[test]
fn suite_document_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("suite.toml");
    fs::write(&spec, format!("seeds = [1, 2]\nretention = 0.25\n\n[scene]\n{SMALL_SCENE}")).unwrap();
    let mut docs = Vec::new();
    for engine in ["optimized", "naive"] {
        let out = dir.path().join(format!("{engine}.json"));
        ok(&["suite", s(&spec), "--engine", engine, "--out", s(&out)]);
        let doc = json(&out);
        schema_check("suite.schema.json", &doc);
        docs.push(SuiteDocument::from_json(&doc.to_string()).unwrap().report);
    }
    assert_eq!(docs[0].per_seed, docs[1].per_seed);
    schema_check("suite.schema.json", &json(&Path::new(MANIFEST).join("fixtures/golden_retention.json")));
}
