//! End-to-end runs of the `active-search` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use active_search::cli::RunManifest;
use active_search::eval::{regular_checkpoints, Detection};
use active_search::export;
use active_search::forest::ForestModel;
use tempfile::TempDir;

const SMALL: &str = r#"
schema_version = 1
seed = 3
train_scenes = 30
test_scenes = 6
proposals_per_image = 80
code_bits = 64
"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_active-search"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Run {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::load(&dir.join("manifest.json")).unwrap()
}

/// Generated data and a trained model in a scratch directory.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("small.toml");
        fs::write(&cfg, SMALL).unwrap();
        let data = dir.path().join("data");
        ok(&["generate", "--config", p(&cfg), "--out", p(&data)]);
        let model = dir.path().join("model");
        ok(&[
            "train",
            "--dataset",
            p(&data.join("train.jsonl")),
            "--seed",
            "4",
            "--out",
            p(&model),
        ]);
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn test_set(&self) -> String {
        p(&self.path("data/test.jsonl")).to_string()
    }

    fn model(&self) -> String {
        p(&self.path("model/model.json")).to_string()
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    let f = Fixture::new();
    let out = f.path("x");
    assert_eq!(run(&[]).code, 1);
    assert_eq!(run(&["frobnicate"]).code, 1);
    assert_eq!(run(&["search", "--budget", "abc", "--dataset", "d"]).code, 1);
    assert_eq!(run(&["--help"]).code, 0);

    let r = run(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--budget",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("budget"));
    let r = run(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--lambda",
        "1.5",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(
        run(&[
            "search",
            "--dataset",
            &f.test_set(),
            "--policy",
            "active",
            "--out",
            p(&out)
        ])
        .code,
        2
    );
    assert_eq!(
        run(&[
            "search",
            "--dataset",
            &f.test_set(),
            "--scorer",
            "magic",
            "--out",
            p(&out)
        ])
        .code,
        2
    );
    assert_eq!(
        run(&["--jobs", "0", "plot", "--curves", "c.tsv", "--out", p(&out)]).code,
        2
    );

    let missing = f.path("nope.jsonl");
    assert_eq!(run(&["train", "--dataset", p(&missing), "--out", p(&out)]).code, 3);
    let blocker = f.path("a-file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(
        run(&["generate", "--config", p(&f.path("small.toml")), "--out", p(&blocker)]).code,
        3
    );
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, SMALL.replace("code_bits = 64", "code_bits = 60")).unwrap();
    let r = run(&["generate", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("code_bits"), "{}", r.stderr);

    fs::write(&cfg, format!("{SMALL}\nsurprise = 1\n")).unwrap();
    let r = run(&["generate", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("surprise"), "{}", r.stderr);
}

#[test]
fn generate_is_reproducible_and_writes_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let digests = |name: &str, config: &Path| {
        let out = dir.path().join(name);
        ok(&["generate", "--config", p(config), "--out", p(&out)]);
        let manifests: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
            .collect();
        assert_eq!(manifests.len(), 1);
        let m = manifest(&out);
        assert_eq!(m.command, "generate");
        for o in &m.outputs {
            assert!(o.path.exists());
        }
        m.outputs.iter().map(|o| o.sha256.clone()).collect::<Vec<_>>()
    };
    let a = digests("a", &cfg);
    assert_eq!(a.len(), 3);
    assert_eq!(manifest(&dir.path().join("a")).seeds["generator"], 3);
    assert_eq!(a, digests("b", &cfg));

    let other = dir.path().join("other.toml");
    fs::write(&other, SMALL.replace("seed = 3", "seed = 4")).unwrap();
    assert_ne!(a[..2], digests("c", &other)[..2]);
}

#[test]
fn train_defaults_and_missing_class() {
    let f = Fixture::new();
    let model = ForestModel::load(&f.path("model/model.json")).unwrap();
    assert_eq!(model.num_trees(), 10);
    let m = manifest(&f.path("model"));
    assert_eq!(m.command, "train");
    assert_eq!(m.seeds["forest"], 4);

    let r = run(&[
        "train",
        "--dataset",
        p(&f.path("data/train.jsonl")),
        "--class",
        "unicorn",
        "--out",
        p(&f.path("u")),
    ]);
    assert_ne!(r.code, 0);
    assert!(r.stderr.contains("unicorn"));
}

#[test]
fn search_with_budget_one_and_snapshots() {
    let f = Fixture::new();
    let out = f.path("s1");
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--budget",
        "1",
        "--out",
        p(&out),
    ]);
    let traces = export::read_traces(&out.join("traces.tsv")).unwrap();
    assert_eq!(traces.len(), 6);
    assert!(traces.iter().all(|(_, t)| t.len() == 1 && t[0].t == 1));
    assert_eq!(export::read_detections(&out.join("detections.tsv")).unwrap().len(), 6);

    let out = f.path("snap");
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--budget",
        "20",
        "--emit-belief-snapshots",
        "1,10,20",
        "--out",
        p(&out),
    ]);
    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 18);
    let m = manifest(&out);
    assert_eq!(m.outputs.len(), 2 + 18);
    let first = &m.outputs[2].path;
    assert_eq!(export::read_snapshot(first).unwrap().len(), 80);

    let r = run(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--policy",
        "random",
        "--emit-belief-snapshots",
        "1",
        "--out",
        p(&f.path("bad")),
    ]);
    assert_eq!(r.code, 2);
}

fn sorted(mut d: Vec<Detection>) -> Vec<(String, [u64; 4], u64)> {
    let mut v: Vec<_> = d
        .drain(..)
        .map(|d| (d.image_id, d.window.to_array().map(f64::to_bits), d.score.to_bits()))
        .collect();
    v.sort();
    v
}

#[test]
fn full_budget_matches_exhaustive_and_evaluates() {
    let f = Fixture::new();
    let (active, exhaustive) = (f.path("active"), f.path("exh"));
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--seed",
        "2",
        "--budget",
        "80",
        "--out",
        p(&active),
    ]);
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--policy",
        "exhaustive",
        "--seed",
        "2",
        "--out",
        p(&exhaustive),
    ]);
    let read = |dir: &Path| export::read_detections(&dir.join("detections.tsv")).unwrap();
    assert_eq!(sorted(read(&active)), sorted(read(&exhaustive)));

    let ap = |dets: &Path, name: &str| {
        let out = f.path(name);
        ok(&[
            "evaluate",
            "--dataset",
            &f.test_set(),
            "--detections",
            p(dets),
            "--out",
            p(&out),
        ]);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        report["ap"].as_f64().unwrap()
    };
    let a = ap(&active.join("detections.tsv"), "ev-a");
    assert_eq!(a, ap(&exhaustive.join("detections.tsv"), "ev-e"));
    assert!(a > 0.5);

    // curve rows: one per checkpoint
    let out = f.path("curve");
    ok(&[
        "evaluate",
        "--dataset",
        &f.test_set(),
        "--traces",
        p(&active.join("traces.tsv")),
        "--step",
        "7",
        "--out",
        p(&out),
    ]);
    let curves = export::read_curves(&out.join("curve.tsv")).unwrap();
    assert_eq!(curves.len(), 1);
    let budgets: Vec<usize> = curves[0].points.iter().map(|pt| pt.0).collect();
    assert_eq!(budgets, regular_checkpoints(7, 80));
    assert_eq!(curves[0].points.last().unwrap().1, a);

    // an empty detection file scores zero
    let empty = f.path("empty.tsv");
    export::write_detections(&empty, &[]).unwrap();
    assert_eq!(ap(&empty, "ev-0"), 0.0);

    let svg_dir = f.path("plot");
    ok(&["plot", "--curves", p(&out.join("curve.tsv")), "--out", p(&svg_dir)]);
    assert!(fs::read_to_string(svg_dir.join("curves.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn tune_with_a_single_grid_point() {
    let f = Fixture::new();
    let out = f.path("tune");
    ok(&[
        "tune",
        "--dataset",
        p(&f.path("data/train.jsonl")),
        "--model",
        &f.model(),
        "--lambdas",
        "0.25",
        "--sigma-s",
        "0.1",
        "--sigma-c",
        "0.316",
        "--budget",
        "20",
        "--out",
        p(&out),
    ]);
    let theta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("theta.json")).unwrap()).unwrap();
    assert_eq!(theta["lambda"], 0.25);
    assert_eq!(theta["sigma_s"], 0.1);
    assert_eq!(theta["sigma_c"], 0.316);
    let m = manifest(&out);
    let grid = m.results.as_ref().unwrap()["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 1);
    assert_eq!(grid[0]["fold_aucs"].as_array().unwrap().len(), 2);

    // the tuned file feeds straight back into search
    let s = f.path("tuned-search");
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--theta",
        p(&out.join("theta.json")),
        "--budget",
        "5",
        "--out",
        p(&s),
    ]);
    assert_eq!(manifest(&s).config["theta"]["lambda"], 0.25);
}

#[test]
fn benchmark_reports_overhead_and_plot_renders_beliefs() {
    let f = Fixture::new();
    let out = f.path("bench");
    let r = ok(&[
        "benchmark",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--budget",
        "30",
        "--images",
        "3",
        "--out",
        p(&out),
    ]);
    assert!(r.stdout.contains("per-iteration overhead"));
    let body: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("benchmark.json")).unwrap()).unwrap();
    let o = &body["overhead"];
    assert_eq!(o["episodes"], 3);
    assert_eq!(o["iterations"], 90);
    for key in [
        "mean_ns",
        "median_ns",
        "mean_forest_ns",
        "mean_update_ns",
        "mean_distance_evals",
    ] {
        assert!(o[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert!(manifest(&out).timing.is_some());

    let s = f.path("snap");
    ok(&[
        "search",
        "--dataset",
        &f.test_set(),
        "--model",
        &f.model(),
        "--budget",
        "5",
        "--emit-belief-snapshots",
        "5",
        "--out",
        p(&s),
    ]);
    let snap = manifest(&s).outputs[2].path.clone();
    let id = snap
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .split(".t5")
        .next()
        .unwrap()
        .to_string();
    let plot = f.path("bplot");
    ok(&[
        "plot",
        "--snapshot",
        p(&snap),
        "--dataset",
        &f.test_set(),
        "--image",
        &id,
        "--out",
        p(&plot),
    ]);
    assert!(fs::read_to_string(plot.join("beliefs.svg"))
        .unwrap()
        .starts_with("<svg"));
    let r = run(&[
        "plot",
        "--snapshot",
        p(&snap),
        "--dataset",
        &f.test_set(),
        "--image",
        "ghost",
        "--out",
        p(&plot),
    ]);
    assert_eq!(r.code, 2);
}
