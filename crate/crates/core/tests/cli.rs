use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sodm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sodm"))
        .args(args)
        .env_remove("SODM_CACHE_MB")
        .output()
        .expect("spawn sodm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).expect("json line")).collect()
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
}

impl Fixture {
    fn new(m: usize) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("train.libsvm");
        let m = m.to_string();
        let out = sodm(&["generate", "--kind", "separable", "--m", &m, "--seed", "3", "--out", p(&data)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Fixture { dir, data }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

const HYPER: [&str; 6] = ["--lambda", "0.1", "--theta", "0.3", "--nu", "0.5"];

#[test]
fn train_then_predict() {
    let fx = Fixture::new(64);
    let model = fx.path("model.json");
    let report = fx.path("report.jsonl");
    let mut args = vec!["train", "--data", p(&fx.data), "--kernel", "rbf", "--gamma", "1"];
    args.extend(HYPER);
    args.extend(["--out", p(&model), "--report", p(&report)]);
    let out = sodm(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout);
    let lines = json_lines(&stdout);
    assert!(!lines.is_empty());
    for line in &lines {
        assert_eq!(line["schema"], "sodm/1");
        assert!(line["kind"].is_string());
    }
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(stored["schema"], "sodm/1");

    let labels = fx.path("labels.txt");
    let metrics = fx.path("metrics.jsonl");
    let out = sodm(&[
        "predict", "--model", p(&model), "--data", p(&fx.data), "--out", p(&labels), "--metrics", p(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let predicted = std::fs::read_to_string(&labels).unwrap();
    assert_eq!(predicted.lines().count(), 64);
    assert!(predicted.lines().all(|l| l == "+1" || l == "-1"));

    let truth: Vec<&str> = std::fs::read_to_string(&fx.data)
        .unwrap()
        .lines()
        .map(|l| if l.starts_with('-') { "-1" } else { "+1" })
        .collect::<Vec<_>>();
    let agree = predicted.lines().zip(&truth).filter(|(a, b)| a == *b).count();
    let m = json_lines(&std::fs::read_to_string(&metrics).unwrap());
    assert_eq!(m[0]["kind"], "metrics");
    assert_eq!(m[0]["count"], 64);
    assert_eq!(m[0]["accuracy"].as_f64().unwrap(), agree as f64 / 64.0);
    assert_eq!(agree, 64);
}

#[test]
fn predict_on_empty_data_succeeds() {
    let fx = Fixture::new(16);
    let model = fx.path("model.json");
    let mut args = vec!["train", "--data", p(&fx.data), "--kernel", "linear", "--levels", "1"];
    args.extend(HYPER);
    args.extend(["--out", p(&model)]);
    assert_eq!(code(&sodm(&args)), 0);

    let empty = fx.path("empty.libsvm");
    std::fs::write(&empty, "").unwrap();
    let labels = fx.path("labels.txt");
    let out = sodm(&["predict", "--model", p(&model), "--data", p(&empty), "--out", p(&labels)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&labels).unwrap(), "");
}

#[test]
fn predict_rejects_wider_data() {
    let fx = Fixture::new(16);
    let model = fx.path("model.json");
    let mut args = vec!["train", "--data", p(&fx.data), "--kernel", "linear", "--levels", "1"];
    args.extend(HYPER);
    args.extend(["--out", p(&model)]);
    assert_eq!(code(&sodm(&args)), 0);

    let wide = fx.path("wide.libsvm");
    std::fs::write(&wide, "+1 1:0.5 7:1\n").unwrap();
    let out = sodm(&["predict", "--model", p(&model), "--data", p(&wide), "--out", p(&fx.path("l.txt"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn svrg_trains_linear_and_refuses_rbf() {
    let fx = Fixture::new(32);
    let model = fx.path("model.json");
    let mut args = vec!["train", "--data", p(&fx.data), "--kernel", "linear", "--svrg", "--epochs", "5"];
    args.extend(HYPER);
    args.extend(["--out", p(&model)]);
    let out = sodm(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&String::from_utf8(out.stdout).unwrap());
    assert!(lines.iter().any(|l| l["kind"] == "summary" && l["method"] == "svrg"));

    let mut args = vec!["train", "--data", p(&fx.data), "--kernel", "rbf", "--gamma", "1", "--svrg"];
    args.extend(HYPER);
    args.extend(["--out", p(&model)]);
    assert_eq!(code(&sodm(&args)), 2);
}

#[test]
fn usage_errors() {
    let fx = Fixture::new(8);
    let out_path = fx.path("m.json");
    let out = p(&out_path);
    let data = p(&fx.data);

    // rbf without a width
    let mut args = vec!["train", "--data", data, "--kernel", "rbf", "--out", out];
    args.extend(HYPER);
    assert_eq!(code(&sodm(&args)), 2);

    // svrg-only flag without --svrg
    let mut args = vec!["train", "--data", data, "--kernel", "linear", "--nodes", "3", "--out", out];
    args.extend(HYPER);
    assert_eq!(code(&sodm(&args)), 2);

    // theta outside [0, 1)
    let args = ["train", "--data", data, "--kernel", "linear", "--lambda", "1", "--theta", "1", "--nu", "0.5", "--out", out];
    assert_eq!(code(&sodm(&args)), 2);

    assert_eq!(code(&sodm(&["verify-bounds", "--trials", "0"])), 2);
    assert_eq!(code(&sodm(&[])), 2);
    assert!(!out_path.exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--data", "/nonexistent/sodm.libsvm", "--kernel", "linear"];
    args.extend(HYPER);
    let out_path = dir.path().join("m.json");
    args.extend(["--out", p(&out_path)]);
    let out = sodm(&args);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn bench_reports_identical_models() {
    let fx = Fixture::new(48);
    let mut args = vec!["bench", "--data", p(&fx.data), "--kernel", "rbf", "--gamma", "1", "--workers-list", "1,2"];
    args.extend(HYPER);
    let out = sodm(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["workers"], 1);
    assert_eq!(lines[1]["workers"], 2);
    assert!(lines.iter().all(|l| l["kind"] == "bench" && l["identical"] == true));

    let mut args = vec!["bench", "--data", p(&fx.data), "--kernel", "linear", "--workers-list", "0,2"];
    args.extend(HYPER);
    assert_eq!(code(&sodm(&args)), 2);
}

#[test]
fn verify_bounds_is_reproducible() {
    let run = || sodm(&["verify-bounds", "--trials", "2", "--seed", "11", "--workers", "2"]);
    let a = run();
    let b = run();
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let lines = json_lines(&String::from_utf8(a.stdout.clone()).unwrap());
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["kind"] == "bound"));

    // wall-clock free output, so reruns agree byte for byte
    assert_eq!(a.stdout, b.stdout);

    let one = sodm(&["verify-bounds", "--trials", "1", "--theorem", "2"]);
    assert_eq!(code(&one), 0);
    assert_eq!(json_lines(&String::from_utf8(one.stdout).unwrap()).len(), 1);
}

#[test]
fn inspect_partition_covers_every_instance() {
    let fx = Fixture::new(40);
    let out = sodm(&[
        "inspect-partition", "--data", p(&fx.data), "--kernel", "rbf", "--gamma", "2", "--stratums", "5",
        "--partitions", "4", "--seed", "9",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines.len(), 1);
    let plan = &lines[0]["plan"];
    let partition_of: Vec<u64> = plan["partition_of"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let stratum_of: Vec<u64> = plan["stratum_of"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(partition_of.len(), 40);
    for s in 0..5 {
        let counts: Vec<usize> = (0..4)
            .map(|k| (0..40).filter(|&i| stratum_of[i] == s && partition_of[i] == k).count())
            .collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "stratum {s}: {counts:?}");
    }
    let totals: Vec<usize> = (0..4).map(|k| partition_of.iter().filter(|&&q| q == k).count()).collect();
    assert_eq!(totals.iter().sum::<usize>(), 40);
    assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 5);
    assert_eq!(plan["landmark_indices"].as_array().unwrap().len(), 5);
    let sizes: u64 = lines[0]["diagnostics"]["stratum_sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(sizes, 40);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.libsvm");
    let b = dir.path().join("b.libsvm");
    for path in [&a, &b] {
        let out = sodm(&["generate", "--kind", "random", "--m", "30", "--dims", "4", "--seed", "5", "--out", p(path)]);
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 30);
}
