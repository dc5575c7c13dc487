use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use epf_core::forecast::{EnsembleForecast, ForecastDistribution};
use epf_core::ingest::load_csv;
use epf_core::scoring::ScoreTable;
use serde_json::Value;

const CONFIG: &str = r#"{
  "seed": 3,
  "zones": [{"code": "SYN", "endpoint": "http://localhost", "cache_dir": "data", "timezone": "UTC"}],
  "splits": {
    "train": {"start": "2023-01-01T00:00:00Z", "end": "2023-03-01T00:00:00Z"},
    "validation": {"start": "2023-03-01T00:00:00Z", "end": "2023-04-01T00:00:00Z"},
    "test": {"start": "2023-04-01T00:00:00Z", "end": "2023-05-01T00:00:00Z"},
    "few_shot_days": 10
  },
  "nhits": {"n_epochs": 2},
  "qra": {"samples": 8, "solver": {"n_epochs": 20}},
  "features": {"train_stride": 6}
}"#;

fn epf(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epf"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .expect("spawn epf")
}

fn ok(ws: &Path, args: &[&str]) -> Value {
    let out = epf(ws, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary JSON")
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.json"), CONFIG).unwrap();
    dir
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let key = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const PIPELINE: &[&[&str]] = &[
    &["synth", "--zone", "SYN", "--start", "2023-01-01", "--days", "125"],
    &["featurize", "--zone", "SYN"],
    &["baseline", "--zone", "SYN", "--method", "bootstrap-synthetic"],
    &["train-nhits", "--zone", "SYN"],
    &["ensemble", "--zone", "SYN", "--split", "validation"],
    &["ensemble", "--zone", "SYN", "--split", "test"],
    &["qra-fit", "--zone", "SYN"],
    &["predict", "--zone", "SYN"],
    &["score", "--zone", "SYN", "--forecasts", "forecasts/quantiles-SYN-test.csv", "--kind", "quantile"],
    &[
        "dm-test",
        "--a",
        "scores/quantiles-SYN-test.csv",
        "--b",
        "scores/baseline-SYN-bootstrap-synthetic-test.csv",
    ],
    &["report", "--fan-chart", "--quantiles", "forecasts/quantiles-SYN-test.csv", "--zone", "SYN"],
];

#[test]
fn constant_data_baseline_scores_zero() {
    let ws = workspace();
    ok(ws.path(), &["synth", "--zone", "SYN", "--start", "2023-01-01", "--days", "125", "--constant", "50"]);
    let v = ok(ws.path(), &["baseline", "--zone", "SYN", "--method", "same-hour-28d"]);
    assert_eq!(v["scores"]["crps"], 0.0);
    assert_eq!(v["scores"]["origins"], 30);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path().join("scores/baseline-SYN-same-hour-28d-test.json")).unwrap()).unwrap();
    assert_eq!(summary["crps"], 0.0);
}

#[test]
fn exit_codes() {
    let ws = workspace();
    assert_eq!(epf(ws.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(epf(ws.path(), &["baseline", "--zone"]).status.code(), Some(2));
    assert_eq!(epf(ws.path(), &["--help"]).status.code(), Some(0));
    let out = epf(ws.path(), &["baseline", "--zone", "NONE", "--method", "same-hour-28d"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
    let out = epf(ws.path(), &["carbon", "--time-hours=-1", "--power-kw", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(serde_json::from_slice::<Value>(&out.stderr).unwrap()["error"], "domain");
}

#[test]
fn pipeline_artifacts_are_byte_identical_across_runs() {
    let (a, b) = (workspace(), workspace());
    for args in PIPELINE {
        ok(a.path(), args);
        ok(b.path(), args);
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(fb[k] == *v, "{k} differs between runs");
    }
    for k in [
        "models/nhits-SYN.json",
        "models/qra-SYN.json",
        "forecasts/quantiles-SYN-test.csv",
        "stats/dm-quantiles-SYN-test-vs-baseline-SYN-bootstrap-synthetic-test-crps.json",
    ] {
        assert!(fa.contains_key(k), "missing {k}");
    }
    // Re-running in place reproduces every artifact.
    for args in PIPELINE {
        ok(a.path(), args);
    }
    assert_eq!(files(a.path()), fa);
}

#[test]
fn manifest_records_digests_and_seed() {
    let ws = workspace();
    ok(ws.path(), &["synth", "--zone", "SYN", "--start", "2023-01-01", "--days", "60"]);
    let v = ok(ws.path(), &["--seed", "11", "baseline", "--zone", "SYN", "--method", "same-hour-28d", "--split", "validation"]);
    assert!(v["scores"]["crps"].as_f64().unwrap() > 0.0);
    let runs: Vec<_> = std::fs::read_dir(ws.path().join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("baseline-"))
        .collect();
    assert_eq!(runs.len(), 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&runs[0]).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["subcommand"], "baseline");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["git_describe"].is_string());
    assert!(m["inputs"]["config.json"].is_string());
    assert!(m["inputs"]["data/SYN/price.csv"].is_string());
    assert!(m["outputs"]["scores/baseline-SYN-same-hour-28d-validation.csv"].is_string());
}

#[test]
fn imported_forecasts_score_like_in_process() {
    let ws = workspace();
    ok(ws.path(), &["synth", "--zone", "SYN", "--start", "2023-01-01", "--days", "125"]);
    let actual = load_csv(&ws.path().join("data/SYN/price.csv"), "SYN").unwrap();
    let t0 = chrono::DateTime::parse_from_rfc3339("2023-04-01T00:00:00Z").unwrap().to_utc();
    let mut text = String::from("origin,sample_idx");
    for h in 0..24 {
        text.push_str(&format!(",h{h}"));
    }
    text.push('\n');
    let mut forecasts = Vec::new();
    for d in 0..20 {
        let origin = t0 + chrono::Duration::days(d);
        let mut samples = Vec::new();
        for s in 0..5 {
            let row: Vec<f64> = (0..24).map(|h| 70.0 + 0.37 * (s * 24 + h) as f64 + 0.01 * d as f64).collect();
            text.push_str(&origin.format("%Y-%m-%dT%H:%M:%SZ").to_string());
            text.push_str(&format!(",{s}"));
            for v in &row {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
            samples.push(row);
        }
        forecasts.push(ForecastDistribution::Ensemble(EnsembleForecast::new(origin, samples).unwrap()));
    }
    std::fs::write(ws.path().join("external.csv"), text).unwrap();
    ok(ws.path(), &["import-forecasts", "--zone", "SYN", "--file", "external.csv", "--kind", "ensemble", "--name", "ext"]);
    ok(
        ws.path(),
        &["score", "--zone", "SYN", "--forecasts", "forecasts/ext.csv", "--kind", "ensemble", "--name", "ext-rescored"],
    );
    let expected = ScoreTable::compute(&forecasts, &actual).unwrap();
    for name in ["ext", "ext-rescored"] {
        let got = ScoreTable::load(&ws.path().join(format!("scores/{name}.csv"))).unwrap();
        for metric in ["crps", "energy_score", "pit"] {
            assert_eq!(got.series(metric).unwrap(), expected.series(metric).unwrap(), "{name} {metric}");
        }
        let summary: Value =
            serde_json::from_str(&std::fs::read_to_string(ws.path().join(format!("scores/{name}.json"))).unwrap()).unwrap();
        assert_eq!(summary, serde_json::to_value(expected.summary().unwrap()).unwrap());
    }
}

#[test]
fn fan_chart_and_summary_report() {
    let ws = workspace();
    let t0 = "2023-04-01T00:00:00Z";
    let mut text = String::from("origin,horizon,level,value\n");
    for h in 0..24 {
        for (i, level) in [0.05, 0.25, 0.5, 0.75, 0.95].iter().enumerate() {
            text.push_str(&format!("{t0},{h},{level},{}\n", 60.0 + 5.0 * i as f64 + h as f64));
        }
    }
    std::fs::write(ws.path().join("q.csv"), text).unwrap();
    ok(ws.path(), &["synth", "--zone", "SYN", "--start", "2023-01-01", "--days", "125", "--constant", "50"]);
    ok(ws.path(), &["baseline", "--zone", "SYN", "--method", "same-hour-28d"]);
    let v = ok(
        ws.path(),
        &[
            "report",
            "--fan-chart",
            "--quantiles",
            "q.csv",
            "--zone",
            "SYN",
            "--summary",
            "scores/baseline-SYN-same-hour-28d-test.csv",
        ],
    );
    let written: Vec<String> = v["written"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
    assert_eq!(written.len(), 2);
    let svg = std::fs::read_to_string(ws.path().join(&written[0])).unwrap();
    assert!(svg.contains("<svg") && svg.contains("version=\"1.1\""));
    assert_eq!(svg.matches("class=\"hour\"").count(), 24);
    assert_eq!(svg.matches("class=\"band\"").count(), 2);
    let md = std::fs::read_to_string(ws.path().join("reports/summary.md")).unwrap();
    assert!(md.contains("baseline-SYN-same-hour-28d-test"));
}

#[test]
fn carbon_from_power_and_meter_log() {
    let ws = workspace();
    let v = ok(ws.path(), &["carbon", "--time-hours", "1", "--power-kw", "1"]);
    assert!((v["report"]["co2e_kg"].as_f64().unwrap() - 0.328).abs() < 1e-12);
    assert!((v["report"]["co2e_pue_kg"].as_f64().unwrap() - 0.3936).abs() < 1e-12);
    std::fs::write(ws.path().join("meter.csv"), "seconds,watts\n0,800\n1800,1200\n3600,1000\n").unwrap();
    let v = ok(ws.path(), &["carbon", "--time-hours", "2", "--meter-log", "meter.csv", "--name", "meter"]);
    assert!((v["report"]["power_kw"].as_f64().unwrap() - 1.05).abs() < 1e-12);
    assert!(ws.path().join("reports/meter.json").exists());
    assert_eq!(epf(ws.path(), &["carbon", "--time-hours", "1"]).status.code(), Some(1));
}
