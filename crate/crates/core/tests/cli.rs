use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tessforest(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tessforest"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sample_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("c.json"),
        r#"{"phi": {"kind": "isotropic"}, "lambda": 6.0, "sampler": "pht", "svg_scale": 50}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = tessforest(
            &[
                "--config",
                &cfg,
                "--seed",
                "11",
                "--threads",
                threads,
                "sample",
                "--svg",
            ],
            out,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["partition.json", "partition.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let svg = fs::read_to_string(a.join("partition.svg")).unwrap();
    assert!(svg.contains(r#"width="50.000""#));
}

#[test]
fn mondrian_svg_has_only_axis_parallel_edges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.json"), r#"{"lambda": 8.0}"#);
    let o = tessforest(
        &["--config", &cfg, "--seed", "3", "sample", "--svg"],
        dir.path(),
    );
    assert!(o.status.success());
    let svg = fs::read_to_string(dir.path().join("partition.svg")).unwrap();
    let mut polygons = 0;
    for line in svg.lines().filter(|l| l.starts_with("<polygon")) {
        polygons += 1;
        let pts: Vec<(f64, f64)> = line
            .split('"')
            .nth(1)
            .unwrap()
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        for i in 0..pts.len() {
            let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
            assert!((p.0 - q.0).abs() < 1e-6 || (p.1 - q.1).abs() < 1e-6);
        }
    }
    assert!(polygons > 1);
}

#[test]
fn fit_then_predict_single_cell_gives_global_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("c.json"),
        r#"{"lambda": 1e-9, "trees": 1}"#,
    );
    let data = write(
        &dir.path().join("d.csv"),
        "x1,x2,y\n0.1,0.2,1.0\n0.5,0.5,2.0\n0.9,0.3,6.0\n",
    );
    let o = tessforest(&["--config", &cfg, "fit", "--data", &data], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = dir.path().join("model.json");
    let o = tessforest(
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--data",
            &data,
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let preds = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("x1,x2,y_hat"));
    for line in lines {
        assert!(line.ends_with(",3"), "{line}");
    }
}

#[test]
fn predictions_survive_model_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.json"), r#"{"lambda": 5.0, "trees": 4}"#);
    let mut rows = String::from("x1,x2,y\n");
    for i in 0..40 {
        let x = (i as f64 + 0.5) / 40.0;
        rows.push_str(&format!("{x},{},{}\n", 1.0 - x, (7.0 * x).sin()));
    }
    let data = write(&dir.path().join("d.csv"), &rows);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = tessforest(
            &["--config", &cfg, "--seed", "5", "fit", "--data", &data],
            out,
        );
        assert!(o.status.success());
        let model = out.join("model.json");
        let o = tessforest(
            &[
                "predict",
                "--model",
                model.to_str().unwrap(),
                "--data",
                &data,
            ],
            out,
        );
        assert!(o.status.success());
    }
    assert_eq!(
        fs::read(a.join("model.json")).unwrap(),
        fs::read(b.join("model.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("predictions.csv")).unwrap(),
        fs::read(b.join("predictions.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_field = write(&dir.path().join("bad.json"), r#"{"lamda": 2.0}"#);
    let o = tessforest(&["--config", &bad_field, "sample"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let outside = write(&dir.path().join("o.csv"), "x1,x2,y\n0.5,0.5,1\n0.5,1.5,1\n");
    let o = tessforest(&["fit", "--data", &outside], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));

    let schema = write(&dir.path().join("s.csv"), "x1,y\n0.5,1\n");
    let o = tessforest(&["fit", "--data", &schema], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let capped = write(
        &dir.path().join("cap.json"),
        r#"{"lambda": 200.0, "cell_cap": 5}"#,
    );
    let o = tessforest(&["--config", &capped, "sample"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_report_embeds_config_and_fails_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("c.json"),
        r#"{"verify": {"markov_reps": 300}}"#,
    );
    let o = tessforest(
        &["--config", &cfg, "--seed", "2", "verify", "markov"],
        dir.path(),
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("verify-markov.json")).unwrap()).unwrap();
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["config"]["seed"], 2);
    assert_eq!(report["config"]["verify"]["markov_reps"], 300);
    let passed = report["report"]["passed"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 1 }));

    // Two replicates cannot meet the count tolerances.
    let tiny = write(
        &dir.path().join("t.json"),
        r#"{"verify": {"property_trials": 1, "count_reps": 2, "zero_cell_samples": 2}}"#,
    );
    let o = tessforest(&["--config", &tiny, "verify", "geometry"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("c.json"),
        r#"{"experiment": {"d": 1, "beta": 1.0, "class": "c0", "lipschitz": 1.0, "sigma": 0.1,
            "n_grid": [100, 200, 400, 800], "reps": 3, "tuning": "c0", "forest_size": "single",
            "phi": {"kind": "axis"}, "n_test": 200}}"#,
    );
    let o = tessforest(&["--config", &cfg, "experiment"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 12);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("rates.json")).unwrap()).unwrap();
    assert!(summary["slope"].is_number());
    assert_eq!(summary["config"]["experiment"]["reps"], 3);
}
