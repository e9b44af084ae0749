use std::fs;
use std::path::Path;

use medkit_cli::run_args;
use serde_json::{json, Value};

fn run(out: &Path, config: Option<&Path>, cmd: &[&str]) -> anyhow::Result<medkit_cli::Report> {
    let mut args = vec![
        "medkit".to_string(),
        "--jobs".into(),
        "1".into(),
        "--out-dir".into(),
        out.display().to_string(),
    ];
    if let Some(c) = config {
        args.push("--config".into());
        args.push(c.display().to_string());
    }
    args.extend(cmd.iter().map(|s| s.to_string()));
    run_args(args)
}

fn write_json(path: &Path, v: &Value) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn small_phantom(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("phantom.json");
    write_json(
        &cfg,
        &json!({"pipeline": "phantom", "seed": 4,
                "brain": {"phantom": {"dims": [24, 24, 24]}, "cases": 3},
                "lung": {"slice": {"size": 64}, "pair": {}, "cases": 1},
                "lesion": null}),
    );
    let data = dir.join("data");
    run(&data, Some(&cfg), &["phantom"]).unwrap();
    data
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write_json(&cfg, &json!({"pipeline": "brain", "sead": 3}));
    let err = run(&dir.path().join("out"), Some(&cfg), &["segment"]).unwrap_err();
    assert!(format!("{err:#}").contains("schema"), "{err:#}");
}

#[test]
fn pipeline_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lung.json");
    write_json(&cfg, &json!({"pipeline": "lung"}));
    assert!(run(&dir.path().join("out"), Some(&cfg), &["segment"]).is_err());
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run(&out, None, &["--dry-run", "classify"]).unwrap();
    assert!(!out.exists());
}

#[test]
fn segmentation_reports_only_requested_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(data.join("brain/brain.json")).unwrap()).unwrap();
    cfg["segmentation"] = json!({"methods": ["tissue-model"]});
    let path = data.join("brain/tm.json");
    write_json(&path, &cfg);
    let out = dir.path().join("seg");
    let report = run(&out, Some(&path), &["segment"]).unwrap();
    let summary = report.table("summary").unwrap();
    assert!(summary.rows.iter().all(|r| r[0] == "tissue-model"));
    assert_eq!(summary.rows.len(), 4);
    let dice: f64 = summary.rows[3][2].split(" ± ").next().unwrap().parse().unwrap();
    assert!(dice > 0.5, "{dice}");
    assert!(out.join("report.json").exists() && out.join("summary.csv").exists());
}

#[test]
fn missing_label_file_names_the_case() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    fs::remove_file(data.join("brain/case02/labels.mhd")).unwrap();
    let err = run(
        &dir.path().join("seg"),
        Some(&data.join("brain/brain.json")),
        &["segment"],
    )
    .unwrap_err();
    assert!(format!("{err:#}").contains("case02"), "{err:#}");
}

#[test]
fn identical_pair_has_near_zero_tre() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(data.join("lung/lung.json")).unwrap()).unwrap();
    let case = &mut cfg["source"]["files"][0];
    case["moving"] = case["fixed"].clone();
    case["moving_landmarks"] = case["fixed_landmarks"].clone();
    cfg["presets"] = json!(["affine-mse"]);
    let path = data.join("lung/identity.json");
    write_json(&path, &cfg);
    let report = run(&dir.path().join("reg"), Some(&path), &["register"]).unwrap();
    let detail = report.table("tre_detail").unwrap();
    let row = detail.rows.iter().find(|r| r[1] == "affine-mse").unwrap();
    let tre: f64 = row[2].parse().unwrap();
    assert!(tre < 0.1, "{tre}");
}

#[test]
fn transform_points_round_trips_identity() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_phantom(dir.path());
    let transform = dir.path().join("identity.json");
    fs::write(
        &transform,
        serde_json::to_string(&medkit::registration::TransformChain::identity()).unwrap(),
    )
    .unwrap();
    let points = data.join("lung/case01/fixed_landmarks.txt");
    let out = dir.path().join("tp");
    run(
        &out,
        None,
        &[
            "transform-points",
            "--transform",
            transform.to_str().unwrap(),
            "--points",
            points.to_str().unwrap(),
        ],
    )
    .unwrap();
    let parse = |p: &Path| -> Vec<f64> {
        fs::read_to_string(p)
            .unwrap()
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect()
    };
    let (a, b) = (parse(&points), parse(&out.join("transformed_landmarks.txt")));
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
}
