use std::path::{Path, PathBuf};

use roofsense::io::geojson::{footprints_document, read_footprints, write_json, LabeledFootprint};
use roofsense::io::{load_raster, save_raster};
use roofsense::pipeline::cli::run_args;
use roofsense::pipeline::report::EvalSummary;
use roofsense::pipeline::run::RunManifest;
use roofsense_core::geom::{Footprint, Polygon};
use roofsense_core::{Country, RasterGrid};
use serde_json::Value;

fn args(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec!["roofsense".into()];
    v.extend(extra.iter().map(|s| s.to_string()));
    v.extend(
        [
            "--out",
            out.to_str().unwrap(),
            "--deterministic",
            "-q",
            "--set",
            "models.rgb=\"tiny_test\"",
            "--set",
            "models.lidar=\"tiny_test\"",
            "--set",
            "train.learning_rate=0.001",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    v
}

fn run(out: &Path, extra: &[&str]) -> roofsense::Result<()> {
    run_args(args(out, extra))
}

fn grid(w: usize, h: usize, cs: f64, v: f32) -> RasterGrid {
    RasterGrid::filled(w, h, 1, cs, (500.0, 1000.0), "EPSG:32620", v).unwrap()
}

#[test]
fn ndsm_command_writes_difference_and_names_mismatches() {
    let d = tempfile::tempdir().unwrap();
    let p = |n: &str| d.path().join(n);
    save_raster(p("dsm.tif"), &grid(4, 3, 0.5, 7.0), false).unwrap();
    save_raster(p("dtm.tif"), &grid(4, 3, 0.5, 7.0), false).unwrap();
    save_raster(p("small.tif"), &grid(3, 3, 0.5, 1.0), false).unwrap();
    let cmd = |dtm: &str| {
        run_args(["roofsense", "ndsm", "--dsm", p("dsm.tif").to_str().unwrap(), "--dtm", p(dtm).to_str().unwrap(), "--output", p("n.tif").to_str().unwrap()])
    };
    cmd("dtm.tif").unwrap();
    let n = load_raster(p("n.tif")).unwrap();
    assert_eq!((n.width(), n.height(), n.cell_size()), (4, 3, 0.5));
    assert!(n.values().iter().all(|&v| v == 0.0));
    let err = cmd("small.tif").unwrap_err().to_string();
    assert!(err.contains("mismatch") || err.contains("geometry"), "{err}");
}

fn scene(out: &Path, n: usize) {
    run(out, &["synth", "--n", &n.to_string()]).unwrap();
}

#[test]
fn extract_skips_footprints_outside_the_rasters() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    scene(out, 12);
    let fp = out.join("synth/footprints.geojson");
    let mut items = read_footprints(&fp).unwrap();
    items.push(LabeledFootprint {
        footprint: Footprint {
            building_id: "far-away".into(),
            polygon: Polygon::rect(0.0, 0.0, 10.0, 10.0),
            country: Country::Dominica,
        },
        roof_type: Some(0),
        roof_material: Some(0),
    });
    write_json(&fp, &footprints_document(&items, Some("EPSG:32620"))).unwrap();
    run(out, &["extract"]).unwrap();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("runs/extract/extract_report.json")).unwrap()).unwrap();
    assert_eq!(report["skipped"], 1);
    assert_eq!(report["skipped_ids"][0], "far-away");
    assert_eq!(report["totals"]["total"], 12);
    let t = &report["totals"];
    assert_eq!(t["Dominica"].as_u64().unwrap() + t["SaintLucia"].as_u64().unwrap() + t["Other"].as_u64().unwrap(), 12);
}

#[test]
fn extract_rerun_gives_identical_manifest() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    scene(out, 10);
    run(out, &["extract"]).unwrap();
    let a = std::fs::read(out.join("dataset/manifest.jsonl")).unwrap();
    run(out, &["extract"]).unwrap();
    assert_eq!(a, std::fs::read(out.join("dataset/manifest.jsonl")).unwrap());
}

fn trained(out: &Path, n: usize) {
    scene(out, n);
    run(out, &["extract"]).unwrap();
    run(out, &["split"]).unwrap();
    run(out, &["train", "--modality", "rgb", "--epochs", "1"]).unwrap();
    run(out, &["train", "--modality", "lidar", "--epochs", "1"]).unwrap();
}

#[test]
fn end_to_end_outputs_and_map_export() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    trained(out, 48);
    let hist = std::fs::read_to_string(out.join("checkpoints/rgb_tiny_test/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 2);
    assert!(hist.starts_with("epoch,train_loss,val_loss,lr"));

    run(out, &["fuse-eval", "--strategy", "feature_concat", "--family", "svm"]).unwrap();
    let run_dir = out.join("runs/fuse-eval-feature_concat-SVM");
    for f in ["metrics.json", "cv_table.csv", "classifier.json", "report.txt", "access_log.json", "run_manifest.json"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let cv = std::fs::read_to_string(run_dir.join("cv_table.csv")).unwrap();
    assert_eq!(cv.lines().count(), 1 + 32);
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(run_dir.join("classifier.json")).unwrap()).unwrap();
    assert_eq!(sidecar["layout"]["blocks"][0][0], "rgb:tiny_test:embedding");
    assert_eq!(sidecar["layout"]["blocks"][1][1], 16);
    let m = RunManifest::read(&run_dir).unwrap();
    assert_eq!(m.checkpoints.len(), 2);
    assert!(m.started_unix.is_none());

    run(out, &["fuse-eval", "--strategy", "rgb_only"]).unwrap();
    let s = EvalSummary::read(&out.join("runs/fuse-eval-rgb_only")).unwrap();
    assert_eq!((s.group.as_str(), s.row.as_str()), ("RGB", "tiny_test"));

    let map = out.join("map.geojson");
    let ck = |m: &str| out.join(format!("checkpoints/{m}_tiny_test"));
    let fp = out.join("synth/footprints.geojson");
    let predict = |footprints: &PathBuf, checkpoints: &[PathBuf], extra: &[&str]| {
        let mut a: Vec<String> = vec!["roofsense".into(), "predict-map".into()];
        for c in checkpoints {
            a.extend(["--checkpoint".into(), c.to_string_lossy().into_owned()]);
        }
        a.extend(["--rgb".into(), out.join("synth/rgb.tif").to_string_lossy().into_owned()]);
        a.extend(["--dsm".into(), out.join("synth/dsm.tif").to_string_lossy().into_owned()]);
        a.extend(["--dtm".into(), out.join("synth/dtm.tif").to_string_lossy().into_owned()]);
        a.extend(["--footprints".into(), footprints.to_string_lossy().into_owned()]);
        a.extend(["--output".into(), map.to_string_lossy().into_owned()]);
        a.extend(extra.iter().map(|s| s.to_string()));
        run_args(a)
    };
    let features = |p: &Path| -> Vec<Value> {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["features"].as_array().unwrap().clone()
    };

    predict(&fp, &[ck("rgb"), ck("lidar")], &[]).unwrap();
    let f = features(&map);
    assert_eq!(f.len(), 48);
    let classes = roofsense_core::Task::RoofType.classes();
    for feat in &f {
        let p = &feat["properties"];
        assert!(classes.contains(&p["predicted_class"].as_str().unwrap()));
        let c = p["confidence"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    // RGB-only model on imagery at a finer resolution than training.
    predict(&fp, &[ck("rgb")], &["--cell-size", "0.1"]).unwrap();
    assert_eq!(features(&map).len(), 48);

    let empty = out.join("empty.geojson");
    std::fs::write(&empty, r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
    predict(&empty, &[ck("rgb")], &[]).unwrap();
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&map).unwrap()).unwrap();
    assert_eq!(v["type"], "FeatureCollection");
    assert_eq!(v["features"].as_array().unwrap().len(), 0);

    let bad = out.join("bad.geojson");
    std::fs::write(
        &bad,
        r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"id":1},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#,
    )
    .unwrap();
    let err = predict(&bad, &[ck("rgb")], &[]).unwrap_err().to_string();
    assert!(err.contains("building_id"), "{err}");

    let report = roofsense::pipeline::commands::cmd_report(&[
        out.join("runs/fuse-eval-rgb_only"),
        run_dir.join("metrics.json"),
    ])
    .unwrap();
    assert!(report.find("RGB").unwrap() < report.find("Feature-level fusion").unwrap());
}

#[test]
fn fuse_eval_without_test_split_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    scene(out, 24);
    run(out, &["extract"]).unwrap();
    run(out, &["split", "--set", "split.train_frac=1.0"]).unwrap();
    run(out, &["train", "--modality", "rgb", "--epochs", "1"]).unwrap();
    let err = run(out, &["fuse-eval", "--strategy", "rgb_only"]).unwrap_err().to_string();
    assert!(err.contains("test split is empty"), "{err}");
    assert!(!out.join("runs/fuse-eval-rgb_only").exists());
}

#[test]
fn invalid_task_fails_before_training() {
    let d = tempfile::tempdir().unwrap();
    let err = run(d.path(), &["train", "--modality", "rgb", "--task", "roof_shape"]).unwrap_err().to_string();
    assert!(err.contains("roof_shape"), "{err}");
    assert!(!d.path().join("checkpoints").exists());
}

#[test]
fn five_epoch_run_has_five_history_rows() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    scene(out, 40);
    run(out, &["extract"]).unwrap();
    run(out, &["split"]).unwrap();
    let t = std::time::Instant::now();
    run(out, &["train", "--modality", "lidar", "--epochs", "5"]).unwrap();
    assert!(t.elapsed().as_secs() < 300);
    let hist = std::fs::read_to_string(out.join("checkpoints/lidar_tiny_test/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 6);
    run(out, &["train", "--modality", "lidar", "--epochs", "6", "--resume"]).unwrap();
    let hist = std::fs::read_to_string(out.join("checkpoints/lidar_tiny_test/history.csv")).unwrap();
    assert_eq!(hist.lines().last().unwrap().split(',').next(), Some("6"));
}

#[test]
fn extract_reports_label_file_totals_per_country() {
    // Dominica / Saint Lucia counts per roof type and per roof material
    let types = [(2055, 1063), (1334, 710), (1636, 274), (1145, 128)];
    let materials = [(1420, 1343), (1206, 507), (1200, 171), (1153, 0), (1191, 154)];
    let expand = |counts: &[(usize, usize)], dominica: bool| -> Vec<usize> {
        let mut v = Vec::new();
        for (c, &(d, s)) in counts.iter().enumerate() {
            v.extend(std::iter::repeat_n(c, if dominica { d } else { s }));
        }
        v
    };
    let d = tempfile::tempdir().unwrap();
    let p = |n: &str| d.path().join(n);
    let rgb = RasterGrid::filled(40, 40, 3, 1.0, (0.0, 40.0), "EPSG:32620", 120.0).unwrap();
    save_raster(p("rgb.tif"), &rgb, false).unwrap();
    save_raster(p("ndsm.tif"), &RasterGrid::filled(40, 40, 1, 1.0, (0.0, 40.0), "EPSG:32620", 3.0).unwrap(), false)
        .unwrap();
    let mut items = Vec::new();
    let mut csv = String::from("building_id,roof_type,roof_material,country\n");
    for (dominica, country) in [(true, Country::Dominica), (false, Country::SaintLucia)] {
        for (i, (t, m)) in expand(&types, dominica).into_iter().zip(expand(&materials, dominica)).enumerate() {
            let id = format!("{}-{i}", country.as_str());
            let x = (i % 30) as f64 + 2.0;
            let y = (i / 30 % 30) as f64 + 2.0;
            items.push(LabeledFootprint {
                footprint: Footprint { building_id: id.clone(), polygon: Polygon::rect(x, y, x + 3.0, y + 2.0), country },
                roof_type: None,
                roof_material: None,
            });
            csv.push_str(&format!("{id},{t},{m},{}\n", country.as_str()));
        }
    }
    write_json(p("fp.geojson"), &footprints_document(&items, Some("EPSG:32620"))).unwrap();
    std::fs::write(p("labels.csv"), csv).unwrap();
    let config = format!(
        "[data]\nsource = \"real\"\n[data.real]\nrgb = [{:?}]\nndsm = {:?}\nfootprints = {:?}\nlabels = {:?}\n",
        p("rgb.tif"),
        p("ndsm.tif"),
        p("fp.geojson"),
        p("labels.csv")
    );
    std::fs::write(p("run.toml"), config).unwrap();
    let out = p("out");
    run(&out, &["--config", p("run.toml").to_str().unwrap(), "extract"]).unwrap();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("runs/extract/extract_report.json")).unwrap()).unwrap();
    let totals = &report["totals"];
    assert_eq!((totals["Dominica"].as_u64(), totals["SaintLucia"].as_u64()), (Some(6170), Some(2175)));
    assert_eq!(totals["total"], 8345);
    assert_eq!(report["classes"]["roof_type"]["Gable"]["Dominica"], 2055);
    assert_eq!(report["classes"]["roof_material"]["HealthyMetal"]["SaintLucia"], 1343);
    assert!(report["classes"]["roof_material"]["BlueTarpaulin"].get("SaintLucia").is_none());
}
