use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

use curatekit::datamodel::{load_dataset, save_dataset, save_detections};
use curatekit::geometry::{rle_encode, BitMask};
use curatekit::{
    BBox, Category, CategoryId, Dataset, Detection, GroundTruthAnnotation, ImageId, ImageRecord,
};

fn curatekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curatekit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = curatekit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Twelve 40x30 images, one annotation each over three classes.
fn dataset() -> Dataset {
    let mut d = Dataset {
        categories: (1..=3)
            .map(|c| Category {
                id: CategoryId(c),
                name: ["shoe", "hat", "bag"][c as usize - 1].into(),
                supercategory: String::new(),
            })
            .collect(),
        ..Dataset::default()
    };
    for i in 1..=12u64 {
        let bbox = BBox::new(i as f64, 2.0, 20.0, 15.0);
        d.images.push(ImageRecord {
            id: ImageId(i),
            width: 40,
            height: 30,
            file_name: format!("img{i:02}.png"),
        });
        d.annotations.push(GroundTruthAnnotation {
            id: i.into(),
            image_id: ImageId(i),
            category_id: CategoryId(1 + i % 3),
            bbox,
            mask: Some(rle_encode(&BitMask::from_box(30, 40, &bbox))),
            area: bbox.area(),
        });
    }
    d
}

fn detections(d: &Dataset) -> Vec<Detection> {
    d.annotations
        .iter()
        .enumerate()
        .map(|(i, a)| Detection {
            image_id: a.image_id,
            category_id: a.category_id,
            bbox: BBox::new(a.bbox.x + (i % 4) as f64, a.bbox.y, a.bbox.w, a.bbox.h),
            mask: a.mask.clone(),
            score: 0.3 + 0.05 * i as f64,
        })
        .collect()
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = curatekit(&["eval", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = curatekit(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let out = curatekit(&[
        "eval",
        "--gt",
        "/nonexistent/gt.json",
        "--dt",
        "/nonexistent/dt.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gt.json"));
}

#[test]
fn eval_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dataset();
    let (gt, dt) = (dir.path().join("gt.json"), dir.path().join("model.json"));
    save_dataset(&d, &gt).unwrap();
    save_detections(&detections(&d), &dt).unwrap();
    let (r1, r2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));

    let args = |out: &Path| {
        vec![
            "eval".to_string(),
            "--gt".into(),
            p(&gt).into(),
            "--dt".into(),
            p(&dt).into(),
            "--kind".into(),
            "both".into(),
            "--per-class".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let a1: Vec<String> = args(&r1);
    let a2: Vec<String> = args(&r2);
    let t1 = ok(&a1.iter().map(String::as_str).collect::<Vec<_>>());
    let t2 = ok(&a2.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(t1, t2);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());

    assert!(t1.starts_with("Method"));
    assert!(t1.contains("model"));
    assert!(t1.contains("per-class AP (mask)"));
    let report: Value = serde_json::from_slice(&std::fs::read(&r1).unwrap()).unwrap();
    assert_eq!(report["method"], "model");
    // boxes are shifted by up to 3 px, masks are exact copies
    let m = report["box"]["map_w"].as_f64().unwrap();
    assert!(m > 0.0 && m < 1.0, "box: {m}");
    assert_eq!(report["mask"]["map_w"], 1.0);
}

#[test]
fn split_writes_a_partition() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    save_dataset(&dataset(), &gt).unwrap();
    let out = dir.path().join("splits");
    ok(&[
        "split",
        "--gt",
        p(&gt),
        "--seed",
        "3",
        "--fractions",
        "0.5,0.25,0.25",
        "--out-dir",
        p(&out),
    ]);

    let mut ids = Vec::new();
    let mut sizes = Vec::new();
    for name in ["train", "val", "test"] {
        let part = load_dataset(out.join(format!("{name}.json"))).unwrap();
        sizes.push(part.images.len());
        ids.extend(part.images.iter().map(|i| i.id.0));
        assert_eq!(part.categories.len(), 3);
    }
    ids.sort_unstable();
    assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    assert_eq!(sizes, vec![6, 3, 3]);

    let bad = curatekit(&[
        "split",
        "--gt",
        p(&gt),
        "--seed",
        "3",
        "--fractions",
        "0.5,0.5",
        "--out-dir",
        p(&out),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("three values"));
}

#[test]
fn stats_prints_distribution_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    save_dataset(&dataset(), &gt).unwrap();
    let sizes = dir.path().join("sizes.json");
    let text = ok(&["stats", "--gt", p(&gt), "--sizes-out", p(&sizes)]);
    assert!(text.contains("shoe"));
    let v: Value = serde_json::from_slice(&std::fs::read(&sizes).unwrap()).unwrap();
    // 20x15 boxes on 40x30 images
    let expected = (300.0f64 / 1200.0).sqrt();
    let shoe = &v.as_object().unwrap().values().next().unwrap()["shoe"];
    assert!((shoe[0].as_f64().unwrap() - expected).abs() < 1e-12, "{v}");
}

#[test]
fn augment_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dataset();
    let images = dir.path().join("images");
    std::fs::create_dir_all(&images).unwrap();
    for rec in &d.images {
        image::RgbImage::from_fn(40, 30, |x, y| {
            image::Rgb([x as u8 * 6, y as u8 * 8, rec.id.0 as u8])
        })
        .save(images.join(&rec.file_name))
        .unwrap();
    }
    let gt = dir.path().join("gt.json");
    save_dataset(&d, &gt).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "augment",
            "--images",
            p(&images),
            "--annotations",
            p(&gt),
            "--out",
            p(&out),
            "--seed",
            "9",
            "--preview",
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    let ann_a = std::fs::read(a.join("annotations.json")).unwrap();
    assert_eq!(ann_a, std::fs::read(b.join("annotations.json")).unwrap());
    for rec in &d.images {
        assert_eq!(
            std::fs::read(a.join(&rec.file_name)).unwrap(),
            std::fs::read(b.join(&rec.file_name)).unwrap()
        );
        assert!(a.join("preview").join(&rec.file_name).exists());
    }
    let out = load_dataset(a.join("annotations.json")).unwrap();
    assert_eq!(out.images.len(), 12);
    assert!(curatekit::datamodel::validate(&out).is_empty());
}

#[test]
fn pipeline_run_status_export() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    let mut lines = String::new();
    for i in 1..=4 {
        image::RgbImage::new(32, 24)
            .save(dir.path().join(format!("p{i}.png")))
            .unwrap();
        lines += &format!(
            "{}\n",
            json!({"id": format!("p{i}"), "images": [format!("p{i}.png")], "description": format!("item {i}")})
        );
    }
    std::fs::write(&manifest, lines).unwrap();
    let tables = dir.path().join("tables.json");
    std::fs::write(
        &tables,
        json!({
            "labels": {"item 1": "shoe", "item 2": "hat", "item 3": "sleeve"},
            "boxes": {"p2.png": [{"bbox": [0, 0, 8, 8], "score": 0.9}, {"bbox": [9, 9, 8, 8], "score": 0.5}]}
        })
        .to_string(),
    )
    .unwrap();
    let log = dir.path().join("log.jsonl");
    let ws = ["--manifest", p(&manifest), "--log", p(&log)];
    let oracles = format!("mock:{}", p(&tables));

    let mut args = vec!["pipeline", "run"];
    args.extend(ws);
    args.extend(["--oracles", &oracles, "--workers", "2"]);
    let summary: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(summary["processed"], 4);

    let mut args = vec!["pipeline", "status"];
    args.extend(ws);
    let counts: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(
        counts,
        json!({
            "awaiting_review": 1,
            "auto_rejected(anomaly)": 2,
            "auto_rejected(excluded_category)": 1
        })
    );

    // rerunning has nothing left to do
    let mut args = vec!["pipeline", "run"];
    args.extend(ws);
    args.extend(["--oracles", &oracles]);
    let summary: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(summary["records_written"], 0);

    let out = dir.path().join("export.json");
    let mut args = vec!["pipeline", "export"];
    args.extend(ws);
    args.extend(["--out", p(&out)]);
    ok(&args);
    assert_eq!(load_dataset(&out).unwrap().sizes(), (0, 0, 0));
}
