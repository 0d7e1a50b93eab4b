//! Replays the checked-in fuzz corpus through the same properties the fuzz
//! targets assert, so they hold on every `cargo test`.

use std::path::PathBuf;

use curatekit::datamodel::{
    detections_to_json, parse_dataset, parse_detections, to_canonical_json,
};
use curatekit::geometry::{rle_decode, rle_encode};
use curatekit::pipeline::{candidates_for, ingest, parse_records};
use curatekit::MaskRle;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_dataset_seeds() {
    let mut parsed = 0;
    for (name, data) in seeds("parse_dataset") {
        if let Ok(d) = parse_dataset(&data) {
            let bytes = to_canonical_json(&d);
            let again = parse_dataset(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(to_canonical_json(&again), bytes, "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn parse_detections_seeds() {
    for (name, data) in seeds("parse_detections") {
        let dets = parse_detections(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        let bytes = detections_to_json(&dets);
        assert_eq!(
            detections_to_json(&parse_detections(&bytes).unwrap()),
            bytes,
            "{name}"
        );
    }
}

#[test]
fn rle_decode_seeds() {
    let mut decoded = 0;
    for (name, data) in seeds("rle_decode") {
        let (h, w) = (u32::from(data[0] % 65), u32::from(data[1] % 65));
        let counts = data[2..]
            .chunks(2)
            .map(|c| u32::from(c[0]) | c.get(1).map_or(0, |b| u32::from(*b) << 8))
            .collect();
        let rle = MaskRle::new(h, w, counts);
        if let Ok(m) = rle_decode(&rle) {
            assert_eq!(rle_decode(&rle_encode(&m)).unwrap(), m, "{name}");
            assert_eq!(m.area(), rle.area(), "{name}");
            decoded += 1;
        }
    }
    assert_eq!(decoded, 3);
}

#[test]
fn manifest_seeds() {
    for (name, data) in seeds("manifest") {
        if let Ok(ing) = ingest(data.as_slice()) {
            let images: usize = ing.entries.iter().map(|e| e.images.len()).sum();
            assert_eq!(candidates_for(&ing.entries).len(), images, "{name}");
        }
    }
}

#[test]
fn decision_log_seeds() {
    for (name, data) in seeds("decision_log") {
        let (records, valid) = parse_records(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(valid <= data.len());
        let (again, valid_again) = parse_records(&data[..valid]).unwrap();
        assert_eq!((again.len(), valid_again), (records.len(), valid), "{name}");
        if name.starts_with("torn") {
            assert!(valid < data.len());
            assert_eq!(records.len(), 1);
        }
    }
}
