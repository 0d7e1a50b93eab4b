#![no_main]

use curatekit::datamodel::{detections_to_json, parse_detections};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dets) = parse_detections(data) {
        let bytes = detections_to_json(&dets);
        let again = parse_detections(&bytes).expect("serialized detections parse");
        assert_eq!(detections_to_json(&again), bytes);
    }
});
