#![no_main]

use curatekit::datamodel::{parse_dataset, to_canonical_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = parse_dataset(data) {
        let bytes = to_canonical_json(&d);
        let again = parse_dataset(&bytes).expect("canonical output parses");
        assert_eq!(to_canonical_json(&again), bytes);
    }
});
