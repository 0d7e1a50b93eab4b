#![no_main]

use curatekit::pipeline::{candidates_for, ingest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ing) = ingest(data) {
        let images: usize = ing.entries.iter().map(|e| e.images.len()).sum();
        assert_eq!(candidates_for(&ing.entries).len(), images);
    }
});
