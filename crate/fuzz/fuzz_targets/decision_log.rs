#![no_main]

use curatekit::pipeline::parse_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((records, valid)) = parse_records(data) {
        assert!(valid <= data.len());
        let (again, valid_again) = parse_records(&data[..valid]).expect("valid prefix parses");
        assert_eq!(valid_again, valid);
        assert_eq!(again.len(), records.len());
    }
});
