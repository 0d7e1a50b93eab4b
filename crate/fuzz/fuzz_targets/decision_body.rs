#![no_main]

use curatekit_service::review::{decode_decision, ReviewMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for mode in [ReviewMode::Filter, ReviewMode::Quality] {
        let _ = decode_decision(mode, data);
    }
});
