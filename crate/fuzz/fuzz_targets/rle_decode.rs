#![no_main]

use curatekit::geometry::{rle_decode, rle_encode};
use curatekit::MaskRle;
use libfuzzer_sys::fuzz_target;

// Two size bytes, then little-endian u16 run lengths.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (h, w) = (u32::from(data[0] % 65), u32::from(data[1] % 65));
    let counts = data[2..]
        .chunks(2)
        .map(|c| u32::from(c[0]) | c.get(1).map_or(0, |b| u32::from(*b) << 8))
        .collect();
    let rle = MaskRle::new(h, w, counts);
    if let Ok(m) = rle_decode(&rle) {
        let back = rle_decode(&rle_encode(&m)).expect("encoded mask decodes");
        assert_eq!(back, m);
        assert_eq!(m.area(), rle.area());
    }
});
