#![no_main]

use dimerlab::kasteleyn::{kasteleyn_with_holes, HoleSpec};
use dimerlab::region::CellRegion;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = HoleSpec::from_json(text) else { return };
    assert_eq!(HoleSpec::from_json(&spec.to_json()).expect("rendered spec parses"), spec);
    if spec.flip_path.len() <= 64 {
        let _ = kasteleyn_with_holes(&CellRegion::rectangle(6, 6), &spec);
    }
});
