#![no_main]

use dimerlab::kasteleyn::build_kasteleyn;
use dimerlab::region::parse_ascii;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(parsed) = parse_ascii(text) else { return };
    let again = parse_ascii(&parsed.region.to_ascii(parsed.base)).expect("rendered region parses");
    assert_eq!(again, parsed);
    if parsed.region.len() <= 64 {
        let _ = build_kasteleyn(&parsed.region);
    }
});
