#![no_main]

use dimerlab_cli::parse_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((m, n)) = parse_grid(text) else { return };
    assert!(m >= 1 && n >= 1);
    assert_eq!(parse_grid(&format!("{m}x{n}")), Ok((m, n)));
});
