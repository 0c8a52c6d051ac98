#![no_main]

use dimerlab::region::RectilinearPolygon;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(poly) = RectilinearPolygon::from_json(text) else { return };
    assert_eq!(RectilinearPolygon::from_json(&poly.to_json()).expect("rendered polygon parses"), poly);
    assert!(poly.area() > 0.0);
});
