mod common;

use dimerlab::kasteleyn::build_kasteleyn;
use dimerlab::region::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ascii_rendering_round_trips(
        cells in prop::collection::btree_set((0..12i32, 0..8i32), 0..40),
        mark in prop::option::of((0..12i32, 0..8i32)),
    ) {
        let mark = mark.filter(|m| !cells.contains(m));
        let region = CellRegion::new(cells);
        let parsed = parse_ascii(&region.to_ascii(mark)).unwrap();
        prop_assert_eq!(parsed.region, region);
        prop_assert_eq!(parsed.base, mark);
    }

    #[test]
    fn temperleyan_polyomino_invariants(h in common::column_convex(4, 4)) {
        let p = temperleyan_from_subgraph(&h);
        // With V - E + F = 1 the cell count V + E + F - 1 equals 2E.
        prop_assert_eq!(p.area(), 2 * h.edges.len());
        prop_assert!(!p.contains(h.base_vertex));
        prop_assert_eq!(p.region.blacks().len(), p.region.whites().len());
        prop_assert!(p.boundary_parity_holds());
        prop_assert!(build_kasteleyn(&p).is_ok());
        let back = TemperleyanPolyomino::from_region(&p.region, h.base_vertex).unwrap();
        prop_assert_eq!(back.graph, h);
    }

    #[test]
    fn polygon_json_round_trips(w in 1u32..40, hgt in 1u32..40, s in 1u32..20) {
        for u in [RectilinearPolygon::rectangle(w as f64 / 8.0, hgt as f64 / 8.0), RectilinearPolygon::l_shape(s as f64 / 4.0)] {
            let back = RectilinearPolygon::from_json(&u.to_json()).unwrap();
            prop_assert_eq!(&back, &u);
            prop_assert!(u.area() > 0.0);
        }
        let r = RectilinearPolygon::rectangle(w as f64, hgt as f64);
        prop_assert_eq!(r.area(), (w * hgt) as f64);
        prop_assert_eq!(r.perimeter(), 2.0 * (w + hgt) as f64);
    }
}

#[test]
fn malformed_ascii_is_rejected() {
    assert!(parse_ascii("#?#\n").is_err());
    assert!(parse_ascii("X#\nX#\n").is_err());
}
