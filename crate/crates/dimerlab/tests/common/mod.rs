//! Shared strategies for the integration tests.

use dimerlab::region::GridSubgraph;
use proptest::prelude::*;

/// Column-convex vertex sets in `2Z^2`: consecutive columns are intervals that
/// overlap, so the induced subgraph is connected and simply connected.
pub fn column_convex(max_cols: usize, max_height: i32) -> impl Strategy<Value = GridSubgraph> {
    prop::collection::vec((0..max_height, 1..=max_height), 1..=max_cols).prop_map(move |cols| {
        let mut spans: Vec<(i32, i32)> = Vec::new();
        for (start, len) in cols {
            let (mut lo, mut hi) = (start, (start + len - 1).min(max_height - 1));
            if let Some(&(plo, phi)) = spans.last() {
                // Force an overlap with the previous column.
                if hi < plo {
                    hi = plo;
                }
                if lo > phi {
                    lo = phi;
                }
            }
            spans.push((lo, hi));
        }
        let vertices: Vec<(i32, i32)> =
            spans.iter().enumerate().flat_map(|(i, &(lo, hi))| (lo..=hi).map(move |j| (2 * i as i32, 2 * j))).collect();
        GridSubgraph::induced(vertices, (0, 2 * spans[0].0)).expect("column-convex sets are simply connected")
    })
}
