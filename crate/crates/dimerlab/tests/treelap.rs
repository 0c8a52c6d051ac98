mod common;

use dimerlab::treelap::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trees_equal_tilings(h in common::column_convex(5, 4)) {
        let check = verify_temperley(&h).unwrap();
        prop_assert!(check.equal, "{} trees vs {} tilings", check.trees, check.tilings);
    }

    #[test]
    fn tree_count_does_not_depend_on_the_root(h in common::column_convex(4, 4)) {
        let (g, _) = Graph::from_grid(&h);
        let first = graph_tree_count(&g, 0).unwrap();
        for r in 1..g.n {
            prop_assert_eq!(&graph_tree_count(&g, r).unwrap(), &first);
        }
    }
}

#[test]
fn grid_graph_tree_counts() {
    // Spanning trees of the m x n grid graph.
    let known = [((2, 2), 4u64), ((2, 3), 15), ((3, 3), 192), ((3, 4), 2415), ((4, 4), 100352)];
    for ((m, n), t) in known {
        let h = dimerlab::region::GridSubgraph::grid(m, n);
        assert_eq!(spanning_tree_count(&h).unwrap(), t.into(), "{m}x{n}");
    }
}
