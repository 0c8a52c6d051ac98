use std::collections::{BTreeMap, HashMap};

use dimerlab::lerw::*;
use dimerlab::region::{temperleyan_rectangle, GridSubgraph};
use dimerlab::treelap::{graph_tree_count, Graph};
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn cycle4() -> Graph {
    Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])
}

fn grid(m: i32, n: i32) -> Graph {
    Graph::from_grid(&GridSubgraph::grid(m, n)).0
}

/// Chi-square critical values at p = 0.001 (3 and 14 degrees of freedom).
fn chi2_critical(df: usize) -> f64 {
    match df {
        3 => 16.266,
        14 => 36.123,
        _ => unreachable!(),
    }
}

fn check_uniform(g: &Graph, samples: u64) {
    let trees = enumerate_spanning_trees(g, 0, 1000).unwrap();
    assert_eq!(trees.len() as u64, graph_tree_count(g, 0).unwrap().to_u64().unwrap());
    let mut freq: HashMap<Vec<Option<usize>>, u64> = trees.iter().map(|t| (t.parent.clone(), 0)).collect();
    for s in 0..samples {
        let t = sample_ust(g, 0, s).unwrap();
        *freq.get_mut(&t.parent).expect("sample is a spanning tree") += 1;
    }
    let k = trees.len() as f64;
    let (e, p) = (samples as f64 / k, 1.0 / k);
    let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
    let mut chi2 = 0.0;
    for &c in freq.values() {
        assert!((c as f64 - e).abs() < 4.0 * sigma, "{c} vs {e}");
        chi2 += (c as f64 - e).powi(2) / e;
    }
    assert!(chi2 < chi2_critical(trees.len() - 1), "chi2 {chi2}");
}

#[test]
fn ust_is_uniform_on_the_four_cycle() {
    check_uniform(&cycle4(), 40_000);
}

#[test]
fn ust_is_uniform_on_the_two_by_three_grid() {
    let g = grid(2, 3);
    assert_eq!(enumerate_spanning_trees(&g, 0, 100).unwrap().len(), 15);
    check_uniform(&g, 40_000);
}

fn branch_matches_lerw(g: &Graph, source: usize, samples: u64) {
    let mut from_tree: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut direct: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for s in 0..samples {
        *from_tree.entry(branch(&sample_ust(g, 0, s).unwrap(), source).unwrap().vertices).or_default() += 1.0;
        *direct.entry(sample_lerw(g, source, 0, s + samples).unwrap().vertices).or_default() += 1.0;
    }
    let n = samples as f64;
    for path in from_tree.keys().chain(direct.keys()) {
        let (a, b) = (from_tree.get(path).copied().unwrap_or(0.0) / n, direct.get(path).copied().unwrap_or(0.0) / n);
        let p = (a + b) / 2.0;
        let sigma = (2.0 * p * (1.0 - p) / n).sqrt();
        assert!((a - b).abs() < 4.0 * sigma.max(1.0 / n), "{path:?}: {a} vs {b}");
    }
}

#[test]
fn branch_of_ust_has_the_lerw_distribution() {
    branch_matches_lerw(&cycle4(), 2, 10_000);
    branch_matches_lerw(&grid(2, 3), 5, 10_000);
}

#[test]
fn branch_is_a_self_avoiding_walk_at_least_as_long_as_the_distance() {
    let g = grid(4, 4);
    for s in 0..50 {
        let t = sample_ust(&g, 0, s).unwrap();
        assert!(t.is_spanning_tree(&g));
        for v in 0..g.n {
            let p = branch(&t, v).unwrap();
            assert!(p.is_self_avoiding() && p.is_walk_in(&g));
            let (x, y) = (v % 4, v / 4);
            assert!(p.len() > x + y);
        }
    }
}

#[test]
fn two_hole_bijection_holds_for_every_boundary_pair() {
    for m in [2, 3] {
        let p = temperleyan_rectangle(m, m);
        let pairs = boundary_pairs(&p);
        assert!(!pairs.is_empty());
        for c in two_hole_checks(&p, &pairs).unwrap() {
            assert!(c.equal, "{c:?}");
        }
    }
}

#[test]
fn interior_black_hole_is_unsupported() {
    let p = temperleyan_rectangle(3, 3);
    assert_eq!(two_hole_bijection_check(&p, (2, 2), (3, 2)), Err(LerwError::BNotOnBoundary((2, 2))));
}

#[test]
fn growth_fit_is_deterministic_and_its_error_scales() {
    let a = growth_exponent(&[8, 16, 32, 64], 200, 11).unwrap();
    assert_eq!(a, growth_exponent(&[8, 16, 32, 64], 200, 11).unwrap());
    // Doubling the walkers shrinks the bootstrap error by about √2.
    let b = growth_exponent(&[8, 16, 32, 64], 400, 11).unwrap();
    let ratio = a.standard_error / b.standard_error;
    assert!((1.15..1.75).contains(&ratio), "{ratio}");
    assert!(matches!(growth_exponent(&[8, 16, 32], 10, 1), Err(LerwError::BadSizes(_))));
    assert!(matches!(growth_exponent(&[8, 16, 32, 64], 1, 1), Err(LerwError::InsufficientSamples { .. })));
}

#[test]
fn angular_profile_is_reflection_symmetric() {
    let prof = angular_profile(64, 2000, ProfileBins { radial: 3, angular: 5 }, 5).unwrap();
    let a = &prof.angular;
    for j in 0..a.len() / 2 {
        let (l, r) = (&a[j], &a[a.len() - 1 - j]);
        assert!((l.theta + r.theta).abs() < 1e-12);
        let s = (l.standard_error.powi(2) + r.standard_error.powi(2)).sqrt();
        assert!((l.frequency - r.frequency).abs() < 3.0 * s, "{l:?} {r:?}");
    }
    assert!(matches!(angular_profile(64, 100, ProfileBins { radial: 3, angular: 4 }, 5), Err(LerwError::InvalidParameter(_))));
}

#[test]
fn ratio_experiment_slope_and_symmetry() {
    let fit = ratio_experiment(&[0.25, 0.5, 1.0], &[-0.5, 0.0, 0.5], &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 2.0).unwrap();
    let c = fit.coefficients.unwrap();
    assert!((-0.80..=-0.70).contains(&c[1]), "{c:?}");
    assert!(c[3] < 0.0, "{c:?}");
    // At α = 1/4 the white hole sits 3 to 15 cells from the boundary, where lattice
    // corrections still move the slope by about 0.1; the fit above absorbs them.
    for s in fit.eps_slopes.iter().filter(|s| s.alpha / 16.0f64.recip() >= 8.0) {
        assert!((-0.80..=-0.70).contains(&s.slope), "{s:?}");
    }
    for p in fit.points.iter().filter(|p| p.beta > 0.0) {
        let q = fit.points.iter().find(|q| q.alpha == p.alpha && q.beta == -p.beta && q.eps == p.eps).unwrap();
        assert!((p.log_ratio - q.log_ratio).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loop_erasure_is_idempotent_and_self_avoiding(steps in proptest::collection::vec(0u8..4, 0..200)) {
        // Random walk on a 5x5 grid graph, clamped moves skipped.
        let g = grid(5, 5);
        let mut v = 12usize;
        let mut walk = vec![v];
        for s in steps {
            let (x, y) = ((v % 5) as i32, (v / 5) as i32);
            let (nx, ny) = match s { 0 => (x + 1, y), 1 => (x - 1, y), 2 => (x, y + 1), _ => (x, y - 1) };
            if (0..5).contains(&nx) && (0..5).contains(&ny) {
                v = (ny * 5 + nx) as usize;
                walk.push(v);
            }
        }
        let once = loop_erase(&walk);
        prop_assert!(once.is_self_avoiding() && once.is_walk_in(&g));
        prop_assert_eq!(once.vertices.first(), walk.first());
        prop_assert_eq!(once.vertices.last(), walk.last());
        prop_assert_eq!(loop_erase(&once.vertices), once);
    }

    #[test]
    fn wilson_output_is_a_deterministic_spanning_tree(m in 1i32..5, n in 2i32..5, root in 0usize..20, seed in any::<u64>()) {
        let g = grid(m, n);
        let root = root % g.n;
        let t = sample_ust(&g, root, seed).unwrap();
        prop_assert!(t.is_spanning_tree(&g));
        prop_assert_eq!(t.edges().len(), g.n - 1);
        prop_assert_eq!(sample_ust(&g, root, seed).unwrap(), t);
    }
}
