use dimerlab::slitgreens::*;
use proptest::prelude::*;

#[test]
fn two_field_construction_matches_the_direct_solve() {
    let b = SlitBox::new(256).unwrap();
    let c = fn_construction(32, &b).unwrap();
    assert!(c.max_difference <= 1e-6, "{}", c.max_difference);
    assert!(c.assembled.residual < 1e-9);
    // Without the shift in the neighbours of -1 the normalisation is wrong by about 40%.
    assert!(c.unshifted_max_difference > 1e-2);
    for f in [&c.f_n, &c.f_n1] {
        assert!(f.values.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }
}

#[test]
fn direct_solve_boundary_and_source() {
    let m = 64;
    let g = slit_greens(&SlitBox::new(m).unwrap());
    let m = m as i64;
    for x in -m..=-1 {
        assert_eq!(g.get(x, 0), 0.0);
    }
    for t in -m..=m {
        for (x, y) in [(t, m), (t, -m), (m, t), (-m, t)] {
            assert_eq!(g.get(x, y), 0.0);
        }
    }
    assert!((g.laplacian(0, 0) - 1.0).abs() < 1e-10);
    assert!(g.residual < 1e-10);
}

#[test]
fn decay_along_the_axis_and_reflection_symmetry() {
    let m = 128i64;
    let g = slit_greens(&SlitBox::new(m as usize).unwrap());
    for x in 2..m {
        assert!(g.get(x + 1, 0).abs() < g.get(x, 0).abs());
    }
    for y in 1..=m {
        for x in -m..=m {
            assert!((g.get(x, y) - g.get(x, -y)).abs() < 1e-10);
        }
    }
}

#[test]
fn box_effect_on_the_sqrt_profile_shrinks_as_the_box_grows() {
    // |G(0,x)|√x at fixed x moves less each time the box doubles, and the droop over
    // [8, 16] flattens.
    let g: Vec<SlitField> = [64, 128, 256].iter().map(|&m| slit_greens(&SlitBox::new(m).unwrap())).collect();
    let at = |f: &SlitField| plateau(f, 4, 8).max;
    let (d1, d2) = ((at(&g[1]) - at(&g[0])).abs(), (at(&g[2]) - at(&g[1])).abs());
    assert!(d2 < 0.6 * d1, "{d1} {d2}");
    assert!(plateau(&g[2], 8, 16).deviation < plateau(&g[1], 8, 16).deviation);
    assert!(plateau(&g[1], 8, 16).deviation < plateau(&g[0], 8, 16).deviation);
}

#[test]
fn kesten_products_flatten_as_the_box_grows() {
    let spread = |m| {
        let t = kesten_trend(&[2, 4, 8], &SlitBox::new(m).unwrap()).unwrap();
        let v: Vec<f64> = t.iter().map(|p| p.1).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (a, b) = (spread(64), spread(128));
    assert!(b < a, "{a} {b}");
    assert!(matches!(kesten_trend(&[16], &SlitBox::new(64).unwrap()), Err(SlitError::BadN { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn assembly_is_exact_for_any_admissible_n(m in 16usize..40, n in 1usize..4) {
        let b = SlitBox::new(m).unwrap();
        let c = fn_construction(n, &b).unwrap();
        prop_assert!(c.max_difference < 1e-9);
        prop_assert!(c.denominator > 0.0);
    }
}
