use approx::assert_abs_diff_eq;
use hvp::bumpy::{build, make_bump, BumpyParams};
use hvp::checks::{trig_field, zero_field};
use hvp::corona::{make_pseudoquad, CURVE_STEP};
use hvp::field::{FnField, Region, Transform, Transformed, Window};
use hvp::heis::HorizontalLine;
use hvp::nonmono::{default_slope_cap, default_step, is_paramonotone, line_trace, line_trace_step, omega_hat, omega_p, IntervalSet, OmegaConfig};
use proptest::prelude::*;

fn plane() -> FnField {
    FnField::affine(0.1, 0.4, 0.0, Window::new(-20.0, 20.0, -20.0, 20.0).unwrap())
}

#[test]
fn flat_field_horizontal_line_is_one_ray() {
    let s = line_trace(&zero_field(), &HorizontalLine::new(0.3, 0.0, 0.0), (-4.0, 4.0)).unwrap();
    assert_eq!(s.intervals, vec![(-4.0, 4.0)]);
    assert!(s.left_ray && s.right_ray);
    assert!(s.boundary().is_empty());
}

#[test]
fn flat_field_descending_line_crosses_once() {
    let (y0, m) = (0.3, -0.6);
    let s = line_trace(&zero_field(), &HorizontalLine::new(y0, 0.1, m), (-4.0, 4.0)).unwrap();
    assert_eq!(s.len(), 1);
    assert!(s.left_ray && !s.right_ray);
    assert_abs_diff_eq!(s.intervals[0].1, -y0 / m, epsilon = 1e-9);
}

#[test]
fn omega_hat_examples() {
    let span = (-5.0, 5.0);
    let l = 1.5;
    let seg = IntervalSet::from_crossings(span, &[0.0, l], false);
    assert_abs_diff_eq!(omega_hat(&seg, l, (-1.0, 2.0)), l, epsilon = 1e-15);
    assert_abs_diff_eq!(omega_hat(&seg, 10.0, (-1.0, 2.0)), l, epsilon = 1e-15);
    // one endpoint in the window
    assert_abs_diff_eq!(omega_hat(&seg, l, (-1.0, 1.0)), l / 2.0, epsilon = 1e-15);
    assert_eq!(omega_hat(&seg, 1.0, (-1.0, 2.0)), 0.0);

    let ray = IntervalSet::from_crossings(span, &[0.3], true);
    assert_eq!(omega_hat(&ray, 100.0, span), 0.0);

    let two = IntervalSet::from_crossings(span, &[0.0, 1.0, 2.0, 3.0], false);
    assert_eq!(omega_hat(&two, 0.5, span), 0.0);
}

#[test]
fn interval_set_from_crossings() {
    let s = IntervalSet::from_crossings((0.0, 10.0), &[1.0, 2.0, 5.0], true);
    assert_eq!(s.intervals, vec![(0.0, 1.0), (2.0, 5.0)]);
    assert_eq!(s.boundary(), vec![1.0, 2.0, 5.0]);
    assert!(s.left_ray && !s.right_ray);
}

#[test]
fn vertical_plane_gives_exact_zero() {
    let f = plane();
    let u = Region::unit();
    for seed in [1, 2] {
        let est = omega_p(&f, &u, 1.0, &OmegaConfig::new(20_000, seed)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }
    let mut cfg = OmegaConfig::new(5_000, 3);
    let cap = default_slope_cap(&f, &u, 3).unwrap();
    cfg.m_max = Some(2.0 * cap);
    assert_eq!(omega_p(&f, &u, 1.0, &cfg).unwrap().value, 0.0);
}

#[test]
fn estimate_is_deterministic() {
    let f = trig_field();
    let cfg = OmegaConfig::new(4_000, 9);
    let a = omega_p(&f, &Region::unit(), 0.5, &cfg).unwrap();
    let b = omega_p(&f, &Region::unit(), 0.5, &cfg).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    assert!(a.value >= 0.0 && a.stderr >= 0.0);
}

#[test]
fn rejects_bad_inputs() {
    let f = trig_field();
    assert!(omega_p(&f, &Region::unit(), 0.0, &OmegaConfig::new(100, 1)).is_err());
    assert!(omega_p(&f, &Region::unit(), 1.0, &OmegaConfig::new(0, 1)).is_err());
}

/// Crossing counts against a scan ten times finer.
#[test]
fn bumpy_crossings_match_fine_scan() {
    let s = build(&BumpyParams::new(2, 8, 3), &make_bump()).unwrap();
    let step = default_step(&s);
    for (i, &(yc, m)) in [(0.004, 0.0), (0.006, 0.01), (0.002, -0.02), (0.008, 0.005)].iter().enumerate() {
        let l = HorizontalLine::through(0.5, yc, 0.2 + 0.15 * i as f64, m);
        let coarse = line_trace_step(&s, &l, (0.0, 1.0), step).unwrap();
        let fine = line_trace_step(&s, &l, (0.0, 1.0), step / 10.0).unwrap();
        assert_eq!(coarse.boundary().len(), fine.boundary().len(), "line {i}");
        for (a, b) in coarse.boundary().iter().zip(fine.boundary()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn affine_cells_are_paramonotone() {
    let f = FnField::affine(0.1, 0.5, 0.0, Window::new(-100.0, 100.0, -1.0e4, 1.0e4).unwrap());
    let q = make_pseudoquad(&f, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap();
    let r = is_paramonotone(&f, &q, 1e-6, 8.0, 4.0, &OmegaConfig::new(2_000, 1)).unwrap();
    assert!(r.paramonotone);
    assert_eq!(r.density, 0.0);
}

/// Shears and left translations preserve the measure on lines and the
/// trace structure, so the estimate moves only by Monte Carlo noise.
#[test]
fn invariant_under_shear_and_translation() {
    let u = Region::unit();
    let cfg = OmegaConfig::new(40_000, 21);
    let base = omega_p(&trig_field(), &u, 0.5, &cfg).unwrap();
    assert!(base.value > 0.0);
    for t in [Transform::Shear { b: 0.7 }, Transform::LeftTranslate { x: 0.3, y: -0.2, z: 0.1 }] {
        let moved = Transformed::new(trig_field(), t).unwrap();
        let img = t.image(&u).unwrap();
        let mut c = cfg.clone();
        c.seed = 22;
        let est = omega_p(&moved, &img, 0.5, &c).unwrap();
        let tol = 3.0 * (base.stderr.powi(2) + est.stderr.powi(2)).sqrt();
        assert!((est.value - base.value).abs() <= tol, "{t:?}: {} vs {} (tol {tol})", est.value, base.value);
    }
}

/// Lines steeper than the Lipschitz slope meet the graph once, so doubling
/// the slope cap adds nothing beyond noise.
#[test]
fn slope_cap_beyond_lipschitz_slope_adds_nothing() {
    let f = trig_field();
    let u = Region::unit();
    let cap = default_slope_cap(&f, &u, 5).unwrap();
    let mut a = OmegaConfig::new(40_000, 5);
    a.m_max = Some(cap);
    let mut b = a.clone();
    b.m_max = Some(2.0 * cap);
    b.seed = 6;
    let (ea, eb) = (omega_p(&f, &u, 0.5, &a).unwrap(), omega_p(&f, &u, 0.5, &b).unwrap());
    let tol = 3.0 * (ea.stderr.powi(2) + eb.stderr.powi(2)).sqrt();
    assert!((ea.value - eb.value).abs() <= tol, "{} vs {} (tol {tol})", ea.value, eb.value);
}

proptest! {
    #[test]
    fn omega_hat_monotone_in_radius(cuts in proptest::collection::vec(-4.9f64..4.9, 0..12), inside in any::<bool>(), r1 in 0.0f64..5.0, dr in 0.0f64..5.0) {
        let mut c = cuts;
        c.sort_by(f64::total_cmp);
        c.dedup();
        let s = IntervalSet::from_crossings((-5.0, 5.0), &c, inside);
        let w = (-2.0, 3.0);
        prop_assert!(omega_hat(&s, r1, w) <= omega_hat(&s, r1 + dr, w));
        prop_assert!(omega_hat(&s, r1, w) >= 0.0);
    }

    #[test]
    fn intervals_sorted_and_disjoint(cuts in proptest::collection::vec(-4.9f64..4.9, 0..12), inside in any::<bool>()) {
        let mut c = cuts;
        c.sort_by(f64::total_cmp);
        c.dedup();
        let s = IntervalSet::from_crossings((-5.0, 5.0), &c, inside);
        for w in s.intervals.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        for &(a, b) in &s.intervals {
            prop_assert!(a < b);
        }
    }
}
