use approx::assert_abs_diff_eq;
use hvp::bumpy::{build, make_bump, BumpyParams};
use hvp::checks::{linear_in_z, trig_field, zero_field};
use hvp::field::{GridField, Interp, Quadrature, Region, Transform, Window};
use hvp::vper::{a_grid, lq_norm, profile, scaling_check, vpp, vpp_flagged, Envelope, Evaluation};
use proptest::prelude::*;

const QUAD: Quadrature = Quadrature::Midpoint { nx: 64, nz: 64 };

#[test]
fn zero_field_has_zero_profile() {
    let p = profile(&zero_field(), &Region::unit(), 0.0, 20.0, 40, &QUAD).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.0));
    assert_eq!(lq_norm(&p, 2.0, (0.0, 20.0)).unwrap(), 0.0);
}

#[test]
fn linear_field_profile_is_two_to_minus_a() {
    let p = profile(&linear_in_z(), &Region::unit(), 0.0, 12.0, 48, &QUAD).unwrap();
    for (a, v) in p.a.iter().zip(&p.values) {
        assert_abs_diff_eq!(*v, (-a).exp2(), epsilon = 1e-12);
    }
}

#[test]
fn linear_field_l2_norm() {
    let p = profile(&linear_in_z(), &Region::unit(), 0.0, 30.0, 2880, &QUAD).unwrap();
    // int_0^inf 4^-a da = 1 / ln 4; the tail beyond 30 is below 1e-18
    assert_abs_diff_eq!(lq_norm(&p, 2.0, (0.0, 30.0)).unwrap(), (1.0 / 4f64.ln()).sqrt(), epsilon = 1e-3);
}

#[test]
fn additive_over_disjoint_regions() {
    let f = trig_field();
    let lower = Region::Rect(Window::new(0.0, 1.0, 0.0, 0.5).unwrap());
    let upper = Region::Rect(Window::new(0.0, 1.0, 0.5, 1.0).unwrap());
    let half = Quadrature::Midpoint { nx: 64, nz: 32 };
    for a in [0.5, 2.0, 5.0] {
        let whole = vpp(&f, &Region::unit(), a, &QUAD).unwrap();
        let parts = vpp(&f, &lower, a, &half).unwrap() + vpp(&f, &upper, a, &half).unwrap();
        assert_abs_diff_eq!(whole, parts, epsilon = 1e-13 * whole.max(1.0));
    }
}

#[test]
fn shear_leaves_linear_profile_unchanged() {
    let a: Vec<f64> = (0..8).map(|i| 0.5 * i as f64).collect();
    let r = scaling_check(linear_in_z(), &Region::unit(), &a, Transform::Shear { b: 1.0 }, &QUAD, Evaluation::Pullback).unwrap();
    assert!(r.max_rel_dev < 1e-6, "{}", r.max_rel_dev);
}

#[test]
fn stretch_law_factor_and_shift() {
    let a: Vec<f64> = (0..6).map(|i| 0.25 + 0.5 * i as f64).collect();
    let q = Quadrature::Midpoint { nx: 128, nz: 128 };
    let r = scaling_check(trig_field(), &Region::unit(), &a, Transform::Stretch { a: 2.0, b: 2.0 }, &q, Evaluation::Pullback).unwrap();
    assert!(r.max_rel_dev < 1e-6, "{}", r.max_rel_dev);
    // factor |ab|^(3/2) = 8 at a shift of log2 sqrt(ab) = 1
    let base = vpp(&trig_field(), &Region::unit(), a[2] + 1.0, &q).unwrap();
    assert_abs_diff_eq!(r.predicted[2], 8.0 * base, epsilon = 1e-12);
}

#[test]
fn sampled_stretch_within_one_percent() {
    let a: Vec<f64> = (0..5).map(|i| 0.25 + 0.5 * i as f64).collect();
    let q = Quadrature::Midpoint { nx: 128, nz: 128 };
    let r = scaling_check(trig_field(), &Region::unit(), &a, Transform::Stretch { a: 3.0, b: 0.5 }, &q, Evaluation::Resample { nx: 256, nz: 512 }).unwrap();
    assert!(r.max_rel_dev < 0.01, "{}", r.max_rel_dev);
}

#[test]
fn sub_cell_shift_switches_to_bicubic() {
    use std::f64::consts::TAU;
    let g = GridField::from_fn(64, 64, Window::new(0.0, 1.0, -1.0, 1.0).unwrap(), false, Interp::Bilinear, |x, z| 0.05 * (TAU * (x + z)).sin()).unwrap();
    let (_, coarse) = vpp_flagged(&g, &Region::unit(), 0.5, &QUAD).unwrap();
    let (_, fine) = vpp_flagged(&g, &Region::unit(), 6.0, &QUAD).unwrap();
    assert!(!coarse);
    assert!(fine);
    // shifted region leaves the window
    assert!(vpp(&g, &Region::unit(), -1.0, &QUAD).is_err());
}

#[test]
fn bumpy_value_stable_under_refinement() {
    let s = build(&BumpyParams::new(2, 8, 3), &make_bump()).unwrap();
    for a in [2.0, 4.0, 6.5] {
        let coarse = vpp(&s, &Region::unit(), a, &Quadrature::Stratified { nx: 256, nz: 256, seed: 4 }).unwrap();
        let fine = vpp(&s, &Region::unit(), a, &Quadrature::Stratified { nx: 512, nz: 512, seed: 4 }).unwrap();
        assert!((coarse - fine).abs() < 0.02 * fine, "a = {a}: {coarse} vs {fine}");
    }
}

#[test]
fn a_grid_rejects_bad_ranges() {
    assert!(a_grid(1.0, 1.0, 4).is_err());
    assert!(a_grid(0.0, 1.0, 0).is_err());
    assert_eq!(a_grid(0.0, 1.0, 4).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nonnegative_and_within_envelope(a in -1.0f64..12.0) {
        let f = trig_field();
        let u = Region::unit();
        let v = vpp(&f, &u, a, &QUAD).unwrap();
        let env = Envelope::estimate(&f, &u, &QUAD);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= env.at(a, 1.0) + 1e-9, "{} > {}", v, env.at(a, 1.0));
    }

    #[test]
    fn linear_field_envelope_is_tight_at_fine_scales(a in 2.0f64..20.0) {
        let f = linear_in_z();
        let env = Envelope::estimate(&f, &Region::unit(), &QUAD);
        let v = vpp(&f, &Region::unit(), a, &QUAD).unwrap();
        prop_assert!((v - env.at(a, 1.0)).abs() <= 1e-9);
    }
}
