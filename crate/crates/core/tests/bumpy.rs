use approx::assert_abs_diff_eq;
use std::sync::OnceLock;

use hvp::bumpy::{build, calibrate, make_bump, verify_internal, BumpyParams, BumpySurface};
use hvp::field::Surface;
use proptest::prelude::*;

fn desk() -> BumpySurface {
    static SURF: OnceLock<BumpySurface> = OnceLock::new();
    SURF.get_or_init(|| build(&BumpyParams::new(2, 8, 3), &make_bump()).unwrap()).clone()
}

#[test]
fn prototype_support_and_peak() {
    let b = make_bump();
    for t in [0.0, 0.25, 0.5, 1.0] {
        assert_eq!(b.value(0.0, t), 0.0);
        assert_eq!(b.value(1.0, t), 0.0);
        assert_eq!(b.value(t, 0.0), 0.0);
        assert_eq!(b.value(t, 1.0), 0.0);
    }
    assert!(b.value(0.5, 0.5) > 0.0);
    assert_eq!(b.value(0.5, 0.5), b.max_value());
    assert!(b.sup_bounds().iter().all(|&m| m <= 1.0));
}

/// Second x-derivative by central differences of values on a 4096-squared
/// grid, independent of the closed-form derivatives.
#[test]
fn second_derivative_grid_max_at_most_one() {
    let b = make_bump();
    let n = 4096;
    let h = 1.0 / (n - 1) as f64;
    let e = 1e-4;
    // beta is a product, so the z-factor peaks where b does
    let mut worst = 0.0f64;
    for iz in (0..n).step_by(64) {
        let z = iz as f64 * h;
        for ix in 1..n - 1 {
            let x = ix as f64 * h;
            let d2 = (b.value(x + e, z) - 2.0 * b.value(x, z) + b.value(x - e, z)) / (e * e);
            worst = worst.max(d2.abs());
        }
    }
    for ix in 1..n - 1 {
        let x = ix as f64 * h;
        let d2 = (b.value(x + e, 0.5) - 2.0 * b.value(x, 0.5) + b.value(x - e, 0.5)) / (e * e);
        worst = worst.max(d2.abs());
    }
    assert!(worst <= 1.0 + 1e-3, "{worst}");
    assert!(worst >= 0.9, "{worst}");
}

#[test]
fn calibration_constants() {
    let p = make_bump();
    let c = calibrate(&p, 96).unwrap();
    assert!(c.eta > 0.0);
    assert!(c.r < c.big_r);
    assert!(c.rho >= 8);
    assert!(c.rho as f64 >= 12.0 / (c.r.exp2() * c.eta) - 1.0);
    let fine = calibrate(&p, 192).unwrap();
    assert!((fine.eta - c.eta).abs() < 0.02 * c.eta, "{} vs {}", fine.eta, c.eta);
    assert!(calibrate(&p, 1).is_err());
}

#[test]
fn first_layer_cells_are_rectangles() {
    let s = desk();
    let r0 = &s.reports()[0];
    assert_eq!(r0.cell_width, 1.0);
    assert_eq!(r0.cell_height, 0.25);
    assert_eq!((r0.dzdt_min, r0.dzdt_max), (1.0, 1.0));
    // psi_0 = 0 has horizontal characteristics, so beta_0 is an exact rescaled bump
    let b = make_bump();
    for (x, z) in [(0.3, 0.1f64), (0.5, 0.125), (0.71, 0.6)] {
        let want = 0.25 * b.value(x, (4.0 * z).fract());
        assert_abs_diff_eq!(s.layer(0, x, z).0, want, epsilon = 1e-15);
    }
}

#[test]
fn layer_amplitudes() {
    let s = desk();
    let b = make_bump();
    for j in 0..s.layers() {
        let amp = 0.25 * 8f64.powi(-(j as i32));
        let x = 0.5 * 8f64.powi(-(j as i32));
        let n = 200_000;
        let peak = (0..n).map(|k| s.layer(j, x, k as f64 / n as f64).0.abs()).fold(0.0, f64::max);
        assert!(peak <= amp * b.max_value() * (1.0 + 1e-12), "layer {j}");
        assert!(peak >= amp * b.max_value() * 0.999, "layer {j}: {peak}");
    }
}

#[test]
fn sup_bound_chain() {
    let s = desk();
    assert_eq!(s.layers(), 3);
    assert!(s.sup_bound() <= 0.25 / 7.0);
    for i in 0..=3 {
        assert!(s.partial(i).sup_bound() <= s.sup_bound());
    }
}

#[test]
fn flow_cells_keep_dz_dt_near_one() {
    let s = desk();
    for r in s.reports() {
        assert!(r.dzdt_min > 0.75 && r.dzdt_max < 4.0 / 3.0, "{r:?}");
    }
}

#[test]
fn zero_partial_has_zero_diagnostics() {
    let s = desk().partial(0);
    let rep = verify_internal(&s, 64, 1).unwrap();
    assert_eq!(rep.layers, 0);
    assert!(rep.sup_sampled.iter().all(|&v| v == 0.0));
    assert_eq!(rep.boundary_max, 0.0);
}

#[test]
fn internal_bounds_at_moderate_grid() {
    let rep = verify_internal(&desk(), 512, 7).unwrap();
    assert!(rep.dzdt_min > 0.75 && rep.dzdt_max < 4.0 / 3.0);
    assert!(rep.d_sup.iter().all(|&d| d <= 3.0 * 0.25 * 1.02));
    assert!(rep.sqrt_constant <= 5.0);
    assert!(rep.boundary_max < 1e-12);
    assert!(rep.period_defect < 1e-12);
}

#[test]
fn layer_budget_and_validation() {
    assert_eq!(BumpyParams::new(2, 11484, 16).feasible_layers(), 2);
    assert_eq!(BumpyParams::new(3, 11484, 81).feasible_layers(), 2);
    assert_eq!(BumpyParams::new(1, 11484, 16).feasible_layers(), 1);
    assert!(BumpyParams::new(2, 8, 40).feasible_layers() <= 16);
    assert_eq!(BumpyParams::new(2, 8, 3).feasible_layers(), 3);
    assert!(build(&BumpyParams::new(2, 7, 2), &make_bump()).is_err());
    assert!(build(&BumpyParams::new(0, 8, 2), &make_bump()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_in_both_directions(x in 0.0f64..1.0, z in 0.0f64..1.0) {
        let s = desk();
        let v = s.value(x, z);
        prop_assert!((s.value(x + 1.0, z) - v).abs() < 1e-12);
        prop_assert!((s.value(x, z + 1.0) - v).abs() < 1e-12);
        prop_assert!((s.value(x, z - 1.0) - v).abs() < 1e-12);
    }

    #[test]
    fn vanishes_on_unit_square_boundary(t in 0.0f64..1.0) {
        let s = desk();
        for (x, z) in [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)] {
            prop_assert!(s.value(x, z).abs() < 1e-12);
        }
    }

    /// Five-point central differences at a small step: the top layer varies
    /// on a z-scale near 1e-5.
    #[test]
    fn gradient_matches_finite_differences(x in 0.05f64..0.95, z in 0.05f64..0.95) {
        let s = desk();
        let (_, gx, gz) = s.eval_grad(x, z);
        let h = 1e-7;
        let d = |f: &dyn Fn(f64) -> f64| (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
        let fx = d(&|e| s.value(x + e, z));
        let fz = d(&|e| s.value(x, z + e));
        prop_assert!((gx - fx).abs() < 1e-5 * (1.0 + gx.abs()), "{} {}", gx, fx);
        prop_assert!((gz - fz).abs() < 1e-5 * (1.0 + gz.abs()), "{} {}", gz, fz);
    }
}
