use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use hvp::bumpy::{build, make_bump, BumpySurface, BumpyParams};
use hvp::checks::zero_field;
use hvp::embed::{auto_alpha, distortion_harness, ell, formula_side, lambda_cut, CutMetric, CutMetricConfig, EllConfig, FieldBounds, HarnessConfig, NodeSet};
use hvp::field::{FnField, Quadrature, Region, Window};
use hvp::heis::{Automorphism, HeisPoint};
use hvp::vper::vpp;
use proptest::prelude::*;

fn desk() -> BumpySurface {
    static SURF: OnceLock<BumpySurface> = OnceLock::new();
    SURF.get_or_init(|| build(&BumpyParams::new(2, 8, 3), &make_bump()).unwrap()).clone()
}

fn small_config(seed: u64) -> CutMetricConfig {
    CutMetricConfig {
        k: 64.0,
        alpha: Some(2),
        rho: 8.0,
        r: 0.35,
        big_r: 1.35,
        theta_nodes: 8,
        a_nodes: 8,
        ell: EllConfig::new(64, seed),
    }
}

fn pt(r: f64) -> impl Strategy<Value = HeisPoint> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| HeisPoint::new(x, y, z))
}

#[test]
fn lambda_cut_examples() {
    let f = zero_field();
    let o = HeisPoint::IDENTITY;
    let y = HeisPoint::y_gen(1.0);
    assert_eq!(lambda_cut(o, y, y.inv(), &f), 1);
    assert_eq!(lambda_cut(o, y, y, &f), 0);
    let p = HeisPoint::new(0.3, -0.2, 0.1);
    let h = HeisPoint::new(0.5, 0.4, -1.0);
    assert_eq!(lambda_cut(p, y, h, &f), lambda_cut(p, h, y, &f));
}

#[test]
fn ell_identity_and_symmetry() {
    let s = desk();
    let b = FieldBounds::of_bumpy(&s);
    let cfg = EllConfig::new(2_000, 3);
    let h1 = HeisPoint::new(0.1, 0.02, 0.3);
    let h2 = HeisPoint::new(-0.05, 0.01, 0.25);
    assert_eq!(ell(&s, &b, h1, h1, &cfg).unwrap().value, 0.0);
    let ab = ell(&s, &b, h1, h2, &cfg).unwrap().value;
    let ba = ell(&s, &b, h2, h1, &cfg).unwrap().value;
    assert_eq!(ab, ba);
    assert!(ab > 0.0);
}

#[test]
fn ell_rejects_windowed_fields_and_tiny_budgets() {
    let f = FnField::affine(0.0, 0.1, 0.0, Window::UNIT);
    let b = FieldBounds { psi: (0.0, 0.1), dz: 0.0 };
    assert!(ell(&f, &b, HeisPoint::IDENTITY, HeisPoint::z_gen(0.1), &EllConfig::new(64, 1)).is_err());
    assert!(NodeSet::new(&EllConfig::new(1, 1)).is_err());
}

/// `ell(0, Z^(2^-2a)) = 2^-a vpP(a)`, cross-checked against the vper module.
#[test]
fn ell_matches_vertical_perimeter() {
    let s = desk();
    let b = FieldBounds::of_bumpy(&s);
    let cfg = EllConfig::new(20_000, 5);
    let quad = Quadrature::Midpoint { nx: 256, nz: 1024 };
    for a in [1.25f64, 2.0, 4.0] {
        let e = ell(&s, &b, HeisPoint::IDENTITY, HeisPoint::z_gen((-2.0 * a).exp2()), &cfg).unwrap();
        let want = (-a).exp2() * vpp(&s, &Region::unit(), a, &quad).unwrap();
        assert!((e.value - want).abs() <= 0.02 * want, "a = {a}: {} vs {want}", e.value);
    }
}

#[test]
fn delta_basic_properties() {
    let s = desk();
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(2)).unwrap();
    let h1 = HeisPoint::new(1.0, 2.0, -3.0);
    let h2 = HeisPoint::new(-2.0, 0.5, 4.0);
    assert_eq!(m.delta(h1, h1).value, 0.0);
    assert_eq!(m.delta(h1, h2).value, m.delta(h2, h1).value);
    let d = m.delta(h1, h2);
    assert!(d.value >= d.horizontal);
    assert!(d.err().is_finite());
}

#[test]
fn delta_is_lipschitz_along_horizontal_directions() {
    let s = desk();
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(2)).unwrap();
    let mut worst = 0.0f64;
    for (x, y) in [(1.0, 0.0), (0.0, 1.0), (3.0, 4.0), (0.2, -0.1)] {
        let w = HeisPoint::new(x, y, 0.0);
        let r = m.delta(HeisPoint::IDENTITY, w).value / x.hypot(y);
        assert!(r >= 1.0);
        worst = worst.max(r);
    }
    assert!(worst.is_finite());
    println!("horizontal Lipschitz constant {worst:.4}");
}

#[test]
fn left_invariance_within_error() {
    let s = desk();
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(4)).unwrap();
    let h1 = HeisPoint::new(2.0, -1.0, 5.0);
    let h2 = HeisPoint::new(-1.0, 3.0, -2.0);
    let base = m.delta(h1, h2);
    for g in [HeisPoint::new(0.7, 0.3, -0.4), HeisPoint::new(-5.0, 2.0, 11.0)] {
        let moved = m.delta(g * h1, g * h2);
        let tol = 3.0 * (base.err() + moved.err());
        assert!((moved.value - base.value).abs() <= tol, "{} vs {} (tol {tol})", moved.value, base.value);
    }
}

#[test]
fn rotation_invariance_of_m() {
    let s = desk();
    let mut cfg = small_config(6);
    cfg.theta_nodes = 32;
    cfg.ell = EllConfig::new(512, 6);
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), cfg).unwrap();
    let h1 = HeisPoint::new(0.3, 0.1, 0.02);
    let h2 = HeisPoint::new(-0.1, 0.2, -0.05);
    let base = m.big_m(h1, h2);
    for phi in [0.37, 1.9, 4.4] {
        let r = Automorphism::Rotate { theta: phi };
        let e = m.big_m(r.apply(h1).unwrap(), r.apply(h2).unwrap());
        let tol = 3.0 * (base.stderr.powi(2) + e.stderr.powi(2)).sqrt() + 0.02 * base.value;
        assert!((e.value - base.value).abs() <= tol, "phi {phi}: {} vs {}", e.value, base.value);
    }
}

#[test]
fn center_ratio_is_finite() {
    let s = desk();
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(8)).unwrap();
    for c in [1.0, 64.0, 4096.0] {
        let (r, d) = m.center_ratio(c);
        assert!(r.is_finite() && r > 0.0, "c = {c}: {r}");
        assert_eq!(d.horizontal, 0.0);
    }
}

#[test]
fn alpha_selection() {
    assert_eq!(auto_alpha(65_536.0, 11_484.0).unwrap(), 1);
    for (k, rho) in [(1e6, 8.0f64), (1e30, 8.0), (1e12, 100.0)] {
        let q = ((k / 8.0f64).ln() / rho.ln()).powf(0.25);
        let a = auto_alpha(k, rho).unwrap() as f64;
        assert!((a - q.ceil()).abs() <= 1.0);
    }
    assert!(auto_alpha(4.0, 8.0).is_err());
}

#[test]
fn formula_side_examples() {
    let o = HeisPoint::IDENTITY;
    assert_eq!(formula_side(o, o, 2.0), 0.0);
    assert_abs_diff_eq!(formula_side(o, HeisPoint::z_gen(1.0), 2.0), 2f64.sqrt() / 2.0, epsilon = 1e-15);
    assert_eq!(formula_side(o, HeisPoint::new(1.0, -2.0, 0.0), 1.0), 3.0);
}

#[test]
fn harness_on_radius_one_ball() {
    let s = desk();
    let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(9)).unwrap();
    let rep = distortion_harness(&m, &HarnessConfig { n: 1, max_pairs: 100, seed: 1 }).unwrap();
    assert_eq!(rep.summary.ball_size, 5);
    assert_eq!(rep.summary.pairs, 10);
    assert!(rep.summary.exhaustive);
    assert!(rep.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn triangle_inequality_within_error(a in pt(4.0), b in pt(4.0), c in pt(4.0)) {
        let s = desk();
        let m = CutMetric::new(&s, FieldBounds::of_bumpy(&s), small_config(10)).unwrap();
        let (ab, bc, ac) = (m.delta(a, b), m.delta(b, c), m.delta(a, c));
        let excess = ac.value - ab.value - bc.value;
        prop_assert!(excess <= 3.0 * (ab.err() + bc.err() + ac.err()), "excess {}", excess);
    }
}
