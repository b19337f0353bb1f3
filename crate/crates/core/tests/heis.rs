use approx::assert_abs_diff_eq;
use hvp::heis::{apply_chain, cc_bounds, cc_upper_sharp, Automorphism, HeisPoint, HorizontalLine};
use proptest::prelude::*;

fn close(p: HeisPoint, q: HeisPoint, tol: f64) -> bool {
    let scale = 1.0 + p.x.abs().max(p.y.abs()).max(p.z.abs());
    (p.x - q.x).abs().max((p.y - q.y).abs()).max((p.z - q.z).abs()) <= tol * scale
}

fn pt(r: f64) -> impl Strategy<Value = HeisPoint> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| HeisPoint::new(x, y, z))
}

#[test]
fn product_examples() {
    assert_eq!(HeisPoint::new(1.0, 0.0, 0.0) * HeisPoint::new(0.0, 1.0, 0.0), HeisPoint::new(1.0, 1.0, 0.5));
    let p = HeisPoint::new(0.3, -1.2, 2.5);
    assert_eq!(p * HeisPoint::new(0.0, 0.0, 0.75), HeisPoint::new(0.3, -1.2, 3.25));
    assert_eq!(HeisPoint::IDENTITY * p, p);
}

#[test]
fn inverse_examples() {
    assert_eq!(HeisPoint::new(1.0, 2.0, 3.0).inv(), HeisPoint::new(-1.0, -2.0, -3.0));
    assert_eq!(HeisPoint::IDENTITY.inv(), HeisPoint::IDENTITY);
}

#[test]
fn projection_examples() {
    assert_eq!(HeisPoint::new(1.0, 2.0, 3.0).project_v0(), HeisPoint::new(1.0, 0.0, 2.0));
    assert_eq!(HeisPoint::new(0.0, 7.0, -2.0).project_v0(), HeisPoint::new(0.0, 0.0, -2.0));
}

#[test]
fn automorphism_examples() {
    let p = HeisPoint::new(1.0, 1.0, 1.0);
    assert_eq!(Automorphism::stretch(2.0, 3.0).unwrap().apply(p).unwrap(), HeisPoint::new(2.0, 3.0, 6.0));
    assert_eq!(Automorphism::Shear { b: 2.0 }.apply(HeisPoint::new(1.0, 0.0, 0.0)).unwrap(), HeisPoint::new(1.0, 2.0, 0.0));
    let q = Automorphism::Rotate { theta: std::f64::consts::PI }.apply(HeisPoint::new(0.4, -1.5, 2.0)).unwrap();
    assert!(close(q, HeisPoint::new(-0.4, 1.5, 2.0), 1e-15));
    assert!(Automorphism::stretch(0.0, 1.0).is_err());
    assert!(Automorphism::Stretch { a: 1.0, b: 0.0 }.apply(p).is_err());
}

#[test]
fn induced_maps_on_vertical_plane() {
    let (x, z) = (0.7, -0.3);
    let (a, b) = (2.0, -1.5);
    let got = Automorphism::stretch(a, b).unwrap().induced_v0(x, z).unwrap();
    assert_abs_diff_eq!(got.0, a * x, epsilon = 1e-15);
    assert_abs_diff_eq!(got.1, a * b * z, epsilon = 1e-15);
    let got = Automorphism::Shear { b }.induced_v0(x, z).unwrap();
    assert_abs_diff_eq!(got.0, x, epsilon = 1e-15);
    assert_abs_diff_eq!(got.1, z - b * x * x / 2.0, epsilon = 1e-15);
    let got = Automorphism::LeftTranslate(HeisPoint::z_gen(0.25)).induced_v0(x, z).unwrap();
    assert_abs_diff_eq!(got.1, z + 0.25, epsilon = 1e-15);
}

#[test]
fn cc_bound_examples() {
    assert_eq!(cc_bounds(HeisPoint::new(1.0, 0.0, 0.0)), (1.0, 1.0));
    assert_eq!(cc_bounds(HeisPoint::new(0.0, 0.0, 1.0)), (1.0, 4.0));
    assert_eq!(cc_bounds(HeisPoint::IDENTITY), (0.0, 0.0));
    // a circle of area 1 has perimeter 2 sqrt(pi)
    assert_abs_diff_eq!(cc_upper_sharp(HeisPoint::new(0.0, 0.0, 1.0)), 2.0 * std::f64::consts::PI.sqrt(), epsilon = 1e-15);
}

#[test]
fn line_parametrisation() {
    let l = HorizontalLine::new(0.4, -0.2, 1.3);
    for t in [-2.0, -0.5, 0.0, 0.7, 3.0] {
        let p = l.point(t);
        assert_abs_diff_eq!(p.x, t, epsilon = 1e-15);
        assert_abs_diff_eq!(p.project_v0().z, l.g(t), epsilon = 1e-13);
        assert_abs_diff_eq!(p.y, -l.g_prime(t), epsilon = 1e-13);
    }
    let m = HorizontalLine::through(0.6, -0.1, 0.3, 0.8);
    let p = m.point(0.6);
    assert_abs_diff_eq!(p.y, -0.1, epsilon = 1e-15);
    assert_abs_diff_eq!(p.project_v0().z, 0.3, epsilon = 1e-15);
}

proptest! {
    #[test]
    fn associativity(p in pt(10.0), q in pt(10.0), r in pt(10.0)) {
        prop_assert!(close((p * q) * r, p * (q * r), 1e-12));
    }

    #[test]
    fn inverse_and_involution(p in pt(10.0)) {
        prop_assert!(close(p * p.inv(), HeisPoint::IDENTITY, 1e-12));
        prop_assert_eq!(p.inv().inv(), p);
    }

    #[test]
    fn projection_idempotent(p in pt(10.0)) {
        let v = p.project_v0();
        prop_assert!(close(v.project_v0(), v, 1e-12));
    }

    #[test]
    fn automorphisms_are_homomorphisms(p in pt(5.0), q in pt(5.0), a in 0.2f64..3.0, b in -3.0f64..3.0, th in 0.0f64..6.3) {
        for f in [Automorphism::Stretch { a, b: b + 4.0 }, Automorphism::Shear { b }, Automorphism::Rotate { theta: th }] {
            let lhs = f.apply(p * q).unwrap();
            let rhs = f.apply(p).unwrap() * f.apply(q).unwrap();
            prop_assert!(close(lhs, rhs, 1e-12));
        }
    }

    /// Coset-preserving maps commute with the projection: `Π q = Π q Π`.
    #[test]
    fn projection_commutes_with_coset_maps(p in pt(5.0), a in 0.2f64..3.0, b in -3.0f64..3.0, g in pt(2.0)) {
        let maps = [Automorphism::Stretch { a, b: b + 4.0 }, Automorphism::Shear { b }, Automorphism::LeftTranslate(g)];
        for f in maps {
            let lhs = f.apply(p).unwrap().project_v0();
            let rhs = f.apply(p.project_v0()).unwrap().project_v0();
            prop_assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn ball_box_chain(p in pt(20.0)) {
        let (lo, hi) = cc_bounds(p);
        prop_assert!(lo <= hi && hi <= 4.0 * lo + 1e-12);
        let sharp = cc_upper_sharp(p);
        prop_assert!(lo <= sharp + 1e-12 && sharp <= hi);
    }

    #[test]
    fn chain_applies_in_order(p in pt(3.0), b in -2.0f64..2.0) {
        let chain = [Automorphism::Shear { b }, Automorphism::Stretch { a: 2.0, b: 0.5 }];
        let want = chain[1].apply(chain[0].apply(p).unwrap()).unwrap();
        prop_assert_eq!(apply_chain(&chain, p).unwrap(), want);
    }
}
