use approx::assert_abs_diff_eq;
use hvp::bumpy::{build, make_bump, BumpyParams};
use hvp::checks::{linear_in_z, zero_field};
use hvp::corona::{approx_plane, make_pseudoquad, subdivide, vper_bound_check, CoronaConfig, Cut, Node, PatchworkTree, Pseudoquad, CURVE_STEP};
use hvp::field::{FnField, Quadrature, Surface, Window};

fn affine() -> FnField {
    FnField::affine(0.1, 0.5, 0.0, Window::new(-100.0, 100.0, -1.0e4, 1.0e4).unwrap())
}

fn unit_square() -> Pseudoquad {
    make_pseudoquad(&zero_field(), (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap()
}

fn small_config(depth: usize) -> CoronaConfig {
    let mut cfg = CoronaConfig::new(17);
    cfg.max_depth = depth;
    cfg.omega.nsamples = 512;
    cfg
}

#[test]
fn flat_field_gives_rectangles() {
    let q = make_pseudoquad(&zero_field(), (0.0, 2.0), (1.0, 0.2), (1.0, 0.9), CURVE_STEP).unwrap();
    assert_abs_diff_eq!(q.h[0], 0.55, epsilon = 1e-12);
    assert_abs_diff_eq!(q.h[1], 0.0, epsilon = 1e-10);
    assert_abs_diff_eq!(q.h[2], 0.0, epsilon = 1e-10);
    assert_abs_diff_eq!(q.half_height, 0.35, epsilon = 1e-12);
    assert_abs_diff_eq!(q.area(), 1.4, epsilon = 1e-12);
    assert!(q.rectilinearity < 1e-10);
}

#[test]
fn affine_field_gives_parallel_parabolas() {
    let f = affine();
    let q = make_pseudoquad(&f, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap();
    // g' = -(0.1 + 0.5 x), so both curves have curvature -1/4
    assert_abs_diff_eq!(q.h[2], -0.25, epsilon = 1e-9);
    assert!(q.rectilinearity < 1e-9);
    assert_abs_diff_eq!(q.dz(), 1.0, epsilon = 1e-9);
}

#[test]
fn unit_square_weights() {
    let q = unit_square();
    assert_abs_diff_eq!(q.weight(), 1.0, epsilon = 1e-12);
    let (l, r) = q.cut_vertical().unwrap();
    assert_abs_diff_eq!(l.weight(), 8.0 * q.weight(), epsilon = 1e-9);
    assert_abs_diff_eq!(r.weight(), 8.0 * q.weight(), epsilon = 1e-9);
    assert_abs_diff_eq!(l.aspect(), 0.5 * q.aspect(), epsilon = 1e-12);
}

#[test]
fn horizontal_cut_halves_height() {
    let q = unit_square();
    let (lo, hi, _) = q.cut_horizontal(&zero_field()).unwrap();
    assert_eq!(lo.half_height, hi.half_height);
    assert_abs_diff_eq!(lo.dz(), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(lo.area() + hi.area(), q.area(), epsilon = 1e-12);
    assert_abs_diff_eq!(lo.aspect(), 2f64.sqrt() * q.aspect(), epsilon = 1e-12);
}

#[test]
fn affine_tree_has_no_vertical_cuts() {
    let f = affine();
    let root = make_pseudoquad(&f, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap();
    let t = subdivide(&f, root, &small_config(4)).unwrap();
    assert_eq!(t.vertical().count(), 0);
    assert!(t.nodes.iter().all(|n| n.cut != Cut::Vertical));
    assert_eq!(t.horizontal().count(), 15);
    assert_eq!(t.carleson_ratio(), 0.0);
    assert!(t.invariants().holds());
    let b = vper_bound_check(&t, &f, &Quadrature::Midpoint { nx: 32, nz: 32 }, &Quadrature::Midpoint { nx: 32, nz: 32 }).unwrap();
    assert_eq!(b.lhs, 0.0);
    assert_eq!(b.ratio, 0.0);
}

#[test]
fn depth_zero_is_a_single_leaf() {
    let t = subdivide(&zero_field(), unit_square(), &small_config(0)).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.root().cut, Cut::Leaf);
    assert_eq!(t.shape(), "L");
}

#[test]
fn weight_of_empty_set_is_zero() {
    let t = subdivide(&zero_field(), unit_square(), &small_config(0)).unwrap();
    assert_eq!(t.weight(std::iter::empty()), 0.0);
}

#[test]
fn carleson_ratio_of_single_vertical_cut() {
    let q = unit_square();
    let (l, r) = q.cut_vertical().unwrap();
    let node = |id, parent, cut, quad, children| Node { id, parent, depth: if parent.is_some() { 1 } else { 0 }, cut, children, quad, omega: None, plane: None, tiling_defect: 0.0 };
    let tree = PatchworkTree {
        nodes: vec![node(0, None, Cut::Vertical, q, vec![1, 2]), node(1, Some(0), Cut::Leaf, l, vec![]), node(2, Some(0), Cut::Leaf, r, vec![])],
        config: small_config(1),
    };
    assert_abs_diff_eq!(tree.carleson_ratio(), 1.0, epsilon = 1e-12);
    assert_eq!(tree.descendants(0), vec![0, 1, 2]);
}

#[test]
fn approximating_plane_residuals() {
    let f = affine();
    let q = make_pseudoquad(&f, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap();
    let quad = Quadrature::Midpoint { nx: 64, nz: 64 };
    let p = approx_plane(&f, &q, &quad).unwrap();
    assert_abs_diff_eq!(p.a, 0.1, epsilon = 1e-9);
    assert_abs_diff_eq!(p.b, 0.5, epsilon = 1e-9);
    assert!(p.sigma_residual < 1e-9);

    // affine plus eps times a bump: the residual is linear in eps
    let bump = make_bump();
    let perturbed = |eps: f64| {
        FnField::new(move |x, z| 0.1 + 0.5 * x + eps * bump.value((x + 4.5) / 10.0, (z + 60.0) / 120.0), Some(Window::new(-100.0, 100.0, -1.0e4, 1.0e4).unwrap()), (-1e3, 1e3), (1.0 / 256.0, 1.0 / 256.0))
    };
    let r1 = approx_plane(&perturbed(1e-3), &q, &quad).unwrap().sigma_residual;
    let r2 = approx_plane(&perturbed(2e-3), &q, &quad).unwrap().sigma_residual;
    assert!(r1 > 0.0);
    assert_abs_diff_eq!(r2 / r1, 2.0, epsilon = 1e-6);
}

/// Single-leaf tree over the unit square, bound evaluated for psi = z: the
/// numerator is the L4 norm of `2^-a |Q|` over the scale window.
#[test]
fn vper_bound_single_leaf_closed_form() {
    let f = linear_in_z();
    let t = subdivide(&zero_field(), unit_square(), &small_config(0)).unwrap();
    assert!(subdivide(&f, unit_square(), &small_config(0)).is_err());
    let b = vper_bound_check(&t, &f, &Quadrature::Midpoint { nx: 64, nz: 64 }, &Quadrature::Midpoint { nx: 64, nz: 64 }).unwrap();
    let want = ((b.t0 * -4.0).exp2() - (b.t1 * -4.0).exp2()) / (4.0 * 2f64.ln());
    assert!((b.lhs - want.powf(0.25)).abs() < 1e-3 * want.powf(0.25), "{} vs {}", b.lhs, want.powf(0.25));
    assert!(b.ratio.is_finite() && b.ratio > 0.0);
}

#[test]
fn bumpy_tree_invariants_at_small_depth() {
    let s = build(&BumpyParams::new(2, 8, 3), &make_bump()).unwrap();
    let root = make_pseudoquad(&s, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP).unwrap();
    let t = subdivide(&s, root, &small_config(5)).unwrap();
    let inv = t.invariants();
    assert!(inv.holds(), "{inv:?}");
    for n in &t.nodes {
        assert_eq!(n.children.len(), if n.cut == Cut::Leaf { 0 } else { 2 });
        assert!(n.tiling_defect < 1e-6 * n.quad.area());
        if n.cut == Cut::Vertical {
            let c = &t.nodes[n.children[0]].quad;
            assert_abs_diff_eq!(c.aspect(), 0.5 * n.quad.aspect(), epsilon = 1e-12);
        }
    }
    assert!(t.carleson_ratio().is_finite());
    let mut json = Vec::new();
    t.write_json(&mut json).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&json).unwrap();
    assert_eq!(rows.len(), t.len());
    assert!(s.contains(0.5, 0.5));
}

#[test]
fn rejects_bad_config() {
    let mut cfg = small_config(2);
    cfg.r = 0.5;
    assert!(subdivide(&zero_field(), unit_square(), &cfg).is_err());
}
