use std::collections::{HashMap, HashSet};

use hvp::word::{word_ball, word_ball_from, LatticePoint, BALL_GUARD, GENERATORS};
use proptest::prelude::*;

/// Endpoints of every word of length at most `n`, tracked with their
/// shortest length. Exhaustive, so only for small `n`.
fn enumerate(n: u32) -> HashMap<LatticePoint, u32> {
    let mut best = HashMap::from([(LatticePoint::IDENTITY, 0)]);
    let mut frontier = vec![LatticePoint::IDENTITY];
    for len in 1..=n {
        let mut next = Vec::new();
        for w in &frontier {
            for s in GENERATORS {
                next.push(w.mul(s));
            }
        }
        for &p in &next {
            best.entry(p).or_insert(len);
        }
        frontier = next;
    }
    best
}

#[test]
fn radius_one_has_five_elements() {
    let ball = word_ball(1).unwrap();
    assert_eq!(ball.len(), 5);
    let got: HashSet<_> = ball.elements.iter().map(|e| e.0).collect();
    let want: HashSet<_> = [LatticePoint::IDENTITY].into_iter().chain(GENERATORS).collect();
    assert_eq!(got, want);
}

#[test]
fn matches_exhaustive_word_enumeration() {
    let n = 6;
    let ball = word_ball(n).unwrap();
    let oracle = enumerate(n);
    assert_eq!(ball.len(), oracle.len());
    for (p, d) in oracle {
        assert_eq!(ball.distance(p), Some(d), "{p:?}");
    }
}

#[test]
fn distance_along_axes_and_center() {
    let ball = word_ball(12).unwrap();
    for k in 0..=12 {
        assert_eq!(ball.distance(LatticePoint::new(k, 0, 0)), Some(k as u32));
        assert_eq!(ball.distance(LatticePoint::new(0, -k, 0)), Some(k as u32));
    }
    for m in 1..=3i64 {
        assert_eq!(ball.distance(LatticePoint::new(0, 0, 2 * m * m)), Some(4 * m as u32));
    }
}

#[test]
fn sphere_and_ball_sizes_agree() {
    let ball = word_ball(8).unwrap();
    let spheres = ball.sphere_sizes();
    let balls = ball.ball_sizes();
    assert_eq!(spheres.iter().sum::<usize>(), ball.len());
    assert_eq!(*balls.last().unwrap(), ball.len());
    assert_eq!(&spheres[..2], &[1, 4]);
}

#[test]
fn memory_guard_refuses_huge_radius() {
    assert!(word_ball_from(LatticePoint::IDENTITY, 10_000, BALL_GUARD).is_err());
}

#[test]
fn csv_has_one_row_per_element() {
    let ball = word_ball(3).unwrap();
    let mut buf = Vec::new();
    ball.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,two_z,dist"));
    assert_eq!(text.lines().count(), ball.len() + 1);
}

#[test]
fn lattice_product_is_exact() {
    // X Y = (1, 1, 1/2), stored as two_z = 1
    let x = LatticePoint::new(1, 0, 0);
    let y = LatticePoint::new(0, 1, 0);
    assert_eq!(x.mul(y), LatticePoint::new(1, 1, 1));
    // commutator X Y X^-1 Y^-1 = Z
    assert_eq!(x.mul(y).mul(x.inv()).mul(y.inv()), LatticePoint::new(0, 0, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn left_invariance(gi in 0usize..500, hi in 0usize..500) {
        let ball = word_ball(8).unwrap();
        let g = ball.elements[gi % ball.len()].0;
        let h = ball.elements[hi % ball.len()].0;
        let around_h = word_ball_from(h, 8, BALL_GUARD).unwrap();
        prop_assert_eq!(around_h.distance(h.mul(g)), ball.distance(g));
    }

    #[test]
    fn distance_dominates_horizontal_l1(i in 0usize..4000) {
        let ball = word_ball(10).unwrap();
        let (p, d) = ball.elements[i % ball.len()];
        prop_assert!(d as i64 >= p.x.abs() + p.y.abs());
    }
}
