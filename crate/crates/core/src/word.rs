//! Word metric on the integer Heisenberg group with generators `X^{±1}, Y^{±1}`.
//!
//! Lattice points are stored as `(x, y, 2z)` so that every element has
//! integer coordinates.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::HeisPoint;

/// Default cap on the number of ball elements.
pub const BALL_GUARD: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
    pub two_z: i64,
}

impl LatticePoint {
    pub const IDENTITY: LatticePoint = LatticePoint { x: 0, y: 0, two_z: 0 };

    pub const fn new(x: i64, y: i64, two_z: i64) -> Self {
        LatticePoint { x, y, two_z }
    }

    pub fn mul(self, q: LatticePoint) -> LatticePoint {
        LatticePoint {
            x: self.x + q.x,
            y: self.y + q.y,
            two_z: self.two_z + q.two_z + (self.x * q.y - self.y * q.x),
        }
    }

    pub fn inv(self) -> LatticePoint {
        LatticePoint::new(-self.x, -self.y, -self.two_z)
    }

    pub fn to_point(self) -> HeisPoint {
        HeisPoint::new(self.x as f64, self.y as f64, 0.5 * self.two_z as f64)
    }
}

/// Generator order used for frontier expansion: X, X^-1, Y, Y^-1.
pub const GENERATORS: [LatticePoint; 4] = [
    LatticePoint::new(1, 0, 0),
    LatticePoint::new(-1, 0, 0),
    LatticePoint::new(0, 1, 0),
    LatticePoint::new(0, -1, 0),
];

/// All elements within word distance `radius` of a center, in BFS order.
#[derive(Debug, Clone)]
pub struct WordBall {
    pub center: LatticePoint,
    pub radius: u32,
    pub elements: Vec<(LatticePoint, u32)>,
    index: HashMap<LatticePoint, u32>,
}

impl WordBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Distance from the center, if within the radius.
    pub fn distance(&self, g: LatticePoint) -> Option<u32> {
        self.index.get(&g).copied()
    }

    /// Number of elements at exact distance `k` for `k = 0..=radius`.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.radius as usize + 1];
        for &(_, d) in &self.elements {
            out[d as usize] += 1;
        }
        out
    }

    /// Ball sizes `|B_k|` for `k = 0..=radius`.
    pub fn ball_sizes(&self) -> Vec<usize> {
        let mut acc = 0;
        self.sphere_sizes()
            .into_iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    }

    /// CSV with columns `x,y,two_z,dist`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "two_z", "dist"])?;
        for &(p, d) in &self.elements {
            wr.serialize((p.x, p.y, p.two_z, d))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Rough upper estimate of `|B_n|`, used only for the memory guard.
fn ball_size_estimate(n: u32) -> f64 {
    let n = n as f64;
    0.5 * n.powi(4) + 4.0 * n.powi(3) + 4.0 * n * n + 2.0 * n + 1.0
}

pub fn word_ball(radius: u32) -> Result<WordBall> {
    word_ball_from(LatticePoint::IDENTITY, radius, BALL_GUARD)
}

/// BFS ball around `center`. Neighbors of `g` are `g s` for generators `s`,
/// so distances are left-invariant by construction of the Cayley graph.
pub fn word_ball_from(center: LatticePoint, radius: u32, guard: usize) -> Result<WordBall> {
    if ball_size_estimate(radius) > guard as f64 {
        return Err(Error::MemoryGuard { radius, limit: guard });
    }
    let mut index: HashMap<LatticePoint, u32> = HashMap::new();
    let mut elements = vec![(center, 0u32)];
    index.insert(center, 0);
    let mut head = 0;
    while head < elements.len() {
        let (g, d) = elements[head];
        head += 1;
        if d == radius {
            continue;
        }
        for s in GENERATORS {
            let h = g.mul(s);
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(h) {
                if elements.len() >= guard {
                    return Err(Error::MemoryGuard { radius, limit: guard });
                }
                e.insert(d + 1);
                elements.push((h, d + 1));
            }
        }
    }
    Ok(WordBall { center, radius, elements, index })
}
