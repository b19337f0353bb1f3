//! Continuous Heisenberg group arithmetic.
//!
//! Points are coordinate triples `(x, y, z)` with the product
//! `(x, y, z)(u, v, w) = (x + u, y + v, z + w + (x v - y u) / 2)`.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeisPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisPoint {
    pub const IDENTITY: HeisPoint = HeisPoint { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        HeisPoint { x, y, z }
    }

    /// `X^t`.
    pub const fn x_gen(t: f64) -> Self {
        HeisPoint::new(t, 0.0, 0.0)
    }

    /// `Y^t`.
    pub const fn y_gen(t: f64) -> Self {
        HeisPoint::new(0.0, t, 0.0)
    }

    /// `Z^t`, central.
    pub const fn z_gen(t: f64) -> Self {
        HeisPoint::new(0.0, 0.0, t)
    }

    pub fn mul(self, q: HeisPoint) -> HeisPoint {
        HeisPoint {
            x: self.x + q.x,
            y: self.y + q.y,
            z: self.z + q.z + 0.5 * (self.x * q.y - self.y * q.x),
        }
    }

    pub fn inv(self) -> HeisPoint {
        HeisPoint::new(-self.x, -self.y, -self.z)
    }

    /// Projection to the xz-plane along cosets of `<Y>`.
    pub fn project_v0(self) -> HeisPoint {
        HeisPoint::new(self.x, 0.0, self.z - 0.5 * self.x * self.y)
    }

    /// Horizontal projection `(x, y)`.
    pub fn horizontal(self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Mul for HeisPoint {
    type Output = HeisPoint;

    fn mul(self, rhs: HeisPoint) -> HeisPoint {
        HeisPoint::mul(self, rhs)
    }
}

/// Group automorphisms and left translations used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Automorphism {
    /// `(x, y, z) -> (a x, b y, a b z)`.
    Stretch { a: f64, b: f64 },
    /// `(x, y, z) -> (x, y + b x, z)`.
    Shear { b: f64 },
    /// Rotation of the horizontal coordinates about the z-axis.
    Rotate { theta: f64 },
    /// `p -> g p`.
    LeftTranslate(HeisPoint),
}

impl Automorphism {
    pub fn stretch(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::DegenerateStretch { a, b });
        }
        Ok(Automorphism::Stretch { a, b })
    }

    /// Heisenberg dilation `s_{t,t}`.
    pub fn dilation(t: f64) -> Result<Self> {
        Self::stretch(t, t)
    }

    pub fn apply(&self, p: HeisPoint) -> Result<HeisPoint> {
        if let Automorphism::Stretch { a, b } = *self {
            if a == 0.0 || b == 0.0 {
                return Err(Error::DegenerateStretch { a, b });
            }
        }
        Ok(self.apply_unchecked(p))
    }

    pub(crate) fn apply_unchecked(&self, p: HeisPoint) -> HeisPoint {
        match *self {
            Automorphism::Stretch { a, b } => HeisPoint::new(a * p.x, b * p.y, a * b * p.z),
            Automorphism::Shear { b } => HeisPoint::new(p.x, p.y + b * p.x, p.z),
            Automorphism::Rotate { theta } => {
                let (s, c) = theta.sin_cos();
                HeisPoint::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
            }
            Automorphism::LeftTranslate(g) => g * p,
        }
    }

    /// `Π(a(v))` for `v` in the xz-plane. Rotations do not preserve the
    /// `<Y>`-cosets, so the general formula is used for them.
    pub fn induced_v0(&self, x: f64, z: f64) -> Result<(f64, f64)> {
        let q = self.apply(HeisPoint::new(x, 0.0, z))?.project_v0();
        Ok((q.x, q.z))
    }
}

/// Applies `chain[0]` first.
pub fn apply_chain(chain: &[Automorphism], p: HeisPoint) -> Result<HeisPoint> {
    chain.iter().try_fold(p, |acc, a| a.apply(acc))
}

/// Ball-box interval for the Carnot-Caratheodory distance `d(0, p)`.
pub fn cc_bounds(p: HeisPoint) -> (f64, f64) {
    let upper = p.x.abs() + p.y.abs() + 4.0 * p.z.abs().sqrt();
    let lower = p.x.hypot(p.y).max(upper / 4.0);
    (lower, upper)
}

/// The smaller of the ball-box upper bound and `|(x, y)| + 2 sqrt(pi |z|)`
/// (go horizontally, then around a circle enclosing area `|z|`).
pub fn cc_upper_sharp(p: HeisPoint) -> f64 {
    let (_, bb) = cc_bounds(p);
    bb.min(p.x.hypot(p.y) + 2.0 * (PI * p.z.abs()).sqrt())
}

/// Horizontal line `(0, y0, z0) (1, m, 0)^t`, not parallel to the yz-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalLine {
    pub y0: f64,
    pub z0: f64,
    pub m: f64,
}

impl HorizontalLine {
    pub fn new(y0: f64, z0: f64, m: f64) -> Self {
        HorizontalLine { y0, z0, m }
    }

    pub fn point(&self, t: f64) -> HeisPoint {
        HeisPoint::new(0.0, self.y0, self.z0) * HeisPoint::new(t, self.m * t, 0.0)
    }

    /// z-coordinate of `Π(point(x))`.
    pub fn g(&self, x: f64) -> f64 {
        -0.5 * self.m * x * x - self.y0 * x + self.z0
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        -self.m * x - self.y0
    }

    /// Line through the xz-point `(xc, zc)` whose y-coordinate there is `yc`.
    pub fn through(xc: f64, yc: f64, zc: f64, m: f64) -> Self {
        // point at x = xc is (xc, yc, zc + xc yc / 2); pull back to x = 0
        let y0 = yc - m * xc;
        let z0 = zc + yc * xc - 0.5 * m * xc * xc;
        HorizontalLine { y0, z0, m }
    }

    /// Image under `s_{a,b}`: slope `m b / a`, intercept `(0, b y0, a b z0)`.
    pub fn stretched(&self, a: f64, b: f64) -> Self {
        HorizontalLine { y0: b * self.y0, z0: a * b * self.z0, m: self.m * b / a }
    }
}
