//! Surfaces transported by stretch, shear and left-translation maps.
//!
//! If `q` preserves `<Y>`-cosets then `q(Gamma_psi)` is again an intrinsic
//! graph over `V0`; its function is evaluated by pulling the point back
//! through the induced map on `V0`.

use serde::{Deserialize, Serialize};

use super::{Region, Surface, Window};
use crate::error::{Error, Result};
use crate::heis::{Automorphism, HeisPoint};

/// Coset-preserving map acting on intrinsic graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Stretch { a: f64, b: f64 },
    Shear { b: f64 },
    LeftTranslate { x: f64, y: f64, z: f64 },
}

impl Transform {
    pub fn from_automorphism(a: &Automorphism) -> Result<Self> {
        match *a {
            Automorphism::Stretch { a, b } => {
                Automorphism::stretch(a, b)?;
                Ok(Transform::Stretch { a, b })
            }
            Automorphism::Shear { b } => Ok(Transform::Shear { b }),
            Automorphism::LeftTranslate(g) => Ok(Transform::LeftTranslate { x: g.x, y: g.y, z: g.z }),
            Automorphism::Rotate { .. } => Err(Error::Invalid("rotations do not preserve intrinsic graphs over V0".into())),
        }
    }

    pub fn automorphism(&self) -> Automorphism {
        match *self {
            Transform::Stretch { a, b } => Automorphism::Stretch { a, b },
            Transform::Shear { b } => Automorphism::Shear { b },
            Transform::LeftTranslate { x, y, z } => Automorphism::LeftTranslate(HeisPoint::new(x, y, z)),
        }
    }

    /// Induced map on `V0`.
    pub fn forward(&self, x: f64, z: f64) -> (f64, f64) {
        match *self {
            Transform::Stretch { a, b } => (a * x, a * b * z),
            Transform::Shear { b } => (x, z - 0.5 * b * x * x),
            Transform::LeftTranslate { x: x0, y: y0, z: z0 } => (x + x0, z + z0 - x * y0 - 0.5 * x0 * y0),
        }
    }

    /// Inverse of `forward`.
    pub fn backward(&self, x: f64, z: f64) -> (f64, f64) {
        match *self {
            Transform::Stretch { a, b } => (x / a, z / (a * b)),
            Transform::Shear { b } => (x, z + 0.5 * b * x * x),
            Transform::LeftTranslate { x: x0, y: y0, z: z0 } => {
                let u = x - x0;
                (u, z - z0 + u * y0 + 0.5 * x0 * y0)
            }
        }
    }

    /// Function of the image graph at `(x, z)` given the original function
    /// value at the pulled-back point.
    fn lift(&self, x: f64, value: f64) -> f64 {
        match *self {
            Transform::Stretch { b, .. } => b * value,
            Transform::Shear { b } => value + b * x,
            Transform::LeftTranslate { y, .. } => value + y,
        }
    }

    /// Image of a region under `forward`. Rectangles and parabolic regions
    /// map exactly, and quadrature nodes of the image are the images of the
    /// nodes of the original.
    pub fn image(&self, r: &Region) -> Result<Region> {
        let (x0, x1, h, lo, hi) = match r {
            Region::Rect(w) => (w.x0, w.x1, [0.0; 3], w.z0, w.z1),
            Region::Parabolic { x0, x1, h, lo, hi } => (*x0, *x1, *h, *lo, *hi),
            Region::Band { x0, x1, lower, upper } => {
                return match *self {
                    Transform::Stretch { a, b } if a > 0.0 && b > 0.0 => Ok(Region::Band {
                        x0: a * x0,
                        x1: a * x1,
                        lower: lower.iter().map(|v| a * b * v).collect(),
                        upper: upper.iter().map(|v| a * b * v).collect(),
                    }),
                    _ => Err(Error::Invalid("band regions map exactly only under positive stretches".into())),
                };
            }
        };
        let out = match *self {
            Transform::Stretch { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::Invalid("region images need a, b > 0".into()));
                }
                let k = a * b;
                Region::Parabolic { x0: a * x0, x1: a * x1, h: [k * h[0], b * h[1], b * h[2] / a], lo: k * lo, hi: k * hi }
            }
            Transform::Shear { b } => Region::Parabolic { x0, x1, h: [h[0], h[1], h[2] - 0.5 * b], lo, hi },
            Transform::LeftTranslate { x: tx, y: ty, z: tz } => {
                // h'(x) = h(x - tx) + tz - (x - tx) ty - tx ty / 2
                let c0 = h[0] - h[1] * tx + h[2] * tx * tx + tz + tx * ty - 0.5 * tx * ty;
                let c1 = h[1] - 2.0 * h[2] * tx - ty;
                Region::Parabolic { x0: x0 + tx, x1: x1 + tx, h: [c0, c1, h[2]], lo, hi }
            }
        };
        if let (Region::Rect(_), Region::Parabolic { x0, x1, h: [c0, 0.0, 0.0], lo, hi }) = (r, &out) {
            return Ok(Region::Rect(Window { x0: *x0, x1: *x1, z0: c0 + lo, z1: c0 + hi }));
        }
        Ok(out)
    }

    /// Jacobian determinant of `forward`.
    pub fn jacobian(&self) -> f64 {
        match *self {
            Transform::Stretch { a, b } => (a * a * b).abs(),
            _ => 1.0,
        }
    }
}

/// The intrinsic graph function of `t(Gamma_f)`.
pub struct Transformed<S> {
    pub inner: S,
    pub t: Transform,
}

impl<S: Surface> Transformed<S> {
    pub fn new(inner: S, t: Transform) -> Result<Self> {
        if let Transform::Stretch { a, b } = t {
            Automorphism::stretch(a, b)?;
        }
        Ok(Transformed { inner, t })
    }
}

impl<S: Surface> Surface for Transformed<S> {
    fn value(&self, x: f64, z: f64) -> f64 {
        let (u, w) = self.t.backward(x, z);
        self.t.lift(x, self.inner.value(u, w))
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        let (u, w) = self.t.backward(x, z);
        self.inner.contains(u, w)
    }

    fn bounds_over(&self, xa: f64, xb: f64) -> (f64, f64) {
        let (ua, _) = self.t.backward(xa, 0.0);
        let (ub, _) = self.t.backward(xb, 0.0);
        let (lo, hi) = self.inner.bounds_over(ua.min(ub), ua.max(ub));
        match self.t {
            Transform::Stretch { b, .. } => {
                let (p, q) = (b * lo, b * hi);
                (p.min(q), p.max(q))
            }
            Transform::Shear { b } => {
                let (p, q) = (b * xa, b * xb);
                (lo + p.min(q), hi + p.max(q))
            }
            Transform::LeftTranslate { y, .. } => (lo + y, hi + y),
        }
    }

    fn spacing(&self) -> (f64, f64) {
        let (hx, hz) = self.inner.spacing();
        match self.t {
            Transform::Stretch { a, b } => (hx * a.abs(), hz * (a * b).abs()),
            _ => (hx, hz),
        }
    }

    fn min_shift(&self) -> f64 {
        match self.t {
            Transform::Stretch { a, b } => self.inner.min_shift() * (a * b).abs(),
            _ => self.inner.min_shift(),
        }
    }

    fn window(&self) -> Option<Window> {
        // the image of a rectangle is a rectangle only under stretches
        match (self.t, self.inner.window()) {
            (_, None) => None,
            (Transform::Stretch { .. }, Some(w)) => {
                let (xa, za) = self.t.forward(w.x0, w.z0);
                let (xb, zb) = self.t.forward(w.x1, w.z1);
                Some(Window { x0: xa.min(xb), x1: xa.max(xb), z0: za.min(zb), z1: za.max(zb) })
            }
            (_, Some(_)) => None,
        }
    }
}
