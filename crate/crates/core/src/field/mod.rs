//! Scalar functions on the vertical plane `V0 = {y = 0}` and the
//! quadrature machinery shared by every integral in the crate.
//!
//! A point of `V0` is written `(x, z)`; the intrinsic graph of `psi` is
//! `{(x, 0, z) Y^{psi(x, z)}}`.

mod flow;
mod grid;
pub mod io;
mod ops;
mod transform;

pub use flow::{flow_char, CharCurve};
pub use grid::{GridField, Interp};
pub use ops::{area_energy, graph_point, horiz_deriv, horiz_deriv_at, lipschitz_estimate};
pub use transform::{Transform, Transformed};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function on (part of) `V0`.
pub trait Surface: Sync {
    /// Value at `(x, z)`. Callers are expected to have checked `contains`.
    fn value(&self, x: f64, z: f64) -> f64;

    /// Whether `(x, z)` is inside the evaluation domain.
    fn contains(&self, x: f64, z: f64) -> bool;

    /// Bounds on the values taken for `x` in `[xa, xb]`.
    fn bounds_over(&self, xa: f64, xb: f64) -> (f64, f64);

    /// Nominal sample spacing `(hx, hz)`; finite differences and line scans
    /// use it.
    fn spacing(&self) -> (f64, f64);

    /// Smallest vertical shift whose difference quotient the interpolant
    /// resolves.
    fn min_shift(&self) -> f64 {
        0.0
    }

    /// Window where the surface is defined, `None` when defined everywhere.
    fn window(&self) -> Option<Window> {
        None
    }

    /// Gradient `(d/dx, d/dz)`. The default uses central differences at the
    /// nominal spacing, one-sided at window edges.
    fn gradient(&self, x: f64, z: f64) -> (f64, f64) {
        let (hx, hz) = self.spacing();
        (fd(self, x, z, hx, true), fd(self, x, z, hz, false))
    }

    /// A smoother interpolant of the same data, if one exists.
    fn bicubic_variant(&self) -> Option<GridField> {
        None
    }
}

fn fd<S: Surface + ?Sized>(f: &S, x: f64, z: f64, h: f64, along_x: bool) -> f64 {
    let at = |d: f64| if along_x { f.value(x + d, z) } else { f.value(x, z + d) };
    let ok = |d: f64| if along_x { f.contains(x + d, z) } else { f.contains(x, z + d) };
    match (ok(-h), ok(h)) {
        (true, true) => (at(h) - at(-h)) / (2.0 * h),
        (false, true) => (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h),
        (true, false) => (3.0 * at(0.0) - 4.0 * at(-h) + at(-2.0 * h)) / (2.0 * h),
        (false, false) => 0.0,
    }
}

/// Axis-parallel rectangle `[x0, x1] x [z0, z1]` in `V0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Window {
    pub const UNIT: Window = Window { x0: 0.0, x1: 1.0, z0: 0.0, z1: 1.0 };

    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Result<Self> {
        let w = Window { x0, x1, z0, z1 };
        if !(x0 < x1 && z0 < z1) || ![x0, x1, z0, z1].iter().all(|v| v.is_finite()) {
            return Err(Error::EmptyRegion);
        }
        Ok(w)
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x0 && x <= self.x1 && z >= self.z0 && z <= self.z1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.z1 - self.z0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Integration region in `V0`: a rectangle, or the set between two curves
/// sampled on a uniform x-grid (linear interpolation between samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Rect(Window),
    Band { x0: f64, x1: f64, lower: Vec<f64>, upper: Vec<f64> },
    /// `{x0 <= x <= x1, h(x) + lo <= z <= h(x) + hi}` with
    /// `h(x) = h[0] + h[1] x + h[2] x^2`.
    Parabolic { x0: f64, x1: f64, h: [f64; 3], lo: f64, hi: f64 },
}

impl Region {
    pub fn unit() -> Self {
        Region::Rect(Window::UNIT)
    }

    pub fn x_range(&self) -> (f64, f64) {
        match self {
            Region::Rect(w) => (w.x0, w.x1),
            Region::Band { x0, x1, .. } | Region::Parabolic { x0, x1, .. } => (*x0, *x1),
        }
    }

    /// Vertical extent of the region over the abscissa `x`.
    pub fn z_bounds(&self, x: f64) -> (f64, f64) {
        match self {
            Region::Rect(w) => (w.z0, w.z1),
            Region::Band { x0, x1, lower, upper } => {
                let n = lower.len() - 1;
                let u = ((x - x0) / (x1 - x0) * n as f64).clamp(0.0, n as f64);
                let i = (u.floor() as usize).min(n.saturating_sub(1));
                let f = u - i as f64;
                let lerp = |v: &Vec<f64>| if n == 0 { v[0] } else { v[i] * (1.0 - f) + v[i + 1] * f };
                (lerp(lower), lerp(upper))
            }
            Region::Parabolic { h, lo, hi, .. } => {
                let c = h[0] + x * (h[1] + x * h[2]);
                (c + lo, c + hi)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Rect(w) => Window::new(w.x0, w.x1, w.z0, w.z1).map(|_| ()),
            Region::Band { x0, x1, lower, upper } => {
                if !(x0 < x1) || lower.len() < 2 || lower.len() != upper.len() {
                    return Err(Error::EmptyRegion);
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::EmptyRegion);
                }
                Ok(())
            }
            Region::Parabolic { x0, x1, h, lo, hi } => {
                let finite = [*x0, *x1, h[0], h[1], h[2], *lo, *hi].iter().all(|v| v.is_finite());
                if !finite || !(x0 < x1) || !(lo < hi) {
                    return Err(Error::EmptyRegion);
                }
                Ok(())
            }
        }
    }

    /// Bounding rectangle.
    pub fn bbox(&self) -> Window {
        match self {
            Region::Rect(w) => *w,
            Region::Band { x0, x1, lower, upper } => Window {
                x0: *x0,
                x1: *x1,
                z0: lower.iter().cloned().fold(f64::INFINITY, f64::min),
                z1: upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
            Region::Parabolic { x0, x1, h, lo, hi } => {
                let mut xs = vec![*x0, *x1];
                if h[2] != 0.0 {
                    let v = -h[1] / (2.0 * h[2]);
                    if v > *x0 && v < *x1 {
                        xs.push(v);
                    }
                }
                let cs: Vec<f64> = xs.iter().map(|x| h[0] + x * (h[1] + x * h[2])).collect();
                Window {
                    x0: *x0,
                    x1: *x1,
                    z0: cs.iter().cloned().fold(f64::INFINITY, f64::min) + lo,
                    z1: cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + hi,
                }
            }
        }
    }

    /// Lebesgue measure by the trapezoid rule on the stored samples.
    pub fn area(&self) -> f64 {
        match self {
            Region::Rect(w) => w.area(),
            Region::Band { x0, x1, lower, upper } => {
                let n = lower.len() - 1;
                let h = (x1 - x0) / n as f64;
                let gap: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| u - l).collect();
                h * (gap.iter().sum::<f64>() - 0.5 * (gap[0] + gap[n]))
            }
            Region::Parabolic { x0, x1, lo, hi, .. } => (x1 - x0) * (hi - lo),
        }
    }

    /// Checks that the region lies inside the surface domain by probing a
    /// grid along its boundary and interior.
    pub fn check_inside<S: Surface + ?Sized>(&self, f: &S) -> Result<()> {
        let (xa, xb) = self.x_range();
        for i in 0..=32 {
            let x = xa + (xb - xa) * i as f64 / 32.0;
            let (lo, hi) = self.z_bounds(x);
            for j in 0..=8 {
                let z = lo + (hi - lo) * j as f64 / 8.0;
                if !f.contains(x, z) {
                    return Err(Error::OutOfDomain { x, z });
                }
            }
        }
        Ok(())
    }
}

/// Spatial quadrature rule over a `Region`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Quadrature {
    /// Cell-midpoint rule with `nx` columns and `nz` cells per column.
    Midpoint { nx: usize, nz: usize },
    /// One uniformly jittered node per cell, reproducible from `seed`.
    Stratified { nx: usize, nz: usize, seed: u64 },
}

impl Quadrature {
    pub fn counts(&self) -> (usize, usize) {
        match *self {
            Quadrature::Midpoint { nx, nz } | Quadrature::Stratified { nx, nz, .. } => (nx, nz),
        }
    }

    pub fn nodes(&self) -> usize {
        let (nx, nz) = self.counts();
        nx * nz
    }
}

/// Integrates `f` over `region`. Column sums are computed in parallel and
/// reduced in column order, so the result does not depend on thread count.
pub fn integrate<F>(region: &Region, quad: &Quadrature, f: F) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let cols = column_sums(region, quad, |x, z| [f(x, z)]);
    cols.iter().map(|c| c[0]).sum()
}

/// Like `integrate` but for several integrands sharing the same nodes.
pub fn column_sums<F, const K: usize>(region: &Region, quad: &Quadrature, f: F) -> Vec<[f64; K]>
where
    F: Fn(f64, f64) -> [f64; K] + Sync,
{
    let (nx, nz) = quad.counts();
    let (xa, xb) = region.x_range();
    let hx = (xb - xa) / nx as f64;
    (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut rng = match quad {
                Quadrature::Stratified { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed).tap_stream(i as u64)),
                Quadrature::Midpoint { .. } => None,
            };
            let mut acc = [0.0; K];
            let mut comp = [0.0; K];
            for j in 0..nz {
                let (ux, uz) = match rng.as_mut() {
                    Some(r) => (r.gen::<f64>(), r.gen::<f64>()),
                    None => (0.5, 0.5),
                };
                let x = xa + (i as f64 + ux) * hx;
                let (lo, hi) = region.z_bounds(x);
                let hz = (hi - lo) / nz as f64;
                let z = lo + (j as f64 + uz) * hz;
                let v = f(x, z);
                for k in 0..K {
                    // Kahan summation keeps 10^6-node sums reproducible to the last bits
                    let y = v[k] * hx * hz - comp[k];
                    let t = acc[k] + y;
                    comp[k] = (t - acc[k]) - y;
                    acc[k] = t;
                }
            }
            acc
        })
        .collect()
}

trait TapStream {
    fn tap_stream(self, stream: u64) -> Self;
}

impl TapStream for ChaCha8Rng {
    fn tap_stream(mut self, stream: u64) -> Self {
        self.set_stream(stream);
        self
    }
}

/// Stream-separated generator: `stream` indexes independent substreams of
/// one seed, so parallel work items draw the same numbers on any pool size.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed).tap_stream(stream)
}

/// Closed-form surface given by a function pointer or closure.
pub struct FnField {
    f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    window: Option<Window>,
    bounds: (f64, f64),
    spacing: (f64, f64),
    grad: Option<Box<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>>,
}

impl FnField {
    /// `window = None` means defined on the whole plane. `bounds` must
    /// contain every value the function takes.
    pub fn new<F>(f: F, window: Option<Window>, bounds: (f64, f64), spacing: (f64, f64)) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        FnField { f: Box::new(f), window, bounds, spacing, grad: None }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    {
        self.grad = Some(Box::new(g));
        self
    }

    /// `psi = c0 + cx x + cz z` on the whole plane.
    pub fn affine(c0: f64, cx: f64, cz: f64, window: Window) -> Self {
        let corners = [(window.x0, window.z0), (window.x0, window.z1), (window.x1, window.z0), (window.x1, window.z1)];
        let vals: Vec<f64> = corners.iter().map(|&(x, z)| c0 + cx * x + cz * z).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        FnField::new(move |x, z| c0 + cx * x + cz * z, Some(window), (lo, hi), (window.width() / 256.0, window.height() / 256.0))
            .with_gradient(move |_, _| (cx, cz))
    }
}

impl Surface for FnField {
    fn value(&self, x: f64, z: f64) -> f64 {
        (self.f)(x, z)
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        self.window.map_or(true, |w| w.contains(x, z))
    }

    fn bounds_over(&self, _xa: f64, _xb: f64) -> (f64, f64) {
        self.bounds
    }

    fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    fn window(&self) -> Option<Window> {
        self.window
    }

    fn gradient(&self, x: f64, z: f64) -> (f64, f64) {
        match &self.grad {
            Some(g) => g(x, z),
            None => {
                let (hx, hz) = self.spacing;
                (fd(self, x, z, hx, true), fd(self, x, z, hz, false))
            }
        }
    }
}

impl<S: Surface + ?Sized> Surface for &S {
    fn value(&self, x: f64, z: f64) -> f64 {
        (**self).value(x, z)
    }
    fn contains(&self, x: f64, z: f64) -> bool {
        (**self).contains(x, z)
    }
    fn bounds_over(&self, xa: f64, xb: f64) -> (f64, f64) {
        (**self).bounds_over(xa, xb)
    }
    fn spacing(&self) -> (f64, f64) {
        (**self).spacing()
    }
    fn min_shift(&self) -> f64 {
        (**self).min_shift()
    }
    fn window(&self) -> Option<Window> {
        (**self).window()
    }
    fn gradient(&self, x: f64, z: f64) -> (f64, f64) {
        (**self).gradient(x, z)
    }
    fn bicubic_variant(&self) -> Option<GridField> {
        (**self).bicubic_variant()
    }
}
