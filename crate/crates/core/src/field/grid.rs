use serde::{Deserialize, Serialize};

use super::{Surface, Window};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Bilinear,
    Bicubic,
}

/// Sampled function on a rectangular grid of `V0`.
///
/// Samples are row-major with x fastest: `samples[iz * nx + ix]`.
/// A periodic field has nodes `x0 + i (x1 - x0) / nx` and repeats with
/// period `x1 - x0` (resp. `z1 - z0`); a windowed field has nodes
/// `x0 + i (x1 - x0) / (nx - 1)` covering both window edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nx: usize,
    nz: usize,
    window: Window,
    samples: Vec<f64>,
    periodic: bool,
    interp: Interp,
    lo: f64,
    hi: f64,
}

impl GridField {
    pub fn new(nx: usize, nz: usize, window: Window, samples: Vec<f64>, periodic: bool, interp: Interp) -> Result<Self> {
        let min_n = if periodic { 1 } else { 2 };
        if nx < min_n || nz < min_n {
            return Err(Error::Invalid(format!("grid needs at least {min_n} nodes per axis")));
        }
        let expected = nx.checked_mul(nz).ok_or_else(|| Error::Invalid("grid too large".into()))?;
        if samples.len() != expected {
            return Err(Error::Invalid(format!("expected {expected} samples, got {}", samples.len())));
        }
        Window::new(window.x0, window.x1, window.z0, window.z1)?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite sample".into()));
        }
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(GridField { nx, nz, window, samples, periodic, interp, lo, hi })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn<F>(nx: usize, nz: usize, window: Window, periodic: bool, interp: Interp, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let probe = GridField {
            nx,
            nz,
            window,
            samples: Vec::new(),
            periodic,
            interp,
            lo: 0.0,
            hi: 0.0,
        };
        let mut samples = Vec::with_capacity(nx * nz);
        for iz in 0..nz {
            for ix in 0..nx {
                let (x, z) = probe.node(ix, iz);
                samples.push(f(x, z));
            }
        }
        GridField::new(nx, nz, window, samples, periodic, interp)
    }

    /// Samples another surface on this layout.
    pub fn sample<S: Surface + ?Sized>(nx: usize, nz: usize, window: Window, periodic: bool, interp: Interp, s: &S) -> Result<Self> {
        Self::from_fn(nx, nz, window, periodic, interp, |x, z| s.value(x, z))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn window_rect(&self) -> Window {
        self.window
    }
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn periodic(&self) -> bool {
        self.periodic
    }
    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn with_interp(&self, interp: Interp) -> GridField {
        GridField { interp, ..self.clone() }
    }

    pub fn hx(&self) -> f64 {
        if self.periodic {
            self.window.width() / self.nx as f64
        } else {
            self.window.width() / (self.nx - 1) as f64
        }
    }

    pub fn hz(&self) -> f64 {
        if self.periodic {
            self.window.height() / self.nz as f64
        } else {
            self.window.height() / (self.nz - 1) as f64
        }
    }

    pub fn node(&self, ix: usize, iz: usize) -> (f64, f64) {
        (self.window.x0 + ix as f64 * self.hx(), self.window.z0 + iz as f64 * self.hz())
    }

    pub fn at_node(&self, ix: usize, iz: usize) -> f64 {
        self.samples[iz * self.nx + ix]
    }

    /// Checked evaluation.
    pub fn eval(&self, x: f64, z: f64) -> Result<f64> {
        if !self.contains(x, z) {
            return Err(Error::OutOfDomain { x, z });
        }
        Ok(self.value(x, z))
    }

    /// Sample with index wrap (periodic) or linear ghost extrapolation.
    #[inline]
    fn s(&self, ix: isize, iz: isize) -> f64 {
        if self.periodic {
            let i = ix.rem_euclid(self.nx as isize) as usize;
            let j = iz.rem_euclid(self.nz as isize) as usize;
            return self.samples[j * self.nx + i];
        }
        let (nx, nz) = (self.nx as isize, self.nz as isize);
        let gx = |i: isize, j: isize| -> f64 {
            let j = j as usize * self.nx;
            if i < 0 {
                2.0 * self.samples[j] - self.samples[j + 1]
            } else if i >= nx {
                2.0 * self.samples[j + self.nx - 1] - self.samples[j + self.nx - 2]
            } else {
                self.samples[j + i as usize]
            }
        };
        if iz < 0 {
            2.0 * gx(ix, 0) - gx(ix, 1)
        } else if iz >= nz {
            2.0 * gx(ix, nz - 1) - gx(ix, nz - 2)
        } else {
            gx(ix, iz)
        }
    }

    /// Cell index and fraction along one axis.
    #[inline]
    fn locate(&self, u: f64, n: usize) -> (isize, f64) {
        if self.periodic {
            let i = u.floor();
            (i as isize, u - i)
        } else {
            let top = (n - 2) as f64;
            let i = u.floor().clamp(0.0, top);
            (i as isize, u - i)
        }
    }
}

#[inline]
fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

impl Surface for GridField {
    fn value(&self, x: f64, z: f64) -> f64 {
        let u = (x - self.window.x0) / self.hx();
        let v = (z - self.window.z0) / self.hz();
        let (i, fx) = self.locate(u, self.nx);
        let (j, fz) = self.locate(v, self.nz);
        match self.interp {
            Interp::Bilinear => {
                let a = self.s(i, j) * (1.0 - fx) + self.s(i + 1, j) * fx;
                let b = self.s(i, j + 1) * (1.0 - fx) + self.s(i + 1, j + 1) * fx;
                a * (1.0 - fz) + b * fz
            }
            Interp::Bicubic => {
                let wx = catmull_rom(fx);
                let wz = catmull_rom(fz);
                let mut acc = 0.0;
                for (dj, wzj) in wz.iter().enumerate() {
                    let mut row = 0.0;
                    for (di, wxi) in wx.iter().enumerate() {
                        row += wxi * self.s(i - 1 + di as isize, j - 1 + dj as isize);
                    }
                    acc += wzj * row;
                }
                acc
            }
        }
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        if self.periodic {
            x.is_finite() && z.is_finite()
        } else {
            self.window.contains(x, z)
        }
    }

    fn bounds_over(&self, _xa: f64, _xb: f64) -> (f64, f64) {
        match self.interp {
            Interp::Bilinear => (self.lo, self.hi),
            Interp::Bicubic => {
                // tensor Catmull-Rom weights have negative mass 9/32; ghost
                // nodes can sit one full range outside the samples
                let r = self.hi - self.lo;
                let pad = if self.periodic { 0.29 * r } else { 2.0 * r };
                (self.lo - pad, self.hi + pad)
            }
        }
    }

    fn spacing(&self) -> (f64, f64) {
        (self.hx(), self.hz())
    }

    fn min_shift(&self) -> f64 {
        match self.interp {
            Interp::Bilinear => 2.0 * self.hz(),
            Interp::Bicubic => 0.0,
        }
    }

    fn window(&self) -> Option<Window> {
        if self.periodic {
            None
        } else {
            Some(self.window)
        }
    }

    fn bicubic_variant(&self) -> Option<GridField> {
        match self.interp {
            Interp::Bilinear => Some(self.with_interp(Interp::Bicubic)),
            Interp::Bicubic => None,
        }
    }
}
