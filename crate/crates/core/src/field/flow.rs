use serde::{Deserialize, Serialize};

use super::Surface;
use crate::error::{Error, Result};

/// Characteristic curve `t -> (t, g(t))` sampled on a uniform x-lattice.
///
/// Between samples the curve is the cubic Hermite interpolant of
/// `(g, g')`, which is fourth-order accurate for smooth `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharCurve {
    pub x0: f64,
    pub h: f64,
    pub g: Vec<f64>,
    pub gp: Vec<f64>,
}

impl CharCurve {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x0, self.x_at(self.len() - 1))
    }

    fn cell(&self, t: f64) -> (usize, f64) {
        let n = self.len() - 1;
        let u = ((t - self.x0) / self.h).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(1));
        (i, u - i as f64)
    }

    /// Height at `t`, clamped to the sampled span.
    pub fn eval(&self, t: f64) -> f64 {
        if self.len() == 1 {
            return self.g[0];
        }
        let (i, s) = self.cell(t);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.g[i] + h10 * self.h * self.gp[i] + h01 * self.g[i + 1] + h11 * self.h * self.gp[i + 1]
    }

    pub fn slope(&self, t: f64) -> f64 {
        if self.len() == 1 {
            return self.gp[0];
        }
        let (i, s) = self.cell(t);
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s2 - 2.0 * s;
        (d00 * self.g[i] + d01 * self.g[i + 1]) / self.h + d10 * self.gp[i] + d11 * self.gp[i + 1]
    }

    /// Largest `|g'(t) + psi(t, g(t))|` over sample midpoints.
    pub fn residual<S: Surface + ?Sized>(&self, f: &S) -> f64 {
        (0..self.len().saturating_sub(1))
            .map(|i| {
                let t = self.x_at(i) + 0.5 * self.h;
                (self.slope(t) + f.value(t, self.eval(t))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// The sub-curve on sample indices `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> CharCurve {
        CharCurve {
            x0: self.x_at(lo),
            h: self.h,
            g: self.g[lo..=hi].to_vec(),
            gp: self.gp[lo..=hi].to_vec(),
        }
    }
}

fn rk4<S: Surface + ?Sized>(f: &S, t: f64, g: f64, h: f64) -> f64 {
    let k1 = -f.value(t, g);
    let k2 = -f.value(t + 0.5 * h, g + 0.5 * h * k1);
    let k3 = -f.value(t + 0.5 * h, g + 0.5 * h * k2);
    let k4 = -f.value(t + h, g + h * k3);
    g + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Solves `g'(t) = -psi(t, g(t))` with `g(x_start) = z_start` over
/// `[span.0, span.1]` by classical RK4.
///
/// The curve is sampled on the lattice `x_start + k * step`, extended in
/// both directions until it covers the span (so the returned range may
/// overhang the span by less than one step).
pub fn flow_char<S: Surface + ?Sized>(f: &S, start: (f64, f64), span: (f64, f64), step: f64) -> Result<CharCurve> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Flow(format!("step must be positive, got {step}")));
    }
    let (xs, zs) = start;
    if !(span.0 <= xs && xs <= span.1) {
        return Err(Error::Flow("start lies outside the span".into()));
    }
    if !f.contains(xs, zs) {
        return Err(Error::OutOfDomain { x: xs, z: zs });
    }
    let back = ((xs - span.0) / step - 1e-9).ceil().max(0.0) as usize;
    let fwd = ((span.1 - xs) / step - 1e-9).ceil().max(0.0) as usize;
    let n = back + fwd + 1;
    let mut g = vec![0.0; n];
    g[back] = zs;
    let walk = |g: &mut Vec<f64>, range: &mut dyn Iterator<Item = usize>, dir: f64| -> Result<()> {
        for i in range {
            let j = (i as isize - dir as isize) as usize;
            let t = xs + (j as f64 - back as f64) * step;
            let h = dir * step;
            // every RK stage must stay in the domain
            let next = rk4(f, t, g[j], h);
            if !f.contains(t + h, next) || !f.contains(t + 0.5 * h, 0.5 * (g[j] + next)) || !next.is_finite() {
                return Err(Error::OutOfDomain { x: t + h, z: next });
            }
            g[i] = next;
        }
        Ok(())
    };
    walk(&mut g, &mut (back + 1..n), 1.0)?;
    walk(&mut g, &mut (0..back).rev(), -1.0)?;
    let x0 = xs - back as f64 * step;
    let gp = g.iter().enumerate().map(|(i, &gi)| -f.value(x0 + i as f64 * step, gi)).collect();
    Ok(CharCurve { x0, h: step, g, gp })
}
