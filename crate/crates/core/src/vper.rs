//! Parametric vertical perimeter `vpP(a) = 2^a int_E |psi(v) - psi(v Z^{-2^{-2a}})| dv`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{integrate, GridField, Quadrature, Region, Surface, Transform, Transformed};

/// Default a-grid density: points per factor-10 range of `2^a`.
pub const POINTS_PER_DECADE: usize = 96;

/// Vertical shift used at scale `a`.
pub fn shift(a: f64) -> f64 {
    (-2.0 * a).exp2()
}

fn check_domain<S: Surface + ?Sized>(f: &S, e: &Region, c: f64) -> Result<()> {
    e.validate()?;
    e.check_inside(f)?;
    let shifted = match e {
        Region::Rect(w) => Region::Rect(crate::field::Window { z0: w.z0 - c, z1: w.z1 - c, ..*w }),
        Region::Band { x0, x1, lower, upper } => Region::Band {
            x0: *x0,
            x1: *x1,
            lower: lower.iter().map(|v| v - c).collect(),
            upper: upper.iter().map(|v| v - c).collect(),
        },
        Region::Parabolic { x0, x1, h, lo, hi } => Region::Parabolic { x0: *x0, x1: *x1, h: *h, lo: lo - c, hi: hi - c },
    };
    shifted.check_inside(f)
}

fn raw<S: Surface + ?Sized>(f: &S, e: &Region, a: f64, quad: &Quadrature) -> f64 {
    let c = shift(a);
    a.exp2() * integrate(e, quad, |x, z| (f.value(x, z) - f.value(x, z - c)).abs())
}

/// `vpP` with the resolution rule: shifts below `f.min_shift()` are
/// evaluated on the bicubic variant when the surface offers one.
/// Returns the value and whether the bicubic variant was used.
pub fn vpp_flagged<S: Surface + ?Sized>(f: &S, e: &Region, a: f64, quad: &Quadrature) -> Result<(f64, bool)> {
    if !a.is_finite() {
        return Err(Error::Invalid(format!("scale must be finite, got {a}")));
    }
    let c = shift(a);
    check_domain(f, e, c)?;
    if c >= f.min_shift() {
        return Ok((raw(f, e, a, quad), false));
    }
    match f.bicubic_variant() {
        Some(g) => Ok((raw(&g, e, a, quad), true)),
        None => Err(Error::Resolution(format!("shift 2^(-2a) = {c:e} is below the resolved minimum {:e}", f.min_shift()))),
    }
}

pub fn vpp<S: Surface + ?Sized>(f: &S, e: &Region, a: f64, quad: &Quadrature) -> Result<f64> {
    vpp_flagged(f, e, a, quad).map(|(v, _)| v)
}

/// `vpP` tabulated on an a-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub a: Vec<f64>,
    pub values: Vec<f64>,
    pub region: Region,
    pub quadrature: Quadrature,
    /// Per point: evaluated on the bicubic variant.
    pub bicubic: Vec<bool>,
}

/// Uniform grid on `[a_min, a_max]` with `steps` intervals.
pub fn a_grid(a_min: f64, a_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a_min < a_max) || steps == 0 {
        return Err(Error::Invalid("a-grid needs a_min < a_max and at least one step".into()));
    }
    Ok((0..=steps).map(|i| a_min + (a_max - a_min) * i as f64 / steps as f64).collect())
}

/// Step count giving at least `per_decade` points per factor-10 range.
pub fn steps_for(a_min: f64, a_max: f64, per_decade: usize) -> usize {
    ((a_max - a_min) / std::f64::consts::LOG2_10 * per_decade as f64).ceil().max(1.0) as usize
}

pub fn profile<S: Surface + ?Sized>(f: &S, e: &Region, a_min: f64, a_max: f64, steps: usize, quad: &Quadrature) -> Result<ScaleProfile> {
    profile_on(f, e, &a_grid(a_min, a_max, steps)?, quad)
}

pub fn profile_on<S: Surface + ?Sized>(f: &S, e: &Region, a: &[f64], quad: &Quadrature) -> Result<ScaleProfile> {
    let out: Result<Vec<(f64, bool)>> = a.par_iter().map(|&t| vpp_flagged(f, e, t, quad)).collect();
    let (values, bicubic) = out?.into_iter().unzip();
    Ok(ScaleProfile { a: a.to_vec(), values, region: e.clone(), quadrature: *quad, bicubic })
}

impl ScaleProfile {
    /// CSV with columns `a,vpp`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["a", "vpp"])?;
        for (a, v) in self.a.iter().zip(&self.values) {
            wr.serialize((a, v))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Largest excess of the profile over the a priori envelope.
    pub fn envelope_excess(&self, env: &Envelope) -> f64 {
        let area = self.region.area();
        self.a
            .iter()
            .zip(&self.values)
            .map(|(&a, &v)| v - env.at(a, area))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A priori bound `vpP(a) <= min(2^(a+1) sup|psi|, 2^-a sup|d psi/dz|) |E|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sup_abs: f64,
    pub sup_dz: f64,
}

impl Envelope {
    pub fn at(&self, a: f64, area: f64) -> f64 {
        ((a + 1.0).exp2() * self.sup_abs).min((-a).exp2() * self.sup_dz) * area
    }

    /// `sup|psi|` from the surface bounds; `sup|d psi/dz|` as the largest
    /// gradient sampled at the quadrature nodes of `e` and of `e` lowered
    /// by its own height.
    pub fn estimate<S: Surface + ?Sized>(f: &S, e: &Region, quad: &Quadrature) -> Envelope {
        let (xa, xb) = e.x_range();
        let (lo, hi) = f.bounds_over(xa, xb);
        let (nx, nz) = quad.counts();
        let bb = e.bbox();
        let tall = bb.height();
        let sup_dz = (0..nx)
            .into_par_iter()
            .map(|i| {
                let x = xa + (i as f64 + 0.5) * (xb - xa) / nx as f64;
                let (zl, zh) = e.z_bounds(x);
                let mut m = 0.0f64;
                for j in 0..2 * nz {
                    let z = zh - (j as f64 + 0.5) * (zh - zl + tall) / (2 * nz) as f64;
                    if f.contains(x, z) {
                        m = m.max(f.gradient(x, z).1.abs());
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max);
        Envelope { sup_abs: lo.abs().max(hi.abs()), sup_dz }
    }
}

/// `(int_window vpP(a)^q da)^(1/q)` by the trapezoid rule on the profile
/// points inside the window, with linear interpolation at window edges.
pub fn lq_norm(p: &ScaleProfile, q: f64, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(q > 0.0) || !(lo < hi) {
        return Err(Error::Invalid("lq_norm needs q > 0 and a nonempty window".into()));
    }
    let (first, last) = (p.a[0], p.a[p.a.len() - 1]);
    if lo < first - 1e-12 || hi > last + 1e-12 {
        return Err(Error::Invalid(format!("window [{lo}, {hi}] exceeds the profile span [{first}, {last}]")));
    }
    let interp = |t: f64| -> f64 {
        let k = p.a.partition_point(|&x| x <= t).clamp(1, p.a.len() - 1);
        let (a0, a1) = (p.a[k - 1], p.a[k]);
        let s = ((t - a0) / (a1 - a0)).clamp(0.0, 1.0);
        p.values[k - 1] * (1.0 - s) + p.values[k] * s
    };
    let mut pts = vec![(lo, interp(lo))];
    pts.extend(p.a.iter().zip(&p.values).filter(|(&a, _)| a > lo && a < hi).map(|(&a, &v)| (a, v)));
    pts.push((hi, interp(hi)));
    let integral: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powf(q) + w[1].1.powf(q))).sum();
    Ok(integral.powf(1.0 / q))
}

/// Outcome of comparing a transformed profile with its predicted law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub transform: Transform,
    pub a: Vec<f64>,
    pub transformed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub max_rel_dev: f64,
    /// Grid the transformed field was resampled on, if any.
    pub resampled: Option<(usize, usize)>,
}

/// How the transformed surface is evaluated in `scaling_check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Evaluation {
    /// Exact pullback through the induced map.
    Pullback,
    /// Pullback sampled onto a fresh periodic grid over the image of the
    /// period cell, then interpolated.
    Resample { nx: usize, nz: usize },
}

/// Compares `vpP` of `t(Gamma_f)` over `t(E)` against the transformation
/// law: `|ab|^(3/2) vpP(a + log2 sqrt|ab|)` for stretches, unchanged for
/// shears and left translations.
pub fn scaling_check<S: Surface>(f: S, e: &Region, a: &[f64], t: Transform, quad: &Quadrature, eval: Evaluation) -> Result<ScalingReport> {
    let (factor, offset) = match t {
        Transform::Stretch { a: sa, b: sb } => {
            if !(sa * sb > 0.0) {
                return Err(Error::Invalid("stretch law needs ab > 0".into()));
            }
            ((sa * sb).abs().powf(1.5), 0.5 * (sa * sb).abs().log2())
        }
        _ => (1.0, 0.0),
    };
    let predicted_a: Vec<f64> = a.iter().map(|&t| t + offset).collect();
    let base = profile_on(&f, e, &predicted_a, quad)?;
    let image = t.image(e)?;
    let moved = Transformed::new(f, t)?;
    let transformed = match eval {
        Evaluation::Pullback => profile_on(&moved, &image, a, quad)?,
        Evaluation::Resample { nx, nz } => {
            let w = image.bbox();
            let pad = w.height().max(shift(a.iter().cloned().fold(f64::INFINITY, f64::min)));
            let win = crate::field::Window::new(w.x0, w.x1, w.z0 - pad, w.z1)?;
            let g = GridField::sample(nx, nz, win, false, crate::field::Interp::Bicubic, &moved)?;
            profile_on(&g, &image, a, quad)?
        }
    };
    let predicted: Vec<f64> = base.values.iter().map(|v| factor * v).collect();
    let max_rel_dev = transformed
        .values
        .iter()
        .zip(&predicted)
        .map(|(&got, &want)| if want == 0.0 { got.abs() } else { (got - want).abs() / want.abs() })
        .fold(0.0, f64::max);
    Ok(ScalingReport {
        transform: t,
        a: a.to_vec(),
        transformed: transformed.values,
        predicted,
        max_rel_dev,
        resampled: match eval {
            Evaluation::Pullback => None,
            Evaluation::Resample { nx, nz } => Some((nx, nz)),
        },
    })
}

/// JSON sidecar written next to a profile CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub region: Region,
    pub quadrature: Quadrature,
    pub interpolation: Vec<bool>,
    pub envelope: Envelope,
    pub envelope_excess: f64,
    pub envelope_ok: bool,
}

impl ProfileSidecar {
    pub fn new(p: &ScaleProfile, env: Envelope, slack: f64) -> Self {
        let excess = p.envelope_excess(&env);
        ProfileSidecar {
            region: p.region.clone(),
            quadrature: p.quadrature,
            interpolation: p.bicubic.clone(),
            envelope: env,
            envelope_excess: excess,
            envelope_ok: excess <= slack,
        }
    }
}
