//! Line traces of the epigraph, endpoint measures and the parametric
//! nonmonotonicity integral over horizontal lines.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corona::Pseudoquad;
use crate::error::{Error, Result};
use crate::field::{horiz_deriv_at, lipschitz_estimate, rng_for, Region, Surface};
use crate::heis::HorizontalLine;

/// Bisection tolerance for crossings.
pub const ROOT_TOL: f64 = 1e-10;
/// Intervals shorter than this are merged into their neighbors.
pub const EPS_MIN: f64 = 2.0 * ROOT_TOL;

/// Closed intervals inside a finite span. An interval touching a span end
/// is treated as a ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub span: (f64, f64),
    pub intervals: Vec<(f64, f64)>,
    pub left_ray: bool,
    pub right_ray: bool,
}

impl IntervalSet {
    /// Builds the set `{h > 0}` from sorted crossings and the sign at the
    /// span start.
    pub fn from_crossings(span: (f64, f64), crossings: &[f64], starts_inside: bool) -> Self {
        let mut intervals = Vec::new();
        let mut inside = starts_inside;
        let mut open = span.0;
        for &c in crossings {
            if inside {
                intervals.push((open, c));
            }
            open = c;
            inside = !inside;
        }
        if inside {
            intervals.push((open, span.1));
        }
        let left_ray = intervals.first().map_or(false, |i| i.0 == span.0);
        let right_ray = intervals.last().map_or(false, |i| i.1 == span.1);
        IntervalSet { span, intervals, left_ray, right_ray }
    }

    /// Interval endpoints strictly inside the span, in order.
    pub fn boundary(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.intervals.len());
        for &(a, b) in &self.intervals {
            if a > self.span.0 {
                out.push(a);
            }
            if b < self.span.1 {
                out.push(b);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Mass in `window` of the average of the endpoint measures of `s` and of
/// its complement: every endpoint of a bounded interval of length at most
/// `r` carries half that length.
pub fn omega_hat(s: &IntervalSet, r: f64, window: (f64, f64)) -> f64 {
    omega_hat_with(s, r, |t| t >= window.0 && t <= window.1)
}

pub fn omega_hat_with<F: Fn(f64) -> bool>(s: &IntervalSet, r: f64, in_window: F) -> f64 {
    let pts = s.boundary();
    crossing_mass(&pts, r, in_window)
}

/// Endpoint mass from sorted crossings: each crossing sits between two
/// intervals (one of the set, one of its complement); the outermost
/// intervals are rays.
fn crossing_mass<F: Fn(f64) -> bool>(c: &[f64], r: f64, in_window: F) -> f64 {
    let mut mass = 0.0;
    for (i, &t) in c.iter().enumerate() {
        if !in_window(t) {
            continue;
        }
        if i > 0 {
            let l = t - c[i - 1];
            if l <= r {
                mass += 0.5 * l;
            }
        }
        if i + 1 < c.len() {
            let l = c[i + 1] - t;
            if l <= r {
                mass += 0.5 * l;
            }
        }
    }
    mass
}

#[inline]
fn height_gap<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, t: f64) -> f64 {
    l.y0 + l.m * t - f.value(t, l.g(t))
}

fn bisect<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, mut a: f64, mut b: f64, ha: f64) -> f64 {
    let pos = ha > 0.0;
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if (height_gap(f, l, m) > 0.0) == pos {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Drops pairs of crossings closer than `EPS_MIN`.
fn merge_tiny(c: &mut Vec<f64>) {
    let mut out: Vec<f64> = Vec::with_capacity(c.len());
    for &t in c.iter() {
        if let Some(&last) = out.last() {
            if t - last < EPS_MIN {
                out.pop();
                continue;
            }
        }
        out.push(t);
    }
    *c = out;
}

/// Sign-change scan of `h(t) = y_L(t) - psi(t, g_L(t))` on `[a, b]` with
/// nodes at most `step` apart. Returns the crossings and the sign at `a`.
/// The scan stops at the first node outside the surface domain.
pub fn scan_crossings<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, a: f64, b: f64, step: f64) -> (Vec<f64>, bool) {
    let n = (((b - a) / step).ceil() as usize).max(1);
    let dt = (b - a) / n as f64;
    let mut out = Vec::new();
    let mut prev_t = a;
    let mut prev_h = height_gap(f, l, a);
    let start = prev_h > 0.0;
    for i in 1..=n {
        let t = if i == n { b } else { a + i as f64 * dt };
        if !f.contains(t, l.g(t)) {
            break;
        }
        let h = height_gap(f, l, t);
        if (h > 0.0) != (prev_h > 0.0) {
            out.push(bisect(f, l, prev_t, t, prev_h));
        }
        prev_t = t;
        prev_h = h;
    }
    merge_tiny(&mut out);
    (out, start)
}

/// Scan step for a surface: half its nominal x-spacing.
pub fn default_step<S: Surface + ?Sized>(f: &S) -> f64 {
    0.5 * f.spacing().0
}

/// `{t in span : y(rho_L(t)) > psi(Pi(rho_L(t)))}`.
pub fn line_trace<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, span: (f64, f64)) -> Result<IntervalSet> {
    line_trace_step(f, l, span, default_step(f))
}

pub fn line_trace_step<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, span: (f64, f64), step: f64) -> Result<IntervalSet> {
    if !(span.0 < span.1) || !(step > 0.0) {
        return Err(Error::Invalid("line trace needs a nonempty span and a positive step".into()));
    }
    for t in [span.0, 0.5 * (span.0 + span.1), span.1] {
        if !f.contains(t, l.g(t)) {
            return Err(Error::OutOfDomain { x: t, z: l.g(t) });
        }
    }
    let (c, start) = scan_crossings(f, l, span.0, span.1, step);
    Ok(IntervalSet::from_crossings(span, &c, start))
}

/// Model of a region as a band `|z - k(x)| <= half_height` around a
/// quadratic centerline, over `|x - xc| <= half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionModel {
    pub xc: f64,
    pub half_width: f64,
    /// `k(xc + s) = k[0] + k[1] s + k[2] s^2`.
    pub k: [f64; 3],
    pub half_height: f64,
    /// The region equals the model band.
    pub exact: bool,
}

impl RegionModel {
    pub fn of(region: &Region) -> Result<Self> {
        region.validate()?;
        let (x0, x1) = region.x_range();
        let xc = 0.5 * (x0 + x1);
        let half_width = 0.5 * (x1 - x0);
        Ok(match region {
            Region::Rect(w) => RegionModel { xc, half_width, k: [0.5 * (w.z0 + w.z1), 0.0, 0.0], half_height: 0.5 * w.height(), exact: true },
            Region::Parabolic { h, lo, hi, .. } => RegionModel {
                xc,
                half_width,
                k: [h[0] + xc * (h[1] + xc * h[2]) + 0.5 * (lo + hi), h[1] + 2.0 * h[2] * xc, h[2]],
                half_height: 0.5 * (hi - lo),
                exact: true,
            },
            Region::Band { lower, upper, .. } => {
                let n = lower.len() - 1;
                let pts: Vec<(f64, f64)> = (0..=n)
                    .map(|i| (-half_width + 2.0 * half_width * i as f64 / n as f64, 0.5 * (lower[i] + upper[i])))
                    .collect();
                let k = fit_quadratic(&pts);
                let mut hh = 0.0f64;
                for (i, &(s, _)) in pts.iter().enumerate() {
                    let c = k[0] + s * (k[1] + s * k[2]);
                    hh = hh.max((upper[i] - c).abs()).max((lower[i] - c).abs());
                }
                // linear interpolation between samples stays inside the hull
                RegionModel { xc, half_width, k, half_height: hh * (1.0 + 1e-12) + 1e-15, exact: false }
            }
        })
    }

    /// `s`-intervals where the line's projected height stays within the
    /// model band; `(mp, yp, zp)` are the centered line coordinates.
    fn window(&self, mp: f64, yp: f64, zp: f64) -> Vec<(f64, f64)> {
        let w = self.half_width;
        let hh = self.half_height;
        let q = |s: f64| zp - yp * s - 0.5 * mp * s * s;
        let mut cuts = vec![-w, w];
        for target in [hh, -hh] {
            // -(mp/2) s^2 - yp s + (zp - target) = 0
            for r in quad_roots(-0.5 * mp, -yp, zp - target) {
                if r > -w && r < w {
                    cuts.push(r);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, f64)> = Vec::new();
        for p in cuts.windows(2) {
            if p[1] <= p[0] {
                continue;
            }
            let mid = 0.5 * (p[0] + p[1]);
            if q(mid).abs() <= hh {
                match out.last_mut() {
                    Some(last) if last.1 == p[0] => last.1 = p[1],
                    _ => out.push((p[0], p[1])),
                }
            }
        }
        out
    }
}

fn quad_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Least-squares `k0 + k1 s + k2 s^2` through the points.
pub(crate) fn fit_quadratic(pts: &[(f64, f64)]) -> [f64; 3] {
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(s, v) in pts {
        let p = [1.0, s, s * s];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += p[i] * p[j];
            }
            rhs[i] += p[i] * v;
        }
    }
    solve3(a, rhs)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col] == 0.0 {
            continue;
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = if a[i][i] == 0.0 { 0.0 } else { (b[i] - s) / a[i][i] };
    }
    x
}

/// Sampling box in centered line coordinates `(m', y', z')`, where
/// `m' = m + 2 k2`, `y' = y_L(xc) + k1`, `z' = g_L(xc) - k0`; the change of
/// variables from `(m, y0, z0)` has unit Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub model: RegionModel,
    pub m: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    pub psi_range: (f64, f64),
    pub volume: f64,
}

impl SampleBox {
    /// Smallest box containing every line with a crossing inside the
    /// model band, given `|m| <= m_max` and `psi` within `psi_range`.
    pub fn new(model: RegionModel, m_max: f64, psi_range: (f64, f64)) -> Result<Self> {
        if !(m_max > 0.0) || !(psi_range.0 <= psi_range.1) {
            return Err(Error::EmptyRegion);
        }
        if !(psi_range.0.is_finite() && psi_range.1.is_finite()) {
            return Err(Error::Invalid("line sampling needs a field with a finite range".into()));
        }
        let w = model.half_width;
        let m = (2.0 * model.k[2] - m_max, 2.0 * model.k[2] + m_max);
        // y_L(xc + s) = y' - k1 + m s must reach psi_range for |s| <= w
        let y = (psi_range.0 + model.k[1] - m_max * w, psi_range.1 + model.k[1] + m_max * w);
        let ymax = y.0.abs().max(y.1.abs());
        let mmax = m.0.abs().max(m.1.abs());
        let zr = model.half_height + ymax * w + 0.5 * mmax * w * w;
        let z = (-zr, zr);
        let volume = (m.1 - m.0) * (y.1 - y.0) * (z.1 - z.0);
        if !(volume > 0.0) || !volume.is_finite() {
            return Err(Error::EmptyRegion);
        }
        Ok(SampleBox { model, m, y, z, psi_range, volume })
    }

    /// Line with centered coordinates `(mp, yp, zp)`.
    pub fn line(&self, mp: f64, yp: f64, zp: f64) -> HorizontalLine {
        let k = self.model.k;
        let xc = self.model.xc;
        let m = mp - 2.0 * k[2];
        let y0 = yp - k[1] - m * xc;
        let z0 = zp + k[0] + 0.5 * m * xc * xc + y0 * xc;
        HorizontalLine { y0, z0, m }
    }
}

/// Per-line mass `omega_hat^P_{E,R}(U, L)` for the epigraph `E`.
pub fn line_mass<S: Surface + ?Sized>(f: &S, region: &Region, b: &SampleBox, mp: f64, yp: f64, zp: f64, r: f64, step: f64) -> f64 {
    let model = &b.model;
    let win = model.window(mp, yp, zp);
    if win.is_empty() {
        return 0.0;
    }
    let l = b.line(mp, yp, zp);
    let xc = model.xc;
    let (w_lo, w_hi) = (xc + win[0].0, xc + win[win.len() - 1].1);
    // crossings need y_L(t) inside the psi range
    let (mut a, mut bb) = (w_lo - r, w_hi + r);
    if l.m == 0.0 {
        if l.y0 < b.psi_range.0 || l.y0 > b.psi_range.1 {
            return 0.0;
        }
    } else {
        let t1 = (b.psi_range.0 - l.y0) / l.m;
        let t2 = (b.psi_range.1 - l.y0) / l.m;
        a = a.max(t1.min(t2));
        bb = bb.min(t1.max(t2));
    }
    if a >= bb {
        return 0.0;
    }
    let (ca, cb) = (a.max(w_lo), bb.min(w_hi));
    if ca > cb || !f.contains(ca, l.g(ca)) {
        return 0.0;
    }
    let inside = |t: f64| {
        let s = t - xc;
        if model.exact {
            win.iter().any(|&(p, q)| s >= p && s <= q)
        } else {
            let (x0, x1) = region.x_range();
            let (zl, zh) = region.z_bounds(t);
            let g = l.g(t);
            t >= x0 && t <= x1 && g >= zl && g <= zh
        }
    };
    let (core, _) = if ca < cb { scan_crossings(f, &l, ca, cb, step) } else { (Vec::new(), false) };
    if !core.iter().any(|&t| inside(t)) {
        return 0.0;
    }
    // only the nearest crossing on each side of the window matters
    let mut c = Vec::with_capacity(core.len() + 2);
    c.extend(scan_first(f, &l, ca, a, step));
    c.extend(core);
    c.extend(scan_first(f, &l, cb, bb, step));
    merge_tiny(&mut c);
    crossing_mass(&c, r, inside)
}

/// Nearest crossing when walking from `from` toward `to`, if any.
fn scan_first<S: Surface + ?Sized>(f: &S, l: &HorizontalLine, from: f64, to: f64, step: f64) -> Option<f64> {
    let len = (to - from).abs();
    if len == 0.0 {
        return None;
    }
    let n = ((len / step).ceil() as usize).max(1);
    let dt = (to - from) / n as f64;
    let mut prev_t = from;
    let mut prev_h = height_gap(f, l, from);
    for i in 1..=n {
        let t = if i == n { to } else { from + i as f64 * dt };
        if !f.contains(t, l.g(t)) {
            return None;
        }
        let h = height_gap(f, l, t);
        if (h > 0.0) != (prev_h > 0.0) {
            let (lo, hi, hl) = if dt > 0.0 { (prev_t, t, prev_h) } else { (t, prev_t, h) };
            return Some(bisect(f, l, lo, hi, hl));
        }
        prev_t = t;
        prev_h = h;
    }
    None
}

/// Monte Carlo settings for `omega_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaConfig {
    pub nsamples: usize,
    pub seed: u64,
    /// Slope cap; `None` selects `default_slope_cap`.
    pub m_max: Option<f64>,
    /// Bounds on `psi`; `None` uses the surface bounds.
    pub psi_range: Option<(f64, f64)>,
    /// Samples per `(m', y')` stratum.
    pub per_stratum: usize,
    /// Scan step; `None` uses half the surface x-spacing.
    pub step: Option<f64>,
}

impl OmegaConfig {
    pub fn new(nsamples: usize, seed: u64) -> Self {
        OmegaConfig { nsamples, seed, m_max: None, psi_range: None, per_stratum: 4, step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub nsamples: usize,
    pub r: f64,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub seed: u64,
}

/// Floor on the automatic slope cap.
pub const MIN_SLOPE_CAP: f64 = 0.05;

/// `2 max(lam / sqrt(1 - lam^2), sup |d_psi psi|)` with `lam` from
/// `lipschitz_estimate` and the horizontal derivative sampled on a
/// 64 x 64 grid over the region, floored at `MIN_SLOPE_CAP`.
pub fn default_slope_cap<S: Surface + ?Sized>(f: &S, region: &Region, seed: u64) -> Result<f64> {
    let lam = lipschitz_estimate(f, region, 10_000, seed)?;
    let cone = if lam < 1.0 { lam / (1.0 - lam * lam).sqrt() } else { f64::INFINITY };
    let (xa, xb) = region.x_range();
    let mut hd = 0.0f64;
    for i in 0..64 {
        let x = xa + (i as f64 + 0.5) * (xb - xa) / 64.0;
        let (lo, hi) = region.z_bounds(x);
        for j in 0..64 {
            let z = lo + (j as f64 + 0.5) * (hi - lo) / 64.0;
            hd = hd.max(horiz_deriv_at(f, x, z).abs());
        }
    }
    let cap = 2.0 * cone.max(hd);
    if !cap.is_finite() {
        return Err(Error::Invalid("surface is not intrinsic Lipschitz on the region".into()));
    }
    Ok(cap.max(MIN_SLOPE_CAP))
}

/// Stratified Monte Carlo estimate of `(1/R) int omega_hat^P dN_P`.
pub fn omega_p<S: Surface + ?Sized>(f: &S, u: &Region, r: f64, cfg: &OmegaConfig) -> Result<OmegaEstimate> {
    if cfg.nsamples == 0 {
        return Err(Error::Invalid("omega_p needs at least one sample".into()));
    }
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("radius must be positive, got {r}")));
    }
    u.check_inside(f)?;
    let model = RegionModel::of(u)?;
    let m_max = match cfg.m_max {
        Some(m) => m,
        None => default_slope_cap(f, u, cfg.seed)?,
    };
    let psi_range = cfg.psi_range.unwrap_or_else(|| {
        let (xa, xb) = u.x_range();
        f.bounds_over(xa - r, xb + r)
    });
    let sb = SampleBox::new(model, m_max, psi_range)?;
    let step = cfg.step.unwrap_or_else(|| default_step(f));
    let k = cfg.per_stratum.max(2);
    let side = (((cfg.nsamples / k) as f64).sqrt().floor() as usize).max(1);
    let strata = side * side;
    let per = (cfg.nsamples / strata).max(k);
    let hm = (sb.m.1 - sb.m.0) / side as f64;
    let hy = (sb.y.1 - sb.y.0) / side as f64;
    // per stratum: (sum, sum of squares)
    let rows: Vec<(f64, f64)> = (0..side)
        .into_par_iter()
        .map(|i| {
            let mut mean_acc = 0.0;
            let mut var_acc = 0.0;
            for j in 0..side {
                let mut rng = rng_for(cfg.seed, (i * side + j) as u64);
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..per {
                    let mp = sb.m.0 + (i as f64 + rng.gen::<f64>()) * hm;
                    let yp = sb.y.0 + (j as f64 + rng.gen::<f64>()) * hy;
                    let zp = sb.z.0 + rng.gen::<f64>() * (sb.z.1 - sb.z.0);
                    let v = line_mass(f, u, &sb, mp, yp, zp, r, step);
                    s1 += v;
                    s2 += v * v;
                }
                let mean = s1 / per as f64;
                let var = ((s2 / per as f64 - mean * mean) * per as f64 / (per - 1) as f64).max(0.0);
                mean_acc += mean;
                var_acc += var / per as f64;
            }
            (mean_acc, var_acc)
        })
        .collect();
    let (sum_mean, sum_var) = rows.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let s = strata as f64;
    let scale = sb.volume / r;
    Ok(OmegaEstimate {
        value: scale * sum_mean / s,
        stderr: scale * sum_var.sqrt() / s,
        nsamples: strata * per,
        r,
        sample_box: sb,
        seed: cfg.seed,
    })
}

/// Outcome of the paramonotonicity test on `rQ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamonotoneResult {
    pub paramonotone: bool,
    /// `Omega^P_{R dx(Q)}(rQ) / |Q|`.
    pub density: f64,
    pub threshold: f64,
    pub estimate: OmegaEstimate,
}

/// Tests `Omega^P_{E, R dx(Q)}(rQ) / |Q| <= eta / alpha(Q)^4`.
pub fn is_paramonotone<S: Surface + ?Sized>(f: &S, q: &Pseudoquad, eta: f64, big_r: f64, r: f64, cfg: &OmegaConfig) -> Result<ParamonotoneResult> {
    let rq = q.scaled_region(r);
    let est = omega_p(f, &rq, big_r * q.dx(), cfg)?;
    let density = est.value / q.area();
    let threshold = eta / q.aspect().powi(4);
    Ok(ParamonotoneResult { paramonotone: density <= threshold, density, threshold, estimate: est })
}
