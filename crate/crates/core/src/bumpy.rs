//! Layered bump surfaces aligned with characteristic curves.
//!
//! `psi_L = beta_0 + ... + beta_{L-1}`. Layer `j` tiles the plane into
//! strips of width `rho^-j`, each cut along characteristic curves of
//! `psi_j` into cells of height `alpha^-2 rho^-2j`, and places one rescaled
//! copy of the prototype bump in every cell, written in flow coordinates.
//!
//! The flow coordinate `T(x, z)` (height where the characteristic through
//! `(x, z)` meets the left edge of its strip) is stored per strip as the
//! periodic table `T - z` on a small column lattice. Every evaluation is
//! then analytic in the prototype and interpolated only in that table,
//! which is smooth at the scale of the coarser layers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridField, Interp, Surface, Window};

/// Grid used to fix the prototype normalization.
pub const PROTO_GRID: usize = 2048;
/// Largest allowed order-2 partial of the prototype after scaling.
pub const PROTO_TARGET: f64 = 0.99;
/// Cap on the total number of stored flow-table entries.
pub const TABLE_CAP: usize = 64 << 20;

/// 1-D profile `b(u) = exp(-1/(u(1-u)))` on `(0, 1)`, zero elsewhere,
/// with its first two derivatives.
#[inline]
pub fn bump1(u: f64) -> (f64, f64, f64) {
    if !(u > 0.0 && u < 1.0) {
        return (0.0, 0.0, 0.0);
    }
    let q = u * (1.0 - u);
    let qp = 1.0 - 2.0 * u;
    let b = (-1.0 / q).exp();
    let q2 = q * q;
    let d1 = b * qp / q2;
    let d2 = b * (qp * qp / (q2 * q2) - 2.0 / q2 - 2.0 * qp * qp / (q2 * q));
    (b, d1, d2)
}

/// `beta(x, z) = c b(x) b(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpPrototype {
    pub c: f64,
    /// Grid maxima of `|b|, |b'|, |b''|`.
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// `int_0^1 b`.
    pub integral: f64,
}

impl BumpPrototype {
    pub fn value(&self, x: f64, z: f64) -> f64 {
        self.c * bump1(x).0 * bump1(z).0
    }

    /// `[beta, d_x, d_z, d_xx, d_xz, d_zz]`.
    pub fn partials(&self, x: f64, z: f64) -> [f64; 6] {
        let (a0, a1, a2) = bump1(x);
        let (b0, b1, b2) = bump1(z);
        let c = self.c;
        [c * a0 * b0, c * a1 * b0, c * a0 * b1, c * a2 * b0, c * a1 * b1, c * a0 * b2]
    }

    /// Periodic extension `phi(u, w) = beta(u mod 1, w mod 1)` with its
    /// first partials, for `u` already in `[0, 1)`.
    #[inline]
    fn periodic(&self, u: f64, w: f64) -> (f64, f64, f64) {
        let fw = w - w.floor();
        let (a0, a1, _) = bump1(u);
        if a0 == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let (b0, b1, _) = bump1(fw);
        (self.c * a0 * b0, self.c * a1 * b0, self.c * a0 * b1)
    }

    /// Largest value `beta` takes; `b` peaks at `u = 1/2`.
    pub fn max_value(&self) -> f64 {
        let peak = bump1(0.5).0;
        self.c * peak * peak
    }

    /// Sup bounds `[|beta|, |d_x|, |d_z|, |d_xx|, |d_xz|, |d_zz|]` on the
    /// normalization grid.
    pub fn sup_bounds(&self) -> [f64; 6] {
        let c = self.c;
        [c * self.m0 * self.m0, c * self.m1 * self.m0, c * self.m0 * self.m1, c * self.m2 * self.m0, c * self.m1 * self.m1, c * self.m0 * self.m2]
    }
}

/// The prototype normalized so that its largest order-2 partial on the
/// `PROTO_GRID`-squared node grid equals `PROTO_TARGET`.
///
/// `beta` is a product, so every 2-D grid maximum is a product of 1-D
/// maxima over the same nodes.
pub fn make_bump() -> BumpPrototype {
    let n = PROTO_GRID;
    let (mut m0, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..n {
        let (b, d1, d2) = bump1(k as f64 / (n - 1) as f64);
        m0 = m0.max(b.abs());
        m1 = m1.max(d1.abs());
        m2 = m2.max(d2.abs());
    }
    let worst = [m0 * m0, m1 * m0, m1 * m1, m2 * m0].into_iter().fold(0.0, f64::max);
    BumpPrototype { c: PROTO_TARGET / worst, m0, m1, m2, integral: bump_integral() }
}

fn bump_integral() -> f64 {
    let n = 1 << 16;
    let h = 1.0 / n as f64;
    (0..n).map(|k| bump1((k as f64 + 0.5) * h).0).sum::<f64>() * h
}

/// Constants chosen from the vertical-perimeter profile of the periodic
/// prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eta: f64,
    pub r: f64,
    pub big_r: f64,
    pub s: f64,
    pub rho: u64,
    pub points_per_decade: usize,
    pub a_grid: Vec<f64>,
    pub profile: Vec<f64>,
}

/// Default scale range searched by `calibrate`.
pub const CALIBRATION_RANGE: (f64, f64) = (-2.0, 6.0);

/// `int_0^1 |b(z) - b((z - h) mod 1)| dz` by the midpoint rule.
fn shift_l1(h: f64, n: usize) -> f64 {
    let h = h - h.floor();
    let step = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            let z = (k as f64 + 0.5) * step;
            let w = z - h;
            (bump1(z).0 - bump1(w - w.floor()).0).abs()
        })
        .sum::<f64>()
        * step
}

/// Vertical perimeter at scale `a` of the periodic prototype over the unit
/// square: `2^a c (int b) int |b(z) - b(z - 2^-2a)| dz`.
pub fn prototype_vpp(proto: &BumpPrototype, a: f64) -> f64 {
    let h = (-2.0 * a).exp2();
    a.exp2() * proto.c * proto.integral * shift_l1(h, 1 << 16)
}

/// Tabulates the prototype profile with `points_per_decade` points per
/// factor-10 range of `2^a`, picks the window `[r, R]` maximizing
/// `eta * min(1, R - r)` where `eta` is the profile minimum on the window,
/// and sets `rho` by the ceiling formula.
pub fn calibrate(proto: &BumpPrototype, points_per_decade: usize) -> Result<Calibration> {
    if points_per_decade < 2 {
        return Err(Error::Invalid("need at least 2 points per decade".into()));
    }
    let (lo, hi) = CALIBRATION_RANGE;
    let step = std::f64::consts::LOG2_10 / points_per_decade as f64;
    let n = ((hi - lo) / step).floor() as usize + 1;
    let a_grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let profile: Vec<f64> = a_grid.par_iter().map(|&a| prototype_vpp(proto, a)).collect();
    if profile.iter().all(|&v| v <= 1e-300) {
        return Err(Error::Calibration("prototype profile vanishes".into()));
    }
    let mut best = (0.0, 0, 0);
    for i in 0..n {
        let mut eta = f64::INFINITY;
        for j in i..n {
            eta = eta.min(profile[j]);
            if eta <= 0.0 {
                break;
            }
            let score = eta * (a_grid[j] - a_grid[i]).min(1.0);
            if score > best.0 {
                best = (score, i, j);
            }
        }
    }
    let (_, i, j) = best;
    if i == j {
        return Err(Error::Calibration("no window with positive profile".into()));
    }
    let eta = profile[i..=j].iter().cloned().fold(f64::INFINITY, f64::min);
    let (r, big_r) = (a_grid[i], a_grid[j]);
    let s = r.abs().max(big_r.abs());
    let rho = [8.0, 12.0 / (r.exp2() * eta), 40.0 * s.exp2() / eta].into_iter().fold(0.0, f64::max).ceil() as u64;
    Ok(Calibration { eta, r, big_r, s, rho, points_per_decade, a_grid, profile })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpyParams {
    pub alpha: u32,
    pub rho: u64,
    /// Requested number of layers; the build may use fewer.
    pub layers: usize,
    /// Flow-table columns per strip.
    pub cols_per_strip: usize,
    /// RK4 substeps between table columns.
    pub substeps: usize,
    pub table_cap: usize,
}

impl BumpyParams {
    pub fn new(alpha: u32, rho: u64, layers: usize) -> Self {
        BumpyParams { alpha, rho, layers, cols_per_strip: 8, substeps: 4, table_cap: TABLE_CAP }
    }

    fn validate(&self) -> Result<()> {
        if self.alpha < 1 {
            return Err(Error::Invalid("alpha must be at least 1".into()));
        }
        if self.rho < 8 {
            return Err(Error::Invalid(format!("rho must be at least 8, got {}", self.rho)));
        }
        if self.cols_per_strip < 3 || self.substeps < 1 {
            return Err(Error::Invalid("flow table needs at least 3 columns and 1 substep".into()));
        }
        Ok(())
    }

    /// Table rows for layer `j >= 1`: 16 per cell height of layer `j - 1`.
    pub fn table_rows(&self, j: usize) -> usize {
        let a2 = (self.alpha as f64).powi(2);
        let rows = 16.0 * a2 * (self.rho as f64).powi(2 * (j as i32 - 1));
        (rows.ceil() as usize).max(256)
    }

    /// Stored entries for layer `j`, or `None` on overflow.
    pub fn table_size(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return Some(0);
        }
        let strips = (self.rho as u128).checked_pow(j as u32)?;
        let n = strips * (self.cols_per_strip as u128 + 1) * self.table_rows(j) as u128;
        usize::try_from(n).ok()
    }

    /// Layers actually built: `min(alpha^4, layers, table-feasible depth)`.
    pub fn feasible_layers(&self) -> usize {
        let cap = (self.alpha as usize).saturating_pow(4).min(self.layers);
        let mut total = 0usize;
        for j in 0..cap {
            match self.table_size(j).and_then(|s| total.checked_add(s)) {
                Some(t) if t <= self.table_cap => total = t,
                _ => return j,
            }
        }
        cap
    }
}

/// Periodic per-strip table of `T - z`.
#[derive(Debug, Clone)]
struct FlowTable {
    strips: usize,
    ncs: usize,
    rows: usize,
    data: Vec<f64>,
}

#[inline]
fn lagrange4(f: f64) -> ([f64; 4], [f64; 4]) {
    let (fm, f1, f2) = (f + 1.0, f - 1.0, f - 2.0);
    let w = [-f * f1 * f2 / 6.0, fm * f1 * f2 / 2.0, -fm * f * f2 / 2.0, fm * f * f1 / 6.0];
    let f_sq = f * f;
    let d = [
        -(3.0 * f_sq - 6.0 * f + 2.0) / 6.0,
        (3.0 * f_sq - 4.0 * f - 1.0) / 2.0,
        -(3.0 * f_sq - 2.0 * f - 2.0) / 2.0,
        (3.0 * f_sq - 1.0) / 6.0,
    ];
    (w, d)
}

impl FlowTable {
    /// `(D, dD/du, dD/dz)` in strip `m` at relative position `u` in `[0, 1]`
    /// and height `zm` in `[0, 1)`.
    #[inline]
    fn eval(&self, m: usize, u: f64, zm: f64) -> (f64, f64, f64) {
        let cs = u * self.ncs as f64;
        let i0 = (cs.floor() as isize - 1).clamp(0, self.ncs as isize - 3) as usize;
        let (wx, dx) = lagrange4(cs - i0 as f64 - 1.0);
        let v = zm * self.rows as f64;
        let k = v.floor();
        let (wz, dz) = lagrange4(v - k);
        let k = k as isize;
        let cols = self.ncs + 1;
        let mut acc = [0.0; 3];
        for (b, (wzb, dzb)) in wz.iter().zip(&dz).enumerate() {
            let row = (k - 1 + b as isize).rem_euclid(self.rows as isize) as usize;
            let mut line = 0.0;
            let mut dline = 0.0;
            for a in 0..4 {
                let val = self.data[(m * cols + i0 + a) * self.rows + row];
                line += wx[a] * val;
                dline += dx[a] * val;
            }
            acc[0] += wzb * line;
            acc[1] += wzb * dline;
            acc[2] += dzb * line;
        }
        (acc[0], acc[1] * self.ncs as f64, acc[2] * self.rows as f64)
    }
}

/// One summand `beta_j`.
#[derive(Debug, Clone)]
struct Layer {
    /// `rho^j`.
    scale: f64,
    /// `alpha^-2 rho^-j`.
    amp: f64,
    /// `alpha^2 rho^2j`.
    zfreq: f64,
    table: Option<FlowTable>,
}

/// Per-layer construction diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub strips: u64,
    pub cell_width: f64,
    pub cell_height: f64,
    pub amplitude: f64,
    pub table_rows: usize,
    /// Range of `dz/dt` along traced flows (both 1 for the first layer).
    pub dzdt_min: f64,
    pub dzdt_max: f64,
}

struct Inner {
    params: BumpyParams,
    proto: BumpPrototype,
    layers: Vec<Layer>,
    reports: Vec<LayerReport>,
}

/// `psi_i` for some `i <= layers`, evaluated semi-analytically.
#[derive(Clone)]
pub struct BumpySurface {
    inner: Arc<Inner>,
    upto: usize,
}

impl std::fmt::Debug for BumpySurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BumpySurface").field("params", &self.inner.params).field("upto", &self.upto).finish()
    }
}

/// `(value, d_x, d_z)` of layer `layer` at `(x, z)`.
#[inline]
fn layer_eval(proto: &BumpPrototype, layer: &Layer, x: f64, z: f64) -> (f64, f64, f64) {
    let xm = x - x.floor();
    let zm = z - z.floor();
    let strips = layer.scale;
    let m = ((xm * strips).floor()).min(strips - 1.0).max(0.0);
    let u = (xm * strips - m).clamp(0.0, 1.0);
    let (d, du, dz) = match &layer.table {
        Some(t) => t.eval(m as usize, u, zm),
        None => (0.0, 0.0, 0.0),
    };
    let w = layer.zfreq * (zm + d);
    let (p, pu, pw) = proto.periodic(u, w);
    if p == 0.0 && pu == 0.0 && pw == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let a = layer.amp;
    // d/dx T = dD/du * strips; d/dz T = 1 + dD/dz
    (a * p, a * (pu * strips + pw * layer.zfreq * du * strips), a * pw * layer.zfreq * (1.0 + dz))
}

fn sum_layers(proto: &BumpPrototype, layers: &[Layer], x: f64, z: f64) -> (f64, f64, f64) {
    layers.iter().fold((0.0, 0.0, 0.0), |acc, l| {
        let (v, gx, gz) = layer_eval(proto, l, x, z);
        (acc.0 + v, acc.1 + gx, acc.2 + gz)
    })
}

fn rk4_step(proto: &BumpPrototype, layers: &[Layer], x: f64, z: f64, h: f64) -> f64 {
    let f = |x: f64, z: f64| -sum_layers(proto, layers, x, z).0;
    let k1 = f(x, z);
    let k2 = f(x + 0.5 * h, z + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h, z + 0.5 * h * k2);
    let k4 = f(x + h, z + h * k3);
    z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Flows `psi_j` (the given layers) across every strip and inverts the
/// flow map column by column.
fn build_table(proto: &BumpPrototype, layers: &[Layer], params: &BumpyParams, j: usize) -> Result<(FlowTable, f64, f64)> {
    let strips = params.rho.pow(j as u32) as usize;
    let ncs = params.cols_per_strip;
    let rows = params.table_rows(j);
    let width = 1.0 / strips as f64;
    let h = width / (ncs * params.substeps) as f64;
    let dt = 1.0 / rows as f64;
    let per_strip: Vec<Result<(Vec<f64>, f64, f64)>> = (0..strips)
        .into_par_iter()
        .map(|m| {
            let x_left = m as f64 * width;
            // heights[c][k]: height at column c of the flow started at t_k
            let mut heights = vec![vec![0.0; rows]; ncs + 1];
            for k in 0..rows {
                let mut z = k as f64 * dt;
                heights[0][k] = z;
                for c in 0..ncs {
                    for sub in 0..params.substeps {
                        let x = x_left + (c * params.substeps + sub) as f64 * h;
                        z = rk4_step(proto, layers, x, z, h);
                    }
                    heights[c + 1][k] = z;
                }
            }
            let mut out = vec![0.0; (ncs + 1) * rows];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (c, col) in heights.iter().enumerate() {
                let zk = |k: isize| -> f64 {
                    let q = k.div_euclid(rows as isize);
                    col[k.rem_euclid(rows as isize) as usize] + q as f64
                };
                for k in 0..rows as isize {
                    let slope = (zk(k + 1) - zk(k - 1)) / (2.0 * dt);
                    if !(slope > 0.0) || !slope.is_finite() {
                        return Err(Error::Flow(format!("flow map not monotone in strip {m}, column {c}")));
                    }
                    lo = lo.min(slope);
                    hi = hi.max(slope);
                }
                // invert z(t) at the row heights by 4-point Lagrange
                let mut k = -1isize;
                while zk(k) > 0.0 {
                    k -= 1;
                }
                for l in 0..rows {
                    let target = l as f64 * dt;
                    while zk(k + 1) <= target {
                        k += 1;
                    }
                    let idx = [k - 1, k, k + 1, k + 2];
                    let mut t = 0.0;
                    for &i in &idx {
                        let mut w = 1.0;
                        for &jj in &idx {
                            if jj != i {
                                w *= (target - zk(jj)) / (zk(i) - zk(jj));
                            }
                        }
                        t += w * i as f64 * dt;
                    }
                    out[c * rows + l] = t - target;
                }
            }
            Ok((out, lo, hi))
        })
        .collect();
    let mut data = Vec::with_capacity(strips * (ncs + 1) * rows);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in per_strip {
        let (d, a, b) = r?;
        data.extend_from_slice(&d);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((FlowTable { strips, ncs, rows, data }, lo, hi))
}

/// Builds `psi_L` layer by layer.
pub fn build(params: &BumpyParams, proto: &BumpPrototype) -> Result<BumpySurface> {
    params.validate()?;
    let n = params.feasible_layers();
    if n == 0 {
        return Err(Error::Resolution("no layer fits the flow-table budget".into()));
    }
    let a2 = (params.alpha as f64).powi(2);
    let rho = params.rho as f64;
    let mut layers: Vec<Layer> = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    for j in 0..n {
        let scale = rho.powi(j as i32);
        let (table, lo, hi) = if j == 0 {
            (None, 1.0, 1.0)
        } else {
            let (t, lo, hi) = build_table(proto, &layers, params, j)?;
            (Some(t), lo, hi)
        };
        reports.push(LayerReport {
            index: j,
            strips: params.rho.pow(j as u32),
            cell_width: 1.0 / scale,
            cell_height: 1.0 / (a2 * scale * scale),
            amplitude: 1.0 / (a2 * scale),
            table_rows: table.as_ref().map_or(0, |t| t.rows),
            dzdt_min: lo,
            dzdt_max: hi,
        });
        debug_assert!(table.as_ref().map_or(true, |t| t.strips == scale as usize));
        layers.push(Layer { scale, amp: 1.0 / (a2 * scale), zfreq: a2 * scale * scale, table });
    }
    Ok(BumpySurface {
        inner: Arc::new(Inner { params: params.clone(), proto: *proto, layers, reports }),
        upto: n,
    })
}

impl BumpySurface {
    pub fn params(&self) -> &BumpyParams {
        &self.inner.params
    }

    pub fn prototype(&self) -> &BumpPrototype {
        &self.inner.proto
    }

    /// Number of layers in the full build.
    pub fn layers(&self) -> usize {
        self.inner.layers.len()
    }

    /// Number of layers summed by this view.
    pub fn depth(&self) -> usize {
        self.upto
    }

    pub fn alpha(&self) -> f64 {
        self.inner.params.alpha as f64
    }

    pub fn rho(&self) -> f64 {
        self.inner.params.rho as f64
    }

    pub fn reports(&self) -> &[LayerReport] {
        &self.inner.reports
    }

    /// The partial sum `psi_i`.
    pub fn partial(&self, i: usize) -> BumpySurface {
        BumpySurface { inner: self.inner.clone(), upto: i.min(self.layers()) }
    }

    /// `(value, d_x, d_z)` of `beta_j`.
    pub fn layer(&self, j: usize, x: f64, z: f64) -> (f64, f64, f64) {
        layer_eval(&self.inner.proto, &self.inner.layers[j], x, z)
    }

    /// `(value, d_x, d_z)` of `psi_i` for this view.
    pub fn eval_grad(&self, x: f64, z: f64) -> (f64, f64, f64) {
        sum_layers(&self.inner.proto, &self.inner.layers[..self.upto], x, z)
    }

    /// Certified upper bound on `psi_i`; the lower bound is 0.
    pub fn sup_bound(&self) -> f64 {
        self.inner.layers[..self.upto].iter().fold(0.0, |acc, l| acc + l.amp) * self.inner.proto.max_value()
    }

    /// Upper bound on `|d psi / dz|` for this view: per layer, amplitude
    /// times vertical frequency times the prototype bound, over the
    /// smallest traced `dz/dt`, with 5% slack for the table interpolant.
    pub fn dz_bound(&self) -> f64 {
        let pz = self.inner.proto.sup_bounds()[2];
        self.inner.layers[..self.upto]
            .iter()
            .zip(&self.inner.reports)
            .fold(0.0, |acc, (l, r)| acc + l.amp * l.zfreq * pz * 1.05 / r.dzdt_min)
    }

    /// Samples this view on a periodic grid over the unit square. The
    /// vertical spacing must resolve the finest layer to 1/16 of a cell.
    pub fn to_grid(&self, nx: usize, nz: usize, interp: Interp) -> Result<GridField> {
        if let Some(l) = self.inner.layers[..self.upto].last() {
            let need = 1.0 / (16.0 * l.zfreq);
            if 1.0 / nz as f64 > need || 1.0 / nx as f64 > 1.0 / (16.0 * l.scale) {
                return Err(Error::Resolution(format!("grid {nx}x{nz} is too coarse for {} layers", self.upto)));
            }
        }
        let samples: Vec<f64> = (0..nz)
            .into_par_iter()
            .flat_map_iter(|iz| {
                let z = iz as f64 / nz as f64;
                (0..nx).map(move |ix| (ix as f64 / nx as f64, z))
            })
            .map(|(x, z)| self.value(x, z))
            .collect();
        GridField::new(nx, nz, Window::UNIT, samples, true, interp)
    }

    pub fn manifest(&self, calibration: Option<&Calibration>) -> Manifest {
        Manifest {
            alpha: self.inner.params.alpha,
            rho: self.inner.params.rho,
            requested_layers: self.inner.params.layers,
            layers: self.layers(),
            eta: calibration.map(|c| c.eta),
            r: calibration.map(|c| c.r),
            big_r: calibration.map(|c| c.big_r),
            prototype: self.inner.proto,
            per_layer: self.inner.reports.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub alpha: u32,
    pub rho: u64,
    pub requested_layers: usize,
    pub layers: usize,
    pub eta: Option<f64>,
    pub r: Option<f64>,
    pub big_r: Option<f64>,
    pub prototype: BumpPrototype,
    pub per_layer: Vec<LayerReport>,
}

impl Surface for BumpySurface {
    fn value(&self, x: f64, z: f64) -> f64 {
        let proto = &self.inner.proto;
        self.inner.layers[..self.upto].iter().fold(0.0, |acc, l| acc + layer_eval(proto, l, x, z).0)
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        x.is_finite() && z.is_finite()
    }

    fn bounds_over(&self, _xa: f64, _xb: f64) -> (f64, f64) {
        (0.0, self.sup_bound())
    }

    fn spacing(&self) -> (f64, f64) {
        let depth = self.upto.max(1) as i32 - 1;
        let a2 = self.alpha() * self.alpha();
        let rho = self.rho();
        (rho.powi(-depth) / 16.0, rho.powi(-2 * depth) / (32.0 * a2))
    }

    fn gradient(&self, x: f64, z: f64) -> (f64, f64) {
        let (_, gx, gz) = self.eval_grad(x, z);
        (gx, gz)
    }
}

/// Sampled diagnostics of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalReport {
    pub alpha: u32,
    pub rho: u64,
    pub layers: usize,
    pub grid: usize,
    pub seed: u64,
    /// Certified `sup psi_i`, `i = 0..=L`.
    pub sup_bound: Vec<f64>,
    /// Sampled `max |psi_i|`.
    pub sup_sampled: Vec<f64>,
    /// Sampled `max |d psi_i / dz|` and the bound `2 rho^(i-1)`.
    pub dz_max: Vec<f64>,
    pub dz_bound: Vec<f64>,
    pub dzdt_min: f64,
    pub dzdt_max: f64,
    /// `max |D_i|`, `D_i = d_{i+1} psi_{i+1} - d_i psi_i`.
    pub d_sup: Vec<f64>,
    /// `<D_m, D_n>_U` as a row-major `L x L` matrix.
    pub d_gram: Vec<f64>,
    /// `max_{m<n} |<D_m, D_n>| alpha^4 rho^(n-m)`.
    pub ortho_constant: f64,
    /// `||d_i psi_i||_{L2(U)}`, `i = 0..=L`.
    pub hd_l2: Vec<f64>,
    /// `max_{i>=1} ||d_i psi_i||_{L2} / (sqrt(i) alpha^-2)`.
    pub sqrt_constant: f64,
    /// Largest `|psi|` sampled on the boundary of the unit square.
    pub boundary_max: f64,
    /// Largest `|psi(v) - psi(v + e)|` for unit shifts `e` at dyadic nodes.
    pub period_defect: f64,
}

/// Checks the derivative, orthogonality and L2 bounds on an `n x n`
/// stratified grid over the unit square (one jittered node per cell, so
/// layer periods finer than the grid do not alias).
pub fn verify_internal(surf: &BumpySurface, n: usize, seed: u64) -> Result<InternalReport> {
    if n < 2 {
        return Err(Error::Invalid("verification grid needs n >= 2".into()));
    }
    let big_l = surf.depth();
    let proto = &surf.inner.proto;
    let layers = &surf.inner.layers[..big_l];
    let alpha = surf.alpha();
    let rho = surf.rho();
    let h = 1.0 / n as f64;
    // per column: [sup psi_i (L+1), dz_max (L+1), d_sup (L), gram (L*L), hd2 (L+1)]
    let nacc = 3 * (big_l + 1) + big_l + big_l * big_l;
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|ix| {
            let mut rng = crate::field::rng_for(seed, ix as u64);
            let mut acc = vec![0.0; nacc];
            let mut vals = vec![(0.0, 0.0, 0.0); big_l];
            let mut hd = vec![0.0; big_l + 1];
            use rand::Rng;
            for iz in 0..n {
                let x = (ix as f64 + rng.gen::<f64>()) * h;
                let z = (iz as f64 + rng.gen::<f64>()) * h;
                for (j, l) in layers.iter().enumerate() {
                    vals[j] = layer_eval(proto, l, x, z);
                }
                let (mut p, mut px, mut pz) = (0.0, 0.0, 0.0);
                for i in 0..=big_l {
                    if i > 0 {
                        p += vals[i - 1].0;
                        px += vals[i - 1].1;
                        pz += vals[i - 1].2;
                    }
                    acc[i] = f64::max(acc[i], p.abs());
                    acc[big_l + 1 + i] = f64::max(acc[big_l + 1 + i], pz.abs());
                    hd[i] = px - p * pz;
                    acc[2 * (big_l + 1) + big_l + big_l * big_l + i] += hd[i] * hd[i] * h * h;
                }
                let base = 2 * (big_l + 1);
                for m in 0..big_l {
                    let dm = hd[m + 1] - hd[m];
                    acc[base + m] = f64::max(acc[base + m], dm.abs());
                    for k in 0..big_l {
                        let dk = hd[k + 1] - hd[k];
                        acc[base + big_l + m * big_l + k] += dm * dk * h * h;
                    }
                }
            }
            acc
        })
        .collect();
    let mut tot = vec![0.0; nacc];
    let base = 2 * (big_l + 1);
    for c in &cols {
        for k in 0..nacc {
            let is_sum = k >= base + big_l;
            tot[k] = if is_sum { tot[k] + c[k] } else { tot[k].max(c[k]) };
        }
    }
    let sup_sampled = tot[..=big_l].to_vec();
    let dz_max = tot[big_l + 1..base].to_vec();
    let d_sup = tot[base..base + big_l].to_vec();
    let d_gram = tot[base + big_l..base + big_l + big_l * big_l].to_vec();
    let hd_l2: Vec<f64> = tot[base + big_l + big_l * big_l..].iter().map(|v| v.sqrt()).collect();
    let mut ortho_constant = 0.0f64;
    for m in 0..big_l {
        for k in m + 1..big_l {
            let c = d_gram[m * big_l + k].abs() * alpha.powi(4) * rho.powi((k - m) as i32);
            ortho_constant = ortho_constant.max(c);
        }
    }
    let sqrt_constant = (1..=big_l).map(|i| hd_l2[i] / ((i as f64).sqrt() / (alpha * alpha))).fold(0.0, f64::max);
    // the flat first layer has dz/dt = 1
    let (dzdt_min, dzdt_max) = surf.reports()[..big_l].iter().fold((1.0f64, 1.0f64), |(a, b), r| (a.min(r.dzdt_min), b.max(r.dzdt_max)));

    let full = surf.partial(big_l);
    let mut boundary_max = 0.0f64;
    let mut period_defect = 0.0f64;
    for k in 0..=n {
        let t = k as f64 * h;
        for (x, z) in [(t, 0.0), (t, 1.0), (0.0, t), (1.0, t)] {
            boundary_max = boundary_max.max(full.value(x, z).abs());
        }
        for kz in (0..n).step_by((n / 64).max(1)) {
            let z = kz as f64 * h;
            let v = full.value(t, z);
            period_defect = period_defect.max((v - full.value(t + 1.0, z)).abs()).max((v - full.value(t, z + 1.0)).abs());
        }
    }
    Ok(InternalReport {
        alpha: surf.inner.params.alpha,
        rho: surf.inner.params.rho,
        layers: big_l,
        grid: n,
        seed,
        sup_bound: (0..=big_l).map(|i| surf.partial(i).sup_bound()).collect(),
        sup_sampled,
        dz_max,
        dz_bound: (0..=big_l).map(|i| 2.0 * rho.powi(i as i32 - 1)).collect(),
        dzdt_min,
        dzdt_max,
        d_sup,
        d_gram,
        ortho_constant,
        hd_l2,
        sqrt_constant,
        boundary_max,
        period_defect,
    })
}
