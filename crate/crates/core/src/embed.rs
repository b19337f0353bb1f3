//! Cut semimetrics from the epigraph of a periodic surface and the
//! semimetric `Delta` built from them.
//!
//! `l(h1, h2)` integrates the cut indicator over the fundamental domain
//! `{X^a Z^c Y^b : a, c in [0, 1)}`. The b-integral is done exactly when
//! the epigraph meets every b-fiber in a ray; otherwise by stratified
//! sampling. All node sets derive from one seed, so `Delta` is a fixed
//! function of its arguments.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumpy::{build, BumpPrototype, BumpyParams, BumpySurface, Calibration};
use crate::error::{Error, Result};
use crate::field::{rng_for, Surface};
use crate::heis::{Automorphism, HeisPoint};
use crate::word::{word_ball, LatticePoint};

/// Whether `q` lies strictly above the graph: `y(q) > psi(Pi(q))`.
pub fn in_epigraph<S: Surface + ?Sized>(f: &S, q: HeisPoint) -> bool {
    let v = q.project_v0();
    q.y > f.value(v.x, v.z)
}

/// 1 iff exactly one of `p h1`, `p h2` is in the epigraph.
pub fn lambda_cut<S: Surface + ?Sized>(p: HeisPoint, h1: HeisPoint, h2: HeisPoint, f: &S) -> u8 {
    (in_epigraph(f, p * h1) != in_epigraph(f, p * h2)) as u8
}

/// Value range of `psi` and a bound on `|d psi / dz|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldBounds {
    pub psi: (f64, f64),
    pub dz: f64,
}

impl FieldBounds {
    pub fn of_bumpy(f: &BumpySurface) -> Self {
        FieldBounds { psi: (0.0, f.sup_bound()), dz: f.dz_bound() }
    }
}

/// Largest `|x(h)| * dz` for which the b-fibers are treated as rays.
pub const RAY_CONTRACTION: f64 = 0.5;

/// Point `h` seen from the fiber over `(a, c)`: `X^a Z^c Y^b h` projects to
/// `(a + hx, w - b hx)` and has `y = b + hy`.
#[derive(Debug, Clone, Copy)]
struct Fiber {
    x: f64,
    w: f64,
    hx: f64,
    hy: f64,
}

impl Fiber {
    fn new(h: HeisPoint, a: f64, c: f64) -> Self {
        Fiber { x: a + h.x, w: c + h.z - 0.5 * h.x * h.y, hx: h.x, hy: h.y }
    }

    #[inline]
    fn above<S: Surface + ?Sized>(&self, f: &S, b: f64) -> bool {
        b + self.hy > f.value(self.x, self.w - b * self.hx)
    }

    /// Threshold `b*` with `{above} = (b*, inf)`, by fixed-point iteration
    /// of `b = psi(x, w - b hx) - hy` (a contraction by assumption).
    fn threshold<S: Surface + ?Sized>(&self, f: &S) -> f64 {
        let mut b = f.value(self.x, self.w) - self.hy;
        if self.hx == 0.0 {
            return b;
        }
        for _ in 0..200 {
            let nb = f.value(self.x, self.w - b * self.hx) - self.hy;
            let done = (nb - b).abs() <= 1e-15 * (1.0 + b.abs());
            b = nb;
            if done {
                break;
            }
        }
        b
    }
}

/// Budgets for `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllConfig {
    /// Nodes over `[0, 1)^2`, two per stratum.
    pub samples: usize,
    /// b-samples per undetermined segment on the sampled path.
    pub b_samples: usize,
    pub seed: u64,
}

impl EllConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        EllConfig { samples, b_samples: 64, seed }
    }
}

/// Fixed `(a, c)` nodes: `side x side` strata with two jittered nodes each.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub side: usize,
    pub nodes: Vec<(f64, f64)>,
    pub b_samples: usize,
    pub seed: u64,
}

impl NodeSet {
    pub fn new(cfg: &EllConfig) -> Result<Self> {
        if cfg.samples < 2 {
            return Err(Error::Invalid("ell needs at least 2 samples".into()));
        }
        let side = (((cfg.samples / 2) as f64).sqrt().floor() as usize).max(1);
        let h = 1.0 / side as f64;
        let mut nodes = Vec::with_capacity(2 * side * side);
        for i in 0..side {
            let mut rng = rng_for(cfg.seed, i as u64);
            for j in 0..side {
                for _ in 0..2 {
                    nodes.push(((i as f64 + rng.gen::<f64>()) * h, (j as f64 + rng.gen::<f64>()) * h));
                }
            }
        }
        Ok(NodeSet { side, nodes, b_samples: cfg.b_samples.max(1), seed: cfg.seed })
    }

    fn strata(&self) -> usize {
        self.side * self.side
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Nodes where the b-integral was sampled rather than exact.
    pub sampled_nodes: usize,
}

/// `int |1_S1 - 1_S2| db` over one fiber.
fn fiber_mass<S: Surface + ?Sized>(f: &S, bounds: &FieldBounds, f1: &Fiber, f2: &Fiber, node: usize, ns: &NodeSet) -> (f64, bool) {
    let ray = |fb: &Fiber| fb.hx == 0.0 || fb.hx.abs() * bounds.dz < RAY_CONTRACTION;
    if ray(f1) && ray(f2) {
        return ((f1.threshold(f) - f2.threshold(f)).abs(), false);
    }
    // membership is decided outside [psi_lo - hy, psi_hi - hy]
    let band = |fb: &Fiber| (bounds.psi.0 - fb.hy, bounds.psi.1 - fb.hy);
    let (b1, b2) = (band(f1), band(f2));
    let mut cuts = vec![b1.0, b1.1, b2.0, b2.1];
    cuts.sort_by(f64::total_cmp);
    let decided = |bd: (f64, f64), b: f64| -> Option<bool> {
        if b < bd.0 {
            Some(false)
        } else if b > bd.1 {
            Some(true)
        } else {
            None
        }
    };
    let mut rng = rng_for(ns.seed ^ 0x5eed_b0b5, node as u64);
    let mut mass = 0.0;
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        match (decided(b1, mid), decided(b2, mid)) {
            (Some(p), Some(q)) => {
                if p != q {
                    mass += hi - lo;
                }
            }
            (p, q) => {
                let k = ns.b_samples;
                let hb = (hi - lo) / k as f64;
                let mut hits = 0usize;
                for i in 0..k {
                    let b = lo + (i as f64 + rng.gen::<f64>()) * hb;
                    let s1 = p.unwrap_or_else(|| f1.above(f, b));
                    let s2 = q.unwrap_or_else(|| f2.above(f, b));
                    hits += (s1 != s2) as usize;
                }
                mass += hits as f64 * hb;
            }
        }
    }
    (mass, true)
}

/// `l(h1, h2)` on fixed nodes.
pub fn ell_on<S: Surface + ?Sized>(f: &S, bounds: &FieldBounds, h1: HeisPoint, h2: HeisPoint, ns: &NodeSet) -> EllEstimate {
    if h1 == h2 {
        return EllEstimate { value: 0.0, stderr: 0.0, sampled_nodes: 0 };
    }
    let s = ns.strata();
    let (mut sum, mut var, mut sampled) = (0.0, 0.0, 0usize);
    for k in 0..s {
        let mut v = [0.0; 2];
        for (t, vt) in v.iter_mut().enumerate() {
            let idx = 2 * k + t;
            let (a, c) = ns.nodes[idx];
            let (m, smp) = fiber_mass(f, bounds, &Fiber::new(h1, a, c), &Fiber::new(h2, a, c), idx, ns);
            *vt = m;
            sampled += smp as usize;
        }
        sum += 0.5 * (v[0] + v[1]);
        // within-stratum variance of the mean of two
        var += 0.25 * (v[0] - v[1]) * (v[0] - v[1]) * 0.5;
    }
    EllEstimate { value: sum / s as f64, stderr: var.sqrt() / s as f64, sampled_nodes: sampled }
}

/// `l(h1, h2) = int_P lambda_p(h1, h2) dp` for an `A`-periodic surface.
pub fn ell<S: Surface + ?Sized>(f: &S, bounds: &FieldBounds, h1: HeisPoint, h2: HeisPoint, cfg: &EllConfig) -> Result<EllEstimate> {
    if f.window().is_some() {
        return Err(Error::Invalid("ell needs a surface defined on all of V0".into()));
    }
    let ns = NodeSet::new(cfg)?;
    Ok(parallel_ell(f, bounds, h1, h2, &ns))
}

/// `ell_on` with strata rows evaluated in parallel and reduced in order.
pub fn parallel_ell<S: Surface + ?Sized>(f: &S, bounds: &FieldBounds, h1: HeisPoint, h2: HeisPoint, ns: &NodeSet) -> EllEstimate {
    if h1 == h2 {
        return EllEstimate { value: 0.0, stderr: 0.0, sampled_nodes: 0 };
    }
    let rows: Vec<(f64, f64, usize)> = (0..ns.side)
        .into_par_iter()
        .map(|i| {
            let (mut sum, mut var, mut sampled) = (0.0, 0.0, 0usize);
            for j in 0..ns.side {
                let k = i * ns.side + j;
                let mut v = [0.0; 2];
                for (t, vt) in v.iter_mut().enumerate() {
                    let idx = 2 * k + t;
                    let (a, c) = ns.nodes[idx];
                    let (m, smp) = fiber_mass(f, bounds, &Fiber::new(h1, a, c), &Fiber::new(h2, a, c), idx, ns);
                    *vt = m;
                    sampled += smp as usize;
                }
                sum += 0.5 * (v[0] + v[1]);
                var += 0.125 * (v[0] - v[1]) * (v[0] - v[1]);
            }
            (sum, var, sampled)
        })
        .collect();
    let s = ns.strata() as f64;
    let (sum, var, sampled) = rows.iter().fold((0.0, 0.0, 0), |a, r| (a.0 + r.0, a.1 + r.1, a.2 + r.2));
    EllEstimate { value: sum / s, stderr: var.sqrt() / s, sampled_nodes: sampled }
}

/// Settings for `Delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutMetricConfig {
    /// Scale budget, `k > 8`.
    pub k: f64,
    /// `None` selects the integer fixed by `k` and `rho`.
    pub alpha: Option<u32>,
    pub rho: f64,
    /// Scale constants from the calibration.
    pub r: f64,
    pub big_r: f64,
    pub theta_nodes: usize,
    pub a_nodes: usize,
    pub ell: EllConfig,
}

impl CutMetricConfig {
    pub fn from_calibration(cal: &Calibration, k: f64, seed: u64) -> Self {
        CutMetricConfig {
            k,
            alpha: None,
            rho: cal.rho as f64,
            r: cal.r,
            big_r: cal.big_r,
            theta_nodes: 32,
            a_nodes: 64,
            ell: EllConfig::new(256, seed),
        }
    }

    /// Scale window `[r - log2 rho, R + log2 rho]`.
    pub fn window(&self) -> (f64, f64) {
        (self.r - self.rho.log2(), self.big_r + self.rho.log2())
    }

    pub fn resolved_alpha(&self) -> Result<u32> {
        match self.alpha {
            Some(a) if a >= 1 => Ok(a),
            Some(_) => Err(Error::Invalid("alpha must be at least 1".into())),
            None => auto_alpha(self.k, self.rho),
        }
    }
}

/// The integer in `[q, q + 1)` for `q = (log_rho(k / 8))^(1/4)`, at least 1.
pub fn auto_alpha(k: f64, rho: f64) -> Result<u32> {
    if !(k > 8.0) || !(rho > 1.0) {
        return Err(Error::Invalid("alpha selection needs k > 8 and rho > 1".into()));
    }
    let q = ((k / 8.0).ln() / rho.ln()).powf(0.25);
    Ok((q.ceil() as u32).max(1))
}

/// Builds the surface for a cut-metric configuration: `alpha^4` layers,
/// capped by the flow-table budget.
pub fn bumpy_for(cfg: &CutMetricConfig, proto: &BumpPrototype) -> Result<BumpySurface> {
    let alpha = cfg.resolved_alpha()?;
    let layers = (alpha as usize).pow(4);
    build(&BumpyParams::new(alpha, cfg.rho.round() as u64, layers), proto)
}

/// Value of `Delta` with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub value: f64,
    /// `k alpha Lambda` part.
    pub lambda_part: f64,
    /// Euclidean part `|pi(h1) - pi(h2)|`.
    pub horizontal: f64,
    /// Propagated Monte Carlo error of the `Lambda` part.
    pub mc_err: f64,
    /// Difference from the same rule on every other node.
    pub quad_err: f64,
    pub sampled_nodes: usize,
}

impl DeltaValue {
    pub fn err(&self) -> f64 {
        self.mc_err + self.quad_err
    }
}

/// `Delta` for a fixed surface and node sets.
pub struct CutMetric<'a, S: ?Sized> {
    pub f: &'a S,
    pub bounds: FieldBounds,
    pub cfg: CutMetricConfig,
    pub alpha: u32,
    nodes: NodeSet,
    a_grid: Vec<f64>,
    thetas: Vec<f64>,
}

/// Trapezoid weights on `n` points over `[a, b]`.
fn trapezoid(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / (n - 1) as f64;
    let x = (0..n).map(|i| a + h * i as f64).collect();
    let w = (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect();
    (x, w)
}

impl<'a, S: Surface + ?Sized> CutMetric<'a, S> {
    pub fn new(f: &'a S, bounds: FieldBounds, cfg: CutMetricConfig) -> Result<Self> {
        if f.window().is_some() {
            return Err(Error::Invalid("the cut metric needs a surface defined on all of V0".into()));
        }
        if cfg.theta_nodes < 2 || cfg.a_nodes < 3 {
            return Err(Error::Invalid("need at least 2 angles and 3 scale points".into()));
        }
        let alpha = cfg.resolved_alpha()?;
        let nodes = NodeSet::new(&cfg.ell)?;
        let (lo, hi) = cfg.window();
        let a_grid = trapezoid(lo, hi, cfg.a_nodes).0;
        let thetas = (0..cfg.theta_nodes).map(|j| 2.0 * std::f64::consts::PI * j as f64 / cfg.theta_nodes as f64).collect();
        Ok(CutMetric { f, bounds, cfg, alpha, nodes, a_grid, thetas })
    }

    pub fn node_set(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn ell(&self, h1: HeisPoint, h2: HeisPoint) -> EllEstimate {
        ell_on(self.f, &self.bounds, h1, h2, &self.nodes)
    }

    /// Per-angle `l` values; `M` is their periodic trapezoid sum.
    fn m_terms(&self, h1: HeisPoint, h2: HeisPoint) -> Vec<EllEstimate> {
        self.thetas
            .iter()
            .map(|&t| {
                let r = Automorphism::Rotate { theta: t };
                self.ell(r.apply_unchecked(h1), r.apply_unchecked(h2))
            })
            .collect()
    }

    /// `M(h1, h2) = int_0^{2 pi} l(R_theta h1, R_theta h2) dtheta`.
    pub fn big_m(&self, h1: HeisPoint, h2: HeisPoint) -> EllEstimate {
        let terms = self.m_terms(h1, h2);
        let w = 2.0 * std::f64::consts::PI / self.thetas.len() as f64;
        let value = w * terms.iter().map(|e| e.value).sum::<f64>();
        let stderr = w * terms.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
        EllEstimate { value, stderr, sampled_nodes: terms.iter().map(|e| e.sampled_nodes).sum() }
    }

    /// `Lambda(h1, h2) = int 2^a M(s_{2^-a} h1, s_{2^-a} h2) da` over the
    /// scale window, with the coarse-rule difference as quadrature error.
    pub fn big_lambda(&self, h1: HeisPoint, h2: HeisPoint) -> (f64, f64, f64, usize) {
        if h1 == h2 {
            return (0.0, 0.0, 0.0, 0);
        }
        let n = self.a_grid.len();
        let (lo, hi) = self.cfg.window();
        let (_, w) = trapezoid(lo, hi, n);
        let nt = self.thetas.len();
        let cells: Vec<Vec<EllEstimate>> = self
            .a_grid
            .par_iter()
            .map(|&a| {
                let t = (-a).exp2();
                let s = Automorphism::Stretch { a: t, b: t };
                self.m_terms(s.apply_unchecked(h1), s.apply_unchecked(h2))
            })
            .collect();
        let tw = 2.0 * std::f64::consts::PI / nt as f64;
        let m: Vec<f64> = cells.iter().map(|c| tw * c.iter().map(|e| e.value).sum::<f64>()).collect();
        let value: f64 = self.a_grid.iter().zip(&m).zip(&w).map(|((a, m), w)| w * a.exp2() * m).sum();
        let var: f64 = self
            .a_grid
            .iter()
            .zip(&cells)
            .zip(&w)
            .map(|((a, c), w)| {
                let s = w * a.exp2() * tw;
                s * s * c.iter().map(|e| e.stderr * e.stderr).sum::<f64>()
            })
            .sum();
        // coarse rule: every other angle and every other scale point
        let quad_err = if n % 2 == 1 && nt % 2 == 0 {
            let (_, wc) = trapezoid(lo, hi, (n + 1) / 2);
            let coarse: f64 = (0..n)
                .step_by(2)
                .zip(&wc)
                .map(|(i, w)| {
                    let mc = 2.0 * tw * cells[i].iter().step_by(2).map(|e| e.value).sum::<f64>();
                    w * self.a_grid[i].exp2() * mc
                })
                .sum();
            (coarse - value).abs()
        } else {
            let coarse: f64 = self
                .a_grid
                .iter()
                .zip(&cells)
                .zip(&w)
                .map(|((a, c), w)| w * a.exp2() * 2.0 * tw * c.iter().step_by(2).map(|e| e.value).sum::<f64>())
                .sum();
            (coarse - value).abs()
        };
        let sampled = cells.iter().flatten().map(|e| e.sampled_nodes).sum();
        (value, var.sqrt(), quad_err, sampled)
    }

    /// `Delta(h1, h2) = k alpha Lambda(s h1, s h2) + |pi(h1) - pi(h2)|` with
    /// `s` the dilation by `1 / (k alpha)`.
    pub fn delta(&self, h1: HeisPoint, h2: HeisPoint) -> DeltaValue {
        let ka = self.cfg.k * self.alpha as f64;
        let s = Automorphism::Stretch { a: 1.0 / ka, b: 1.0 / ka };
        let (lam, mc, quad, sampled) = self.big_lambda(s.apply_unchecked(h1), s.apply_unchecked(h2));
        let horizontal = (h1.x - h2.x).hypot(h1.y - h2.y);
        DeltaValue { value: ka * lam + horizontal, lambda_part: ka * lam, horizontal, mc_err: ka * mc, quad_err: ka * quad, sampled_nodes: sampled }
    }

    /// `Delta(0, Z^c) / (k alpha min(sqrt(c') / alpha, alpha^-2))` with
    /// `c' = c / (k alpha)^2`, the center bound in rescaled form.
    pub fn center_ratio(&self, c: f64) -> (f64, DeltaValue) {
        let a = self.alpha as f64;
        let ka = self.cfg.k * a;
        let cp = c.abs() / (ka * ka);
        let d = self.delta(HeisPoint::IDENTITY, HeisPoint::z_gen(c));
        (d.value / (ka * (cp.sqrt() / a).min(1.0 / (a * a))), d)
    }
}

/// `|x - chi| + |y - upsilon| + sqrt|2z - 2zeta - x upsilon + y chi| / alpha`.
pub fn formula_side(g: HeisPoint, h: HeisPoint, alpha: f64) -> f64 {
    (g.x - h.x).abs() + (g.y - h.y).abs() + (2.0 * g.z - 2.0 * h.z - g.x * h.y + g.y * h.x).abs().sqrt() / alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub n: u32,
    /// Above this many unordered pairs, a seeded subset of this size is used.
    pub max_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub g: LatticePoint,
    pub h: LatticePoint,
    pub delta: f64,
    pub delta_err: f64,
    pub formula_side: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessSummary {
    pub n: u32,
    pub ball_size: usize,
    pub pairs: usize,
    pub exhaustive: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub alpha: u32,
    pub config: CutMetricConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessReport {
    pub rows: Vec<PairRow>,
    pub summary: HarnessSummary,
}

impl HarnessReport {
    /// CSV with columns `g,h,delta,formula_side,ratio`; points as `x:y:2z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["g", "h", "delta", "formula_side", "ratio"])?;
        let fmt = |p: &LatticePoint| format!("{}:{}:{}", p.x, p.y, p.two_z);
        for r in &self.rows {
            wr.write_record([fmt(&r.g), fmt(&r.h), r.delta.to_string(), r.formula_side.to_string(), r.ratio.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `Delta` against the formula side over pairs of the word ball `B_n`.
pub fn distortion_harness<S: Surface + ?Sized>(metric: &CutMetric<'_, S>, hc: &HarnessConfig) -> Result<HarnessReport> {
    let ball = word_ball(hc.n)?;
    let pts: Vec<LatticePoint> = ball.elements.iter().map(|e| e.0).collect();
    let m = pts.len();
    let total = m * (m - 1) / 2;
    let exhaustive = total <= hc.max_pairs;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
    } else {
        let mut rng = rng_for(hc.seed, 0);
        let mut out = Vec::with_capacity(hc.max_pairs);
        while out.len() < hc.max_pairs {
            let i = rng.gen_range(0..m);
            let j = rng.gen_range(0..m);
            if i != j {
                out.push((i.min(j), i.max(j)));
            }
        }
        out
    };
    let alpha = metric.alpha as f64;
    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|&(i, j)| {
            let (g, h) = (pts[i], pts[j]);
            let d = metric.delta(g.to_point(), h.to_point());
            let fs = formula_side(g.to_point(), h.to_point(), alpha);
            PairRow { g, h, delta: d.value, delta_err: d.err(), formula_side: fs, ratio: d.value / fs }
        })
        .collect();
    let (min_ratio, max_ratio) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    Ok(HarnessReport {
        summary: HarnessSummary {
            n: hc.n,
            ball_size: m,
            pairs: rows.len(),
            exhaustive,
            min_ratio,
            max_ratio,
            alpha: metric.alpha,
            config: metric.cfg.clone(),
            seed: hc.seed,
        },
        rows,
    })
}
