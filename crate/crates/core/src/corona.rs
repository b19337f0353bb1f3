//! Pseudoquads, the greedy subdivision into a foliated patchwork, weights,
//! the weighted Carleson ratio and approximating planes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{column_sums, flow_char, integrate, CharCurve, Quadrature, Region, Surface};
use crate::nonmono::{fit_quadratic, is_paramonotone, omega_p, OmegaConfig};
use crate::vper::{lq_norm, profile_on, steps_for, ScaleProfile, POINTS_PER_DECADE};

/// Default lattice step for characteristic curves; cut abscissas of a
/// dyadic root stay on this lattice down to width `2^-13`.
pub const CURVE_STEP: f64 = 1.0 / 8192.0;

/// Region bounded by two vertical segments and two characteristic curves,
/// with its parabolic model `|z - h(x)| <= half_height` over the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudoquad {
    pub x0: f64,
    pub x1: f64,
    /// Bounding curves, sampled over four times the base.
    pub lower: CharCurve,
    pub upper: CharCurve,
    /// Model centerline `h[0] + h[1] x + h[2] x^2`.
    pub h: [f64; 3],
    pub half_height: f64,
    /// `sup_{4I} max(|g1 - h1|, |g2 - h2|) / dz`.
    pub rectilinearity: f64,
    pub area: f64,
}

fn quad_at(h: &[f64; 3], x: f64) -> f64 {
    h[0] + x * (h[1] + x * h[2])
}

/// Cell count for Simpson sums over `[a, b]` on curves with lattice `step`.
fn simpson_cells(a: f64, b: f64, step: f64) -> usize {
    (((b - a) / step - 1e-9).ceil() as usize).max(16)
}

/// Composite Simpson rule; exact for the piecewise cubic curves when the
/// cells align with the curve lattice.
fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let x = a + i as f64 * h;
        let xe = if i + 1 == n { b } else { x + h };
        s += (f(x) + 4.0 * f(0.5 * (x + xe)) + f(xe)) * (xe - x) / 6.0;
    }
    s
}

impl Pseudoquad {
    /// Pseudoquad on `[x0, x1]` with the given bounding curves and model.
    pub fn with_model(x0: f64, x1: f64, lower: CharCurve, upper: CharCurve, h: [f64; 3], half_height: f64) -> Result<Self> {
        if !(x0 < x1) {
            return Err(Error::Invalid("pseudoquad base must have positive length".into()));
        }
        if !(half_height > 0.0) {
            return Err(Error::Invalid("pseudoquad model must have positive height".into()));
        }
        let dx = x1 - x0;
        let xc = 0.5 * (x0 + x1);
        let (lo4, hi4) = (xc - 2.0 * dx, xc + 2.0 * dx);
        for c in [&lower, &upper] {
            let (a, b) = c.x_range();
            if a > lo4 + 1e-12 || b < hi4 - 1e-12 {
                return Err(Error::Invalid("bounding curves must cover four times the base".into()));
            }
        }
        let step = lower.h.min(upper.h);
        let n = simpson_cells(x0, x1, step);
        for i in 0..=2 * n {
            let x = x0 + dx * i as f64 / (2 * n) as f64;
            if !(lower.eval(x) < upper.eval(x)) {
                return Err(Error::Invalid(format!("bounding curves meet at x = {x}")));
            }
        }
        let area = simpson(x0, x1, n, |x| upper.eval(x) - lower.eval(x));
        let dz = 2.0 * half_height;
        let m4 = 4 * simpson_cells(x0, x1, step);
        let mut rect = 0.0f64;
        for i in 0..=m4 {
            let x = lo4 + 4.0 * dx * i as f64 / m4 as f64;
            let c = quad_at(&h, x);
            rect = rect.max((lower.eval(x) - (c - half_height)).abs()).max((upper.eval(x) - (c + half_height)).abs());
        }
        Ok(Pseudoquad { x0, x1, lower, upper, h, half_height, rectilinearity: rect / dz, area })
    }

    /// Pseudoquad whose model is fitted to the curves: the centerline is
    /// the least-squares quadratic through the mid-curve over the base and
    /// the half-height is the mean half-gap.
    pub fn from_curves(x0: f64, x1: f64, lower: CharCurve, upper: CharCurve) -> Result<Self> {
        let xc = 0.5 * (x0 + x1);
        let n = 4 * simpson_cells(x0, x1, lower.h.min(upper.h));
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / n as f64;
                (x - xc, 0.5 * (lower.eval(x) + upper.eval(x)))
            })
            .collect();
        let k = fit_quadratic(&pts);
        let cells = simpson_cells(x0, x1, lower.h.min(upper.h));
        let half = 0.5 * simpson(x0, x1, cells, |x| upper.eval(x) - lower.eval(x)) / (x1 - x0);
        Self::with_model(x0, x1, lower, upper, centered_to_absolute(k, xc), half)
    }

    pub fn dx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.half_height
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    /// `dx / sqrt(dz)`.
    pub fn aspect(&self) -> f64 {
        self.dx() / self.dz().sqrt()
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// `|Q| / aspect^4`.
    pub fn weight(&self) -> f64 {
        self.area / self.aspect().powi(4)
    }

    /// Scaled model `{|x - xc| <= r dx / 2, |z - h(x)| <= r^2 dz / 2}`.
    pub fn scaled_region(&self, r: f64) -> Region {
        let xc = self.center_x();
        let w = 0.5 * r * self.dx();
        let hh = r * r * self.half_height;
        Region::Parabolic { x0: xc - w, x1: xc + w, h: self.h, lo: -hh, hi: hh }
    }

    /// The pseudoquad itself as a band region sampled at `n + 1` abscissas.
    pub fn region(&self, n: usize) -> Region {
        let n = n.max(1);
        let xs = (0..=n).map(|i| self.x0 + self.dx() * i as f64 / n as f64);
        let (lower, upper) = xs.map(|x| (self.lower.eval(x), self.upper.eval(x))).unzip();
        Region::Band { x0: self.x0, x1: self.x1, lower, upper }
    }

    fn curve_step(&self) -> f64 {
        self.lower.h.min(self.upper.h)
    }

    /// Restriction of the curves to four times a sub-base.
    fn sub_curves(&self, a: f64, b: f64) -> (CharCurve, CharCurve) {
        let (c, d) = (0.5 * (a + b), b - a);
        let cut = |g: &CharCurve| {
            let lo = (((c - 2.0 * d - g.x0) / g.h) + 1e-9).floor().max(0.0) as usize;
            let hi = ((((c + 2.0 * d - g.x0) / g.h) - 1e-9).ceil() as usize).min(g.len() - 1);
            g.slice(lo, hi.max(lo + 1))
        };
        (cut(&self.lower), cut(&self.upper))
    }

    /// Halves at `x = (x0 + x1) / 2`; both inherit the parent model.
    pub fn cut_vertical(&self) -> Result<(Pseudoquad, Pseudoquad)> {
        let xm = self.center_x();
        let (l1, u1) = self.sub_curves(self.x0, xm);
        let (l2, u2) = self.sub_curves(xm, self.x1);
        Ok((
            Pseudoquad::with_model(self.x0, xm, l1, u1, self.h, self.half_height)?,
            Pseudoquad::with_model(xm, self.x1, l2, u2, self.h, self.half_height)?,
        ))
    }

    /// Cut along the characteristic curve through the midpoint of the two
    /// boundary points on the center vertical line. Both halves share the
    /// model height `d`, the mean half-gap of the parent, and sit below and
    /// above the least-squares quadratic `k` through the cut curve.
    pub fn cut_horizontal<S: Surface + ?Sized>(&self, f: &S) -> Result<(Pseudoquad, Pseudoquad, CharCurve)> {
        let xm = self.center_x();
        let zm = 0.5 * (self.lower.eval(xm) + self.upper.eval(xm));
        let d = self.dx();
        let c = flow_char(f, (xm, zm), (xm - 2.0 * d, xm + 2.0 * d), self.curve_step())?;
        let n = 4 * simpson_cells(self.x0, self.x1, self.curve_step());
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = self.x0 + d * i as f64 / n as f64;
                (x - xm, c.eval(x))
            })
            .collect();
        let k = centered_to_absolute(fit_quadratic(&pts), xm);
        let half_gap = self.area / d * 0.5;
        let q = 0.5 * half_gap;
        let lo = Pseudoquad::with_model(self.x0, self.x1, self.lower.clone(), c.clone(), [k[0] - q, k[1], k[2]], q)?;
        let hi = Pseudoquad::with_model(self.x0, self.x1, c.clone(), self.upper.clone(), [k[0] + q, k[1], k[2]], q)?;
        Ok((lo, hi, c))
    }
}

fn centered_to_absolute(k: [f64; 3], xc: f64) -> [f64; 3] {
    [k[0] - k[1] * xc + k[2] * xc * xc, k[1] - 2.0 * k[2] * xc, k[2]]
}

/// Pseudoquad over `base` bounded by the characteristic curves through the
/// two seed points, flowed over four times the base.
pub fn make_pseudoquad<S: Surface + ?Sized>(f: &S, base: (f64, f64), lower_seed: (f64, f64), upper_seed: (f64, f64), step: f64) -> Result<Pseudoquad> {
    let (a, b) = base;
    if !(a < b) {
        return Err(Error::Invalid("pseudoquad base must have positive length".into()));
    }
    let (c, d) = (0.5 * (a + b), b - a);
    let span = (c - 2.0 * d, c + 2.0 * d);
    for s in [lower_seed, upper_seed] {
        if s.0 < a || s.0 > b {
            return Err(Error::Invalid("seed abscissas must lie in the base".into()));
        }
    }
    let lower = flow_char(f, lower_seed, span, step)?;
    let upper = flow_char(f, upper_seed, span, step)?;
    Pseudoquad::from_curves(a, b, lower, upper)
}

/// Affine `a + b x` and its normalized `L1` residual on `10 Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxPlane {
    pub a: f64,
    pub b: f64,
    /// `||F - f||_{L1(10Q)} dx / (|Q| dz)`.
    pub sigma_residual: f64,
}

/// Least-squares plane over `10 Q`; the residual is reported in `L1`.
pub fn approx_plane<S: Surface + ?Sized>(f: &S, q: &Pseudoquad, quad: &Quadrature) -> Result<ApproxPlane> {
    let big = q.scaled_region(10.0);
    big.check_inside(f)?;
    let xc = q.center_x();
    let cols = column_sums(&big, quad, |x, z| {
        let s = x - xc;
        let v = f.value(x, z);
        [1.0, s, s * s, v, s * v]
    });
    let mut m = [0.0f64; 5];
    for c in &cols {
        for k in 0..5 {
            m[k] += c[k];
        }
    }
    let det = m[0] * m[2] - m[1] * m[1];
    if !(det.abs() > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let slope = (m[0] * m[4] - m[1] * m[3]) / det;
    let mean = (m[3] - slope * m[1]) / m[0];
    let a = mean - slope * xc;
    let l1 = integrate(&big, quad, |x, z| (a + slope * x - f.value(x, z)).abs());
    Ok(ApproxPlane { a, b: slope, sigma_residual: l1 * q.dx() / (q.area * q.dz()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cut {
    Vertical,
    Horizontal,
    Leaf,
}

/// Ω^P density measured at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub density: f64,
    pub stderr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub cut: Cut,
    pub children: Vec<usize>,
    pub quad: Pseudoquad,
    pub omega: Option<DensityRecord>,
    pub plane: Option<ApproxPlane>,
    /// Absolute area mismatch between the cell and its children.
    pub tiling_defect: f64,
}

impl Node {
    pub fn weight(&self) -> f64 {
        self.quad.weight()
    }
}

/// Subdivision settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaConfig {
    pub eta: f64,
    pub big_r: f64,
    pub r: f64,
    pub max_depth: usize,
    pub min_width: f64,
    /// Ω^P budget per node; its seed is mixed with the node path.
    pub omega: OmegaConfig,
    /// Measure densities at leaves too.
    pub leaf_density: bool,
    /// Quadrature for approximating planes on horizontally cut nodes.
    pub plane_quad: (usize, usize),
}

impl CoronaConfig {
    pub fn new(seed: u64) -> Self {
        CoronaConfig {
            eta: 0.05,
            big_r: 8.0,
            r: 4.0,
            max_depth: 10,
            min_width: 0.0,
            omega: OmegaConfig::new(2048, seed),
            leaf_density: true,
            plane_quad: (64, 64),
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the node at heap position `path` (root 1, children `2p`, `2p+1`).
pub fn node_seed(seed: u64, path: u64) -> u64 {
    mix(seed ^ mix(path))
}

struct Built {
    nodes: Vec<Node>,
}

fn build<S: Surface + ?Sized>(f: &S, q: Pseudoquad, depth: usize, path: u64, cfg: &CoronaConfig) -> Result<Built> {
    let can_cut = depth < cfg.max_depth && q.dx() >= cfg.min_width;
    let measure = can_cut || cfg.leaf_density;
    let mut ocfg = cfg.omega.clone();
    ocfg.seed = node_seed(cfg.omega.seed, path);
    let pm = if measure { Some(is_paramonotone(f, &q, cfg.eta, cfg.big_r, cfg.r, &ocfg)?) } else { None };
    let omega = pm.as_ref().map(|p| DensityRecord { density: p.density, stderr: p.estimate.stderr / q.area, threshold: p.threshold });
    let leaf = |q: Pseudoquad| Node { id: 0, parent: None, depth, cut: Cut::Leaf, children: vec![], quad: q, omega, plane: None, tiling_defect: 0.0 };
    if !can_cut {
        return Ok(Built { nodes: vec![leaf(q)] });
    }
    let horizontal = pm.as_ref().map_or(false, |p| p.paramonotone);
    let (left, right, cut, defect, plane) = if horizontal {
        let (lo, hi, c) = q.cut_horizontal(f)?;
        // the cut curve must stay between the bounding curves on the base
        let cells = simpson_cells(q.x0, q.x1, q.curve_step());
        let escape = simpson(q.x0, q.x1, cells, |x| (q.lower.eval(x) - c.eval(x)).max(0.0) + (c.eval(x) - q.upper.eval(x)).max(0.0));
        let defect = (q.area - lo.area - hi.area).abs() + 2.0 * escape;
        let plane = approx_plane(f, &q, &Quadrature::Midpoint { nx: cfg.plane_quad.0, nz: cfg.plane_quad.1 })?;
        (lo, hi, Cut::Horizontal, defect, Some(plane))
    } else {
        let (l, r) = q.cut_vertical()?;
        let defect = (q.area - l.area - r.area).abs();
        (l, r, Cut::Vertical, defect, None)
    };
    let (a, b) = rayon::join(|| build(f, left, depth + 1, 2 * path, cfg), || build(f, right, depth + 1, 2 * path + 1, cfg));
    let (a, b) = (a?, b?);
    let mut node = leaf(q);
    node.cut = cut;
    node.plane = plane;
    node.tiling_defect = defect;
    let mut nodes = Vec::with_capacity(1 + a.nodes.len() + b.nodes.len());
    nodes.push(node);
    // preorder ids: root, left subtree, right subtree
    let off_a = 1;
    let off_b = 1 + a.nodes.len();
    for (sub, off) in [(a.nodes, off_a), (b.nodes, off_b)] {
        for mut n in sub {
            n.id += off;
            n.parent = Some(n.parent.map_or(0, |p| p + off));
            n.children.iter_mut().for_each(|c| *c += off);
            nodes.push(n);
        }
    }
    nodes[0].children = vec![off_a, off_b];
    Ok(Built { nodes })
}

/// Binary tree of pseudoquads in preorder; `nodes[i].id == i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchworkTree {
    pub nodes: Vec<Node>,
    pub config: CoronaConfig,
}

/// Greedy subdivision: paramonotone cells are cut horizontally, the others
/// vertically, until `max_depth` or width below `min_width`.
pub fn subdivide<S: Surface + ?Sized>(f: &S, root: Pseudoquad, cfg: &CoronaConfig) -> Result<PatchworkTree> {
    if !(cfg.eta > 0.0 && cfg.big_r > 0.0 && cfg.r >= 1.0) {
        return Err(Error::Invalid("subdivision needs eta > 0, R > 0 and r >= 1".into()));
    }
    let mut nodes = build(f, root, 0, 1, cfg)?.nodes;
    for (i, n) in nodes.iter_mut().enumerate() {
        debug_assert_eq!(n.id, i);
        n.id = i;
    }
    Ok(PatchworkTree { nodes, config: cfg.clone() })
}

/// One row of the JSON tree dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub id: usize,
    pub parent: Option<usize>,
    pub cut: Cut,
    pub x0: f64,
    pub x1: f64,
    pub delta_z: f64,
    pub aspect: f64,
    pub area: f64,
    pub omega_density: Option<f64>,
    pub weight: f64,
    pub rectilinearity: f64,
    pub plane: Option<ApproxPlane>,
}

impl PatchworkTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn vertical(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.cut == Cut::Vertical)
    }

    pub fn horizontal(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.cut == Cut::Horizontal)
    }

    /// `W(S)` for the nodes with the given ids.
    pub fn weight<I: IntoIterator<Item = usize>>(&self, ids: I) -> f64 {
        ids.into_iter().map(|i| self.nodes[i].weight()).sum()
    }

    pub fn weight_where<P: Fn(&Node) -> bool>(&self, pred: P) -> f64 {
        self.nodes.iter().filter(|n| pred(n)).map(Node::weight).sum()
    }

    /// Ids of `v` and all its descendants.
    pub fn descendants(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.nodes[out[i]].children.iter().copied());
            i += 1;
        }
        out
    }

    /// Per node: `W(D(v) ∩ V_V)`.
    pub fn vertical_weight_below(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.nodes.len()];
        // preorder ids, so children come after parents
        for i in (0..self.nodes.len()).rev() {
            let n = &self.nodes[i];
            let own = if n.cut == Cut::Vertical { n.weight() } else { 0.0 };
            acc[i] = own + n.children.iter().map(|&c| acc[c]).sum::<f64>();
        }
        acc
    }

    /// `max_v W(D(v) ∩ V_V) / |Q_v|`.
    pub fn carleson_ratio(&self) -> f64 {
        self.vertical_weight_below()
            .iter()
            .zip(&self.nodes)
            .map(|(w, n)| w / n.quad.area)
            .fold(0.0, f64::max)
    }

    pub fn dump(&self) -> Vec<NodeDump> {
        self.nodes
            .iter()
            .map(|n| NodeDump {
                id: n.id,
                parent: n.parent,
                cut: n.cut,
                x0: n.quad.x0,
                x1: n.quad.x1,
                delta_z: n.quad.dz(),
                aspect: n.quad.aspect(),
                area: n.quad.area,
                omega_density: n.omega.map(|o| o.density),
                weight: n.weight(),
                rectilinearity: n.quad.rectilinearity,
                plane: n.plane,
            })
            .collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.dump())?;
        Ok(())
    }

    /// Shape string: `V(..)(..)`, `H(..)(..)` or `L`, in preorder.
    pub fn shape(&self) -> String {
        self.nodes
            .iter()
            .map(|n| match n.cut {
                Cut::Vertical => 'V',
                Cut::Horizontal => 'H',
                Cut::Leaf => 'L',
            })
            .collect()
    }

    /// Per-node structural checks.
    pub fn invariants(&self) -> TreeInvariants {
        let mut out = TreeInvariants::default();
        for n in &self.nodes {
            let q = &n.quad;
            out.max_rel_tiling_defect = out.max_rel_tiling_defect.max(n.tiling_defect / q.area);
            if n.children.is_empty() {
                continue;
            }
            let (a, b) = (&self.nodes[n.children[0]].quad, &self.nodes[n.children[1]].quad);
            if a.half_height != b.half_height {
                out.sibling_height_mismatches += 1;
            }
            for c in [a, b] {
                if c.half_height > q.half_height {
                    out.height_increases += 1;
                }
            }
            let rectilinear = q.rectilinearity <= 1.0 / 32.0;
            if rectilinear {
                out.checked += 1;
            }
            for c in [a, b] {
                let ratio = c.weight() / q.weight();
                let aspect = c.aspect() / q.aspect();
                match n.cut {
                    Cut::Vertical => {
                        out.vertical_weight_ratio = widen(out.vertical_weight_ratio, ratio);
                        if (aspect - 0.5).abs() > 1e-12 {
                            out.aspect_violations += 1;
                        }
                        if rectilinear && !(4.0..=16.0).contains(&ratio) {
                            out.weight_violations += 1;
                        }
                    }
                    Cut::Horizontal => {
                        out.horizontal_weight_ratio = widen(out.horizontal_weight_ratio, ratio);
                        let s2 = std::f64::consts::SQRT_2;
                        if rectilinear {
                            if ratio > 3.0 / 7.0 {
                                out.weight_violations += 1;
                            }
                            if !(s2 - 0.25..=s2 + 0.25).contains(&aspect) {
                                out.aspect_violations += 1;
                            }
                        }
                    }
                    Cut::Leaf => {}
                }
            }
        }
        out
    }
}

fn widen(r: Option<(f64, f64)>, v: f64) -> Option<(f64, f64)> {
    Some(match r {
        None => (v, v),
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeInvariants {
    pub max_rel_tiling_defect: f64,
    pub sibling_height_mismatches: usize,
    pub height_increases: usize,
    /// Internal nodes with rectilinearity at most 1/32.
    pub checked: usize,
    pub weight_violations: usize,
    pub aspect_violations: usize,
    pub vertical_weight_ratio: Option<(f64, f64)>,
    pub horizontal_weight_ratio: Option<(f64, f64)>,
}

impl TreeInvariants {
    pub fn holds(&self) -> bool {
        self.max_rel_tiling_defect < 1e-6
            && self.sibling_height_mismatches == 0
            && self.height_increases == 0
            && self.weight_violations == 0
            && self.aspect_violations == 0
    }
}

/// Both sides of the patchwork bound for the vertical perimeter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VperBound {
    pub t0: f64,
    pub t1: f64,
    pub lhs: f64,
    pub sigma_hat: f64,
    pub total_weight: f64,
    pub ratio: f64,
    pub profile: ScaleProfile,
}

/// `||vpP_{Q,f}||_{L4([t0, t1])} / (sigma_hat |Q|^{3/4} W(V)^{1/4})` with
/// `t0 = -log_4 dz(Q)` and `t1` two units past the finest node height.
/// `sigma_hat` is the largest residual over horizontally cut nodes (the
/// root plane when there are none).
pub fn vper_bound_check<S: Surface + ?Sized>(tree: &PatchworkTree, f: &S, quad: &Quadrature, plane_quad: &Quadrature) -> Result<VperBound> {
    let root = &tree.root().quad;
    let t0 = -root.dz().log(4.0);
    let finest = tree.nodes.iter().map(|n| n.quad.dz()).fold(f64::INFINITY, f64::min);
    let t1 = -finest.log(4.0) + 2.0;
    let region = root.region(1024);
    let a = crate::vper::a_grid(t0, t1, steps_for(t0, t1, POINTS_PER_DECADE))?;
    let profile = profile_on(f, &region, &a, quad)?;
    let lhs = lq_norm(&profile, 4.0, (t0, t1))?;
    let mut sigma_hat = tree.horizontal().filter_map(|n| n.plane).map(|p| p.sigma_residual).fold(f64::NEG_INFINITY, f64::max);
    if !sigma_hat.is_finite() {
        sigma_hat = approx_plane(f, root, plane_quad)?.sigma_residual;
    }
    let total_weight = tree.weight_where(|_| true);
    let rhs = sigma_hat * root.area.powf(0.75) * total_weight.powf(0.25);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(VperBound { t0, t1, lhs, sigma_hat, total_weight, ratio, profile })
}

/// Diagnostic pair at one node: the vertically cut weight below it and
/// `sum_i Omega^P_{2^-i R dx}(rQ)` over `i` in `scales`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOmega {
    pub node: usize,
    pub vertical_weight: f64,
    pub omega_sum: f64,
    pub omega_stderr: f64,
}

pub fn weight_omega<S: Surface + ?Sized>(tree: &PatchworkTree, f: &S, v: usize, scales: std::ops::RangeInclusive<i32>, cfg: &OmegaConfig) -> Result<WeightOmega> {
    let n = tree.nodes.get(v).ok_or_else(|| Error::Invalid(format!("no node {v}")))?;
    let q = &n.quad;
    let rq = q.scaled_region(tree.config.r);
    let (mut sum, mut var) = (0.0, 0.0);
    for i in scales {
        let e = omega_p(f, &rq, (-i as f64).exp2() * tree.config.big_r * q.dx(), cfg)?;
        sum += e.value;
        var += e.stderr * e.stderr;
    }
    Ok(WeightOmega { node: v, vertical_weight: tree.vertical_weight_below()[v], omega_sum: sum, omega_stderr: var.sqrt() })
}
