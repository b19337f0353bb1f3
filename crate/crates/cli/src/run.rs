//! Subcommand bodies. Each resolves its options, runs, and writes its
//! outputs plus a `run.json` sidecar into the output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use serde::Serialize;
use serde_json::{json, Value};

use hvp::bumpy::{self, BumpySurface, Calibration};
use hvp::checks::{self, Suite};
use hvp::corona::{make_pseudoquad, subdivide, vper_bound_check, CoronaConfig, CURVE_STEP};
use hvp::embed::{self, CutMetric, CutMetricConfig, FieldBounds, HarnessConfig};
use hvp::field::{io, FnField, GridField, Interp, Quadrature, Region, Surface, Window};
use hvp::nonmono::{omega_p, OmegaConfig};
use hvp::vper::{lq_norm, profile, steps_for, Envelope, ProfileSidecar, POINTS_PER_DECADE};
use hvp::word::word_ball;

use hvp_cli::config::{defaults, merge, parse_pair, parse_region, Common, CoronaCmd, EmbedCmd, FieldOpts, FileConfig, OmegaCmd, SurfaceCmd, SurfaceOpts, VperCmd, WordCmd};

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedCommon {
    pub seed: u64,
    pub out: PathBuf,
}

pub fn resolve_common(flags: &Common, file: &FileConfig) -> ResolvedCommon {
    ResolvedCommon {
        seed: flags.seed.or(file.seed).unwrap_or(defaults::SEED),
        out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(defaults::OUT)),
    }
}

/// Writes `run.json`: command, resolved configuration, versions, outputs
/// and results. Wall time goes to stderr so reruns are byte-identical.
fn sidecar(common: &ResolvedCommon, command: &str, config: &impl Serialize, outputs: &[&str], results: Value) -> anyhow::Result<()> {
    let doc = json!({
        "command": command,
        "seed": common.seed,
        "config": config,
        "versions": { "hvp": env!("CARGO_PKG_VERSION"), "field_format": 1 },
        "outputs": outputs,
        "results": results,
    });
    write_with(&common.out, "run.json", |w| Ok(serde_json::to_writer_pretty(w, &doc)?))
}

fn write_with<F>(dir: &Path, name: &str, f: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
{
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot write {}", path.display()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedSurface {
    alpha: u32,
    rho: u64,
    rho_calibrated: bool,
    layers: usize,
}

fn resolve_surface(o: &SurfaceOpts, calibration: &mut Option<Calibration>) -> anyhow::Result<ResolvedSurface> {
    let alpha = o.alpha.unwrap_or(defaults::ALPHA);
    if alpha == 0 {
        bail!("alpha must be at least 1");
    }
    let layers = o.layers.unwrap_or(defaults::LAYERS);
    let (rho, rho_calibrated) = match o.rho.as_deref() {
        None => (defaults::RHO, false),
        Some("calibrated") => (calibration_of(calibration)?.rho, true),
        Some(s) => (s.parse::<u64>().map_err(|e| anyhow::anyhow!("rho {s:?}: {e}"))?, false),
    };
    if rho < 2 {
        bail!("rho must be at least 2");
    }
    Ok(ResolvedSurface { alpha, rho, rho_calibrated, layers })
}

fn calibration_of(slot: &mut Option<Calibration>) -> anyhow::Result<&Calibration> {
    if slot.is_none() {
        *slot = Some(bumpy::calibrate(&bumpy::make_bump(), POINTS_PER_DECADE)?);
    }
    Ok(slot.as_ref().unwrap())
}

fn build_bumpy(s: &ResolvedSurface) -> anyhow::Result<BumpySurface> {
    Ok(bumpy::build(&bumpy::BumpyParams::new(s.alpha, s.rho, s.layers), &bumpy::make_bump())?)
}

pub fn surface(mut c: SurfaceCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.surface {
        merge!(c.surface, f.surface; alpha, rho, layers);
        merge!(c, f; verify_grid, export_grid);
    }
    let mut cal = None;
    let s = resolve_surface(&c.surface, &mut cal)?;
    let verify_grid = c.verify_grid.unwrap_or(defaults::VERIFY_GRID);
    let surf = build_bumpy(&s)?;
    let mut outputs = vec!["manifest.json"];
    write_with(&common.out, "manifest.json", |w| Ok(serde_json::to_writer_pretty(w, &surf.manifest(cal.as_ref()))?))?;
    let mut results = json!({ "layers": surf.layers(), "sup_bound": surf.sup_bound(), "dz_bound": surf.dz_bound() });
    if verify_grid > 0 {
        let rep = bumpy::verify_internal(&surf, verify_grid, common.seed)?;
        write_with(&common.out, "verify.json", |w| Ok(serde_json::to_writer_pretty(w, &rep)?))?;
        outputs.push("verify.json");
        results["sqrt_constant"] = json!(rep.sqrt_constant);
        results["ortho_constant"] = json!(rep.ortho_constant);
        results["dzdt_range"] = json!([rep.dzdt_min, rep.dzdt_max]);
    }
    if let Some(n) = c.export_grid {
        let g = surf.to_grid(n, n, Interp::Bicubic)?;
        write_with(&common.out, "surface.field", |w| Ok(io::write_field(&g, w)?))?;
        outputs.push("surface.field");
    }
    let config = json!({ "surface": s, "verify_grid": verify_grid, "export_grid": c.export_grid });
    sidecar(common, "surface", &config, &outputs, results)?;
    println!("surface: {} layers, sup bound {:.6e}", surf.layers(), surf.sup_bound());
    Ok(())
}

/// Builtin test fields and field files.
fn load_field(o: &FieldOpts) -> anyhow::Result<(Box<dyn Surface>, Value)> {
    let name = o.field.clone().unwrap_or_else(|| defaults::FIELD.to_string());
    let field: Box<dyn Surface> = match name.as_str() {
        "z" => Box::new(checks::linear_in_z()),
        "zero" => Box::new(checks::zero_field()),
        "trig" => Box::new(checks::trig_field()),
        "plane" => Box::new(FnField::affine(0.1, 0.4, 0.0, Window::new(-20.0, 20.0, -20.0, 20.0)?)),
        "bumpy" => {
            let s = resolve_surface(&o.surface, &mut None)?;
            let surf = build_bumpy(&s)?;
            return Ok((Box::new(surf), json!({ "field": "bumpy", "surface": s })));
        }
        path => Box::new(read_field_file(Path::new(path), o.periodic.unwrap_or(false))?),
    };
    Ok((field, json!({ "field": name, "periodic": o.periodic })))
}

fn read_field_file(path: &Path, periodic: bool) -> anyhow::Result<GridField> {
    let f = File::open(path).with_context(|| format!("cannot read field file {}", path.display()))?;
    let r = BufReader::new(f);
    let g = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        io::read_csv(r, periodic, Interp::Bilinear)
    } else {
        io::read_field(r)
    };
    g.with_context(|| format!("field file {}", path.display()))
}

fn region_of(s: &Option<String>) -> anyhow::Result<Region> {
    Ok(match s {
        Some(s) => Region::Rect(parse_region(s)?),
        None => Region::unit(),
    })
}

fn merge_field(c: &mut FieldOpts, f: &FieldOpts) {
    merge!(c, f; field, periodic);
    merge!(c.surface, f.surface; alpha, rho, layers);
}

pub fn vper(mut c: VperCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.vper {
        merge_field(&mut c.field, &f.field);
        merge!(c, f; region, a_min, a_max, quad, lq);
    }
    let (field, field_cfg) = load_field(&c.field)?;
    let region = region_of(&c.region)?;
    let a_min = c.a_min.unwrap_or(defaults::A_MIN);
    let a_max = c.a_max.unwrap_or(defaults::A_MAX);
    let n = c.quad.unwrap_or(defaults::QUAD);
    let quad = Quadrature::Midpoint { nx: n, nz: n };
    let lq = c.lq.clone().unwrap_or_else(|| vec![2.0, 4.0]);
    let steps = steps_for(a_min, a_max, POINTS_PER_DECADE);
    let p = profile(&*field, &region, a_min, a_max, steps, &quad)?;
    let env = Envelope::estimate(&*field, &region, &quad);
    let side = ProfileSidecar::new(&p, env, 0.0);
    write_with(&common.out, "profile.csv", |w| Ok(p.write_csv(w)?))?;
    write_with(&common.out, "profile.json", |w| Ok(serde_json::to_writer_pretty(w, &side)?))?;
    let norms = lq
        .iter()
        .map(|&q| Ok(json!({ "q": q, "norm": lq_norm(&p, q, (a_min, a_max))? })))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let config = json!({ "field": field_cfg, "region": region, "a_min": a_min, "a_max": a_max, "steps": steps, "quadrature": quad, "lq": lq });
    sidecar(common, "vper", &config, &["profile.csv", "profile.json"], json!({ "lq": norms, "envelope_excess": side.envelope_excess }))?;
    println!("vper: {} scale points", p.a.len());
    Ok(())
}

pub fn omega(mut c: OmegaCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.omega {
        merge_field(&mut c.field, &f.field);
        merge!(c, f; region, radius, samples, m_max);
    }
    let (field, field_cfg) = load_field(&c.field)?;
    let region = region_of(&c.region)?;
    let radius = c.radius.unwrap_or(defaults::RADIUS);
    let mut cfg = OmegaConfig::new(c.samples.unwrap_or(defaults::OMEGA_SAMPLES), common.seed);
    cfg.m_max = c.m_max;
    let est = omega_p(&*field, &region, radius, &cfg)?;
    write_with(&common.out, "omega.json", |w| Ok(serde_json::to_writer_pretty(w, &est)?))?;
    let config = json!({ "field": field_cfg, "region": region, "radius": radius, "omega": cfg });
    sidecar(common, "omega", &config, &["omega.json"], json!({ "value": est.value, "stderr": est.stderr }))?;
    println!("omega: {:.6e} +- {:.2e}", est.value, est.stderr);
    Ok(())
}

pub fn corona(mut c: CoronaCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.corona {
        merge!(c.surface, f.surface; alpha, rho, layers);
        merge!(c, f; eta, big_r, small_r, depth, samples, vper_bound);
    }
    let s = resolve_surface(&c.surface, &mut None)?;
    let surf = build_bumpy(&s)?;
    let mut cfg = CoronaConfig::new(common.seed);
    cfg.eta = c.eta.unwrap_or(defaults::ETA);
    cfg.big_r = c.big_r.unwrap_or(defaults::BIG_R);
    cfg.r = c.small_r.unwrap_or(defaults::SMALL_R);
    cfg.max_depth = c.depth.unwrap_or(defaults::DEPTH);
    cfg.omega.nsamples = c.samples.unwrap_or(defaults::NODE_SAMPLES);
    let root = make_pseudoquad(&surf, (0.0, 1.0), (0.5, 0.0), (0.5, 1.0), CURVE_STEP)?;
    let tree = subdivide(&surf, root, &cfg)?;
    write_with(&common.out, "tree.json", |w| Ok(tree.write_json(w)?))?;
    let mut outputs = vec!["tree.json"];
    let mut results = json!({
        "nodes": tree.len(),
        "vertical": tree.vertical().count(),
        "horizontal": tree.horizontal().count(),
        "carleson_ratio": tree.carleson_ratio(),
        "invariants": tree.invariants(),
        "shape": tree.shape(),
    });
    if c.vper_bound.unwrap_or(false) {
        let b = vper_bound_check(&tree, &surf, &Quadrature::Stratified { nx: 256, nz: 256, seed: common.seed }, &Quadrature::Midpoint { nx: 64, nz: 64 })?;
        write_with(&common.out, "vper_bound.csv", |w| Ok(b.profile.write_csv(w)?))?;
        outputs.push("vper_bound.csv");
        results["vper_bound"] = json!({ "t0": b.t0, "t1": b.t1, "lhs": b.lhs, "sigma_hat": b.sigma_hat, "total_weight": b.total_weight, "ratio": b.ratio });
    }
    sidecar(common, "corona", &json!({ "surface": s, "corona": cfg }), &outputs, results)?;
    println!("corona: {} nodes, Carleson ratio {:.6e}", tree.len(), tree.carleson_ratio());
    Ok(())
}

pub fn embed(mut c: EmbedCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.embed {
        merge!(c, f; k, alpha, n, max_pairs, ell_samples, theta_nodes, a_nodes, pair);
    }
    let cal = bumpy::calibrate(&bumpy::make_bump(), POINTS_PER_DECADE)?;
    let mut cfg = CutMetricConfig::from_calibration(&cal, c.k.unwrap_or(defaults::K), common.seed);
    cfg.alpha = c.alpha;
    cfg.theta_nodes = c.theta_nodes.unwrap_or(defaults::THETA_NODES);
    cfg.a_nodes = c.a_nodes.unwrap_or(defaults::A_NODES);
    cfg.ell.samples = c.ell_samples.unwrap_or(defaults::ELL_SAMPLES);
    let surf = embed::bumpy_for(&cfg, &bumpy::make_bump())?;
    let metric = CutMetric::new(&surf, FieldBounds::of_bumpy(&surf), cfg.clone())?;
    if let Some(pair) = &c.pair {
        let (h1, h2) = parse_pair(pair)?;
        let d = metric.delta(h1, h2);
        write_with(&common.out, "delta.json", |w| Ok(serde_json::to_writer_pretty(w, &d)?))?;
        let config = json!({ "metric": cfg, "alpha": metric.alpha, "pair": pair });
        sidecar(common, "embed", &config, &["delta.json"], json!({ "delta": d.value, "err": d.err() }))?;
        println!("embed: delta {:.6e} +- {:.2e}", d.value, d.err());
        return Ok(());
    }
    let hc = HarnessConfig { n: c.n.unwrap_or(defaults::HARNESS_N), max_pairs: c.max_pairs.unwrap_or(defaults::MAX_PAIRS), seed: common.seed };
    let rep = embed::distortion_harness(&metric, &hc)?;
    write_with(&common.out, "harness.csv", |w| Ok(rep.write_csv(w)?))?;
    sidecar(common, "embed", &json!({ "metric": cfg, "harness": hc }), &["harness.csv"], serde_json::to_value(&rep.summary)?)?;
    println!("embed: {} pairs, ratio band [{:.4}, {:.4}]", rep.summary.pairs, rep.summary.min_ratio, rep.summary.max_ratio);
    Ok(())
}

pub fn wordmetric(mut c: WordCmd, file: &FileConfig, common: &ResolvedCommon) -> anyhow::Result<()> {
    if let Some(f) = &file.wordmetric {
        merge!(c, f; radius);
    }
    let radius = c.radius.unwrap_or(defaults::RADIUS_BALL);
    let ball = word_ball(radius)?;
    write_with(&common.out, "ball.csv", |w| Ok(ball.write_csv(w)?))?;
    sidecar(common, "wordmetric", &json!({ "radius": radius }), &["ball.csv"], json!({ "ball_sizes": ball.ball_sizes() }))?;
    println!("wordmetric: {} elements within radius {radius}", ball.len());
    Ok(())
}

/// Runs a suite and prints one line per criterion; true when all pass.
pub fn check(suite: Suite) -> anyhow::Result<bool> {
    let reports = checks::run_suite(suite, |r| println!("{}", r.line()))?;
    Ok(reports.iter().all(|r| r.passed()))
}
