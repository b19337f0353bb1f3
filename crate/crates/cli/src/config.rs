//! Run configuration: command-line flags over a JSON config file over
//! the defaults below.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

pub mod defaults {
    pub const SEED: u64 = 1;
    pub const ALPHA: u32 = 2;
    pub const RHO: u64 = 8;
    pub const LAYERS: usize = 3;
    pub const VERIFY_GRID: usize = 512;
    pub const FIELD: &str = "bumpy";
    pub const A_MIN: f64 = 0.0;
    pub const A_MAX: f64 = 12.0;
    pub const QUAD: usize = 256;
    pub const RADIUS: f64 = 1.0;
    pub const OMEGA_SAMPLES: usize = 10_000;
    pub const ETA: f64 = 0.05;
    pub const BIG_R: f64 = 8.0;
    pub const SMALL_R: f64 = 4.0;
    pub const DEPTH: usize = 6;
    pub const NODE_SAMPLES: usize = 2048;
    pub const K: f64 = 65_536.0;
    pub const HARNESS_N: u32 = 4;
    pub const MAX_PAIRS: usize = 10_000;
    pub const ELL_SAMPLES: usize = 256;
    pub const THETA_NODES: usize = 32;
    pub const A_NODES: usize = 64;
    pub const RADIUS_BALL: u32 = 4;
    pub const OUT: &str = "out";
}

/// Fills unset fields of `$a` from `$b`.
#[doc(hidden)]
#[macro_export]
macro_rules! merge {
    ($a:expr, $b:expr; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}
pub use crate::merge;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceOpts {
    #[arg(long)]
    pub alpha: Option<u32>,
    /// Scale ratio; `calibrated` uses the value from the prototype calibration.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldOpts {
    /// `z`, `zero`, `trig`, `plane`, `bumpy`, or a field file (`.csv` or binary).
    #[arg(long)]
    pub field: Option<String>,
    /// Treat a CSV field as periodic.
    #[arg(long)]
    pub periodic: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceOpts,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceOpts,
    /// Side of the verification grid; 0 skips verification.
    #[arg(long)]
    pub verify_grid: Option<usize>,
    /// Also write the surface sampled on an n x n periodic grid.
    #[arg(long)]
    pub export_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VperCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldOpts,
    /// Region `x0,x1,z0,z1`.
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a_min: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Quadrature cells per axis.
    #[arg(long)]
    pub quad: Option<usize>,
    /// Exponents for Lq norms over the profile window.
    #[arg(long, value_delimiter = ',')]
    pub lq: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmegaCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldOpts,
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub m_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoronaCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceOpts,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub big_r: Option<f64>,
    #[arg(long)]
    pub small_r: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also evaluate the patchwork vertical-perimeter bound.
    #[arg(long)]
    pub vper_bound: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedCmd {
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub alpha: Option<u32>,
    /// Word-ball radius for the distortion harness.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub ell_samples: Option<usize>,
    #[arg(long)]
    pub theta_nodes: Option<usize>,
    #[arg(long)]
    pub a_nodes: Option<usize>,
    /// Evaluate a single pair `x,y,z:x,y,z` instead of the harness.
    #[arg(long, allow_hyphen_values = true)]
    pub pair: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordCmd {
    #[arg(long)]
    pub radius: Option<u32>,
}

/// Contents of a `--config` file: shared keys plus one table per command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub surface: Option<SurfaceCmd>,
    pub vper: Option<VperCmd>,
    pub omega: Option<OmegaCmd>,
    pub corona: Option<CoronaCmd>,
    pub embed: Option<EmbedCmd>,
    pub wordmetric: Option<WordCmd>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        parse(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }
}

/// Parses a config file body.
pub fn parse(text: &str) -> serde_json::Result<FileConfig> {
    serde_json::from_str(text)
}

/// Parses `x0,x1,z0,z1`.
pub fn parse_region(s: &str) -> anyhow::Result<hvp::field::Window> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| anyhow::anyhow!("region {s:?}: {e}"))?;
    if v.len() != 4 {
        anyhow::bail!("region {s:?}: expected x0,x1,z0,z1");
    }
    Ok(hvp::field::Window::new(v[0], v[1], v[2], v[3])?)
}

/// Parses `x,y,z:x,y,z`.
pub fn parse_pair(s: &str) -> anyhow::Result<(hvp::heis::HeisPoint, hvp::heis::HeisPoint)> {
    let pt = |p: &str| -> anyhow::Result<hvp::heis::HeisPoint> {
        let v: Vec<f64> = p.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| anyhow::anyhow!("point {p:?}: {e}"))?;
        match v[..] {
            [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(hvp::heis::HeisPoint::new(x, y, z)),
            _ => anyhow::bail!("point {p:?}: expected three finite numbers"),
        }
    };
    match s.split_once(':') {
        Some((a, b)) => Ok((pt(a)?, pt(b)?)),
        None => anyhow::bail!("pair {s:?}: expected x,y,z:x,y,z"),
    }
}
