use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

mod run;

use hvp_cli::config::{self, Common, CoronaCmd, EmbedCmd, OmegaCmd, SurfaceCmd, VperCmd, WordCmd};

/// Numerical laboratory for intrinsic Lipschitz graphs in the Heisenberg group.
#[derive(Debug, Parser)]
#[command(name = "hvp", version)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "HVP_THREADS")]
    threads: Option<usize>,
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build a bumpy surface and verify its internal bounds.
    Surface(SurfaceCmd),
    /// Vertical-perimeter profile over a scale range, with Lq norms.
    Vper(VperCmd),
    /// Extended parametric nonmonotonicity of a field over a region.
    Omega(OmegaCmd),
    /// Corona decomposition of a bumpy surface.
    Corona(CoronaCmd),
    /// Cut-metric distance for one pair, or the distortion harness.
    Embed(EmbedCmd),
    /// Word-metric ball of the integer Heisenberg group as CSV.
    Wordmetric(WordCmd),
    /// Run the acceptance checks.
    Check {
        #[arg(long, value_enum, default_value_t = SuiteArg::Core)]
        suite: SuiteArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Core,
    Full,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let file = match &cli.common.config {
        Some(p) => config::FileConfig::load(p)?,
        None => config::FileConfig::default(),
    };
    let common = run::resolve_common(&cli.common, &file);
    let started = std::time::Instant::now();
    match cli.cmd {
        Cmd::Surface(c) => run::surface(c, &file, &common)?,
        Cmd::Vper(c) => run::vper(c, &file, &common)?,
        Cmd::Omega(c) => run::omega(c, &file, &common)?,
        Cmd::Corona(c) => run::corona(c, &file, &common)?,
        Cmd::Embed(c) => run::embed(c, &file, &common)?,
        Cmd::Wordmetric(c) => run::wordmetric(c, &file, &common)?,
        Cmd::Check { suite } => {
            let suite = match suite {
                SuiteArg::Core => hvp::checks::Suite::Core,
                SuiteArg::Full => hvp::checks::Suite::Full,
            };
            let passed = run::check(suite)?;
            return Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
    }
    eprintln!("wall time {:.3} s", started.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}
