//! `lcvco-isf`: runs one analysis step on a configuration file and writes
//! CSV/JSON artefacts to the output directory.
//!
//! Diagnostics go to stderr; data only to files. Exit codes are listed in
//! [`EXIT_CODES`].

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcvco_isf::config::RawConfig;
use lcvco_isf::{body_bias_design, Error, Result, ToolConfig};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  command-line usage error
  2  configuration parse error (line number in the message)
  3  file or serialization error
  4  value outside its domain or invalid argument
  5  degenerate configuration or singular formula
  6  root solver failure
  7  simulation diverged or did not oscillate
  8  trace too short for the requested offsets";

#[derive(Debug, Parser)]
#[command(name = "lcvco-isf", version, about = "Phase-noise toolkit for body-biased NMOS LC oscillators", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the simulator; replaces `[sim] seed` and `seeds`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated offset frequencies, SI suffixes allowed (e.g. `10k,100kHz,1M`).
    #[arg(long)]
    offsets: Option<String>,
    /// Replace the steady-state body drive with the optimum body-bias design.
    #[arg(long)]
    design_point: bool,
    /// Attenuation K for the feedback synthesis (default: `[sim] k`, else 0.33).
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Regions,
    Isf,
    Metrics,
    Design,
    Simulate,
    Compare,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boundary angles and region schedules of M1 and M2.
    Regions(Common),
    /// ISF, NMF and effective-ISF curves for both constructions.
    Isf {
        #[command(flatten)]
        common: Common,
        /// Samples per period (power of two, at least 256).
        #[arg(long, default_value_t = 1024)]
        points: usize,
    },
    /// Coefficients and analytic phase noise.
    Metrics(Common),
    /// Optimum body-bias design and its feedback realization.
    Design(Common),
    /// Noisy transient run and its phase-noise spectrum.
    Simulate(Common),
    /// Grounded bodies against the configured feedback over all seeds.
    Compare(Common),
    /// Evaluates a subcommand over a grid of one or two parameters.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Subcommand evaluated at every grid point.
        #[arg(long, value_enum)]
        target: Target,
        /// `section.key=start:stop:count` or `section.key=v1,v2,...`.
        #[arg(long = "param", required = true, num_args = 1)]
        params: Vec<String>,
    },
}

/// Options that survive into every evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub design_point: bool,
    pub k: Option<f64>,
    pub points: usize,
}

/// Applies the command-line overrides that act on the raw file.
fn load_raw(common: &Common) -> Result<RawConfig> {
    let mut raw = RawConfig::from_path(&common.config)
        .inspect_err(|_| eprintln!("while reading {}", common.config.display()))?;
    if let Some(list) = &common.offsets {
        raw.set("offsets.hz", list)?;
    }
    if let Some(seed) = common.seed {
        if raw.has_section("sim") {
            raw.set("sim.seed", &seed.to_string())?;
            raw.set("sim.seeds", &seed.to_string())?;
        }
    }
    Ok(raw)
}

/// Builds the configuration and applies the overrides that act on values.
pub fn finish(raw: &RawConfig, out: Option<&PathBuf>, opts: &RunOptions) -> Result<ToolConfig> {
    let mut cfg = raw.build()?;
    if let Some(out) = out {
        cfg.output_dir = out.clone();
    }
    if opts.design_point {
        let ss = cfg.steady_state;
        let sol = body_bias_design(ss.a, ss.vdc0, &cfg.device)?;
        cfg.steady_state = sol.steady_state(ss.a, ss.vdc0, ss.omega);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (common, points) = match &cli.command {
        Command::Isf { common, points } => (common, *points),
        Command::Regions(c)
        | Command::Metrics(c)
        | Command::Design(c)
        | Command::Simulate(c)
        | Command::Compare(c)
        | Command::Sweep { common: c, .. } => (c, 1024),
    };
    let opts = RunOptions { design_point: common.design_point, k: common.k, points };
    let raw = load_raw(common)?;

    if let Command::Sweep { target, params, .. } = &cli.command {
        return sweep::run(&raw, common.out.as_ref(), &opts, *target, params);
    }
    let cfg = finish(&raw, common.out.as_ref(), &opts)?;
    let target = match cli.command {
        Command::Regions(_) => Target::Regions,
        Command::Isf { .. } => Target::Isf,
        Command::Metrics(_) => Target::Metrics,
        Command::Design(_) => Target::Design,
        Command::Simulate(_) => Target::Simulate,
        Command::Compare(_) => Target::Compare,
        Command::Sweep { .. } => unreachable!("handled above"),
    };
    for path in commands::write(target, &cfg, &opts)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    u8::try_from(e.exit_code()).unwrap_or(u8::MAX)
}
