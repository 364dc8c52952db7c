//! `nue-lab`: command-line front end for the slit-torus verification lab.
//!
//! Four subcommands share one flat configuration: `verify` runs the exact
//! arithmetic suites, `scan` samples length ratios along the geodesic and
//! classifies the limit, `orbit` exports skew-product Birkhoff series, and
//! `report` bundles everything into one JSON document.
//!
//! Exit codes: 0 success, 2 a checked property failed, 3 inconclusive at the
//! available precision, 64 malformed invocation or config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nue_lab_core::{LabError, Result, RunConfig};

mod commands;

#[derive(Parser)]
#[command(name = "nue-lab", version, about = "Slit-torus verification laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact continued-fraction, slit, and intersection verification suites
    Verify(CommonArgs),
    /// Length-ratio scan along the geodesic with a limit-measure verdict
    Scan(CommonArgs),
    /// Exact skew-product orbits with running sheet-occupation series
    Orbit(CommonArgs),
    /// Combined verify + scan + schedule diagnostics in one JSON document
    Report(CommonArgs),
}

/// Every subcommand takes the same knobs; unused ones are ignored. Values
/// are revalidated through the config layer so file and flag inputs get
/// identical error wording.
#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Digit family: cf4, cf3, or explicit
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated digit prefix for --family explicit
    #[arg(long)]
    digits: Option<String>,
    /// cf3 free digits: dexp or const:<d>
    #[arg(long)]
    filler: Option<String>,
    /// Deformation parameter in [-1, 1]
    #[arg(long)]
    c: Option<String>,
    /// First stage of the scan range
    #[arg(long)]
    kmin: Option<String>,
    /// Last stage of the scan range
    #[arg(long)]
    kmax: Option<String>,
    /// Orbit length
    #[arg(long)]
    n: Option<String>,
    /// Slit stage for orbit simulation
    #[arg(long)]
    stage: Option<String>,
    /// Orbit seeds: grid:<count> or list:<p/q[@sheet],...>
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory (default: JSON to stdout, CSVs to the working dir)
    #[arg(long)]
    out: Option<String>,
    /// Working-precision ceiling in bits for certified comparisons
    #[arg(long = "precision-cap")]
    precision_cap: Option<String>,
    /// Multiplier applied to every dominance tolerance
    #[arg(long = "tol-factor")]
    tol_factor: Option<String>,
    /// Scan schedule: both, tk, classification, or diagnostic
    #[arg(long)]
    schedule: Option<String>,
    /// Interior samples per scheduled interval
    #[arg(long)]
    oversample: Option<String>,
    /// Half-width of the verdict bands around c = 0 and the endpoints
    #[arg(long)]
    eps: Option<String>,
    /// Trailing fraction of the scan the verdict is read from
    #[arg(long = "tail-fraction")]
    tail_fraction: Option<String>,
}

impl CommonArgs {
    /// Defaults, then the config file, then family-dependent defaults, then
    /// flags; cross-field validation last.
    fn into_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.family {
            cfg.set("family", v)?;
        }
        cfg.family_defaults();
        let overrides: [(&str, &Option<String>); 15] = [
            ("digits", &self.digits),
            ("filler", &self.filler),
            ("c", &self.c),
            ("kmin", &self.kmin),
            ("kmax", &self.kmax),
            ("n", &self.n),
            ("stage", &self.stage),
            ("seeds", &self.seeds),
            ("out", &self.out),
            ("precision_cap", &self.precision_cap),
            ("tol_factor", &self.tol_factor),
            ("schedule", &self.schedule),
            ("oversample", &self.oversample),
            ("eps", &self.eps),
            ("tail_fraction", &self.tail_fraction),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_for(err: &LabError) -> u8 {
    match err {
        LabError::Config { .. } => 64,
        LabError::Undecided { .. }
        | LabError::PrecisionExhausted { .. }
        | LabError::InconclusiveClusters { .. } => 3,
        _ => 2,
    }
}

/// Cap the rayon pool when NUE_LAB_THREADS is set; ignored once a pool
/// exists (tests may have built one already).
fn init_threads() {
    if let Ok(v) = std::env::var("NUE_LAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (args, run): (&CommonArgs, fn(&RunConfig) -> Result<u8>) = match &cli.command {
        Command::Verify(a) => (a, commands::cmd_verify),
        Command::Scan(a) => (a, commands::cmd_scan),
        Command::Orbit(a) => (a, commands::cmd_orbit),
        Command::Report(a) => (a, commands::cmd_report),
    };
    match args.into_config().and_then(|cfg| run(&cfg)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
