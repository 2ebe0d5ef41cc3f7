//! Command-line front end: metric definition files, commands orchestrating
//! the library modules, and machine-readable reports.
//!
//! Commands: `mass`, `curvature`, `flatten`, `double`, `oracle`, `verify`.
//! `HALFMASS_THREADS` caps internal parallelism. Reports render as text,
//! JSON (schema "halfmass/1") or CSV where a table is natural.

pub mod commands;
pub mod file;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_curvature, cmd_double, cmd_flatten, cmd_mass, cmd_oracle, cmd_verify};
pub use file::{Family, FileError, MetricFile};
pub use report::{ExitCode, Report};

#[derive(Parser)]
#[command(name = "halfmass", version, about = "Mass of asymptotically flat half-space metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format for the report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
pub enum Command {
    /// Finite-radius mass samples and the extrapolated mass of a metric file.
    Mass {
        file: PathBuf,
        /// Comma-separated radii, e.g. 20,40,80,160.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Pointwise or sphere-sup curvature and boundary data.
    Curvature {
        file: PathBuf,
        /// Evaluation point, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "sphere")]
        at: Option<Vec<f64>>,
        /// Sup over a coordinate hemisphere of this radius (and 2x for decay).
        #[arg(long)]
        sphere: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Conformal flattening: solve the cutoff conformal system and report
    /// the mass perturbation and curvature residuals.
    Flatten {
        file: PathBuf,
        #[arg(long)]
        rcut: f64,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Grid spacing override (default rcut/16).
        #[arg(long)]
        grid_h: Option<f64>,
        /// Write the discrete conformal factor as a CSV grid artifact.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corner condition table and ADM mass of the doubled manifold.
    Double {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// One solver-vs-oracle comparison on the flat background.
    Oracle {
        /// Radial shell volume source: a,b,amplitude.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        shell: Option<Vec<f64>>,
        /// Boundary disc Neumann source: radius,amplitude.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        disc: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.125)]
        grid_h: f64,
        #[arg(long, default_value_t = 1.0)]
        r_in: f64,
        #[arg(long, default_value_t = 4.0)]
        r_out: f64,
    },
    /// Invariant suites: rigid invariance, variational identity, doubling,
    /// positivity sweep (builtin), or diagnostics for a metric file.
    Verify {
        file: Option<PathBuf>,
        /// Run the built-in suite over the shipped families.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

/// Configure the global thread pool from HALFMASS_THREADS; call once early.
pub fn configure_threads() {
    if let Ok(raw) = std::env::var("HALFMASS_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (report, csv) = match cli.command {
        Command::Mass { file, radii, order } => {
            let (r, csv) = cmd_mass(&file, radii, order);
            (r, Some(csv))
        }
        Command::Curvature { file, at, sphere, order } => {
            (cmd_curvature(&file, at, sphere, order), None)
        }
        Command::Flatten { file, rcut, epsilon, grid_h, out } => (
            cmd_flatten(&file, &commands::FlattenArgs { rcut, epsilon, grid_h, out }),
            None,
        ),
        Command::Double { file, radii, order } => (cmd_double(&file, radii, order), None),
        Command::Oracle { shell, disc, grid_h, r_in, r_out } => {
            let args = commands::OracleArgs {
                shell: shell.map(|v| (v[0], v[1], v[2])),
                disc: disc.map(|v| (v[0], v[1])),
                grid_h,
                r_in,
                r_out,
            };
            (cmd_oracle(&args), None)
        }
        Command::Verify { file, suite, seed } => {
            let builtin = suite.as_deref() == Some("builtin");
            (cmd_verify(file.as_deref(), builtin, seed), None)
        }
    };
    match cli.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report.to_json()).expect("report is valid json")
        ),
        Format::Csv => match csv {
            Some(body) => print!("{body}"),
            None => print!("{}", report.to_text()),
        },
        Format::Text => print!("{}", report.to_text()),
    }
    report.exit as i32
}
