use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use nlmi_cli::commands;
use nlmi_cli::CliError;

/// Induced-coherence Michelson interferometer: scan synthesis, fringe
/// fitting, and sample retardation/transmission estimation.
#[derive(Parser)]
#[command(name = "nlmi", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize fringe scans (one CSV per sample orientation) plus a manifest.
    Simulate {
        /// TOML run configuration (grammar documented in the README).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides NLMI_OUT and the config's run.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's run.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit offset/visibility/phase to a scan CSV.
    Fit {
        scan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit the fringe period too instead of fixing it to λ_axis/2.
        #[arg(long = "free-period")]
        free_period: bool,
        /// Also write a dense model curve CSV for overplotting.
        #[arg(long)]
        plot: bool,
    },
    /// Phase-shift retardation from fit files spanning θ = 0..90°.
    Method1 {
        /// Fit JSON files (need meta_theta_rad, meta_axis, meta_sample_arm).
        #[arg(required = true)]
        fits: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Visibility-ratio retardation from a θ=45° fit and a θ=0°/90° fit.
    Method2 {
        #[arg(long)]
        vmin: PathBuf,
        #[arg(long)]
        vmax: PathBuf,
        /// Branch resolution: principal, reflected, or from-method1.
        #[arg(long)]
        branch: String,
        /// Phase-shift estimate file backing --branch from-method1.
        #[arg(long)]
        method1: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a visibility-versus-orientation curve (CSV: theta_deg,visibility,sigma).
    Viscurve {
        curve: PathBuf,
        /// Correlation-envelope magnitude at the scan delay.
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Branch resolution: principal, reflected, or from-method1.
        #[arg(long)]
        branch: String,
        #[arg(long)]
        method1: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transmission τ_m² from a sample fit and a no-sample reference fit.
    Transmission {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the benchmark replication harness and write report.txt/report.json.
    #[command(name = "replicate-tables")]
    ReplicateTables {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.cmd {
        Cmd::Simulate { config, out, seed } => {
            commands::cmd_simulate(&config, out.as_deref(), seed)
        }
        Cmd::Fit {
            scan,
            out,
            free_period,
            plot,
        } => commands::cmd_fit(&scan, out.as_deref(), free_period, plot),
        Cmd::Method1 { fits, out } => commands::cmd_method1(&fits, out.as_deref()),
        Cmd::Method2 {
            vmin,
            vmax,
            branch,
            method1,
            out,
        } => commands::cmd_method2(&vmin, &vmax, &branch, method1.as_deref(), out.as_deref()),
        Cmd::Viscurve {
            curve,
            mu,
            branch,
            method1,
            out,
        } => commands::cmd_viscurve(&curve, mu, &branch, method1.as_deref(), out.as_deref()),
        Cmd::Transmission {
            sample,
            reference,
            out,
        } => commands::cmd_transmission(&sample, &reference, out.as_deref()),
        Cmd::ReplicateTables { seed, trials, out } => {
            let started = Instant::now();
            let written = commands::cmd_replicate_tables(seed, trials, out.as_deref())?;
            // Timing goes to stderr only; report files stay byte-reproducible.
            eprintln!("replicate-tables finished in {:.2?}", started.elapsed());
            Ok(written)
        }
    }
}

fn main() -> ProcessExit {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ProcessExit::from(code);
        }
    };
    match run(cli) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ProcessExit::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ProcessExit::from(e.exit_code() as u8)
        }
    }
}
