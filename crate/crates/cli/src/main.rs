use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ild_cli::commands::{self, DvfTableArgs};
use ild_core::sphere::REFERENCE_DISTANCES;
use ild_core::Error;

#[derive(Parser)]
#[command(
    name = "nearild",
    version,
    about = "Binaural beamforming with low-frequency ILD enhancement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the distance variation function of the ILD.
    DvfTable {
        /// Near-field distances in metres.
        #[arg(long, value_delimiter = ',', default_values_t = REFERENCE_DISTANCES)]
        distances: Vec<f64>,
        #[arg(long, default_value_t = 800.0)]
        fmax: f64,
        #[arg(long = "f-step", default_value_t = 20.0)]
        fstep: f64,
        #[arg(long = "az-step", default_value_t = 5.0)]
        az_step: f64,
        #[arg(long, default_value_t = 0.0875)]
        head_radius: f64,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a scene to microphone signals and write a run manifest.
    Simulate {
        /// Scene TOML; the built-in reference scenario when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Design and apply the beamformers of a simulated run.
    Beamform {
        /// Run directory written by `simulate`.
        #[arg(long)]
        out: PathBuf,
        /// bmvdr, jblcmv or ild_<distance>.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        cutoff_hz: Option<f64>,
    },
    /// Cue errors and output noise power of every designed method.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cutoff_hz: Option<f64>,
    },
}

fn run(cli: Cli) -> ild_core::Result<()> {
    match cli.command {
        Command::DvfTable {
            distances,
            fmax,
            fstep,
            az_step,
            head_radius,
            out,
        } => {
            let args = DvfTableArgs {
                distances,
                fmax,
                fstep,
                az_step,
                head_radius,
            };
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(std::fs::File::create(&path)?);
                    commands::dvf_table(&args, &mut w)?;
                    w.flush()?;
                }
                None => {
                    commands::dvf_table(&args, io::stdout().lock())?;
                }
            }
        }
        Command::Simulate { config, out, seed } => {
            let m = commands::simulate(config.as_deref(), &out, seed)?;
            println!(
                "wrote {} WAV files and the manifest to {}",
                m.files.len(),
                out.display()
            );
        }
        Command::Beamform {
            out,
            methods,
            cutoff_hz,
        } => {
            for s in commands::beamform(&out, methods.as_deref(), cutoff_hz)? {
                println!(
                    "{}: {} fallback bins, {} failed bins, {} clipped samples",
                    s.method, s.fallback_bins, s.failed_bins, s.clipped_samples
                );
            }
        }
        Command::Evaluate { out, cutoff_hz } => {
            let (report, noise) = commands::evaluate(&out, cutoff_hz)?;
            println!(
                "wrote {} metric rows and {} noise-power rows",
                report.len(),
                noise.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Range(_) | Error::Config(_) | Error::Geometry(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
