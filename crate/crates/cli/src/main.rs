use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use actkit::bench::{compare, write_comparison_csv};
use actkit::dataio::{gen_synthetic_phases, load_phase_csv, save_phase_csv, PhaseGenConfig};
use actkit::experiments::{emit_report, run_experiment, run_grid, ExperimentConfig, ReportFormat};
use actkit::kernels::max_approx_error;
use actkit::modelspec::{preset_with_blocks, GroupSelector, KindFilter, NUM_STAGES};
use actkit::smoother::{sweep_window, write_sweep_csv};
use actkit::ActivationKind;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "actkit",
    version,
    about = "Activation-function kernels, surgery experiments and phase smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time activation kernels and print ns/element relative to ReLU.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "relu,swish,hardswish")]
        kinds: Vec<ActivationKind>,
        #[arg(long, default_value_t = 10_000_000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one experiment config and write its report.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// `.json` for JSON, anything else for CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the baseline plus one surgery per placement.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "initial,middle,last,all")]
        placements: Vec<GroupSelector>,
        #[arg(long, default_value = "hardswish")]
        to: ActivationKind,
        /// Only rewrite sites currently of this kind.
        #[arg(long, default_value = "any")]
        from: KindFilter,
        /// Run grid cells as parallel jobs.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep moving-average window sizes over a phase CSV.
    Smooth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,8,16,32,64,128")]
        windows: Vec<usize>,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic phase sequence CSV.
    GenPhases {
        #[arg(long, default_value_t = 10)]
        phases: usize,
        #[arg(long, default_value_t = 200)]
        segment: usize,
        #[arg(long, default_value_t = 2000)]
        frames: usize,
        #[arg(long, default_value_t = 0.25)]
        noise: f64,
        #[arg(long, default_value_t = 0.2)]
        spread: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the activation sites of a preset.
    Sites {
        #[arg(long)]
        preset: String,
        /// Blocks per stage, e.g. 3,5,11,7.
        #[arg(long, value_delimiter = ',')]
        blocks: Option<Vec<usize>>,
        /// Print the model spec as JSON instead of the site table.
        #[arg(long)]
        json: bool,
    },
    /// Largest gap between two activations over a grid.
    Approx {
        #[arg(long)]
        a: ActivationKind,
        #[arg(long)]
        b: ActivationKind,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench {
            kinds,
            n,
            repeats,
            seed,
            out,
        } => {
            let cmp = compare(&kinds, n, repeats, seed)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_comparison_csv(&cmp, file)?;
                }
                None => write_comparison_csv(&cmp, std::io::stdout().lock())?,
            }
            for r in &cmp.results {
                eprintln!("{:>10}  checksum {:.6e}", r.kind.name(), r.checksum);
            }
        }
        Command::Train { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            for run in &report.runs {
                eprintln!(
                    "{} seed {}: accuracy {:.4}, {:.2}s",
                    report.label, run.seed, run.test_accuracy, run.train_seconds
                );
            }
            eprintln!(
                "{}: mean accuracy {:.4}",
                report.label, report.mean_accuracy
            );
            emit_report(&[report], &out, ReportFormat::from_path(&out))?;
        }
        Command::Grid {
            config,
            placements,
            to,
            from,
            parallel,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let reports = run_grid(&cfg, &placements, from, to, parallel)?;
            for r in &reports {
                eprintln!(
                    "{:>16}: mean accuracy {:.4}, mean train {:.2}s, {} site(s) changed",
                    r.label, r.mean_accuracy, r.mean_train_seconds, r.changed_sites
                );
            }
            emit_report(&reports, &out, ReportFormat::from_path(&out))?;
        }
        Command::Smooth {
            input,
            windows,
            out,
        } => {
            let seq = load_phase_csv(&input)?;
            let sweep = sweep_window(&seq, &windows)?;
            match out {
                Some(path) => actkit::smoother::save_sweep_csv(&sweep.rows, &path)?,
                None => write_sweep_csv(&sweep.rows, std::io::stdout().lock())?,
            }
            let best = sweep.best_row();
            eprintln!("best window {} (accuracy {:.4})", best.w, best.accuracy);
        }
        Command::GenPhases {
            phases,
            segment,
            frames,
            noise,
            spread,
            seed,
            out,
        } => {
            let cfg = PhaseGenConfig {
                num_phases: phases,
                segment_len: segment,
                frames,
                noise,
                confusion_spread: spread,
                seed,
            };
            save_phase_csv(&gen_synthetic_phases(&cfg)?, &out)?;
        }
        Command::Sites {
            preset,
            blocks,
            json,
        } => {
            let blocks = match blocks {
                None => [1; NUM_STAGES],
                Some(b) => match <[usize; NUM_STAGES]>::try_from(b) {
                    Ok(arr) => arr,
                    Err(b) => bail!("--blocks needs {NUM_STAGES} values, got {}", b.len()),
                },
            };
            let spec = preset_with_blocks(&preset, blocks)?;
            let mut stdout = std::io::stdout().lock();
            if json {
                writeln!(stdout, "{}", spec.to_json()?)?;
            } else {
                writeln!(stdout, "site_id,band,kind")?;
                for s in spec.list_sites() {
                    let band = s.band.map(|b| b.to_string()).unwrap_or_default();
                    writeln!(stdout, "{},{},{}", s.site_id, band, s.kind)?;
                }
            }
        }
        Command::Approx { a, b, lo, hi, step } => {
            let r = max_approx_error(a, b, lo, hi, step)?;
            println!("x_at_max,err");
            println!("{},{}", r.x_at_max, r.err);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
