use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use boundary_seg::commands;
use boundary_seg::config::RunConfig;
use boundary_seg::data::Split;
use boundary_seg::tensor::{with_backward_fault, BackwardFault};
use boundary_seg::Error;
use clap::{Args, Parser, Subcommand};

/// Boundary-enhanced semantic segmentation on synthetic street scenes.
#[derive(Parser)]
#[command(name = "bseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, Error> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its manifest in `data_dir`.
    GenData(ConfigArg),
    /// Train a model; writes loss.csv, val.csv, checkpoints and summary.json to `out_dir`.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Compare lambda3 = 0 against the configured lambda3 instead.
        #[arg(long)]
        ablation: bool,
        /// Seeds for the ablation arms.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
    /// Print a JSON metrics report for a checkpoint on one split.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
        /// Skip the throughput measurement (reports fps 0).
        #[arg(long)]
        no_fps: bool,
    },
    /// Write colorized predictions and boundary maps for PPM images.
    Infer {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input PPM files; defaults to the first `--limit` test images.
        #[arg(long = "input", value_name = "PPM")]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 8)]
        limit: usize,
        #[arg(long, default_value = "predictions")]
        out: PathBuf,
    },
    /// Measure single-image forward throughput.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        /// Benchmark trained weights instead of a fresh initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 50)]
        timed: usize,
    },
    /// Run the gradient-check and oracle suites; exit 3 on any failure.
    Verify {
        /// Full-model gradient checks to run, one per seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Corrupt the elementwise-product backward rule by this factor.
        #[arg(long, value_name = "FACTOR", num_args = 0..=1, default_missing_value = "1.5")]
        inject_fault: Option<f64>,
    },
}

/// Writes to stdout, ignoring a closed pipe (e.g. when piped into `head`).
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    emit(&serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::GenData(c) => {
            let manifest = commands::gen_data(&c.load()?)?;
            emit(&manifest.display().to_string());
        }
        Command::Train {
            config,
            ablation,
            seeds,
        } => {
            let config = config.load()?;
            if ablation {
                print_json(&commands::ablation(&config, &seeds)?)?;
            } else {
                print_json(&commands::train(&config)?)?;
            }
        }
        Command::Eval {
            config,
            checkpoint,
            split,
            no_fps,
        } => {
            print_json(&commands::eval(&config.load()?, &checkpoint, split, !no_fps)?)?;
        }
        Command::Infer {
            config,
            checkpoint,
            inputs,
            limit,
            out,
        } => {
            let config = config.load()?;
            let model = commands::load_model(&config, &checkpoint)?;
            let images = if inputs.is_empty() {
                commands::load_data(&config)?
                    .test
                    .into_iter()
                    .take(limit)
                    .map(|s| (s.id.replace('/', "_"), s.image))
                    .collect()
            } else {
                commands::read_inputs(&inputs)?
            };
            print_json(&commands::infer(&model, &images, &out)?)?;
        }
        Command::Bench {
            config,
            checkpoint,
            warmup,
            timed,
        } => {
            let config = config.load()?;
            let model = match checkpoint {
                Some(path) => commands::load_model(&config, &path)?,
                None => boundary_seg::Model::new(config.model_config(), config.seed)?,
            };
            print_json(&commands::bench_model(&model, warmup, timed)?)?;
        }
        Command::Verify { seeds, inject_fault } => {
            let report = match inject_fault {
                Some(f) => with_backward_fault(BackwardFault::ScaleMulGrad(f), || commands::verify(seeds)),
                None => commands::verify(seeds),
            };
            for c in &report.checks {
                emit(&format!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                ));
            }
            if !report.passed() {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
