use std::path::PathBuf;
use std::process::ExitCode;

use absence_core::learners::LearnerKind;
use absence_core::pipeline::{self, Overrides, PipelineError, RunConfig};
use clap::{Parser, Subcommand};

/// Home-absence detection from appliance power traces.
#[derive(Debug, Parser)]
#[command(name = "absence", version)]
struct Cli {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample channel traces (UK-DALE or synthetic) into window CSVs.
    Ingest,
    /// Label the resampled windows and write the dataset and manifest.
    Annotate,
    /// Tune one learner, or `all` of them.
    Tune {
        #[arg(value_name = "LEARNER")]
        learner: String,
    },
    /// Cross-validate the configured learners and compare them.
    Benchmark {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Fraction of rows to keep, stratified by label.
        #[arg(long)]
        subsample: Option<f64>,
    },
    /// Summarize the artifacts in the output directory.
    Report,
    /// Every stage in order: ingest, annotate, tune, benchmark, report.
    Run,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut o = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out.clone(),
        ..Overrides::default()
    };
    if let Command::Benchmark {
        runs,
        folds,
        subsample,
    } = &cli.command
    {
        o.runs = *runs;
        o.folds = *folds;
        o.subsample = *subsample;
    }
    cfg.apply(&o);
    let kinds = match &cli.command {
        Command::Tune { learner } if learner == "all" => LearnerKind::ALL.to_vec(),
        Command::Tune { learner } => vec![pipeline::parse_learner(learner)?],
        _ => Vec::new(),
    };
    cfg.validate()?;
    pipeline::with_workers(cfg.workers, || match &cli.command {
        Command::Ingest => {
            let s = pipeline::cmd_ingest(&cfg)?;
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            println!("{} windows per channel", s.windows);
            Ok(())
        }
        Command::Annotate => {
            let s = pipeline::cmd_annotate(&cfg)?;
            println!("{} rows, {} absent", s.rows, s.absent);
            for (k, n) in &s.outings {
                println!("{:<15} {n}", k.name());
            }
            Ok(())
        }
        Command::Tune { .. } => {
            for kind in &kinds {
                let t = pipeline::cmd_tune(&cfg, *kind)?;
                println!(
                    "{kind}: {} best F1 {:.4} with {}",
                    t.method.name(),
                    t.fitness,
                    t.hyperparams
                );
            }
            Ok(())
        }
        Command::Benchmark { .. } => {
            let r = pipeline::cmd_benchmark(&cfg)?;
            print!("{}", r.text_tables());
            Ok(())
        }
        Command::Report => {
            print!("{}", pipeline::cmd_report(&cfg)?);
            Ok(())
        }
        Command::Run => {
            print!("{}", pipeline::run_all(&cfg)?);
            Ok(())
        }
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
