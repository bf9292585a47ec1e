use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flatprec::harness::config::ExplicitBounds;
use flatprec::harness::record::{attach_timings, read_records};
use flatprec::harness::run::sdr_problem_for_trial;
use flatprec::harness::{run_experiment, summarize, write_run, BudgetPoint, ExperimentConfig};
use flatprec::power::PaModel;
use flatprec::{FlatPrecError, Result};

#[derive(Parser)]
#[command(name = "flatprec", version, about = "Flat precoding experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write records, summary, CDFs and a manifest.
    Run {
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Also dump every trial channel as `channels/<N>x<K>x<M>_t<trial>.csv`.
        #[arg(long)]
        dump_channels: bool,
    },
    /// Summarize a records.csv (timings.csv next to it is picked up if present).
    Summarize {
        records: PathBuf,
        /// Config whose PA model to use; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write summary and CDF CSVs into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the relaxed SDR problem of one trial.
    ExportSdr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Index into the dimension sweep.
        #[arg(long, default_value_t = 0)]
        dims_index: usize,
        #[arg(long, conflicts_with_all = ["p_ub", "p_lb"])]
        delta_p_db: Option<f64>,
        #[arg(long, requires = "p_lb")]
        p_ub: Option<f64>,
        #[arg(long, requires = "p_ub")]
        p_lb: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn load(config: &PathBuf, seed: Option<u64>, trials: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.channel.base_seed = s;
    }
    if let Some(t) = trials {
        cfg.channel.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            trials,
            dump_channels,
        } => {
            let cfg = load(&config, seed, trials)?;
            let records = run_experiment(&cfg)?;
            let (manifest, summary) = write_run(&out, &cfg, &records)?;
            if dump_channels {
                let dir = out.join("channels");
                std::fs::create_dir_all(&dir)?;
                for d in cfg.system.dims() {
                    for t in 0..cfg.channel.trials {
                        let seed = cfg.trial_seed(t);
                        let ch = flatprec::harness::run::trial_channel(&cfg, d, seed)?;
                        let name = format!("{}x{}x{}_t{t}.csv", d.n_tx, d.n_ue, d.n_rx);
                        ch.write_csv(BufWriter::new(File::create(dir.join(name))?), seed)?;
                    }
                }
            }
            print!("{}", summary.table());
            eprintln!(
                "{} records: {} feasible, {} flagged infeasible, {} failed -> {}",
                manifest.records,
                manifest.feasible,
                manifest.flagged_infeasible,
                manifest.failed,
                out.display()
            );
            Ok(manifest.all_accounted)
        }
        Cmd::Summarize { records, config, out } => {
            let mut recs = read_records(BufReader::new(File::open(&records)?))?;
            if let Some(t) = records.parent().map(|p| p.join("timings.csv")).filter(|p| p.exists()) {
                attach_timings(&mut recs, BufReader::new(File::open(t)?))?;
            }
            let pa = match config {
                Some(c) => ExperimentConfig::from_path(&c)?.pa,
                None => PaModel::default(),
            };
            let summary = summarize(&recs, &pa)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                summary.write_rows(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
                summary.write_timings(BufWriter::new(File::create(dir.join("summary_timings.csv"))?))?;
                flatprec::harness::Summary::write_cdfs(
                    &summary.power_cdfs,
                    BufWriter::new(File::create(dir.join("cdf_power.csv"))?),
                )?;
                flatprec::harness::Summary::write_cdfs(
                    &summary.rate_cdfs,
                    BufWriter::new(File::create(dir.join("cdf_rate.csv"))?),
                )?;
            }
            print!("{}", summary.table());
            Ok(true)
        }
        Cmd::ExportSdr {
            config,
            trial,
            dims_index,
            delta_p_db,
            p_ub,
            p_lb,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dims = *cfg.system.dims().get(dims_index).ok_or_else(|| {
                FlatPrecError::Config(format!("dims index {dims_index} outside the sweep"))
            })?;
            let point = match (delta_p_db, p_ub, p_lb) {
                (_, Some(p_ub), Some(p_lb)) => BudgetPoint::Explicit(ExplicitBounds { p_ub, p_lb }),
                (dp, _, _) => BudgetPoint::Flatness(dp.unwrap_or(0.0)),
            };
            let problem = sdr_problem_for_trial(&cfg, dims, trial, point)?;
            problem.write(BufWriter::new(File::create(&out)?))?;
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some trials failed the feasibility recheck");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
