use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rrbeam::analysis::{check_stability, predict_mse, PredictOptions};
use rrbeam::complexity::complexity_counts;
use rrbeam::config::{AlgorithmKind, ExperimentConfig};
use rrbeam::experiment::{run_experiment, sweep_rank};
use rrbeam::jio::{JioState, SgSteps};
use rrbeam::plot::emit_plots;
use rrbeam::{Error, Result};

#[derive(Parser)]
#[command(name = "rrbeam", version, about = "Reduced-rank LCMV beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm and write per-snapshot ensemble curves.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Final-snapshot SINR and MSE of each fixed-rank algorithm over a range of ranks.
    SweepRank {
        config: PathBuf,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..16")]
        ranks: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify a JIO-SG step-size pair at the standard initialization.
    StabilityCheck {
        config: PathBuf,
        #[arg(long)]
        mu_s: f64,
        #[arg(long)]
        mu_w: f64,
        /// Rank of the linearization state; taken from the config when omitted.
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Semi-analytical MSE curve for each JIO-SG entry of the config.
    PredictMse {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-snapshot additions and multiplications of each algorithm.
    Complexity {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Render SVG charts from a CSV written by another subcommand.
    Plot { csv: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

fn parse_ranks(list: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidParameter(format!("cannot parse rank list '{list}'"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if let Some((lo, hi)) = list.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    list.split(',').map(num).collect()
}

fn load(path: &Path, trials: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(t) = trials {
        cfg.n_trials = t;
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_owned()
}

fn output_path(dir: &Path, name: String) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out, trials, seed } => {
            let cfg = load(&config, trials, seed)?;
            let res = run_experiment(&cfg)?;
            let path = output_path(&out, format!("{}.csv", stem(&config)))?;
            res.save_csv(&path)?;
            for c in &res.curves {
                println!("{:<20} final SINR {:>8.3} dB  final MSE {:.4e}", c.label, c.final_sinr_db(), c.mse[res.n_snapshots - 1]);
            }
            println!("wrote {}", path.display());
        }
        Command::SweepRank { config, ranks, out, trials, seed } => {
            let cfg = load(&config, trials, seed)?;
            let ranks = parse_ranks(&ranks)?;
            let sweep = sweep_rank(&cfg, &ranks)?;
            let path = output_path(&out, format!("{}_rank.csv", stem(&config)))?;
            sweep.save_csv(&path)?;
            for row in &sweep.rows {
                println!("{:<20} D={:<3} SINR {:>8.3} dB", row.algorithm, row.rank, row.sinr_db);
            }
            println!("wrote {}", path.display());
        }
        Command::StabilityCheck { config, mu_s, mu_w, rank } => {
            let cfg = load(&config, None, None)?;
            let scenario = cfg.to_scenario()?;
            let rank = rank
                .or_else(|| {
                    cfg.algorithms.iter().find_map(|a| match &a.kind {
                        AlgorithmKind::JioSg { rank, .. } => Some(*rank),
                        AlgorithmKind::JioSgAuto { auto, .. } => Some(auto.d_max),
                        _ => None,
                    })
                })
                .unwrap_or_else(|| 4.min(scenario.elements));
            let state = JioState::initial(scenario.soi_steering(), rank)?;
            let report = check_stability(&scenario, SgSteps { mu_s, mu_w }, &state)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::PredictMse { config, out, ensemble, seed } => {
            let cfg = load(&config, None, None)?;
            let scenario = cfg.to_scenario()?;
            let mut any = false;
            for alg in &cfg.algorithms {
                let AlgorithmKind::JioSg { rank, mu_s, mu_w } = alg.kind else { continue };
                any = true;
                let mut opts = PredictOptions::new(cfg.n_snapshots, rank);
                if let Some(a) = &cfg.analysis {
                    opts.ensemble_size = a.ensemble_size;
                    opts.seed = a.seed;
                }
                opts.ensemble_size = ensemble.unwrap_or(opts.ensemble_size);
                opts.seed = seed.or(opts.seed);
                let pred = predict_mse(&scenario, SgSteps { mu_s, mu_w }, &opts)?;
                let path = output_path(&out, format!("{}_{}_predicted.csv", stem(&config), alg.label()))?;
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["snapshot", "predicted_mse"])?;
                for (i, v) in pred.trajectory.iter().enumerate() {
                    w.write_record([i.to_string(), v.to_string()])?;
                }
                w.flush()?;
                println!(
                    "{:<20} eps_min {:.4e}  steady-state {:.4e}  wrote {}",
                    alg.label(),
                    pred.eps_min,
                    pred.steady_state(0.2),
                    path.display()
                );
            }
            if !any {
                return Err(Error::InvalidParameter("config has no jio-sg algorithm to predict".into()));
            }
        }
        Command::Complexity { m, d, format } => {
            let counts = complexity_counts(m, d)?;
            match format {
                Format::Table => {
                    println!("{:<10} {:>12} {:>16}", "algorithm", "additions", "multiplications");
                    for c in &counts {
                        println!("{:<10} {:>12} {:>16}", c.algorithm, c.additions, c.multiplications);
                    }
                }
                Format::Csv => {
                    println!("algorithm,additions,multiplications");
                    for c in &counts {
                        println!("{},{},{}", c.algorithm, c.additions, c.multiplications);
                    }
                }
                Format::Json => println!("{}", serde_json::to_string_pretty(&counts)?),
            }
        }
        Command::Plot { csv } => {
            for p in emit_plots(&csv)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
