//! `hedgebench` — simulate GJR-GARCH markets, calibrate parameters,
//! train and evaluate hedging agents, and produce comparison reports.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hedgebench::agents::{
    train, Algorithm, PolicyCheckpoint, TrainInputs, TrainedPolicy,
};
use hedgebench::bs::DeltaHedgePolicy;
use hedgebench::env::{episode_csv, run_episode, run_episodes, rsqp, Policy};
use hedgebench::harness::{
    compare, early_stop_check, emit_position_plot, evaluate, generate_datasets, grid_search,
    write_report, ExperimentSpec,
};
use hedgebench::market::{
    calibrate_mle, read_return_series, simulate_paths,
};

#[derive(Parser)]
#[command(
    name = "hedgebench",
    about = "Deep-hedging benchmark engine: GJR-GARCH simulation, RSQP hedging environment, Black-Scholes baseline, and eight deep-RL agents",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (JSON mirroring the experiment
    /// spec); unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Built-in scale: `desk` (2^15/2^13 paths) or `paper`
    /// (2^19/2^17 paths, 500k updates).
    #[arg(long, default_value = "desk")]
    scale: String,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentSpec::from_json(&text)?
            }
            None => match self.scale.as_str() {
                "desk" => ExperimentSpec::desk(self.seed)?,
                "paper" => ExperimentSpec::paper_scale(self.seed)?,
                other => bail!("unknown scale `{other}` (expected `desk` or `paper`)"),
            },
        };
        spec.master_seed = self.seed;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path set and persist it (binary + JSON sidecar).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of paths.
        #[arg(long, default_value_t = 4096)]
        n: usize,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "paths.hbps")]
        name: String,
    },
    /// Maximum-likelihood GJR-GARCH fit of a CSV return series
    /// (`date,price` or `return` header).
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Input CSV file.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train one algorithm with its tuned configuration.
    Train {
        #[command(flatten)]
        common: Common,
        /// Algorithm name (dql, double_dql, dueling_dql, dd_dql, mcpg,
        /// ppo, ddpg, td3).
        #[arg(long)]
        algo: String,
        /// Disable the early-stopping rule.
        #[arg(long, default_value_t = false)]
        no_early_stop: bool,
    },
    /// Hyperparameter grid search for one algorithm.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algo: String,
    },
    /// Evaluate a checkpoint (or the baseline) on the test sets.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint JSON; omit to evaluate the Black-Scholes
        /// delta-hedge baseline.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train every configured algorithm and emit the comparison report.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of algorithms (default: all eight).
        #[arg(long)]
        algos: Option<String>,
    },
    /// Position-trajectory plot (SVG + CSV) for the baseline plus any
    /// checkpoints on one simulated episode.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint JSON files to overlay.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// Which simulated path to draw.
        #[arg(long, default_value_t = 0)]
        path_index: usize,
    },
}

fn load_checkpoint(path: &PathBuf) -> Result<(PolicyCheckpoint, TrainedPolicy)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cp: PolicyCheckpoint = serde_json::from_str(&text)?;
    let policy = cp.restore()?;
    Ok((cp, policy))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common, n, name } => {
            let spec = common.spec()?;
            if !spec.garch.is_stationary() {
                eprintln!(
                    "warning: parameters are not covariance-stationary (persistence {:.4})",
                    spec.garch.persistence()
                );
            }
            let set = simulate_paths(
                &spec.garch,
                n,
                spec.env.horizon,
                spec.env.s0,
                spec.env.delta_t,
                spec.master_seed,
            )?;
            fs::create_dir_all(&common.out_dir)?;
            let file = common.out_dir.join(&name);
            set.save(&file)?;
            println!(
                "wrote {n} paths x {} steps to {} (+ sidecar)",
                spec.env.horizon,
                file.display()
            );
            Ok(())
        }
        Command::Calibrate { common, input } => {
            let returns = read_return_series(&input)?;
            let cal = calibrate_mle(&returns, None)?;
            let summary = serde_json::json!({
                "params": cal.params,
                "negative_log_likelihood": cal.nll,
                "converged": cal.converged,
                "evaluations": cal.evaluations,
                "stationary_variance": cal.params.stationary_variance().ok(),
                "n_returns": returns.len(),
            });
            let text = serde_json::to_string_pretty(&summary)?;
            fs::create_dir_all(&common.out_dir)?;
            let file = common.out_dir.join("calibration.json");
            fs::write(&file, &text)?;
            println!("{text}");
            if !cal.converged {
                eprintln!("warning: optimizer budget exhausted before convergence");
            }
            println!("wrote {}", file.display());
            Ok(())
        }
        Command::Train {
            common,
            algo,
            no_early_stop,
        } => {
            let spec = common.spec()?;
            let algorithm = Algorithm::parse(&algo)?;
            let config = algorithm.tuned_config();
            println!(
                "generating datasets (train {}, validation {})...",
                spec.dataset.train_size, spec.dataset.validation_size
            );
            let datasets = generate_datasets(&spec, None)?;
            let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch)?;
            let baseline_validation =
                rsqp(&run_episodes(&baseline, &datasets.validation, &spec.env)?)?;
            println!("baseline validation RSQP: {baseline_validation:.4}");

            let inputs = TrainInputs {
                env: &spec.env,
                train: &datasets.train,
                validation: &datasets.validation,
                config: &config,
                budget: spec.budget,
                validation_every: spec.validation_every,
                seed: spec.master_seed,
            };
            let stop = move |log: &[(u64, f64)]| {
                if no_early_stop {
                    return false;
                }
                let values: Vec<f64> = log.iter().map(|(_, v)| *v).collect();
                early_stop_check(&values, baseline_validation)
            };
            println!("training {} for up to {} updates...", algorithm.name(), spec.budget);
            let outcome = train(&inputs, &stop)?;
            for (u, v) in &outcome.trace.validation_rsqps {
                println!("  update {u:>8}: validation RSQP {v:.4}");
            }
            if outcome.trace.diverged {
                eprintln!("warning: training diverged; checkpoint is partial");
            }
            if outcome.trace.early_stopped {
                println!("early stopping fired at {} updates", outcome.trace.updates_done);
            }
            let eval = evaluate(&outcome.policy, &datasets.tests, &spec.env)?;
            println!(
                "test RSQP: mean {:.4} (std {:.4}) over {} sets | baseline test mean: see `evaluate`",
                eval.mean,
                eval.std,
                eval.per_set.len()
            );
            fs::create_dir_all(&common.out_dir)?;
            let cp = PolicyCheckpoint::new(
                &outcome.policy,
                algorithm,
                &config,
                &spec.env,
                spec.master_seed,
                outcome.trace.updates_done,
            );
            let file = common.out_dir.join(format!("{}_policy.json", algorithm.name()));
            fs::write(&file, serde_json::to_string_pretty(&cp)?)?;
            println!(
                "wrote {} ({:.1} s wall clock)",
                file.display(),
                outcome.trace.wall_clock_s
            );
            Ok(())
        }
        Command::Gridsearch { common, algo } => {
            let spec = common.spec()?;
            let algorithm = Algorithm::parse(&algo)?;
            println!(
                "grid search over {} cells at {} updates each...",
                spec.grid.cell_count(),
                spec.tune_budget
            );
            let result = grid_search(&spec, algorithm)?;
            fs::create_dir_all(&common.out_dir)?;
            let csv = common.out_dir.join(format!("grid_{}.csv", algorithm.name()));
            fs::write(&csv, result.to_csv())?;
            let best = common.out_dir.join(format!("grid_{}_best.json", algorithm.name()));
            fs::write(&best, serde_json::to_string_pretty(&result.best)?)?;
            println!(
                "best cell: lr {} batch {} layers {} width {}",
                result.best.learning_rate,
                result.best.batch_size,
                result.best.hidden_layers,
                result.best.hidden_size
            );
            println!("wrote {} and {}", csv.display(), best.display());
            Ok(())
        }
        Command::Evaluate { common, checkpoint } => {
            let spec = common.spec()?;
            let datasets = generate_datasets(&spec, None)?;
            let (name, policy): (String, Box<dyn Policy>) = match &checkpoint {
                Some(path) => {
                    let (cp, policy) = load_checkpoint(path)?;
                    if cp.env != spec.env {
                        eprintln!("warning: checkpoint was trained for a different environment");
                    }
                    (cp.algorithm.name().to_string(), Box::new(policy))
                }
                None => (
                    "bs_delta_hedge".to_string(),
                    Box::new(DeltaHedgePolicy::from_params(spec.env, &spec.garch)?),
                ),
            };
            let eval = evaluate(policy.as_ref(), &datasets.tests, &spec.env)?;
            println!("{name}: per-set RSQPs {:?}", eval.per_set);
            println!("mean {:.4}  std {:.4}", eval.mean, eval.std);
            if eval.single_set {
                println!("(single test set: std reported as 0)");
            }
            Ok(())
        }
        Command::Compare { common, algos } => {
            let mut spec = common.spec()?;
            if let Some(list) = algos {
                spec.algorithms = list
                    .split(',')
                    .map(|s| Algorithm::parse(s.trim()))
                    .collect::<hedgebench::Result<Vec<_>>>()?;
            }
            println!(
                "comparing {} algorithms + baseline at budget {}...",
                spec.algorithms.len(),
                spec.budget
            );
            let report = compare(&spec)?;
            write_report(&report, &common.out_dir)?;
            println!("{}", report.to_csv());
            println!(
                "wrote {} and {}",
                common.out_dir.join("comparison.csv").display(),
                common.out_dir.join("comparison.json").display()
            );
            Ok(())
        }
        Command::Plot {
            common,
            checkpoint,
            path_index,
        } => {
            let spec = common.spec()?;
            let n = path_index + 1;
            let set = simulate_paths(
                &spec.garch,
                n,
                spec.env.horizon,
                spec.env.s0,
                spec.env.delta_t,
                spec.master_seed,
            )?;
            let path = &set.paths[path_index];

            let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch)?;
            let mut named: Vec<(String, Box<dyn Policy>)> =
                vec![("bsdh".to_string(), Box::new(baseline))];
            for file in &checkpoint {
                let (cp, policy) = load_checkpoint(file)?;
                named.push((cp.algorithm.name().to_string(), Box::new(policy)));
            }
            let borrowed: Vec<(String, &dyn Policy)> = named
                .iter()
                .map(|(n, p)| (n.clone(), p.as_ref()))
                .collect();
            let base = common.out_dir.join("positions");
            emit_position_plot(&borrowed, path, &spec.env, &base)?;

            // per-episode CSV trace for the baseline as well
            let record = run_episode(named[0].1.as_ref(), path, &spec.env)?;
            let trace = episode_csv(&record, path, &spec.env);
            fs::write(common.out_dir.join("episode_bsdh.csv"), trace)?;
            println!(
                "wrote {}.svg, {}.csv, and episode_bsdh.csv",
                base.display(),
                base.display()
            );
            Ok(())
        }
    }
}

