//! Evaluation, grid search, and the headline comparison run.
//!
//! Parallel sections use a bounded scoped-thread pool (capped by the
//! `HEDGEBENCH_THREADS` environment variable); results are merged by
//! item index, so the output is identical whatever the completion order.
//! Each worker owns its trainer; datasets are shared read-only.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std, welch_t_test_one_sided};
use super::{early_stop_check, generate_datasets, ExperimentSpec};
use crate::agents::{train, AgentConfig, Algorithm, TrainInputs, TrainingTrace};
use crate::bs::DeltaHedgePolicy;
use crate::env::{run_episodes, rsqp, EnvConfig, Policy};
use crate::market::PathSet;
use crate::num::RngStream;
use crate::{Error, Result};

/// Worker-pool width: `HEDGEBENCH_THREADS` if set, else the machine's
/// available parallelism.
pub fn pool_size() -> usize {
    if let Ok(v) = std::env::var("HEDGEBENCH_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Runs `f` over `0..n` on up to `threads` scoped workers; results land
/// by index.
pub(crate) fn parallel_map<R: Send>(
    n: usize,
    threads: usize,
    f: impl Fn(usize) -> R + Sync,
) -> Vec<R> {
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// Per-test-set RSQPs with their mean and sample standard deviation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_set: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// True when only one test set was provided (std reported as 0).
    pub single_set: bool,
}

/// Evaluates a policy on every test set.
pub fn evaluate(policy: &dyn Policy, tests: &[PathSet], env: &EnvConfig) -> Result<EvalSummary> {
    if tests.is_empty() {
        return Err(Error::Contract("need at least one test set".into()));
    }
    let mut per_set = Vec::with_capacity(tests.len());
    for set in tests {
        per_set.push(rsqp(&run_episodes(policy, set, env)?)?);
    }
    let single_set = per_set.len() == 1;
    let std = if single_set { 0.0 } else { sample_std(&per_set) };
    Ok(EvalSummary {
        mean: mean(&per_set),
        std,
        per_set,
        single_set,
    })
}

/// One grid-search cell.
#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub config: AgentConfig,
    /// Best validation RSQP the cell reached (infinite when diverged).
    pub validation_rsqp: f64,
    pub diverged: bool,
    pub runtime_s: f64,
}

#[derive(Debug, Serialize)]
pub struct GridSearchResult {
    pub algorithm: Algorithm,
    pub best: AgentConfig,
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("learning_rate,batch_size,hidden_layers,hidden_size,validation_rsqp,diverged,runtime_s\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.config.learning_rate,
                c.config.batch_size,
                c.config.hidden_layers,
                c.config.hidden_size,
                c.validation_rsqp,
                c.diverged,
                c.runtime_s
            ));
        }
        out
    }
}

fn derive_seed(master: u64, salt: u64) -> u64 {
    RngStream::new(master, 0xA11C_E000 + salt).next_u64()
}

/// Trains one trial and reports its best validation RSQP (the value the
/// returned checkpoint attained), falling back to a direct validation
/// pass when the budget never reached a validation point.
fn run_trial(
    spec: &ExperimentSpec,
    datasets: &super::Datasets,
    config: &AgentConfig,
    budget: u64,
    seed: u64,
    baseline_validation: f64,
) -> Result<(crate::agents::TrainedPolicy, TrainingTrace, f64)> {
    let inputs = TrainInputs {
        env: &spec.env,
        train: &datasets.train,
        validation: &datasets.validation,
        config,
        budget,
        validation_every: spec.validation_every,
        seed,
    };
    let stop = |log: &[(u64, f64)]| {
        let values: Vec<f64> = log.iter().map(|(_, v)| *v).collect();
        early_stop_check(&values, baseline_validation)
    };
    let outcome = train(&inputs, &stop)?;
    let best = outcome
        .trace
        .validation_rsqps
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let value = if outcome.trace.diverged {
        f64::INFINITY
    } else if best.is_finite() {
        best
    } else {
        rsqp(&run_episodes(
            &outcome.policy,
            &datasets.validation,
            &spec.env,
        )?)?
    };
    Ok((outcome.policy, outcome.trace, value))
}

/// Grid search for one algorithm: one trial per cell at the tuning
/// budget; diverged cells rank last with an infinite RSQP. Ties break
/// toward smaller width, fewer layers, smaller batch, then larger rate.
pub fn grid_search(spec: &ExperimentSpec, algorithm: Algorithm) -> Result<GridSearchResult> {
    spec.validate()?;
    let datasets = generate_datasets(spec, None)?;
    let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch)?;
    let baseline_validation = rsqp(&run_episodes(&baseline, &datasets.validation, &spec.env)?)?;

    let mut configs = Vec::new();
    for &lr in &spec.grid.learning_rates {
        for &batch in &spec.grid.batch_sizes {
            for &layers in &spec.grid.hidden_layer_counts {
                for &width in &spec.grid.hidden_sizes {
                    configs.push(AgentConfig {
                        algorithm,
                        learning_rate: lr,
                        batch_size: batch,
                        hidden_layers: layers,
                        hidden_size: width,
                        ..AgentConfig::base(algorithm)
                    });
                }
            }
        }
    }

    let results = parallel_map(configs.len(), pool_size(), |i| {
        let started = Instant::now();
        let trial = run_trial(
            spec,
            &datasets,
            &configs[i],
            spec.tune_budget,
            derive_seed(spec.master_seed, i as u64),
            baseline_validation,
        );
        (trial, started.elapsed().as_secs_f64())
    });

    let mut cells = Vec::with_capacity(configs.len());
    for (config, (trial, runtime_s)) in configs.iter().zip(results) {
        let cell = match trial {
            Ok((_, trace, value)) => GridCell {
                config: *config,
                validation_rsqp: value,
                diverged: trace.diverged,
                runtime_s,
            },
            // a cell that errored outright also ranks last
            Err(_) => GridCell {
                config: *config,
                validation_rsqp: f64::INFINITY,
                diverged: true,
                runtime_s,
            },
        };
        cells.push(cell);
    }

    let best = cells
        .iter()
        .min_by(|a, b| {
            a.validation_rsqp
                .total_cmp(&b.validation_rsqp)
                .then(a.config.hidden_size.cmp(&b.config.hidden_size))
                .then(a.config.hidden_layers.cmp(&b.config.hidden_layers))
                .then(a.config.batch_size.cmp(&b.config.batch_size))
                .then(b.config.learning_rate.total_cmp(&a.config.learning_rate))
        })
        .expect("grid is non-empty")
        .config;

    Ok(GridSearchResult {
        algorithm,
        best,
        cells,
    })
}

/// One row of the comparison report. Wall-clock runtimes are kept out of
/// the JSON document (and in the CSV) so identical seeds produce
/// byte-identical `comparison.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub hyperparameters: Option<AgentConfig>,
    pub per_set_rsqps: Vec<f64>,
    pub mean_rsqp: f64,
    pub std_rsqp: f64,
    /// One-sided Welch p-value against the row directly below; absent on
    /// the last row.
    pub p_value_vs_next: Option<f64>,
    #[serde(skip)]
    pub runtime_s: f64,
    #[serde(skip)]
    pub trace: Option<TrainingTrace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub master_seed: u64,
    /// Rows sorted by mean RSQP ascending (ties keep insertion order).
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,mean_rsqp,std_rsqp,p_value_vs_next,runtime_s\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.algorithm,
                row.mean_rsqp,
                row.std_rsqp,
                row.p_value_vs_next
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
                row.runtime_s
            ));
        }
        out
    }
}

/// Trains every algorithm in the spec with its tuned configuration,
/// evaluates all of them (plus the delta-hedge baseline) on the test
/// sets, sorts by mean RSQP, and fills in adjacent-row p-values.
pub fn compare(spec: &ExperimentSpec) -> Result<ComparisonReport> {
    spec.validate()?;
    let datasets = generate_datasets(spec, None)?;
    let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch)?;
    let baseline_validation = rsqp(&run_episodes(&baseline, &datasets.validation, &spec.env)?)?;

    let trials = parallel_map(spec.algorithms.len(), pool_size(), |i| {
        let algorithm = spec.algorithms[i];
        let config = algorithm.tuned_config();
        let started = Instant::now();
        let trial = run_trial(
            spec,
            &datasets,
            &config,
            spec.budget,
            derive_seed(spec.master_seed, 100 + i as u64),
            baseline_validation,
        );
        let runtime_s = started.elapsed().as_secs_f64();
        trial.map(|(policy, trace, _)| (algorithm, config, policy, trace, runtime_s))
    });

    let mut rows = Vec::new();
    for trial in trials {
        let (algorithm, config, policy, trace, runtime_s) = trial?;
        let eval = evaluate(&policy, &datasets.tests, &spec.env)?;
        rows.push(ComparisonRow {
            algorithm: algorithm.name().to_string(),
            hyperparameters: Some(config),
            per_set_rsqps: eval.per_set,
            mean_rsqp: eval.mean,
            std_rsqp: eval.std,
            p_value_vs_next: None,
            runtime_s,
            trace: Some(trace),
        });
    }

    let eval = evaluate(&baseline, &datasets.tests, &spec.env)?;
    rows.push(ComparisonRow {
        algorithm: "bs_delta_hedge".to_string(),
        hyperparameters: None,
        per_set_rsqps: eval.per_set,
        mean_rsqp: eval.mean,
        std_rsqp: eval.std,
        p_value_vs_next: None,
        runtime_s: 0.0,
        trace: None,
    });

    rows.sort_by(|a, b| a.mean_rsqp.total_cmp(&b.mean_rsqp));
    for i in 0..rows.len().saturating_sub(1) {
        let p = if rows[i].per_set_rsqps.len() >= 2 {
            Some(welch_t_test_one_sided(
                &rows[i].per_set_rsqps,
                &rows[i + 1].per_set_rsqps,
            )?)
        } else {
            None
        };
        rows[i].p_value_vs_next = p;
    }

    Ok(ComparisonReport {
        master_seed: spec.master_seed,
        rows,
    })
}

/// Writes `comparison.csv` and `comparison.json` into `out_dir`.
pub fn write_report(report: &ComparisonReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("comparison.csv"), report.to_csv())?;
    std::fs::write(out_dir.join("comparison.json"), report.to_json()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DatasetSpec;

    fn mini_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::desk(9).unwrap();
        spec.dataset = DatasetSpec {
            train_size: 48,
            validation_size: 16,
            n_test_sets: 3,
            test_size: 16,
        };
        spec.budget = 40;
        spec.tune_budget = 20;
        spec.validation_every = 20;
        spec
    }

    #[test]
    fn parallel_map_orders_by_index() {
        let out = parallel_map(100, 4, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn evaluate_single_set_flags_std() {
        let spec = mini_spec();
        let datasets = generate_datasets(&spec, None).unwrap();
        let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch).unwrap();
        let one = evaluate(&baseline, &datasets.tests[..1], &spec.env).unwrap();
        assert!(one.single_set);
        assert_eq!(one.std, 0.0);
        // duplicated identical sets: zero dispersion
        let twice = vec![datasets.tests[0].clone(), datasets.tests[0].clone()];
        let dup = evaluate(&baseline, &twice, &spec.env).unwrap();
        assert_eq!(dup.std, 0.0);
        assert!(!dup.single_set);
    }

    #[test]
    fn one_cell_grid_returns_that_cell() {
        let mut spec = mini_spec();
        spec.grid = super::super::GridSpec {
            learning_rates: vec![1e-4],
            batch_sizes: vec![8],
            hidden_layer_counts: vec![2],
            hidden_sizes: vec![8],
        };
        let result = grid_search(&spec, Algorithm::Mcpg).unwrap();
        assert_eq!(result.cells.len(), 1);
        assert_eq!(result.best.hidden_size, 8);
        assert_eq!(result.best.learning_rate, 1e-4);
    }

    #[test]
    fn baseline_only_comparison_has_single_row() {
        let mut spec = mini_spec();
        spec.algorithms = vec![];
        let report = compare(&spec).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].algorithm, "bs_delta_hedge");
        assert!(report.rows[0].p_value_vs_next.is_none());
    }

    #[test]
    fn identical_policies_tie_at_half() {
        // two copies of the same trained policy produce identical per-set
        // vectors, so the adjacent p-value must be exactly one half
        let spec = mini_spec();
        let datasets = generate_datasets(&spec, None).unwrap();
        let baseline = DeltaHedgePolicy::from_params(spec.env, &spec.garch).unwrap();
        let eval = evaluate(&baseline, &datasets.tests, &spec.env).unwrap();
        let p = welch_t_test_one_sided(&eval.per_set, &eval.per_set).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn report_stats_recompute_from_vectors() {
        let mut spec = mini_spec();
        spec.algorithms = vec![Algorithm::Mcpg];
        let report = compare(&spec).unwrap();
        for row in &report.rows {
            assert!((row.mean_rsqp - mean(&row.per_set_rsqps)).abs() < 1e-12);
            if row.per_set_rsqps.len() > 1 {
                assert!((row.std_rsqp - sample_std(&row.per_set_rsqps)).abs() < 1e-12);
            }
        }
        // sorted ascending
        for w in report.rows.windows(2) {
            assert!(w[0].mean_rsqp <= w[1].mean_rsqp);
        }
    }
}
