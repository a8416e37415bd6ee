//! Experiment orchestration: dataset generation, early stopping, grid
//! search, multi-test-set evaluation, Welch t-tests, and report/plot
//! emission. The CLI is a thin wrapper over this module.

mod plot;
mod runner;
mod stats;

pub use plot::emit_position_plot;
pub use runner::{
    compare, evaluate, grid_search, pool_size, write_report, ComparisonReport, ComparisonRow,
    EvalSummary, GridCell, GridSearchResult,
};
pub use stats::{mean, sample_std, student_t_cdf, welch_t_test_one_sided};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::bs;
use crate::env::EnvConfig;
use crate::market::{simulate_paths_with_offset, GjrGarchParams, PathSet};
use crate::{Error, Result};

/// Dataset sizes (paths per set).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub train_size: usize,
    pub validation_size: usize,
    pub n_test_sets: usize,
    pub test_size: usize,
}

/// Hyperparameter grid searched per algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub hidden_layer_counts: Vec<usize>,
    pub hidden_sizes: Vec<usize>,
}

impl GridSpec {
    /// The full 3^4 = 81-cell search grid.
    pub fn full() -> Self {
        GridSpec {
            learning_rates: vec![1e-3, 1e-4, 1e-5],
            batch_sizes: vec![64, 128, 256],
            hidden_layer_counts: vec![2, 3, 4],
            hidden_sizes: vec![64, 128, 256],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.learning_rates.len()
            * self.batch_sizes.len()
            * self.hidden_layer_counts.len()
            * self.hidden_sizes.len()
    }
}

/// A complete experiment description; the JSON config file mirrors this
/// struct field for field and rejects unknown keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub env: EnvConfig,
    pub garch: GjrGarchParams,
    pub dataset: DatasetSpec,
    pub algorithms: Vec<Algorithm>,
    pub grid: GridSpec,
    /// Training updates per headline run.
    pub budget: u64,
    /// Training updates per grid-search cell.
    pub tune_budget: u64,
    pub validation_every: u64,
    pub master_seed: u64,
}

impl ExperimentSpec {
    /// Desk-scale defaults: 2^15 training paths, 2^13 validation, five
    /// 2^13-path test sets.
    pub fn desk(master_seed: u64) -> Result<Self> {
        let garch = GjrGarchParams::default();
        Ok(ExperimentSpec {
            env: bs::default_env_config(&garch)?,
            garch,
            dataset: DatasetSpec {
                train_size: 1 << 15,
                validation_size: 1 << 13,
                n_test_sets: 5,
                test_size: 1 << 13,
            },
            algorithms: Algorithm::ALL.to_vec(),
            grid: GridSpec::full(),
            budget: 20_000,
            tune_budget: 10_000,
            validation_every: 1_000,
            master_seed,
        })
    }

    /// Full-scale configuration: 2^19 training paths, 2^17 validation,
    /// ten 2^17-path test sets, 500k-update budget.
    pub fn paper_scale(master_seed: u64) -> Result<Self> {
        let mut spec = ExperimentSpec::desk(master_seed)?;
        spec.dataset = DatasetSpec {
            train_size: 1 << 19,
            validation_size: 1 << 17,
            n_test_sets: 10,
            test_size: 1 << 17,
        };
        spec.budget = 500_000;
        spec.tune_budget = 200_000;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.garch.validate()?;
        let d = &self.dataset;
        if d.train_size == 0 || d.validation_size == 0 || d.n_test_sets == 0 || d.test_size == 0 {
            return Err(Error::Config("dataset sizes must be positive".into()));
        }
        if self.grid.cell_count() == 0 {
            return Err(Error::Config("hyperparameter grid cannot be empty".into()));
        }
        Ok(())
    }
}

/// The generated datasets; stream-id ranges are disjoint by construction
/// so train/validation/test randomness never overlaps.
pub struct Datasets {
    pub train: PathSet,
    pub validation: PathSet,
    pub tests: Vec<PathSet>,
}

/// Simulates all datasets from the master seed. When `out_dir` is given,
/// each set is persisted as `<name>.hbps` plus its JSON sidecar.
pub fn generate_datasets(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<Datasets> {
    spec.validate()?;
    let d = &spec.dataset;
    let sim = |n: usize, offset: u64| {
        simulate_paths_with_offset(
            &spec.garch,
            n,
            spec.env.horizon,
            spec.env.s0,
            spec.env.delta_t,
            spec.master_seed,
            offset,
        )
    };
    let train = sim(d.train_size, 0)?;
    let validation = sim(d.validation_size, d.train_size as u64)?;
    let mut tests = Vec::with_capacity(d.n_test_sets);
    let base = (d.train_size + d.validation_size) as u64;
    for k in 0..d.n_test_sets {
        tests.push(sim(d.test_size, base + (k * d.test_size) as u64)?);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        train.save(&dir.join("train.hbps"))?;
        validation.save(&dir.join("validation.hbps"))?;
        for (k, set) in tests.iter().enumerate() {
            set.save(&dir.join(format!("test_{k:02}.hbps")))?;
        }
    }
    Ok(Datasets {
        train,
        validation,
        tests,
    })
}

/// The two-condition early-stopping rule: stop once the log holds at
/// least six entries, each of the last five exceeds the sixth-last, and
/// all six sit below the baseline RSQP.
pub fn early_stop_check(validation_log: &[f64], baseline_rsqp: f64) -> bool {
    if validation_log.len() < 6 {
        return false;
    }
    let tail = &validation_log[validation_log.len() - 6..];
    let anchor = tail[0];
    let rising = tail[1..].iter().all(|&v| v > anchor);
    let below_baseline = tail.iter().all(|&v| v < baseline_rsqp);
    rising && below_baseline
}
