//! The eight deep-RL training procedures: four DQL variants over a
//! discrete action grid, pathwise Monte Carlo policy gradient (MCPG),
//! PPO, DDPG, and TD3. They share the `num` networks, the `env`
//! environment, and one validation/early-stopping monitor.
//!
//! Stream allocation (all derived from the training seed): weight init
//! uses streams starting at 2^32, exploration 2^33, replay and minibatch
//! sampling 2^34, rollout path order 2^35, action sampling 2^36. Path
//! simulation itself owns the low stream ids. Single-threaded training
//! with a fixed seed is bit-reproducible.

mod ddpg;
mod grid;
mod mcpg;
mod ppo;
mod qlearn;
mod replay;

pub use ddpg::td3_target;
pub use grid::ActionGrid;
pub use mcpg::{mcpg_objective, mcpg_update, McpgStep};
pub use ppo::ppo_clip_objective;
pub use qlearn::{double_dql_target, dql_target, dueling_aggregate};
pub use replay::{ReplayBuffer, Transition};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{run_episodes, rsqp, EnvConfig, Policy};
use crate::market::PathSet;
use crate::num::{Matrix, Mlp, NetCheckpoint};
use crate::{Error, Result};

pub(crate) const STREAM_INIT: u64 = 1 << 32;
pub(crate) const STREAM_EXPLORE: u64 = 1 << 33;
pub(crate) const STREAM_SAMPLE: u64 = 1 << 34;
pub(crate) const STREAM_PATHS: u64 = 1 << 35;
pub(crate) const STREAM_ACTION: u64 = 1 << 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dql,
    DoubleDql,
    DuelingDql,
    DdDql,
    Mcpg,
    Ppo,
    Ddpg,
    Td3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Dql,
        Algorithm::DoubleDql,
        Algorithm::DuelingDql,
        Algorithm::DdDql,
        Algorithm::Mcpg,
        Algorithm::Ppo,
        Algorithm::Ddpg,
        Algorithm::Td3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Dql => "dql",
            Algorithm::DoubleDql => "double_dql",
            Algorithm::DuelingDql => "dueling_dql",
            Algorithm::DdDql => "dd_dql",
            Algorithm::Mcpg => "mcpg",
            Algorithm::Ppo => "ppo",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }

    /// The grid-search winners used for headline comparisons:
    /// (learning rate, batch size, hidden layers, hidden size).
    pub fn tuned_config(&self) -> AgentConfig {
        let (lr, batch, layers, width) = match self {
            Algorithm::Mcpg => (1e-5, 256, 4, 64),
            Algorithm::Ppo => (1e-5, 128, 2, 256),
            Algorithm::Td3 => (1e-5, 64, 4, 256),
            Algorithm::Dql => (1e-4, 64, 4, 128),
            Algorithm::Ddpg => (1e-5, 64, 4, 256),
            Algorithm::DuelingDql => (1e-4, 128, 3, 256),
            Algorithm::DdDql => (1e-4, 256, 3, 256),
            Algorithm::DoubleDql => (1e-4, 64, 4, 64),
        };
        AgentConfig {
            algorithm: *self,
            learning_rate: lr,
            batch_size: batch,
            hidden_layers: layers,
            hidden_size: width,
            ..AgentConfig::base(*self)
        }
    }
}

/// Complete hyperparameter set. Fields that only apply to some
/// algorithms are ignored by the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Policy / Q-network learning rate (alpha).
    pub learning_rate: f64,
    /// Value-function learning rate (beta); defaults to `learning_rate`.
    pub value_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    /// Discount factor; 1 for this finite-horizon single-reward task.
    pub gamma: f64,
    /// Target-network soft-update rate (beta-bar).
    pub soft_update_rate: f64,
    /// Epsilon-greedy schedule: linear `start -> end` over the first
    /// `decay_fraction` of the update budget.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    /// Additive Gaussian exploration noise (DDPG/TD3).
    pub explore_noise: f64,
    /// PPO clip range.
    pub ppo_clip: f64,
    /// PPO optimization epochs per collected batch.
    pub ppo_epochs: usize,
    /// TD3: critic updates per actor/target update.
    pub td3_policy_delay: usize,
    /// TD3 target policy smoothing: noise sigma and its clip bound.
    pub td3_target_noise: f64,
    pub td3_noise_clip: f64,
    pub replay_capacity: usize,
    /// Minimum stored transitions before gradient updates start.
    pub learning_starts: usize,
}

impl AgentConfig {
    pub fn base(algorithm: Algorithm) -> Self {
        AgentConfig {
            algorithm,
            learning_rate: 1e-4,
            value_learning_rate: None,
            batch_size: 64,
            hidden_layers: 2,
            hidden_size: 64,
            gamma: 1.0,
            soft_update_rate: 0.005,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            explore_noise: 0.1,
            ppo_clip: 0.2,
            ppo_epochs: 10,
            td3_policy_delay: 2,
            td3_target_noise: 0.1,
            td3_noise_clip: 0.25,
            replay_capacity: 100_000,
            learning_starts: 1_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.hidden_layers == 0 || self.hidden_size == 0 {
            return Err(Error::Config(
                "batch size, layers, and width must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0,1]".into()));
        }
        if self.td3_policy_delay == 0 || self.ppo_epochs == 0 {
            return Err(Error::Config("delays and epochs must be positive".into()));
        }
        if self.replay_capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.value_learning_rate.unwrap_or(self.learning_rate)
    }
}

/// A trained decision rule; every variant emits positions in [0, 1].
#[derive(Clone, Debug)]
pub enum TrainedPolicy {
    /// Greedy argmax over a Q network on the action grid.
    GreedyQ {
        net: Mlp,
        grid: ActionGrid,
        dueling: bool,
    },
    /// Deterministic continuous policy with a logistic head.
    Deterministic { net: Mlp },
    /// Gaussian policy evaluated at its mean.
    Gaussian { net: Mlp, log_std: f64 },
}

impl TrainedPolicy {
    fn greedy_from_q(out: &[f64], grid: &ActionGrid, dueling: bool) -> f64 {
        let q_owned;
        let q: &[f64] = if dueling {
            q_owned = dueling_aggregate(out[0], &out[1..]);
            &q_owned
        } else {
            out
        };
        let mut best = 0usize;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        grid.value(best)
    }
}

impl Policy for TrainedPolicy {
    fn act(&self, _t: usize, state: [f64; 3]) -> f64 {
        match self {
            TrainedPolicy::GreedyQ { net, grid, dueling } => {
                let out = net.forward(&state).expect("state width 3");
                TrainedPolicy::greedy_from_q(&out, grid, *dueling)
            }
            TrainedPolicy::Deterministic { net } | TrainedPolicy::Gaussian { net, .. } => {
                net.forward(&state).expect("state width 3")[0]
            }
        }
    }

    fn act_batch(&self, _t: usize, states: &Matrix) -> Vec<f64> {
        match self {
            TrainedPolicy::GreedyQ { net, grid, dueling } => {
                let out = net.forward_batch(states);
                (0..out.rows())
                    .map(|i| TrainedPolicy::greedy_from_q(out.row(i), grid, *dueling))
                    .collect()
            }
            TrainedPolicy::Deterministic { net } | TrainedPolicy::Gaussian { net, .. } => {
                let out = net.forward_batch(states);
                out.data().to_vec()
            }
        }
    }
}

/// What a training run recorded.
#[derive(Clone, Debug)]
pub struct TrainingTrace {
    pub updates_done: u64,
    /// `(update index, validation RSQP)` pairs.
    pub validation_rsqps: Vec<(u64, f64)>,
    pub wall_clock_s: f64,
    pub early_stopped: bool,
    /// Training aborted on a NaN loss; the policy/trace are partial.
    pub diverged: bool,
    /// MCPG updates skipped because the whole batch had no downside.
    pub skipped_zero_grad: u64,
}

pub struct TrainOutcome {
    /// The checkpoint with the lowest validation RSQP (the final policy
    /// when validation never ran).
    pub policy: TrainedPolicy,
    pub trace: TrainingTrace,
}

/// Everything a training run needs.
pub struct TrainInputs<'a> {
    pub env: &'a EnvConfig,
    pub train: &'a PathSet,
    pub validation: &'a PathSet,
    pub config: &'a AgentConfig,
    /// Maximum number of gradient updates.
    pub budget: u64,
    /// Validate every this many updates (0 disables validation).
    pub validation_every: u64,
    pub seed: u64,
}

/// Early-stopping predicate over the validation log; owned by the
/// harness, injected here so trainers stay rule-agnostic.
pub type StopRule<'a> = &'a dyn Fn(&[(u64, f64)]) -> bool;

/// Stop rule that never fires.
pub fn never_stop(_log: &[(u64, f64)]) -> bool {
    false
}

/// Runs the configured algorithm's training loop: collects experience on
/// the training set, validates every `validation_every` updates, applies
/// the stop rule, and returns the best-validation checkpoint.
pub fn train(inputs: &TrainInputs, stop: StopRule) -> Result<TrainOutcome> {
    inputs.env.validate()?;
    inputs.config.validate()?;
    if inputs.train.horizon != inputs.env.horizon
        || inputs.validation.horizon != inputs.env.horizon
    {
        return Err(Error::Contract(
            "training and validation sets must match the environment horizon".into(),
        ));
    }
    match inputs.config.algorithm {
        Algorithm::Dql => qlearn::train_dql(inputs, stop, qlearn::DqlVariant::Vanilla),
        Algorithm::DoubleDql => qlearn::train_dql(inputs, stop, qlearn::DqlVariant::Double),
        Algorithm::DuelingDql => qlearn::train_dql(inputs, stop, qlearn::DqlVariant::Dueling),
        Algorithm::DdDql => qlearn::train_dql(inputs, stop, qlearn::DqlVariant::DoubleDueling),
        Algorithm::Mcpg => mcpg::train_mcpg(inputs, stop),
        Algorithm::Ppo => ppo::train_ppo(inputs, stop),
        Algorithm::Ddpg => ddpg::train_ddpg(inputs, stop, false),
        Algorithm::Td3 => ddpg::train_ddpg(inputs, stop, true),
    }
}

/// Validation bookkeeping shared by every trainer.
pub(crate) struct Monitor<'a> {
    env: &'a EnvConfig,
    validation: &'a PathSet,
    every: u64,
    stop: StopRule<'a>,
    log: Vec<(u64, f64)>,
    best: Option<(f64, TrainedPolicy)>,
    early_stopped: bool,
    started: Instant,
}

impl<'a> Monitor<'a> {
    pub(crate) fn new(inputs: &'a TrainInputs<'a>, stop: StopRule<'a>) -> Self {
        Monitor {
            env: inputs.env,
            validation: inputs.validation,
            every: inputs.validation_every,
            stop,
            log: Vec::new(),
            best: None,
            early_stopped: false,
            started: Instant::now(),
        }
    }

    /// Call after each completed update; returns true when training must
    /// stop early.
    pub(crate) fn after_update(
        &mut self,
        updates: u64,
        snapshot: &dyn Fn() -> TrainedPolicy,
    ) -> Result<bool> {
        if self.every == 0 || updates == 0 || updates % self.every != 0 {
            return Ok(false);
        }
        let policy = snapshot();
        let losses = run_episodes(&policy, self.validation, self.env)?;
        let risk = rsqp(&losses)?;
        self.log.push((updates, risk));
        let improved = self.best.as_ref().map_or(true, |(b, _)| risk < *b);
        if improved {
            self.best = Some((risk, policy));
        }
        if (self.stop)(&self.log) {
            self.early_stopped = true;
            return Ok(true);
        }
        Ok(false)
    }

    pub(crate) fn finish(
        self,
        final_policy: TrainedPolicy,
        updates_done: u64,
        diverged: bool,
        skipped_zero_grad: u64,
    ) -> TrainOutcome {
        let wall_clock_s = self.started.elapsed().as_secs_f64();
        let policy = match self.best {
            Some((_, best)) => best,
            None => final_policy,
        };
        TrainOutcome {
            policy,
            trace: TrainingTrace {
                updates_done,
                validation_rsqps: self.log,
                wall_clock_s,
                early_stopped: self.early_stopped,
                diverged,
                skipped_zero_grad,
            },
        }
    }
}

/// On-disk checkpoint: the network document wrapped in an agent-metadata
/// envelope.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub algorithm: Algorithm,
    pub agent_config: AgentConfig,
    /// Environment fingerprint the policy was trained for.
    pub env: EnvConfig,
    pub seed: u64,
    pub update_count: u64,
    pub kind: String,
    pub log_std: Option<f64>,
    pub net: NetCheckpoint,
}

impl PolicyCheckpoint {
    pub fn new(
        policy: &TrainedPolicy,
        algorithm: Algorithm,
        agent_config: &AgentConfig,
        env: &EnvConfig,
        seed: u64,
        update_count: u64,
    ) -> Self {
        let (kind, log_std, net) = match policy {
            TrainedPolicy::GreedyQ { net, dueling, .. } => (
                if *dueling { "greedy_q_dueling" } else { "greedy_q" },
                None,
                net,
            ),
            TrainedPolicy::Deterministic { net } => ("deterministic", None, net),
            TrainedPolicy::Gaussian { net, log_std } => ("gaussian", Some(*log_std), net),
        };
        PolicyCheckpoint {
            algorithm,
            agent_config: *agent_config,
            env: *env,
            seed,
            update_count,
            kind: kind.to_string(),
            log_std,
            net: net.to_checkpoint("adam", update_count),
        }
    }

    pub fn restore(&self) -> Result<TrainedPolicy> {
        let net = Mlp::from_checkpoint(&self.net)?;
        Ok(match self.kind.as_str() {
            "greedy_q" => TrainedPolicy::GreedyQ {
                net,
                grid: ActionGrid::standard(),
                dueling: false,
            },
            "greedy_q_dueling" => TrainedPolicy::GreedyQ {
                net,
                grid: ActionGrid::standard(),
                dueling: true,
            },
            "deterministic" => TrainedPolicy::Deterministic { net },
            "gaussian" => TrainedPolicy::Gaussian {
                net,
                log_std: self.log_std.unwrap_or(0.2f64.ln()),
            },
            other => return Err(Error::Format(format!("unknown policy kind `{other}`"))),
        })
    }
}
