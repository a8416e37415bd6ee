//! Pathwise Monte Carlo policy gradient.
//!
//! Each update records a whole batch of hedging episodes on the tape —
//! positions, self-financing accounting, terminal losses — and descends
//! the gradient of the empirical RSQP root. The portfolio value feeds
//! the next state, so the backward pass flows through time across all
//! rebalancing dates.

use super::{
    Monitor, StopRule, TrainInputs, TrainOutcome, TrainedPolicy, STREAM_INIT, STREAM_SAMPLE,
};
use crate::env::EnvConfig;
use crate::market::PricePath;
use crate::num::{Activation, Mlp, Optimizer, OutputHead, RngStream, Tape, TensorId};
use crate::{Error, Result};

/// Records the batch of episodes on the tape and returns the RSQP root
/// node. The network must map 3 inputs to one logistic output.
fn build_objective(
    tape: &mut Tape,
    net: &Mlp,
    bound: &crate::num::BoundParams,
    paths: &[&PricePath],
    env: &EnvConfig,
) -> TensorId {
    let n = paths.len();
    let horizon = env.horizon;
    let accrual = env.accrual();

    let column = |tape: &mut Tape, f: &dyn Fn(&PricePath) -> f64| {
        let col: Vec<f64> = paths.iter().map(|p| f(p)).collect();
        tape.constant_col(&col)
    };

    let mut position = tape.constant_col(&vec![0.0; n]);
    let mut cash = tape.constant_col(&vec![env.premium; n]);
    let mut value = tape.constant_col(&vec![env.premium; n]);

    for t in 0..horizon {
        let t_norm = tape.constant_col(&vec![t as f64 / horizon as f64; n]);
        let spot_norm = column(tape, &|p: &PricePath| p.prices[t] / env.s0);
        let spot = column(tape, &|p: &PricePath| p.prices[t]);
        let spot_next = column(tape, &|p: &PricePath| p.prices[t + 1]);

        let value_norm = tape.scale(value, 1.0 / env.premium);
        let ts = tape.concat_cols(t_norm, spot_norm);
        let state = tape.concat_cols(ts, value_norm);
        let next_position = net.tape_forward(tape, state, bound);

        let traded = tape.sub(next_position, position);
        let transaction = tape.mul(spot, traded);
        let drained = tape.sub(cash, transaction);
        cash = tape.scale(drained, accrual);
        let stock = tape.mul(spot_next, next_position);
        value = tape.add(stock, cash);
        position = next_position;
    }

    let payoff = column(tape, &|p: &PricePath| {
        let s = p.prices[horizon];
        if s > env.strike {
            s - env.strike
        } else {
            0.0
        }
    });
    let profit = tape.sub(value, payoff);
    let loss = tape.neg(profit);
    let downside = tape.relu(loss);
    let sq = tape.mul(downside, downside);
    let mean = tape.mean(sq);
    tape.sqrt(mean)
}

/// Forward-only evaluation of the batch RSQP objective (the quantity
/// [`mcpg_update`] descends).
pub fn mcpg_objective(net: &Mlp, paths: &[&PricePath], env: &EnvConfig) -> Result<f64> {
    validate_batch(net, paths, env)?;
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape);
    let root = build_objective(&mut tape, net, &bound, paths, env);
    Ok(tape.scalar(root))
}

pub struct McpgStep {
    /// Empirical RSQP of the batch before the update.
    pub objective: f64,
    /// True when the whole batch had no downside: the root sits at
    /// sqrt(0), the gradient is zero, and the step is skipped.
    pub skipped: bool,
}

fn validate_batch(net: &Mlp, paths: &[&PricePath], env: &EnvConfig) -> Result<()> {
    env.validate()?;
    if paths.is_empty() {
        return Err(Error::Contract("empty episode batch".into()));
    }
    if net.input_size() != 3 || net.output_size() != 1 {
        return Err(Error::Config("policy network must map 3 inputs to 1 output".into()));
    }
    if net.output_head() != OutputHead::Logistic {
        return Err(Error::Config("policy network needs a logistic head".into()));
    }
    if paths.iter().any(|p| p.horizon() != env.horizon) {
        return Err(Error::Contract("path horizon mismatch".into()));
    }
    Ok(())
}

/// One policy-gradient step on a batch of paths: run the episodes on the
/// tape, differentiate the empirical RSQP, and take one optimizer step.
pub fn mcpg_update(
    net: &mut Mlp,
    optimizer: &mut Optimizer,
    paths: &[&PricePath],
    env: &EnvConfig,
) -> Result<McpgStep> {
    validate_batch(net, paths, env)?;
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape);
    let root = build_objective(&mut tape, net, &bound, paths, env);
    let objective = tape.scalar(root);
    if !objective.is_finite() {
        return Err(Error::Divergence(format!(
            "MCPG objective is {objective}"
        )));
    }
    if objective == 0.0 {
        return Ok(McpgStep {
            objective,
            skipped: true,
        });
    }
    let grads = tape.backward(root)?;
    let mut params = net.flat_params();
    optimizer.step(&mut params, &grads)?;
    net.set_flat_params(&params)?;
    Ok(McpgStep {
        objective,
        skipped: false,
    })
}

pub(crate) fn train_mcpg(inputs: &TrainInputs, stop: StopRule) -> Result<TrainOutcome> {
    let cfg = inputs.config;
    let mut init_rng = RngStream::new(inputs.seed, STREAM_INIT);
    let mut net = Mlp::with_hidden(
        3,
        cfg.hidden_layers,
        cfg.hidden_size,
        1,
        Activation::Relu,
        OutputHead::Logistic,
    )?;
    net.init_fan_in(&mut init_rng);
    let mut optimizer = Optimizer::adam(cfg.learning_rate, net.param_count())?;
    let mut sampler = RngStream::new(inputs.seed, STREAM_SAMPLE);

    let mut monitor = Monitor::new(inputs, stop);
    let snapshot = |net: &Mlp| TrainedPolicy::Deterministic { net: net.clone() };

    let n = inputs.train.len();
    let mut updates = 0u64;
    let mut skipped = 0u64;
    let mut diverged = false;

    while updates < inputs.budget {
        let batch: Vec<&PricePath> = (0..cfg.batch_size)
            .map(|_| &inputs.train.paths[sampler.index(n)])
            .collect();
        match mcpg_update(&mut net, &mut optimizer, &batch, inputs.env) {
            Ok(step) => {
                if step.skipped {
                    skipped += 1;
                }
            }
            Err(Error::Divergence(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        updates += 1;
        if monitor.after_update(updates, &|| snapshot(&net))? {
            break;
        }
    }

    Ok(monitor.finish(snapshot(&net), updates, diverged, skipped))
}
