//! Proximal policy optimization with a clipped surrogate objective.
//!
//! The policy is Gaussian: a logistic-head network gives the mean
//! position, one learned global log-std sets the exploration width.
//! Returns are the terminal reward (gamma = 1, all earlier rewards are
//! zero), the critic regresses on them, and advantages are simply
//! `return - V(s)`. Each collected batch of full episodes is reused for
//! several optimization epochs.

use super::{
    Monitor, StopRule, TrainInputs, TrainOutcome, TrainedPolicy, STREAM_ACTION, STREAM_INIT,
    STREAM_PATHS, STREAM_SAMPLE,
};
use crate::env::reward;
use crate::num::{Activation, Matrix, Mlp, Optimizer, OutputHead, RngStream, Tape};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LOG_STD_MIN: f64 = -4.605_170_185_988_091; // ln 0.01
const LOG_STD_MAX: f64 = 0.0; // ln 1

/// The clipped per-sample surrogate:
/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn ppo_clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

struct Rollout {
    states: Matrix,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
    returns: Vec<f64>,
}

/// Runs `episodes` full episodes in lockstep under the sampling policy.
fn collect(
    net: &Mlp,
    log_std: f64,
    episodes: usize,
    inputs: &TrainInputs,
    path_order: &mut RngStream,
    action_rng: &mut RngStream,
) -> Result<Rollout> {
    let env = inputs.env;
    let horizon = env.horizon;
    let accrual = env.accrual();
    let sigma = log_std.exp();
    let paths: Vec<usize> = (0..episodes)
        .map(|_| path_order.index(inputs.train.len()))
        .collect();

    let mut states = Matrix::zeros(episodes * horizon, 3);
    let mut actions = vec![0.0; episodes * horizon];
    let mut log_probs = vec![0.0; episodes * horizon];

    let mut position = vec![0.0f64; episodes];
    let mut cash = vec![env.premium; episodes];
    let mut value = vec![env.premium; episodes];
    let mut step_states = Matrix::zeros(episodes, 3);

    for t in 0..horizon {
        let t_norm = t as f64 / horizon as f64;
        for e in 0..episodes {
            let path = &inputs.train.paths[paths[e]];
            let row = step_states.row_mut(e);
            row[0] = t_norm;
            row[1] = path.prices[t] / env.s0;
            row[2] = value[e] / env.premium;
        }
        let means = net.forward_batch(&step_states);
        for e in 0..episodes {
            let idx = e * horizon + t;
            let z = action_rng.normal();
            let raw = means.data()[e] + sigma * z;
            states.row_mut(idx).copy_from_slice(step_states.row(e));
            actions[idx] = raw;
            log_probs[idx] = -0.5 * z * z - log_std - 0.5 * LN_2PI;

            let path = &inputs.train.paths[paths[e]];
            let x = raw.clamp(0.0, 1.0);
            let spot = path.prices[t];
            let transaction = spot * (x - position[e]);
            cash[e] = (cash[e] - transaction) * accrual;
            position[e] = x;
            value[e] = path.prices[t + 1] * x + cash[e];
        }
    }

    let mut returns = vec![0.0; episodes * horizon];
    for e in 0..episodes {
        let path = &inputs.train.paths[paths[e]];
        let spot_final = path.prices[horizon];
        let exercise = if spot_final > env.strike {
            spot_final - env.strike
        } else {
            0.0
        };
        let loss = -(spot_final * position[e] + cash[e] - exercise);
        let g = reward(loss);
        for t in 0..horizon {
            returns[e * horizon + t] = g;
        }
    }

    Ok(Rollout {
        states,
        actions,
        log_probs,
        returns,
    })
}

pub(crate) fn train_ppo(inputs: &TrainInputs, stop: StopRule) -> Result<TrainOutcome> {
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
    let mut critic = Mlp::with_hidden(
        3,
        cfg.hidden_layers,
        cfg.hidden_size,
        1,
        Activation::Relu,
        OutputHead::Identity,
    )?;
    critic.init_fan_in(&mut init_rng);
    let mut log_std = 0.2f64.ln();

    // one optimizer over policy net + log-std (bound in that order)
    let mut policy_opt = Optimizer::adam(cfg.learning_rate, net.param_count() + 1)?;
    let mut critic_opt = Optimizer::adam(cfg.beta(), critic.param_count())?;

    let mut path_order = RngStream::new(inputs.seed, STREAM_PATHS);
    let mut action_rng = RngStream::new(inputs.seed, STREAM_ACTION);
    let mut shuffle_rng = RngStream::new(inputs.seed, STREAM_SAMPLE);

    let mut monitor = Monitor::new(inputs, stop);
    let snapshot = |net: &Mlp, log_std: f64| TrainedPolicy::Gaussian {
        net: net.clone(),
        log_std,
    };

    let mut updates = 0u64;
    let mut diverged = false;

    'outer: while updates < inputs.budget {
        let rollout = collect(
            &net,
            log_std,
            cfg.batch_size,
            inputs,
            &mut path_order,
            &mut action_rng,
        )?;
        let n = rollout.actions.len();
        // advantages against the pre-update critic
        let values = critic.forward_batch(&rollout.states);
        let advantages: Vec<f64> = (0..n)
            .map(|i| rollout.returns[i] - values.data()[i])
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.ppo_epochs {
            let _ = epoch;
            // Fisher-Yates reshuffle per epoch
            for i in (1..n).rev() {
                let j = shuffle_rng.index(i + 1);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.batch_size) {
                let b = chunk.len();
                let mut s = Matrix::zeros(b, 3);
                let mut a = Vec::with_capacity(b);
                let mut lp = Vec::with_capacity(b);
                let mut adv = Vec::with_capacity(b);
                let mut ret = Vec::with_capacity(b);
                for (row, &i) in chunk.iter().enumerate() {
                    s.row_mut(row).copy_from_slice(rollout.states.row(i));
                    a.push(rollout.actions[i]);
                    lp.push(rollout.log_probs[i]);
                    adv.push(advantages[i]);
                    ret.push(rollout.returns[i]);
                }

                // policy step
                {
                    let mut tape = Tape::new();
                    let bound = net.bind(&mut tape);
                    let ls = tape.param(Matrix::from_vec(1, 1, vec![log_std]));
                    let s_const = tape.constant(s.clone());
                    let mu = net.tape_forward(&mut tape, s_const, &bound);
                    let ones = tape.constant(Matrix::from_col(&vec![1.0; b]));
                    let sig = tape.exp(ls);
                    let sig_col = tape.matmul(ones, sig);
                    let a_const = tape.constant(Matrix::from_col(&a));
                    let diff = tape.sub(a_const, mu);
                    let z = tape.div(diff, sig_col);
                    let z2 = tape.mul(z, z);
                    let half_z2 = tape.scale(z2, -0.5);
                    let ln_sig = tape.ln(sig_col);
                    let lp_new = tape.sub(half_z2, ln_sig);
                    let lp_new = tape.add_scalar(lp_new, -0.5 * LN_2PI);
                    let lp_old = tape.constant(Matrix::from_col(&lp));
                    let dlp = tape.sub(lp_new, lp_old);
                    let ratio = tape.exp(dlp);
                    let adv_const = tape.constant(Matrix::from_col(&adv));
                    let raw = tape.mul(ratio, adv_const);
                    let clipped = tape.clip(ratio, 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip);
                    let clipped_obj = tape.mul(clipped, adv_const);
                    let obj = tape.min(raw, clipped_obj);
                    let mean_obj = tape.mean(obj);
                    let loss = tape.neg(mean_obj);
                    if !tape.scalar(loss).is_finite() {
                        diverged = true;
                        break 'outer;
                    }
                    let grads = tape.backward(loss)?;
                    let mut params = net.flat_params();
                    params.push(log_std);
                    match policy_opt.step(&mut params, &grads) {
                        Ok(()) => {}
                        Err(Error::Divergence(_)) => {
                            diverged = true;
                            break 'outer;
                        }
                        Err(e) => return Err(e),
                    }
                    log_std = params.pop().unwrap().clamp(LOG_STD_MIN, LOG_STD_MAX);
                    net.set_flat_params(&params)?;
                }

                // critic step on the same mini-batch
                {
                    let mut tape = Tape::new();
                    let bound = critic.bind(&mut tape);
                    let s_const = tape.constant(s.clone());
                    let v = critic.tape_forward(&mut tape, s_const, &bound);
                    let ret_const = tape.constant(Matrix::from_col(&ret));
                    let diff = tape.sub(v, ret_const);
                    let sq = tape.mul(diff, diff);
                    let loss = tape.mean(sq);
                    if !tape.scalar(loss).is_finite() {
                        diverged = true;
                        break 'outer;
                    }
                    let grads = tape.backward(loss)?;
                    let mut params = critic.flat_params();
                    match critic_opt.step(&mut params, &grads) {
                        Ok(()) => {}
                        Err(Error::Divergence(_)) => {
                            diverged = true;
                            break 'outer;
                        }
                        Err(e) => return Err(e),
                    }
                    critic.set_flat_params(&params)?;
                }

                updates += 1;
                if monitor.after_update(updates, &|| snapshot(&net, log_std))? {
                    break 'outer;
                }
                if updates >= inputs.budget {
                    break 'outer;
                }
            }
        }
    }

    Ok(monitor.finish(snapshot(&net, log_std), updates, diverged, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_objective_table() {
        // ratio 1: no-op
        assert_eq!(ppo_clip_objective(1.0, 3.5, 0.2), 3.5);
        // upper clip
        assert!((ppo_clip_objective(2.0, 1.0, 0.2) - 1.2).abs() < 1e-15);
        // pessimistic min with the lower clip
        assert!((ppo_clip_objective(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-15);
    }

    #[test]
    fn clip_objective_never_exceeds_unclipped_for_positive_adv() {
        for i in 0..50 {
            let ratio = 0.1 + 0.05 * i as f64;
            let clipped = ppo_clip_objective(ratio, 2.0, 0.2);
            assert!(clipped <= ratio * 2.0 + 1e-15);
        }
    }
}
