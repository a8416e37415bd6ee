//! Deep Q-learning and its double / dueling / double-dueling variants.
//!
//! All four share one trainer: epsilon-greedy rollouts over the action
//! grid feed a replay buffer; each environment step performs one
//! mini-batch gradient update of the online network against a softly
//! updated target network. The dueling variants widen the output layer
//! by one: column 0 is the state value, columns 1.. are advantages, and
//! Q is assembled with mean-subtracted aggregation.

use super::{
    ActionGrid, Monitor, ReplayBuffer, StopRule, TrainInputs, TrainOutcome, TrainedPolicy,
    Transition, STREAM_EXPLORE, STREAM_INIT, STREAM_PATHS, STREAM_SAMPLE,
};
use crate::env::{reward, HedgeAccount};
use crate::num::{Activation, Matrix, Mlp, Optimizer, OutputHead, RngStream, Tape};
use crate::{Error, Result};

/// `y = r + (1 - done) * gamma * max_a Q_target(s', a)`.
pub fn dql_target(reward: f64, done: bool, gamma: f64, next_q: &[f64]) -> f64 {
    if done {
        return reward;
    }
    let max = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * max
}

/// Double DQL: the online network picks the action, the target network
/// evaluates it.
pub fn double_dql_target(
    reward: f64,
    done: bool,
    gamma: f64,
    online_next: &[f64],
    target_next: &[f64],
) -> f64 {
    if done {
        return reward;
    }
    let mut best = 0usize;
    for (i, &v) in online_next.iter().enumerate() {
        if v > online_next[best] {
            best = i;
        }
    }
    reward + gamma * target_next[best]
}

/// Mean-subtracted dueling aggregation: `Q_a = V + A_a - mean(A)`.
pub fn dueling_aggregate(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| value + a - mean).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum DqlVariant {
    Vanilla,
    Double,
    Dueling,
    DoubleDueling,
}

impl DqlVariant {
    fn dueling(self) -> bool {
        matches!(self, DqlVariant::Dueling | DqlVariant::DoubleDueling)
    }

    fn double(self) -> bool {
        matches!(self, DqlVariant::Double | DqlVariant::DoubleDueling)
    }
}

fn epsilon(cfg: &super::AgentConfig, updates: u64, budget: u64) -> f64 {
    if budget == 0 {
        return cfg.epsilon_end;
    }
    let horizon = (cfg.epsilon_decay_fraction * budget as f64).max(1.0);
    let frac = (updates as f64 / horizon).min(1.0);
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

fn q_values(net: &Mlp, state: &[f64; 3], dueling: bool) -> Vec<f64> {
    let out = net.forward(state).expect("state width 3");
    if dueling {
        dueling_aggregate(out[0], &out[1..])
    } else {
        out
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn train_dql(
    inputs: &TrainInputs,
    stop: StopRule,
    variant: DqlVariant,
) -> Result<TrainOutcome> {
    let cfg = inputs.config;
    let env = inputs.env;
    let grid = ActionGrid::standard();
    let out_dim = if variant.dueling() {
        grid.len() + 1
    } else {
        grid.len()
    };

    let mut init_rng = RngStream::new(inputs.seed, STREAM_INIT);
    let mut online = Mlp::with_hidden(
        3,
        cfg.hidden_layers,
        cfg.hidden_size,
        out_dim,
        Activation::Relu,
        OutputHead::Identity,
    )?;
    online.init_fan_in(&mut init_rng);
    let mut target = online.clone();
    let mut optimizer = Optimizer::adam(cfg.learning_rate, online.param_count())?;

    let mut explore = RngStream::new(inputs.seed, STREAM_EXPLORE);
    let mut sampler = RngStream::new(inputs.seed, STREAM_SAMPLE);
    let mut path_order = RngStream::new(inputs.seed, STREAM_PATHS);
    let mut buffer: ReplayBuffer<usize> = ReplayBuffer::new(cfg.replay_capacity);

    let mut monitor = Monitor::new(inputs, stop);
    let snapshot = |net: &Mlp| TrainedPolicy::GreedyQ {
        net: net.clone(),
        grid: ActionGrid::standard(),
        dueling: variant.dueling(),
    };

    let horizon = env.horizon;
    let min_fill = cfg.learning_starts.max(cfg.batch_size);
    let mut updates = 0u64;
    let mut diverged = false;
    let mut path_idx = path_order.index(inputs.train.len());
    let mut account = HedgeAccount::open(env);

    'outer: while updates < inputs.budget {
        let path = &inputs.train.paths[path_idx];
        let t = account.t;
        let spot = path.prices[t];
        let state = [
            t as f64 / horizon as f64,
            spot / env.s0,
            account.value / env.premium,
        ];
        let eps = epsilon(cfg, updates, inputs.budget);
        let action_idx = if explore.uniform() < eps {
            explore.index(grid.len())
        } else {
            argmax(&q_values(&online, &state, variant.dueling()))
        };
        account = account.step(grid.value(action_idx), spot, path.prices[t + 1], env)?;
        let done = account.t == horizon;
        let step_reward = if done {
            reward(account.terminal_loss(path.prices[horizon], env)?)
        } else {
            0.0
        };
        let next_state = [
            account.t as f64 / horizon as f64,
            path.prices[account.t] / env.s0,
            account.value / env.premium,
        ];
        buffer.push(Transition {
            state,
            action: action_idx,
            reward: step_reward,
            next_state,
            done,
        });
        if done {
            path_idx = path_order.index(inputs.train.len());
            account = HedgeAccount::open(env);
        }

        if buffer.len() < min_fill {
            continue;
        }

        // one gradient update per environment step
        let batch = buffer.sample(&mut sampler, cfg.batch_size);
        let b = batch.len();
        let mut states = Matrix::zeros(b, 3);
        let mut next_states = Matrix::zeros(b, 3);
        let mut actions = Vec::with_capacity(b);
        for (i, tr) in batch.iter().enumerate() {
            states.row_mut(i).copy_from_slice(&tr.state);
            next_states.row_mut(i).copy_from_slice(&tr.next_state);
            actions.push(tr.action);
        }
        let target_next = target.forward_batch(&next_states);
        let online_next = if variant.double() {
            Some(online.forward_batch(&next_states))
        } else {
            None
        };
        let mut y = Vec::with_capacity(b);
        for (i, tr) in batch.iter().enumerate() {
            let t_row = target_next.row(i);
            let t_q = if variant.dueling() {
                dueling_aggregate(t_row[0], &t_row[1..])
            } else {
                t_row.to_vec()
            };
            let value = match &online_next {
                Some(on) => {
                    let o_row = on.row(i);
                    let o_q = if variant.dueling() {
                        dueling_aggregate(o_row[0], &o_row[1..])
                    } else {
                        o_row.to_vec()
                    };
                    double_dql_target(tr.reward, tr.done, cfg.gamma, &o_q, &t_q)
                }
                None => dql_target(tr.reward, tr.done, cfg.gamma, &t_q),
            };
            y.push(value);
        }

        let mut tape = Tape::new();
        let bound = online.bind(&mut tape);
        let x = tape.constant(states);
        let out = online.tape_forward(&mut tape, x, &bound);
        let q_sel = if variant.dueling() {
            let v = tape.slice_cols(out, 0, 1);
            let a = tape.slice_cols(out, 1, grid.len());
            let rm = tape.row_mean(a);
            let centered = tape.sub_col(a, rm);
            let q = tape.add_col(centered, v);
            tape.gather(q, actions)
        } else {
            tape.gather(out, actions)
        };
        let y_const = tape.constant(Matrix::from_col(&y));
        let diff = tape.sub(q_sel, y_const);
        let sq = tape.mul(diff, diff);
        let loss = tape.mean(sq);
        if !tape.scalar(loss).is_finite() {
            diverged = true;
            break 'outer;
        }
        let grads = tape.backward(loss)?;
        let mut params = online.flat_params();
        match optimizer.step(&mut params, &grads) {
            Ok(()) => {}
            Err(Error::Divergence(_)) => {
                diverged = true;
                break 'outer;
            }
            Err(e) => return Err(e),
        }
        online.set_flat_params(&params)?;
        target.soft_update_from(&online, cfg.soft_update_rate);
        updates += 1;

        if monitor.after_update(updates, &|| snapshot(&online))? {
            break 'outer;
        }
    }

    Ok(monitor.finish(snapshot(&online), updates, diverged, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::RngStream;

    #[test]
    fn dql_target_table() {
        assert_eq!(dql_target(-4.0, true, 1.0, &[100.0, 200.0]), -4.0);
        assert_eq!(dql_target(0.0, false, 1.0, &[5.0, 2.0]), 5.0);
        assert_eq!(dql_target(1.0, false, 0.5, &[2.0, 4.0]), 3.0);
    }

    #[test]
    fn dql_target_matches_scalar_loop() {
        let mut rng = RngStream::new(2, 0);
        for _ in 0..200 {
            let q: Vec<f64> = (0..51).map(|_| rng.range(-5.0, 5.0)).collect();
            let r = rng.range(-4.0, 0.0);
            let got = dql_target(r, false, 1.0, &q);
            let mut max = f64::NEG_INFINITY;
            for &v in &q {
                if v > max {
                    max = v;
                }
            }
            assert!((got - (r + max)).abs() < 1e-12);
        }
    }

    #[test]
    fn double_dql_target_table() {
        // online picks index 1, target evaluates it
        assert_eq!(
            double_dql_target(0.0, false, 1.0, &[1.0, 3.0], &[5.0, 2.0]),
            2.0
        );
        assert_eq!(
            double_dql_target(-7.0, true, 1.0, &[1.0, 3.0], &[5.0, 2.0]),
            -7.0
        );
    }

    #[test]
    fn double_target_with_shared_net_equals_plain_target() {
        let mut rng = RngStream::new(4, 1);
        for _ in 0..200 {
            let q: Vec<f64> = (0..51).map(|_| rng.range(-5.0, 5.0)).collect();
            let r = rng.range(-4.0, 0.0);
            let a = dql_target(r, false, 1.0, &q);
            let b = double_dql_target(r, false, 1.0, &q, &q);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dueling_aggregate_table() {
        assert_eq!(dueling_aggregate(1.0, &[0.0; 51]), vec![1.0; 51]);
        let q = dueling_aggregate(0.0, &[1.0, 2.0, 3.0]);
        assert_eq!(q, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn dueling_argmax_is_shift_invariant() {
        let mut rng = RngStream::new(6, 2);
        for _ in 0..100 {
            let v = rng.range(-10.0, 10.0);
            let a: Vec<f64> = (0..51).map(|_| rng.range(-5.0, 5.0)).collect();
            let q = dueling_aggregate(v, &a);
            assert_eq!(argmax(&q), argmax(&a));
        }
    }
}
