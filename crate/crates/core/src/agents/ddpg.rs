//! Deep deterministic policy gradient and its twin-delayed variant.
//!
//! One trainer covers both. DDPG keeps a single critic and updates actor
//! and targets every step; TD3 adds a second critic, target policy
//! smoothing, and delays actor/target updates by `td3_policy_delay`
//! critic rounds, bootstrapping from the smaller of the two target
//! critics.

use super::{
    Monitor, ReplayBuffer, StopRule, TrainInputs, TrainOutcome, TrainedPolicy, Transition,
    STREAM_EXPLORE, STREAM_INIT, STREAM_PATHS, STREAM_SAMPLE,
};
use crate::env::{reward, HedgeAccount};
use crate::num::{Activation, Matrix, Mlp, Optimizer, OutputHead, RngStream, Tape};
use crate::{Error, Result};

/// Twin-critic bootstrap target:
/// `a' = clamp(actor'(s') + clip(noise), 0, 1)`,
/// `y = r + (1 - done) * gamma * min(Q1'(s', a'), Q2'(s', a'))`.
///
/// `noise` is a raw sample; it is clipped to `[-noise_clip, noise_clip]`
/// here. With zero noise and identical critics this reduces to the DDPG
/// target.
#[allow(clippy::too_many_arguments)]
pub fn td3_target(
    reward: f64,
    done: bool,
    next_state: [f64; 3],
    target_actor: &Mlp,
    target_q1: &Mlp,
    target_q2: &Mlp,
    gamma: f64,
    noise: f64,
    noise_clip: f64,
) -> f64 {
    if done {
        return reward;
    }
    let a = target_actor.forward(&next_state).expect("state width 3")[0];
    let a = (a + noise.clamp(-noise_clip, noise_clip)).clamp(0.0, 1.0);
    let sa = [next_state[0], next_state[1], next_state[2], a];
    let q1 = target_q1.forward(&sa).expect("critic width 4")[0];
    let q2 = target_q2.forward(&sa).expect("critic width 4")[0];
    reward + gamma * q1.min(q2)
}

pub(crate) fn train_ddpg(inputs: &TrainInputs, stop: StopRule, twin: bool) -> Result<TrainOutcome> {
    let cfg = inputs.config;
    let env = inputs.env;

    let mut init_rng = RngStream::new(inputs.seed, STREAM_INIT);
    let mut actor = Mlp::with_hidden(
        3,
        cfg.hidden_layers,
        cfg.hidden_size,
        1,
        Activation::Relu,
        OutputHead::Logistic,
    )?;
    actor.init_fan_in(&mut init_rng);
    let new_critic = |rng: &mut RngStream| -> Result<Mlp> {
        let mut critic = Mlp::with_hidden(
            4,
            cfg.hidden_layers,
            cfg.hidden_size,
            1,
            Activation::Relu,
            OutputHead::Identity,
        )?;
        critic.init_fan_in(rng);
        Ok(critic)
    };
    let mut q1 = new_critic(&mut init_rng)?;
    let mut q2 = if twin {
        Some(new_critic(&mut init_rng)?)
    } else {
        None
    };
    let mut actor_target = actor.clone();
    let mut q1_target = q1.clone();
    let mut q2_target = q2.clone();

    let mut actor_opt = Optimizer::adam(cfg.learning_rate, actor.param_count())?;
    let mut q1_opt = Optimizer::adam(cfg.beta(), q1.param_count())?;
    let mut q2_opt = match &q2 {
        Some(net) => Some(Optimizer::adam(cfg.beta(), net.param_count())?),
        None => None,
    };

    let mut explore = RngStream::new(inputs.seed, STREAM_EXPLORE);
    let mut sampler = RngStream::new(inputs.seed, STREAM_SAMPLE);
    let mut path_order = RngStream::new(inputs.seed, STREAM_PATHS);
    let mut buffer: ReplayBuffer<f64> = ReplayBuffer::new(cfg.replay_capacity);

    let mut monitor = Monitor::new(inputs, stop);
    let snapshot = |actor: &Mlp| TrainedPolicy::Deterministic { net: actor.clone() };

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
        let greedy = actor.forward(&state)?[0];
        let action = (greedy + cfg.explore_noise * explore.normal()).clamp(0.0, 1.0);
        account = account.step(action, spot, path.prices[t + 1], env)?;
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
            action,
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

        let batch = buffer.sample(&mut sampler, cfg.batch_size);
        let b = batch.len();
        let mut states = Matrix::zeros(b, 3);
        let mut actions = Vec::with_capacity(b);
        let mut y = Vec::with_capacity(b);
        for (i, tr) in batch.iter().enumerate() {
            states.row_mut(i).copy_from_slice(&tr.state);
            actions.push(tr.action);
            let noise = if twin {
                cfg.td3_target_noise * explore.normal()
            } else {
                0.0
            };
            let q2t = q2_target.as_ref().unwrap_or(&q1_target);
            y.push(td3_target(
                tr.reward,
                tr.done,
                tr.next_state,
                &actor_target,
                &q1_target,
                q2t,
                cfg.gamma,
                noise,
                if twin { cfg.td3_noise_clip } else { 0.0 },
            ));
        }

        // critic regression toward the bootstrap target
        let critic_step = |critic: &mut Mlp, opt: &mut Optimizer| -> Result<bool> {
            let mut tape = Tape::new();
            let bound = critic.bind(&mut tape);
            let s = tape.constant(states.clone());
            let a = tape.constant(Matrix::from_col(&actions));
            let sa = tape.concat_cols(s, a);
            let q = critic.tape_forward(&mut tape, sa, &bound);
            let y_const = tape.constant(Matrix::from_col(&y));
            let diff = tape.sub(q, y_const);
            let sq = tape.mul(diff, diff);
            let loss = tape.mean(sq);
            if !tape.scalar(loss).is_finite() {
                return Ok(false);
            }
            let grads = tape.backward(loss)?;
            let mut params = critic.flat_params();
            match opt.step(&mut params, &grads) {
                Ok(()) => {}
                Err(Error::Divergence(_)) => return Ok(false),
                Err(e) => return Err(e),
            }
            critic.set_flat_params(&params)?;
            Ok(true)
        };
        if !critic_step(&mut q1, &mut q1_opt)? {
            diverged = true;
            break 'outer;
        }
        if let (Some(net), Some(opt)) = (q2.as_mut(), q2_opt.as_mut()) {
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let s = tape.constant(states.clone());
            let a = tape.constant(Matrix::from_col(&actions));
            let sa = tape.concat_cols(s, a);
            let q = net.tape_forward(&mut tape, sa, &bound);
            let y_const = tape.constant(Matrix::from_col(&y));
            let diff = tape.sub(q, y_const);
            let sq = tape.mul(diff, diff);
            let loss = tape.mean(sq);
            if !tape.scalar(loss).is_finite() {
                diverged = true;
                break 'outer;
            }
            let grads = tape.backward(loss)?;
            let mut params = net.flat_params();
            match opt.step(&mut params, &grads) {
                Ok(()) => {}
                Err(Error::Divergence(_)) => {
                    diverged = true;
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            net.set_flat_params(&params)?;
        }
        updates += 1;

        // actor ascent on Q1 (frozen critic), delayed for TD3
        let delayed = !twin || updates % cfg.td3_policy_delay as u64 == 0;
        if delayed {
            let mut tape = Tape::new();
            let bound_actor = actor.bind(&mut tape);
            let bound_critic = q1.bind_frozen(&mut tape);
            let s = tape.constant(states.clone());
            let a = actor.tape_forward(&mut tape, s, &bound_actor);
            let sa = tape.concat_cols(s, a);
            let q = q1.tape_forward(&mut tape, sa, &bound_critic);
            let mq = tape.mean(q);
            let loss = tape.neg(mq);
            if !tape.scalar(loss).is_finite() {
                diverged = true;
                break 'outer;
            }
            let grads = tape.backward(loss)?;
            let mut params = actor.flat_params();
            match actor_opt.step(&mut params, &grads) {
                Ok(()) => {}
                Err(Error::Divergence(_)) => {
                    diverged = true;
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            actor.set_flat_params(&params)?;

            actor_target.soft_update_from(&actor, cfg.soft_update_rate);
            q1_target.soft_update_from(&q1, cfg.soft_update_rate);
            if let (Some(net), Some(tgt)) = (q2.as_ref(), q2_target.as_mut()) {
                tgt.soft_update_from(net, cfg.soft_update_rate);
            }
        }

        if monitor.after_update(updates, &|| snapshot(&actor))? {
            break 'outer;
        }
    }

    Ok(monitor.finish(snapshot(&actor), updates, diverged, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::STREAM_INIT;

    fn nets(seed: u64) -> (Mlp, Mlp, Mlp) {
        let mut rng = RngStream::new(seed, STREAM_INIT);
        let mut actor =
            Mlp::with_hidden(3, 2, 8, 1, Activation::Relu, OutputHead::Logistic).unwrap();
        actor.init_fan_in(&mut rng);
        let mut q1 = Mlp::with_hidden(4, 2, 8, 1, Activation::Relu, OutputHead::Identity).unwrap();
        q1.init_fan_in(&mut rng);
        let mut q2 = Mlp::with_hidden(4, 2, 8, 1, Activation::Relu, OutputHead::Identity).unwrap();
        q2.init_fan_in(&mut rng);
        (actor, q1, q2)
    }

    #[test]
    fn min_of_twin_critics() {
        // constant critics via zero nets with bias trick: use tiny nets
        // and check the min through hand-built constants instead
        let (_actor, _q1, _q2) = nets(1);
        // direct arithmetic table for the terminal/min rules:
        // q1' = 3, q2' = 5 -> y = 3 (handled below through real nets)
        let zero_actor = Mlp::new(&[3, 1], Activation::Relu, OutputHead::Logistic).unwrap();
        let mut c1 = Mlp::new(&[4, 1], Activation::Relu, OutputHead::Identity).unwrap();
        let mut c2 = Mlp::new(&[4, 1], Activation::Relu, OutputHead::Identity).unwrap();
        // bias-only critics: constant outputs 3 and 5
        let mut p1 = c1.flat_params();
        *p1.last_mut().unwrap() = 3.0;
        c1.set_flat_params(&p1).unwrap();
        let mut p2 = c2.flat_params();
        *p2.last_mut().unwrap() = 5.0;
        c2.set_flat_params(&p2).unwrap();
        let y = td3_target(0.0, false, [0.5, 1.0, 1.0], &zero_actor, &c1, &c2, 1.0, 0.0, 0.25);
        assert_eq!(y, 3.0);
    }

    #[test]
    fn terminal_transition_ignores_networks() {
        let (actor, q1, q2) = nets(2);
        let y = td3_target(-7.5, true, [1.0, 1.2, 0.4], &actor, &q1, &q2, 1.0, 0.3, 0.25);
        assert_eq!(y, -7.5);
    }

    #[test]
    fn zero_noise_identical_critics_is_ddpg_target() {
        let (actor, q1, _) = nets(3);
        let s = [0.25, 1.05, 0.9];
        let y = td3_target(0.0, false, s, &actor, &q1, &q1, 1.0, 0.0, 0.25);
        // DDPG target computed directly
        let a = actor.forward(&s).unwrap()[0];
        let q = q1.forward(&[s[0], s[1], s[2], a]).unwrap()[0];
        assert_eq!(y, q);
    }

    #[test]
    fn noise_is_clipped_before_the_action_clamp() {
        let (actor, q1, q2) = nets(4);
        let s = [0.25, 1.05, 0.9];
        let a = actor.forward(&s).unwrap()[0];
        let huge = td3_target(0.0, false, s, &actor, &q1, &q2, 1.0, 50.0, 0.25);
        let manual_a = (a + 0.25).clamp(0.0, 1.0);
        let sa = [s[0], s[1], s[2], manual_a];
        let want = q1.forward(&sa).unwrap()[0].min(q2.forward(&sa).unwrap()[0]);
        assert_eq!(huge, want);
    }
}
