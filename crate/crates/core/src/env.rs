//! The sequential hedging environment.
//!
//! An episode hedges the sale of one European call: the account opens
//! with the premium in cash, rebalances the stock position once per step
//! out of its own cash reserve (self-financing, cash accrues at the
//! per-step risk-free rate), and settles the option at expiry. The only
//! reward arrives at the terminal step as the negative squared positive
//! part of the hedging loss; batches of losses aggregate through the
//! root semi-quadratic penalty (RSQP).

use serde::{Deserialize, Serialize};

use crate::market::{PathSet, PricePath};
use crate::num::Matrix;
use crate::{Error, Result};

/// Static episode configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Strike price of the sold call.
    pub strike: f64,
    /// Number of rebalancing steps until expiry.
    pub horizon: usize,
    /// Years per step.
    pub delta_t: f64,
    /// Per-step risk-free rate; cash accrues by `exp(rate_step)`.
    pub rate_step: f64,
    /// Initial underlying price.
    pub s0: f64,
    /// Option premium received at t = 0; also the initial portfolio value
    /// used to normalize states.
    pub premium: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return Err(Error::Config("strike must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one step".into()));
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::Config("delta_t must be positive".into()));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::Config("initial price must be positive".into()));
        }
        if !(self.premium > 0.0) {
            return Err(Error::Config(
                "premium must be positive (it normalizes V_t)".into(),
            ));
        }
        if !self.rate_step.is_finite() {
            return Err(Error::Config("rate must be finite".into()));
        }
        Ok(())
    }

    /// Cash accrual factor per step.
    pub fn accrual(&self) -> f64 {
        self.rate_step.exp()
    }

    /// Annualized continuously-compounded rate.
    pub fn rate_annual(&self) -> f64 {
        self.rate_step / self.delta_t
    }
}

/// Per-episode ledger: position, cash, and portfolio value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HedgeAccount {
    /// Current step index.
    pub t: usize,
    /// Shares held during `(t-1, t]`.
    pub position: f64,
    /// Cash reserve right before any transaction.
    pub cash: f64,
    /// Portfolio value `S_t * X_t + M_t`.
    pub value: f64,
}

impl HedgeAccount {
    /// Opens the account at t = 0: no stock, the premium in cash.
    pub fn open(config: &EnvConfig) -> Self {
        HedgeAccount {
            t: 0,
            position: 0.0,
            cash: config.premium,
            value: config.premium,
        }
    }

    /// Rebalances to `position_next` at price `spot`, accrues cash, and
    /// marks the portfolio at `spot_next`.
    pub fn step(
        &self,
        position_next: f64,
        spot: f64,
        spot_next: f64,
        config: &EnvConfig,
    ) -> Result<HedgeAccount> {
        if self.t >= config.horizon {
            return Err(Error::Contract(format!(
                "cannot step past the horizon (t = {}, T = {})",
                self.t, config.horizon
            )));
        }
        if !(spot > 0.0) || !(spot_next > 0.0) {
            return Err(Error::Contract("prices must be positive".into()));
        }
        let transaction = spot * (position_next - self.position);
        let cash = (self.cash - transaction) * config.accrual();
        Ok(HedgeAccount {
            t: self.t + 1,
            position: position_next,
            cash,
            value: spot_next * position_next + cash,
        })
    }

    /// Terminal hedging loss `R = -P` with
    /// `P = S_T X_T + M_T - 1{S_T > K} (S_T - K)`. The exercise indicator
    /// is strict: at `S_T == K` the option expires worthless.
    pub fn terminal_loss(&self, spot_final: f64, config: &EnvConfig) -> Result<f64> {
        if self.t != config.horizon {
            return Err(Error::Contract(format!(
                "terminal loss requires t = T = {}, account is at t = {}",
                config.horizon, self.t
            )));
        }
        let exercise = if spot_final > config.strike {
            spot_final - config.strike
        } else {
            0.0
        };
        let profit = spot_final * self.position + self.cash - exercise;
        Ok(-profit)
    }
}

/// Normalized observation `(t/T, S_t/S_0, V_t/V_0)`.
pub fn make_state(t: usize, spot: f64, value: f64, config: &EnvConfig) -> Result<[f64; 3]> {
    if t >= config.horizon {
        return Err(Error::Contract(format!(
            "state only exists for t < T = {}, got {}",
            config.horizon, t
        )));
    }
    if !(spot > 0.0) {
        return Err(Error::Contract("spot must be positive".into()));
    }
    if config.premium == 0.0 {
        return Err(Error::Config("V_0 = 0 cannot normalize values".into()));
    }
    Ok([
        t as f64 / config.horizon as f64,
        spot / config.s0,
        value / config.premium,
    ])
}

/// Terminal reward `r_T = -R^2 1{R > 0}`; gains are never penalized.
/// All earlier rewards are zero by the environment contract.
pub fn reward(loss: f64) -> f64 {
    if loss > 0.0 {
        -loss * loss
    } else {
        0.0
    }
}

/// Root semi-quadratic penalty: `sqrt(mean(R^2 1{R > 0}))`.
pub fn rsqp(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Contract("rsqp of an empty loss vector".into()));
    }
    let mut acc = 0.0;
    for &r in losses {
        if r > 0.0 {
            acc += r * r;
        }
    }
    Ok((acc / losses.len() as f64).sqrt())
}

/// A decision rule mapping the normalized state to the next position.
/// Implementations may override `act_batch` with a vectorized path; the
/// default loops row by row and must stay numerically identical.
pub trait Policy {
    fn act(&self, t: usize, state: [f64; 3]) -> f64;

    /// `states` is `(n, 3)`; returns one position per row.
    fn act_batch(&self, t: usize, states: &Matrix) -> Vec<f64> {
        (0..states.rows())
            .map(|i| {
                let r = states.row(i);
                self.act(t, [r[0], r[1], r[2]])
            })
            .collect()
    }
}

/// Everything an episode produced.
#[derive(Clone, Debug)]
pub struct EpisodeRecord {
    /// `X_1..X_T`.
    pub positions: Vec<f64>,
    /// `M_1..M_T`.
    pub cash: Vec<f64>,
    /// `V_0..V_T`.
    pub values: Vec<f64>,
    /// Terminal loss `R`.
    pub loss: f64,
    /// Terminal reward `-R^2 1{R>0}`.
    pub reward: f64,
    /// How many policy outputs had to be clamped into [0, 1].
    pub clamped: usize,
}

fn clamp_position(x: f64, clamped: &mut usize) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        *clamped += 1;
        x.clamp(0.0, 1.0)
    }
}

/// Runs one full episode of the policy on a path.
pub fn run_episode(
    policy: &dyn Policy,
    path: &PricePath,
    config: &EnvConfig,
) -> Result<EpisodeRecord> {
    config.validate()?;
    if path.horizon() != config.horizon {
        return Err(Error::Contract(format!(
            "path horizon {} does not match environment horizon {}",
            path.horizon(),
            config.horizon
        )));
    }
    let mut account = HedgeAccount::open(config);
    let mut positions = Vec::with_capacity(config.horizon);
    let mut cash = Vec::with_capacity(config.horizon);
    let mut values = Vec::with_capacity(config.horizon + 1);
    values.push(account.value);
    let mut clamped = 0usize;

    for t in 0..config.horizon {
        let spot = path.prices[t];
        let state = make_state(t, spot, account.value, config)?;
        let x = clamp_position(policy.act(t, state), &mut clamped);
        account = account.step(x, spot, path.prices[t + 1], config)?;
        positions.push(account.position);
        cash.push(account.cash);
        values.push(account.value);
    }

    let loss = account.terminal_loss(path.prices[config.horizon], config)?;
    Ok(EpisodeRecord {
        positions,
        cash,
        values,
        loss,
        reward: reward(loss),
        clamped,
    })
}

/// Runs every path of the set in lockstep through `act_batch` and returns
/// the terminal losses, in path order. Arithmetic per path is identical
/// to [`run_episode`].
pub fn run_episodes(policy: &dyn Policy, set: &PathSet, config: &EnvConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if set.horizon != config.horizon {
        return Err(Error::Contract(format!(
            "path-set horizon {} does not match environment horizon {}",
            set.horizon, config.horizon
        )));
    }
    let n = set.len();
    let horizon = config.horizon;
    let accrual = config.accrual();
    let mut position = vec![0.0f64; n];
    let mut cash = vec![config.premium; n];
    let mut value = vec![config.premium; n];
    let mut states = Matrix::zeros(n, 3);

    for t in 0..horizon {
        let t_norm = t as f64 / horizon as f64;
        for i in 0..n {
            let row = states.row_mut(i);
            row[0] = t_norm;
            row[1] = set.paths[i].prices[t] / config.s0;
            row[2] = value[i] / config.premium;
        }
        let actions = policy.act_batch(t, &states);
        let mut sink = 0usize;
        for i in 0..n {
            let x = clamp_position(actions[i], &mut sink);
            let spot = set.paths[i].prices[t];
            let transaction = spot * (x - position[i]);
            cash[i] = (cash[i] - transaction) * accrual;
            position[i] = x;
            value[i] = set.paths[i].prices[t + 1] * x + cash[i];
        }
    }

    let losses = (0..n)
        .map(|i| {
            let spot_final = set.paths[i].prices[horizon];
            let exercise = if spot_final > config.strike {
                spot_final - config.strike
            } else {
                0.0
            };
            -(spot_final * position[i] + cash[i] - exercise)
        })
        .collect();
    Ok(losses)
}

/// CSV trace of an episode: one row per step with columns
/// `t,S_t,X_t,M_t,V_t,R`, the terminal loss only on the last row.
pub fn episode_csv(record: &EpisodeRecord, path: &PricePath, config: &EnvConfig) -> String {
    let mut out = String::from("t,S_t,X_t,M_t,V_t,R\n");
    let horizon = config.horizon;
    for t in 0..=horizon {
        let x = if t == 0 { 0.0 } else { record.positions[t - 1] };
        let m = if t == 0 {
            config.premium
        } else {
            record.cash[t - 1]
        };
        let r = if t == horizon {
            format!("{}", record.loss)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t, path.prices[t], x, m, record.values[t], r
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_paths, GjrGarchParams};
    use proptest::prelude::*;

    fn config() -> EnvConfig {
        EnvConfig {
            strike: 100.0,
            horizon: 12,
            delta_t: 1.0 / 12.0,
            rate_step: 0.0,
            s0: 100.0,
            premium: 5.0,
        }
    }

    struct Constant(f64);
    impl Policy for Constant {
        fn act(&self, _t: usize, _state: [f64; 3]) -> f64 {
            self.0
        }
    }

    #[test]
    fn initial_state() {
        let c = config();
        assert_eq!(make_state(0, 100.0, 5.0, &c).unwrap(), [0.0, 1.0, 1.0]);
    }

    #[test]
    fn state_plug_in() {
        let c = config();
        let s = make_state(6, 110.0, 4.0, &c).unwrap();
        assert_eq!(s, [0.5, 1.1, 0.8]);
    }

    #[test]
    fn state_allows_negative_value() {
        let c = config();
        let s = make_state(3, 100.0, -1.0, &c).unwrap();
        assert_eq!(s[2], -0.2);
    }

    #[test]
    fn first_step_cash_accounting() {
        let c = config();
        let account = HedgeAccount::open(&c);
        assert_eq!(
            (account.position, account.cash, account.value),
            (0.0, 5.0, 5.0)
        );
        let next = account.step(0.5, 100.0, 100.0, &c).unwrap();
        // c_1 = 100 * 0.5 = 50, M_1 = 5 - 50 = -45
        assert_eq!(next.cash, -45.0);
        assert_eq!(next.value, 100.0 * 0.5 - 45.0);
    }

    #[test]
    fn no_trade_keeps_cash() {
        let c = config();
        let account = HedgeAccount {
            t: 3,
            position: 0.4,
            cash: 20.0,
            value: 60.0,
        };
        let next = account.step(0.4, 100.0, 105.0, &c).unwrap();
        assert_eq!(next.cash, 20.0);
        assert_eq!(next.value, 105.0 * 0.4 + 20.0);
    }

    #[test]
    fn cash_accrues() {
        let mut c = config();
        c.rate_step = 1.01f64.ln();
        let account = HedgeAccount {
            t: 1,
            position: 0.0,
            cash: 100.0,
            value: 100.0,
        };
        let next = account.step(0.0, 100.0, 100.0, &c).unwrap();
        assert!((next.cash - 101.0).abs() < 1e-12);
    }

    #[test]
    fn step_beyond_horizon_is_contract_error() {
        let c = config();
        let account = HedgeAccount {
            t: 12,
            position: 0.0,
            cash: 5.0,
            value: 5.0,
        };
        assert!(matches!(
            account.step(0.0, 100.0, 100.0, &c),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn terminal_loss_cases() {
        let c = config();
        // never traded, option expires worthless: keep the premium
        let idle = HedgeAccount {
            t: 12,
            position: 0.0,
            cash: 5.0,
            value: 5.0,
        };
        assert_eq!(idle.terminal_loss(90.0, &c).unwrap(), -5.0);

        // exact offset: P = 55 - 45 - 10 = 0
        let hedged = HedgeAccount {
            t: 12,
            position: 0.5,
            cash: -45.0,
            value: 10.0,
        };
        assert_eq!(hedged.terminal_loss(110.0, &c).unwrap(), 0.0);

        // at the money exactly: no exercise
        assert_eq!(idle.terminal_loss(100.0, &c).unwrap(), -5.0);
    }

    #[test]
    fn reward_cases() {
        assert_eq!(reward(2.0), -4.0);
        assert_eq!(reward(-1.0), 0.0);
        assert_eq!(reward(0.0), 0.0);
    }

    #[test]
    fn rsqp_cases() {
        assert_eq!(rsqp(&[-1.0, -0.5, 0.0]).unwrap(), 0.0);
        assert!((rsqp(&[-1.0, 2.0]).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        assert!(rsqp(&[]).is_err());
    }

    #[test]
    fn rsqp_matches_naive_loop() {
        let mut rng = crate::num::RngStream::new(5, 0);
        let losses: Vec<f64> = (0..10_000).map(|_| rng.range(-3.0, 3.0)).collect();
        let got = rsqp(&losses).unwrap();
        // naive accumulate-then-root re-implementation
        let mut s = 0.0;
        let mut n = 0usize;
        for &r in &losses {
            n += 1;
            if r > 0.0 {
                s += r.powi(2);
            }
        }
        let want = (s / n as f64).sqrt();
        assert!((got - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rsqp_positive_homogeneity(
            losses in proptest::collection::vec(-10.0f64..10.0, 1..50),
            c in 0.1f64..10.0,
        ) {
            let base = rsqp(&losses).unwrap();
            let scaled: Vec<f64> = losses.iter().map(|r| c * r).collect();
            let got = rsqp(&scaled).unwrap();
            prop_assert!((got - c * base).abs() < 1e-10 * (1.0 + c * base));
        }

        #[test]
        fn rsqp_appending_gain_never_raises_numerator(
            losses in proptest::collection::vec(-10.0f64..10.0, 1..50),
            gain in -10.0f64..0.0,
        ) {
            let num_before: f64 = losses.iter().filter(|r| **r > 0.0).map(|r| r * r).sum();
            let mut extended = losses.clone();
            extended.push(gain);
            let num_after: f64 = extended.iter().filter(|r| **r > 0.0).map(|r| r * r).sum();
            prop_assert!(num_after <= num_before + 1e-15);
            // and the full statistic still matches its definition
            let want = (num_after / extended.len() as f64).sqrt();
            prop_assert!((rsqp(&extended).unwrap() - want).abs() < 1e-12);
        }

        #[test]
        fn reward_is_nonpositive_and_decreasing(r1 in 0.0f64..10.0, d in 0.001f64..5.0) {
            prop_assert!(reward(r1) <= 0.0);
            prop_assert!(reward(r1 + d) < reward(r1).min(0.0) + 1e-15);
        }
    }

    #[test]
    fn idle_policy_keeps_premium() {
        let set = simulate_paths(&GjrGarchParams::default(), 4, 12, 100.0, 1.0 / 12.0, 3).unwrap();
        let c = config();
        for path in &set.paths {
            let rec = run_episode(&Constant(0.0), path, &c).unwrap();
            let want = -c.premium
                + if path.prices[12] > c.strike {
                    path.prices[12] - c.strike
                } else {
                    0.0
                };
            assert!((rec.loss - want).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_price_path_is_self_financing() {
        let c = config();
        let prices = vec![100.0; 13];
        let path = PricePath::from_prices(prices);
        let mut rng = crate::num::RngStream::new(1, 0);
        for _ in 0..100 {
            let actions: Vec<f64> = (0..12).map(|_| rng.uniform()).collect();
            struct Seq(Vec<f64>);
            impl Policy for Seq {
                fn act(&self, t: usize, _s: [f64; 3]) -> f64 {
                    self.0[t]
                }
            }
            let rec = run_episode(&Seq(actions), &path, &c).unwrap();
            for v in &rec.values {
                assert!((v - c.premium).abs() < 1e-10);
            }
            // S_0 = K: no exercise, R = -p0 (to accounting tolerance)
            assert!((rec.loss + c.premium).abs() < 1e-10);
        }
    }

    #[test]
    fn accounting_identity_holds_every_step() {
        let set = simulate_paths(&GjrGarchParams::default(), 2, 12, 100.0, 1.0 / 12.0, 9).unwrap();
        let c = config();
        for path in &set.paths {
            let rec = run_episode(&Constant(0.7), path, &c).unwrap();
            for t in 1..=12 {
                let want = path.prices[t] * rec.positions[t - 1] + rec.cash[t - 1];
                assert!((rec.values[t] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn out_of_range_actions_are_clamped_and_counted() {
        let set = simulate_paths(&GjrGarchParams::default(), 1, 12, 100.0, 1.0 / 12.0, 4).unwrap();
        let c = config();
        let rec = run_episode(&Constant(1.7), &set.paths[0], &c).unwrap();
        assert_eq!(rec.clamped, 12);
        assert!(rec.positions.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn batched_episodes_match_single_episodes() {
        let set = simulate_paths(&GjrGarchParams::default(), 16, 12, 100.0, 1.0 / 12.0, 8).unwrap();
        let c = config();
        let batched = run_episodes(&Constant(0.3), &set, &c).unwrap();
        for (i, path) in set.paths.iter().enumerate() {
            let rec = run_episode(&Constant(0.3), path, &c).unwrap();
            assert_eq!(rec.loss, batched[i]);
        }
    }

    #[test]
    fn csv_trace_shape() {
        let set = simulate_paths(&GjrGarchParams::default(), 1, 12, 100.0, 1.0 / 12.0, 2).unwrap();
        let c = config();
        let rec = run_episode(&Constant(0.5), &set.paths[0], &c).unwrap();
        let csv = episode_csv(&rec, &set.paths[0], &c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,S_t,X_t,M_t,V_t,R");
        assert_eq!(lines.len(), 14);
        assert!(!lines[13].split(',').nth(5).unwrap().is_empty());
        assert_eq!(lines[1].split(',').nth(5).unwrap(), "");
    }
}
