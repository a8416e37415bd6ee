//! Black-Scholes utilities: the standard normal CDF, call pricing (used
//! to set the premium), and the delta-hedge baseline policy
//! `X_{t+1} = Phi(d_1)`.

use crate::env::{run_episodes, EnvConfig, Policy};
use crate::market::{GjrGarchParams, PathSet};
use crate::num::special;
use crate::num::Matrix;
use crate::{Error, Result};

/// Standard normal CDF, absolute error well below 1e-10 (see
/// [`crate::num::special`] for the series/continued-fraction split).
pub fn std_normal_cdf(x: f64) -> f64 {
    special::norm_cdf(x)
}

/// Inputs for a European call quote.
#[derive(Clone, Copy, Debug)]
pub struct BsInputs {
    pub spot: f64,
    pub strike: f64,
    /// Annualized volatility, strictly positive.
    pub sigma_ann: f64,
    /// Time to expiry in years, non-negative.
    pub tau: f64,
    /// Annualized continuously-compounded risk-free rate.
    pub rate_ann: f64,
}

impl BsInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !(self.strike > 0.0) {
            return Err(Error::Config("spot and strike must be positive".into()));
        }
        if !(self.sigma_ann > 0.0) {
            return Err(Error::Config("volatility must be positive".into()));
        }
        if self.tau < 0.0 {
            return Err(Error::Config("time to expiry cannot be negative".into()));
        }
        Ok(())
    }
}

/// European call price `S Phi(d1) - K e^{-r tau} Phi(d2)`; at `tau = 0`
/// the intrinsic value `max(S - K, 0)`.
pub fn bs_call_price(inputs: &BsInputs) -> Result<f64> {
    inputs.validate()?;
    let BsInputs {
        spot,
        strike,
        sigma_ann,
        tau,
        rate_ann,
    } = *inputs;
    if tau == 0.0 {
        return Ok((spot - strike).max(0.0));
    }
    let sig_sqrt = sigma_ann * tau.sqrt();
    let d1 = ((spot / strike).ln() + (rate_ann + 0.5 * sigma_ann * sigma_ann) * tau) / sig_sqrt;
    let d2 = d1 - sig_sqrt;
    Ok(spot * std_normal_cdf(d1) - strike * (-rate_ann * tau).exp() * std_normal_cdf(d2))
}

/// The delta-hedge position for the next period,
/// `X_{t+1} = Phi(d_1)` with
/// `d_1 = [ln(S_t/K) + (r + sigma^2/2) (T-t) dt] / sqrt(sigma^2 (T-t) dt)`.
///
/// `rate_step` is the per-step rate the environment accrues with; it is
/// converted to its annualized equivalent `rate_step / delta_t` here.
pub fn delta_hedge_position(
    spot: f64,
    strike: f64,
    sigma_ann: f64,
    t: usize,
    horizon: usize,
    delta_t: f64,
    rate_step: f64,
) -> Result<f64> {
    if t >= horizon {
        return Err(Error::Contract(format!(
            "no rebalancing at or past expiry (t = {t}, T = {horizon})"
        )));
    }
    if !(sigma_ann > 0.0) {
        return Err(Error::Config("volatility must be positive".into()));
    }
    if !(spot > 0.0) || !(strike > 0.0) {
        return Err(Error::Config("prices must be positive".into()));
    }
    let tau = (horizon - t) as f64 * delta_t;
    let rate_ann = rate_step / delta_t;
    let d1 = ((spot / strike).ln() + (rate_ann + 0.5 * sigma_ann * sigma_ann) * tau)
        / (sigma_ann * tau.sqrt());
    Ok(std_normal_cdf(d1))
}

/// The Black-Scholes delta-hedge baseline as a [`Policy`].
#[derive(Clone, Debug)]
pub struct DeltaHedgePolicy {
    config: EnvConfig,
    sigma_ann: f64,
}

impl DeltaHedgePolicy {
    pub fn new(config: EnvConfig, sigma_ann: f64) -> Result<Self> {
        config.validate()?;
        if !(sigma_ann > 0.0) {
            return Err(Error::Config("volatility must be positive".into()));
        }
        Ok(DeltaHedgePolicy { config, sigma_ann })
    }

    /// Volatility defaulted to the annualized stationary volatility of
    /// the market model.
    pub fn from_params(config: EnvConfig, params: &GjrGarchParams) -> Result<Self> {
        let sigma = params.annualized_vol(config.delta_t)?;
        DeltaHedgePolicy::new(config, sigma)
    }

    pub fn sigma_ann(&self) -> f64 {
        self.sigma_ann
    }
}

impl Policy for DeltaHedgePolicy {
    fn act(&self, t: usize, state: [f64; 3]) -> f64 {
        let spot = state[1] * self.config.s0;
        delta_hedge_position(
            spot,
            self.config.strike,
            self.sigma_ann,
            t,
            self.config.horizon,
            self.config.delta_t,
            self.config.rate_step,
        )
        .expect("delta-hedge inside episode bounds")
    }

    fn act_batch(&self, t: usize, states: &Matrix) -> Vec<f64> {
        (0..states.rows())
            .map(|i| {
                let r = states.row(i);
                self.act(t, [r[0], r[1], r[2]])
            })
            .collect()
    }
}

/// Default at-the-money environment: `S_0 = K = 100`, monthly steps over
/// one year, zero rate, premium set to the Black-Scholes quote at the
/// model's stationary volatility — the one internally consistent premium
/// the engine can produce. Override the field for custom pricing.
pub fn default_env_config(params: &GjrGarchParams) -> Result<EnvConfig> {
    let horizon = 12usize;
    let delta_t = 1.0 / 12.0;
    let sigma = params.annualized_vol(delta_t)?;
    let premium = bs_call_price(&BsInputs {
        spot: 100.0,
        strike: 100.0,
        sigma_ann: sigma,
        tau: horizon as f64 * delta_t,
        rate_ann: 0.0,
    })?;
    Ok(EnvConfig {
        strike: 100.0,
        horizon,
        delta_t,
        rate_step: 0.0,
        s0: 100.0,
        premium,
    })
}

/// Delta-hedges every path of the set; returns the terminal losses.
/// `sigma_ann = None` uses the annualized stationary volatility of the
/// set's own parameters.
pub fn run_delta_hedge(
    set: &PathSet,
    config: &EnvConfig,
    sigma_ann: Option<f64>,
) -> Result<Vec<f64>> {
    let sigma = match sigma_ann {
        Some(s) => s,
        None => set.params.annualized_vol(set.delta_t)?,
    };
    let policy = DeltaHedgePolicy::new(*config, sigma)?;
    run_episodes(&policy, set, config)
}
