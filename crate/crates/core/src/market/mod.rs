//! GJR-GARCH(1,1) market model: simulation, likelihood, calibration, and
//! path-set persistence.
//!
//! Log-returns follow
//!
//! ```text
//! Y_t     = mu + eps_t,            eps_t = sigma_t z_t,  z_t ~ N(0,1)
//! sigma^2_t = nu0 + (nu + lambda * I_{t-1}) eps^2_{t-1} + xi * sigma^2_{t-1}
//! I_{t-1} = 1  iff  Y_{t-1} < mu   (strict; a tie counts as 0)
//! ```
//!
//! and prices compound as `S_t = S_{t-1} exp(Y_t)`. The first conditional
//! variance is initialized at the stationary variance
//! `nu0 / (1 - nu - xi - lambda/2)` so simulated paths carry no burn-in
//! bias; when the parameters are non-stationary the recursion falls back
//! to `nu0` and simulation proceeds (callers may warn, it is not an
//! error).

mod calibrate;
mod pathset;
mod series;

pub use calibrate::{calibrate_mle, negative_log_likelihood, Calibration};
pub use pathset::{PathSet, PricePath};
pub use series::{read_return_series, returns_from_prices};

use serde::{Deserialize, Serialize};

use crate::num::RngStream;
use crate::{Error, Result};

/// Five-parameter GJR-GARCH(1,1) volatility model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GjrGarchParams {
    /// Per-step mean log-return.
    pub mu: f64,
    /// Variance intercept, strictly positive.
    pub nu0: f64,
    /// ARCH coefficient, non-negative.
    pub nu: f64,
    /// Leverage coefficient; `nu + lambda` must stay non-negative.
    pub lambda: f64,
    /// GARCH coefficient, non-negative.
    pub xi: f64,
}

impl Default for GjrGarchParams {
    /// Maximum-likelihood estimates from monthly S&P 500 prices
    /// (2000-11-15 to 2024-10-15), shipped as the default market model.
    fn default() -> Self {
        GjrGarchParams {
            mu: 0.00533410,
            nu0: 0.00018216,
            nu: 0.00026564,
            lambda: 0.34275732,
            xi: 0.70611408,
        }
    }
}

impl GjrGarchParams {
    pub fn new(mu: f64, nu0: f64, nu: f64, lambda: f64, xi: f64) -> Result<Self> {
        let p = GjrGarchParams {
            mu,
            nu0,
            nu,
            lambda,
            xi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Positivity constraints that keep every conditional variance > 0.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.nu0, self.nu, self.lambda, self.xi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("GARCH parameters must be finite".into()));
        }
        if self.nu0 <= 0.0 {
            return Err(Error::Config("nu0 must be strictly positive".into()));
        }
        if self.nu < 0.0 || self.xi < 0.0 {
            return Err(Error::Config("nu and xi must be non-negative".into()));
        }
        if self.nu + self.lambda < 0.0 {
            return Err(Error::Config("nu + lambda must be non-negative".into()));
        }
        Ok(())
    }

    /// `nu + xi + lambda/2`, the covariance-stationarity measure under
    /// normal innovations (the indicator averages to one half).
    pub fn persistence(&self) -> f64 {
        self.nu + self.xi + 0.5 * self.lambda
    }

    pub fn is_stationary(&self) -> bool {
        self.persistence() < 1.0
    }

    /// Closed-form unconditional per-step variance
    /// `nu0 / (1 - nu - xi - lambda/2)`.
    pub fn stationary_variance(&self) -> Result<f64> {
        self.validate()?;
        if !self.is_stationary() {
            return Err(Error::NonStationary(format!(
                "nu + xi + lambda/2 = {} >= 1",
                self.persistence()
            )));
        }
        Ok(self.nu0 / (1.0 - self.persistence()))
    }

    /// Annualized stationary volatility for a step of `delta_t` years.
    pub fn annualized_vol(&self, delta_t: f64) -> Result<f64> {
        Ok((self.stationary_variance()? / delta_t).sqrt())
    }

    /// First conditional variance: stationary when possible, else `nu0`.
    pub(crate) fn initial_variance(&self) -> f64 {
        self.stationary_variance().unwrap_or(self.nu0)
    }
}

/// Runs the variance recursion on caller-supplied innovations. This is
/// the single code path behind all simulation, so a hand-fed `z` exercises
/// exactly the arithmetic the Monte Carlo paths use.
pub fn path_from_innovations(params: &GjrGarchParams, s0: f64, z: &[f64]) -> PricePath {
    let horizon = z.len();
    let mut prices = Vec::with_capacity(horizon + 1);
    let mut log_returns = Vec::with_capacity(horizon);
    let mut cond_variances = Vec::with_capacity(horizon);
    prices.push(s0);

    let mut sigma2 = params.initial_variance();
    let mut prev_eps = 0.0;
    for (t, &zt) in z.iter().enumerate() {
        if t > 0 {
            let indicator = if prev_eps < 0.0 { 1.0 } else { 0.0 };
            sigma2 = params.nu0
                + (params.nu + params.lambda * indicator) * prev_eps * prev_eps
                + params.xi * sigma2;
        }
        let eps = sigma2.sqrt() * zt;
        let y = params.mu + eps;
        prices.push(prices[t] * y.exp());
        log_returns.push(y);
        cond_variances.push(sigma2);
        prev_eps = eps;
    }

    PricePath {
        s0,
        prices,
        log_returns,
        cond_variances,
    }
}

/// Simulates `n` price paths of `horizon` steps; path `i` draws from
/// stream `stream_offset + i` of `seed`, so datasets built from disjoint
/// offset ranges never share randomness.
pub fn simulate_paths_with_offset(
    params: &GjrGarchParams,
    n: usize,
    horizon: usize,
    s0: f64,
    delta_t: f64,
    seed: u64,
    stream_offset: u64,
) -> Result<PathSet> {
    params.validate()?;
    if n == 0 || horizon == 0 {
        return Err(Error::Config("need at least one path and one step".into()));
    }
    if s0 <= 0.0 {
        return Err(Error::Config("initial price must be positive".into()));
    }
    if delta_t <= 0.0 {
        return Err(Error::Config("delta_t must be positive".into()));
    }
    let paths = (0..n)
        .map(|i| {
            let mut rng = RngStream::new(seed, stream_offset + i as u64);
            let z = rng.gaussian(horizon);
            path_from_innovations(params, s0, &z)
        })
        .collect();
    Ok(PathSet {
        paths,
        seed,
        stream_offset,
        params: *params,
        horizon,
        delta_t,
    })
}

/// [`simulate_paths_with_offset`] at offset zero.
pub fn simulate_paths(
    params: &GjrGarchParams,
    n: usize,
    horizon: usize,
    s0: f64,
    delta_t: f64,
    seed: u64,
) -> Result<PathSet> {
    simulate_paths_with_offset(params, n, horizon, s0, delta_t, seed, 0)
}
