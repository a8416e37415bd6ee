//! Browser bindings for the hedging engine. Three interactive
//! operations, each returning a JSON payload the demo page draws on
//! canvases: simulate price paths, delta-hedge one episode, and profile
//! the loss distribution of the baseline hedge.
//!
//! The `inner` module is plain Rust (testable on any target); the
//! exported functions only translate its `Result<String, String>` into
//! `JsValue` errors.
//!
//! Build (requires the wasm32 target and wasm-bindgen-cli):
//!
//! ```text
//! cargo build -p hedgebench-wasm --release --target wasm32-unknown-unknown
//! wasm-bindgen target/wasm32-unknown-unknown/release/hedgebench_wasm.wasm \
//!     --target web --out-dir web/pkg
//! ```

use wasm_bindgen::prelude::*;

mod inner {
    use hedgebench::bs::{self, DeltaHedgePolicy};
    use hedgebench::env::{run_episode, run_episodes, rsqp};
    use hedgebench::market::{simulate_paths, GjrGarchParams};

    type Res = Result<String, String>;

    fn params(mu: f64, nu0: f64, nu: f64, lambda: f64, xi: f64) -> Result<GjrGarchParams, String> {
        GjrGarchParams::new(mu, nu0, nu, lambda, xi).map_err(|e| e.to_string())
    }

    pub fn default_params() -> String {
        serde_json::to_string(&GjrGarchParams::default()).unwrap()
    }

    pub fn simulate(
        mu: f64,
        nu0: f64,
        nu: f64,
        lambda: f64,
        xi: f64,
        n: usize,
        seed: u64,
    ) -> Res {
        let p = params(mu, nu0, nu, lambda, xi)?;
        let n = n.clamp(1, 512);
        let set = simulate_paths(&p, n, 12, 100.0, 1.0 / 12.0, seed).map_err(|e| e.to_string())?;
        let prices: Vec<&[f64]> = set.paths.iter().map(|q| q.prices.as_slice()).collect();
        let vol = p.annualized_vol(1.0 / 12.0).ok();
        Ok(serde_json::json!({
            "prices": prices,
            "annualized_vol": vol,
            "stationary": p.is_stationary(),
        })
        .to_string())
    }

    pub fn hedge_episode(
        mu: f64,
        nu0: f64,
        nu: f64,
        lambda: f64,
        xi: f64,
        strike: f64,
        seed: u64,
        path_index: usize,
    ) -> Res {
        let p = params(mu, nu0, nu, lambda, xi)?;
        let mut config = bs::default_env_config(&p).map_err(|e| e.to_string())?;
        config.strike = strike;
        // keep the premium consistent with the chosen strike
        config.premium = bs::bs_call_price(&bs::BsInputs {
            spot: config.s0,
            strike,
            sigma_ann: p.annualized_vol(config.delta_t).map_err(|e| e.to_string())?,
            tau: 1.0,
            rate_ann: 0.0,
        })
        .map_err(|e| e.to_string())?;
        let n = path_index.clamp(0, 255) + 1;
        let set =
            simulate_paths(&p, n, 12, config.s0, config.delta_t, seed).map_err(|e| e.to_string())?;
        let path = &set.paths[n - 1];
        let policy = DeltaHedgePolicy::from_params(config, &p).map_err(|e| e.to_string())?;
        let record = run_episode(&policy, path, &config).map_err(|e| e.to_string())?;
        Ok(serde_json::json!({
            "prices": path.prices,
            "positions": record.positions,
            "values": record.values,
            "cash": record.cash,
            "loss": record.loss,
            "premium": config.premium,
            "sigma": policy.sigma_ann(),
        })
        .to_string())
    }

    pub fn loss_profile(
        mu: f64,
        nu0: f64,
        nu: f64,
        lambda: f64,
        xi: f64,
        n: usize,
        seed: u64,
    ) -> Res {
        let p = params(mu, nu0, nu, lambda, xi)?;
        let config = bs::default_env_config(&p).map_err(|e| e.to_string())?;
        let n = n.clamp(16, 1 << 14);
        let set =
            simulate_paths(&p, n, 12, config.s0, config.delta_t, seed).map_err(|e| e.to_string())?;
        let policy = DeltaHedgePolicy::from_params(config, &p).map_err(|e| e.to_string())?;
        let losses = run_episodes(&policy, &set, &config).map_err(|e| e.to_string())?;
        let risk = rsqp(&losses).map_err(|e| e.to_string())?;
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &losses {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let bins = 41usize;
        let width = ((hi - lo) / bins as f64).max(1e-12);
        let mut counts = vec![0u32; bins];
        for &r in &losses {
            let k = (((r - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        Ok(serde_json::json!({
            "rsqp": risk,
            "mean_loss": mean,
            "edges": edges,
            "counts": counts,
        })
        .to_string())
    }
}

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Default parameter set as JSON (slider initial values).
#[wasm_bindgen]
pub fn default_params() -> String {
    inner::default_params()
}

/// Simulates `n` one-year monthly price paths.
///
/// Returns `{prices: [[f64; 13]; n], annualized_vol, stationary}`.
#[wasm_bindgen]
pub fn simulate(
    mu: f64,
    nu0: f64,
    nu: f64,
    lambda: f64,
    xi: f64,
    n: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(inner::simulate(mu, nu0, nu, lambda, xi, n, seed))
}

/// Delta-hedges one simulated episode and reports the full ledger.
///
/// Returns `{prices, positions, values, cash, loss, premium, sigma}`.
#[wasm_bindgen]
pub fn hedge_episode(
    mu: f64,
    nu0: f64,
    nu: f64,
    lambda: f64,
    xi: f64,
    strike: f64,
    seed: u64,
    path_index: usize,
) -> Result<String, JsValue> {
    to_js(inner::hedge_episode(
        mu, nu0, nu, lambda, xi, strike, seed, path_index,
    ))
}

/// Delta-hedges a batch of paths and profiles the loss distribution.
///
/// Returns `{rsqp, mean_loss, edges: [f64; bins+1], counts: [u32; bins]}`.
#[wasm_bindgen]
pub fn loss_profile(
    mu: f64,
    nu0: f64,
    nu: f64,
    lambda: f64,
    xi: f64,
    n: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(inner::loss_profile(mu, nu0, nu, lambda, xi, n, seed))
}
