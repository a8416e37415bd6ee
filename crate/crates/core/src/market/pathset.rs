//! Simulated path containers and their on-disk format.
//!
//! A path set serializes to a binary file (magic `HBPS`, one version
//! byte, little-endian 64-bit words) holding log-returns and conditional
//! variances, plus a JSON sidecar with the parameters and seed so the set
//! can be regenerated exactly. Prices are rebuilt from the returns on
//! load through the same compounding code that produced them.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GjrGarchParams;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"HBPS";
const VERSION: u8 = 1;

/// One simulated price path.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePath {
    pub s0: f64,
    /// `S_0..S_T`, length horizon + 1.
    pub prices: Vec<f64>,
    /// `Y_1..Y_T`.
    pub log_returns: Vec<f64>,
    /// `sigma^2_1..sigma^2_T`.
    pub cond_variances: Vec<f64>,
}

impl PricePath {
    /// Rebuilds a path from returns and variances by compounding
    /// `S_t = S_{t-1} exp(Y_t)`.
    pub fn from_parts(s0: f64, log_returns: Vec<f64>, cond_variances: Vec<f64>) -> Self {
        let mut prices = Vec::with_capacity(log_returns.len() + 1);
        prices.push(s0);
        for (t, y) in log_returns.iter().enumerate() {
            prices.push(prices[t] * y.exp());
        }
        PricePath {
            s0,
            prices,
            log_returns,
            cond_variances,
        }
    }

    /// A path with the given prices and no volatility information;
    /// useful for hand-built scenarios.
    pub fn from_prices(prices: Vec<f64>) -> Self {
        assert!(prices.len() >= 2, "need at least two prices");
        let s0 = prices[0];
        let log_returns: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let cond_variances = vec![0.0; log_returns.len()];
        PricePath {
            s0,
            prices,
            log_returns,
            cond_variances,
        }
    }

    pub fn horizon(&self) -> usize {
        self.log_returns.len()
    }
}

/// A seeded batch of simulated paths with shared horizon and start price.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PricePath>,
    pub seed: u64,
    pub stream_offset: u64,
    pub params: GjrGarchParams,
    pub horizon: usize,
    pub delta_t: f64,
}

/// JSON sidecar written next to the binary file.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    params: GjrGarchParams,
    seed: u64,
    stream_offset: u64,
    n_paths: usize,
    horizon: usize,
    s0: f64,
    delta_t: f64,
}

impl PathSet {
    /// Wraps hand-built paths (all must share horizon and start price).
    pub fn from_paths(paths: Vec<PricePath>, params: GjrGarchParams, delta_t: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("path set cannot be empty".into()));
        }
        let horizon = paths[0].horizon();
        let s0 = paths[0].s0;
        if paths.iter().any(|p| p.horizon() != horizon || p.s0 != s0) {
            return Err(Error::Config(
                "all paths must share the same horizon and start price".into(),
            ));
        }
        Ok(PathSet {
            paths,
            seed: 0,
            stream_offset: 0,
            params,
            horizon,
            delta_t,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn s0(&self) -> f64 {
        self.paths[0].s0
    }

    /// Writes `<file>` in the binary format plus a `.json` sidecar.
    pub fn save(&self, file: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.len() * self.horizon * 16);
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.horizon as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.stream_offset.to_le_bytes());
        buf.extend_from_slice(&self.s0().to_le_bytes());
        buf.extend_from_slice(&self.delta_t.to_le_bytes());
        for v in [
            self.params.mu,
            self.params.nu0,
            self.params.nu,
            self.params.lambda,
            self.params.xi,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for path in &self.paths {
            for &y in &path.log_returns {
                buf.extend_from_slice(&y.to_le_bytes());
            }
            for &v in &path.cond_variances {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(file)?;
        f.write_all(&buf)?;

        let sidecar = Sidecar {
            params: self.params,
            seed: self.seed,
            stream_offset: self.stream_offset,
            n_paths: self.len(),
            horizon: self.horizon,
            s0: self.s0(),
            delta_t: self.delta_t,
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        fs::write(file.with_extension("json"), json)?;
        Ok(())
    }

    pub fn load(file: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(file)?.read_to_end(&mut buf)?;
        let mut at = 0usize;
        let take = |buf: &[u8], at: &mut usize, n: usize| -> Result<Vec<u8>> {
            if *at + n > buf.len() {
                return Err(Error::Format("truncated path-set file".into()));
            }
            let out = buf[*at..*at + n].to_vec();
            *at += n;
            Ok(out)
        };
        let magic = take(&buf, &mut at, 4)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic bytes, not a path-set file".into()));
        }
        let version = take(&buf, &mut at, 1)?[0];
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let u64_at = |at: &mut usize| -> Result<u64> {
            Ok(u64::from_le_bytes(take(&buf, at, 8)?.try_into().unwrap()))
        };
        let n = u64_at(&mut at)? as usize;
        let horizon = u64_at(&mut at)? as usize;
        let seed = u64_at(&mut at)?;
        let stream_offset = u64_at(&mut at)?;
        let f64_at = |at: &mut usize| -> Result<f64> {
            Ok(f64::from_le_bytes(take(&buf, at, 8)?.try_into().unwrap()))
        };
        let s0 = f64_at(&mut at)?;
        let delta_t = f64_at(&mut at)?;
        let params = GjrGarchParams {
            mu: f64_at(&mut at)?,
            nu0: f64_at(&mut at)?,
            nu: f64_at(&mut at)?,
            lambda: f64_at(&mut at)?,
            xi: f64_at(&mut at)?,
        };
        let mut paths = Vec::with_capacity(n);
        for _ in 0..n {
            let mut log_returns = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                log_returns.push(f64_at(&mut at)?);
            }
            let mut cond_variances = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                cond_variances.push(f64_at(&mut at)?);
            }
            paths.push(PricePath::from_parts(s0, log_returns, cond_variances));
        }
        Ok(PathSet {
            paths,
            seed,
            stream_offset,
            params,
            horizon,
            delta_t,
        })
    }
}
