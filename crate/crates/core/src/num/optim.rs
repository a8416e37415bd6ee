//! Gradient-descent optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// SGD or bias-corrected Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step_count: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, param_count: usize) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => param_count,
        };
        Ok(Optimizer {
            kind,
            learning_rate,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            step_count: 0,
        })
    }

    pub fn sgd(learning_rate: f64, param_count: usize) -> Result<Self> {
        Optimizer::new(OptimizerKind::Sgd, learning_rate, param_count)
    }

    pub fn adam(learning_rate: f64, param_count: usize) -> Result<Self> {
        Optimizer::new(OptimizerKind::Adam, learning_rate, param_count)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update in place. A NaN gradient is a training-divergence error
    /// so the harness can abort the trial instead of poisoning weights.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract(format!(
                "gradient length {} does not match parameter length {}",
                grads.len(),
                params.len()
            )));
        }
        if grads.iter().any(|g| g.is_nan()) {
            return Err(Error::Divergence("NaN gradient".into()));
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                debug_assert_eq!(self.m.len(), params.len(), "moment arrays misallocated");
                let t = self.step_count as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_is_definitional() {
        let mut opt = Optimizer::sgd(0.1, 1).unwrap();
        let mut p = [1.0];
        opt.step(&mut p, &[0.5]).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut sgd = Optimizer::sgd(0.3, 2).unwrap();
        let mut p = [1.5, -2.0];
        sgd.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, [1.5, -2.0]);

        let mut adam = Optimizer::adam(0.3, 2).unwrap();
        let mut q = [1.5, -2.0];
        adam.step(&mut q, &[0.0, 0.0]).unwrap();
        assert_eq!(q, [1.5, -2.0]);
    }

    #[test]
    fn nan_gradient_is_divergence() {
        let mut opt = Optimizer::adam(0.1, 1).unwrap();
        let mut p = [1.0];
        assert!(matches!(
            opt.step(&mut p, &[f64::NAN]),
            Err(Error::Divergence(_))
        ));
    }

    /// Independent scripted Adam recurrence: the oracle for ten steps on
    /// f(theta) = theta^2 from theta0 = 1 at alpha = 0.1.
    #[test]
    fn adam_matches_scripted_recurrence() {
        let alpha = 0.1;
        let mut theta_oracle = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut trajectory = Vec::new();
        for t in 1..=10 {
            let g = 2.0 * theta_oracle;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            theta_oracle -= alpha * m_hat / (v_hat.sqrt() + 1e-8);
            trajectory.push(theta_oracle);
        }

        let mut opt = Optimizer::adam(alpha, 1).unwrap();
        let mut p = [1.0];
        let mut f_prev = p[0] * p[0];
        for step in 0..10 {
            let g = [2.0 * p[0]];
            opt.step(&mut p, &g).unwrap();
            assert!((p[0] - trajectory[step]).abs() < 1e-14);
            let f = p[0] * p[0];
            assert!(f < f_prev, "f must decrease monotonically on theta^2");
            f_prev = f;
        }
        assert!(p[0].abs() < 1.0);
        assert_eq!(opt.step_count(), 10);
    }
}
