use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction and no weight decay. Moment estimates are keyed
/// by parameter name so they can be checkpointed.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter of `store` that has a gradient.
    /// Returns `false` (and leaves everything untouched) when none has.
    pub fn step(&mut self, store: &ParamStore, grads: &GradStore) -> Result<bool> {
        let with_grad: Vec<_> = store
            .params()
            .iter()
            .filter_map(|(name, var)| grads.get(var.as_tensor()).map(|g| (name, var, g)))
            .collect();
        if with_grad.is_empty() {
            return Ok(false);
        }
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (name, var, g) in with_grad {
            let g = g.detach();
            let m = match self.m.get(name) {
                Some(m) => ((m * beta1)? + (&g * (1.0 - beta1))?)?,
                None => (&g * (1.0 - beta1))?,
            };
            let v = match self.v.get(name) {
                Some(v) => ((v * beta2)? + (g.sqr()? * (1.0 - beta2))?)?,
                None => (g.sqr()? * (1.0 - beta2))?,
            };
            let denom = ((&v / c2)?.sqrt()? + eps)?;
            let delta = ((&m / c1)? / denom)?.affine(learning_rate, 0.0)?;
            var.set(&(var.as_tensor().detach() - delta)?)?;
            self.m.insert(name.clone(), m);
            self.v.insert(name.clone(), v);
        }
        Ok(true)
    }

    /// Moment tensors as `{prefix}.m.{name}` / `{prefix}.v.{name}`.
    pub fn state(&self, prefix: &str) -> BTreeMap<String, Tensor> {
        let m = self.m.iter().map(|(k, t)| (format!("{prefix}.m.{k}"), t.clone()));
        let v = self.v.iter().map(|(k, t)| (format!("{prefix}.v.{k}"), t.clone()));
        m.chain(v).collect()
    }

    /// Restores state written by [`Adam::state`].
    pub fn load_state(&mut self, prefix: &str, steps: u64, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for (k, t) in tensors {
            if let Some(name) = k.strip_prefix(&format!("{prefix}.m.")) {
                m.insert(name.to_string(), t.clone());
            } else if let Some(name) = k.strip_prefix(&format!("{prefix}.v.")) {
                v.insert(name.to_string(), t.clone());
            }
        }
        if m.len() != v.len() || (steps > 0 && m.is_empty()) {
            return Err(Error::IncompatibleCheckpoint(format!(
                "optimizer state {prefix} is incomplete"
            )));
        }
        self.t = steps;
        self.m = m;
        self.v = v;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Builder;
    use candle_core::DType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Builder::new(&mut store, &mut rng).constant("w", 3, 1.0).unwrap();
        let coef = Tensor::new(&[2.0f64, -3.0, 0.5], store.device()).unwrap();
        let loss = w.as_tensor().mul(&coef).unwrap().sum_all().unwrap();
        let grads = loss.backward().unwrap();
        let mut opt = Adam::new(AdamConfig {
            learning_rate: 0.1,
            ..Default::default()
        });
        assert!(opt.step(&store, &grads).unwrap());
        let got = w.as_tensor().to_vec1::<f64>().unwrap();
        for (g, c) in got.iter().zip([2.0f64, -3.0, 0.5]) {
            assert!((g - (1.0 - 0.1 * c.signum())).abs() < 1e-6, "{got:?}");
        }
        assert_eq!(opt.steps(), 1);
        assert_eq!(opt.state("x").len(), 2);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Builder::new(&mut store, &mut rng).constant("w", 2, 3.0).unwrap();
        let mut opt = Adam::new(AdamConfig {
            learning_rate: 0.05,
            ..Default::default()
        });
        for _ in 0..500 {
            let loss = w.as_tensor().sqr().unwrap().sum_all().unwrap();
            opt.step(&store, &loss.backward().unwrap()).unwrap();
        }
        let got = w.as_tensor().to_vec1::<f64>().unwrap();
        assert!(got.iter().all(|v| v.abs() < 0.05), "{got:?}");
    }
}
