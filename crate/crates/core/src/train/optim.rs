//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 2e-4, beta1: 0.9, beta2: 0.99, eps: 1e-8, weight_decay: 1e-4 }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!("{name} must be in (0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config("eps must be positive and weight_decay non-negative"));
        }
        Ok(())
    }
}

/// First and second moments of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T: Element> {
    pub m: Tensor<T>,
    pub v: Tensor<T>,
    /// Number of updates this parameter has received.
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamW<T: Element> {
    pub config: AdamWConfig,
    /// Indexed like the parameter store; `None` until the first update.
    pub state: Vec<Option<Moments<T>>>,
}

impl<T: Element> AdamW<T> {
    pub fn new(config: AdamWConfig, num_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(AdamW { config, state: vec![None; num_params] })
    }

    /// Updates every parameter that has a gradient. Parameters without one
    /// are left untouched, including weight decay. All gradients are checked
    /// for finiteness before anything is modified.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        if grads.len() != store.len() || self.state.len() != store.len() {
            return Err(Error::Usage(format!(
                "{} gradients and {} moment slots for {} parameters",
                grads.len(),
                self.state.len(),
                store.len()
            )));
        }
        for (id, g) in store.ids().zip(grads) {
            if let Some(g) = g {
                if g.shape() != store.get(id).shape() {
                    return Err(Error::ShapeMismatch {
                        name: store.name(id).to_string(),
                        expected: store.get(id).shape().to_vec(),
                        found: g.shape().to_vec(),
                    });
                }
                if !g.all_finite() {
                    return Err(Error::NonFinite { name: store.name(id).to_string() });
                }
            }
        }

        let c = self.config;
        let ids: Vec<_> = store.ids().collect();
        for ((id, g), slot) in ids.into_iter().zip(grads).zip(&mut self.state) {
            let Some(g) = g else { continue };
            let p = store.get_mut(id);
            let st = slot.get_or_insert_with(|| Moments {
                m: Tensor::zeros(p.shape().to_vec()),
                v: Tensor::zeros(p.shape().to_vec()),
                step: 0,
            });
            st.step += 1;
            let bc1 = 1.0 - c.beta1.powi(st.step as i32);
            let bc2 = 1.0 - c.beta2.powi(st.step as i32);
            let decay = 1.0 - c.lr * c.weight_decay;
            let pd = p.data_mut();
            let md = st.m.data_mut();
            let vd = st.v.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i].as_f64();
                let m = c.beta1 * md[i].as_f64() + (1.0 - c.beta1) * gi;
                let v = c.beta2 * vd[i].as_f64() + (1.0 - c.beta2) * gi * gi;
                md[i] = T::from_f64(m);
                vd[i] = T::from_f64(v);
                let update = (m / bc1) / ((v / bc2).sqrt() + c.eps);
                pd[i] = T::from_f64(pd[i].as_f64() * decay - c.lr * update);
            }
        }
        Ok(())
    }
}
