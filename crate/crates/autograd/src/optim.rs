//! First-order optimizers.

use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::tensor::Gradients;
use crate::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter moment estimates, keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamSlot {
    pub name: String,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adam with bias correction. Moments are kept in `f64` regardless of the
/// parameter type. Parameters without a gradient in a given step are left
/// untouched and their step counters do not advance.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    slots: Vec<AdamSlot>,
}

impl Adam {
    pub fn new<T: Float>(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let slots = store
            .iter()
            .map(|(name, p)| AdamSlot {
                name: name.to_string(),
                step: 0,
                m: vec![0.0; p.numel()],
                v: vec![0.0; p.numel()],
            })
            .collect();
        Self { config, slots }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn slots(&self) -> &[AdamSlot] {
        &self.slots
    }

    /// Restores moments saved from an optimizer over the same parameter set.
    pub fn load_slots(&mut self, slots: Vec<AdamSlot>) -> Result<()> {
        if slots.len() != self.slots.len() {
            return Err(Error::invalid(
                "adam_load",
                format!("{} slots for {} parameters", slots.len(), self.slots.len()),
            ));
        }
        for (have, new) in self.slots.iter().zip(&slots) {
            if have.name != new.name || have.m.len() != new.m.len() || have.v.len() != new.v.len() {
                return Err(Error::invalid(
                    "adam_load",
                    format!("slot `{}` does not match `{}`", new.name, have.name),
                ));
            }
        }
        self.slots = slots;
        Ok(())
    }

    pub fn step<T: Float>(&mut self, store: &ParamStore<T>, grads: &Gradients<T>) -> Result<()> {
        if store.len() != self.slots.len() {
            return Err(Error::invalid("adam_step", "parameter set changed since construction"));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        for ((name, p), slot) in store.iter().zip(self.slots.iter_mut()) {
            debug_assert_eq!(name, slot.name);
            let current = p.tensor();
            let Some(g) = grads.get(&current) else {
                continue;
            };
            slot.step += 1;
            let t = slot.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            let mut next = Vec::with_capacity(current.numel());
            for (i, (&w, &gi)) in current.data().iter().zip(g.data()).enumerate() {
                let gi = gi.to_f64().unwrap_or(f64::NAN);
                let m = beta1 * slot.m[i] + (1.0 - beta1) * gi;
                let v = beta2 * slot.v[i] + (1.0 - beta2) * gi * gi;
                slot.m[i] = m;
                slot.v[i] = v;
                let upd = lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                next.push(w - T::lit(upd));
            }
            p.set(next)?;
        }
        Ok(())
    }
}
