use std::cell::RefCell;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::init::Init;
use crate::tensor::{numel, Tensor};
use crate::Float;

/// A trainable tensor shared between the module that uses it and the
/// [`ParamStore`] that owns the optimizer-facing view.
pub struct Param<T: Float>(Rc<RefCell<Tensor<T>>>);

impl<T: Float> Clone for Param<T> {
    fn clone(&self) -> Self {
        Param(Rc::clone(&self.0))
    }
}

impl<T: Float> std::fmt::Debug for Param<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Param({:?})", self.0.borrow().shape())
    }
}

impl<T: Float> Param<T> {
    pub fn new(t: Tensor<T>) -> Self {
        Param(Rc::new(RefCell::new(t.with_grad())))
    }

    /// The current value as a graph leaf.
    pub fn tensor(&self) -> Tensor<T> {
        self.0.borrow().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.0.borrow().numel()
    }

    /// Replace the value. Gradients computed against the previous value are
    /// no longer associated with this parameter afterwards.
    pub fn set(&self, data: Vec<T>) -> Result<()> {
        let shape = self.shape();
        if data.len() != numel(&shape) {
            return Err(Error::invalid(
                "param_set",
                format!("{} values for shape {shape:?}", data.len()),
            ));
        }
        *self.0.borrow_mut() = Tensor::var(data, &shape)?;
        Ok(())
    }
}

/// Ordered, named collection of parameters.
pub struct ParamStore<T: Float> {
    entries: Vec<(String, Param<T>)>,
}

impl<T: Float> Default for ParamStore<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, p: Param<T>) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::invalid("param_store", format!("duplicate parameter `{name}`")));
        }
        self.entries.push((name, p));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.entries.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, p)| p.numel()).sum()
    }

    /// Number of learnable scalars whose names start with `prefix`.
    pub fn num_scalars_with_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, p)| p.numel())
            .sum()
    }

    /// Sets every parameter to a constant.
    pub fn fill(&self, value: T) -> Result<()> {
        for (_, p) in &self.entries {
            p.set(vec![value; p.numel()])?;
        }
        Ok(())
    }

    /// Moves all parameters of `other` into this store under `prefix.`.
    pub fn absorb(&mut self, prefix: &str, other: ParamStore<T>) -> Result<()> {
        for (n, p) in other.entries {
            self.insert(format!("{prefix}.{n}"), p)?;
        }
        Ok(())
    }
}

/// Creates parameters with hierarchical dotted names and reproducible
/// initial values.
pub struct ParamBuilder<T: Float> {
    store: ParamStore<T>,
    rng: ChaCha8Rng,
    prefix: Vec<String>,
}

impl<T: Float> ParamBuilder<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            prefix: Vec::new(),
        }
    }

    pub fn scope<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        self.prefix.push(name.to_string());
        let r = f(self);
        self.prefix.pop();
        r
    }

    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Param<T> {
        let values = init.sample(&mut self.rng, numel(shape));
        let data = values.into_iter().map(T::lit).collect();
        let p = Param::new(Tensor::from_vec(data, shape).expect("sampled length matches shape"));
        let mut full = self.prefix.join(".");
        if !full.is_empty() {
            full.push('.');
        }
        full.push_str(name);
        self.store
            .insert(full, p.clone())
            .expect("module constructors use unique parameter names");
        p
    }

    pub fn finish(self) -> ParamStore<T> {
        self.store
    }
}
