use std::collections::HashSet;

use mrugan_core::{init, Checkpoint, Result, Scalar, Shape, Tape, Tensor, TensorError, Var};
use rand::Rng;

/// Position of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered parameter tensors of one network.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.values
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Records every tensor on `tape` as a trainable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> Bound<'t, T> {
        Bound {
            vars: self.values.iter().map(|v| tape.param(v.clone())).collect(),
        }
    }

    /// Records every tensor as a constant: gradients still flow through the
    /// network to its inputs, but not into these parameters.
    pub fn bind_frozen<'t>(&self, tape: &'t Tape<T>) -> Bound<'t, T> {
        Bound {
            vars: self.values.iter().map(|v| tape.constant(v.clone())).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn fan_in(&mut self, name: impl Into<String>, shape: impl Into<Shape>, rng: &mut impl Rng) -> ParamId {
        self.add(name, init::fan_in_uniform(shape, rng))
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: impl Into<Shape>) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn ones(&mut self, name: impl Into<String>, shape: impl Into<Shape>) -> ParamId {
        self.add(name, Tensor::ones(shape))
    }
}

impl ParamStore<f32> {
    /// Writes every tensor as `<prefix>/<name>`.
    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) {
        for (name, value) in self.names.iter().zip(&self.values) {
            ck.insert(format!("{prefix}/{name}"), value.clone());
        }
    }

    /// Overwrites every tensor from `<prefix>/<name>` entries. Missing
    /// entries and shape changes are errors, so a checkpoint written for a
    /// different architecture is rejected.
    pub fn load_from(&mut self, ck: &Checkpoint, prefix: &str) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let key = format!("{prefix}/{name}");
            let stored = ck
                .get(&key)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing entry {key}")))?;
            if stored.shape() != value.shape() {
                return Err(TensorError::Checkpoint(format!(
                    "{key}: stored shape {} but network expects {}",
                    stored.shape(),
                    value.shape()
                )));
            }
            *value = stored.clone();
            seen.insert(key);
        }
        let extra = ck
            .entries
            .iter()
            .filter(|(k, _)| k.starts_with(&format!("{prefix}/")) && !seen.contains(k))
            .count();
        if extra > 0 {
            return Err(TensorError::Checkpoint(format!(
                "{extra} entries under {prefix}/ do not belong to this network"
            )));
        }
        Ok(())
    }
}

/// A [`ParamStore`] recorded on a tape.
pub struct Bound<'t, T: Scalar> {
    vars: Vec<Var<'t, T>>,
}

impl<'t, T: Scalar> Bound<'t, T> {
    /// Wraps variables already on a tape, in store order.
    pub fn from_vars(vars: Vec<Var<'t, T>>) -> Self {
        Bound { vars }
    }

    pub fn get(&self, id: ParamId) -> Var<'t, T> {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var<'t, T>] {
        &self.vars
    }
}

/// Kernel and optional bias of one convolution.
#[derive(Clone, Copy, Debug)]
pub struct ConvParams {
    pub kernel: ParamId,
    pub bias: Option<ParamId>,
}

impl ConvParams {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        (out_c, in_c, k): (usize, usize, usize),
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let kernel = store.fan_in(format!("{name}/kernel"), [out_c, in_c, k, k], rng);
        let bias = bias.then(|| store.zeros(format!("{name}/bias"), [1, out_c, 1, 1]));
        ConvParams { kernel, bias }
    }

    pub fn apply<'t, T: Scalar>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        geom: mrugan_core::ConvGeom,
    ) -> Result<Var<'t, T>> {
        let y = x.conv2d(p.get(self.kernel), geom)?;
        match self.bias {
            Some(b) => y.add_channel_bias(p.get(b)),
            None => Ok(y),
        }
    }
}

/// Fully connected layer stored as a (F_out, F_in, 1, 1) kernel.
#[derive(Clone, Copy, Debug)]
pub struct DenseParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl DenseParams {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, (out_f, in_f): (usize, usize), rng: &mut impl Rng) -> Self {
        DenseParams {
            weight: store.fan_in(format!("{name}/weight"), [out_f, in_f, 1, 1], rng),
            bias: store.zeros(format!("{name}/bias"), [1, out_f, 1, 1]),
        }
    }

    pub fn apply<'t, T: Scalar>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.dense(p.get(self.weight), p.get(self.bias))
    }
}
