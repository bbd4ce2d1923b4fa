//! Reverse-mode gradient tape.
//!
//! Every differentiable operation appends a node holding its output value
//! and the ids of its operands. Node ids are assigned in execution order, so
//! walking ids downward is a valid reverse topological order. Backward rules
//! are written in terms of the same recorded operations, which means that a
//! gradient computed with `create_graph = true` is itself differentiable
//! (needed for gradient penalties).

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::kernels::{self, ConvGeom};
use crate::{Scalar, Shape, Tensor};

#[derive(Clone)]
pub(crate) enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    AddScalar(usize),
    Broadcast(usize),
    SumTo(usize),
    Reshape(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Pow(usize, T),
    Abs(usize),
    LeakyRelu(usize, T),
    Softplus(usize),
    Conv { x: usize, k: usize, geom: ConvGeom },
    ConvInputGrad { g: usize, k: usize, geom: ConvGeom },
    ConvKernelGrad { x: usize, g: usize, geom: ConvGeom },
    Concat(usize, usize),
    Slice { a: usize, start: usize },
    Embed { a: usize, start: usize },
    AvgPool(usize, usize),
    Upsample(usize, usize),
    SelectRows(usize, Rc<[usize]>),
    ScatterRows(usize, Rc<[usize]>),
    MaxHw(usize, Rc<Tensor<T>>),
}

impl<T> Op<T> {
    fn parents(&self) -> [Option<usize>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Concat(a, b) => [Some(a), Some(b)],
            Conv { x, k, .. } => [Some(x), Some(k)],
            ConvInputGrad { g, k, .. } => [Some(g), Some(k)],
            ConvKernelGrad { x, g, .. } => [Some(x), Some(g)],
            Scale(a, _) | AddScalar(a) | Broadcast(a) | SumTo(a) | Reshape(a) | Sigmoid(a)
            | Tanh(a) | Exp(a) | Ln(a) | Pow(a, _) | Abs(a) | LeakyRelu(a, _) | Softplus(a)
            | Slice { a, .. } | Embed { a, .. } | AvgPool(a, _) | Upsample(a, _)
            | SelectRows(a, _) | ScatterRows(a, _) | MaxHw(a, _) => [Some(a), None],
        }
    }
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Single-owner record of one forward (and optionally backward) pass.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    recording: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar> {
    pub(crate) tape: &'t Tape<T>,
    pub(crate) id: usize,
}

impl<T: Scalar> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{}, {})", self.id, self.shape())
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

struct RecordingGuard<'a> {
    cell: &'a Cell<bool>,
    prev: bool,
}

impl Drop for RecordingGuard<'_> {
    fn drop(&mut self) {
        self.cell.set(self.prev);
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: Cell::new(true),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        self.push_node(Rc::new(value), Op::Leaf, requires_grad)
    }

    /// Leaf that gradients flow into.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, true)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    /// Whether new operations are being recorded for differentiation.
    pub fn is_recording(&self) -> bool {
        self.recording.get()
    }

    /// Runs `f` with recording disabled: every op it performs yields a
    /// constant.
    pub fn no_grad<R>(&self, f: impl FnOnce() -> R) -> R {
        let _guard = self.set_recording(false);
        f()
    }

    fn set_recording(&self, on: bool) -> RecordingGuard<'_> {
        let prev = self.recording.replace(on);
        RecordingGuard {
            cell: &self.recording,
            prev,
        }
    }

    fn push_node(&self, value: Rc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn push(&self, value: Tensor<T>, op: Op<T>) -> Var<'_, T> {
        let requires_grad = self.recording.get() && {
            let nodes = self.nodes.borrow();
            op.parents()
                .iter()
                .flatten()
                .any(|&p| nodes[p].requires_grad)
        };
        let op = if requires_grad { op } else { Op::Leaf };
        self.push_node(Rc::new(value), op, requires_grad)
    }

    pub(crate) fn value_of(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    pub(crate) fn requires_grad_of(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn var(&self, id: usize) -> Var<'_, T> {
        Var { tape: self, id }
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// `None` means no differentiable path connects that input to the
    /// output. With `create_graph` the returned gradients are recorded
    /// expressions and can be differentiated again; otherwise they are
    /// constants.
    pub fn grad<'t>(
        &'t self,
        output: Var<'t, T>,
        wrt: &[Var<'t, T>],
        create_graph: bool,
    ) -> Result<Vec<Option<Var<'t, T>>>> {
        let out_shape = output.shape();
        if out_shape.numel() != 1 {
            return Err(TensorError::NotScalar(out_shape));
        }
        let end = output.id;
        let mut needed = vec![false; end + 1];
        {
            let nodes = self.nodes.borrow();
            for w in wrt {
                if w.id <= end && nodes[w.id].requires_grad {
                    needed[w.id] = true;
                }
            }
            for id in 0..=end {
                if needed[id] || !nodes[id].requires_grad {
                    continue;
                }
                needed[id] = nodes[id].op.parents().iter().flatten().any(|&p| needed[p]);
            }
        }
        if !needed[end] {
            return Ok(vec![None; wrt.len()]);
        }

        let _guard = self.set_recording(create_graph);
        let mut grads: Vec<Option<Var<'t, T>>> = vec![None; end + 1];
        grads[end] = Some(self.constant(Tensor::ones(out_shape)));
        for id in (0..=end).rev() {
            if !needed[id] {
                continue;
            }
            let Some(g) = grads[id] else { continue };
            let op = self.nodes.borrow()[id].op.clone();
            self.backprop(self.var(id), &op, g, &needed, &mut grads)?;
        }
        Ok(wrt.iter().map(|w| grads.get(w.id).copied().flatten()).collect())
    }

    /// Non-recording gradients as plain tensors; unreachable inputs get
    /// zeros.
    pub fn gradients<'t>(&'t self, output: Var<'t, T>, wrt: &[Var<'t, T>]) -> Result<Vec<Tensor<T>>> {
        let grads = self.grad(output, wrt, false)?;
        Ok(grads
            .into_iter()
            .zip(wrt)
            .map(|(g, w)| match g {
                Some(g) => (*g.value()).clone(),
                None => Tensor::zeros(w.shape()),
            })
            .collect())
    }

    fn backprop<'t>(
        &'t self,
        this: Var<'t, T>,
        op: &Op<T>,
        g: Var<'t, T>,
        needed: &[bool],
        grads: &mut [Option<Var<'t, T>>],
    ) -> Result<()> {
        let mut acc = |id: usize, contrib: Var<'t, T>| -> Result<()> {
            grads[id] = Some(match grads[id] {
                Some(prev) => prev.add(contrib)?,
                None => contrib,
            });
            Ok(())
        };
        let want = |id: usize| needed[id];
        let v = |id: usize| self.var(id);
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if want(a) {
                    acc(a, g)?;
                }
                if want(b) {
                    acc(b, g)?;
                }
            }
            Op::Sub(a, b) => {
                if want(a) {
                    acc(a, g)?;
                }
                if want(b) {
                    acc(b, g.neg())?;
                }
            }
            Op::Mul(a, b) => {
                if want(a) {
                    acc(a, g.mul(v(b))?)?;
                }
                if want(b) {
                    acc(b, g.mul(v(a))?)?;
                }
            }
            Op::Scale(a, c) => acc(a, g.scale(c))?,
            Op::AddScalar(a) => acc(a, g)?,
            Op::Broadcast(a) => acc(a, g.sum_to(v(a).shape())?)?,
            Op::SumTo(a) => acc(a, g.broadcast_to(v(a).shape())?)?,
            Op::Reshape(a) => acc(a, g.reshape(v(a).shape())?)?,
            Op::Sigmoid(a) => {
                let one_minus = this.neg().add_scalar(T::one());
                acc(a, g.mul(this)?.mul(one_minus)?)?;
            }
            Op::Tanh(a) => {
                let d = this.mul(this)?.neg().add_scalar(T::one());
                acc(a, g.mul(d)?)?;
            }
            Op::Exp(a) => acc(a, g.mul(this)?)?,
            Op::Ln(a) => acc(a, g.mul(v(a).pow(-T::one()))?)?,
            Op::Pow(a, p) => acc(a, g.mul(v(a).pow(p - T::one()))?.scale(p))?,
            Op::Abs(a) => {
                let sign = self.constant(v(a).value().map(kernels::sign));
                acc(a, g.mul(sign)?)?;
            }
            Op::LeakyRelu(a, slope) => {
                let mask = self.constant(
                    v(a).value()
                        .map(|x| if x > T::zero() { T::one() } else { slope }),
                );
                acc(a, g.mul(mask)?)?;
            }
            Op::Softplus(a) => acc(a, g.mul(v(a).sigmoid())?)?,
            Op::Conv { x, k, geom } => {
                let (xs, ks) = (v(x).shape(), v(k).shape());
                if want(x) {
                    acc(x, g.conv2d_input_grad(v(k), (xs.h(), xs.w()), geom)?)?;
                }
                if want(k) {
                    acc(k, v(x).conv2d_kernel_grad(g, (ks.h(), ks.w()), geom)?)?;
                }
            }
            Op::ConvInputGrad { g: g0, k, geom } => {
                // out = A_k^T g0, linear in each argument.
                if want(g0) {
                    acc(g0, g.conv2d(v(k), geom)?)?;
                }
                if want(k) {
                    let ks = v(k).shape();
                    acc(k, g.conv2d_kernel_grad(v(g0), (ks.h(), ks.w()), geom)?)?;
                }
            }
            Op::ConvKernelGrad { x, g: g0, geom } => {
                if want(x) {
                    let xs = v(x).shape();
                    acc(x, v(g0).conv2d_input_grad(g, (xs.h(), xs.w()), geom)?)?;
                }
                if want(g0) {
                    acc(g0, v(x).conv2d(g, geom)?)?;
                }
            }
            Op::Concat(a, b) => {
                let ca = v(a).shape().c();
                let cb = v(b).shape().c();
                if want(a) {
                    acc(a, g.slice_channels(0, ca)?)?;
                }
                if want(b) {
                    acc(b, g.slice_channels(ca, cb)?)?;
                }
            }
            Op::Slice { a, start } => {
                let total = v(a).shape().c();
                acc(a, g.embed_channels(start, total)?)?;
            }
            Op::Embed { a, start } => {
                let len = v(a).shape().c();
                acc(a, g.slice_channels(start, len)?)?;
            }
            Op::AvgPool(a, f) => {
                let inv = T::one() / T::lit((f * f) as f64);
                acc(a, g.upsample_nearest(f)?.scale(inv))?;
            }
            Op::Upsample(a, f) => {
                acc(a, g.downsample_avg(f)?.scale(T::lit((f * f) as f64)))?;
            }
            Op::SelectRows(a, ref labels) => {
                let rows = v(a).shape().n();
                acc(a, g.scatter_rows(Rc::clone(labels), rows)?)?;
            }
            Op::ScatterRows(a, ref labels) => {
                acc(a, g.select_rows(Rc::clone(labels))?)?;
            }
            Op::MaxHw(a, ref mask) => {
                let m = self.constant((**mask).clone());
                acc(a, g.broadcast_to(v(a).shape())?.mul(m)?)?;
            }
        }
        Ok(())
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Shape {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad_of(self.id)
    }

    /// Same value, cut off from the graph.
    pub fn detach(&self) -> Var<'t, T> {
        let value = self.value();
        self.tape.push_node(value, Op::Leaf, false)
    }

    /// Value of a single-element var.
    pub fn item(&self) -> T {
        self.value().data()[0]
    }
}
