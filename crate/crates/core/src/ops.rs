//! Differentiable operations on [`Var`].

use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::kernels::{self, ConvGeom};
use crate::tape::{Op, Var};
use crate::{Scalar, Shape, Tensor};

/// Instance-norm variance floor.
pub const NORM_EPS: f64 = 1e-5;

impl<'t, T: Scalar> Var<'t, T> {
    fn same_tape(&self, other: &Var<'t, T>) {
        debug_assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
    }

    fn binary(
        self,
        rhs: Var<'t, T>,
        name: &'static str,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let out = self.value().zip_map(&rhs.value(), name, f)?;
        Ok(self.tape.push(out, op))
    }

    fn unary(self, f: impl Fn(T) -> T, op: Op<T>) -> Var<'t, T> {
        let out = self.value().map(f);
        self.tape.push(out, op)
    }

    pub fn add(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(rhs, "add", |a, b| a + b, Op::Add(self.id, rhs.id))
    }

    pub fn sub(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(rhs, "sub", |a, b| a - b, Op::Sub(self.id, rhs.id))
    }

    pub fn mul(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(rhs, "mul", |a, b| a * b, Op::Mul(self.id, rhs.id))
    }

    pub fn scale(self, c: T) -> Var<'t, T> {
        self.unary(|a| a * c, Op::Scale(self.id, c))
    }

    pub fn neg(self) -> Var<'t, T> {
        self.scale(-T::one())
    }

    pub fn add_scalar(self, c: T) -> Var<'t, T> {
        self.unary(|a| a + c, Op::AddScalar(self.id))
    }

    pub fn broadcast_to(self, target: Shape) -> Result<Var<'t, T>> {
        if self.shape() == target {
            return Ok(self);
        }
        let out = kernels::broadcast_to(&self.value(), target)?;
        Ok(self.tape.push(out, Op::Broadcast(self.id)))
    }

    pub fn sum_to(self, target: Shape) -> Result<Var<'t, T>> {
        if self.shape() == target {
            return Ok(self);
        }
        let out = kernels::sum_to(&self.value(), target)?;
        Ok(self.tape.push(out, Op::SumTo(self.id)))
    }

    /// Sum of all elements, shape (1,1,1,1).
    pub fn sum(self) -> Var<'t, T> {
        self.sum_to(Shape::SCALAR).expect("every shape reduces to a scalar")
    }

    pub fn mean(self) -> Var<'t, T> {
        let n = self.shape().numel().max(1);
        self.sum().scale(T::one() / T::lit(n as f64))
    }

    /// Per-(sample, channel) mean over H x W, shape (N, C, 1, 1).
    pub fn mean_hw(self) -> Var<'t, T> {
        let s = self.shape();
        let inv = T::one() / T::lit(s.plane().max(1) as f64);
        self.sum_to(Shape::new(s.n(), s.c(), 1, 1))
            .expect("per-channel reduction")
            .scale(inv)
    }

    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Var<'t, T>> {
        let shape = shape.into();
        if shape == self.shape() {
            return Ok(self);
        }
        let out = (*self.value()).clone().reshape(shape)?;
        Ok(self.tape.push(out, Op::Reshape(self.id)))
    }

    /// (N, C, H, W) -> (N, C*H*W, 1, 1).
    pub fn flatten(self) -> Var<'t, T> {
        let s = self.shape();
        self.reshape([s.n(), s.sample_len(), 1, 1])
            .expect("flatten preserves element count")
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        self.unary(kernels::sigmoid, Op::Sigmoid(self.id))
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(|a| a.tanh(), Op::Tanh(self.id))
    }

    pub fn exp(self) -> Var<'t, T> {
        self.unary(|a| a.exp(), Op::Exp(self.id))
    }

    pub fn ln(self) -> Var<'t, T> {
        self.unary(|a| a.ln(), Op::Ln(self.id))
    }

    pub fn pow(self, p: T) -> Var<'t, T> {
        self.unary(|a| a.powf(p), Op::Pow(self.id, p))
    }

    pub fn abs(self) -> Var<'t, T> {
        self.unary(|a| a.abs(), Op::Abs(self.id))
    }

    pub fn leaky_relu(self, slope: T) -> Var<'t, T> {
        self.unary(|a| kernels::leaky_relu(a, slope), Op::LeakyRelu(self.id, slope))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(self) -> Var<'t, T> {
        self.unary(kernels::softplus, Op::Softplus(self.id))
    }

    pub fn conv2d(self, kernel: Var<'t, T>, geom: ConvGeom) -> Result<Var<'t, T>> {
        self.same_tape(&kernel);
        let out = kernels::conv2d(&self.value(), &kernel.value(), geom)?;
        Ok(self.tape.push(
            out,
            Op::Conv {
                x: self.id,
                k: kernel.id,
                geom,
            },
        ))
    }

    /// Gradient of a convolution with respect to its input, as a recorded
    /// (and therefore differentiable) operation. `self` is output-shaped.
    pub fn conv2d_input_grad(
        self,
        kernel: Var<'t, T>,
        in_hw: (usize, usize),
        geom: ConvGeom,
    ) -> Result<Var<'t, T>> {
        let out = kernels::conv2d_input_grad(&self.value(), &kernel.value(), in_hw, geom)?;
        Ok(self.tape.push(
            out,
            Op::ConvInputGrad {
                g: self.id,
                k: kernel.id,
                geom,
            },
        ))
    }

    /// Gradient of a convolution with respect to its kernel; `self` is the
    /// convolution input and `grad` is output-shaped.
    pub fn conv2d_kernel_grad(
        self,
        grad: Var<'t, T>,
        kernel_hw: (usize, usize),
        geom: ConvGeom,
    ) -> Result<Var<'t, T>> {
        let out = kernels::conv2d_kernel_grad(&self.value(), &grad.value(), kernel_hw, geom)?;
        Ok(self.tape.push(
            out,
            Op::ConvKernelGrad {
                x: self.id,
                g: grad.id,
                geom,
            },
        ))
    }

    pub fn concat_channels(self, rhs: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&rhs);
        let out = kernels::concat_channels(&self.value(), &rhs.value())?;
        Ok(self.tape.push(out, Op::Concat(self.id, rhs.id)))
    }

    pub fn slice_channels(self, start: usize, len: usize) -> Result<Var<'t, T>> {
        let out = kernels::slice_channels(&self.value(), start, len)?;
        Ok(self.tape.push(out, Op::Slice { a: self.id, start }))
    }

    pub fn embed_channels(self, start: usize, total: usize) -> Result<Var<'t, T>> {
        let out = kernels::embed_channels(&self.value(), start, total)?;
        Ok(self.tape.push(out, Op::Embed { a: self.id, start }))
    }

    pub fn downsample_avg(self, factor: usize) -> Result<Var<'t, T>> {
        if factor == 1 {
            return Ok(self);
        }
        let out = kernels::avg_pool(&self.value(), factor)?;
        Ok(self.tape.push(out, Op::AvgPool(self.id, factor)))
    }

    pub fn upsample_nearest(self, factor: usize) -> Result<Var<'t, T>> {
        if factor == 1 {
            return Ok(self);
        }
        let out = kernels::upsample_nearest(&self.value(), factor)?;
        Ok(self.tape.push(out, Op::Upsample(self.id, factor)))
    }

    /// Row lookup into a per-class table of shape (K, C, H, W).
    pub fn select_rows(self, labels: Rc<[usize]>) -> Result<Var<'t, T>> {
        let out = kernels::select_rows(&self.value(), &labels)?;
        Ok(self.tape.push(out, Op::SelectRows(self.id, labels)))
    }

    pub fn scatter_rows(self, labels: Rc<[usize]>, rows: usize) -> Result<Var<'t, T>> {
        let out = kernels::scatter_rows(&self.value(), &labels, rows)?;
        Ok(self.tape.push(out, Op::ScatterRows(self.id, labels)))
    }

    /// Per-(sample, channel) maximum over H x W, shape (N, C, 1, 1).
    pub fn max_hw(self) -> Var<'t, T> {
        let (vals, mask) = kernels::max_hw(&self.value());
        self.tape.push(vals, Op::MaxHw(self.id, Rc::new(mask)))
    }

    pub fn min_hw(self) -> Var<'t, T> {
        self.neg().max_hw().neg()
    }

    /// Adds a (1, C, 1, 1) bias to every position.
    pub fn add_channel_bias(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let s = self.shape();
        let bs = bias.shape();
        if bs != Shape::new(1, s.c(), 1, 1) {
            return Err(TensorError::ShapeMismatch {
                op: "add_channel_bias",
                lhs: s,
                rhs: bs,
            });
        }
        self.add(bias.broadcast_to(s)?)
    }

    /// Multiplies by `other` after broadcasting it to `self`'s shape.
    pub fn mul_broadcast(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let s = self.shape();
        self.mul(other.broadcast_to(s)?)
    }

    pub fn add_broadcast(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let s = self.shape();
        self.add(other.broadcast_to(s)?)
    }

    /// Per-sample, per-channel normalization over H x W to zero mean and unit
    /// variance.
    pub fn instance_norm(self, eps: T) -> Result<Var<'t, T>> {
        let s = self.shape();
        let centered = self.sub(self.mean_hw().broadcast_to(s)?)?;
        let var = centered.mul(centered)?.mean_hw();
        let inv_std = var.add_scalar(eps).pow(T::lit(-0.5));
        centered.mul_broadcast(inv_std)
    }

    /// Instance normalization followed by a per-class affine transform.
    /// `scale_table` and `shift_table` have shape (K, C, 1, 1).
    pub fn cond_instance_norm(
        self,
        labels: &[usize],
        scale_table: Var<'t, T>,
        shift_table: Var<'t, T>,
        eps: T,
    ) -> Result<Var<'t, T>> {
        let s = self.shape();
        for table in [scale_table, shift_table] {
            let ts = table.shape();
            if ts.c() != s.c() || ts.h() != 1 || ts.w() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "cond_instance_norm (table)",
                    lhs: s,
                    rhs: ts,
                });
            }
        }
        if labels.len() != s.n() {
            return Err(TensorError::invalid(
                "cond_instance_norm",
                format!("{} labels for batch of {}", labels.len(), s.n()),
            ));
        }
        let labels: Rc<[usize]> = labels.into();
        let scale = scale_table.select_rows(Rc::clone(&labels))?;
        let shift = shift_table.select_rows(labels)?;
        self.instance_norm(eps)?
            .mul_broadcast(scale)?
            .add_broadcast(shift)
    }

    /// Affine map on flattened samples: weights (F_out, F_in, 1, 1), bias
    /// (1, F_out, 1, 1). Output (N, F_out, 1, 1).
    pub fn dense(self, weights: Var<'t, T>, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let flat = self.flatten();
        let ws = weights.shape();
        if ws.c() != flat.shape().c() || ws.h() != 1 || ws.w() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "dense",
                lhs: flat.shape(),
                rhs: ws,
            });
        }
        flat.conv2d(weights, ConvGeom::new(1, 0))?.add_channel_bias(bias)
    }

    /// Log-softmax over the channel axis.
    pub fn log_softmax(self) -> Result<Var<'t, T>> {
        let s = self.shape();
        let max = self.tape.constant(kernels::max_channels(&self.value()));
        let shifted = self.sub(max.broadcast_to(s)?)?;
        let lse = shifted
            .exp()
            .sum_to(Shape::new(s.n(), 1, s.h(), s.w()))?
            .ln();
        shifted.sub(lse.broadcast_to(s)?)
    }

    pub fn softmax(self) -> Result<Var<'t, T>> {
        Ok(self.log_softmax()?.exp())
    }
}

/// Softmax over channels of a plain tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let s = logits.shape();
    let max = kernels::max_channels(logits);
    let plane = s.plane();
    let mut out = logits.clone();
    for n in 0..s.n() {
        for p in 0..plane {
            let m = max.data()[n * plane + p];
            let mut z = T::zero();
            for c in 0..s.c() {
                let i = (n * s.c() + c) * plane + p;
                let e = (logits.data()[i] - m).exp();
                out.data_mut()[i] = e;
                z += e;
            }
            for c in 0..s.c() {
                out.data_mut()[(n * s.c() + c) * plane + p] /= z;
            }
        }
    }
    out
}
