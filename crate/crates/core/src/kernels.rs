//! Raw (non-recording) tensor kernels. The tape in [`crate::tape`] wraps
//! these with gradient bookkeeping.

use crate::error::{Result, TensorError};
use crate::{par, Scalar, Shape, Tensor};

/// Stride and symmetric zero padding of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub const fn new(stride: usize, pad: usize) -> Self {
        ConvGeom { stride, pad }
    }

    /// "same"-style geometry for an odd kernel size.
    pub const fn same(k: usize, stride: usize) -> Self {
        ConvGeom {
            stride,
            pad: (k - 1) / 2,
        }
    }

    pub fn out_extent(&self, input: usize, k: usize) -> Option<usize> {
        if self.stride == 0 || input + 2 * self.pad < k {
            return None;
        }
        Some((input + 2 * self.pad - k) / self.stride + 1)
    }

    fn is_pointwise(&self, kh: usize, kw: usize) -> bool {
        kh == 1 && kw == 1 && self.stride == 1 && self.pad == 0
    }
}

struct ColGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl ColGeom {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }
    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Output columns `[lo, hi)` whose input column `o * stride + k - pad`
/// falls inside `0..extent`.
fn valid_range(out: usize, extent: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k).div_ceil(stride).min(out);
    let hi = if extent + pad > k { ((extent + pad - k - 1) / stride + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

/// Appends the (C*kH*kW, g*Ho*Wo) patch matrix of `samples` to `col`, row
/// by row, with each row holding the samples' patches side by side.
fn im2col<T: Scalar>(samples: &[&[T]], g: &ColGeom, col: &mut Vec<T>) {
    for ci in 0..g.c {
        for ky in 0..g.kh {
            let (ylo, yhi) = valid_range(g.ho, g.h, ky, g.stride, g.pad);
            for kx in 0..g.kw {
                let (xlo, xhi) = valid_range(g.wo, g.w, kx, g.stride, g.pad);
                let ix0 = (xlo * g.stride + kx).wrapping_sub(g.pad);
                for x in samples {
                    let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
                    col.resize(col.len() + ylo * g.wo, T::zero());
                    for oy in ylo..yhi {
                        let iy = oy * g.stride + ky - g.pad;
                        let src = &plane[iy * g.w..(iy + 1) * g.w];
                        col.resize(col.len() + xlo, T::zero());
                        if xhi > xlo {
                            if g.stride == 1 {
                                col.extend_from_slice(&src[ix0..ix0 + xhi - xlo]);
                            } else {
                                col.extend(src[ix0..].iter().step_by(g.stride).take(xhi - xlo).copied());
                            }
                        }
                        col.resize(col.len() + g.wo - xhi, T::zero());
                    }
                    col.resize(col.len() + (g.ho - yhi) * g.wo, T::zero());
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns `[off, off + ho*wo)` into `x`,
/// which must start zeroed.
fn col2im<T: Scalar>(col: &[T], g: &ColGeom, x: &mut [T], ld: usize, off: usize) {
    for ci in 0..g.c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (ylo, yhi) = valid_range(g.ho, g.h, ky, g.stride, g.pad);
            for kx in 0..g.kw {
                let (xlo, xhi) = valid_range(g.wo, g.w, kx, g.stride, g.pad);
                let row = (ci * g.kh + ky) * g.kw + kx;
                let src = &col[row * ld + off..row * ld + off + g.ho * g.wo];
                for oy in ylo..yhi {
                    let iy = oy * g.stride + ky - g.pad;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let seg = &src[oy * g.wo + xlo..oy * g.wo + xhi];
                    let ix0 = xlo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        for (d, s) in dst[ix0..ix0 + seg.len()].iter_mut().zip(seg) {
                            *d += *s;
                        }
                    } else {
                        for (d, s) in dst[ix0..].iter_mut().step_by(g.stride).zip(seg) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
}

/// Samples per GEMM: enough that each call sees at least `GEMM_COLS`
/// columns. Depends only on the shape, so results do not depend on the
/// thread count.
const GEMM_COLS: usize = 256;

fn group_len(n: usize, p: usize) -> usize {
    GEMM_COLS.div_ceil(p.max(1)).clamp(1, n.max(1))
}

fn col_geom(x: Shape, kh: usize, kw: usize, geom: ConvGeom, op: &'static str) -> Result<ColGeom> {
    if geom.stride == 0 {
        return Err(TensorError::invalid(op, "stride must be at least 1"));
    }
    let ho = geom.out_extent(x.h(), kh);
    let wo = geom.out_extent(x.w(), kw);
    match (ho, wo) {
        (Some(ho), Some(wo)) => Ok(ColGeom {
            c: x.c(),
            h: x.h(),
            w: x.w(),
            kh,
            kw,
            ho,
            wo,
            stride: geom.stride,
            pad: geom.pad,
        }),
        _ => Err(TensorError::invalid(
            op,
            format!("kernel {kh}x{kw} does not fit input {x} with {geom:?}"),
        )),
    }
}

/// Cross-correlation of `x` (N, Ci, H, W) with `kernel` (Co, Ci, kH, kW).
pub fn conv2d<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, geom: ConvGeom) -> Result<Tensor<T>> {
    let (xs, ks) = (x.shape(), kernel.shape());
    if ks.c() != xs.c() {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d (kernel in-channels vs input channels)",
            lhs: xs,
            rhs: ks,
        });
    }
    let cg = col_geom(xs, ks.h(), ks.w(), geom, "conv2d")?;
    let co = ks.n();
    let (k, p) = (cg.rows(), cg.cols());
    let out_shape = Shape::new(xs.n(), co, cg.ho, cg.wo);
    let mut out = vec![T::zero(); out_shape.numel()];
    let pointwise = geom.is_pointwise(ks.h(), ks.w());
    let gl = group_len(xs.n(), p);
    par::for_each_chunk(&mut out, gl * co * p, |gi, out_g| {
        let g = out_g.len() / (co * p);
        let ld = g * p;
        let col = patches(x, gi * gl, g, &cg, pointwise);
        if g == 1 {
            T::gemm(co, k, p, kernel.data(), (k as isize, 1), &col, (p as isize, 1), out_g, (p as isize, 1));
            return;
        }
        let mut tmp = vec![T::zero(); co * ld];
        T::gemm(co, k, ld, kernel.data(), (k as isize, 1), &col, (ld as isize, 1), &mut tmp, (ld as isize, 1));
        for j in 0..g {
            for o in 0..co {
                out_g[(j * co + o) * p..(j * co + o + 1) * p].copy_from_slice(&tmp[o * ld + j * p..o * ld + (j + 1) * p]);
            }
        }
    });
    Tensor::from_vec(out_shape, out)
}

/// Gathers samples `[s0, s0 + g)` of an (N, C, P) buffer into a (C, g*P)
/// matrix.
fn gather_columns<T: Scalar>(t: &Tensor<T>, s0: usize, g: usize, c: usize, p: usize) -> Vec<T> {
    let mut m = Vec::with_capacity(c * g * p);
    for r in 0..c {
        for j in 0..g {
            m.extend_from_slice(&t.sample(s0 + j)[r * p..(r + 1) * p]);
        }
    }
    m
}

/// Patch matrix of samples `[s0, s0 + g)` of `x`.
fn patches<T: Scalar>(x: &Tensor<T>, s0: usize, g: usize, cg: &ColGeom, pointwise: bool) -> Vec<T> {
    if pointwise {
        return gather_columns(x, s0, g, cg.c, cg.cols());
    }
    let samples: Vec<&[T]> = (s0..s0 + g).map(|n| x.sample(n)).collect();
    let mut col = Vec::with_capacity(cg.rows() * g * cg.cols());
    im2col(&samples, cg, &mut col);
    col
}

/// Adjoint of [`conv2d`] with respect to its input: maps an output-shaped
/// gradient back to an input of extent `in_hw`.
pub fn conv2d_input_grad<T: Scalar>(
    grad: &Tensor<T>,
    kernel: &Tensor<T>,
    in_hw: (usize, usize),
    geom: ConvGeom,
) -> Result<Tensor<T>> {
    let (gs, ks) = (grad.shape(), kernel.shape());
    let in_shape = Shape::new(gs.n(), ks.c(), in_hw.0, in_hw.1);
    let cg = col_geom(in_shape, ks.h(), ks.w(), geom, "conv2d_input_grad")?;
    if gs.c() != ks.n() || gs.h() != cg.ho || gs.w() != cg.wo {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_input_grad",
            lhs: gs,
            rhs: ks,
        });
    }
    let co = ks.n();
    let (k, p) = (cg.rows(), cg.cols());
    let mut out = vec![T::zero(); in_shape.numel()];
    let pointwise = geom.is_pointwise(ks.h(), ks.w());
    let gl = group_len(gs.n(), p);
    let sample_len = in_shape.sample_len();
    par::for_each_chunk(&mut out, gl * sample_len, |gi, out_g| {
        let g = out_g.len() / sample_len;
        let ld = g * p;
        let gm = gather_columns(grad, gi * gl, g, co, p);
        let mut col = vec![T::zero(); k * ld];
        T::gemm(k, co, ld, kernel.data(), (1, k as isize), &gm, (ld as isize, 1), &mut col, (ld as isize, 1));
        for (j, out_n) in out_g.chunks_exact_mut(sample_len).enumerate() {
            if pointwise {
                for (r, dst) in out_n.chunks_exact_mut(p).enumerate() {
                    dst.copy_from_slice(&col[r * ld + j * p..r * ld + (j + 1) * p]);
                }
            } else {
                col2im(&col, &cg, out_n, ld, j * p);
            }
        }
    });
    Tensor::from_vec(in_shape, out)
}

/// Adjoint of [`conv2d`] with respect to its kernel.
pub fn conv2d_kernel_grad<T: Scalar>(
    x: &Tensor<T>,
    grad: &Tensor<T>,
    kernel_hw: (usize, usize),
    geom: ConvGeom,
) -> Result<Tensor<T>> {
    let (xs, gs) = (x.shape(), grad.shape());
    let cg = col_geom(xs, kernel_hw.0, kernel_hw.1, geom, "conv2d_kernel_grad")?;
    if gs.n() != xs.n() || gs.h() != cg.ho || gs.w() != cg.wo {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_kernel_grad",
            lhs: xs,
            rhs: gs,
        });
    }
    let co = gs.c();
    let (k, p) = (cg.rows(), cg.cols());
    let pointwise = geom.is_pointwise(kernel_hw.0, kernel_hw.1);
    let gl = group_len(xs.n(), p);
    let partials = par::map_indices(xs.n().div_ceil(gl), |gi| {
        let s0 = gi * gl;
        let g = gl.min(xs.n() - s0);
        let ld = g * p;
        let col = patches(x, s0, g, &cg, pointwise);
        let gm = gather_columns(grad, s0, g, co, p);
        let mut dw = vec![T::zero(); co * k];
        T::gemm(co, ld, k, &gm, (ld as isize, 1), &col, (1, ld as isize), &mut dw, (k as isize, 1));
        dw
    });
    let mut out = vec![T::zero(); co * k];
    for part in &partials {
        for (o, v) in out.iter_mut().zip(part) {
            *o += *v;
        }
    }
    Tensor::from_vec([co, xs.c(), kernel_hw.0, kernel_hw.1], out)
}

/// Replicates size-1 extents of `t` up to `target`.
pub fn broadcast_to<T: Scalar>(t: &Tensor<T>, target: Shape) -> Result<Tensor<T>> {
    let s = t.shape();
    if !s.broadcasts_to(target) {
        return Err(TensorError::ShapeMismatch {
            op: "broadcast_to",
            lhs: s,
            rhs: target,
        });
    }
    if s == target {
        return Ok(t.clone());
    }
    let st = s.strides();
    let bs: [usize; 4] = std::array::from_fn(|i| if s.0[i] == 1 { 0 } else { st[i] });
    let src = t.data();
    let [n, c, h, w] = target.0;
    let mut out = Vec::with_capacity(target.numel());
    for a in 0..n {
        for b in 0..c {
            for y in 0..h {
                let base = a * bs[0] + b * bs[1] + y * bs[2];
                if bs[3] == 0 {
                    out.extend(std::iter::repeat_n(src[base], w));
                } else {
                    out.extend_from_slice(&src[base..base + w]);
                }
            }
        }
    }
    Tensor::from_vec(target, out)
}

/// Sums `t` over every axis where `target` has extent 1.
pub fn sum_to<T: Scalar>(t: &Tensor<T>, target: Shape) -> Result<Tensor<T>> {
    let s = t.shape();
    if !target.broadcasts_to(s) {
        return Err(TensorError::ShapeMismatch {
            op: "sum_to",
            lhs: s,
            rhs: target,
        });
    }
    if s == target {
        return Ok(t.clone());
    }
    let st = target.strides();
    let bs: [usize; 4] = std::array::from_fn(|i| if target.0[i] == 1 { 0 } else { st[i] });
    let mut out = vec![T::zero(); target.numel()];
    let src = t.data();
    let [n, c, h, w] = s.0;
    let mut i = 0;
    for a in 0..n {
        for b in 0..c {
            for y in 0..h {
                let base = a * bs[0] + b * bs[1] + y * bs[2];
                if bs[3] == 0 {
                    let mut acc = T::zero();
                    for v in &src[i..i + w] {
                        acc += *v;
                    }
                    out[base] += acc;
                } else {
                    for (o, v) in out[base..base + w].iter_mut().zip(&src[i..i + w]) {
                        *o += *v;
                    }
                }
                i += w;
            }
        }
    }
    Tensor::from_vec(target, out)
}

pub fn avg_pool<T: Scalar>(t: &Tensor<T>, f: usize) -> Result<Tensor<T>> {
    let s = t.shape();
    if f == 0 || s.h() % f != 0 || s.w() % f != 0 {
        return Err(TensorError::invalid(
            "downsample_avg",
            format!("extent {}x{} not divisible by factor {f}", s.h(), s.w()),
        ));
    }
    let (ho, wo) = (s.h() / f, s.w() / f);
    let out_shape = Shape::new(s.n(), s.c(), ho, wo);
    let inv = T::one() / T::lit((f * f) as f64);
    let src = t.data();
    let mut out = vec![T::zero(); out_shape.numel()];
    for (pi, dst) in out.chunks_mut(ho * wo).enumerate() {
        let plane = &src[pi * s.plane()..(pi + 1) * s.plane()];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = T::zero();
                for dy in 0..f {
                    let row = &plane[(oy * f + dy) * s.w() + ox * f..][..f];
                    for v in row {
                        acc += *v;
                    }
                }
                dst[oy * wo + ox] = acc * inv;
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}

pub fn upsample_nearest<T: Scalar>(t: &Tensor<T>, f: usize) -> Result<Tensor<T>> {
    if f == 0 {
        return Err(TensorError::invalid("upsample_nearest", "factor must be positive"));
    }
    let s = t.shape();
    let (ho, wo) = (s.h() * f, s.w() * f);
    let out_shape = Shape::new(s.n(), s.c(), ho, wo);
    let src = t.data();
    let mut out = Vec::with_capacity(out_shape.numel());
    for plane in src.chunks(s.plane().max(1)).take(s.n() * s.c()) {
        for y in 0..ho {
            let row = &plane[(y / f) * s.w()..][..s.w()];
            for v in row {
                out.extend(std::iter::repeat_n(*v, f));
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}

pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n() != sb.n() || sa.h() != sb.h() || sa.w() != sb.w() {
        return Err(TensorError::ShapeMismatch {
            op: "concat_channels",
            lhs: sa,
            rhs: sb,
        });
    }
    let out_shape = sa.with_channels(sa.c() + sb.c());
    let mut out = Vec::with_capacity(out_shape.numel());
    for n in 0..sa.n() {
        out.extend_from_slice(a.sample(n));
        out.extend_from_slice(b.sample(n));
    }
    Tensor::from_vec(out_shape, out)
}

pub fn slice_channels<T: Scalar>(t: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let s = t.shape();
    if start + len > s.c() {
        return Err(TensorError::invalid(
            "slice_channels",
            format!("channels [{start}, {}) out of range for {s}", start + len),
        ));
    }
    let out_shape = s.with_channels(len);
    let plane = s.plane();
    let mut out = Vec::with_capacity(out_shape.numel());
    for n in 0..s.n() {
        out.extend_from_slice(&t.sample(n)[start * plane..(start + len) * plane]);
    }
    Tensor::from_vec(out_shape, out)
}

/// Places `t` at channel offset `start` inside a zero tensor of `total`
/// channels.
pub fn embed_channels<T: Scalar>(t: &Tensor<T>, start: usize, total: usize) -> Result<Tensor<T>> {
    let s = t.shape();
    if start + s.c() > total {
        return Err(TensorError::invalid(
            "embed_channels",
            format!("{} channels at offset {start} exceed {total}", s.c()),
        ));
    }
    let out_shape = s.with_channels(total);
    let plane = s.plane();
    let mut out = vec![T::zero(); out_shape.numel()];
    for (n, dst) in out.chunks_mut(total * plane).enumerate().take(s.n()) {
        dst[start * plane..(start + s.c()) * plane].copy_from_slice(t.sample(n));
    }
    Tensor::from_vec(out_shape, out)
}

/// Picks sample `labels[i]` of `table` as output sample `i`.
pub fn select_rows<T: Scalar>(table: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let s = table.shape();
    let mut out = Vec::with_capacity(labels.len() * s.sample_len());
    for &l in labels {
        if l >= s.n() {
            return Err(TensorError::Label {
                label: l,
                classes: s.n(),
            });
        }
        out.extend_from_slice(table.sample(l));
    }
    Tensor::from_vec([labels.len(), s.c(), s.h(), s.w()], out)
}

/// Adjoint of [`select_rows`]: accumulates sample `i` of `t` into row
/// `labels[i]` of a `rows`-row table.
pub fn scatter_rows<T: Scalar>(t: &Tensor<T>, labels: &[usize], rows: usize) -> Result<Tensor<T>> {
    let s = t.shape();
    if labels.len() != s.n() {
        return Err(TensorError::invalid(
            "scatter_rows",
            format!("{} labels for batch of {}", labels.len(), s.n()),
        ));
    }
    let len = s.sample_len();
    let mut out = vec![T::zero(); rows * len];
    for (i, &l) in labels.iter().enumerate() {
        if l >= rows {
            return Err(TensorError::Label { label: l, classes: rows });
        }
        for (o, v) in out[l * len..(l + 1) * len].iter_mut().zip(t.sample(i)) {
            *o += *v;
        }
    }
    Tensor::from_vec([rows, s.c(), s.h(), s.w()], out)
}

/// Per-(sample, channel) maximum over H x W together with a one-hot mask
/// marking the first position attaining it.
pub fn max_hw<T: Scalar>(t: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let s = t.shape();
    let plane = s.plane().max(1);
    let mut vals = Vec::with_capacity(s.n() * s.c());
    let mut mask = vec![T::zero(); s.numel()];
    for (pi, chunk) in t.data().chunks(plane).enumerate() {
        let mut best = 0;
        for (i, v) in chunk.iter().enumerate() {
            if *v > chunk[best] {
                best = i;
            }
        }
        vals.push(chunk[best]);
        mask[pi * plane + best] = T::one();
    }
    (
        Tensor::from_vec([s.n(), s.c(), 1, 1], vals).expect("max_hw shape"),
        Tensor::from_vec(s, mask).expect("max_hw mask shape"),
    )
}

/// Per-(sample, position) maximum over channels, shape (N, 1, H, W).
pub fn max_channels<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let s = t.shape();
    let plane = s.plane();
    let mut out = vec![T::neg_infinity(); s.n() * plane];
    for n in 0..s.n() {
        let sample = t.sample(n);
        let dst = &mut out[n * plane..(n + 1) * plane];
        for c in 0..s.c() {
            for (d, v) in dst.iter_mut().zip(&sample[c * plane..(c + 1) * plane]) {
                *d = d.max(*v);
            }
        }
    }
    Tensor::from_vec([s.n(), 1, s.h(), s.w()], out).expect("max_channels shape")
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn softplus<T: Scalar>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

#[inline]
pub fn leaky_relu<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

#[inline]
pub fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}
