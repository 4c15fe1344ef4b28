use std::cell::RefCell;

use super::kernels::{self, ConvGeometry};
use super::{ensure_same_shape, ParamId, ParamStore, Real, Result, Tensor, TensorError};

pub type NodeId = usize;

/// A value produced on a [`Tape`].
///
/// `node` is `None` for constants and for everything computed on a tape that
/// is not recording; such values carry no gradient.
#[derive(Clone, Debug)]
pub struct Var<T> {
    value: Tensor<T>,
    node: Option<NodeId>,
}

impl<T: Real> Var<T> {
    pub fn constant(value: Tensor<T>) -> Self {
        Var { value, node: None }
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn into_value(self) -> Tensor<T> {
        self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    pub fn requires_grad(&self) -> bool {
        self.node.is_some()
    }
}

/// An input of a recorded op together with the value backward needs.
#[derive(Debug)]
struct Src<T> {
    node: Option<NodeId>,
    value: Tensor<T>,
}

impl<T: Real> From<&Var<T>> for Src<T> {
    fn from(v: &Var<T>) -> Self {
        Src { node: v.node, value: v.value.clone() }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf { param: Option<ParamId> },
    Conv2d { input: Src<T>, kernel: Src<T>, bias: Option<NodeId>, geom: ConvGeometry },
    ConvTranspose2d { input: Src<T>, kernel: Src<T>, bias: Option<NodeId>, geom: ConvGeometry },
    Nearest { input: NodeId, dims: [usize; 4], factor: usize },
    Prelu { input: Src<T>, slope: Src<T> },
    Relu { input: Src<T> },
    Tanh { input: NodeId, output: Tensor<T> },
    Add { a: Option<NodeId>, b: Option<NodeId> },
    Hadamard { a: Src<T>, b: Src<T> },
    Scale { input: NodeId, factor: T },
    MulScalar { input: Src<T>, scalar: Src<T> },
    AbsDiff { a: Src<T>, b: Src<T> },
    Concat { parts: Vec<(Option<NodeId>, usize)>, dims: [usize; 4] },
    Sum { input: NodeId, len: usize },
    Mse { pred: Src<T>, target: Src<T> },
}

#[derive(Debug)]
struct Record<T> {
    op: Op<T>,
    len: usize,
}

/// Ordered record of differentiable operations.
///
/// Ops are appended in execution order, so every op's inputs precede it and a
/// reverse sweep is a valid topological replay.
#[derive(Debug)]
pub struct Tape<T> {
    records: RefCell<Vec<Record<T>>>,
    recording: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { records: RefCell::new(Vec::new()), recording: true }
    }

    /// A tape that records nothing; values are freed as soon as they are dropped.
    pub fn inference() -> Self {
        Tape { records: RefCell::new(Vec::new()), recording: false }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.records.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op<T>, len: usize) -> NodeId {
        let mut records = self.records.borrow_mut();
        records.push(Record { op, len });
        records.len() - 1
    }

    fn emit(&self, value: Tensor<T>, tracked: bool, op: impl FnOnce() -> Op<T>) -> Var<T> {
        let node = (self.recording && tracked).then(|| self.push(op(), value.numel()));
        Var { value, node }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor<T>) -> Var<T> {
        self.emit(value, true, || Op::Leaf { param: None })
    }

    /// Registers a stored parameter as a leaf whose gradient flows back to the store.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var<T> {
        self.emit(store.value(id).clone(), true, || Op::Leaf { param: Some(id) })
    }

    pub fn conv2d(
        &self,
        input: &Var<T>,
        kernel: &Var<T>,
        bias: Option<&Var<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Var<T>> {
        let geom = ConvGeometry::conv(input.value.dims4("conv2d")?, kernel.value.dims4("conv2d")?, stride, padding)?;
        check_bias("conv2d", bias, geom.out_channels)?;
        let out = kernels::conv2d_forward(&geom, input.value.data(), kernel.value.data(), bias.map(|b| b.value.data()));
        let value = Tensor::from_parts(geom.output_shape().to_vec(), out);
        let tracked = input.node.is_some() || kernel.node.is_some() || bias.is_some_and(|b| b.node.is_some());
        Ok(self.emit(value, tracked, || Op::Conv2d {
            input: input.into(),
            kernel: kernel.into(),
            bias: bias.and_then(|b| b.node),
            geom,
        }))
    }

    /// Transposed convolution with kernel `[C, Cout, KH, KW]`; output extent
    /// `(H - 1) * stride - 2 * padding + KH`.
    pub fn conv_transpose2d(
        &self,
        input: &Var<T>,
        kernel: &Var<T>,
        bias: Option<&Var<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Var<T>> {
        let geom = ConvGeometry::transposed(
            input.value.dims4("conv_transpose2d")?,
            kernel.value.dims4("conv_transpose2d")?,
            stride,
            padding,
        )?;
        check_bias("conv_transpose2d", bias, geom.in_channels)?;
        let mut out = kernels::conv2d_backward_input(&geom, input.value.data(), kernel.value.data());
        if let Some(b) = bias {
            let plane = geom.in_h * geom.in_w;
            for (i, chunk) in out.chunks_mut(plane).enumerate() {
                let bv = b.value.data()[i % geom.in_channels];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
        }
        let value = Tensor::from_parts(geom.input_shape().to_vec(), out);
        let tracked = input.node.is_some() || kernel.node.is_some() || bias.is_some_and(|b| b.node.is_some());
        Ok(self.emit(value, tracked, || Op::ConvTranspose2d {
            input: input.into(),
            kernel: kernel.into(),
            bias: bias.and_then(|b| b.node),
            geom,
        }))
    }

    pub fn nearest_upsample(&self, input: &Var<T>, factor: usize) -> Result<Var<T>> {
        if factor == 0 {
            return Err(TensorError::InvalidGeometry { op: "nearest_upsample", detail: "factor 0".into() });
        }
        let dims = input.value.dims4("nearest_upsample")?;
        let [n, c, h, w] = dims;
        let out = kernels::nearest_upsample_forward(input.value.data(), dims, factor);
        let value = Tensor::from_parts(vec![n, c, h * factor, w * factor], out);
        Ok(self.emit(value, input.node.is_some(), || Op::Nearest { input: input.node.unwrap(), dims, factor }))
    }

    /// `x` where `x > 0`, `slope * x` elsewhere, with one learnable scalar slope.
    pub fn prelu(&self, input: &Var<T>, slope: &Var<T>) -> Result<Var<T>> {
        if !slope.value.is_scalar() {
            return Err(TensorError::ShapeMismatch {
                op: "prelu",
                detail: format!("slope must be a scalar, got {:?}", slope.shape()),
            });
        }
        let a = slope.value.item();
        let value = input.value.map(|x| if x > T::zero() { x } else { a * x });
        let tracked = input.node.is_some() || slope.node.is_some();
        Ok(self.emit(value, tracked, || Op::Prelu { input: input.into(), slope: slope.into() }))
    }

    pub fn relu(&self, input: &Var<T>) -> Var<T> {
        let value = input.value.map(|x| if x > T::zero() { x } else { T::zero() });
        self.emit(value, input.node.is_some(), || Op::Relu { input: input.into() })
    }

    pub fn tanh(&self, input: &Var<T>) -> Var<T> {
        let value = input.value.map(|x| x.tanh());
        let output = value.clone();
        self.emit(value, input.node.is_some(), || Op::Tanh { input: input.node.unwrap(), output })
    }

    pub fn add(&self, a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
        let value = zip_map("add", a, b, |x, y| x + y)?;
        Ok(self.emit(value, a.node.is_some() || b.node.is_some(), || Op::Add { a: a.node, b: b.node }))
    }

    pub fn hadamard(&self, a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
        let value = zip_map("hadamard", a, b, |x, y| x * y)?;
        Ok(self.emit(value, a.node.is_some() || b.node.is_some(), || Op::Hadamard { a: a.into(), b: b.into() }))
    }

    /// Multiplication by a fixed real.
    pub fn scale(&self, input: &Var<T>, factor: T) -> Var<T> {
        let value = input.value.map(|x| x * factor);
        self.emit(value, input.node.is_some(), || Op::Scale { input: input.node.unwrap(), factor })
    }

    /// Multiplication by a one-element tensor that may itself be learnable.
    pub fn mul_scalar(&self, input: &Var<T>, scalar: &Var<T>) -> Result<Var<T>> {
        if !scalar.value.is_scalar() {
            return Err(TensorError::ShapeMismatch {
                op: "mul_scalar",
                detail: format!("expected a scalar, got {:?}", scalar.shape()),
            });
        }
        let s = scalar.value.item();
        let value = input.value.map(|x| x * s);
        let tracked = input.node.is_some() || scalar.node.is_some();
        Ok(self.emit(value, tracked, || Op::MulScalar { input: input.into(), scalar: scalar.into() }))
    }

    /// `|a - b|`; the subgradient at `a == b` is taken as zero.
    pub fn abs_diff(&self, a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
        let value = zip_map("abs_diff", a, b, |x, y| (x - y).abs())?;
        Ok(self.emit(value, a.node.is_some() || b.node.is_some(), || Op::AbsDiff { a: a.into(), b: b.into() }))
    }

    /// Concatenates 4-d tensors along the channel axis, in order.
    pub fn concat_channels(&self, parts: &[&Var<T>]) -> Result<Var<T>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::ShapeMismatch { op: "concat_channels", detail: "no inputs".into() })?;
        let [n, _, h, w] = first.value.dims4("concat_channels")?;
        let mut channels = Vec::with_capacity(parts.len());
        for p in parts {
            let [pn, pc, ph, pw] = p.value.dims4("concat_channels")?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    detail: format!("{:?} vs {:?}", first.shape(), p.shape()),
                });
            }
            channels.push(pc);
        }
        let total: usize = channels.iter().sum();
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total * plane);
        for b in 0..n {
            for (p, &c) in parts.iter().zip(&channels) {
                out.extend_from_slice(&p.value.data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let value = Tensor::from_parts(vec![n, total, h, w], out);
        let tracked = parts.iter().any(|p| p.node.is_some());
        Ok(self.emit(value, tracked, || Op::Concat {
            parts: parts.iter().zip(&channels).map(|(p, &c)| (p.node, c)).collect(),
            dims: [n, total, h, w],
        }))
    }

    pub fn sum(&self, input: &Var<T>) -> Var<T> {
        let total: T = input.value.data().iter().copied().sum();
        let len = input.value.numel();
        self.emit(Tensor::scalar(total), input.node.is_some(), || Op::Sum { input: input.node.unwrap(), len })
    }

    /// Mean of squared differences over all elements.
    pub fn mse_loss(&self, pred: &Var<T>, target: &Var<T>) -> Result<Var<T>> {
        ensure_same_shape("mse_loss", pred.shape(), target.shape())?;
        let n = T::from_usize(pred.value.numel()).unwrap();
        let total: T = pred.value.data().iter().zip(target.value.data()).map(|(&p, &t)| (p - t) * (p - t)).sum();
        let tracked = pred.node.is_some() || target.node.is_some();
        Ok(self.emit(Tensor::scalar(total / n), tracked, || Op::Mse { pred: pred.into(), target: target.into() }))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: &Var<T>) -> Result<Gradients<T>> {
        if !loss.value.is_scalar() {
            return Err(TensorError::NotScalar(loss.shape().to_vec()));
        }
        let root = loss.node.ok_or(TensorError::NotRecorded)?;
        let records = self.records.borrow();
        if root >= records.len() {
            return Err(TensorError::NotRecorded);
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; root + 1];
        grads[root] = Some(vec![T::one()]);
        let mut leaves = Vec::new();

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            debug_assert_eq!(g.len(), records[id].len);
            match &records[id].op {
                Op::Leaf { param } => {
                    leaves.push((id, *param, g));
                }
                Op::Conv2d { input, kernel, bias, geom } => {
                    if let Some(p) = input.node {
                        let gi = kernels::conv2d_backward_input(geom, &g, kernel.value.data());
                        accumulate(&mut grads, p, gi);
                    }
                    if let Some(p) = kernel.node {
                        let gk = kernels::conv2d_backward_kernel(geom, input.value.data(), &g);
                        accumulate(&mut grads, p, gk);
                    }
                    if let Some(p) = bias {
                        let gb = kernels::channel_sums(&g, geom.batch, geom.out_channels, geom.out_h * geom.out_w);
                        accumulate(&mut grads, *p, gb);
                    }
                }
                Op::ConvTranspose2d { input, kernel, bias, geom } => {
                    if let Some(p) = input.node {
                        let gi = kernels::conv2d_forward(geom, &g, kernel.value.data(), None);
                        accumulate(&mut grads, p, gi);
                    }
                    if let Some(p) = kernel.node {
                        let gk = kernels::conv2d_backward_kernel(geom, &g, input.value.data());
                        accumulate(&mut grads, p, gk);
                    }
                    if let Some(p) = bias {
                        let gb = kernels::channel_sums(&g, geom.batch, geom.in_channels, geom.in_h * geom.in_w);
                        accumulate(&mut grads, *p, gb);
                    }
                }
                Op::Nearest { input, dims, factor } => {
                    let gi = kernels::nearest_upsample_backward(&g, *dims, *factor);
                    accumulate(&mut grads, *input, gi);
                }
                Op::Prelu { input, slope } => {
                    let a = slope.value.item();
                    let x = input.value.data();
                    if let Some(p) = input.node {
                        let gi = x.iter().zip(&g).map(|(&x, &g)| if x >= T::zero() { g } else { a * g }).collect();
                        accumulate(&mut grads, p, gi);
                    }
                    if let Some(p) = slope.node {
                        let gs: T = x.iter().zip(&g).filter(|(&x, _)| x < T::zero()).map(|(&x, &g)| x * g).sum();
                        accumulate(&mut grads, p, vec![gs]);
                    }
                }
                Op::Relu { input } => {
                    let gi = input
                        .value
                        .data()
                        .iter()
                        .zip(&g)
                        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, input.node.unwrap(), gi);
                }
                Op::Tanh { input, output } => {
                    let gi = output.data().iter().zip(&g).map(|(&y, &g)| (T::one() - y * y) * g).collect();
                    accumulate(&mut grads, *input, gi);
                }
                Op::Add { a, b } => match (a, b) {
                    (Some(a), Some(b)) => {
                        accumulate(&mut grads, *a, g.clone());
                        accumulate(&mut grads, *b, g);
                    }
                    (Some(p), None) | (None, Some(p)) => accumulate(&mut grads, *p, g),
                    (None, None) => {}
                },
                Op::Hadamard { a, b } => {
                    if let Some(p) = a.node {
                        accumulate(&mut grads, p, mul(&g, b.value.data()));
                    }
                    if let Some(p) = b.node {
                        accumulate(&mut grads, p, mul(&g, a.value.data()));
                    }
                }
                Op::Scale { input, factor } => {
                    let gi = g.iter().map(|&g| g * *factor).collect();
                    accumulate(&mut grads, *input, gi);
                }
                Op::MulScalar { input, scalar } => {
                    if let Some(p) = input.node {
                        let s = scalar.value.item();
                        accumulate(&mut grads, p, g.iter().map(|&g| g * s).collect());
                    }
                    if let Some(p) = scalar.node {
                        let gs: T = g.iter().zip(input.value.data()).map(|(&g, &x)| g * x).sum();
                        accumulate(&mut grads, p, vec![gs]);
                    }
                }
                Op::AbsDiff { a, b } => {
                    let sign: Vec<T> = a
                        .value
                        .data()
                        .iter()
                        .zip(b.value.data())
                        .zip(&g)
                        .map(|((&x, &y), &g)| {
                            if x > y {
                                g
                            } else if x < y {
                                -g
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    if let Some(p) = b.node {
                        accumulate(&mut grads, p, sign.iter().map(|&s| -s).collect());
                    }
                    if let Some(p) = a.node {
                        accumulate(&mut grads, p, sign);
                    }
                }
                Op::Concat { parts, dims } => {
                    let [n, total, h, w] = *dims;
                    let plane = h * w;
                    let mut offset = 0;
                    for &(node, c) in parts {
                        if let Some(p) = node {
                            let mut gi = Vec::with_capacity(n * c * plane);
                            for b in 0..n {
                                let start = (b * total + offset) * plane;
                                gi.extend_from_slice(&g[start..start + c * plane]);
                            }
                            accumulate(&mut grads, p, gi);
                        }
                        offset += c;
                    }
                }
                Op::Sum { input, len } => {
                    accumulate(&mut grads, *input, vec![g[0]; *len]);
                }
                Op::Mse { pred, target } => {
                    let n = T::from_usize(pred.value.numel()).unwrap();
                    let k = (T::one() + T::one()) * g[0] / n;
                    let diff: Vec<T> =
                        pred.value.data().iter().zip(target.value.data()).map(|(&p, &t)| k * (p - t)).collect();
                    if let Some(p) = target.node {
                        accumulate(&mut grads, p, diff.iter().map(|&d| -d).collect());
                    }
                    if let Some(p) = pred.node {
                        accumulate(&mut grads, p, diff);
                    }
                }
            }
        }
        Ok(Gradients { leaves })
    }
}

fn check_bias<T: Real>(op: &'static str, bias: Option<&Var<T>>, channels: usize) -> Result<()> {
    match bias {
        Some(b) if b.shape() != [channels] => {
            Err(TensorError::ShapeMismatch { op, detail: format!("bias shape {:?}, expected [{channels}]", b.shape()) })
        }
        _ => Ok(()),
    }
}

fn zip_map<T: Real>(op: &'static str, a: &Var<T>, b: &Var<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    ensure_same_shape(op, a.shape(), b.shape())?;
    let data = a.value.data().iter().zip(b.value.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_parts(a.shape().to_vec(), data))
}

fn mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], node: NodeId, g: Vec<T>) {
    match &mut grads[node] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a += v),
        slot @ None => *slot = Some(g),
    }
}

/// Leaf gradients produced by one backward sweep.
#[derive(Debug)]
pub struct Gradients<T> {
    leaves: Vec<(NodeId, Option<ParamId>, Vec<T>)>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a leaf, or `None` if the loss does not depend on it.
    pub fn get(&self, var: &Var<T>) -> Option<Tensor<T>> {
        let node = var.node?;
        self.leaves
            .iter()
            .find(|(id, _, _)| *id == node)
            .map(|(_, _, g)| Tensor::from_parts(var.shape().to_vec(), g.clone()))
    }

    /// Whether the loss reached parameter `id` on this tape.
    pub fn has_param(&self, id: ParamId) -> bool {
        self.leaves.iter().any(|(_, p, _)| *p == Some(id))
    }

    /// Adds every parameter gradient into the store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>) {
        for (_, param, g) in &self.leaves {
            if let Some(id) = param {
                store.accumulate_grad(*id, g);
            }
        }
    }
}
