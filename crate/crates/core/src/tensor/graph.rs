use std::cell::{Cell, RefCell};

use super::kernels::{self, ConvGeometry};
use super::Tensor;
use crate::error::{Error, Result};

/// A deliberately wrong backward rule, used to prove that the gradient
/// checker and the `verify` suite catch broken derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BackwardFault {
    /// Multiply every elementwise-product gradient by this factor.
    ScaleMulGrad(f64),
}

thread_local! {
    static FAULT: Cell<Option<BackwardFault>> = const { Cell::new(None) };
}

/// Runs `f` with `fault` active for every [`Graph`] created on this thread
/// inside the closure.
pub fn with_backward_fault<R>(fault: BackwardFault, f: impl FnOnce() -> R) -> R {
    struct Reset(Option<BackwardFault>);
    impl Drop for Reset {
        fn drop(&mut self) {
            FAULT.with(|c| c.set(self.0));
        }
    }
    let _reset = Reset(FAULT.with(|c| c.replace(Some(fault))));
    f()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    UpsampleNearest2x,
    MaxPool2x,
    AvgPool2x,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    ScaleBy(usize, usize),
    Lerp {
        a: usize,
        b: usize,
        alpha: usize,
    },
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Conv2d {
        input: usize,
        kernel: usize,
        geom: Box<ConvGeometry>,
    },
    AddRowBias(usize, usize),
    AddChannelBias(usize, usize),
    Sigmoid(usize),
    Softmax(usize),
    LogClamped(usize, f64),
    Sum(usize),
    Mean(usize),
    SumLastAxis(usize),
    GlobalAvgPool(usize),
    Upsample2x(usize),
    MaxPool2x(usize, Vec<usize>),
    AvgPool2x(usize),
    Gather(usize, Vec<usize>),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only operation tape. Node ids are topologically ordered by
/// construction: an operation can only reference nodes that already exist.
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    fault: Option<BackwardFault>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            fault: FAULT.with(|c| c.get()),
        }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value,
            requires_grad,
            grad: None,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients of earlier
    /// backward calls are discarded; within one call, contributions from
    /// every path into a node are summed.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        assert!(std::ptr::eq(loss.graph, self), "loss belongs to another graph");
        let mut nodes = self.nodes.borrow_mut();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        for node in nodes.iter_mut() {
            node.grad = None;
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !nodes[id].requires_grad {
                continue;
            }
            self.propagate(&nodes, id, &g, &mut grads);
            let shape = nodes[id].value.shape().to_vec();
            nodes[id].grad = Some(Tensor::new(shape, g).expect("grad matches value"));
        }
        Ok(())
    }

    fn propagate(&self, nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |i: usize| nodes[i].value.data();
        let mut send = |i: usize, contribution: Vec<f64>| {
            if !nodes[i].requires_grad {
                return;
            }
            match &mut grads[i] {
                Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, c)| *a += c),
                slot @ None => *slot = Some(contribution),
            }
        };
        let out = nodes[id].value.data();
        match &nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let k = match self.fault {
                    Some(BackwardFault::ScaleMulGrad(f)) => f,
                    None => 1.0,
                };
                let (av, bv) = (val(*a), val(*b));
                send(*a, g.iter().zip(bv).map(|(g, b)| k * g * b).collect());
                send(*b, g.iter().zip(av).map(|(g, a)| k * g * a).collect());
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                send(*a, g.iter().zip(bv).map(|(g, b)| g / b).collect());
                send(
                    *b,
                    g.iter()
                        .zip(av.iter().zip(bv))
                        .map(|(g, (a, b))| -g * a / (b * b))
                        .collect(),
                );
            }
            Op::Scale(a, c) => send(*a, g.iter().map(|v| v * c).collect()),
            Op::AddScalar(a) => send(*a, g.to_vec()),
            Op::ScaleBy(x, s) => {
                let sv = val(*s)[0];
                send(*x, g.iter().map(|v| v * sv).collect());
                send(*s, vec![g.iter().zip(val(*x)).map(|(g, x)| g * x).sum()]);
            }
            Op::Lerp { a, b, alpha } => {
                let t = val(*alpha)[0];
                send(*a, g.iter().map(|v| v * t).collect());
                send(*b, g.iter().map(|v| v * (1.0 - t)).collect());
                let d: f64 = g
                    .iter()
                    .zip(val(*a).iter().zip(val(*b)))
                    .map(|(g, (a, b))| g * (a - b))
                    .sum();
                send(*alpha, vec![d]);
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (nodes[*a].value.shape(), nodes[*b].value.shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if nodes[*a].requires_grad {
                    send(*a, kernels::matmul_bt(g, val(*b), m, n, k));
                }
                if nodes[*b].requires_grad {
                    send(*b, kernels::matmul_at(val(*a), g, m, k, n));
                }
            }
            Op::Transpose(a) => {
                let s = nodes[id].value.shape();
                send(*a, kernels::transpose(g, s[0], s[1]));
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::Conv2d { input, kernel, geom } => {
                let (di, dk) = geom.conv_backward(
                    val(*input),
                    val(*kernel),
                    g,
                    nodes[*input].requires_grad,
                    nodes[*kernel].requires_grad,
                );
                if let Some(di) = di {
                    send(*input, di);
                }
                if let Some(dk) = dk {
                    send(*kernel, dk);
                }
            }
            Op::AddRowBias(x, b) => {
                let n = val(*b).len();
                let mut db = vec![0.0; n];
                for row in g.chunks(n) {
                    db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                }
                send(*x, g.to_vec());
                send(*b, db);
            }
            Op::AddChannelBias(x, b) => {
                let c = val(*b).len();
                let plane = g.len() / c;
                let db = g.chunks(plane).map(|p| p.iter().sum()).collect();
                send(*x, g.to_vec());
                send(*b, db);
            }
            Op::Sigmoid(a) => send(*a, g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect()),
            Op::Softmax(a) => {
                let n = *nodes[id].value.shape().last().unwrap();
                let mut dx = vec![0.0; g.len()];
                for ((gr, yr), dr) in g.chunks(n).zip(out.chunks(n)).zip(dx.chunks_mut(n)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                    for ((d, g), y) in dr.iter_mut().zip(gr).zip(yr) {
                        *d = y * (g - dot);
                    }
                }
                send(*a, dx);
            }
            Op::LogClamped(a, eps) => send(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, x)| if *x > *eps { g / x } else { 0.0 })
                    .collect(),
            ),
            Op::Sum(a) => send(*a, vec![g[0]; val(*a).len()]),
            Op::Mean(a) => {
                let n = val(*a).len();
                send(*a, vec![g[0] / n as f64; n]);
            }
            Op::SumLastAxis(a) => {
                let n = *nodes[*a].value.shape().last().unwrap();
                send(*a, g.iter().flat_map(|&v| std::iter::repeat_n(v, n)).collect());
            }
            Op::GlobalAvgPool(a) => {
                let s = nodes[*a].value.shape();
                let plane = s[1] * s[2];
                let scale = 1.0 / plane as f64;
                send(
                    *a,
                    g.iter().flat_map(|&v| std::iter::repeat_n(v * scale, plane)).collect(),
                );
            }
            Op::Upsample2x(a) => {
                let s = nodes[*a].value.shape();
                let (c, h, w) = (s[0], s[1], s[2]);
                let ow = 2 * w;
                let mut dx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for y in 0..2 * h {
                        for x in 0..ow {
                            dx[(ch * h + y / 2) * w + x / 2] += g[(ch * 2 * h + y) * ow + x];
                        }
                    }
                }
                send(*a, dx);
            }
            Op::MaxPool2x(a, arg) => {
                let mut dx = vec![0.0; val(*a).len()];
                for (gv, &src) in g.iter().zip(arg) {
                    dx[src] += gv;
                }
                send(*a, dx);
            }
            Op::AvgPool2x(a) => {
                let s = nodes[*a].value.shape();
                let (c, h, w) = (s[0], s[1], s[2]);
                let (oh, ow) = (h / 2, w / 2);
                let mut dx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for y in 0..h {
                        for x in 0..w {
                            dx[(ch * h + y) * w + x] = g[(ch * oh + y / 2) * ow + x / 2] / 4.0;
                        }
                    }
                }
                send(*a, dx);
            }
            Op::Gather(a, idx) => {
                let mut dx = vec![0.0; val(*a).len()];
                for (gv, &i) in g.iter().zip(idx) {
                    dx[i] += gv;
                }
                send(*a, dx);
            }
        }
    }
}

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

fn bad_shape(op: &'static str, shape: &[usize], reason: impl Into<String>) -> Error {
    Error::InvalidShape {
        op,
        shape: shape.to_vec(),
        reason: reason.into(),
    }
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Tensor {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.graph.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.with_value(|t| t.shape().to_vec())
    }

    pub fn item(&self) -> Result<f64> {
        self.with_value(Tensor::item)
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// Gradient from the last [`Graph::backward`], if this node is an
    /// ancestor of the loss and requires gradients.
    pub fn grad(&self) -> Option<Tensor> {
        self.graph.nodes.borrow()[self.id].grad.clone()
    }

    fn unary(&self, op: Op, value: Tensor) -> Var<'g> {
        let rg = self.requires_grad();
        self.graph.push(op, value, rg)
    }

    fn binary(&self, other: &Var<'g>, op: Op, value: Tensor) -> Var<'g> {
        let rg = self.graph.needs(&[self.id, other.id]);
        self.graph.push(op, value, rg)
    }

    fn zip_same(&self, other: &Var<'g>, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let nodes = self.graph.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        if a.shape() != b.shape() {
            return Err(mismatch(name, a.shape(), b.shape()));
        }
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(a.shape().to_vec(), data)
    }

    pub fn add(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let v = self.zip_same(other, "add", |a, b| a + b)?;
        Ok(self.binary(other, Op::Add(self.id, other.id), v))
    }

    pub fn sub(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let v = self.zip_same(other, "sub", |a, b| a - b)?;
        Ok(self.binary(other, Op::Sub(self.id, other.id), v))
    }

    pub fn mul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let v = self.zip_same(other, "mul", |a, b| a * b)?;
        Ok(self.binary(other, Op::Mul(self.id, other.id), v))
    }

    pub fn div(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let v = self.zip_same(other, "div", |a, b| a / b)?;
        Ok(self.binary(other, Op::Div(self.id, other.id), v))
    }

    pub fn square(&self) -> Var<'g> {
        self.mul(self).expect("same shape")
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        let v = self.with_value(|t| t.map(|x| x * c));
        self.unary(Op::Scale(self.id, c), v)
    }

    pub fn neg(&self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g> {
        let v = self.with_value(|t| t.map(|x| x + c));
        self.unary(Op::AddScalar(self.id), v)
    }

    /// Multiplies every element by a one-element tensor on the graph.
    pub fn scale_by(&self, s: &Var<'g>) -> Result<Var<'g>> {
        let sv = s.with_value(|t| t.item())?;
        let v = self.with_value(|t| t.map(|x| x * sv));
        Ok(self.binary(s, Op::ScaleBy(self.id, s.id), v))
    }

    /// Convex combination `alpha * self + (1 - alpha) * other` for a
    /// one-element `alpha`. The value is clamped to the interval spanned by
    /// the two inputs so the endpoints and equal inputs are reproduced
    /// exactly despite rounding.
    pub fn lerp(&self, other: &Var<'g>, alpha: &Var<'g>) -> Result<Var<'g>> {
        let t = alpha.with_value(|a| a.item())?;
        let v = self.zip_same(other, "lerp", |a, b| (t * a + (1.0 - t) * b).clamp(a.min(b), a.max(b)))?;
        let rg = self.graph.needs(&[self.id, other.id, alpha.id]);
        Ok(self.graph.push(
            Op::Lerp {
                a: self.id,
                b: other.id,
                alpha: alpha.id,
            },
            v,
            rg,
        ))
    }

    pub fn matmul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let (sa, sb) = (a.shape(), b.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(mismatch("matmul", sa, sb));
            }
            let c = kernels::matmul(a.data(), b.data(), sa[0], sa[1], sb[1]);
            Tensor::new([sa[0], sb[1]], c)?
        };
        Ok(self.binary(other, Op::MatMul(self.id, other.id), v))
    }

    pub fn transpose(&self) -> Result<Var<'g>> {
        let v = self.with_value(|t| {
            let s = t.shape();
            if s.len() != 2 {
                return Err(bad_shape("transpose", s, "expected rank 2"));
            }
            Tensor::new([s[1], s[0]], kernels::transpose(t.data(), s[0], s[1]))
        })?;
        Ok(self.unary(Op::Transpose(self.id), v))
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Var<'g>> {
        let v = self.with_value(|t| t.reshape(shape))?;
        Ok(self.unary(Op::Reshape(self.id), v))
    }

    /// Replicate-padded, centered convolution of `[C_in, H, W]` with
    /// `[C_out, C_in, kh, kw]` kernels. Output is
    /// `[C_out, (H-1)/stride + 1, (W-1)/stride + 1]`.
    pub fn conv2d(&self, kernel: &Var<'g>, stride: usize) -> Result<Var<'g>> {
        if stride < 1 {
            return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
        }
        let (v, geom) = {
            let nodes = self.graph.nodes.borrow();
            let (x, k) = (&nodes[self.id].value, &nodes[kernel.id].value);
            let (sx, sk) = (x.shape(), k.shape());
            if sx.len() != 3 {
                return Err(bad_shape("conv2d", sx, "input must be [C, H, W]"));
            }
            if sk.len() != 4 {
                return Err(bad_shape("conv2d", sk, "kernel must be [C_out, C_in, kh, kw]"));
            }
            if sk[2] % 2 == 0 || sk[3] % 2 == 0 {
                return Err(bad_shape("conv2d", sk, "kernel size must be odd"));
            }
            if sk[1] != sx[0] {
                return Err(mismatch("conv2d", sx, sk));
            }
            let geom = ConvGeometry::new(sx[0], sx[1], sx[2], sk[0], sk[2], sk[3], stride);
            let out = geom.conv(x.data(), k.data());
            (Tensor::new([sk[0], geom.out_h, geom.out_w], out)?, geom)
        };
        Ok(self.binary(
            kernel,
            Op::Conv2d {
                input: self.id,
                kernel: kernel.id,
                geom: Box::new(geom),
            },
            v,
        ))
    }

    /// `[m, n] + [n]`, the bias repeated over rows.
    pub fn add_row_bias(&self, bias: &Var<'g>) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes.borrow();
            let (x, b) = (&nodes[self.id].value, &nodes[bias.id].value);
            if x.rank() != 2 || b.rank() != 1 || x.shape()[1] != b.len() {
                return Err(mismatch("add_row_bias", x.shape(), b.shape()));
            }
            let n = b.len();
            let data = x.data().iter().enumerate().map(|(i, v)| v + b.data()[i % n]).collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        Ok(self.binary(bias, Op::AddRowBias(self.id, bias.id), v))
    }

    /// `[C, H, W] + [C]`, one bias per channel.
    pub fn add_channel_bias(&self, bias: &Var<'g>) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes.borrow();
            let (x, b) = (&nodes[self.id].value, &nodes[bias.id].value);
            if x.rank() != 3 || b.rank() != 1 || x.shape()[0] != b.len() {
                return Err(mismatch("add_channel_bias", x.shape(), b.shape()));
            }
            let plane = x.shape()[1] * x.shape()[2];
            let data = x
                .data()
                .iter()
                .enumerate()
                .map(|(i, v)| v + b.data()[i / plane])
                .collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        Ok(self.binary(bias, Op::AddChannelBias(self.id, bias.id), v))
    }

    pub fn sigmoid(&self) -> Var<'g> {
        let v = self.with_value(|t| t.map(kernels::sigmoid));
        self.unary(Op::Sigmoid(self.id), v)
    }

    /// `x · σ(x)`, the sigmoid-gated activation used throughout the model.
    pub fn silu(&self) -> Var<'g> {
        self.mul(&self.sigmoid()).expect("same shape")
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Var<'g> {
        let v = self.with_value(|t| {
            let n = *t.shape().last().unwrap();
            Tensor::new(t.shape().to_vec(), kernels::softmax_rows(t.data(), n)).unwrap()
        });
        self.unary(Op::Softmax(self.id), v)
    }

    /// `ln(max(x, eps))`; the gradient is zero where the clamp is active.
    pub fn log_clamped(&self, eps: f64) -> Var<'g> {
        let v = self.with_value(|t| t.map(|x| x.max(eps).ln()));
        self.unary(Op::LogClamped(self.id, eps), v)
    }

    pub fn sum(&self) -> Var<'g> {
        let v = self.with_value(|t| Tensor::scalar(t.data().iter().sum()));
        self.unary(Op::Sum(self.id), v)
    }

    pub fn mean(&self) -> Var<'g> {
        let v = self.with_value(|t| Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64));
        self.unary(Op::Mean(self.id), v)
    }

    /// `[m, n] -> [m]` row sums.
    pub fn sum_last_axis(&self) -> Result<Var<'g>> {
        let v = self.with_value(|t| {
            if t.rank() != 2 {
                return Err(bad_shape("sum_last_axis", t.shape(), "expected rank 2"));
            }
            let n = t.shape()[1];
            Tensor::new([t.shape()[0]], t.data().chunks(n).map(|r| r.iter().sum()).collect())
        })?;
        Ok(self.unary(Op::SumLastAxis(self.id), v))
    }

    /// `[C, H, W] -> [C]` per-channel spatial mean.
    pub fn global_avg_pool(&self) -> Result<Var<'g>> {
        let v = self.with_value(|t| {
            if t.rank() != 3 {
                return Err(bad_shape("global_avg_pool", t.shape(), "expected [C, H, W]"));
            }
            let plane = t.shape()[1] * t.shape()[2];
            Tensor::new(
                [t.shape()[0]],
                t.data()
                    .chunks(plane)
                    .map(|p| p.iter().sum::<f64>() / plane as f64)
                    .collect(),
            )
        })?;
        Ok(self.unary(Op::GlobalAvgPool(self.id), v))
    }

    pub fn resample(&self, mode: Resample) -> Result<Var<'g>> {
        let shape = self.shape();
        if shape.len() != 3 {
            return Err(bad_shape("resample", &shape, "expected [C, H, W]"));
        }
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        if mode != Resample::UpsampleNearest2x && (h % 2 != 0 || w % 2 != 0) {
            return Err(bad_shape("resample", &shape, "pooling needs even H and W"));
        }
        let (op, v) = self.with_value(|t| match mode {
            Resample::UpsampleNearest2x => (
                Op::Upsample2x(self.id),
                Tensor::new([c, 2 * h, 2 * w], kernels::upsample_nearest2x(t.data(), c, h, w)),
            ),
            Resample::MaxPool2x => {
                let (out, arg) = kernels::maxpool2x(t.data(), c, h, w);
                (Op::MaxPool2x(self.id, arg), Tensor::new([c, h / 2, w / 2], out))
            }
            Resample::AvgPool2x => (
                Op::AvgPool2x(self.id),
                Tensor::new([c, h / 2, w / 2], kernels::avgpool2x(t.data(), c, h, w)),
            ),
        });
        Ok(self.unary(op, v?))
    }

    /// Nearest upsampling by repeated doubling until the spatial dims equal
    /// `(h, w)`.
    pub fn upsample_to(&self, h: usize, w: usize) -> Result<Var<'g>> {
        let mut cur = *self;
        loop {
            let s = cur.shape();
            if s.len() != 3 {
                return Err(bad_shape("upsample_to", &s, "expected [C, H, W]"));
            }
            if (s[1], s[2]) == (h, w) {
                return Ok(cur);
            }
            if 2 * s[1] > h || 2 * s[2] > w {
                return Err(Error::ShapeMismatch {
                    op: "upsample_to",
                    lhs: s,
                    rhs: vec![h, w],
                });
            }
            cur = cur.resample(Resample::UpsampleNearest2x)?;
        }
    }

    /// Selects elements by flat index into a rank-1 tensor.
    pub fn gather(&self, indices: &[usize]) -> Result<Var<'g>> {
        let v = self.with_value(|t| {
            if let Some(&bad) = indices.iter().find(|&&i| i >= t.len()) {
                return Err(Error::InvalidArgument(format!(
                    "gather index {bad} out of range for {} elements",
                    t.len()
                )));
            }
            Tensor::new([indices.len()], indices.iter().map(|&i| t.data()[i]).collect())
        })?;
        Ok(self.unary(Op::Gather(self.id, indices.to_vec()), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn add_by_hand() {
        let g = Graph::new();
        let a = g.leaf(t(&[2, 2], &[1., 2., 3., 4.]));
        let b = g.leaf(t(&[2, 2], &[10., 20., 30., 40.]));
        assert_eq!(a.add(&b).unwrap().value().data(), &[11., 22., 33., 44.]);
    }

    #[test]
    fn add_zeros_is_identity_and_mul_zero_annihilates() {
        let g = Graph::new();
        let x = g.leaf(t(&[3], &[1.5, -2.0, 7.0]));
        let z = g.constant(Tensor::zeros([3]));
        assert_eq!(x.add(&z).unwrap().value(), x.value());
        assert!(x.scale(0.0).value().data().iter().all(|&v| v == 0.0));
        assert!(x.mul(&z).unwrap().value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let g = Graph::new();
        let a = g.leaf(Tensor::zeros([2, 3]));
        let b = g.leaf(Tensor::zeros([3, 2]));
        let msg = a.add(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn matmul_by_hand_and_identity() {
        let g = Graph::new();
        let a = g.leaf(t(&[2, 2], &[1., 2., 3., 4.]));
        let b = g.leaf(t(&[2, 2], &[5., 6., 7., 8.]));
        assert_eq!(a.matmul(&b).unwrap().value().data(), &[19., 22., 43., 50.]);
        let i = g.constant(Tensor::eye(2));
        assert_eq!(i.matmul(&b).unwrap().value(), b.value());
        let z = g.constant(Tensor::zeros([2, 3]));
        assert!(a.matmul(&z).unwrap().value().data().iter().all(|&v| v == 0.0));
        assert!(a.matmul(&g.constant(Tensor::zeros([3, 2]))).is_err());
    }

    #[test]
    fn conv_rejects_even_kernels_and_zero_stride() {
        let g = Graph::new();
        let x = g.leaf(Tensor::zeros([1, 4, 4]));
        let k2 = g.leaf(Tensor::zeros([1, 1, 2, 2]));
        let k3 = g.leaf(Tensor::zeros([1, 1, 3, 3]));
        assert!(x.conv2d(&k2, 1).is_err());
        assert!(x.conv2d(&k3, 0).is_err());
    }

    #[test]
    fn conv_identity_and_constant_propagation() {
        let g = Graph::new();
        let x = g.leaf(Tensor::from_fn([2, 3, 5], |i| i as f64 * 0.1));
        let id = g.constant(t(&[2, 2, 1, 1], &[1., 0., 0., 1.]));
        assert_eq!(x.conv2d(&id, 1).unwrap().value(), x.value());

        let c = g.leaf(Tensor::full([1, 4, 6], 0.7));
        let ones = g.constant(Tensor::full([1, 1, 3, 3], 1.0));
        let y = c.conv2d(&ones, 1).unwrap().value();
        assert!(y.data().iter().all(|&v| (v - 6.3).abs() < 1e-12));
    }

    #[test]
    fn sigmoid_symmetry() {
        let g = Graph::new();
        let x = g.leaf(t(&[4], &[0.0, 1.3, -2.5, 10.0]));
        let s = x.sigmoid().value();
        let sn = x.neg().sigmoid().value();
        assert_eq!(s.data()[0], 0.5);
        for (a, b) in s.data().iter().zip(sn.data()) {
            assert!((a + b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_uniform_and_shift_invariant() {
        let g = Graph::new();
        let u = g.leaf(Tensor::full([4], 3.0)).softmax().value();
        assert!(u.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let x = g.leaf(t(&[2, 3], &[0.1, -2.0, 3.0, 5.0, 5.5, -1.0]));
        let a = x.softmax().value();
        let b = x.add_scalar(17.0).softmax().value();
        assert!(a.max_abs_diff(&b) < 1e-12);
        for row in a.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_by_hand() {
        let g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1., 3., 5., 7.]));
        assert_eq!(x.global_avg_pool().unwrap().value().data(), &[4.0]);
        let c = g.leaf(Tensor::full([3, 2, 5], -1.25));
        assert_eq!(c.global_avg_pool().unwrap().value().data(), &[-1.25; 3]);
    }

    #[test]
    fn resample_by_hand() {
        let g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1., 2., 3., 4.]));
        let up = x.resample(Resample::UpsampleNearest2x).unwrap().value();
        assert_eq!(
            up.data(),
            &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
        assert_eq!(x.resample(Resample::MaxPool2x).unwrap().value().data(), &[4.0]);
        let c = g.leaf(Tensor::full([2, 4, 4], 0.3));
        let avg = c.resample(Resample::AvgPool2x).unwrap().value();
        assert_eq!(avg.shape(), &[2, 2, 2]);
        assert!(avg.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let odd = g.leaf(Tensor::zeros([1, 3, 2]));
        assert!(odd.resample(Resample::MaxPool2x).is_err());
        assert!(odd.resample(Resample::AvgPool2x).is_err());
    }

    #[test]
    fn backward_sum_of_squares() {
        let g = Graph::new();
        let x = g.leaf(t(&[3], &[1.0, -2.0, 0.5]));
        let loss = x.square().sum();
        g.backward(loss).unwrap();
        assert_eq!(x.grad().unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_leaves_non_ancestors_alone() {
        let g = Graph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        let y = g.leaf(t(&[2], &[3.0, 4.0]));
        assert!(matches!(g.backward(x.square()), Err(Error::NonScalarLoss(_))));
        let loss = x.sum();
        g.backward(loss).unwrap();
        assert!(y.grad().is_none());
        assert_eq!(x.grad().unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn loss_independent_of_input_gives_zero_or_no_grad() {
        let g = Graph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        let c = g.leaf(t(&[1], &[3.0]));
        let loss = c.square().sum().add(&x.scale(0.0).sum()).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(x.grad().unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn fault_injection_is_scoped() {
        let run = || {
            let g = Graph::new();
            let x = g.leaf(t(&[1], &[2.0]));
            g.backward(x.square().sum()).unwrap();
            x.grad().unwrap().data()[0]
        };
        assert_eq!(with_backward_fault(BackwardFault::ScaleMulGrad(1.5), run), 6.0);
        assert_eq!(run(), 4.0);
    }

    #[test]
    fn lerp_endpoints_exact() {
        let g = Graph::new();
        let a = g.leaf(t(&[3], &[0.1, -7.3, 2.2]));
        let b = g.leaf(t(&[3], &[0.3, 1e-3, -4.0]));
        let one = g.leaf(Tensor::scalar(1.0));
        let zero = g.leaf(Tensor::scalar(0.0));
        assert_eq!(a.lerp(&b, &one).unwrap().value(), a.value());
        assert_eq!(a.lerp(&b, &zero).unwrap().value(), b.value());
        let mid = g.leaf(Tensor::scalar(0.1));
        assert_eq!(a.lerp(&a, &mid).unwrap().value(), a.value());
    }
}
