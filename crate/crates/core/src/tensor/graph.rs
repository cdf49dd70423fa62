use std::collections::BTreeMap;
use std::sync::Arc;

use super::kernels::{self, ConvGeom};
use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    Avg,
    Max,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(String),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
    },
    Pool {
        input: Var,
        size: usize,
        // flat input index of each output's maximum, max mode only
        argmax: Option<Vec<usize>>,
    },
    Upsample2x(Var),
    Concat(Var, Var),
    Narrow {
        input: Var,
        start: usize,
    },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Abs(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Filter {
        input: Var,
        kernel: Arc<[f64]>,
        valid: bool,
    },
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::Conv2d {
                input,
                weight,
                bias,
                ..
            } => vec![input, weight, bias],
            Op::Pool { input, .. } | Op::Narrow { input, .. } | Op::Filter { input, .. } => {
                vec![input]
            }
            Op::Upsample2x(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Abs(a)
            | Op::AddScalar(a)
            | Op::Scale(a, _)
            | Op::Sum(a)
            | Op::Mean(a) => vec![a],
            Op::Concat(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                vec![a, b]
            }
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run tape. Nodes are appended in evaluation order, so the node
/// list is always topologically sorted.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// An unnamed leaf that does receive gradient.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A named trainable leaf; its gradient is reported by name.
    pub fn param(&mut self, name: &str, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Param(name.to_string()),
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::DimensionMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let xs = self.shape(input);
        let ws = self.shape(weight);
        let bs = self.shape(bias);
        let [out_c, in_c, kh, kw] = ws.0;
        if xs.channels() != in_c {
            return Err(Error::DimensionMismatch {
                op: "conv2d",
                left: xs,
                right: ws,
            });
        }
        if bs.numel() != out_c {
            return Err(Error::DimensionMismatch {
                op: "conv2d bias",
                left: ws,
                right: bs,
            });
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
        }
        let (ph, pw) = (xs.height() + 2 * padding, xs.width() + 2 * padding);
        if kh > ph || kw > pw {
            return Err(Error::DimensionMismatch {
                op: "conv2d kernel exceeds padded input",
                left: xs,
                right: ws,
            });
        }
        let geom = ConvGeom {
            in_c,
            in_h: xs.height(),
            in_w: xs.width(),
            out_c,
            kh,
            kw,
            stride,
            pad: padding,
            out_h: (ph - kh) / stride + 1,
            out_w: (pw - kw) / stride + 1,
        };
        let data = kernels::conv2d_forward(
            self.value(input).data(),
            xs.batch(),
            self.value(weight).data(),
            self.value(bias).data(),
            &geom,
        );
        let out = Tensor::new(Shape([xs.batch(), out_c, geom.out_h, geom.out_w]), data)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
        ))
    }

    /// Non-overlapping pooling with window and stride `size`.
    pub fn pool2d(&mut self, input: Var, size: usize, mode: PoolMode) -> Result<Var> {
        let xs = self.shape(input);
        if size == 0 {
            return Err(Error::InvalidArgument("pool size must be >= 1".into()));
        }
        if xs.height() % size != 0 || xs.width() % size != 0 {
            return Err(Error::NotDivisible {
                op: "pool2d",
                height: xs.height(),
                width: xs.width(),
                divisor: size,
            });
        }
        if size == 1 && mode == PoolMode::Avg {
            let v = self.value(input).clone();
            return Ok(self.push(
                v,
                Op::Pool {
                    input,
                    size,
                    argmax: None,
                },
            ));
        }
        let (oh, ow) = (xs.height() / size, xs.width() / size);
        let os = xs.with_spatial(oh, ow);
        let x = self.value(input);
        let mut out = Vec::with_capacity(os.numel());
        let mut argmax = (mode == PoolMode::Max).then(|| Vec::with_capacity(os.numel()));
        let norm = 1.0 / (size * size) as f64;
        for bc in 0..xs.batch() * xs.channels() {
            let base = bc * xs.plane();
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    let mut best = (f64::NEG_INFINITY, 0);
                    for dy in 0..size {
                        for dx in 0..size {
                            let i = base + (oy * size + dy) * xs.width() + ox * size + dx;
                            let v = x.data()[i];
                            acc += v;
                            if v > best.0 {
                                best = (v, i);
                            }
                        }
                    }
                    match argmax.as_mut() {
                        Some(am) => {
                            am.push(best.1);
                            out.push(best.0);
                        }
                        None => out.push(acc * norm),
                    }
                }
            }
        }
        let out = Tensor::new(os, out)?;
        Ok(self.push(
            out,
            Op::Pool {
                input,
                size,
                argmax,
            },
        ))
    }

    /// Nearest-neighbour upsampling by 2.
    pub fn upsample2x(&mut self, input: Var) -> Var {
        let xs = self.shape(input);
        let os = xs.with_spatial(xs.height() * 2, xs.width() * 2);
        let x = self.value(input);
        let out = Tensor::from_fn(os, |b, c, y, xx| x.at(b, c, y / 2, xx / 2));
        self.push(out, Op::Upsample2x(input))
    }

    /// Channel concatenation; `a` occupies the leading channels.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.batch() != sb.batch() || sa.height() != sb.height() || sa.width() != sb.width() {
            return Err(Error::DimensionMismatch {
                op: "concat",
                left: sa,
                right: sb,
            });
        }
        let (ca, cb) = (sa.channels() * sa.plane(), sb.channels() * sb.plane());
        let os = sa.with_channels(sa.channels() + sb.channels());
        let mut out = Vec::with_capacity(os.numel());
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        for n in 0..sa.batch() {
            out.extend_from_slice(&va[n * ca..(n + 1) * ca]);
            out.extend_from_slice(&vb[n * cb..(n + 1) * cb]);
        }
        let out = Tensor::new(os, out)?;
        Ok(self.push(out, Op::Concat(a, b)))
    }

    /// Concatenates any number of tensors along channels.
    pub fn concat_all(&mut self, parts: &[Var]) -> Result<Var> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        rest.iter().try_fold(*first, |acc, &p| self.concat(acc, p))
    }

    /// Channels `[start, start + len)`.
    pub fn narrow(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(input);
        if start + len > xs.channels() {
            return Err(Error::InvalidArgument(format!(
                "narrow [{start}, {}) out of range for {xs}",
                start + len
            )));
        }
        let plane = xs.plane();
        let os = xs.with_channels(len);
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(os.numel());
        for n in 0..xs.batch() {
            let off = (n * xs.channels() + start) * plane;
            out.extend_from_slice(&x[off..off + len * plane]);
        }
        let out = Tensor::new(os, out)?;
        Ok(self.push(out, Op::Narrow { input, start }))
    }

    fn unary(&mut self, input: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(input).map(f);
        self.push(out, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.check_same(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(va.shape(), data)?;
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Per-plane separable filtering with a fixed symmetric 1-D kernel of odd
    /// length. Zero-padded "same" output, or the unpadded valid region.
    pub fn filter(&mut self, input: Var, kernel: Arc<[f64]>, valid: bool) -> Result<Var> {
        let xs = self.shape(input);
        let radius = kernel.len() / 2;
        let (oh, ow, shift) = if valid {
            if xs.height() < kernel.len() || xs.width() < kernel.len() {
                return Err(Error::InvalidArgument(format!(
                    "valid filter of {} taps does not fit {xs}",
                    kernel.len()
                )));
            }
            (xs.height() - 2 * radius, xs.width() - 2 * radius, 0)
        } else {
            (xs.height(), xs.width(), radius)
        };
        let data = kernels::separable(
            self.value(input).data(),
            xs.batch() * xs.channels(),
            xs.height(),
            xs.width(),
            &kernel,
            shift,
            oh,
            ow,
        );
        let out = Tensor::new(xs.with_spatial(oh, ow), data)?;
        Ok(self.push(
            out,
            Op::Filter {
                input,
                kernel,
                valid,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = t.sum() / t.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(x))
    }

    /// Which branch every piecewise op took: relu and abs input signs and
    /// max-pool winners. Two evaluations with equal patterns lie on the same
    /// smooth piece, which is what finite-difference checks need.
    pub fn activation_pattern(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::Relu(a) | Op::Abs(a) => {
                    i.hash(&mut h);
                    for &v in self.value(*a).data() {
                        (v > 0.0, v < 0.0).hash(&mut h);
                    }
                }
                Op::Pool {
                    argmax: Some(idx), ..
                } => {
                    i.hash(&mut h);
                    idx.hash(&mut h);
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Names and handles of every parameter leaf, in recording order.
    pub fn params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match &n.op {
            Op::Param(name) => Some((name.as_str(), Var(i))),
            _ => None,
        })
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rs = self.shape(root);
        if rs != Shape::SCALAR {
            return Err(Error::NonScalarRoot(rs));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &gy, &mut grads);
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[i] = Some(gy);
            }
        }

        let mut by_node = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (i, g) in grads.into_iter().enumerate() {
            let node = &self.nodes[i];
            let Some(g) = g else { continue };
            if !node.requires_grad {
                continue;
            }
            let t = Tensor::new(node.value.shape(), g)?;
            match &node.op {
                Op::Param(name) => {
                    params.insert(name.clone(), t);
                }
                Op::Leaf => {
                    by_node.insert(i, t);
                }
                _ => {}
            }
        }
        for (name, v) in self.params() {
            params
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(self.shape(v)));
        }
        Ok(Gradients { by_node, params })
    }

    fn propagate(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = node.value.data();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            } => {
                let x = self.value(*input);
                let mut gi = self.grad_buf(*input, grads);
                let mut gw = self.grad_buf(*weight, grads);
                let mut gb = self.grad_buf(*bias, grads);
                kernels::conv2d_backward(
                    x.data(),
                    x.shape().batch(),
                    self.value(*weight).data(),
                    gy,
                    geom,
                    gi.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                restore(grads, *input, gi);
                restore(grads, *weight, gw);
                restore(grads, *bias, gb);
            }
            Op::Pool {
                input,
                size,
                argmax,
            } => {
                let Some(mut gi) = self.grad_buf(*input, grads) else {
                    return;
                };
                match argmax {
                    Some(am) => {
                        for (&src, &g) in am.iter().zip(gy) {
                            gi[src] += g;
                        }
                    }
                    None => {
                        let xs = self.shape(*input);
                        let (ow, s) = (xs.width() / size, *size);
                        let norm = 1.0 / (s * s) as f64;
                        for (i, g) in gi.iter_mut().enumerate() {
                            let x = i % xs.width();
                            let rest = i / xs.width();
                            let y = rest % xs.height();
                            let bc = rest / xs.height();
                            let o = (bc * (xs.height() / s) + y / s) * ow + x / s;
                            *g += gy[o] * norm;
                        }
                    }
                }
                restore(grads, *input, Some(gi));
            }
            Op::Upsample2x(input) => {
                let Some(mut gi) = self.grad_buf(*input, grads) else {
                    return;
                };
                let xs = self.shape(*input);
                let ow = xs.width() * 2;
                for (o, g) in gy.iter().enumerate() {
                    let x = o % ow;
                    let rest = o / ow;
                    let y = rest % (xs.height() * 2);
                    let bc = rest / (xs.height() * 2);
                    gi[(bc * xs.height() + y / 2) * xs.width() + x / 2] += g;
                }
                restore(grads, *input, Some(gi));
            }
            Op::Concat(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (ca, cb) = (sa.channels() * sa.plane(), sb.channels() * sb.plane());
                if let Some(mut ga) = self.grad_buf(*a, grads) {
                    for n in 0..sa.batch() {
                        add_into(
                            &mut ga[n * ca..(n + 1) * ca],
                            &gy[n * (ca + cb)..n * (ca + cb) + ca],
                        );
                    }
                    restore(grads, *a, Some(ga));
                }
                if let Some(mut gb) = self.grad_buf(*b, grads) {
                    for n in 0..sb.batch() {
                        add_into(
                            &mut gb[n * cb..(n + 1) * cb],
                            &gy[n * (ca + cb) + ca..(n + 1) * (ca + cb)],
                        );
                    }
                    restore(grads, *b, Some(gb));
                }
            }
            Op::Narrow { input, start } => {
                let Some(mut gi) = self.grad_buf(*input, grads) else {
                    return;
                };
                let xs = self.shape(*input);
                let len = node.value.shape().channels() * xs.plane();
                for n in 0..xs.batch() {
                    let off = (n * xs.channels() + start) * xs.plane();
                    add_into(&mut gi[off..off + len], &gy[n * len..(n + 1) * len]);
                }
                restore(grads, *input, Some(gi));
            }
            Op::Relu(a) => self.unary_grad(*a, grads, |i| if y[i] > 0.0 { gy[i] } else { 0.0 }),
            Op::Sigmoid(a) => self.unary_grad(*a, grads, |i| gy[i] * y[i] * (1.0 - y[i])),
            Op::Tanh(a) => self.unary_grad(*a, grads, |i| gy[i] * (1.0 - y[i] * y[i])),
            Op::Abs(a) => {
                let x = self.value(*a).data();
                self.unary_grad(*a, grads, |i| {
                    if x[i] > 0.0 {
                        gy[i]
                    } else if x[i] < 0.0 {
                        -gy[i]
                    } else {
                        0.0
                    }
                })
            }
            Op::AddScalar(a) => self.unary_grad(*a, grads, |i| gy[i]),
            Op::Scale(a, c) => self.unary_grad(*a, grads, |i| gy[i] * c),
            Op::Add(a, b) => {
                self.unary_grad(*a, grads, |i| gy[i]);
                self.unary_grad(*b, grads, |i| gy[i]);
            }
            Op::Sub(a, b) => {
                self.unary_grad(*a, grads, |i| gy[i]);
                self.unary_grad(*b, grads, |i| -gy[i]);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.unary_grad(*a, grads, |i| gy[i] * vb[i]);
                self.unary_grad(*b, grads, |i| gy[i] * va[i]);
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.unary_grad(*a, grads, |i| gy[i] / vb[i]);
                self.unary_grad(*b, grads, |i| -gy[i] * va[i] / (vb[i] * vb[i]));
            }
            Op::Filter {
                input,
                kernel,
                valid,
            } => {
                let Some(mut gi) = self.grad_buf(*input, grads) else {
                    return;
                };
                let xs = self.shape(*input);
                let os = node.value.shape();
                let radius = kernel.len() / 2;
                // symmetric kernel: the adjoint is the same filter, re-aligned
                let shift = if *valid { 2 * radius } else { radius };
                let back = kernels::separable(
                    gy,
                    xs.batch() * xs.channels(),
                    os.height(),
                    os.width(),
                    kernel,
                    shift,
                    xs.height(),
                    xs.width(),
                );
                add_into(&mut gi, &back);
                restore(grads, *input, Some(gi));
            }
            Op::Sum(a) => self.unary_grad(*a, grads, |_| gy[0]),
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                self.unary_grad(*a, grads, |_| gy[0] / n)
            }
        }
    }

    /// Takes (or allocates) the accumulation buffer of `v`, or `None` if `v`
    /// does not need gradient.
    fn grad_buf(&self, v: Var, grads: &mut [Option<Vec<f64>>]) -> Option<Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        Some(
            grads[v.0]
                .take()
                .unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.len()]),
        )
    }

    fn unary_grad(&self, v: Var, grads: &mut [Option<Vec<f64>>], f: impl Fn(usize) -> f64) {
        if let Some(mut g) = self.grad_buf(v, grads) {
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += f(i);
            }
            grads[v.0] = Some(g);
        }
    }
}

fn restore(grads: &mut [Option<Vec<f64>>], v: Var, g: Option<Vec<f64>>) {
    if g.is_some() {
        grads[v.0] = g;
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    by_node: BTreeMap<usize, Tensor>,
    params: BTreeMap<String, Tensor>,
}

impl Gradients {
    /// Gradient of an unnamed `variable` leaf, if it was reached.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.by_node.get(&v.0)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Gradient of every parameter recorded in the graph; unreached ones are
    /// zero-filled.
    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }
}
