//! Dense 4-D tensors and the define-by-run autodiff graph built over them.

mod graph;
pub(crate) mod kernels;

use std::fmt;

use crate::error::{Error, Result};

pub use graph::{Gradients, Graph, PoolMode, Var};

/// `(batch, channels, height, width)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const SCALAR: Shape = Shape([1, 1, 1, 1]);

    pub fn new(b: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([b, c, h, w])
    }

    pub fn batch(&self) -> usize {
        self.0[0]
    }

    pub fn channels(&self) -> usize {
        self.0[1]
    }

    pub fn height(&self) -> usize {
        self.0[2]
    }

    pub fn width(&self) -> usize {
        self.0[3]
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Elements in one `(h, w)` plane.
    pub fn plane(&self) -> usize {
        self.0[2] * self.0[3]
    }

    pub fn with_channels(&self, c: usize) -> Shape {
        Shape([self.0[0], c, self.0[2], self.0[3]])
    }

    pub fn with_spatial(&self, h: usize, w: usize) -> Shape {
        Shape([self.0[0], self.0[1], h, w])
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Row-major `(b, c, h, w)` array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::InvalidArgument(format!(
                "tensor of shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor::full(shape, 0.0)
    }

    pub fn full(shape: Shape, value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::full(Shape::SCALAR, value)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let [nb, nc, nh, nw] = shape.0;
        let mut data = Vec::with_capacity(shape.numel());
        for b in 0..nb {
            for c in 0..nc {
                for y in 0..nh {
                    for x in 0..nw {
                        data.push(f(b, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, nc, nh, nw] = self.shape.0;
        ((b * nc + c) * nh + y) * nw + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    /// The single value of a 1x1x1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Copies out batch element `b` as a batch-1 tensor.
    pub fn batch_item(&self, b: usize) -> Tensor {
        let per = self.shape.numel() / self.shape.batch();
        Tensor {
            shape: Shape([1, self.shape.0[1], self.shape.0[2], self.shape.0[3]]),
            data: self.data[b * per..(b + 1) * per].to_vec(),
        }
    }

    /// Stacks batch-1 (or any equal-shaped) tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot stack zero tensors".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut batch = 0;
        for t in items {
            if t.shape.0[1..] != first.shape.0[1..] {
                return Err(Error::DimensionMismatch {
                    op: "stack",
                    left: first.shape,
                    right: t.shape,
                });
            }
            batch += t.shape.batch();
            data.extend_from_slice(&t.data);
        }
        let s = first.shape.0;
        Tensor::new(Shape([batch, s[1], s[2], s[3]]), data)
    }

    /// Averages over channels, keeping a single channel.
    pub fn channel_mean(&self) -> Tensor {
        let [nb, nc, nh, nw] = self.shape.0;
        let plane = nh * nw;
        let mut out = Tensor::zeros(Shape([nb, 1, nh, nw]));
        for b in 0..nb {
            let dst = &mut out.data[b * plane..(b + 1) * plane];
            for c in 0..nc {
                let src = &self.data[(b * nc + c) * plane..(b * nc + c + 1) * plane];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            for d in dst.iter_mut() {
                *d /= nc as f64;
            }
        }
        out
    }

    pub fn flip_horizontal(&self) -> Tensor {
        let [_, _, _, nw] = self.shape.0;
        let mut data = self.data.clone();
        for row in data.chunks_mut(nw) {
            row.reverse();
        }
        Tensor {
            shape: self.shape,
            data,
        }
    }

    /// Spatial window `[y0, y0+h) x [x0, x0+w)` of every plane.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Tensor> {
        let [nb, nc, nh, nw] = self.shape.0;
        if y0 + h > nh || x0 + w > nw {
            return Err(Error::InvalidArgument(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds {}",
                self.shape
            )));
        }
        Ok(Tensor::from_fn(Shape([nb, nc, h, w]), |b, c, y, x| {
            self.at(b, c, y0 + y, x0 + x)
        }))
    }

    /// Reflection-pads bottom and right edges so both spatial dims become
    /// multiples of `multiple`. Returns the padded tensor; crop back with
    /// `crop(0, 0, h, w)`.
    pub fn reflect_pad_to_multiple(&self, multiple: usize) -> Result<Tensor> {
        let [nb, nc, nh, nw] = self.shape.0;
        let ph = nh.div_ceil(multiple) * multiple;
        let pw = nw.div_ceil(multiple) * multiple;
        if ph == nh && pw == nw {
            return Ok(self.clone());
        }
        if ph - nh >= nh || pw - nw >= nw {
            return Err(Error::InvalidArgument(format!(
                "{} too small to reflect-pad to a multiple of {multiple}",
                self.shape
            )));
        }
        let reflect = |i: usize, n: usize| if i < n { i } else { 2 * (n - 1) - i };
        Ok(Tensor::from_fn(Shape([nb, nc, ph, pw]), |b, c, y, x| {
            self.at(b, c, reflect(y, nh), reflect(x, nw))
        }))
    }
}
