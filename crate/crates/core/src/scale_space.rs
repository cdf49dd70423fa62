//! Gaussian octaves and difference-of-Gaussian pyramids over feature maps.
//!
//! Every octave holds six layers `G(k^(l-1) sigma) * f_s`, each a single
//! smoothing of the octave base (not an incremental re-blur). The base of
//! octave 1 is the feature map smoothed with `sigma_prime`; the bases of the
//! coarser octaves are 2x2 max-pools of layer 4 (smoothing `k^3 sigma`, i.e.
//! `2 sigma` when `k = 2^(1/3)`) of the previous octave.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{Graph, PoolMode, Tensor, Var};

pub const LAYERS_PER_OCTAVE: usize = 6;
pub const DOG_PER_OCTAVE: usize = LAYERS_PER_OCTAVE - 1;
pub const SCALES: [usize; 3] = [1, 2, 4];

/// Smoothing schedule shared by all octaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleSpaceParams {
    pub sigma: f64,
    pub sigma_prime: f64,
    pub k: f64,
}

impl Default for ScaleSpaceParams {
    fn default() -> Self {
        ScaleSpaceParams {
            sigma: 1.6,
            sigma_prime: 1.52,
            k: 2f64.powf(1.0 / 3.0),
        }
    }
}

impl ScaleSpaceParams {
    /// Smoothing width of layer `l` (1-based) within any octave.
    pub fn layer_sigma(&self, l: usize) -> f64 {
        self.sigma * self.k.powi(l as i32 - 1)
    }
}

/// Truncated, renormalised isotropic Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    taps: Arc<[f64]>,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let side = 2 * radius + 1;
        let r = radius as f64;

        let mut taps: Vec<f64> = (0..side)
            .map(|i| {
                let x = i as f64 - r;
                (-x * x / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        normalize_exact(&mut taps);

        let mut weights = Vec::with_capacity(side * side);
        for y in 0..side {
            for x in 0..side {
                weights.push(Self::density(sigma, x as f64 - r, y as f64 - r));
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        Ok(GaussianKernel {
            sigma,
            radius,
            taps: taps.into(),
            weights,
        })
    }

    /// The continuous density `exp(-(x^2+y^2) / 2 sigma^2) / (2 pi sigma^2)`.
    pub fn density(sigma: f64, x: f64, y: f64) -> f64 {
        let s2 = sigma * sigma;
        (-(x * x + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major `(2r+1) x (2r+1)` weights summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }

    /// The normalised 1-D factor; its left-to-right floating-point sum is
    /// exactly 1.
    pub fn taps(&self) -> &Arc<[f64]> {
        &self.taps
    }
}

/// Scales `w` to unit sum, then adjusts it symmetrically until the
/// sequential floating-point sum is exactly 1.0, so power-of-two constants
/// survive filtering bit-exactly.
fn normalize_exact(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let n = w.len();
    if n < 3 || w.iter().sum::<f64>() == 1.0 {
        return;
    }
    let (mid, centre, outer) = (n / 2, w[n / 2], w[0]);
    // A coarse step on the centre tap, then a fine bisection on the
    // outermost pair, which is small enough to sweep the sum through every
    // representable value near 1.
    for k in 0..32i64 {
        let ulps = if k % 2 == 0 { k / 2 } else { -(k + 1) / 2 };
        w[mid] = f64::from_bits((centre.to_bits() as i64 + ulps) as u64);
        if bisect_outer(w, outer) {
            return;
        }
    }
    w[mid] = centre;
    w[0] = outer;
    w[n - 1] = outer;
}

fn bisect_outer(w: &mut [f64], outer: f64) -> bool {
    let n = w.len();
    let mut at = |d: f64| {
        w[0] = outer + d;
        w[n - 1] = outer + d;
        w.iter().sum::<f64>()
    };
    let start = at(0.0);
    if start == 1.0 {
        return true;
    }
    let below = start < 1.0;
    let mut reach = (1.0 - start).abs();
    loop {
        let s = at(if below { reach } else { -reach });
        if s == 1.0 {
            return true;
        }
        if (s < 1.0) != below {
            break;
        }
        reach *= 2.0;
    }
    let (mut lo, mut hi) = if below { (0.0, reach) } else { (-reach, 0.0) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = at(mid);
        if s == 1.0 {
            return true;
        }
        if s < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    false
}

/// Per-channel Gaussian smoothing with zero padding; output shape equals
/// input shape. Sigma is a constant, so only `f` is differentiated.
pub fn smooth(g: &mut Graph, f: Var, sigma: f64) -> Result<Var> {
    let kernel = GaussianKernel::new(sigma)?;
    g.filter(f, kernel.taps().clone(), false)
}

/// [`smooth`] on a plain tensor, outside any graph.
pub fn smooth_tensor(f: &Tensor, sigma: f64) -> Result<Tensor> {
    let mut g = Graph::new();
    let v = g.constant(f.clone());
    let out = smooth(&mut g, v, sigma)?;
    Ok(g.value(out).clone())
}

/// One octave of the scale space, as handles into the graph.
#[derive(Clone, Debug)]
pub struct Octave {
    pub scale: usize,
    pub base: Var,
    pub layers: Vec<Var>,
}

/// Differences of adjacent octave layers, `D_l = L_(l+1) - L_l`.
#[derive(Clone, Debug)]
pub struct DogPyramid {
    pub octaves: Vec<DogOctave>,
}

#[derive(Clone, Debug)]
pub struct DogOctave {
    pub scale: usize,
    pub layers: Vec<Var>,
}

impl DogPyramid {
    pub fn octave(&self, scale: usize) -> Option<&DogOctave> {
        self.octaves.iter().find(|o| o.scale == scale)
    }
}

fn build_octave(g: &mut Graph, scale: usize, base: Var, p: &ScaleSpaceParams) -> Result<Octave> {
    let layers = (1..=LAYERS_PER_OCTAVE)
        .map(|l| smooth(g, base, p.layer_sigma(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Octave {
        scale,
        base,
        layers,
    })
}

/// Three octaves at scales 1, 2 and 4 over the feature map `f`.
pub fn build_octaves(g: &mut Graph, f: Var, p: &ScaleSpaceParams) -> Result<Vec<Octave>> {
    let s = g.shape(f);
    if s.height() % 4 != 0 || s.width() % 4 != 0 {
        return Err(Error::NotDivisible {
            op: "build_octaves",
            height: s.height(),
            width: s.width(),
            divisor: 4,
        });
    }
    let mut octaves = Vec::with_capacity(SCALES.len());
    let mut base = smooth(g, f, p.sigma_prime)?;
    for &scale in &SCALES {
        let octave = build_octave(g, scale, base, p)?;
        // layer 4 carries smoothing k^3 sigma
        let doubled = octave.layers[3];
        octaves.push(octave);
        if scale != 4 {
            base = g.pool2d(doubled, 2, PoolMode::Max)?;
        }
    }
    Ok(octaves)
}

pub fn build_dog(g: &mut Graph, octaves: &[Octave]) -> Result<DogPyramid> {
    let mut out = Vec::with_capacity(octaves.len());
    for o in octaves {
        if o.layers.len() != LAYERS_PER_OCTAVE {
            return Err(Error::InvalidArgument(format!(
                "octave {} has {} layers, expected {LAYERS_PER_OCTAVE}",
                o.scale,
                o.layers.len()
            )));
        }
        let layers = o
            .layers
            .windows(2)
            .map(|w| g.sub(w[1], w[0]))
            .collect::<Result<Vec<_>>>()?;
        out.push(DogOctave {
            scale: o.scale,
            layers,
        });
    }
    Ok(DogPyramid { octaves: out })
}
