//! Synthetic rain: additive, blurred, anti-aliased bright streaks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scale_space::smooth_tensor;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct RainSynthesisParams {
    /// Inclusive range of streak counts per image.
    pub streaks: (usize, usize),
    /// Streak length in pixels.
    pub length: (f64, f64),
    /// Streak width in pixels.
    pub width: (f64, f64),
    /// Degrees from vertical.
    pub angle: (f64, f64),
    pub intensity: (f64, f64),
    /// Gaussian blur applied to the rendered layer; 0 disables it.
    pub blur_sigma: f64,
    pub seed: u64,
}

impl Default for RainSynthesisParams {
    fn default() -> Self {
        RainSynthesisParams {
            streaks: (20, 30),
            length: (10.0, 24.0),
            width: (1.0, 2.0),
            angle: (-15.0, 15.0),
            intensity: (0.4, 0.7),
            blur_sigma: 0.6,
            seed: 0,
        }
    }
}

impl RainSynthesisParams {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a <= b;
        if self.streaks.0 > self.streaks.1
            || !ordered(self.length)
            || !ordered(self.width)
            || !ordered(self.angle)
            || !ordered(self.intensity)
        {
            return Err(Error::Config("rain ranges must be (low, high) with low <= high".into()));
        }
        if self.intensity.0 < 0.0 || self.width.0 <= 0.0 || self.blur_sigma < 0.0 {
            return Err(Error::Config(
                "rain intensity must be >= 0, width > 0 and blur >= 0".into(),
            ));
        }
        Ok(())
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Distance from `p` to the segment `a`-`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Renders a single-channel rain layer of size `h x w`.
pub fn render_rain_layer(h: usize, w: usize, params: &RainSynthesisParams) -> Result<Tensor> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let count = rng.gen_range(params.streaks.0..=params.streaks.1);
    let mut layer = Tensor::zeros(Shape::new(1, 1, h, w));
    for _ in 0..count {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let len = sample(&mut rng, params.length);
        let width = sample(&mut rng, params.width);
        let angle = sample(&mut rng, params.angle).to_radians();
        let amp = sample(&mut rng, params.intensity);
        let (hx, hy) = (0.5 * len * angle.sin(), 0.5 * len * angle.cos());
        let (a, b) = ((cx - hx, cy - hy), (cx + hx, cy + hy));
        let reach = 0.5 * width + 1.0;
        let x0 = (a.0.min(b.0) - reach).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + reach).ceil() as usize).min(w);
        let y0 = (a.1.min(b.1) - reach).floor().max(0.0) as usize;
        let y1 = ((a.1.max(b.1) + reach).ceil() as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let d = segment_distance((x as f64 + 0.5, y as f64 + 0.5), a, b);
                let coverage = (0.5 * width + 0.5 - d).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    let i = layer.index(0, 0, y, x);
                    layer.data_mut()[i] += amp * coverage;
                }
            }
        }
    }
    if params.blur_sigma > 0.0 && count > 0 {
        layer = smooth_tensor(&layer, params.blur_sigma)?;
    }
    Ok(layer)
}

/// Adds rain to a clean image in `[0, 1]`: returns `(clamp(Y + R), R)` with
/// the same (white) streak layer `R >= 0` on every channel.
pub fn synthesize_rain(clean: &Tensor, params: &RainSynthesisParams) -> Result<(Tensor, Tensor)> {
    let s = clean.shape();
    if s.batch() != 1 {
        return Err(Error::InvalidArgument(format!(
            "synthesize_rain takes one image, got {s}"
        )));
    }
    let plane = render_rain_layer(s.height(), s.width(), params)?;
    let rain = Tensor::from_fn(s, |_, _, y, x| plane.at(0, 0, y, x));
    let data = clean
        .data()
        .iter()
        .zip(rain.data())
        .map(|(c, r)| (c + r).clamp(0.0, 1.0))
        .collect();
    Ok((Tensor::new(s, data)?, rain))
}

/// A smooth procedural RGB background with a few soft shapes, used as clean
/// ground truth when no photographs are at hand.
pub fn synthetic_scene(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce4e);
    let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.15..0.45));
    let grad: [(f64, f64); 3] =
        std::array::from_fn(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)));
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..rng.gen_range(2..5))
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(0.1..0.3) * h.min(w) as f64,
                std::array::from_fn(|_| rng.gen_range(-0.15..0.25)),
            )
        })
        .collect();
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| {
        let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
        let mut val = base[c] + grad[c].0 * u + grad[c].1 * v;
        for (bx, by, r, col) in &blobs {
            let d = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)).sqrt();
            // soft disc edge over ~2 px
            let inside = (0.5 * (r - d) + 0.5).clamp(0.0, 1.0);
            val += col[c] * inside;
        }
        val.clamp(0.0, 1.0)
    })
}
