//! SSIM, PSNR, luminance, and the accumulated multi-stage training loss.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scale_space::GaussianKernel;
use crate::tensor::{Graph, Shape, Tensor, Var};

/// Gaussian-window SSIM constants for a dynamic range `range`.
#[derive(Clone, Debug)]
pub struct SsimParams {
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.range).powi(2)
    }

    /// 1-D factor of the 11x11 window.
    pub fn window(&self) -> Arc<[f64]> {
        GaussianKernel::new(self.window_sigma)
            .expect("positive window sigma")
            .taps()
            .clone()
    }
}

/// Mean SSIM over the valid-window map of every plane, recorded in `g` so it
/// can be differentiated.
pub fn ssim_var(g: &mut Graph, a: Var, b: Var, params: &SsimParams) -> Result<Var> {
    let (sa, sb) = (g.shape(a), g.shape(b));
    if sa != sb {
        return Err(Error::DimensionMismatch {
            op: "ssim",
            left: sa,
            right: sb,
        });
    }
    let win = params.window();
    let (c1, c2) = (params.c1(), params.c2());

    let mu_a = g.filter(a, win.clone(), true)?;
    let mu_b = g.filter(b, win.clone(), true)?;
    let aa = g.mul(a, a)?;
    let bb = g.mul(b, b)?;
    let ab = g.mul(a, b)?;
    let e_aa = g.filter(aa, win.clone(), true)?;
    let e_bb = g.filter(bb, win.clone(), true)?;
    let e_ab = g.filter(ab, win, true)?;

    let mu_aa = g.mul(mu_a, mu_a)?;
    let mu_bb = g.mul(mu_b, mu_b)?;
    let mu_ab = g.mul(mu_a, mu_b)?;
    let var_a = g.sub(e_aa, mu_aa)?;
    let var_b = g.sub(e_bb, mu_bb)?;
    let cov = g.sub(e_ab, mu_ab)?;

    let l_num = g.scale(mu_ab, 2.0);
    let l_num = g.add_scalar(l_num, c1);
    let c_num = g.scale(cov, 2.0);
    let c_num = g.add_scalar(c_num, c2);
    let l_den = g.add(mu_aa, mu_bb)?;
    let l_den = g.add_scalar(l_den, c1);
    let c_den = g.add(var_a, var_b)?;
    let c_den = g.add_scalar(c_den, c2);

    let num = g.mul(l_num, c_num)?;
    let den = g.mul(l_den, c_den)?;
    let map = g.div(num, den)?;
    Ok(g.mean(map))
}

/// Mean SSIM of two images with the default constants.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

pub fn ssim_with(a: &Tensor, b: &Tensor, params: &SsimParams) -> Result<f64> {
    let mut g = Graph::new();
    let va = g.constant(a.clone());
    let vb = g.constant(b.clone());
    let s = ssim_var(&mut g, va, vb, params)?;
    Ok(g.value(s).item())
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "mse",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `+inf`.
pub fn psnr(a: &Tensor, b: &Tensor, max_val: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / m).log10())
}

pub const BT601: [f64; 3] = [0.299, 0.587, 0.114];

/// BT.601 luma of an RGB tensor.
pub fn luminance(rgb: &Tensor) -> Result<Tensor> {
    let s = rgb.shape();
    if s.channels() != 3 {
        return Err(Error::InvalidArgument(format!(
            "luminance needs 3 channels, got {s}"
        )));
    }
    Ok(Tensor::from_fn(
        Shape::new(s.batch(), 1, s.height(), s.width()),
        |b, _, y, x| {
            BT601[0] * rgb.at(b, 0, y, x) + BT601[1] * rgb.at(b, 1, y, x) + BT601[2] * rgb.at(b, 2, y, x)
        },
    ))
}

/// PSNR and SSIM of `a` against reference `b`, both on luminance.
pub fn luminance_metrics(a: &Tensor, b: &Tensor) -> Result<(f64, f64)> {
    let (la, lb) = (luminance(a)?, luminance(b)?);
    Ok((psnr(&la, &lb, 1.0)?, ssim(&la, &lb)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    NegSsim,
    Mae,
    Mse,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg_ssim" => Ok(LossKind::NegSsim),
            "mae" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected neg_ssim|mae|mse)"
            ))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::NegSsim => "neg_ssim",
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
        })
    }
}

/// Loss term of a single stage output.
pub fn single_loss(g: &mut Graph, output: Var, target: Var, kind: LossKind) -> Result<Var> {
    match kind {
        LossKind::NegSsim => {
            let s = ssim_var(g, output, target, &SsimParams::default())?;
            Ok(g.scale(s, -1.0))
        }
        LossKind::Mae => {
            let d = g.sub(output, target)?;
            let d = g.abs(d);
            Ok(g.mean(d))
        }
        LossKind::Mse => {
            let d = g.sub(output, target)?;
            let d2 = g.mul(d, d)?;
            Ok(g.mean(d2))
        }
    }
}

/// Sum of the per-stage loss over every output, e.g. `-sum_k SSIM(X_k, Y)`.
pub fn stage_loss(g: &mut Graph, outputs: &[Var], target: Var, kind: LossKind) -> Result<Var> {
    let (first, rest) = outputs
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("stage_loss needs at least one output".into()))?;
    let mut total = single_loss(g, *first, target, kind)?;
    for &o in rest {
        let term = single_loss(g, o, target, kind)?;
        total = g.add(total, term)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(seed: u64, shape: Shape) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_, _, _, _| rng.gen::<f64>())
    }

    #[test]
    fn self_similarity_is_one() {
        let x = noise(1, Shape::new(1, 3, 20, 17));
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = noise(2, Shape::new(1, 1, 16, 16));
        let b = noise(3, Shape::new(1, 1, 16, 16));
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_rejects_mismatch() {
        let a = noise(2, Shape::new(1, 1, 16, 16));
        let b = noise(3, Shape::new(1, 1, 16, 17));
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn psnr_cases() {
        let a = Tensor::zeros(Shape::new(1, 1, 4, 4));
        let b = Tensor::full(Shape::new(1, 1, 4, 4), 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        // uniform one-level error on an 8-bit image
        let q = Tensor::from_fn(Shape::new(1, 3, 8, 8), |_, c, y, x| ((c * 40 + y * 8 + x) % 254) as f64 / 255.0);
        let r = q.map(|v| v + 1.0 / 255.0);
        let expected = 20.0 * 255f64.log10();
        assert!((psnr(&q, &r, 1.0).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 48.13).abs() < 0.01);
    }

    #[test]
    fn luminance_cases() {
        let white = Tensor::full(Shape::new(1, 3, 2, 2), 1.0);
        assert!(luminance(&white).unwrap().data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let green = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, c, _, _| if c == 1 { 1.0 } else { 0.0 });
        assert!(luminance(&green).unwrap().data().iter().all(|&v| v == 0.587));
        let gray = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, _, y, x| (y * 2 + x) as f64 * 0.25);
        let l = luminance(&gray).unwrap();
        for (i, v) in l.data().iter().enumerate() {
            assert!((v - i as f64 * 0.25).abs() < 1e-15);
        }
        assert!(luminance(&Tensor::zeros(Shape::new(1, 1, 2, 2))).is_err());
    }

    #[test]
    fn loss_of_perfect_outputs_is_minus_n() {
        let y = noise(5, Shape::new(1, 3, 16, 16));
        let mut g = Graph::new();
        let t = g.constant(y.clone());
        let outs: Vec<_> = (0..4).map(|_| g.constant(y.clone())).collect();
        let l = stage_loss(&mut g, &outs, t, LossKind::NegSsim).unwrap();
        assert!((g.value(l).item() + 4.0).abs() < 1e-9);
    }

    #[test]
    fn loss_decomposes_over_stages() {
        let y = noise(6, Shape::new(1, 3, 16, 16));
        for kind in [LossKind::NegSsim, LossKind::Mae, LossKind::Mse] {
            let mut g = Graph::new();
            let t = g.constant(y.clone());
            let outs: Vec<_> = (0..3)
                .map(|i| g.constant(noise(10 + i, Shape::new(1, 3, 16, 16))))
                .collect();
            let total = stage_loss(&mut g, &outs, t, kind).unwrap();
            let total = g.value(total).item();
            let parts: f64 = outs
                .iter()
                .map(|&o| {
                    let l = stage_loss(&mut g, &[o], t, kind).unwrap();
                    g.value(l).item()
                })
                .sum();
            assert!((total - parts).abs() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn loss_kind_parses() {
        assert_eq!("mse".parse::<LossKind>().unwrap(), LossKind::Mse);
        assert!("l2".parse::<LossKind>().is_err());
    }
}
