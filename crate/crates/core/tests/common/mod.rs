#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssia::metrics::{stage_loss, LossKind};
use ssia::net::{forward_all_stages, NetConfig, NetworkParams};
use ssia::train::{synthesize_rain, synthetic_scene, Pair, RainSynthesisParams};
use ssia::{Graph, Result, Shape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: Shape, lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_, _, _, _| r.gen_range(lo..hi))
}

/// Values bounded away from zero, for ops with a kink at 0.
pub fn away_from_zero(shape: Shape, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_, _, _, _| {
        let m = r.gen_range(0.05..1.0);
        if r.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A shuffled grid of distinct values at least `2/numel` apart, so small
/// perturbations never change a max-pool winner.
pub fn distinct(shape: Shape, seed: u64) -> Tensor {
    use rand::seq::SliceRandom;
    let n = shape.numel();
    let mut v: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    v.shuffle(&mut rng(seed));
    Tensor::new(shape, v).unwrap()
}

/// `||a - n||_inf / max(||a||_inf, ||n||_inf)` over paired samples.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Checks the gradients of `sum(w ⊙ f(inputs))` for a fixed random `w`
/// against central differences with step `eps`. Returns the worst relative
/// error over all inputs.
pub fn check_op<F>(inputs: &[Tensor], eps: f64, seed: u64, f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let weights: std::cell::OnceCell<Tensor> = std::cell::OnceCell::new();
    let eval = |xs: &[Tensor], grads: bool| -> (f64, Vec<Tensor>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.variable(x.clone())).collect();
        let out = f(&mut g, &vars).unwrap();
        let w = weights.get_or_init(|| uniform(g.shape(out), -1.0, 1.0, seed ^ 0x5eed));
        let wv = g.constant(w.clone());
        let prod = g.mul(out, wv).unwrap();
        let root = g.sum(prod);
        let value = g.value(root).item();
        if !grads {
            return (value, Vec::new());
        }
        let gr = g.backward(root).unwrap();
        (value, vars.iter().map(|&v| gr.get(v).unwrap().clone()).collect())
    };
    let (_, analytic) = eval(inputs, true);
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        for i in 0..a.len() {
            let mut xs = inputs.to_vec();
            let x0 = xs[k].data()[i];
            xs[k].data_mut()[i] = x0 + eps;
            let up = eval(&xs, false).0;
            xs[k].data_mut()[i] = x0 - eps;
            let down = eval(&xs, false).0;
            numeric[i] = (up - down) / (2.0 * eps);
        }
        worst = worst.max(rel_err(a.data(), &numeric));
    }
    worst
}

/// Network parameters with every tensor (including the zero-initialised
/// output conv) filled with small random values, so every gradient is live.
pub fn live_params(config: &NetConfig, seed: u64) -> NetworkParams {
    let mut params = NetworkParams::init(config, seed);
    let mut r = rng(seed ^ 0xface);
    if let Some(t) = params.get_mut("res.out.weight") {
        for v in t.data_mut() {
            *v = r.gen_range(-0.05..0.05);
        }
    }
    params
}

/// Loss of the network and the activation pattern it was evaluated on.
pub fn network_loss(
    params: &NetworkParams,
    config: &NetConfig,
    x: &Tensor,
    y: &Tensor,
    kind: LossKind,
) -> (f64, u64) {
    let mut g = Graph::new();
    let p = params.bind_frozen(&mut g);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let fwd = forward_all_stages(&mut g, xv, &p, config).unwrap();
    let loss = stage_loss(&mut g, &fwd.outputs(), yv, kind).unwrap();
    (g.value(loss).item(), g.activation_pattern())
}

/// Result of [`check_network`].
#[derive(Debug)]
pub struct NetworkCheck {
    /// Worst relative error over the sampled coordinates.
    pub sampled: f64,
    /// Relative error of the directional derivative.
    pub directional: f64,
    pub coordinates: usize,
    /// Coordinates skipped because a relu or max-pool switched branch
    /// inside `[x - eps, x + eps]`.
    pub skipped: usize,
}

/// Gradient check of the whole network loss. Compares three sampled
/// coordinates of every parameter tensor, plus the directional derivative
/// along a random unit direction over all parameters. A central difference
/// is only meaningful on one smooth piece, so coordinates whose step
/// crosses a relu or max-pool switch are redrawn.
pub fn check_network(config: &NetConfig, seed: u64, eps: f64, kind: LossKind) -> NetworkCheck {
    let shape = Shape::new(1, 3, 16, 16);
    let y = uniform(shape, 0.1, 0.9, seed);
    let x = uniform(shape, 0.0, 1.0, seed + 1000);
    let params = live_params(config, seed);

    let mut g = Graph::new();
    let p = params.bind(&mut g);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let fwd = forward_all_stages(&mut g, xv, &p, config).unwrap();
    let loss = stage_loss(&mut g, &fwd.outputs(), yv, kind).unwrap();
    let pattern = g.activation_pattern();
    let grads = g.backward(loss).unwrap();

    let mut r = rng(seed ^ 0xd1ce);
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut skipped = 0;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let grad = grads.param(name).unwrap();
        let mut found = 0;
        for _ in 0..64 {
            if found == 3 {
                break;
            }
            let i = r.gen_range(0..grad.len());
            let mut q = params.clone();
            let x0 = q.get(name).unwrap().data()[i];
            q.get_mut(name).unwrap().data_mut()[i] = x0 + eps;
            let (up, pu) = network_loss(&q, config, &x, &y, kind);
            q.get_mut(name).unwrap().data_mut()[i] = x0 - eps;
            let (down, pd) = network_loss(&q, config, &x, &y, kind);
            if pu != pattern || pd != pattern {
                skipped += 1;
                continue;
            }
            analytic.push(grad.data()[i]);
            numeric.push((up - down) / (2.0 * eps));
            found += 1;
        }
        assert_eq!(found, 3, "no smooth coordinates found in {name}");
    }
    let sampled = rel_err(&analytic, &numeric);

    let directional = directional_error(&params, &grads, config, &x, &y, kind, eps, r.gen());
    NetworkCheck {
        sampled,
        directional,
        coordinates: analytic.len(),
        skipped,
    }
}

/// Relative error of the directional derivative along a random unit
/// direction over all parameters.
#[allow(clippy::too_many_arguments)]
fn directional_error(
    params: &NetworkParams,
    grads: &ssia::Gradients,
    config: &NetConfig,
    x: &Tensor,
    y: &Tensor,
    kind: LossKind,
    eps: f64,
    seed: u64,
) -> f64 {
    let mut r = rng(seed);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    // A unit-norm random direction, so the step length in parameter space is eps.
    let raw: Vec<(String, Tensor)> = names
        .iter()
        .map(|n| (n.clone(), uniform(params.get(n).unwrap().shape(), -1.0, 1.0, r.gen())))
        .collect();
    let norm = raw
        .iter()
        .flat_map(|(_, d)| d.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let dirs: Vec<(String, Tensor)> = raw
        .into_iter()
        .map(|(n, d)| (n, d.map(|v| v / norm)))
        .collect();
    let along = |sign: f64| {
        let mut q = params.clone();
        for (n, d) in &dirs {
            let t = q.get_mut(n).unwrap();
            for (v, dv) in t.data_mut().iter_mut().zip(d.data()) {
                *v += sign * eps * dv;
            }
        }
        network_loss(&q, config, x, y, kind).0
    };
    let numeric_dir = (along(1.0) - along(-1.0)) / (2.0 * eps);
    let analytic_dir: f64 = dirs
        .iter()
        .map(|(n, d)| {
            let gr = grads.param(n).unwrap();
            gr.data().iter().zip(d.data()).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum();
    rel_err(&[analytic_dir], &[numeric_dir])
}

/// Only the directional part of [`check_network`].
pub fn check_network_directional(config: &NetConfig, seed: u64, eps: f64, kind: LossKind) -> f64 {
    let shape = Shape::new(1, 3, 16, 16);
    let y = uniform(shape, 0.1, 0.9, seed);
    let x = uniform(shape, 0.0, 1.0, seed + 1000);
    let params = live_params(config, seed);
    let mut g = Graph::new();
    let p = params.bind(&mut g);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let fwd = forward_all_stages(&mut g, xv, &p, config).unwrap();
    let loss = stage_loss(&mut g, &fwd.outputs(), yv, kind).unwrap();
    let grads = g.backward(loss).unwrap();
    directional_error(&params, &grads, config, &x, &y, kind, eps, seed ^ 0xd1ce)
}

/// The overfit dataset: `count` procedural scenes of side `size` with
/// synthetic rain, all derived from `seed`.
pub fn overfit_pairs(count: usize, size: usize, seed: u64) -> Vec<Pair> {
    (0..count as u64)
        .map(|i| {
            let clean = synthetic_scene(size, size, seed + 100 + i);
            let rp = RainSynthesisParams {
                seed: seed + 200 + i,
                ..RainSynthesisParams::default()
            };
            let (rainy, _) = synthesize_rain(&clean, &rp).unwrap();
            Pair { rainy, clean }
        })
        .collect()
}

/// Worst finite-difference relative error of every differentiable graph
/// operation and composite block, over `seeds`, on 1x3x16x16 inputs.
pub fn op_suite(seeds: std::ops::Range<u64>, eps: f64) -> Vec<(&'static str, f64)> {
    use ssia::metrics::{ssim_var, SsimParams};
    use ssia::net::{apply_attention, convlstm_step};
    use ssia::scale_space::{build_dog, build_octaves, smooth, ScaleSpaceParams};
    use ssia::PoolMode;

    let s = Shape::new(1, 3, 16, 16);
    type Case = (&'static str, Box<dyn Fn(u64) -> f64>);
    let cases: Vec<Case> = vec![
        ("conv2d", Box::new(move |seed| {
            let ins = [
                uniform(s, -1.0, 1.0, seed),
                uniform(Shape::new(4, 3, 3, 3), -0.5, 0.5, seed + 1),
                uniform(Shape::new(4, 1, 1, 1), -0.5, 0.5, seed + 2),
            ];
            check_op(&ins, eps, seed, |g, v| g.conv2d(v[0], v[1], v[2], 1, 1))
        })),
        ("conv2d_stride2", Box::new(move |seed| {
            let ins = [
                uniform(s, -1.0, 1.0, seed),
                uniform(Shape::new(2, 3, 3, 3), -0.5, 0.5, seed + 1),
                uniform(Shape::new(2, 1, 1, 1), -0.5, 0.5, seed + 2),
            ];
            check_op(&ins, eps, seed, |g, v| g.conv2d(v[0], v[1], v[2], 2, 0))
        })),
        ("conv2d_1x1", Box::new(move |seed| {
            let ins = [
                uniform(s, -1.0, 1.0, seed),
                uniform(Shape::new(5, 3, 1, 1), -0.5, 0.5, seed + 1),
                uniform(Shape::new(5, 1, 1, 1), -0.5, 0.5, seed + 2),
            ];
            check_op(&ins, eps, seed, |g, v| g.conv2d(v[0], v[1], v[2], 1, 0))
        })),
        ("avg_pool", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| {
                g.pool2d(v[0], 2, PoolMode::Avg)
            })
        })),
        ("avg_pool4", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| {
                g.pool2d(v[0], 4, PoolMode::Avg)
            })
        })),
        ("max_pool", Box::new(move |seed| {
            check_op(&[distinct(s, seed)], eps, seed, |g, v| g.pool2d(v[0], 2, PoolMode::Max))
        })),
        ("upsample2x", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| Ok(g.upsample2x(v[0])))
        })),
        ("concat", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s.with_channels(2), -1.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| g.concat(v[0], v[1]))
        })),
        ("narrow", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| g.narrow(v[0], 1, 2))
        })),
        ("relu", Box::new(move |seed| {
            check_op(&[away_from_zero(s, seed)], eps, seed, |g, v| Ok(g.relu(v[0])))
        })),
        ("sigmoid", Box::new(move |seed| {
            check_op(&[uniform(s, -4.0, 4.0, seed)], eps, seed, |g, v| Ok(g.sigmoid(v[0])))
        })),
        ("tanh", Box::new(move |seed| {
            check_op(&[uniform(s, -3.0, 3.0, seed)], eps, seed, |g, v| Ok(g.tanh(v[0])))
        })),
        ("abs", Box::new(move |seed| {
            check_op(&[away_from_zero(s, seed)], eps, seed, |g, v| Ok(g.abs(v[0])))
        })),
        ("add", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s, -1.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| g.add(v[0], v[1]))
        })),
        ("sub", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s, -1.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| g.sub(v[0], v[1]))
        })),
        ("mul", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s, -1.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| g.mul(v[0], v[1]))
        })),
        ("div", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s, 0.5, 2.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| g.div(v[0], v[1]))
        })),
        ("add_scalar_scale", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| {
                let a = g.add_scalar(v[0], 0.7);
                Ok(g.scale(a, -1.3))
            })
        })),
        ("sum_mean", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| {
                let sq = g.mul(v[0], v[0])?;
                let a = g.sum(sq);
                let b = g.mean(v[0]);
                g.add(a, b)
            })
        })),
        ("gaussian_same", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| smooth(g, v[0], 1.6))
        })),
        ("gaussian_valid", Box::new(move |seed| {
            let w = SsimParams::default().window();
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, move |g, v| {
                g.filter(v[0], w.clone(), true)
            })
        })),
        ("dog_pyramid", Box::new(move |seed| {
            check_op(&[uniform(s, -1.0, 1.0, seed)], eps, seed, |g, v| {
                let oct = build_octaves(g, v[0], &ScaleSpaceParams::default())?;
                let dog = build_dog(g, &oct)?;
                let parts: Vec<Var> = dog
                    .octaves
                    .iter()
                    .map(|o| {
                        let c = g.concat_all(&o.layers).unwrap();
                        g.mean(c)
                    })
                    .collect();
                let a = g.add(parts[0], parts[1])?;
                let a = g.add(a, parts[2])?;
                let last = *dog.octaves[2].layers.last().unwrap();
                let sq = g.mul(last, last)?;
                let b = g.sum(sq);
                g.add(a, b)
            })
        })),
        ("ssim", Box::new(move |seed| {
            let ins = [uniform(s, 0.0, 1.0, seed), uniform(s, 0.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| ssim_var(g, v[0], v[1], &SsimParams::default()))
        })),
        ("attention", Box::new(move |seed| {
            let ins = [uniform(s, -1.0, 1.0, seed), uniform(s, 0.0, 1.0, seed + 1)];
            check_op(&ins, eps, seed, |g, v| apply_attention(g, v[0], v[1]))
        })),
        ("convlstm", Box::new(move |seed| {
            let c = 3;
            let config = NetConfig {
                channels: c,
                stages: 1,
                ..NetConfig::default()
            };
            let params = live_params(&config, seed);
            let ins = [
                uniform(s, -1.0, 1.0, seed),
                uniform(s, -1.0, 1.0, seed + 1),
                uniform(s, -1.0, 1.0, seed + 2),
                params.get("lstm.s1.gates.weight").unwrap().clone(),
            ];
            let bias = params.get("lstm.s1.gates.bias").unwrap().clone();
            check_op(&ins, eps, seed, move |g, v| {
                let mut map = std::collections::BTreeMap::new();
                map.insert("lstm.s1.gates.weight".to_string(), v[3]);
                map.insert("lstm.s1.gates.bias".to_string(), g.constant(bias.clone()));
                let p = ssia::net::BoundParams::from_vars(map);
                let (out, _h, cell) = convlstm_step(g, v[0], v[1], v[2], &p, 1, false)?;
                g.add(out, cell)
            })
        })),
    ];
    cases
        .iter()
        .map(|(name, f)| (*name, seeds.clone().map(|sd| f(sd)).fold(0.0, f64::max)))
        .collect()
}
