//! Finite-difference checks of every differentiable operation and of the
//! whole network.

mod common;

use ssia::metrics::LossKind;
use ssia::net::NetConfig;
use ssia::Shape;

use common::{check_network, check_op, uniform};

#[test]
fn every_op_matches_central_differences() {
    let results = common::op_suite(0..5, 1e-4);
    for (name, err) in &results {
        assert!(*err < 1e-3, "{name}: relative error {err:e}");
    }
}

#[test]
fn conv_gradient_is_tight() {
    for seed in 0..5 {
        let ins = [
            uniform(Shape::new(1, 3, 16, 16), -1.0, 1.0, seed),
            uniform(Shape::new(4, 3, 3, 3), -0.5, 0.5, seed + 1),
            uniform(Shape::new(4, 1, 1, 1), -0.5, 0.5, seed + 2),
        ];
        let err = check_op(&ins, 1e-5, seed, |g, v| g.conv2d(v[0], v[1], v[2], 1, 1));
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

fn two_stage(channels: usize) -> NetConfig {
    NetConfig {
        channels,
        stages: 2,
        ..NetConfig::default()
    }
}

#[test]
fn full_network_neg_ssim() {
    for seed in 0..3 {
        let c = check_network(&two_stage(4), seed, 1e-4, LossKind::NegSsim);
        assert!(c.sampled < 1e-3 && c.directional < 1e-3, "seed {seed}: {c:?}");
    }
}

#[test]
fn full_network_mse_with_variants() {
    let config = NetConfig {
        lstm_pre_convs: true,
        sian_single_conv: true,
        share_sian_heads: true,
        ..two_stage(4)
    };
    let c = check_network(&config, 7, 1e-4, LossKind::Mse);
    assert!(c.sampled < 1e-3 && c.directional < 1e-3, "{c:?}");
}

#[test]
fn one_stage_network_mae() {
    let config = NetConfig {
        stages: 1,
        ..two_stage(8)
    };
    let c = check_network(&config, 3, 1e-4, LossKind::Mae);
    assert!(c.sampled < 1e-3 && c.directional < 1e-3, "{c:?}");
}


#[test]
fn wide_network_directional() {
    let err = common::check_network_directional(&two_stage(32), 5, 1e-4, LossKind::NegSsim);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn conv_weight_gradient_of_sum_on_small_input() {
    use ssia::Graph;
    for seed in 0..5 {
        let x = uniform(Shape::new(1, 2, 6, 6), -1.0, 1.0, seed);
        let w = uniform(Shape::new(3, 2, 3, 3), -1.0, 1.0, seed + 1);
        let b = uniform(Shape::new(3, 1, 1, 1), -1.0, 1.0, seed + 2);
        let total = |w: &ssia::Tensor| {
            let mut g = Graph::new();
            let (xv, wv, bv) = (g.constant(x.clone()), g.variable(w.clone()), g.constant(b.clone()));
            let y = g.conv2d(xv, wv, bv, 1, 1).unwrap();
            let s = g.sum(y);
            (g.value(s).item(), g.backward(s).unwrap().get(wv).unwrap().clone())
        };
        let (_, analytic) = total(&w);
        let eps = 1e-5;
        let numeric: Vec<f64> = (0..w.len())
            .map(|i| {
                let (mut up, mut down) = (w.clone(), w.clone());
                up.data_mut()[i] += eps;
                down.data_mut()[i] -= eps;
                (total(&up).0 - total(&down).0) / (2.0 * eps)
            })
            .collect();
        let err = common::rel_err(analytic.data(), &numeric);
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn attention_mask_gradient_reaches_head_params_and_features() {
    use ssia::scale_space::{build_dog, build_octaves, ScaleSpaceParams};
    use ssia::sian::AttentionHead;
    for seed in 0..5 {
        let c = 2;
        let ins = [
            uniform(Shape::new(1, c, 16, 16), -1.0, 1.0, seed),
            uniform(Shape::new(c, 5 * c, 3, 3), -0.5, 0.5, seed + 1),
            uniform(Shape::new(c, 1, 1, 1), -0.5, 0.5, seed + 2),
            uniform(Shape::new(c, c, 3, 3), -0.5, 0.5, seed + 3),
            uniform(Shape::new(c, 1, 1, 1), -0.5, 0.5, seed + 4),
        ];
        for octave in 0..3 {
            let err = check_op(&ins, 1e-4, seed, |g, v| {
                let oct = build_octaves(g, v[0], &ScaleSpaceParams::default())?;
                let dog = build_dog(g, &oct)?;
                let head = AttentionHead {
                    conv1: (v[1], v[2]),
                    conv2: Some((v[3], v[4])),
                };
                let m = head.mask(g, &dog.octaves[octave])?;
                Ok(g.sum(m))
            });
            assert!(err < 1e-3, "seed {seed} octave {octave}: {err:e}");
        }
    }
}
