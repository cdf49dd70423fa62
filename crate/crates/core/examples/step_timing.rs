//! Times one forward + backward pass of the full network.
//!
//! `cargo run --release --example step_timing -- 32 6 32`

use std::time::Instant;

use ssia::metrics::{stage_loss, LossKind};
use ssia::net::{forward_all_stages, NetConfig, NetworkParams};
use ssia::{Graph, Shape, Tensor};

fn main() -> ssia::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let size = args.first().copied().unwrap_or(32);
    let stages = args.get(1).copied().unwrap_or(6);
    let channels = args.get(2).copied().unwrap_or(32);
    let config = NetConfig {
        stages,
        channels,
        ..NetConfig::default()
    };
    let params = NetworkParams::init(&config, 0);
    let x = Tensor::from_fn(Shape::new(1, 3, size, size), |_, c, y, x| {
        0.5 + 0.4 * ((c + 3 * y + 7 * x) as f64 * 0.1).sin()
    });
    for _ in 0..3 {
        let t0 = Instant::now();
        let mut g = Graph::new();
        let p = params.bind(&mut g);
        let xv = g.constant(x.clone());
        let y = g.constant(x.clone());
        let fwd = forward_all_stages(&mut g, xv, &p, &config)?;
        let loss = stage_loss(&mut g, &fwd.outputs(), y, LossKind::NegSsim)?;
        let t1 = Instant::now();
        let grads = g.backward(loss)?;
        let t2 = Instant::now();
        println!(
            "{size}x{size} n={stages} C={channels}: forward {:.3}s backward {:.3}s ({} nodes, {} params)",
            (t1 - t0).as_secs_f64(),
            (t2 - t1).as_secs_f64(),
            g.len(),
            grads.params().len()
        );
    }
    Ok(())
}
