//! Overfits the network on a handful of synthetic rain pairs and reports
//! per-stage PSNR/SSIM as training progresses.
//!
//! `cargo run --release --example overfit -- <steps> <batch> <patch> [ablation] [loss]`

use std::time::Instant;

use ssia::metrics::{psnr, ssim, LossKind};
use ssia::net::{derain, Ablation, NetConfig};
use ssia::train::{
    synthesize_rain, synthetic_scene, train_from, Pair, RainSynthesisParams, TrainPlan,
};

fn main() -> ssia::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: usize = args.first().map_or(300, |a| a.parse().unwrap());
    let batch: usize = args.get(1).map_or(2, |a| a.parse().unwrap());
    let patch: usize = args.get(2).map_or(32, |a| a.parse().unwrap());
    let ablation: Ablation = args.get(3).map_or(Ablation::Full, |a| a.parse().unwrap());
    let loss: LossKind = args.get(4).map_or(LossKind::NegSsim, |a| a.parse().unwrap());

    let data: Vec<Pair> = (0..8)
        .map(|i| {
            let clean = synthetic_scene(64, 64, 100 + i);
            let rp = RainSynthesisParams {
                seed: 200 + i,
                ..Default::default()
            };
            let (rainy, _) = synthesize_rain(&clean, &rp).unwrap();
            Pair { rainy, clean }
        })
        .collect();
    let input_psnr: f64 = data
        .iter()
        .map(|p| psnr(&p.rainy, &p.clean, 1.0).unwrap())
        .sum::<f64>()
        / 8.0;
    println!("rainy input PSNR {input_psnr:.3}");

    let config = NetConfig::default().with_ablation(ablation);
    let plan = TrainPlan {
        epochs: usize::MAX,
        max_steps: Some(steps),
        batch_size: batch,
        patch_size: patch,
        patch_stride: patch,
        flip: false,
        seed: 1,
        loss,
        ..TrainPlan::default()
    };
    let evaluate = |params: &ssia::net::NetworkParams| {
        let mut first = 0.0;
        let mut last = 0.0;
        let mut last_ssim = 0.0;
        for p in &data {
            let out = derain(params, &config, &p.rainy).unwrap();
            first += psnr(&out.outputs[0], &p.clean, 1.0).unwrap() / 8.0;
            let fin = out.outputs.last().unwrap();
            last += psnr(fin, &p.clean, 1.0).unwrap() / 8.0;
            last_ssim += ssim(fin, &p.clean).unwrap() / 8.0;
        }
        (first, last, last_ssim)
    };
    let t0 = Instant::now();
    let chunk = 50;
    let mut params = ssia::net::NetworkParams::init(&config, plan.seed);
    let mut done = 0;
    while done < steps {
        let n = chunk.min(steps - done);
        let p = TrainPlan {
            max_steps: Some(n),
            seed: plan.seed + done as u64,
            ..plan.clone()
        };
        let out = train_from(&p, &data, &config, params, |_| {})?;
        params = out.params;
        done += n;
        let (first, last, s) = evaluate(&params);
        let mean_loss: f64 = out.steps.iter().map(|r| r.loss).sum::<f64>() / n as f64;
        println!(
            "step {done:5} loss {mean_loss:.5} stage1 {first:.3} dB final {last:.3} dB ssim {s:.4} ({:.0}s)",
            t0.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
