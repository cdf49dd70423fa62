use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::AdamState;
use super::patches::{extract_patches, Pair};
use crate::error::{Error, Result};
use crate::metrics::{psnr, stage_loss, LossKind};
use crate::net::{forward_all_stages, NetConfig, NetworkParams};
use crate::tensor::{Graph, Tensor};

/// Optimisation schedule and data pipeline settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainPlan {
    pub epochs: usize,
    /// Stops after this many optimiser steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub flip: bool,
    pub seed: u64,
    pub loss: LossKind,
    pub learning_rate: f64,
    /// Worker threads for per-sample forward/backward; 1 runs inline.
    pub threads: usize,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            epochs: 100,
            max_steps: None,
            batch_size: 18,
            patch_size: 120,
            patch_stride: 40,
            flip: true,
            seed: 0,
            loss: LossKind::NegSsim,
            learning_rate: 2e-4,
            threads: 1,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_size % 4 != 0 {
            return Err(Error::Config(format!(
                "patch_size must be a positive multiple of 4, got {}",
                self.patch_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.patch_stride == 0 {
            return Err(Error::Config("patch_stride must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    /// Batch-mean loss before the update.
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean final-stage PSNR on the training patches seen this epoch,
    /// measured during the forward passes.
    pub mean_psnr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// `epoch,step,loss` lines with a header.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,step,loss\n");
        for r in &self.steps {
            s.push_str(&format!("{},{},{:.17e}\n", r.epoch, r.step, r.loss));
        }
        s
    }
}

/// Loss and parameter gradients for one training sample.
pub struct SampleResult {
    pub loss: f64,
    pub final_psnr: f64,
    pub grads: BTreeMap<String, Tensor>,
}

pub fn sample_gradients(
    params: &NetworkParams,
    config: &NetConfig,
    pair: &Pair,
    kind: LossKind,
) -> Result<SampleResult> {
    let mut g = Graph::new();
    let p = params.bind(&mut g);
    let x = g.constant(pair.rainy.clone());
    let y = g.constant(pair.clean.clone());
    let fwd = forward_all_stages(&mut g, x, &p, config)?;
    let loss = stage_loss(&mut g, &fwd.outputs(), y, kind)?;
    let final_psnr = psnr(g.value(fwd.last().output), &pair.clean, 1.0)?;
    let value = g.value(loss).item();
    let grads = g.backward(loss)?.into_params();
    Ok(SampleResult {
        loss: value,
        final_psnr,
        grads,
    })
}

/// Trains fresh parameters (seeded by `plan.seed`).
pub fn train(plan: &TrainPlan, data: &[Pair], config: &NetConfig) -> Result<TrainOutcome> {
    let params = NetworkParams::init(config, plan.seed);
    train_from(plan, data, config, params, |_| {})
}

/// Mini-batch training: every sample runs all stages and accumulates the
/// per-stage loss; gradients are averaged over the batch and applied with
/// one Adam update per batch.
pub fn train_from(
    plan: &TrainPlan,
    data: &[Pair],
    config: &NetConfig,
    mut params: NetworkParams,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    plan.validate()?;
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("no training pairs".into()));
    }
    let mut patches = Vec::new();
    for pair in data {
        patches.extend(extract_patches(
            pair,
            plan.patch_size,
            plan.patch_stride,
            plan.flip,
        )?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut adam = AdamState::new(plan.learning_rate);
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let budget = plan.max_steps.unwrap_or(usize::MAX);

    'outer: for epoch in 0..plan.epochs {
        if steps.len() >= budget {
            break;
        }
        let mut order: Vec<usize> = (0..patches.len()).collect();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut psnr_sum, mut seen) = (0.0, 0.0, 0usize);
        for batch in order.chunks(plan.batch_size) {
            let results: Vec<Result<SampleResult>> = if plan.threads > 1 {
                pool.install(|| {
                    batch
                        .par_iter()
                        .map(|&i| sample_gradients(&params, config, &patches[i], plan.loss))
                        .collect()
                })
            } else {
                batch
                    .iter()
                    .map(|&i| sample_gradients(&params, config, &patches[i], plan.loss))
                    .collect()
            };
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;

            let n = results.len() as f64;
            let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
            let mut batch_loss = 0.0;
            // fixed reduction order keeps runs bitwise reproducible
            for r in &results {
                batch_loss += r.loss;
                psnr_sum += r.final_psnr;
                for (name, g) in &r.grads {
                    match grads.get_mut(name) {
                        Some(acc) => acc
                            .data_mut()
                            .iter_mut()
                            .zip(g.data())
                            .for_each(|(a, b)| *a += b),
                        None => {
                            grads.insert(name.clone(), g.clone());
                        }
                    }
                }
            }
            for g in grads.values_mut() {
                g.data_mut().iter_mut().for_each(|v| *v /= n);
            }
            batch_loss /= n;
            loss_sum += batch_loss * n;
            seen += results.len();

            adam.step(params.iter_mut(), &grads)?;
            let record = StepRecord {
                epoch,
                step: steps.len(),
                loss: batch_loss,
            };
            on_step(&record);
            steps.push(record);
            if steps.len() >= budget {
                epochs.push(EpochRecord {
                    epoch,
                    mean_loss: loss_sum / seen as f64,
                    mean_psnr: psnr_sum / seen as f64,
                });
                break 'outer;
            }
        }
        epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / seen as f64,
            mean_psnr: psnr_sum / seen as f64,
        });
    }

    Ok(TrainOutcome {
        params,
        steps,
        epochs,
    })
}
