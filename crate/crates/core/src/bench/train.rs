use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::data::{Batch, BlobDataset};
use crate::netgen::{compile, Architecture, CompiledNet, SearchSpace};
use crate::numkit::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate; decays to zero on a cosine schedule.
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

/// Final accuracies in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub train_acc: f64,
    pub test_acc: f64,
    /// Loss became non-finite; both accuracies are reported as 0.
    pub diverged: bool,
}

fn softmax_xent_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mut g: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let loss = -(g[label].max(1e-300)).ln();
    g[label] -= 1.0;
    (loss, g)
}

/// Top-1 accuracy in percent.
pub fn accuracy(net: &CompiledNet, data: &Batch) -> f64 {
    let correct: usize = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let t = net.forward_sample(data.x.row(i));
            let l = t.logits(net);
            let pred = (0..l.len()).fold(0, |b, k| if l[k] > l[b] { k } else { b });
            usize::from(pred == data.y[i])
        })
        .sum();
    100.0 * correct as f64 / data.len() as f64
}

/// Mini-batch SGD with momentum and cosine decay on the full training split.
/// Per-sample gradients are computed in parallel and summed in sample order,
/// so results do not depend on the thread count.
pub fn toy_train(
    arch: &Architecture,
    space: &SearchSpace,
    data: &BlobDataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainResult, BenchError> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(BenchError::InvalidConfig(format!("{cfg:?}")));
    }
    let mut net = compile(arch, space, &mut rng.split(0))?;
    let mut order_rng = rng.split(1);
    let n = data.train.len();
    let p = net.param_count();
    let mut velocity = vec![0.0; p];
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total = (cfg.epochs * steps_per_epoch) as f64;
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let per_sample: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let t = net.forward_sample(data.train.x.row(i));
                    let (loss, dl) = softmax_xent_grad(t.logits(&net), data.train.y[i]);
                    let mut g = vec![0.0; p];
                    net.backward_sample(&t, &dl, &mut g);
                    (loss, g)
                })
                .collect();
            let mut grad = vec![0.0; p];
            let mut loss = 0.0;
            for (l, g) in &per_sample {
                loss += l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Ok(TrainResult {
                    train_acc: 0.0,
                    test_acc: 0.0,
                    diverged: true,
                });
            }
            let lr = cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total).cos());
            let scale = 1.0 / chunk.len() as f64;
            for ((w, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g * scale + cfg.weight_decay * *w;
                *w -= lr * *v;
            }
            step += 1;
        }
    }
    Ok(TrainResult {
        train_acc: accuracy(&net, &data.train),
        test_acc: accuracy(&net, &data.test),
        diverged: false,
    })
}
