//! Labeled toy image data shared by the indicators and the toy trainer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("requested {requested} samples but the split holds {available}")]
    BatchTooLarge { requested: usize, available: usize },
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
}

/// Inputs with integer class labels, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn one_hot(&self, classes: usize) -> Matrix {
        let mut m = Matrix::zeros(self.y.len(), classes);
        for (i, &c) in self.y.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }
}

/// Anything that can hand out labeled train and test batches.
pub trait DataSource: Sync {
    fn input_len(&self) -> usize;
    fn classes(&self) -> usize;
    fn train_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch, DataError>;
    /// Drawn from a split disjoint from the training split.
    fn test_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch, DataError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobConfig {
    pub train: usize,
    pub test: usize,
    pub classes: usize,
    pub channels: usize,
    pub size: usize,
    /// Standard deviation of the per-pixel noise; prototypes have unit scale.
    pub noise: f64,
    /// Remove each prototype channel's spatial mean.
    pub centered: bool,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            train: 512,
            test: 512,
            classes: 10,
            channels: 3,
            size: 8,
            noise: 1.0,
            centered: false,
            seed: 0,
        }
    }
}

/// Synthetic blobs: each class is a random standard-normal prototype image,
/// and samples add i.i.d. Gaussian pixel noise. With `centered`, each
/// prototype channel has zero spatial mean, which starves purely linear pooled
/// models of signal.
#[derive(Debug, Clone)]
pub struct BlobDataset {
    pub config: BlobConfig,
    pub train: Batch,
    pub test: Batch,
}

impl BlobDataset {
    pub fn new(config: BlobConfig) -> Result<Self, DataError> {
        if config.classes < 2
            || config.channels == 0
            || config.size == 0
            || config.train == 0
            || config.test == 0
        {
            return Err(DataError::InvalidConfig(format!("{config:?}")));
        }
        if !(config.noise.is_finite() && config.noise >= 0.0) {
            return Err(DataError::InvalidConfig(format!(
                "noise must be finite and >= 0, got {}",
                config.noise
            )));
        }
        let mut rng = Rng::new(config.seed);
        let hw = config.size * config.size;
        let len = config.channels * hw;
        let prototypes: Vec<Vec<f64>> = (0..config.classes)
            .map(|_| {
                let mut p: Vec<f64> = (0..len).map(|_| rng.standard_normal()).collect();
                for ch in p.chunks_mut(hw).filter(|_| config.centered) {
                    let mean = ch.iter().sum::<f64>() / hw as f64;
                    ch.iter_mut().for_each(|v| *v -= mean);
                }
                p
            })
            .collect();
        let split = |n: usize, rng: &mut Rng| {
            let mut data = Vec::with_capacity(n * len);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let c = i % config.classes;
                y.push(c);
                data.extend(
                    prototypes[c]
                        .iter()
                        .map(|&p| p + config.noise * rng.standard_normal()),
                );
            }
            Batch {
                x: Matrix::from_vec(n, len, data).expect("sized above"),
                y,
            }
        };
        let mut train_rng = rng.split(0);
        let mut test_rng = rng.split(1);
        let train = split(config.train, &mut train_rng);
        let test = split(config.test, &mut test_rng);
        Ok(BlobDataset {
            config,
            train,
            test,
        })
    }
}

fn draw(split: &Batch, n: usize, rng: &mut Rng) -> Result<Batch, DataError> {
    if n > split.len() {
        return Err(DataError::BatchTooLarge {
            requested: n,
            available: split.len(),
        });
    }
    let idx = rng.sample_without_replacement(split.len(), n);
    let cols = split.x.cols();
    let mut data = Vec::with_capacity(n * cols);
    for &i in &idx {
        data.extend_from_slice(split.x.row(i));
    }
    Ok(Batch {
        x: Matrix::from_vec(n, cols, data).expect("sized above"),
        y: idx.iter().map(|&i| split.y[i]).collect(),
    })
}

impl DataSource for BlobDataset {
    fn input_len(&self) -> usize {
        self.train.x.cols()
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn train_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch, DataError> {
        draw(&self.train, n, rng)
    }

    fn test_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch, DataError> {
        draw(&self.test, n, rng)
    }
}
