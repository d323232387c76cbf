//! Training-free indicators: NTK condition number κ̂ (trainability), linear
//! region count R̂ (expressivity) and last-layer NTK regression error
//! (generalization), each averaged over independently initialized repeats.

mod kernels;
mod rank;

pub use kernels::{
    condition_number, count_regions, kernel_regression_error, ntk_condition, LAMBDA_MIN_REL,
};
pub use rank::{average_ranks, best_by_rank_sum, rank_sums};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Batch, DataError, DataSource};
use crate::netgen::{compile, Architecture, CompiledNet, NetError, SearchSpace};
use crate::numkit::{Matrix, NumError, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("NTK has no positive eigenvalue (λmax = {0:e})")]
    DegenerateKernel(f64),
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where region-count inputs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionInputs {
    Train,
    /// Uniform on [-√3, √3] per coordinate (unit variance).
    Uniform,
}

/// Per-sample error used by the regression indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MseNorm {
    /// Mean ℓ2 norm of the residual.
    L2,
    /// Mean squared ℓ2 norm.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorConfig {
    pub repeats: usize,
    pub batch_train: usize,
    pub batch_test: usize,
    pub region_batch: usize,
    pub ridge_rel: f64,
    /// Sentinel for rank-deficient NTKs and failed regressions.
    pub kappa_cap: f64,
    pub base_seed: u64,
    pub region_inputs: RegionInputs,
    pub mse_norm: MseNorm,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            repeats: 3,
            batch_train: 64,
            batch_test: 64,
            region_batch: 256,
            ridge_rel: 1e-6,
            kappa_cap: 1e12,
            base_seed: 0,
            region_inputs: RegionInputs::Train,
            mse_norm: MseNorm::L2,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let bad = |m: &str| Err(IndicatorError::InvalidConfig(m.to_string()));
        if self.repeats < 1 {
            return bad("repeats must be at least 1");
        }
        if self.batch_train < 2 || self.batch_test < 2 || self.region_batch < 2 {
            return bad("batch sizes must be at least 2");
        }
        if !(self.ridge_rel.is_finite() && self.ridge_rel >= 0.0) {
            return bad("ridge_rel must be finite and non-negative");
        }
        if !(self.kappa_cap.is_finite() && self.kappa_cap >= 1.0) {
            return bad("kappa_cap must be finite and at least 1");
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64)
            .map(|i| self.base_seed.wrapping_add(i))
            .collect()
    }
}

/// Raw values of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatValue {
    pub kappa: f64,
    pub regions: usize,
    pub mse: f64,
    /// κ̂ is the cap because the NTK was rank deficient or degenerate.
    pub kappa_capped: bool,
    /// The regression failed and `mse` is the cap.
    pub mse_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub arch: String,
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    pub per_repeat: Vec<RepeatValue>,
    pub seeds: Vec<u64>,
}

impl IndicatorReport {
    pub fn from_repeats(arch: String, per_repeat: Vec<RepeatValue>, seeds: Vec<u64>) -> Self {
        let n = per_repeat.len() as f64;
        let mean = |f: &dyn Fn(&RepeatValue) -> f64| per_repeat.iter().map(f).sum::<f64>() / n;
        IndicatorReport {
            arch,
            kappa: mean(&|r| r.kappa),
            regions: mean(&|r| r.regions as f64),
            mse: mean(&|r| r.mse),
            per_repeat,
            seeds,
        }
    }

    /// Report whose aggregates are exactly the given values (used for oracle
    /// tables and fixtures).
    pub fn fixed(arch: String, kappa: f64, regions: f64, mse: f64) -> Self {
        IndicatorReport {
            arch,
            kappa,
            regions,
            mse,
            per_repeat: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn any_sentinel(&self) -> bool {
        self.per_repeat
            .iter()
            .any(|r| r.kappa_capped || r.mse_failed)
    }
}

/// Samples drawn for one repeat.
pub struct RepeatInputs {
    pub train: Batch,
    pub test: Batch,
    pub regions: Matrix,
}

/// RNG streams of one repeat: initialization, train batch, test batch, region inputs.
const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const REGION_STREAM: u64 = 3;

pub fn repeat_inputs(
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
    seed: u64,
) -> Result<RepeatInputs, IndicatorError> {
    let rng = Rng::new(seed);
    let train = data.train_batch(cfg.batch_train, &mut rng.split(TRAIN_STREAM))?;
    let test = data.test_batch(cfg.batch_test, &mut rng.split(TEST_STREAM))?;
    let mut rrng = rng.split(REGION_STREAM);
    let regions = match cfg.region_inputs {
        RegionInputs::Train => data.train_batch(cfg.region_batch, &mut rrng)?.x,
        RegionInputs::Uniform => {
            let n = data.input_len();
            let a = 3f64.sqrt();
            let v = (0..cfg.region_batch * n)
                .map(|_| rrng.uniform(-a, a))
                .collect();
            Matrix::from_vec(cfg.region_batch, n, v)?
        }
    };
    Ok(RepeatInputs {
        train,
        test,
        regions,
    })
}

/// Network of one repeat, freshly Kaiming-initialized from the repeat seed.
pub fn repeat_net(
    arch: &Architecture,
    space: &SearchSpace,
    seed: u64,
) -> Result<CompiledNet, IndicatorError> {
    Ok(compile(
        arch,
        space,
        &mut Rng::new(seed).split(INIT_STREAM),
    )?)
}

/// κ̂ of one net on one batch, with the cap applied on rank deficiency.
fn kappa_value(net: &CompiledNet, x: &Matrix, cap: f64) -> (f64, bool) {
    match ntk_condition(net, x, cap) {
        Ok(v) => v,
        Err(_) => (cap, true),
    }
}

/// Regression error of `net` with training batch `train` and test batch `test`.
pub fn reg_mse_on(
    net: &CompiledNet,
    train: &Batch,
    test: &Batch,
    ridge_rel: f64,
    norm: MseNorm,
) -> Result<f64, IndicatorError> {
    let classes = net.classes();
    let f_train = net.last_layer_features(&train.x)?;
    let f_test = net.last_layer_features(&test.x)?;
    kernel_regression_error(
        &f_train,
        &train.one_hot(classes),
        &f_test,
        &test.one_hot(classes),
        ridge_rel,
        norm,
    )
}

fn check_data(
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
) -> Result<(), IndicatorError> {
    cfg.validate()?;
    if data.input_len() != space.macro_cfg.input_len() || data.classes() != space.macro_cfg.classes
    {
        return Err(IndicatorError::Net(NetError::ShapeMismatch(format!(
            "data has {} inputs / {} classes, space expects {} / {}",
            data.input_len(),
            data.classes(),
            space.macro_cfg.input_len(),
            space.macro_cfg.classes
        ))));
    }
    Ok(())
}

fn one_repeat(
    arch: &Architecture,
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
    seed: u64,
) -> Result<RepeatValue, IndicatorError> {
    let inputs = repeat_inputs(data, cfg, seed)?;
    let net = repeat_net(arch, space, seed)?;
    let (kappa, kappa_capped) = kappa_value(&net, &inputs.train.x, cfg.kappa_cap);
    let regions = count_regions(&net, &inputs.regions)?;
    let (mse, mse_failed) = match reg_mse_on(
        &net,
        &inputs.train,
        &inputs.test,
        cfg.ridge_rel,
        cfg.mse_norm,
    ) {
        Ok(v) => (v, false),
        Err(IndicatorError::Num(_)) => (cfg.kappa_cap, true),
        Err(e) => return Err(e),
    };
    Ok(RepeatValue {
        kappa,
        regions,
        mse,
        kappa_capped,
        mse_failed,
    })
}

fn per_repeat<T: Send>(
    cfg: &IndicatorConfig,
    f: impl Fn(u64) -> Result<T, IndicatorError> + Sync + Send,
) -> Result<Vec<T>, IndicatorError> {
    cfg.seeds().into_par_iter().map(f).collect()
}

/// Mean κ̂ over repeats.
pub fn kappa(
    arch: &Architecture,
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
) -> Result<f64, IndicatorError> {
    check_data(space, data, cfg)?;
    let v = per_repeat(cfg, |seed| {
        let inputs = repeat_inputs(data, cfg, seed)?;
        let net = repeat_net(arch, space, seed)?;
        Ok(kappa_value(&net, &inputs.train.x, cfg.kappa_cap).0)
    })?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean number of distinct activation patterns over repeats.
pub fn regions(
    arch: &Architecture,
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
) -> Result<f64, IndicatorError> {
    check_data(space, data, cfg)?;
    let v = per_repeat(cfg, |seed| {
        let inputs = repeat_inputs(data, cfg, seed)?;
        count_regions(&repeat_net(arch, space, seed)?, &inputs.regions)
    })?;
    Ok(v.iter().sum::<usize>() as f64 / v.len() as f64)
}

/// Mean last-layer NTK regression error over repeats. Failed solves
/// propagate as errors here; [`evaluate`] turns them into sentinels.
pub fn reg_mse(
    arch: &Architecture,
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
) -> Result<f64, IndicatorError> {
    check_data(space, data, cfg)?;
    let v = per_repeat(cfg, |seed| {
        let inputs = repeat_inputs(data, cfg, seed)?;
        let net = repeat_net(arch, space, seed)?;
        reg_mse_on(
            &net,
            &inputs.train,
            &inputs.test,
            cfg.ridge_rel,
            cfg.mse_norm,
        )
    })?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// All three indicators on shared per-repeat networks and batches.
/// Numerical failures become flagged sentinel values; only invalid inputs
/// are errors.
pub fn evaluate(
    arch: &Architecture,
    space: &SearchSpace,
    data: &dyn DataSource,
    cfg: &IndicatorConfig,
) -> Result<IndicatorReport, IndicatorError> {
    check_data(space, data, cfg)?;
    arch.validate(space)?;
    let values = per_repeat(cfg, |seed| one_repeat(arch, space, data, cfg, seed))?;
    Ok(IndicatorReport::from_repeats(
        arch.to_string(space),
        values,
        cfg.seeds(),
    ))
}
