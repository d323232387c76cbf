//! Search methods driven only by indicator reports: REINFORCE, aging
//! evolution and FP-NAS, under one sample → evaluate → update loop.

mod driver;
mod evolution;
mod policy;
mod reward;
mod stop;

pub use driver::{
    argmax_arch, run_search, LogEntry, MethodState, Observer, RunLog, SearchOutcome, SearchState,
};
pub use evolution::{diversity, Member, Population};
pub use policy::{
    entropy, fp_sample_count, fp_update, reinforce_step, softmax, FpState, Policy, PolicyState,
    POLICY_MAX_REJECTIONS,
};
pub use reward::{teg_reward, RewardNormalizer, RewardParts, MIN_RANGE};
pub use stop::{StopMetric, StopReason, StopRule};

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSource;
use crate::indicators::{evaluate, IndicatorConfig, IndicatorError, IndicatorReport};
use crate::netgen::{enumerate_cells, Architecture, NetError, SearchSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("non-finite reward or policy update")]
    NonFiniteGradient,
    #[error("architecture `{0}` is not in the evaluator's table")]
    UnknownArch(String),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("observer failed: {0}")]
    Observer(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Reinforce,
    Evolution,
    FpNas,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Reinforce => "reinforce",
            Method::Evolution => "evolution",
            Method::FpNas => "fpnas",
        }
    }

    pub fn default_hard_cap(self) -> usize {
        match self {
            Method::Reinforce => 500,
            Method::Evolution => 1000,
            Method::FpNas => 100,
        }
    }

    pub fn stop_metric(self) -> StopMetric {
        match self {
            Method::Reinforce => StopMetric::PolicyEntropy,
            Method::Evolution => StopMetric::PopulationDiversity,
            Method::FpNas => StopMetric::ArchParamEntropy,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reinforce" | "rl" => Ok(Method::Reinforce),
            "evolution" | "ev" => Ok(Method::Evolution),
            "fpnas" | "fp-nas" => Ok(Method::FpNas),
            _ => Err(format!(
                "unknown method `{s}` (expected reinforce, evolution or fpnas)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub rl_lr: f64,
    pub gamma: f64,
    pub fp_lr: f64,
    pub fp_lambda: f64,
    pub population: usize,
    pub tournament: usize,
    pub window: usize,
    pub min_rel_decrease: f64,
    /// Steps (RL), post-warm-up steps (evolution) or epochs (FP-NAS).
    /// Defaults to 500, 1000 and 100 respectively.
    pub hard_cap: Option<usize>,
    /// Use the reward signs exactly as printed (+ for every indicator change).
    pub literal_reward_signs: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rl_lr: 0.04,
            gamma: 0.9,
            fp_lr: 0.1,
            fp_lambda: 0.25,
            population: 256,
            tournament: 64,
            window: 50,
            min_rel_decrease: 1e-3,
            hard_cap: None,
            literal_reward_signs: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if !(self.rl_lr.is_finite()
            && self.fp_lr.is_finite()
            && self.rl_lr > 0.0
            && self.fp_lr > 0.0)
        {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(self.fp_lambda.is_finite() && self.fp_lambda >= 0.0) {
            return bad("fp_lambda must be non-negative");
        }
        if self.population < 1 || self.tournament < 1 || self.tournament > self.population {
            return bad("need 1 <= tournament <= population");
        }
        if self.hard_cap == Some(0) {
            return bad("hard_cap must be at least 1");
        }
        if self.window < 1 {
            return bad("window must be at least 1");
        }
        Ok(())
    }

    pub fn hard_cap_for(&self, method: Method) -> usize {
        self.hard_cap.unwrap_or_else(|| method.default_hard_cap())
    }
}

/// Source of indicator reports for architectures.
pub trait Evaluator: Sync {
    fn space(&self) -> &SearchSpace;
    fn evaluate(&self, arch: &Architecture) -> Result<IndicatorReport, SearchError>;

    /// Evaluates in parallel; results are in input order.
    fn evaluate_all(&self, archs: &[Architecture]) -> Result<Vec<IndicatorReport>, SearchError> {
        archs.par_iter().map(|a| self.evaluate(a)).collect()
    }
}

/// Computes indicators on demand and memoizes them per architecture.
/// Reports are deterministic per architecture, so caching does not change
/// results.
pub struct TegEvaluator<'a> {
    space: SearchSpace,
    data: &'a dyn DataSource,
    cfg: IndicatorConfig,
    cache: Mutex<HashMap<Architecture, IndicatorReport>>,
}

impl<'a> TegEvaluator<'a> {
    pub fn new(
        space: SearchSpace,
        data: &'a dyn DataSource,
        cfg: IndicatorConfig,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        Ok(TegEvaluator {
            space,
            data,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &IndicatorConfig {
        &self.cfg
    }
}

impl Evaluator for TegEvaluator<'_> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, arch: &Architecture) -> Result<IndicatorReport, SearchError> {
        if let Some(r) = self.cache.lock().expect("cache lock").get(arch) {
            return Ok(r.clone());
        }
        let r = evaluate(arch, &self.space, self.data, &self.cfg)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(arch.clone(), r.clone());
        Ok(r)
    }
}

/// Looks reports up in a precomputed table keyed by architecture string.
#[derive(Debug, Clone)]
pub struct TableEvaluator {
    space: SearchSpace,
    table: HashMap<String, IndicatorReport>,
}

impl TableEvaluator {
    pub fn new(space: SearchSpace, reports: impl IntoIterator<Item = IndicatorReport>) -> Self {
        TableEvaluator {
            space,
            table: reports.into_iter().map(|r| (r.arch.clone(), r)).collect(),
        }
    }

    /// Scores every architecture of an enumerable space.
    pub fn exhaustive(inner: &dyn Evaluator) -> Result<Self, SearchError> {
        let archs = enumerate_cells(inner.space())?;
        Ok(Self::new(
            inner.space().clone(),
            inner.evaluate_all(&archs)?,
        ))
    }

    pub fn reports(&self) -> impl Iterator<Item = &IndicatorReport> {
        self.table.values()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Evaluator for TableEvaluator {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, arch: &Architecture) -> Result<IndicatorReport, SearchError> {
        let key = arch.to_string(&self.space);
        self.table
            .get(&key)
            .cloned()
            .ok_or(SearchError::UnknownArch(key))
    }
}
