//! Ground truth and analysis: a toy trainer, a CSV accuracy table, Kendall
//! tau-b, exclusive top-10% subsets and operator/depth preferences.

mod stats;
mod tabular;
mod train;

pub use stats::{
    exclusive_subsets, kendall_tau, preference_stats, ExclusiveSubsets, Preference,
    SubsetThresholds,
};
pub use tabular::{
    correlation_report, load_tabular, Accuracy, CorrelationReport, TabularBench, TauPair,
};
pub use train::{accuracy, toy_train, TrainConfig, TrainResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::IndicatorReport;
use crate::netgen::{Architecture, NetError, SearchSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every pair is tied; tau is undefined")]
    AllTied,
    #[error("need at least {needed} architectures, got {found}")]
    TooFewArchs { needed: usize, found: usize },
    #[error("empty subset")]
    EmptySubset,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("architecture `{0}` is not in the table")]
    UnknownArch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Everything `analyze` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub taus: Option<CorrelationReport>,
    pub subsets: ExclusiveSubsets,
    pub preference: BTreeMap<String, Preference>,
}

/// Exclusive subsets with operator preferences of each, plus correlations when
/// a ground-truth table is available. Empty subsets get no preference entry.
pub fn analyze(
    reports: &[IndicatorReport],
    space: &SearchSpace,
    bench: Option<&TabularBench>,
) -> Result<Analysis, BenchError> {
    let subsets = exclusive_subsets(reports)?;
    let mut preference = BTreeMap::new();
    for (name, members) in [
        ("kappa", &subsets.kappa),
        ("regions", &subsets.regions),
        ("mse", &subsets.mse),
    ] {
        let archs = members
            .iter()
            .map(|s| Architecture::parse(s, space))
            .collect::<Result<Vec<_>, _>>()?;
        if !archs.is_empty() {
            preference.insert(name.to_string(), preference_stats(&archs, space)?);
        }
    }
    let taus = bench.map(|b| correlation_report(b, reports)).transpose()?;
    Ok(Analysis {
        taus,
        subsets,
        preference,
    })
}
