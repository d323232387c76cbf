use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::indicators::IndicatorReport;
use crate::netgen::{cell_depth, Architecture, SearchSpace};

/// Kendall tau-b with tie correction, O(n²).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64, BenchError> {
    if xs.len() != ys.len() {
        return Err(BenchError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(BenchError::TooFewArchs {
            needed: 2,
            found: xs.len(),
        });
    }
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let dx = xs[i].total_cmp(&xs[j]) as i64;
            let dy = ys[i].total_cmp(&ys[j]) as i64;
            if dx == 0 && dy == 0 {
                continue;
            }
            if dx == 0 {
                tie_x += 1;
            } else if dy == 0 {
                tie_y += 1;
            } else if dx == dy {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let denom = (((conc + disc + tie_x) as f64) * ((conc + disc + tie_y) as f64)).sqrt();
    if denom == 0.0 {
        return Err(BenchError::AllTied);
    }
    Ok(((conc - disc) as f64 / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetThresholds {
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    /// Number of architectures admitted by each individual threshold.
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusiveSubsets {
    pub kappa: Vec<String>,
    pub regions: Vec<String>,
    pub mse: Vec<String>,
    pub thresholds: SubsetThresholds,
}

/// Indices of the `k` best reports under `cmp`, ties broken by arch string.
fn top_k(
    reports: &[&IndicatorReport],
    k: usize,
    key: impl Fn(&IndicatorReport) -> f64,
    descending: bool,
) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..reports.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = key(reports[a]).total_cmp(&key(reports[b]));
        let o = if descending { o.reverse() } else { o };
        o.then_with(|| reports[a].arch.cmp(&reports[b].arch))
    });
    let mut pass = vec![false; reports.len()];
    for &i in &idx[..k] {
        pass[i] = true;
    }
    pass
}

/// Architectures that are in the top 10% by exactly one indicator. Each
/// threshold admits exactly ⌈0.1·N⌉ architectures: ties at the cutoff value
/// are resolved by architecture string.
pub fn exclusive_subsets(reports: &[IndicatorReport]) -> Result<ExclusiveSubsets, BenchError> {
    if reports.len() < 10 {
        return Err(BenchError::TooFewArchs {
            needed: 10,
            found: reports.len(),
        });
    }
    let refs: Vec<&IndicatorReport> = reports.iter().collect();
    let k = (reports.len() as f64 * 0.1).ceil() as usize;
    let pk = top_k(&refs, k, |r| r.kappa, false);
    let pr = top_k(&refs, k, |r| r.regions, true);
    let pm = top_k(&refs, k, |r| r.mse, false);
    let cutoff =
        |pass: &[bool], key: fn(&IndicatorReport) -> f64, worst: fn(f64, f64) -> f64, init: f64| {
            refs.iter()
                .zip(pass)
                .filter(|(_, &p)| p)
                .fold(init, |acc, (r, _)| worst(acc, key(r)))
        };
    let thresholds = SubsetThresholds {
        kappa: cutoff(&pk, |r| r.kappa, f64::max, f64::NEG_INFINITY),
        regions: cutoff(&pr, |r| r.regions, f64::min, f64::INFINITY),
        mse: cutoff(&pm, |r| r.mse, f64::max, f64::NEG_INFINITY),
        top_k: k,
    };
    let pick = |a: &[bool], b: &[bool], c: &[bool]| {
        let mut v: Vec<String> = (0..refs.len())
            .filter(|&i| a[i] && !b[i] && !c[i])
            .map(|i| refs[i].arch.clone())
            .collect();
        v.sort();
        v
    };
    Ok(ExclusiveSubsets {
        kappa: pick(&pk, &pr, &pm),
        regions: pick(&pr, &pk, &pm),
        mse: pick(&pm, &pk, &pr),
        thresholds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    /// Fraction of all edge (or vertex) slots holding each operator.
    pub op_ratios: BTreeMap<String, f64>,
    pub mean_depth: f64,
    pub count: usize,
}

pub fn preference_stats(
    subset: &[Architecture],
    space: &SearchSpace,
) -> Result<Preference, BenchError> {
    if subset.is_empty() {
        return Err(BenchError::EmptySubset);
    }
    let mut counts = vec![0usize; space.op_vocab.len()];
    let mut slots = 0usize;
    let mut depth = 0usize;
    for a in subset {
        a.validate(space)?;
        for &o in a.ops() {
            counts[o] += 1;
            slots += 1;
        }
        depth += cell_depth(a, space);
    }
    let op_ratios = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (space.op_name(i).to_string(), c as f64 / slots as f64))
        .collect();
    Ok(Preference {
        op_ratios,
        mean_depth: depth as f64 / subset.len() as f64,
        count: subset.len(),
    })
}
