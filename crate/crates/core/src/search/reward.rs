use serde::{Deserialize, Serialize};

use crate::indicators::IndicatorReport;

/// Ranges narrower than this give a zero term.
pub const MIN_RANGE: f64 = 1e-12;

/// Reward terms of one observation. `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    pub total: f64,
}

/// Running-range normalization of successive indicator changes.
///
/// Each term is `s·(v_t − v_{t−1}) / (max_t − min_t)` with the running
/// extremes including `v_t`, clamped to [−1, 1]. By default κ̂ and MSE carry
/// `s = −1` so that the reward rises when predicted quality rises; `literal`
/// uses `s = +1` for all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    prev: Option<[f64; 3]>,
    max: [f64; 3],
    min: [f64; 3],
    literal: bool,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        Self::new(false)
    }
}

impl RewardNormalizer {
    pub fn new(literal: bool) -> Self {
        RewardNormalizer {
            prev: None,
            max: [f64::NEG_INFINITY; 3],
            min: [f64::INFINITY; 3],
            literal,
        }
    }

    fn signs(&self) -> [f64; 3] {
        if self.literal {
            [1.0, 1.0, 1.0]
        } else {
            [-1.0, 1.0, -1.0]
        }
    }

    pub fn observe_values(&mut self, v: [f64; 3]) -> RewardParts {
        for k in 0..3 {
            self.max[k] = self.max[k].max(v[k]);
            self.min[k] = self.min[k].min(v[k]);
        }
        let mut terms = [0.0; 3];
        if let Some(prev) = self.prev {
            let s = self.signs();
            for k in 0..3 {
                let range = self.max[k] - self.min[k];
                if range >= MIN_RANGE {
                    terms[k] = (s[k] * (v[k] - prev[k]) / range).clamp(-1.0, 1.0);
                }
            }
        }
        self.prev = Some(v);
        RewardParts {
            kappa: terms[0],
            regions: terms[1],
            mse: terms[2],
            total: terms[0] + terms[1] + terms[2],
        }
    }

    pub fn observe(&mut self, report: &IndicatorReport) -> RewardParts {
        self.observe_values([report.kappa, report.regions, report.mse])
    }
}

/// Composite reward of `report`, updating the running statistics.
pub fn teg_reward(norm: &mut RewardNormalizer, report: &IndicatorReport) -> f64 {
    norm.observe(report).total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_trace() {
        let mut n = RewardNormalizer::default();
        let ks: Vec<f64> = [10.0, 5.0, 20.0]
            .iter()
            .map(|&k| n.observe_values([k, 1.0, 1.0]).kappa)
            .collect();
        assert_eq!(ks, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn literal_flips_kappa_and_mse() {
        let mut a = RewardNormalizer::new(false);
        let mut b = RewardNormalizer::new(true);
        for v in [[3.0, 2.0, 0.5], [1.0, 4.0, 0.7]] {
            let (x, y) = (a.observe_values(v), b.observe_values(v));
            assert_eq!(x.kappa, -y.kappa);
            assert_eq!(x.mse, -y.mse);
            assert_eq!(x.regions, y.regions);
        }
    }

    #[test]
    fn first_and_flat_are_zero() {
        let mut n = RewardNormalizer::default();
        assert_eq!(n.observe_values([1.0, 2.0, 3.0]).total, 0.0);
        assert_eq!(n.observe_values([1.0, 2.0, 3.0]).total, 0.0);
    }
}
