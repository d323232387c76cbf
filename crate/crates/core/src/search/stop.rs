use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    PolicyEntropy,
    PopulationDiversity,
    ArchParamEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The metric did not decrease by the minimum relative amount for a full window.
    Converged,
    HardCap,
}

/// Stops when the metric has not dropped below `(1 − δ)·best` for `window`
/// consecutive steps, or unconditionally at `hard_cap` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub metric: StopMetric,
    pub window: usize,
    pub min_rel_decrease: f64,
    pub hard_cap: usize,
    best: Option<f64>,
    best_step: usize,
}

impl StopRule {
    pub fn new(metric: StopMetric, window: usize, min_rel_decrease: f64, hard_cap: usize) -> Self {
        StopRule {
            metric,
            window: window.max(1),
            min_rel_decrease,
            hard_cap,
            best: None,
            best_step: 0,
        }
    }

    /// Feeds the metric value after `step` completed steps (step 0 is the
    /// initial state) and reports whether to stop.
    pub fn observe(&mut self, step: usize, value: f64) -> Option<StopReason> {
        match self.best {
            Some(b) if value >= b - self.min_rel_decrease * b.abs() => {}
            _ => {
                self.best = Some(value);
                self.best_step = step;
            }
        }
        if step >= self.hard_cap {
            Some(StopReason::HardCap)
        } else if step - self.best_step >= self.window {
            Some(StopReason::Converged)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_stops_at_window() {
        let mut r = StopRule::new(StopMetric::PolicyEntropy, 50, 1e-3, 500);
        let stop = (0..).find_map(|t| r.observe(t, 3.0).map(|why| (t, why)));
        assert_eq!(stop, Some((50, StopReason::Converged)));
    }

    #[test]
    fn decreasing_metric_runs_to_cap() {
        let mut r = StopRule::new(StopMetric::PolicyEntropy, 5, 1e-3, 100);
        let stop = (0..).find_map(|t| {
            r.observe(t, 10.0 * 0.9f64.powi(t as i32))
                .map(|why| (t, why))
        });
        assert_eq!(stop, Some((100, StopReason::HardCap)));
    }

    #[test]
    fn tiny_decreases_do_not_count() {
        let mut r = StopRule::new(StopMetric::PolicyEntropy, 3, 1e-3, 100);
        assert_eq!(r.observe(0, 1.0), None);
        assert_eq!(r.observe(1, 0.9999), None);
        assert_eq!(r.observe(2, 0.9998), None);
        assert_eq!(r.observe(3, 0.9997), Some(StopReason::Converged));
    }
}
