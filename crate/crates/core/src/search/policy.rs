use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::netgen::{Architecture, SearchSpace};
use crate::numkit::Rng;

/// Independent categorical distribution per architecture decision,
/// parameterized by logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub logits: Vec<Vec<f64>>,
}

/// Redraw budget for policy samples. A uniform policy over graph edges
/// yields a valid graph about once in 500 draws.
pub const POLICY_MAX_REJECTIONS: usize = 100_000;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Sum over decisions of the Shannon entropy (nats) of each distribution.
pub fn entropy(dist: &[Vec<f64>]) -> f64 {
    dist.iter()
        .flat_map(|p| p.iter())
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

impl Policy {
    /// Uniform policy (all logits zero).
    pub fn uniform(space: &SearchSpace) -> Self {
        Policy {
            logits: (0..space.num_choices())
                .map(|i| vec![0.0; space.choice_arity(i)])
                .collect(),
        }
    }

    /// Policy whose probabilities are the blocks of `flat` (laid out as in
    /// [`Policy::flat_probs`]). Zero probabilities map to a very negative logit.
    pub fn from_flat_probs(space: &SearchSpace, flat: &[f64]) -> Result<Self, SearchError> {
        let arities: Vec<usize> = (0..space.num_choices())
            .map(|i| space.choice_arity(i))
            .collect();
        if flat.len() != arities.iter().sum::<usize>() {
            return Err(SearchError::InvalidConfig(format!(
                "distribution has {} entries, space needs {}",
                flat.len(),
                arities.iter().sum::<usize>()
            )));
        }
        let mut logits = Vec::with_capacity(arities.len());
        let mut at = 0;
        for a in arities {
            logits.push(
                flat[at..at + a]
                    .iter()
                    .map(|&p| p.max(1e-300).ln())
                    .collect(),
            );
            at += a;
        }
        Ok(Policy { logits })
    }

    pub fn probs(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs())
    }

    /// Concatenated per-decision probabilities.
    pub fn flat_probs(&self) -> Vec<f64> {
        self.probs().concat()
    }

    pub fn log_prob(&self, choices: &[usize]) -> f64 {
        self.probs()
            .iter()
            .zip(choices)
            .map(|(p, &c)| p[c].ln())
            .sum()
    }

    /// Draws an architecture; invalid graph draws are redrawn, up to
    /// [`POLICY_MAX_REJECTIONS`] times.
    pub fn sample(&self, space: &SearchSpace, rng: &mut Rng) -> Result<Architecture, SearchError> {
        let probs = self.probs();
        for _ in 0..POLICY_MAX_REJECTIONS {
            let choices: Vec<usize> = probs.iter().map(|p| rng.categorical(p)).collect();
            let arch = Architecture::from_choices(space, &choices);
            if arch.validate(space).is_ok() {
                return Ok(arch);
            }
        }
        Err(SearchError::Net(
            crate::netgen::NetError::SamplingExhausted(POLICY_MAX_REJECTIONS),
        ))
    }

    /// Per-decision argmax; ties go to the lower index.
    pub fn argmax_choices(&self) -> Vec<usize> {
        self.logits
            .iter()
            .map(|l| (0..l.len()).fold(0, |b, k| if l[k] > l[b] { k } else { b }))
            .collect()
    }

    /// Adds `scale·(onehot(choices) − p)` to the logits, i.e. `scale` times
    /// the gradient of `log p(choices)`.
    fn ascend(&mut self, choices: &[usize], scale: f64, probs: &[Vec<f64>]) {
        for ((l, p), &c) in self.logits.iter_mut().zip(probs).zip(choices) {
            for (k, (lk, pk)) in l.iter_mut().zip(p).enumerate() {
                let onehot = if k == c { 1.0 } else { 0.0 };
                *lk += scale * (onehot - pk);
            }
        }
    }

    fn check_finite(&self) -> Result<(), SearchError> {
        if self.logits.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SearchError::NonFiniteGradient)
        }
    }
}

/// REINFORCE state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub policy: Policy,
    pub lr: f64,
    pub baseline: f64,
    pub gamma: f64,
    pub step: usize,
}

impl PolicyState {
    pub fn new(space: &SearchSpace, lr: f64, gamma: f64) -> Self {
        PolicyState {
            policy: Policy::uniform(space),
            lr,
            baseline: 0.0,
            gamma,
            step: 0,
        }
    }
}

/// One policy-gradient step for the sampled decisions `choices` with reward
/// `r`. The baseline is updated first, b ← γb + (1−γ)r, then
/// θ ← θ + η(r − b)∇log p(choices).
pub fn reinforce_step(
    state: &mut PolicyState,
    choices: &[usize],
    reward: f64,
) -> Result<(), SearchError> {
    if !reward.is_finite() {
        return Err(SearchError::NonFiniteGradient);
    }
    state.baseline = state.gamma * state.baseline + (1.0 - state.gamma) * reward;
    let advantage = reward - state.baseline;
    let probs = state.policy.probs();
    state.policy.ascend(choices, state.lr * advantage, &probs);
    state.step += 1;
    state.policy.check_finite()
}

/// FP-NAS state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpState {
    pub policy: Policy,
    pub lr: f64,
    pub lambda: f64,
    pub epoch: usize,
}

impl FpState {
    pub fn new(space: &SearchSpace, lr: f64, lambda: f64) -> Self {
        FpState {
            policy: Policy::uniform(space),
            lr,
            lambda,
            epoch: 0,
        }
    }

    /// Samples per epoch: max(1, round(λ·H)).
    pub fn sample_count(&self) -> usize {
        fp_sample_count(self.lambda, self.policy.entropy())
    }
}

pub fn fp_sample_count(lambda: f64, entropy: f64) -> usize {
    ((lambda * entropy).round() as usize).max(1)
}

/// Descends f = −Σᵢ wᵢ log p(aᵢ) with w = softmax(rewards).
pub fn fp_update(
    state: &mut FpState,
    batch: &[Vec<usize>],
    rewards: &[f64],
) -> Result<(), SearchError> {
    if rewards.iter().any(|r| !r.is_finite()) || batch.len() != rewards.len() || batch.is_empty() {
        return Err(SearchError::NonFiniteGradient);
    }
    let w = softmax(rewards);
    let probs = state.policy.probs();
    for (choices, wi) in batch.iter().zip(&w) {
        state.policy.ascend(choices, state.lr * wi, &probs);
    }
    state.epoch += 1;
    state.policy.check_finite()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_entropy() {
        let p = Policy::uniform(&SearchSpace::cell201());
        assert!((p.entropy() - 6.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn baseline_ema() {
        let space = SearchSpace::toy();
        let mut s = PolicyState::new(&space, 0.04, 0.9);
        reinforce_step(&mut s, &[0, 1, 2], 1.0).unwrap();
        assert!((s.baseline - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_advantage_keeps_logits() {
        let space = SearchSpace::toy();
        let mut s = PolicyState::new(&space, 0.04, 0.9);
        s.baseline = 0.5;
        let before = s.policy.clone();
        reinforce_step(&mut s, &[0, 1, 2], 0.5).unwrap();
        assert_eq!(s.policy, before);
    }

    #[test]
    fn positive_advantage_raises_chosen_probs() {
        let space = SearchSpace::cell201();
        let mut s = PolicyState::new(&space, 0.04, 0.9);
        s.policy.logits[2][4] = 0.7;
        let choices = [1, 2, 3, 4, 0, 1];
        let before = s.policy.probs();
        reinforce_step(&mut s, &choices, 1.0).unwrap();
        let after = s.policy.probs();
        for (e, &c) in choices.iter().enumerate() {
            assert!(after[e][c] > before[e][c]);
            assert!((after[e].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rewards_are_plain_ascent() {
        let space = SearchSpace::toy();
        let batch = vec![vec![0, 1, 2], vec![2, 2, 1]];
        let mut a = FpState::new(&space, 0.1, 0.25);
        fp_update(&mut a, &batch, &[0.3, 0.3]).unwrap();
        let mut b = Policy::uniform(&space);
        let probs = b.probs();
        for c in &batch {
            b.ascend(c, 0.1 / 2.0, &probs);
        }
        for (x, y) in a
            .policy
            .logits
            .iter()
            .flatten()
            .zip(b.logits.iter().flatten())
        {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_reward_weight() {
        let w = softmax(&[10.0, 0.0]);
        assert!(w[0] >= 0.99);
    }

    #[test]
    fn sample_count_of_uniform() {
        // H = ln 27 over the toy space
        let s = FpState::new(&SearchSpace::toy(), 0.1, 0.25);
        assert_eq!(
            s.sample_count(),
            ((0.25 * 27f64.ln()).round() as usize).max(1)
        );
    }
}
