use serde::{Deserialize, Serialize};

use super::evolution::{diversity, Member, Population};
use super::policy::{fp_update, reinforce_step, FpState, Policy, PolicyState};
use super::{Evaluator, Method, RewardNormalizer, SearchConfig, SearchError, StopReason, StopRule};
use crate::indicators::IndicatorReport;
use crate::netgen::{mutate, random_arch, Architecture, SearchSpace};
use crate::numkit::Rng;

/// One evaluation as persisted in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Step at which the evaluation happened; evolution warm-up is step 0.
    pub t: usize,
    pub arch: String,
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    pub reward: f64,
    pub method: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
}

impl RunLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(RunLog { entries })
    }
}

/// Hooks called as a search progresses.
pub trait Observer {
    fn evaluation(&mut self, _entry: &LogEntry) -> Result<(), SearchError> {
        Ok(())
    }

    /// Called after initialization (step 0) and after every step.
    fn step(&mut self, _state: &SearchState) -> Result<(), SearchError> {
        Ok(())
    }
}

impl Observer for () {}

impl Observer for RunLog {
    fn evaluation(&mut self, entry: &LogEntry) -> Result<(), SearchError> {
        self.entries.push(entry.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodState {
    Reinforce(PolicyState),
    Evolution(Population),
    FpNas(FpState),
}

/// Complete resumable state of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub method: Method,
    pub space: SearchSpace,
    pub config: SearchConfig,
    pub state: MethodState,
    pub norm: RewardNormalizer,
    pub rng: Rng,
    pub step: usize,
    pub evaluations: usize,
    pub stop: StopRule,
    pub stopped: Option<StopReason>,
}

/// Result of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Architecture,
    pub best_arch: String,
    pub stop_reason: StopReason,
    pub evaluations: usize,
    pub steps: usize,
    pub log: RunLog,
    /// Distribution vector after each step, starting with step 0.
    pub trajectory: Vec<Vec<f64>>,
}

impl SearchState {
    /// Initial state; evolution evaluates its random warm-up population here.
    pub fn start(
        method: Method,
        config: SearchConfig,
        seed: u64,
        evaluator: &dyn Evaluator,
        observer: &mut dyn Observer,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        let space = evaluator.space().clone();
        space.validate()?;
        let state = match method {
            Method::Reinforce => {
                MethodState::Reinforce(PolicyState::new(&space, config.rl_lr, config.gamma))
            }
            Method::Evolution => {
                MethodState::Evolution(Population::new(config.population, config.tournament))
            }
            Method::FpNas => {
                MethodState::FpNas(FpState::new(&space, config.fp_lr, config.fp_lambda))
            }
        };
        let stop = StopRule::new(
            method.stop_metric(),
            config.window,
            config.min_rel_decrease,
            config.hard_cap_for(method),
        );
        let mut s = SearchState {
            method,
            norm: RewardNormalizer::new(config.literal_reward_signs),
            space,
            config,
            state,
            rng: Rng::new(seed),
            step: 0,
            evaluations: 0,
            stop,
            stopped: None,
        };
        if method == Method::Evolution {
            let archs = (0..s.config.population)
                .map(|_| random_arch(&s.space, &mut s.rng))
                .collect::<Result<Vec<_>, _>>()?;
            let reports = evaluator.evaluate_all(&archs)?;
            for (arch, report) in archs.into_iter().zip(reports) {
                s.record(&arch, &report, observer)?;
                s.push_member(arch, report);
            }
        }
        let m = s.metric();
        s.stopped = s.stop.observe(0, m);
        observer.step(&s)?;
        Ok(s)
    }

    /// Same state with a fresh RNG stream; used to spawn diverging children.
    pub fn spawn(&self, seed: u64) -> SearchState {
        let mut child = self.clone();
        child.rng = Rng::new(seed);
        child
    }

    fn record(
        &mut self,
        arch: &Architecture,
        report: &IndicatorReport,
        observer: &mut dyn Observer,
    ) -> Result<f64, SearchError> {
        let reward = self.norm.observe(report).total;
        if !reward.is_finite() {
            return Err(SearchError::NonFiniteGradient);
        }
        self.evaluations += 1;
        observer.evaluation(&LogEntry {
            t: self.step,
            arch: arch.to_string(&self.space),
            kappa: report.kappa,
            regions: report.regions,
            mse: report.mse,
            reward,
            method: self.method.name().to_string(),
        })?;
        Ok(reward)
    }

    fn push_member(&mut self, arch: Architecture, report: IndicatorReport) {
        if let MethodState::Evolution(pop) = &mut self.state {
            pop.push(Member {
                arch,
                report,
                born: self.evaluations - 1,
            });
        }
    }

    /// Value watched by the stop rule.
    pub fn metric(&self) -> f64 {
        match &self.state {
            MethodState::Reinforce(p) => p.policy.entropy(),
            MethodState::FpNas(f) => f.policy.entropy(),
            MethodState::Evolution(pop) => {
                let archs: Vec<&Architecture> = pop.members.iter().map(|m| &m.arch).collect();
                diversity(&archs, &self.space)
            }
        }
    }

    /// Concatenated per-decision probabilities, or the population's mean
    /// one-hot encoding for evolution.
    pub fn distribution(&self) -> Vec<f64> {
        match &self.state {
            MethodState::Reinforce(p) => p.policy.flat_probs(),
            MethodState::FpNas(f) => f.policy.flat_probs(),
            MethodState::Evolution(pop) => pop.mean_one_hot(&self.space),
        }
    }

    /// One iteration of the method's loop, ignoring the stop rule.
    pub fn step(
        &mut self,
        evaluator: &dyn Evaluator,
        observer: &mut dyn Observer,
    ) -> Result<(), SearchError> {
        self.step += 1;
        let mut state = std::mem::replace(
            &mut self.state,
            MethodState::Evolution(Population::new(0, 0)),
        );
        let result = self.step_inner(&mut state, evaluator, observer);
        self.state = state;
        result?;
        let m = self.metric();
        self.stopped = self.stop.observe(self.step, m);
        observer.step(self)
    }

    fn step_inner(
        &mut self,
        state: &mut MethodState,
        evaluator: &dyn Evaluator,
        observer: &mut dyn Observer,
    ) -> Result<(), SearchError> {
        match state {
            MethodState::Reinforce(ps) => {
                let arch = ps.policy.sample(&self.space, &mut self.rng)?;
                let report = evaluator.evaluate(&arch)?;
                let reward = self.record(&arch, &report, observer)?;
                reinforce_step(ps, &arch.choices(&self.space), reward)
            }
            MethodState::Evolution(pop) => {
                let idx = self
                    .rng
                    .sample_without_replacement(pop.len(), pop.tournament);
                let winner = pop.best_of(&idx).expect("tournament is non-empty");
                let child = mutate(&pop.members[winner].arch, &self.space, &mut self.rng)?;
                let report = evaluator.evaluate(&child)?;
                self.record(&child, &report, observer)?;
                pop.push(Member {
                    arch: child,
                    report,
                    born: self.evaluations - 1,
                });
                Ok(())
            }
            MethodState::FpNas(fs) => {
                let n = fs.sample_count();
                let archs = (0..n)
                    .map(|_| fs.policy.sample(&self.space, &mut self.rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let reports = evaluator.evaluate_all(&archs)?;
                let mut rewards = Vec::with_capacity(n);
                for (a, r) in archs.iter().zip(&reports) {
                    rewards.push(self.record(a, r, observer)?);
                }
                let batch: Vec<Vec<usize>> = archs.iter().map(|a| a.choices(&self.space)).collect();
                fp_update(fs, &batch, &rewards)
            }
        }
    }

    /// Steps until the stop rule fires.
    pub fn run(
        &mut self,
        evaluator: &dyn Evaluator,
        observer: &mut dyn Observer,
    ) -> Result<StopReason, SearchError> {
        while self.stopped.is_none() {
            self.step(evaluator, observer)?;
        }
        Ok(self.stopped.expect("loop exits on stop"))
    }

    /// Final architecture: per-decision argmax of the policy, or the
    /// population's best by rank-sum.
    pub fn derive(&self) -> Result<Architecture, SearchError> {
        let policy = match &self.state {
            MethodState::Evolution(pop) => {
                return pop
                    .best()
                    .map(|m| m.arch.clone())
                    .ok_or_else(|| SearchError::InvalidConfig("empty population".into()))
            }
            MethodState::Reinforce(p) => &p.policy,
            MethodState::FpNas(f) => &f.policy,
        };
        argmax_arch(policy, &self.space)
    }
}

/// Per-decision argmax of `policy`. When that violates graph constraints,
/// the most probable valid architecture among a fixed set of draws.
pub fn argmax_arch(policy: &Policy, space: &SearchSpace) -> Result<Architecture, SearchError> {
    let arch = Architecture::from_choices(space, &policy.argmax_choices());
    if arch.validate(space).is_ok() {
        return Ok(arch);
    }
    most_likely_valid(policy, space)
}

/// Draws used to find a valid fallback when the per-decision argmax violates
/// graph constraints.
const FALLBACK_DRAWS: usize = 4096;

fn most_likely_valid(policy: &Policy, space: &SearchSpace) -> Result<Architecture, SearchError> {
    let mut rng = Rng::new(0);
    let mut best: Option<(f64, Architecture)> = None;
    for _ in 0..FALLBACK_DRAWS {
        let a = policy.sample(space, &mut rng)?;
        let lp = policy.log_prob(&a.choices(space));
        if best
            .as_ref()
            .is_none_or(|(b, ba)| lp > *b || (lp == *b && a < *ba))
        {
            best = Some((lp, a));
        }
    }
    Ok(best.expect("at least one draw").1)
}

struct Collect<'o> {
    log: RunLog,
    trajectory: Vec<Vec<f64>>,
    inner: &'o mut dyn Observer,
}

impl Observer for Collect<'_> {
    fn evaluation(&mut self, entry: &LogEntry) -> Result<(), SearchError> {
        self.log.entries.push(entry.clone());
        self.inner.evaluation(entry)
    }

    fn step(&mut self, state: &SearchState) -> Result<(), SearchError> {
        self.trajectory.push(state.distribution());
        self.inner.step(state)
    }
}

/// Runs a search to completion from `seed`.
pub fn run_search(
    method: Method,
    evaluator: &dyn Evaluator,
    config: SearchConfig,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<(SearchOutcome, SearchState), SearchError> {
    let mut obs = Collect {
        log: RunLog::default(),
        trajectory: Vec::new(),
        inner: observer,
    };
    let mut state = SearchState::start(method, config, seed, evaluator, &mut obs)?;
    let stop_reason = state.run(evaluator, &mut obs)?;
    let best = state.derive()?;
    Ok((
        SearchOutcome {
            best_arch: best.to_string(&state.space),
            best,
            stop_reason,
            evaluations: state.evaluations,
            steps: state.step,
            log: obs.log,
            trajectory: obs.trajectory,
        },
        state,
    ))
}
