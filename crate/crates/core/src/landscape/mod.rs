//! Search-landscape analysis: children spawned from a checkpointed search,
//! trajectories and scored architectures projected into one PCA plane, and
//! indicator profiles along straight lines between distributions.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::{enumerate_cells, random_arch, Architecture, SearchSpace};
use crate::numkit::{NumError, Pca, Rng};
use crate::search::{argmax_arch, Evaluator, Observer, Policy, SearchError, SearchState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandscapeError {
    #[error("no checkpoint at step {0}")]
    NoCheckpoint(usize),
    #[error("invalid landscape input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("io: {0}")]
    Io(String),
}

/// Ordered distribution vectors visited by one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub run_id: String,
    pub steps: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    /// Step of the parent state a child was spawned from.
    pub parent_step: Option<usize>,
    pub child_seed: Option<u64>,
}

impl TrajectoryLog {
    pub fn new(run_id: impl Into<String>) -> Self {
        TrajectoryLog {
            run_id: run_id.into(),
            steps: Vec::new(),
            points: Vec::new(),
            parent_step: None,
            child_seed: None,
        }
    }

    pub fn push(&mut self, step: usize, point: Vec<f64>) {
        self.steps.push(step);
        self.points.push(point);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps points with step ≤ `step`.
    pub fn truncated(&self, step: usize) -> TrajectoryLog {
        let keep = self.steps.iter().take_while(|&&s| s <= step).count();
        TrajectoryLog {
            run_id: self.run_id.clone(),
            steps: self.steps[..keep].to_vec(),
            points: self.points[..keep].to_vec(),
            parent_step: self.parent_step,
            child_seed: self.child_seed,
        }
    }

    /// Every point has the space's layout and each decision block sums to 1.
    pub fn validate(&self, space: &SearchSpace) -> Result<(), LandscapeError> {
        let arities: Vec<usize> = (0..space.num_choices())
            .map(|i| space.choice_arity(i))
            .collect();
        let dim: usize = arities.iter().sum();
        for p in &self.points {
            if p.len() != dim {
                return Err(LandscapeError::Invalid(format!(
                    "point has {} entries, expected {dim}",
                    p.len()
                )));
            }
            let mut at = 0;
            for &a in &arities {
                let s: f64 = p[at..at + a].iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(LandscapeError::Invalid(format!(
                        "decision block sums to {s}"
                    )));
                }
                at += a;
            }
        }
        Ok(())
    }
}

/// Records the distribution after every step.
struct Recorder<'a>(&'a mut TrajectoryLog);

impl Observer for Recorder<'_> {
    fn step(&mut self, state: &SearchState) -> Result<(), SearchError> {
        self.0.push(state.step, state.distribution());
        Ok(())
    }
}

/// Continues `parent` for `steps` steps under each child seed. Both
/// trajectories start with the parent's distribution at its current step.
pub fn spawn_children(
    parent: &SearchState,
    seeds: [u64; 2],
    steps: usize,
    evaluator: &dyn Evaluator,
) -> Result<[TrajectoryLog; 2], LandscapeError> {
    let run = |k: usize| -> Result<TrajectoryLog, LandscapeError> {
        let mut child = parent.spawn(seeds[k]);
        let mut log = TrajectoryLog::new(format!("child{}", k + 1));
        log.parent_step = Some(parent.step);
        log.child_seed = Some(seeds[k]);
        log.push(child.step, child.distribution());
        let mut rec = Recorder(&mut log);
        for _ in 0..steps {
            child.step(evaluator, &mut rec)?;
        }
        Ok(log)
    };
    Ok([run(0)?, run(1)?])
}

/// A shared 2-D basis with every input projected into it.
#[derive(Debug, Clone)]
pub struct Projection {
    pub pca: Pca,
    /// One projected path per input trajectory.
    pub paths: Vec<Vec<[f64; 2]>>,
    /// Grid architectures encoded one-hot and projected in the same basis.
    pub grid: Vec<[f64; 2]>,
}

impl Projection {
    pub fn project(&self, v: &[f64]) -> [f64; 2] {
        let p = self.pca.project(v);
        [p[0], p[1]]
    }
}

/// Fits PCA on the union of trajectory points and projects trajectories and
/// grid architectures with it.
pub fn project_trajectories(
    logs: &[&TrajectoryLog],
    grid: &[Architecture],
    space: &SearchSpace,
) -> Result<Projection, LandscapeError> {
    for l in logs {
        l.validate(space)?;
    }
    let union: Vec<Vec<f64>> = logs.iter().flat_map(|l| l.points.iter().cloned()).collect();
    let pca = Pca::fit(&union, 2)?;
    let to2 = |v: &[f64]| {
        let p = pca.project(v);
        [p[0], p.get(1).copied().unwrap_or(0.0)]
    };
    let paths = logs
        .iter()
        .map(|l| l.points.iter().map(|p| to2(p)).collect())
        .collect();
    let grid = grid.iter().map(|a| to2(&a.one_hot(space))).collect();
    Ok(Projection { pca, paths, grid })
}

/// Architecture a distribution vector rounds to.
pub fn discretize(dist: &[f64], space: &SearchSpace) -> Result<Architecture, LandscapeError> {
    Ok(argmax_arch(&Policy::from_flat_probs(space, dist)?, space)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpPoint {
    pub alpha: f64,
    pub dist: Vec<f64>,
    pub arch: String,
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    /// Same architecture as the previous point; plotting can collapse it.
    pub repeat: bool,
}

/// Indicators along `(1 − α)·a + α·b` for `n` evenly spaced α in [0, 1],
/// each mixture rounded to its per-decision argmax.
pub fn interpolation_profile(
    a: &[f64],
    b: &[f64],
    n: usize,
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
) -> Result<Vec<InterpPoint>, LandscapeError> {
    if n < 2 || a.len() != b.len() {
        return Err(LandscapeError::Invalid(
            "need n >= 2 and equal-length endpoints".into(),
        ));
    }
    let mut out: Vec<InterpPoint> = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = i as f64 / (n - 1) as f64;
        let dist: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
            .collect();
        let arch = discretize(&dist, space)?;
        let r = evaluator.evaluate(&arch)?;
        let arch = arch.to_string(space);
        let repeat = out.last().is_some_and(|p| p.arch == arch);
        out.push(InterpPoint {
            alpha,
            dist,
            arch,
            kappa: r.kappa,
            regions: r.regions,
            mse: r.mse,
            repeat,
        });
    }
    Ok(out)
}

/// Every architecture of an enumerable space when there are at most `n`,
/// otherwise `n` distinct random draws (fewer if the draws keep repeating).
pub fn grid_archs(
    space: &SearchSpace,
    n: usize,
    seed: u64,
) -> Result<Vec<Architecture>, LandscapeError> {
    if space.cardinality().is_some_and(|c| c <= n as u128) {
        return Ok(enumerate_cells(space).map_err(SearchError::from)?);
    }
    let mut rng = Rng::new(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100 * n {
        attempts += 1;
        let a = random_arch(space, &mut rng).map_err(SearchError::from)?;
        if seen.insert(a.clone()) {
            out.push(a);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub arch: String,
    pub x: f64,
    pub y: f64,
    pub kappa: f64,
    pub regions: f64,
    pub mse: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub explained_variance_ratio: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub degenerate: bool,
    pub fitted_points: usize,
}

#[derive(Debug, Clone)]
pub struct Landscape {
    pub rows: Vec<LandscapeRow>,
    pub variance: VarianceReport,
    pub projection: Projection,
    pub interpolation: Vec<InterpPoint>,
}

/// Grid, parent, both children and the interpolation between the children's
/// final distributions, all in one PCA plane.
pub fn build_landscape(
    parent: &TrajectoryLog,
    children: &[TrajectoryLog; 2],
    grid: &[Architecture],
    interp_points: usize,
    evaluator: &dyn Evaluator,
) -> Result<Landscape, LandscapeError> {
    let space = evaluator.space();
    let logs = [parent, &children[0], &children[1]];
    let projection = project_trajectories(&logs, grid, space)?;
    let reports = evaluator.evaluate_all(grid)?;
    let mut rows = Vec::new();
    for ((a, r), xy) in grid.iter().zip(&reports).zip(&projection.grid) {
        rows.push(LandscapeRow {
            arch: a.to_string(space),
            x: xy[0],
            y: xy[1],
            kappa: r.kappa,
            regions: r.regions,
            mse: r.mse,
            source: "grid".into(),
        });
    }
    for (log, (source, path)) in logs
        .iter()
        .zip(["parent", "child1", "child2"].iter().zip(&projection.paths))
    {
        let archs = log
            .points
            .iter()
            .map(|p| discretize(p, space))
            .collect::<Result<Vec<_>, _>>()?;
        let reports = evaluator.evaluate_all(&archs)?;
        for ((a, r), xy) in archs.iter().zip(&reports).zip(path) {
            rows.push(LandscapeRow {
                arch: a.to_string(space),
                x: xy[0],
                y: xy[1],
                kappa: r.kappa,
                regions: r.regions,
                mse: r.mse,
                source: source.to_string(),
            });
        }
    }
    let (a, b) = match (children[0].points.last(), children[1].points.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(LandscapeError::Invalid("empty child trajectory".into())),
    };
    let interpolation = interpolation_profile(a, b, interp_points, space, evaluator)?;
    for p in &interpolation {
        let xy = projection.project(&p.dist);
        rows.push(LandscapeRow {
            arch: p.arch.clone(),
            x: xy[0],
            y: xy[1],
            kappa: p.kappa,
            regions: p.regions,
            mse: p.mse,
            source: "interp".into(),
        });
    }
    let pca = &projection.pca;
    let variance = VarianceReport {
        explained_variance_ratio: pca.explained_variance_ratio.clone(),
        explained_variance: pca.explained_variance.clone(),
        degenerate: pca.degenerate,
        fitted_points: logs.iter().map(|l| l.len()).sum(),
    };
    Ok(Landscape {
        rows,
        variance,
        projection,
        interpolation,
    })
}

/// Writes rows under the header `arch,x,y,kappa,regions,mse,source`.
pub fn write_csv<W: Write>(rows: &[LandscapeRow], writer: W) -> Result<(), LandscapeError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["arch", "x", "y", "kappa", "regions", "mse", "source"])
        .map_err(|e| LandscapeError::Io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.arch.clone(),
            r.x.to_string(),
            r.y.to_string(),
            r.kappa.to_string(),
            r.regions.to_string(),
            r.mse.to_string(),
            r.source.clone(),
        ])
        .map_err(|e| LandscapeError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| LandscapeError::Io(e.to_string()))
}
