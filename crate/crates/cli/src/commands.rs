use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tegnas::bench::{analyze as run_analysis, load_tabular, toy_train, Accuracy, TabularBench};
use tegnas::data::BlobDataset;
use tegnas::indicators::{evaluate, IndicatorReport};
use tegnas::landscape::{build_landscape, grid_archs, spawn_children, write_csv, TrajectoryLog};
use tegnas::netgen::{enumerate_cells, Architecture, NetError, SearchSpace};
use tegnas::numkit::Rng;
use tegnas::search::{
    run_search, LogEntry, Method, Observer, SearchError, SearchState, TegEvaluator,
};

use crate::config::RunConfig;
use crate::error::{runtime, CliError};
use crate::Common;

/// Spaces larger than this are refused by `--all` and `bench-train`.
const MAX_ENUMERATION: u128 = 20_000;

fn config_for(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(s) = common.space {
        cfg.space = s;
    }
    Ok(cfg)
}

fn dataset(cfg: &RunConfig) -> Result<BlobDataset, CliError> {
    BlobDataset::new(cfg.data.clone()).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_arch(s: &str, space: &SearchSpace) -> Result<Architecture, CliError> {
    Architecture::parse(s, space).map_err(|e| match e {
        NetError::Parse(p) => CliError::Parse(p.to_string()),
        other => CliError::Parse(other.to_string()),
    })
}

fn enumerate(space: &SearchSpace) -> Result<Vec<Architecture>, CliError> {
    match space.cardinality() {
        Some(c) if c <= MAX_ENUMERATION => enumerate_cells(space).map_err(runtime),
        _ => Err(CliError::Config(format!(
            "space {} is too large to enumerate",
            space.kind.name()
        ))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)
}

/// Stdout, or a file when `out` is given.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn score(
    common: &Common,
    arch: Option<&str>,
    all: bool,
    repeats: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = config_for(common)?;
    if let Some(s) = common.seed {
        cfg.indicators.base_seed = s;
    }
    if let Some(r) = repeats {
        cfg.indicators.repeats = r;
    }
    cfg.validate()?;
    let space = cfg.space();
    let archs = match (arch, all) {
        (Some(s), false) => vec![parse_arch(s, &space)?],
        (None, true) => enumerate(&space)?,
        _ => return Err(CliError::Config("give an architecture or --all".into())),
    };
    let data = dataset(&cfg)?;
    let mut w = sink(out)?;
    for a in &archs {
        let r = evaluate(a, &space, &data, &cfg.indicators).map_err(runtime)?;
        serde_json::to_writer(&mut w, &r).map_err(runtime)?;
        writeln!(w).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

/// Streams the log, the parent trajectory and checkpoints to the run directory.
struct RunWriter {
    dir: PathBuf,
    log: BufWriter<File>,
    trajectory: TrajectoryLog,
    every: usize,
}

impl RunWriter {
    fn checkpoint(&self, state: &SearchState) -> Result<(), SearchError> {
        let path = self
            .dir
            .join("checkpoints")
            .join(format!("step_{}.json", state.step));
        let w = create(&path).map_err(|e| SearchError::Observer(e.to_string()))?;
        serde_json::to_writer(w, state).map_err(|e| SearchError::Observer(e.to_string()))
    }
}

impl Observer for RunWriter {
    fn evaluation(&mut self, entry: &LogEntry) -> Result<(), SearchError> {
        let line = serde_json::to_string(entry).expect("log entries serialize");
        writeln!(self.log, "{line}")
            .and_then(|_| self.log.flush())
            .map_err(|e| SearchError::Observer(e.to_string()))
    }

    fn step(&mut self, state: &SearchState) -> Result<(), SearchError> {
        self.trajectory.push(state.step, state.distribution());
        let due = state.step == 0 || (self.every > 0 && state.step.is_multiple_of(self.every));
        if due || state.stopped.is_some() {
            self.checkpoint(state)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SearchResult<'a> {
    best_arch: &'a str,
    stop_reason: tegnas::search::StopReason,
    evaluations: usize,
    steps: usize,
    method: &'a str,
    tool_version: &'a str,
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

pub fn search(
    common: &Common,
    method: Option<Method>,
    hard_cap: Option<usize>,
    repeats: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = config_for(common)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = method {
        cfg.method = m;
    }
    if let Some(c) = hard_cap {
        cfg.search.hard_cap = Some(c);
    }
    if let Some(r) = repeats {
        cfg.indicators.repeats = r;
    }
    if let Some(o) = out {
        cfg.out_dir = Some(o);
    }
    cfg.validate()?;
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.method.name(), cfg.seed)));
    fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("config.toml"), cfg.snapshot()).map_err(runtime)?;

    let started = Instant::now();
    let space = cfg.space();
    let data = dataset(&cfg)?;
    let evaluator =
        TegEvaluator::new(space.clone(), &data, cfg.indicators.clone()).map_err(runtime)?;
    let mut writer = RunWriter {
        log: create(&dir.join("log.jsonl"))?,
        dir: dir.clone(),
        trajectory: TrajectoryLog::new("parent"),
        every: cfg.checkpoint_every,
    };
    let result = run_search(
        cfg.method,
        &evaluator,
        cfg.search.clone(),
        cfg.seed,
        &mut writer,
    );
    // the trajectory so far is useful even when the run failed
    write_json(&dir.join("trajectory.json"), &writer.trajectory)?;
    let (outcome, _) = result.map_err(runtime)?;
    write_json(
        &dir.join("result.json"),
        &SearchResult {
            best_arch: &outcome.best_arch,
            stop_reason: outcome.stop_reason,
            evaluations: outcome.evaluations,
            steps: outcome.steps,
            method: cfg.method.name(),
            tool_version: env!("CARGO_PKG_VERSION"),
        },
    )?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    println!("{}", outcome.best_arch);
    println!("evaluations: {}", outcome.evaluations);
    Ok(())
}

pub fn landscape(
    run: &Path,
    spawn_step: usize,
    child_seeds: [u64; 2],
    steps: Option<usize>,
    grid: Option<usize>,
    interp: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&run.join("config.toml"))?;
    if let Some(s) = steps {
        cfg.landscape.child_steps = s;
    }
    if let Some(g) = grid {
        cfg.landscape.grid = g;
    }
    if let Some(i) = interp {
        cfg.landscape.interp_points = i;
    }
    cfg.validate()?;
    let ckpt = run
        .join("checkpoints")
        .join(format!("step_{spawn_step}.json"));
    let text = fs::read_to_string(&ckpt).map_err(|_| {
        CliError::Missing(format!(
            "no checkpoint at step {spawn_step} ({})",
            ckpt.display()
        ))
    })?;
    let parent: SearchState = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", ckpt.display())))?;
    let traj_path = run.join("trajectory.json");
    let traj_text = fs::read_to_string(&traj_path)
        .map_err(|e| CliError::Missing(format!("{}: {e}", traj_path.display())))?;
    let trajectory: TrajectoryLog = serde_json::from_str(&traj_text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", traj_path.display())))?;
    let parent_log = trajectory.truncated(spawn_step);

    let space = cfg.space();
    let data = dataset(&cfg)?;
    let evaluator =
        TegEvaluator::new(space.clone(), &data, cfg.indicators.clone()).map_err(runtime)?;
    let children = spawn_children(&parent, child_seeds, cfg.landscape.child_steps, &evaluator)
        .map_err(runtime)?;
    let grid = grid_archs(&space, cfg.landscape.grid, cfg.landscape.grid_seed).map_err(runtime)?;
    let land = build_landscape(
        &parent_log,
        &children,
        &grid,
        cfg.landscape.interp_points,
        &evaluator,
    )
    .map_err(runtime)?;

    let dir = out.unwrap_or_else(|| run.join(format!("landscape_{spawn_step}")));
    write_csv(&land.rows, create(&dir.join("landscape.csv"))?).map_err(runtime)?;
    write_json(&dir.join("variance.json"), &land.variance)?;
    write_json(&dir.join("interpolation.json"), &land.interpolation)?;
    println!("{} rows", land.rows.len());
    Ok(())
}

fn read_reports(path: &Path) -> Result<Vec<IndicatorReport>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Parse(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn analyze(
    common: &Common,
    reports: &Path,
    bench: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = config_for(common)?;
    cfg.validate()?;
    let space = cfg.space();
    let reports = read_reports(reports)?;
    let table = bench
        .map(|p| {
            if !p.exists() {
                return Err(CliError::Missing(p.display().to_string()));
            }
            load_tabular(p, &space).map_err(|e| CliError::Parse(e.to_string()))
        })
        .transpose()?;
    let analysis = run_analysis(&reports, &space, table.as_ref()).map_err(runtime)?;
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &analysis).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)
}

pub fn bench_train(
    common: &Common,
    seeds: u64,
    epochs: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = config_for(common)?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    cfg.validate()?;
    let space = cfg.space();
    let data = dataset(&cfg)?;
    let first = common.seed.unwrap_or(0);
    let mut table = TabularBench::new(space.kind);
    for a in enumerate(&space)? {
        let (mut train, mut test) = (0.0, 0.0);
        for s in first..first + seeds {
            let r = toy_train(&a, &space, &data, &cfg.train, &mut Rng::new(s)).map_err(runtime)?;
            train += r.train_acc;
            test += r.test_acc;
        }
        let n = seeds as f64;
        table.rows.insert(
            a.to_string(&space),
            Accuracy {
                train_acc: train / n,
                test_acc: test / n,
            },
        );
    }
    table.write(sink(out)?).map_err(runtime)
}
