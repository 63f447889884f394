//! Experiment configuration, single simulation runs and parameter sweeps.
//!
//! A configuration is a flat set of `key = value` pairs so the same keys
//! work in a config file and as command line flags. Scalars accept `p/q`
//! and decimals; decimals are converted exactly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{adversary_algorithm, ActivationStop, AdversaryError, AttackConfig, AttackReport};
use crate::analysis::{analyze, AnalysisError, AnalysisReport};
use crate::engine::{Action, EngineError, Model, RobotId, RobotKind, RobotSpec, ScheduleEvent, SystemState};
use crate::protocol::{algorithm_by_name, Params};
use crate::scheduler::{default_fairness_window, ByzantineBehavior, Scheduler, SchedulerError, SchedulerPolicy};
use crate::trace::Trace;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("`{key}`: {reason}")]
    Inconsistent { key: &'static str, reason: String },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("scheduler: {0}")]
    Scheduler(#[from] SchedulerError),
    #[error("adversary: {0}")]
    Adversary(#[from] AdversaryError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialPositions {
    Explicit(Vec<Scalar>),
    /// Uniform on the grid of 1/1024 of `[lo, hi]`.
    Random {
        lo: Scalar,
        hi: Scalar,
    },
    /// `f` robots at `a`, `f` at `b`, the other robots (Byzantine included)
    /// at `x`.
    Figure1 {
        a: Scalar,
        b: Scalar,
        x: Scalar,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Deltas {
    /// A fixed value for everybody, or a hundredth of the initial spread.
    Uniform(Option<Scalar>),
    PerRobot(Vec<Scalar>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Sync,
    KBounded,
    Async,
    Script,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryKind {
    /// All robots are correct.
    None,
    /// The last `f` robots are Byzantine and never move.
    Static,
    /// The last `f` robots are Byzantine and teleport at random; the range
    /// defaults to the initial spread widened by half of it on each side.
    Random(Option<(Scalar, Scalar)>),
    /// The lower-bound construction, against the configured algorithm.
    Attack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub f: usize,
    pub positions: InitialPositions,
    pub deltas: Deltas,
    pub model: Model,
    pub scheduler: SchedulerKind,
    pub k: u32,
    pub interleave_depth: Option<usize>,
    pub weights: Option<Vec<u32>>,
    pub script: Vec<ScheduleEvent>,
    pub adversary: AdversaryKind,
    pub algorithm: String,
    pub seed: u64,
    pub budget: usize,
    /// Absolute epsilon; when unset `rel_epsilon` times the initial
    /// `diam(U)` is used.
    pub epsilon: Option<Scalar>,
    pub rel_epsilon: Scalar,
    pub window: Option<usize>,
    pub attack_a: Scalar,
    pub attack_b: Scalar,
    pub x0: Option<Scalar>,
    pub outer_loops: usize,
    pub cap: usize,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 6,
            f: 1,
            positions: InitialPositions::Random {
                lo: Scalar::zero(),
                hi: Scalar::integer(100),
            },
            deltas: Deltas::Uniform(None),
            model: Model::Corda,
            scheduler: SchedulerKind::Async,
            k: 2,
            interleave_depth: None,
            weights: None,
            script: Vec::new(),
            adversary: AdversaryKind::Random(None),
            algorithm: "algo4".to_string(),
            seed: 0,
            budget: 100_000,
            epsilon: None,
            rel_epsilon: Scalar::new(1, 1_000_000).expect("nonzero"),
            window: None,
            attack_a: Scalar::zero(),
            attack_b: Scalar::one(),
            x0: None,
            outer_loops: 6,
            cap: 10_000,
            trace: None,
            report: None,
        }
    }
}

/// Every key [`ExperimentConfig::set`] understands.
pub const KEYS: &[&str] = &[
    "n",
    "f",
    "positions",
    "range",
    "figure1",
    "delta",
    "model",
    "scheduler",
    "k",
    "interleave_depth",
    "weights",
    "script",
    "adversary",
    "teleport_range",
    "algorithm",
    "seed",
    "budget",
    "epsilon",
    "rel_epsilon",
    "window",
    "A",
    "B",
    "x0",
    "outer_loops",
    "cap",
    "trace",
    "report",
];

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn scalar(key: &str, value: &str) -> Result<Scalar, ConfigError> {
    value.trim().parse().map_err(|e| invalid(key, value, e))
}

fn scalars(key: &str, value: &str) -> Result<Vec<Scalar>, ConfigError> {
    value.split(',').map(|v| scalar(key, v)).collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| invalid(key, value, e))
}

fn pair(key: &str, value: &str) -> Result<(Scalar, Scalar), ConfigError> {
    match scalars(key, value)?.as_slice() {
        [lo, hi] if lo < hi => Ok((lo.clone(), hi.clone())),
        _ => Err(invalid(key, value, "expected `lo,hi` with lo < hi")),
    }
}

/// Parses `look:R`, `compute:R`, `move:R:STOP`, `full:R:STOP` and
/// `teleport:R:TARGET`, separated by `;`.
pub fn parse_script(text: &str) -> Result<Vec<ScheduleEvent>, ConfigError> {
    let key = "script";
    text.split(';')
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(|event| {
            let parts: Vec<&str> = event.split(':').map(str::trim).collect();
            let robot = RobotId(number(key, parts.get(1).copied().unwrap_or(""))?);
            let arg = || scalar(key, parts.get(2).copied().unwrap_or(""));
            let action = match (parts[0], parts.len()) {
                ("look", 2) => Action::Look,
                ("compute", 2) => Action::Compute,
                ("move", 3) => Action::Move { requested_stop: arg()? },
                ("full", 3) => Action::FullCycle { requested_stop: arg()? },
                ("teleport", 3) => Action::ByzantineTeleport { target: arg()? },
                _ => return Err(invalid(key, event, "unknown event")),
            };
            Ok(ScheduleEvent::new(robot, action))
        })
        .collect()
}

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    /// Applies pairs in order; later pairs win.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ConfigError> {
        let mut config = ExperimentConfig::default();
        for (k, v) in pairs {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "n" => self.n = number(key, v)?,
            "f" => self.f = number(key, v)?,
            "positions" if v == "random" => {
                if !matches!(self.positions, InitialPositions::Random { .. }) {
                    self.positions = InitialPositions::Random {
                        lo: Scalar::zero(),
                        hi: Scalar::integer(100),
                    };
                }
            }
            "positions" => self.positions = InitialPositions::Explicit(scalars(key, v)?),
            "range" => {
                let (lo, hi) = pair(key, v)?;
                self.positions = InitialPositions::Random { lo, hi };
            }
            "figure1" => match scalars(key, v)?.as_slice() {
                [a, b, x] if a < x && x < b => {
                    self.positions = InitialPositions::Figure1 {
                        a: a.clone(),
                        b: b.clone(),
                        x: x.clone(),
                    }
                }
                _ => return Err(invalid(key, v, "expected `A,B,X` with A < X < B")),
            },
            "delta" => {
                let values = scalars(key, v)?;
                self.deltas = match values.len() {
                    1 => Deltas::Uniform(values.into_iter().next()),
                    _ => Deltas::PerRobot(values),
                };
            }
            "model" => self.model = v.parse().map_err(|e: String| invalid(key, v, e))?,
            "scheduler" => {
                self.scheduler = match v {
                    "sync" => SchedulerKind::Sync,
                    "kbounded" => SchedulerKind::KBounded,
                    "async" => SchedulerKind::Async,
                    "script" => SchedulerKind::Script,
                    _ => return Err(invalid(key, v, "expected sync|kbounded|async|script")),
                }
            }
            "k" => self.k = number(key, v)?,
            "interleave_depth" => {
                self.interleave_depth = match v {
                    "unbounded" => None,
                    _ => Some(number(key, v)?),
                }
            }
            "weights" => {
                self.weights = Some(v.split(',').map(|w| number(key, w)).collect::<Result<_, _>>()?);
            }
            "script" => {
                self.script = parse_script(v)?;
                self.scheduler = SchedulerKind::Script;
            }
            "adversary" => {
                self.adversary = match v {
                    "none" => AdversaryKind::None,
                    "static" => AdversaryKind::Static,
                    "random" => AdversaryKind::Random(None),
                    "attack" => AdversaryKind::Attack,
                    _ => return Err(invalid(key, v, "expected none|static|random|attack")),
                }
            }
            "teleport_range" => self.adversary = AdversaryKind::Random(Some(pair(key, v)?)),
            "algorithm" => {
                if algorithm_by_name(v).is_none() {
                    return Err(invalid(key, v, "expected algo4|fulltrim|stay"));
                }
                self.algorithm = v.to_string();
            }
            "seed" => self.seed = number(key, v)?,
            "budget" => self.budget = number(key, v)?,
            "epsilon" => self.epsilon = Some(scalar(key, v)?),
            "rel_epsilon" => self.rel_epsilon = scalar(key, v)?,
            "window" => self.window = Some(number(key, v)?),
            "A" => self.attack_a = scalar(key, v)?,
            "B" => self.attack_b = scalar(key, v)?,
            "x0" => self.x0 = Some(scalar(key, v)?),
            "outer_loops" => self.outer_loops = number(key, v)?,
            "cap" => self.cap = number(key, v)?,
            "trace" => self.trace = Some(PathBuf::from(v)),
            "report" => self.report = Some(PathBuf::from(v)),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &'static str, reason: String| Err(ConfigError::Inconsistent { key, reason });
        if self.n == 0 {
            return bad("n", "need at least one robot".into());
        }
        if self.f >= self.n {
            return bad("f", format!("f = {} must be smaller than n = {}", self.f, self.n));
        }
        if let InitialPositions::Explicit(p) = &self.positions {
            if p.len() != self.n {
                return bad("positions", format!("{} positions for n = {}", p.len(), self.n));
            }
        }
        if let Deltas::PerRobot(d) = &self.deltas {
            if d.len() != self.n {
                return bad("delta", format!("{} deltas for n = {}", d.len(), self.n));
            }
        }
        if self.scheduler == SchedulerKind::KBounded && self.k == 0 {
            return bad("k", "must be positive".into());
        }
        if let Some(e) = &self.epsilon {
            if !e.is_positive() {
                return bad("epsilon", "must be positive".into());
            }
        }
        if !self.rel_epsilon.is_positive() {
            return bad("rel_epsilon", "must be positive".into());
        }
        if self.window == Some(0) {
            return bad("window", "must be positive".into());
        }
        let Some(algo) = algorithm_by_name(&self.algorithm) else {
            return bad("algorithm", format!("unknown algorithm `{}`", self.algorithm));
        };
        if let Err(e) = algo.validate(Params::new(self.n, self.f)) {
            return bad("algorithm", e.to_string());
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.algorithm == "algo4" && self.n <= 5 * self.f {
            out.push(format!(
                "n = {} <= 5f = {}: algo4 is not guaranteed to converge",
                self.n,
                5 * self.f
            ));
        }
        out
    }

    fn byzantine_count(&self) -> usize {
        match self.adversary {
            AdversaryKind::None => 0,
            _ => self.f,
        }
    }

    /// Builds the initial state; random positions come from their own
    /// stream of the seeded generator.
    pub fn initial_state(&self) -> Result<SystemState, RunError> {
        let n = self.n;
        let positions: Vec<Scalar> = match &self.positions {
            InitialPositions::Explicit(p) => p.clone(),
            InitialPositions::Random { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(1);
                let width = hi - lo;
                (0..n)
                    .map(|_| {
                        let k = rng.gen_range(0..=GRID);
                        lo + &(&width * &Scalar::new(k, GRID).expect("nonzero"))
                    })
                    .collect()
            }
            InitialPositions::Figure1 { a, b, x } => (0..n)
                .map(|i| match i {
                    i if i < self.f => a.clone(),
                    i if i < 2 * self.f => b.clone(),
                    _ => x.clone(),
                })
                .collect(),
        };
        let byzantine = self.byzantine_count();
        let spread = {
            let lo = positions.iter().min().expect("n > 0");
            let hi = positions.iter().max().expect("n > 0");
            hi - lo
        };
        let deltas: Vec<Scalar> = match &self.deltas {
            Deltas::PerRobot(d) => d.clone(),
            Deltas::Uniform(Some(d)) => vec![d.clone(); n],
            Deltas::Uniform(None) => {
                let d = if spread.is_zero() {
                    Scalar::one()
                } else {
                    &spread / &Scalar::integer(100)
                };
                vec![d; n]
            }
        };
        let specs = positions
            .into_iter()
            .zip(deltas)
            .enumerate()
            .map(|(i, (position, delta))| RobotSpec {
                position,
                kind: if i + byzantine >= n {
                    RobotKind::Byzantine
                } else {
                    RobotKind::Correct
                },
                delta,
            })
            .collect();
        Ok(SystemState::new(self.model, self.f, specs)?)
    }

    fn policy(&self) -> SchedulerPolicy {
        match self.scheduler {
            SchedulerKind::Sync => SchedulerPolicy::FullySynchronous,
            SchedulerKind::KBounded => SchedulerPolicy::KBounded { k: self.k },
            SchedulerKind::Async => SchedulerPolicy::FullyAsynchronous {
                weights: self.weights.clone(),
                interleave_depth: self.interleave_depth,
            },
            SchedulerKind::Script => SchedulerPolicy::Scripted(self.script.clone()),
        }
    }

    fn byzantine_behavior(&self, state: &SystemState) -> ByzantineBehavior {
        match &self.adversary {
            AdversaryKind::Random(Some((lo, hi))) => ByzantineBehavior::RandomTeleport {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            AdversaryKind::Random(None) => {
                let range = state.positions().range().expect("n > 0");
                let mut margin = &range.width() / &Scalar::integer(2);
                if margin.is_zero() {
                    margin = Scalar::one();
                }
                ByzantineBehavior::RandomTeleport {
                    lo: &range.lo - &margin,
                    hi: &range.hi + &margin,
                }
            }
            _ => ByzantineBehavior::Static,
        }
    }
}

const GRID: i64 = 1024;

/// One finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub report: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub algorithm: String,
    pub model: Model,
    pub scheduler: SchedulerKind,
    #[serde(flatten)]
    pub analysis: AnalysisReport,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackReport>,
}

impl RunReport {
    /// Exit-status verdict: no checker violations and, for attacks, the
    /// construction achieved what it set out to.
    pub fn passed(&self) -> bool {
        self.analysis.passed()
            && self
                .attack
                .as_ref()
                .is_none_or(|a| a.verdict == crate::adversary::AttackVerdict::NonConvergenceDemonstrated)
    }
}

/// Runs one configuration to convergence, script exhaustion or the event
/// budget, whichever comes first, and analyses the trace.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let algo = algorithm_by_name(&config.algorithm).expect("validated algorithm name");
    let half_bound = config.algorithm == "algo4" && config.n > 5 * config.f;

    if config.adversary == AdversaryKind::Attack {
        let mut attack = AttackConfig::new(config.n, config.f, config.attack_a.clone(), config.attack_b.clone());
        attack.x0 = config.x0.clone();
        attack.delta = match &config.deltas {
            Deltas::Uniform(d) => d.clone(),
            Deltas::PerRobot(_) => {
                return Err(ConfigError::Inconsistent {
                    key: "delta",
                    reason: "the attack uses one delta for every robot".into(),
                }
                .into())
            }
        };
        attack.outer_loops = config.outer_loops;
        attack.cap = config.cap;
        attack.activation_stop = ActivationStop::Minimal;
        let report = adversary_algorithm(&attack, algo.as_ref())?;
        let trace = report.trace.clone();
        let epsilon = config
            .epsilon
            .clone()
            .unwrap_or_else(|| &report.initial_distance / &Scalar::integer(2));
        let window = config
            .window
            .unwrap_or(default_fairness_window(config.n))
            .min(trace.len().max(1));
        let analysis = analyze(&trace, &epsilon, window, half_bound)?;
        return Ok(RunOutcome {
            trace,
            report: RunReport {
                n: config.n,
                f: config.f,
                seed: config.seed,
                algorithm: config.algorithm.clone(),
                model: Model::Atom,
                scheduler: config.scheduler,
                analysis,
                warnings: config.warnings(),
                attack: Some(report),
            },
        });
    }

    let mut state = config.initial_state()?;
    let mut scheduler = Scheduler::new(config.policy(), config.byzantine_behavior(&state), config.seed)?;
    let initial_diam = state.diameters().0;
    let epsilon = config.epsilon.clone().unwrap_or_else(|| {
        if initial_diam.is_zero() {
            config.rel_epsilon.clone()
        } else {
            &initial_diam * &config.rel_epsilon
        }
    });
    let mut trace = Trace::new(state.clone());
    while trace.len() < config.budget && state.diameters().0 >= epsilon {
        let batch = scheduler.next_events(&state)?;
        if batch.is_empty() {
            break;
        }
        trace.extend(state.apply_round(&batch, algo.as_ref())?);
    }
    let window = config.window.unwrap_or(default_fairness_window(config.n));
    let analysis = analyze(&trace, &epsilon, window, half_bound)?;
    Ok(RunOutcome {
        trace,
        report: RunReport {
            n: config.n,
            f: config.f,
            seed: config.seed,
            algorithm: config.algorithm.clone(),
            model: config.model,
            scheduler: config.scheduler,
            analysis,
            warnings: config.warnings(),
            attack: None,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub f: usize,
    pub runs: usize,
    pub converged: usize,
    pub errors: usize,
    pub convergence_rate: f64,
    pub mean_t_epsilon: Option<f64>,
    pub worst_alpha: Option<Scalar>,
}

/// Runs `base` for every `(n, f)` cell and seed in parallel; rows come back
/// in cell order whatever the thread interleaving.
pub fn sweep(base: &ExperimentConfig, cells: &[(usize, usize)], seeds: &[u64]) -> Vec<SweepRow> {
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<(usize, Option<RunReport>)> = jobs
        .par_iter()
        .map(|&(cell, seed)| {
            let mut config = base.clone();
            config.n = cells[cell].0;
            config.f = cells[cell].1;
            config.seed = seed;
            config.trace = None;
            config.report = None;
            (cell, run(&config).ok().map(|o| o.report))
        })
        .collect();
    let mut by_cell: BTreeMap<usize, Vec<Option<RunReport>>> = BTreeMap::new();
    for (cell, report) in results {
        by_cell.entry(cell).or_default().push(report);
    }
    cells
        .iter()
        .enumerate()
        .map(|(i, &(n, f))| {
            let reports = by_cell.remove(&i).unwrap_or_default();
            let ok: Vec<&RunReport> = reports.iter().flatten().collect();
            let converged: Vec<&&RunReport> = ok.iter().filter(|r| r.analysis.verdict == "converged").collect();
            let t: Vec<f64> = converged
                .iter()
                .filter_map(|r| r.analysis.t_epsilon)
                .map(|t| t as f64)
                .collect();
            SweepRow {
                n,
                f,
                runs: reports.len(),
                converged: converged.len(),
                errors: reports.len() - ok.len(),
                convergence_rate: if reports.is_empty() {
                    0.0
                } else {
                    converged.len() as f64 / reports.len() as f64
                },
                mean_t_epsilon: (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64),
                worst_alpha: ok.iter().filter_map(|r| r.analysis.observed_alpha.clone()).max(),
            }
        })
        .collect()
}
