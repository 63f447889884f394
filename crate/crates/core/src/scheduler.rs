//! Schedulers that drive the engine, and a fairness auditor for finite
//! traces.
//!
//! A [`Scheduler`] returns one batch of events per call. Under ATOM, a batch
//! with several `FullCycle` events is a synchronous activation (see
//! [`SystemState::apply_round`]). Random schedulers draw everything,
//! including where a moving robot gets stopped, from one seeded ChaCha
//! stream, so a (policy, seed, initial state, algorithm) tuple always
//! produces the same trace.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{EngineError, Model, Phase, RobotId, ScheduleEvent, SystemState};
use crate::trace::Trace;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// Every correct robot, every round, in lock-step.
    FullySynchronous,
    /// Random activations such that between two consecutive cycle
    /// completions of any robot no other robot completes more than `k`.
    KBounded { k: u32 },
    /// Random activations with per-robot weights. `interleave_depth` bounds
    /// how many other robots may be mid-cycle when a robot Looks (`None` is
    /// unbounded, `Some(0)` degenerates to atomic cycles).
    FullyAsynchronous {
        weights: Option<Vec<u32>>,
        interleave_depth: Option<usize>,
    },
    /// Replays a fixed list, one event per batch.
    Scripted(Vec<ScheduleEvent>),
}

/// What the scheduler does with the Byzantine robots it controls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ByzantineBehavior {
    /// Never moved.
    Static,
    /// Teleported to uniformly drawn points of `[lo, hi]` on a grid of
    /// 1/1024 of its width.
    RandomTeleport { lo: Scalar, hi: Scalar },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("scripted event {index} is invalid: {source}")]
    Script {
        index: usize,
        #[source]
        source: EngineError,
    },
    #[error("weights list has {got} entries for {n} robots")]
    Weights { got: usize, n: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("no robot can be activated")]
    NothingEnabled,
    #[error("synchronous round started while robot {0} is mid-cycle")]
    NotAligned(RobotId),
    #[error("fairness window {window} exceeds trace length {len}")]
    WindowTooLarge { window: usize, len: usize },
}

/// Resolution of sampled stop fractions and teleport targets.
const STOP_STEPS: i64 = 4;
const TELEPORT_GRID: i64 = 1024;

pub struct Scheduler {
    policy: SchedulerPolicy,
    byzantine: ByzantineBehavior,
    rng: ChaCha8Rng,
    wave: usize,
    cursor: usize,
    /// `since[i][j]`: completions of `j` since `i` last completed.
    since: Vec<Vec<u32>>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, byzantine: ByzantineBehavior, seed: u64) -> Result<Self, SchedulerError> {
        if let SchedulerPolicy::KBounded { k: 0 } = policy {
            return Err(SchedulerError::ZeroK);
        }
        Ok(Scheduler {
            policy,
            byzantine,
            rng: ChaCha8Rng::seed_from_u64(seed),
            wave: 0,
            cursor: 0,
            since: Vec::new(),
        })
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    /// The next batch of events. An empty batch means the scheduler is done
    /// (only scripts run out).
    pub fn next_events(&mut self, state: &SystemState) -> Result<Vec<ScheduleEvent>, SchedulerError> {
        if let SchedulerPolicy::FullyAsynchronous { weights: Some(w), .. } = &self.policy {
            if w.len() != state.robots().len() {
                return Err(SchedulerError::Weights {
                    got: w.len(),
                    n: state.robots().len(),
                });
            }
        }
        match self.policy.clone() {
            SchedulerPolicy::FullySynchronous => self.synchronous(state),
            SchedulerPolicy::Scripted(events) => {
                let Some(event) = events.get(self.cursor) else {
                    return Ok(Vec::new());
                };
                state.check_event(event).map_err(|source| SchedulerError::Script {
                    index: self.cursor,
                    source,
                })?;
                self.cursor += 1;
                Ok(vec![event.clone()])
            }
            SchedulerPolicy::KBounded { k } => self.random_step(state, None, None, Some(k)),
            SchedulerPolicy::FullyAsynchronous {
                weights,
                interleave_depth,
            } => self.random_step(state, weights.as_deref(), interleave_depth, None),
        }
    }

    fn teleport_target(&mut self) -> Option<Scalar> {
        match &self.byzantine {
            ByzantineBehavior::Static => None,
            ByzantineBehavior::RandomTeleport { lo, hi } => {
                let k = self.rng.gen_range(0..=TELEPORT_GRID);
                let frac = Scalar::new(k, TELEPORT_GRID).expect("nonzero grid");
                Some(lo + &(&(hi - lo) * &frac))
            }
        }
    }

    fn stop_fraction(&mut self) -> Scalar {
        Scalar::new(self.rng.gen_range(0..=STOP_STEPS), STOP_STEPS).expect("nonzero")
    }

    fn byzantine_wave(&mut self, state: &SystemState) -> Vec<ScheduleEvent> {
        let ids: Vec<RobotId> = state.byzantine_ids().collect();
        ids.into_iter()
            .filter_map(|id| self.teleport_target().map(|t| ScheduleEvent::teleport(id, t)))
            .collect()
    }

    fn synchronous(&mut self, state: &SystemState) -> Result<Vec<ScheduleEvent>, SchedulerError> {
        let correct: Vec<RobotId> = state.correct_ids().collect();
        let positions = state.positions();
        let full = positions.diam().expect("nonempty");
        if state.model() == Model::Atom {
            let mut round = self.byzantine_wave(state);
            round.extend(correct.iter().map(|&id| ScheduleEvent::full_cycle(id, full.clone())));
            return Ok(round);
        }
        let wave = self.wave;
        self.wave = (self.wave + 1) % 3;
        match wave {
            0 => {
                if let Some(busy) = state.robots().iter().find(|r| r.phase != Phase::Idle) {
                    return Err(SchedulerError::NotAligned(busy.id));
                }
                let mut round = self.byzantine_wave(state);
                round.extend(correct.iter().map(|&id| ScheduleEvent::look(id)));
                Ok(round)
            }
            1 => Ok(correct.iter().map(|&id| ScheduleEvent::compute(id)).collect()),
            _ => Ok(correct
                .iter()
                .map(|&id| {
                    let robot = &state.robots()[id.0];
                    ScheduleEvent::move_by(id, robot.position.distance(robot.destination()))
                })
                .collect()),
        }
    }

    fn may_complete(&mut self, state: &SystemState, robot: RobotId, k: Option<u32>) -> bool {
        let Some(k) = k else { return true };
        let n = state.robots().len();
        if self.since.len() != n {
            self.since = vec![vec![0; n]; n];
        }
        state.correct_ids().all(|i| i == robot || self.since[i.0][robot.0] < k)
    }

    fn note_completion(&mut self, robot: RobotId) {
        if self.since.is_empty() {
            return;
        }
        for (i, row) in self.since.iter_mut().enumerate() {
            if i != robot.0 {
                row[robot.0] += 1;
            }
        }
        self.since[robot.0].iter_mut().for_each(|c| *c = 0);
    }

    fn random_step(
        &mut self,
        state: &SystemState,
        weights: Option<&[u32]>,
        depth: Option<usize>,
        k: Option<u32>,
    ) -> Result<Vec<ScheduleEvent>, SchedulerError> {
        let n = state.robots().len();
        let busy = state
            .robots()
            .iter()
            .filter(|r| r.is_correct() && r.phase != Phase::Idle)
            .count();
        let teleports = !matches!(self.byzantine, ByzantineBehavior::Static) && (depth != Some(0) || busy == 0);

        let mut candidates = Vec::with_capacity(n);
        for robot in state.robots() {
            let enabled = if !robot.is_correct() {
                teleports
            } else {
                match (&robot.phase, state.model()) {
                    (Phase::Idle, Model::Atom) => self.may_complete(state, robot.id, k),
                    (Phase::Idle, Model::Corda) => depth.is_none_or(|d| busy <= d),
                    (Phase::Looked { .. }, _) => true,
                    (Phase::Computed { .. }, _) => self.may_complete(state, robot.id, k),
                }
            };
            let weight = weights.map_or(1, |w| w[robot.id.0]);
            if enabled && weight > 0 {
                candidates.push((robot.id, weight));
            }
        }
        let &(id, _) = candidates
            .choose_weighted(&mut self.rng, |c| c.1)
            .map_err(|_| SchedulerError::NothingEnabled)?;

        let robot = &state.robots()[id.0];
        let event = if !robot.is_correct() {
            let target = self.teleport_target().expect("only enabled when teleporting");
            ScheduleEvent::teleport(id, target)
        } else {
            match (&robot.phase, state.model()) {
                (Phase::Idle, Model::Atom) => {
                    let reach = state.positions().diam().expect("nonempty");
                    let stop = &self.stop_fraction() * &reach;
                    self.note_completion(id);
                    ScheduleEvent::full_cycle(id, stop)
                }
                (Phase::Idle, Model::Corda) => ScheduleEvent::look(id),
                (Phase::Looked { .. }, _) => ScheduleEvent::compute(id),
                (Phase::Computed { .. }, _) => {
                    let dist = robot.position.distance(robot.destination());
                    let stop = &self.stop_fraction() * &dist;
                    self.note_completion(id);
                    ScheduleEvent::move_by(id, stop)
                }
            }
        };
        Ok(vec![event])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "robot")]
pub enum FairnessVerdict {
    FairWithinBudget,
    Starved(RobotId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    /// Completed cycles per correct robot over the whole trace.
    pub cycles: Vec<(RobotId, u64)>,
    /// Longest span of steps without a completion, for the worst robot.
    pub max_gap: usize,
    pub window: usize,
    pub verdict: FairnessVerdict,
}

impl FairnessReport {
    pub fn is_fair(&self) -> bool {
        self.verdict == FairnessVerdict::FairWithinBudget
    }
}

/// Default audit window: ten rounds of three-phase cycles.
pub fn default_fairness_window(n: usize) -> usize {
    10 * n * 3
}

/// Finite-trace fairness: a correct robot is starved iff it completed no
/// cycle in the last `window` steps.
pub fn audit_fairness(trace: &Trace, window: usize) -> Result<FairnessReport, SchedulerError> {
    let len = trace.len();
    if window > len {
        return Err(SchedulerError::WindowTooLarge { window, len });
    }
    let correct: Vec<RobotId> = trace.initial().correct_ids().collect();
    let n = trace.params().n;
    let mut last = vec![0usize; n];
    let mut count = vec![0u64; n];
    let mut max_gap = 0;
    for step in trace.steps() {
        if step.action.completes_cycle() {
            let r = step.robot.0;
            max_gap = max_gap.max(step.step - last[r]);
            last[r] = step.step;
            count[r] += 1;
        }
    }
    for id in &correct {
        max_gap = max_gap.max(len - last[id.0]);
    }
    let window_start = len - window;
    let verdict = correct
        .iter()
        .find(|id| last[id.0] <= window_start && (window > 0 || count[id.0] == 0))
        .map_or(FairnessVerdict::FairWithinBudget, |&id| FairnessVerdict::Starved(id));
    Ok(FairnessReport {
        cycles: correct.iter().map(|id| (*id, count[id.0])).collect(),
        max_gap,
        window,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: robot {fast} completed {count} cycles while robot {slow} completed none (k = {k})")]
pub struct KBoundViolation {
    pub step: usize,
    pub fast: RobotId,
    pub slow: RobotId,
    pub count: u32,
    pub k: u32,
}

/// Checks the k-bounded predicate on the correct robots of a trace.
pub fn audit_k_bounded(trace: &Trace, k: u32) -> Result<(), KBoundViolation> {
    let n = trace.params().n;
    let correct: Vec<bool> = trace.initial().robots().iter().map(|r| r.is_correct()).collect();
    let mut since = vec![vec![0u32; n]; n];
    for step in trace.steps() {
        if !step.action.completes_cycle() || !correct[step.robot.0] {
            continue;
        }
        let j = step.robot.0;
        for i in (0..n).filter(|&i| i != j && correct[i]) {
            since[i][j] += 1;
            if since[i][j] > k {
                return Err(KBoundViolation {
                    step: step.step,
                    fast: step.robot,
                    slow: RobotId(i),
                    count: since[i][j],
                    k,
                });
            }
        }
        since[j].iter_mut().for_each(|c| *c = 0);
    }
    Ok(())
}
