//! Look-Compute-Move state machine for every robot, under ATOM or CORDA
//! semantics.
//!
//! The engine never picks what happens next: a scheduler (or the adversary)
//! hands it [`ScheduleEvent`]s, including how far a moving robot should get
//! before being stopped. The engine enforces the phase discipline and the
//! minimal-travel guarantee `delta` and reports each step as a
//! [`StepRecord`].

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::protocol::{CautiousAlgorithm, ComputeOutcome, Params, ProtocolError, RobotView};
use crate::{Interval, PositionMultiset, Scalar};

/// Engine-internal robot handle. Algorithms never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RobotId(pub usize);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotKind {
    Correct,
    Byzantine,
}

impl RobotKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RobotKind::Correct => "correct",
            RobotKind::Byzantine => "byzantine",
        }
    }
}

/// Cycle phase. `observed` is the index of the system state the snapshot was
/// taken from (state 0 is the initial configuration, state `k` follows step
/// `k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Looked {
        snapshot: PositionMultiset,
        observed: usize,
    },
    Computed {
        outcome: ComputeOutcome,
        observed: usize,
    },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Looked { .. } => "looked",
            Phase::Computed { .. } => "computed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotState {
    pub id: RobotId,
    pub position: Scalar,
    pub kind: RobotKind,
    pub phase: Phase,
    pub delta: Scalar,
    pub cycles_completed: u64,
}

impl RobotState {
    pub fn is_correct(&self) -> bool {
        self.kind == RobotKind::Correct
    }

    /// Pending destination; a robot without a computed outcome contributes
    /// its own position.
    pub fn destination(&self) -> &Scalar {
        match &self.phase {
            Phase::Computed { outcome, .. } => outcome.destination(&self.position),
            _ => &self.position,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Every activation is a full, indivisible cycle.
    Atom,
    /// Phases of different robots may interleave.
    Corda,
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "atom" => Ok(Model::Atom),
            "corda" => Ok(Model::Corda),
            other => Err(format!("unknown model `{other}` (expected atom|corda)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Look,
    Compute,
    Move {
        requested_stop: Scalar,
    },
    /// ATOM only: Look, Compute and Move in one step.
    FullCycle {
        requested_stop: Scalar,
    },
    ByzantineTeleport {
        target: Scalar,
    },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Look => ActionKind::Look,
            Action::Compute => ActionKind::Compute,
            Action::Move { .. } => ActionKind::Move,
            Action::FullCycle { .. } => ActionKind::FullCycle,
            Action::ByzantineTeleport { .. } => ActionKind::Teleport,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Look,
    Compute,
    Move,
    FullCycle,
    Teleport,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Look => "look",
            ActionKind::Compute => "compute",
            ActionKind::Move => "move",
            ActionKind::FullCycle => "full_cycle",
            ActionKind::Teleport => "teleport",
        }
    }

    /// Whether this step ends a Look-Compute-Move cycle.
    pub fn completes_cycle(&self) -> bool {
        matches!(self, ActionKind::Move | ActionKind::FullCycle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub robot: RobotId,
    pub action: Action,
}

impl ScheduleEvent {
    pub fn new(robot: RobotId, action: Action) -> Self {
        ScheduleEvent { robot, action }
    }

    pub fn look(robot: RobotId) -> Self {
        Self::new(robot, Action::Look)
    }

    pub fn compute(robot: RobotId) -> Self {
        Self::new(robot, Action::Compute)
    }

    pub fn move_by(robot: RobotId, requested_stop: Scalar) -> Self {
        Self::new(robot, Action::Move { requested_stop })
    }

    pub fn full_cycle(robot: RobotId, requested_stop: Scalar) -> Self {
        Self::new(robot, Action::FullCycle { requested_stop })
    }

    pub fn teleport(robot: RobotId, target: Scalar) -> Self {
        Self::new(robot, Action::ByzantineTeleport { target })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("robot {0} does not exist")]
    UnknownRobot(RobotId),
    #[error("robot {robot} cannot {action} while {phase}")]
    PhaseViolation {
        robot: RobotId,
        phase: &'static str,
        action: &'static str,
    },
    #[error("{action} is not allowed under the {model:?} model")]
    ModelViolation { action: &'static str, model: Model },
    #[error("robot {0} is correct and cannot be teleported")]
    NotByzantine(RobotId),
    #[error("robot {0} is Byzantine and does not run cycles")]
    ByzantineCycle(RobotId),
    #[error("requested stop {0} is negative")]
    NegativeStop(Scalar),
    #[error("robot {0} appears twice in one synchronous activation")]
    DuplicateActivation(RobotId),
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("algorithm failed: {0}")]
    Protocol(#[from] ProtocolError),
}

/// Positions and pending destinations of the correct robots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub positions: PositionMultiset,
    pub destinations: PositionMultiset,
    pub union: PositionMultiset,
}

/// One applied event as recorded in a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    /// 1-based; the state after this step has index `step`.
    pub step: usize,
    pub robot: RobotId,
    pub kind: RobotKind,
    pub action: ActionKind,
    /// Requested stop for moves, target for teleports.
    pub requested: Option<Scalar>,
    pub position_before: Scalar,
    pub position_after: Scalar,
    /// Computed outcome (Compute, FullCycle) or the outcome being executed
    /// (Move).
    pub outcome: Option<ComputeOutcome>,
    /// State index the acting robot's snapshot was taken from.
    pub observed: Option<usize>,
    pub diam_u: Scalar,
    pub diam_ud: Scalar,
}

impl StepRecord {
    pub fn destination(&self) -> Option<&Scalar> {
        self.outcome.as_ref().map(|o| o.destination(&self.position_before))
    }
}

/// Travel rule for one Move: a robot whose destination is within `delta`
/// always reaches it; otherwise it travels `requested_stop` clamped to
/// `[delta, distance]`.
pub fn travel(position: &Scalar, destination: &Scalar, delta: &Scalar, requested_stop: &Scalar) -> Scalar {
    let dist = position.distance(destination);
    if &dist <= delta {
        return destination.clone();
    }
    let traveled = requested_stop.max(delta).min(&dist).clone();
    if destination > position {
        position + traveled
    } else {
        position - traveled
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    robots: Vec<RobotState>,
    time: usize,
    model: Model,
    f: usize,
}

/// Initial description of one robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotSpec {
    pub position: Scalar,
    pub kind: RobotKind,
    pub delta: Scalar,
}

impl SystemState {
    pub fn new(model: Model, f: usize, robots: Vec<RobotSpec>) -> Result<Self, EngineError> {
        let byzantine = robots.iter().filter(|r| r.kind == RobotKind::Byzantine).count();
        if robots.is_empty() {
            return Err(EngineError::InvalidState("no robots".into()));
        }
        if f >= robots.len() {
            return Err(EngineError::InvalidState(format!(
                "f = {f} must be smaller than n = {}",
                robots.len()
            )));
        }
        if byzantine > f {
            return Err(EngineError::InvalidState(format!(
                "{byzantine} Byzantine robots exceed the bound f = {f}"
            )));
        }
        if let Some(bad) = robots
            .iter()
            .find(|r| r.kind == RobotKind::Correct && !r.delta.is_positive())
        {
            return Err(EngineError::InvalidState(format!(
                "delta must be positive for correct robots, got {}",
                bad.delta
            )));
        }
        let robots = robots
            .into_iter()
            .enumerate()
            .map(|(i, spec)| RobotState {
                id: RobotId(i),
                position: spec.position,
                kind: spec.kind,
                phase: Phase::Idle,
                delta: spec.delta,
                cycles_completed: 0,
            })
            .collect();
        Ok(SystemState {
            robots,
            time: 0,
            model,
            f,
        })
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn robot(&self, id: RobotId) -> Result<&RobotState, EngineError> {
        self.robots.get(id.0).ok_or(EngineError::UnknownRobot(id))
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn params(&self) -> Params {
        Params::new(self.robots.len(), self.f)
    }

    pub fn correct_ids(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.robots.iter().filter(|r| r.is_correct()).map(|r| r.id)
    }

    pub fn byzantine_ids(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.robots.iter().filter(|r| !r.is_correct()).map(|r| r.id)
    }

    /// Every robot's position, as a Look would observe it.
    pub fn positions(&self) -> PositionMultiset {
        self.robots.iter().map(|r| r.position.clone()).collect()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let positions: PositionMultiset = self
            .robots
            .iter()
            .filter(|r| r.is_correct())
            .map(|r| r.position.clone())
            .collect();
        let destinations: PositionMultiset = self
            .robots
            .iter()
            .filter(|r| r.is_correct())
            .map(|r| r.destination().clone())
            .collect();
        let union = positions.union(&destinations);
        GroundTruth {
            positions,
            destinations,
            union,
        }
    }

    pub fn correct_range(&self) -> Interval {
        self.ground_truth()
            .positions
            .range()
            .expect("at least one correct robot")
    }

    /// `(diam(U), diam(U ∪ D))`.
    pub fn diameters(&self) -> (Scalar, Scalar) {
        let truth = self.ground_truth();
        (
            truth.positions.diam().expect("at least one correct robot"),
            truth.union.diam().expect("at least one correct robot"),
        )
    }

    /// Validates `event` without applying it.
    pub fn check_event(&self, event: &ScheduleEvent) -> Result<(), EngineError> {
        let robot = self.robot(event.robot)?;
        let violation = |action: &'static str| EngineError::PhaseViolation {
            robot: robot.id,
            phase: robot.phase.name(),
            action,
        };
        match &event.action {
            Action::ByzantineTeleport { .. } => {
                if robot.is_correct() {
                    return Err(EngineError::NotByzantine(robot.id));
                }
                return Ok(());
            }
            _ if !robot.is_correct() => return Err(EngineError::ByzantineCycle(robot.id)),
            Action::FullCycle { requested_stop } => {
                if self.model != Model::Atom {
                    return Err(EngineError::ModelViolation {
                        action: "full_cycle",
                        model: self.model,
                    });
                }
                if requested_stop.is_negative() {
                    return Err(EngineError::NegativeStop(requested_stop.clone()));
                }
                if robot.phase != Phase::Idle {
                    return Err(violation("full_cycle"));
                }
            }
            partial => {
                if self.model == Model::Atom {
                    return Err(EngineError::ModelViolation {
                        action: event.action.kind().as_str(),
                        model: self.model,
                    });
                }
                match (partial, &robot.phase) {
                    (Action::Look, Phase::Idle) => {}
                    (Action::Look, _) => return Err(violation("look")),
                    (Action::Compute, Phase::Looked { .. }) => {}
                    (Action::Compute, _) => return Err(violation("compute")),
                    (Action::Move { requested_stop }, Phase::Computed { .. }) => {
                        if requested_stop.is_negative() {
                            return Err(EngineError::NegativeStop(requested_stop.clone()));
                        }
                    }
                    (Action::Move { .. }, _) => return Err(violation("move")),
                    _ => unreachable!("handled above"),
                }
            }
        }
        Ok(())
    }

    fn view_for(&self, robot: &RobotState, snapshot: PositionMultiset) -> Result<RobotView, EngineError> {
        Ok(RobotView::new(snapshot, robot.position.clone(), self.params())?)
    }

    /// Applies one event. Under ATOM a `FullCycle` observes the current
    /// configuration.
    pub fn apply_event(
        &mut self,
        event: &ScheduleEvent,
        algo: &dyn CautiousAlgorithm,
    ) -> Result<StepRecord, EngineError> {
        self.check_event(event)?;
        let idx = event.robot.0;
        let before = self.robots[idx].position.clone();
        let mut requested = None;
        let mut outcome = None;
        let mut observed = None;

        match &event.action {
            Action::Look => {
                let snapshot = self.positions();
                self.robots[idx].phase = Phase::Looked {
                    snapshot,
                    observed: self.time,
                };
            }
            Action::Compute => {
                let Phase::Looked {
                    snapshot,
                    observed: seen,
                } = &self.robots[idx].phase
                else {
                    unreachable!("checked")
                };
                let seen = *seen;
                let view = self.view_for(&self.robots[idx], snapshot.clone())?;
                let computed = algo.compute(&view)?;
                outcome = Some(computed.clone());
                observed = Some(seen);
                self.robots[idx].phase = Phase::Computed {
                    outcome: computed,
                    observed: seen,
                };
            }
            Action::Move { requested_stop } => {
                let Phase::Computed {
                    outcome: pending,
                    observed: seen,
                } = std::mem::replace(&mut self.robots[idx].phase, Phase::Idle)
                else {
                    unreachable!("checked")
                };
                self.finish_move(idx, &pending, requested_stop);
                requested = Some(requested_stop.clone());
                outcome = Some(pending);
                observed = Some(seen);
            }
            Action::FullCycle { requested_stop } => {
                let snapshot = self.positions();
                let seen = self.time;
                let view = self.view_for(&self.robots[idx], snapshot)?;
                let computed = algo.compute(&view)?;
                self.finish_move(idx, &computed, requested_stop);
                requested = Some(requested_stop.clone());
                outcome = Some(computed);
                observed = Some(seen);
            }
            Action::ByzantineTeleport { target } => {
                self.robots[idx].position = target.clone();
                requested = Some(target.clone());
            }
        }
        Ok(self.record(idx, event.action.kind(), before, requested, outcome, observed))
    }

    fn finish_move(&mut self, idx: usize, outcome: &ComputeOutcome, requested_stop: &Scalar) {
        let robot = &mut self.robots[idx];
        if let ComputeOutcome::MoveTo(dest) = outcome {
            robot.position = travel(&robot.position, dest, &robot.delta, requested_stop);
        }
        robot.phase = Phase::Idle;
        robot.cycles_completed += 1;
    }

    fn record(
        &mut self,
        idx: usize,
        action: ActionKind,
        before: Scalar,
        requested: Option<Scalar>,
        outcome: Option<ComputeOutcome>,
        observed: Option<usize>,
    ) -> StepRecord {
        self.time += 1;
        let (diam_u, diam_ud) = self.diameters();
        let robot = &self.robots[idx];
        StepRecord {
            step: self.time,
            robot: robot.id,
            kind: robot.kind,
            action,
            requested,
            position_before: before,
            position_after: robot.position.clone(),
            outcome,
            observed,
            diam_u,
            diam_ud,
        }
    }

    /// Applies a batch of events. Each maximal run of consecutive
    /// `FullCycle` events is one synchronous activation: all robots in the
    /// run observe the configuration as it was when the run started. Other
    /// events apply one at a time. The batch is all-or-nothing.
    pub fn apply_round(
        &mut self,
        events: &[ScheduleEvent],
        algo: &dyn CautiousAlgorithm,
    ) -> Result<Vec<StepRecord>, EngineError> {
        if events.len() == 1 {
            return Ok(vec![self.apply_event(&events[0], algo)?]);
        }
        let mut scratch = self.clone();
        let mut records = Vec::with_capacity(events.len());
        let mut i = 0;
        while i < events.len() {
            if !matches!(events[i].action, Action::FullCycle { .. }) {
                records.push(scratch.apply_event(&events[i], algo)?);
                i += 1;
                continue;
            }
            let run_end = events[i..]
                .iter()
                .position(|e| !matches!(e.action, Action::FullCycle { .. }))
                .map_or(events.len(), |p| i + p);
            records.extend(scratch.synchronous_cycles(&events[i..run_end], algo)?);
            i = run_end;
        }
        *self = scratch;
        Ok(records)
    }

    fn synchronous_cycles(
        &mut self,
        run: &[ScheduleEvent],
        algo: &dyn CautiousAlgorithm,
    ) -> Result<Vec<StepRecord>, EngineError> {
        let mut seen_ids = std::collections::HashSet::new();
        for event in run {
            self.check_event(event)?;
            if !seen_ids.insert(event.robot) {
                return Err(EngineError::DuplicateActivation(event.robot));
            }
        }
        let snapshot = self.positions();
        let observed = self.time;
        let outcomes = run
            .iter()
            .map(|event| {
                let view = self.view_for(&self.robots[event.robot.0], snapshot.clone())?;
                Ok(algo.compute(&view)?)
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        let mut records = Vec::with_capacity(run.len());
        for (event, computed) in run.iter().zip(outcomes) {
            let Action::FullCycle { requested_stop } = &event.action else {
                unreachable!("run holds only full cycles")
            };
            let idx = event.robot.0;
            let before = self.robots[idx].position.clone();
            self.finish_move(idx, &computed, requested_stop);
            records.push(self.record(
                idx,
                ActionKind::FullCycle,
                before,
                Some(requested_stop.clone()),
                Some(computed),
                Some(observed),
            ));
        }
        Ok(records)
    }

    /// Restores a state from recorded steps, without running any algorithm.
    pub(crate) fn replay_step(&mut self, step: &StepRecord) {
        let idx = step.robot.0;
        match step.action {
            ActionKind::Look => {
                let snapshot = self.positions();
                self.robots[idx].phase = Phase::Looked {
                    snapshot,
                    observed: self.time,
                };
            }
            ActionKind::Compute => {
                self.robots[idx].phase = Phase::Computed {
                    outcome: step.outcome.clone().unwrap_or(ComputeOutcome::Stay),
                    observed: step.observed.unwrap_or(self.time),
                };
            }
            ActionKind::Move | ActionKind::FullCycle => {
                self.robots[idx].position = step.position_after.clone();
                self.robots[idx].phase = Phase::Idle;
                self.robots[idx].cycles_completed += 1;
            }
            ActionKind::Teleport => {
                self.robots[idx].position = step.position_after.clone();
            }
        }
        self.time = step.step;
    }

    /// All robots idle: the only states ATOM may expose between steps.
    pub fn all_idle(&self) -> bool {
        self.robots.iter().all(|r| r.phase == Phase::Idle)
    }
}
