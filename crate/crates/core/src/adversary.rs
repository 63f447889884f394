//! The lower-bound construction for `3f < n <= 5f`: Byzantine placement and
//! scheduling that keep the two border groups apart whatever cautious
//! algorithm the correct robots run.
//!
//! Correct robots are split into `SetA` (ids `0..f`, at `A`), `SetB` (ids
//! `f..2f`, at `B`) and `SetX` (ids `2f..n-f`, at `X`); ids `n-f..n` are
//! Byzantine. Everything runs under ATOM, and each group is always activated
//! as one synchronous round so a deterministic victim keeps it colocated.
//! `A`, `B` and `X` always denote the current positions of the groups.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{EngineError, Model, RobotId, RobotKind, RobotSpec, ScheduleEvent, StepRecord, SystemState};
use crate::protocol::{CautiousAlgorithm, Params, ProtocolError};
use crate::scheduler::{audit_fairness, default_fairness_window, FairnessReport, SchedulerError};
use crate::trace::Trace;
use crate::{Interval, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Border {
    A,
    B,
}

impl Border {
    pub fn opposite(self) -> Border {
        match self {
            Border::A => Border::B,
            Border::B => Border::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Group {
    SetA,
    SetB,
    SetX,
}

/// How far the border groups travel when the construction activates them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationStop {
    /// Stopped as early as allowed, i.e. after their own `delta`.
    #[default]
    Minimal,
    /// Allowed to reach their destination.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("the construction needs 3f < n <= 5f, got n = {n}, f = {f}")]
    Bounds { n: usize, f: usize },
    #[error("need A < B, got A = {a}, B = {b}")]
    Endpoints { a: Scalar, b: Scalar },
    #[error("x0 = {0} is not strictly between A and B")]
    StartOutside(Scalar),
    #[error("delta must be positive")]
    Delta,
    #[error("distance(A, B) = {distance} must exceed max delta = {max_delta}")]
    TooClose { distance: Scalar, max_delta: Scalar },
    #[error("{routine} needs n - f to be {expected}, got n - f = {m}")]
    Parity {
        routine: &'static str,
        expected: &'static str,
        m: usize,
    },
    #[error("target distance {d} must be positive and below distance(A, B) = {distance}")]
    TargetDistance { d: Scalar, distance: Scalar },
    #[error("split: {group:?} is not at border {border:?}")]
    NotAtBorder { group: Group, border: Border },
    #[error("split: correct robots are not all at A or B")]
    NotTwoPoints,
    #[error("split: |p - q| = {diff} exceeds f = {f}")]
    Imbalance { diff: usize, f: usize },
    #[error("split left the groups at {a}, {x}, {b}, which are not three distinct points")]
    SplitFailed { a: Scalar, x: Scalar, b: Scalar },
    #[error("{group:?} lost cohesion; the victim is not deterministic")]
    Cohesion { group: Group },
    #[error("victim rejected the parameters: {0}")]
    Victim(#[from] ProtocolError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("fairness audit: {0}")]
    Fairness(#[from] SchedulerError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackConfig {
    pub n: usize,
    pub f: usize,
    pub a: Scalar,
    pub b: Scalar,
    /// Initial `X`; the midpoint of `[A, B]` when unset.
    pub x0: Option<Scalar>,
    /// Uniform `delta`; `(B - A) / 100` when unset.
    pub delta: Option<Scalar>,
    pub outer_loops: usize,
    /// Maximum `SetX` activations per push.
    pub cap: usize,
    pub activation_stop: ActivationStop,
}

impl AttackConfig {
    pub fn new(n: usize, f: usize, a: Scalar, b: Scalar) -> Self {
        AttackConfig {
            n,
            f,
            a,
            b,
            x0: None,
            delta: None,
            outer_loops: 6,
            cap: 10_000,
            activation_stop: ActivationStop::Minimal,
        }
    }
}

/// Result of one push of `SetX` towards a border.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PushOutcome {
    Reached {
        activations: usize,
    },
    /// The configuration came back to where the iteration started, so the
    /// loop would repeat forever.
    Stalled {
        activations: usize,
        distance: Scalar,
    },
    CapExceeded {
        activations: usize,
        distance: Scalar,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fact1Violation {
    pub step: usize,
    pub robot: RobotId,
    pub destination: Scalar,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopReport {
    pub d0: Scalar,
    pub toward_a: PushOutcome,
    pub toward_b: PushOutcome,
    pub splits: usize,
    pub min_separation: Scalar,
    /// Every correct robot completed at least one cycle in this loop.
    pub all_activated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackVerdict {
    NonConvergenceDemonstrated,
    SeparationLost,
    Unfair,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub n: usize,
    pub f: usize,
    pub victim: String,
    pub initial_distance: Scalar,
    pub min_separation: Scalar,
    pub separation_bound: Scalar,
    pub loops: Vec<LoopReport>,
    pub fairness: FairnessReport,
    pub fact1_violations: Vec<Fact1Violation>,
    /// Pairs of consecutive activations in the odd-parity push in which
    /// `SetX` never moved towards the border.
    pub alternation_failures: usize,
    pub verdict: AttackVerdict,
    #[serde(skip)]
    pub trace: Trace,
}

fn check_bounds(n: usize, f: usize) -> Result<(), AdversaryError> {
    if n <= 3 * f || n > 5 * f {
        return Err(AdversaryError::Bounds { n, f });
    }
    Ok(())
}

/// A running attack: the engine it owns plus the trace recorded so far.
pub struct Attack<'a> {
    algo: &'a dyn CautiousAlgorithm,
    params: Params,
    state: SystemState,
    trace: Trace,
    set_a: Vec<RobotId>,
    set_b: Vec<RobotId>,
    set_x: Vec<RobotId>,
    byzantine: Vec<RobotId>,
    max_delta: Scalar,
    cap: usize,
    activation_stop: ActivationStop,
    min_separation: Scalar,
    fact1: Vec<Fact1Violation>,
    alternation_failures: usize,
}

impl<'a> Attack<'a> {
    pub fn new(config: &AttackConfig, algo: &'a dyn CautiousAlgorithm) -> Result<Self, AdversaryError> {
        let (n, f) = (config.n, config.f);
        check_bounds(n, f)?;
        let params = Params::new(n, f);
        algo.validate(params)?;
        let (a, b) = (config.a.clone(), config.b.clone());
        if a >= b {
            return Err(AdversaryError::Endpoints { a, b });
        }
        let x0 = config.x0.clone().unwrap_or_else(|| Scalar::midpoint(&a, &b));
        if x0 <= a || x0 >= b {
            return Err(AdversaryError::StartOutside(x0));
        }
        let delta = match &config.delta {
            Some(d) => d.clone(),
            None => &(&b - &a) / &Scalar::integer(100),
        };
        if !delta.is_positive() {
            return Err(AdversaryError::Delta);
        }
        if b.distance(&a) <= delta {
            return Err(AdversaryError::TooClose {
                distance: b.distance(&a),
                max_delta: delta,
            });
        }
        let m = n - f;
        let specs = (0..n)
            .map(|i| RobotSpec {
                position: if i < f {
                    a.clone()
                } else if i < 2 * f {
                    b.clone()
                } else {
                    x0.clone()
                },
                kind: if i < m {
                    RobotKind::Correct
                } else {
                    RobotKind::Byzantine
                },
                delta: delta.clone(),
            })
            .collect();
        let state = SystemState::new(Model::Atom, f, specs)?;
        let ids = |r: std::ops::Range<usize>| r.map(RobotId).collect::<Vec<_>>();
        Ok(Attack {
            algo,
            params,
            trace: Trace::new(state.clone()),
            state,
            set_a: ids(0..f),
            set_b: ids(f..2 * f),
            set_x: ids(2 * f..m),
            byzantine: ids(m..n),
            max_delta: delta,
            cap: config.cap,
            activation_stop: config.activation_stop,
            min_separation: b.distance(&a),
            fact1: Vec::new(),
            alternation_failures: 0,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn max_delta(&self) -> &Scalar {
        &self.max_delta
    }

    pub fn fact1_violations(&self) -> &[Fact1Violation] {
        &self.fact1
    }

    pub fn alternation_failures(&self) -> usize {
        self.alternation_failures
    }

    /// Smallest `B - A` seen after any step.
    pub fn min_separation(&self) -> &Scalar {
        &self.min_separation
    }

    pub fn members(&self, group: Group) -> &[RobotId] {
        match group {
            Group::SetA => &self.set_a,
            Group::SetB => &self.set_b,
            Group::SetX => &self.set_x,
        }
    }

    pub fn position(&self, group: Group) -> Scalar {
        self.state.robots()[self.members(group)[0].0].position.clone()
    }

    pub fn a(&self) -> Scalar {
        self.position(Group::SetA)
    }

    pub fn b(&self) -> Scalar {
        self.position(Group::SetB)
    }

    pub fn x(&self) -> Scalar {
        self.position(Group::SetX)
    }

    pub fn border(&self, border: Border) -> Scalar {
        match border {
            Border::A => self.a(),
            Border::B => self.b(),
        }
    }

    fn border_group(border: Border) -> Group {
        match border {
            Border::A => Group::SetA,
            Border::B => Group::SetB,
        }
    }

    fn run(&mut self, events: &[ScheduleEvent]) -> Result<Vec<StepRecord>, AdversaryError> {
        if events.is_empty() {
            return Ok(Vec::new());
        }
        let records = self.state.apply_round(events, self.algo)?;
        self.trace.extend(records.iter().cloned());
        let separation = &self.b() - &self.a();
        if separation < self.min_separation {
            self.min_separation = separation;
        }
        Ok(records)
    }

    /// Puts the first `at_border` Byzantine robots on `border` and the rest
    /// on `X`. Robots already in place are not touched.
    fn place(&mut self, at_border: usize, border: Border) -> Result<(), AdversaryError> {
        let (target_border, target_x) = (self.border(border), self.x());
        let events: Vec<ScheduleEvent> = self
            .byzantine
            .iter()
            .enumerate()
            .filter_map(|(i, &id)| {
                let target = if i < at_border { &target_border } else { &target_x };
                (&self.state.robots()[id.0].position != target).then(|| ScheduleEvent::teleport(id, target.clone()))
            })
            .collect();
        // each teleport is its own event so none of them is a synchronous run
        for event in events {
            self.run(std::slice::from_ref(&event))?;
        }
        Ok(())
    }

    fn activate(&mut self, ids: &[RobotId], stop: &Scalar) -> Result<Vec<StepRecord>, AdversaryError> {
        let events: Vec<ScheduleEvent> = ids
            .iter()
            .map(|&id| ScheduleEvent::full_cycle(id, stop.clone()))
            .collect();
        self.run(&events)
    }

    fn full_stop(&self) -> Scalar {
        self.state.positions().diam().expect("nonempty")
    }

    fn check_cohesion(&self, group: Group) -> Result<(), AdversaryError> {
        let first = self.position(group);
        if self
            .members(group)
            .iter()
            .any(|id| self.state.robots()[id.0].position != first)
        {
            return Err(AdversaryError::Cohesion { group });
        }
        Ok(())
    }

    /// One simultaneous full-travel activation of `SetX`. Returns whether
    /// `X` got closer to `border`.
    fn activate_x(&mut self, border: Border) -> Result<bool, AdversaryError> {
        let before = self.x().distance(&self.border(border));
        let stop = self.full_stop();
        let ids = self.set_x.clone();
        self.activate(&ids, &stop)?;
        self.check_cohesion(Group::SetX)?;
        Ok(self.x().distance(&self.border(border)) < before)
    }

    fn check_target(&self, d: &Scalar) -> Result<(), AdversaryError> {
        let distance = self.b() - self.a();
        if !d.is_positive() || d >= &distance {
            return Err(AdversaryError::TargetDistance { d: d.clone(), distance });
        }
        Ok(())
    }

    fn m(&self) -> usize {
        self.params.correct()
    }

    /// Even `n - f`: keep the multiplicities of `X` and `border` equal and
    /// activate `SetX` until it is within `d` of `border`.
    pub fn g2b1(&mut self, border: Border, d: &Scalar) -> Result<PushOutcome, AdversaryError> {
        let (n, f) = (self.params.n, self.params.f);
        if !self.m().is_multiple_of(2) {
            return Err(AdversaryError::Parity {
                routine: "g2b1",
                expected: "even",
                m: self.m(),
            });
        }
        self.check_target(d)?;
        let at_border = (n - 3 * f) / 2;
        debug_assert_eq!(at_border + (5 * f - n) / 2, f);
        let mut activations = 0;
        loop {
            let distance = self.x().distance(&self.border(border));
            if &distance <= d {
                return Ok(PushOutcome::Reached { activations });
            }
            if activations >= self.cap {
                return Ok(PushOutcome::CapExceeded { activations, distance });
            }
            self.place(at_border, border)?;
            let start = self.x();
            self.activate_x(border)?;
            activations += 1;
            if self.x() == start {
                return Ok(PushOutcome::Stalled { activations, distance });
            }
        }
    }

    /// Odd `n - f`: alternate which of `X` and `border` has the larger
    /// multiplicity between consecutive activations of `SetX`.
    pub fn g2b2(&mut self, border: Border, d: &Scalar) -> Result<PushOutcome, AdversaryError> {
        let (n, f) = (self.params.n, self.params.f);
        if self.m() % 2 != 1 {
            return Err(AdversaryError::Parity {
                routine: "g2b2",
                expected: "odd",
                m: self.m(),
            });
        }
        self.check_target(d)?;
        let at_border = (n - 3 * f).div_ceil(2);
        debug_assert_eq!(at_border + (5 * f - n - 1) / 2, f);
        self.place(at_border, border)?;
        let mut activations = 0;
        loop {
            let distance = self.x().distance(&self.border(border));
            if &distance <= d {
                return Ok(PushOutcome::Reached { activations });
            }
            if activations >= self.cap {
                return Ok(PushOutcome::CapExceeded { activations, distance });
            }
            let start = self.x();
            self.place(at_border, border)?;
            let first = self.activate_x(border)?;
            self.place(at_border - 1, border)?;
            let second = self.activate_x(border)?;
            self.place(at_border, border)?;
            activations += 2;
            if !first && !second {
                self.alternation_failures += 1;
            }
            if self.x() == start {
                return Ok(PushOutcome::Stalled { activations, distance });
            }
        }
    }

    /// Dispatches on the parity of `n - f`.
    pub fn g2b(&mut self, border: Border, d: &Scalar) -> Result<PushOutcome, AdversaryError> {
        if self.m().is_multiple_of(2) {
            self.g2b1(border, d)
        } else {
            self.g2b2(border, d)
        }
    }

    /// Activates every correct robot standing on `border`, checking that
    /// their destinations stay between the border and `X` whenever the
    /// Byzantine robots do.
    pub fn activate_border(&mut self, border: Border) -> Result<(), AdversaryError> {
        let at = self.border(border);
        let x = self.x();
        let interval = if at <= x {
            Interval::new(at.clone(), x)
        } else {
            Interval::new(x, at.clone())
        };
        let byzantine_inside = self
            .byzantine
            .iter()
            .all(|id| interval.contains(&self.state.robots()[id.0].position));
        let ids: Vec<RobotId> = self
            .state
            .robots()
            .iter()
            .filter(|r| r.is_correct() && r.position == at)
            .map(|r| r.id)
            .collect();
        let stop = match self.activation_stop {
            ActivationStop::Minimal => Scalar::zero(),
            ActivationStop::Full => self.full_stop(),
        };
        let records = self.activate(&ids, &stop)?;
        if byzantine_inside {
            for r in records
                .iter()
                .filter(|r| self.set_a.contains(&r.robot) || self.set_b.contains(&r.robot))
            {
                let destination = r.destination().expect("full cycles carry an outcome");
                if !interval.contains(destination) {
                    self.fact1.push(Fact1Violation {
                        step: r.step,
                        robot: r.robot,
                        destination: destination.clone(),
                        interval: interval.clone(),
                    });
                }
            }
        }
        self.check_cohesion(Self::border_group(border))?;
        Ok(())
    }

    /// Moves `group`, currently merged with `border`, a distance of max
    /// delta towards the opposite border.
    pub fn split(&mut self, group: Group, border: Border) -> Result<(), AdversaryError> {
        let at = self.border(border);
        if group == Self::border_group(border) || self.position(group) != at {
            return Err(AdversaryError::NotAtBorder { group, border });
        }
        let opposite = self.border(border.opposite());
        let distance = at.distance(&opposite);
        if distance <= self.max_delta {
            return Err(AdversaryError::TooClose {
                distance,
                max_delta: self.max_delta.clone(),
            });
        }
        let correct: Vec<&Scalar> = self
            .state
            .robots()
            .iter()
            .filter(|r| r.is_correct())
            .map(|r| &r.position)
            .collect();
        if correct.iter().any(|p| **p != at && **p != opposite) {
            return Err(AdversaryError::NotTwoPoints);
        }
        let p = correct.iter().filter(|p| ***p == at).count();
        let q = correct.len() - p + self.byzantine.len();
        let diff = p.abs_diff(q);
        if diff > self.params.f {
            return Err(AdversaryError::Imbalance { diff, f: self.params.f });
        }
        let f = self.byzantine.len();
        self.place(f, border.opposite())?;
        let ids = self.members(group).to_vec();
        let stop = self.max_delta.clone();
        self.activate(&ids, &stop)?;
        self.check_cohesion(group)?;
        let (a, x, b) = (self.a(), self.x(), self.b());
        if a == x || x == b || a == b {
            return Err(AdversaryError::SplitFailed { a, x, b });
        }
        Ok(())
    }

    fn cycles(&self) -> Vec<u64> {
        self.state
            .robots()
            .iter()
            .filter(|r| r.is_correct())
            .map(|r| r.cycles_completed)
            .collect()
    }

    /// Runs `outer_loops` iterations of the construction and audits the
    /// resulting trace.
    pub fn run_loops(mut self, outer_loops: usize) -> Result<AttackReport, AdversaryError> {
        let initial_distance = self.b() - self.a();
        let mut d0 = &initial_distance / &Scalar::integer(10);
        let mut loops = Vec::with_capacity(outer_loops);
        for _ in 0..outer_loops {
            let before = self.cycles();
            let loop_start_sep = self.min_separation.clone();
            self.min_separation = self.b() - self.a();
            let mut splits = 0;
            let toward_a = self.g2b(Border::A, &d0)?;
            self.activate_border(Border::A)?;
            if self.x() == self.a() {
                self.split(Group::SetX, Border::A)?;
                splits += 1;
            }
            let toward_b = self.g2b(Border::B, &d0)?;
            self.activate_border(Border::B)?;
            if self.x() == self.b() {
                self.split(Group::SetX, Border::B)?;
                splits += 1;
            }
            let after = self.cycles();
            let loop_sep = self.min_separation.clone();
            self.min_separation = (&loop_sep).min(&loop_start_sep).clone();
            loops.push(LoopReport {
                d0: d0.clone(),
                toward_a,
                toward_b,
                splits,
                min_separation: loop_sep,
                all_activated: before.iter().zip(&after).all(|(b, a)| a > b),
            });
            d0 = &d0 / &Scalar::integer(2);
        }
        let window = default_fairness_window(self.params.n).min(self.trace.len());
        let fairness = audit_fairness(&self.trace, window)?;
        let separation_bound = &initial_distance * &Scalar::new(6, 10).expect("nonzero");
        let verdict = if !fairness.is_fair() || loops.iter().any(|l| !l.all_activated) {
            AttackVerdict::Unfair
        } else if self.min_separation < separation_bound {
            AttackVerdict::SeparationLost
        } else {
            AttackVerdict::NonConvergenceDemonstrated
        };
        Ok(AttackReport {
            n: self.params.n,
            f: self.params.f,
            victim: self.algo.name().to_string(),
            initial_distance,
            min_separation: self.min_separation,
            separation_bound,
            loops,
            fairness,
            fact1_violations: self.fact1,
            alternation_failures: self.alternation_failures,
            verdict,
            trace: self.trace,
        })
    }
}

/// Builds the initial network and runs the full construction against `algo`.
pub fn adversary_algorithm(
    config: &AttackConfig,
    algo: &dyn CautiousAlgorithm,
) -> Result<AttackReport, AdversaryError> {
    Attack::new(config, algo)?.run_loops(config.outer_loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ComputeOutcome, FullTrimMidpoint, RobotView, TrimmedCenter};

    fn s(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    fn config(n: usize, f: usize) -> AttackConfig {
        AttackConfig::new(n, f, s("0"), s("1"))
    }

    fn multiplicity(state: &SystemState, at: &Scalar) -> usize {
        state.positions().multiplicity(at)
    }

    #[test]
    fn rejects_out_of_bounds_networks() {
        let algo = FullTrimMidpoint;
        assert!(matches!(
            adversary_algorithm(&config(16, 3), &algo),
            Err(AdversaryError::Bounds { n: 16, f: 3 })
        ));
        assert!(matches!(
            adversary_algorithm(&config(9, 3), &algo),
            Err(AdversaryError::Bounds { n: 9, f: 3 })
        ));
        assert!(matches!(
            adversary_algorithm(&config(12, 3), &TrimmedCenter),
            Err(AdversaryError::Victim(_))
        ));
        let mut bad = config(9, 2);
        bad.x0 = Some(s("1"));
        assert!(matches!(Attack::new(&bad, &algo), Err(AdversaryError::StartOutside(_))));
    }

    #[test]
    fn even_placement_balances_x_and_border() {
        // (13, 3): two Byzantine robots at the border, one at X, five robots
        // at each of X and B.
        let algo = FullTrimMidpoint;
        let mut attack = Attack::new(&config(13, 3), &algo).unwrap();
        let at_border = (13 - 9) / 2;
        assert_eq!((at_border, (15 - 13) / 2), (2, 1));
        attack.place(at_border, Border::B).unwrap();
        let st = attack.state();
        assert_eq!(multiplicity(st, &attack.x()), 5);
        assert_eq!(multiplicity(st, &attack.b()), 5);
    }

    #[test]
    fn odd_placement_starts_one_short_at_x() {
        let algo = FullTrimMidpoint;
        let mut attack = Attack::new(&config(12, 3), &algo).unwrap();
        attack.place((12 - 9usize).div_ceil(2), Border::B).unwrap();
        let st = attack.state();
        assert_eq!(multiplicity(st, &attack.x()) + 1, multiplicity(st, &attack.b()));
        // (9, 2): all Byzantine robots go to the border.
        let (n, f) = (9usize, 2usize);
        assert_eq!(((n - 3 * f).div_ceil(2), (5 * f - n - 1) / 2), (2, 0));
    }

    #[test]
    fn parity_is_enforced() {
        let algo = FullTrimMidpoint;
        let mut attack = Attack::new(&config(9, 2), &algo).unwrap();
        assert!(matches!(
            attack.g2b1(Border::B, &s("1/10")),
            Err(AdversaryError::Parity { .. })
        ));
        let mut attack = Attack::new(&config(13, 3), &algo).unwrap();
        assert!(matches!(
            attack.g2b2(Border::B, &s("1/10")),
            Err(AdversaryError::Parity { .. })
        ));
        assert!(matches!(
            attack.g2b1(Border::B, &s("1")),
            Err(AdversaryError::TargetDistance { .. })
        ));
    }

    #[test]
    fn pushes_reach_the_border() {
        let algo = FullTrimMidpoint;
        for (n, f) in [(13, 3), (12, 3), (9, 2), (8, 2)] {
            let mut attack = Attack::new(&config(n, f), &algo).unwrap();
            let out = attack.g2b(Border::B, &s("1/100")).unwrap();
            assert!(matches!(out, PushOutcome::Reached { .. }), "({n},{f}): {out:?}");
            assert!(attack.x().distance(&attack.b()) <= s("1/100"));
            assert_eq!(attack.alternation_failures(), 0);
            let out = attack.g2b(Border::A, &s("1/100")).unwrap();
            assert!(matches!(out, PushOutcome::Reached { .. }), "({n},{f}): {out:?}");
        }
    }

    #[test]
    fn algo4_stalls_below_its_bound() {
        let mut attack = Attack::new(&config(9, 2), &TrimmedCenter).unwrap();
        let out = attack.g2b(Border::A, &s("1/10")).unwrap();
        assert!(matches!(out, PushOutcome::Stalled { activations: 2, .. }), "{out:?}");
        assert_eq!(attack.x(), s("1/2"));
        assert_eq!(attack.alternation_failures(), 1);
    }

    /// Heads for whichever occupied point has the larger multiplicity.
    struct Majority;

    impl CautiousAlgorithm for Majority {
        fn name(&self) -> &str {
            "majority"
        }
        fn validate(&self, _: Params) -> Result<(), ProtocolError> {
            Ok(())
        }
        fn compute(&self, view: &RobotView) -> Result<ComputeOutcome, ProtocolError> {
            let snap = view.snapshot();
            let best = snap
                .iter()
                .max_by_key(|p| (snap.multiplicity(p), std::cmp::Reverse((*p).clone())))
                .unwrap();
            Ok(ComputeOutcome::MoveTo(best.clone()))
        }
    }

    #[test]
    fn split_separates_merged_groups() {
        let mut attack = Attack::new(&config(9, 2), &FullTrimMidpoint).unwrap();
        // merging needs a victim that jumps onto the border
        attack.algo = &Majority;
        attack.place(2, Border::B).unwrap();
        attack.activate_x(Border::B).unwrap();
        assert_eq!(attack.x(), attack.b());
        let before = attack.state().clone();
        assert!(matches!(
            attack.split(Group::SetX, Border::A),
            Err(AdversaryError::NotAtBorder { .. })
        ));
        assert_eq!(attack.state(), &before, "failed precondition changes nothing");
        // Byzantine robots at A make p = 5, q = 4.
        attack.algo = &FullTrimMidpoint;
        attack.split(Group::SetX, Border::B).unwrap();
        let (a, x, b) = (attack.a(), attack.x(), attack.b());
        assert!(a < x && x < b);
        assert_eq!(&b - &x, attack.max_delta().clone());
    }

    #[test]
    fn attack_report_on_fulltrim() {
        let report = adversary_algorithm(&config(12, 3), &FullTrimMidpoint).unwrap();
        assert_eq!(report.loops.len(), 6);
        assert!(report
            .loops
            .iter()
            .all(|l| matches!(l.toward_a, PushOutcome::Reached { .. }) && l.all_activated));
        assert!(report.fact1_violations.is_empty());
        assert!(report.min_separation >= report.separation_bound);
        assert!(report.fairness.is_fair());
        assert_eq!(report.verdict, AttackVerdict::NonConvergenceDemonstrated);
        let byzantine = report.trace.initial().byzantine_ids().count();
        assert_eq!(byzantine, 3);
    }
}
