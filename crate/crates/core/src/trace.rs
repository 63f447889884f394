//! Execution traces: the initial state plus one [`StepRecord`] per event.
//!
//! Full intermediate states are not stored; [`Trace::replay`] rebuilds them
//! from the records without running any algorithm, so a trace read back
//! from CSV can be re-analysed on its own.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActionKind, Model, RobotId, RobotKind, RobotSpec, StepRecord, SystemState};
use crate::protocol::{ComputeOutcome, Params};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    initial: SystemState,
    steps: Vec<StepRecord>,
}

impl Trace {
    pub fn new(initial: SystemState) -> Self {
        Trace {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn initial(&self) -> &SystemState {
        &self.initial
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn params(&self) -> Params {
        self.initial.params()
    }

    pub fn push(&mut self, step: StepRecord) {
        debug_assert_eq!(step.step, self.initial.time() + self.steps.len() + 1);
        self.steps.push(step);
    }

    pub fn extend(&mut self, steps: impl IntoIterator<Item = StepRecord>) {
        for step in steps {
            self.push(step);
        }
    }

    /// Number of recorded events.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `diam(U)` of state `index` (0 is the initial state).
    pub fn diam_u(&self, index: usize) -> Scalar {
        match index {
            0 => self.initial.diameters().0,
            k => self.steps[k - 1].diam_u.clone(),
        }
    }

    pub fn diam_ud(&self, index: usize) -> Scalar {
        match index {
            0 => self.initial.diameters().1,
            k => self.steps[k - 1].diam_ud.clone(),
        }
    }

    /// Calls `visit(step, state_after)` for the initial state (with `None`)
    /// and then after every recorded step.
    pub fn replay(&self, mut visit: impl FnMut(Option<&StepRecord>, &SystemState)) {
        let mut state = self.initial.clone();
        visit(None, &state);
        for step in &self.steps {
            state.replay_step(step);
            visit(Some(step), &state);
        }
    }

    /// The state after the last step.
    pub fn final_state(&self) -> SystemState {
        let mut state = self.initial.clone();
        for step in &self.steps {
            state.replay_step(step);
        }
        state
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut out = csv::Writer::from_writer(writer);
        let (diam_u, diam_ud) = self.initial.diameters();
        for robot in self.initial.robots() {
            out.serialize(CsvRow {
                step: 0,
                robot_id: robot.id.0,
                kind: robot.kind.as_str().to_string(),
                action: "init".to_string(),
                position_before: robot.position.to_string(),
                position_after: robot.position.to_string(),
                destination: String::new(),
                diam_u: diam_u.to_string(),
                diam_ud: diam_ud.to_string(),
                observed: String::new(),
                requested: String::new(),
                delta: robot.delta.to_string(),
                diam_u_decimal: diam_u.to_decimal(DECIMALS),
            })?;
        }
        let deltas: Vec<&Scalar> = self.initial.robots().iter().map(|r| &r.delta).collect();
        for step in &self.steps {
            out.serialize(CsvRow {
                step: step.step,
                robot_id: step.robot.0,
                kind: step.kind.as_str().to_string(),
                action: step.action.as_str().to_string(),
                position_before: step.position_before.to_string(),
                position_after: step.position_after.to_string(),
                destination: match &step.outcome {
                    None => String::new(),
                    Some(ComputeOutcome::Stay) => "stay".to_string(),
                    Some(ComputeOutcome::MoveTo(d)) => d.to_string(),
                },
                diam_u: step.diam_u.to_string(),
                diam_ud: step.diam_ud.to_string(),
                observed: step.observed.map(|o| o.to_string()).unwrap_or_default(),
                requested: step.requested.as_ref().map(|r| r.to_string()).unwrap_or_default(),
                delta: deltas[step.robot.0].to_string(),
                diam_u_decimal: step.diam_u.to_decimal(DECIMALS),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`Trace::write_csv`]. The model is ATOM iff
    /// the trace contains a `full_cycle` row; `f` is the number of Byzantine
    /// robots.
    pub fn read_csv<R: Read>(reader: R) -> Result<Trace, TraceError> {
        let mut rows = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<CsvRow>().enumerate() {
            rows.push((i + 2, row?));
        }
        let mut specs = Vec::new();
        let mut body = Vec::new();
        for (line, row) in rows {
            if row.action == "init" {
                if !body.is_empty() || row.robot_id != specs.len() {
                    return Err(malformed(line, "init rows must come first, in robot order"));
                }
                specs.push(RobotSpec {
                    position: parse_scalar(line, &row.position_after)?,
                    kind: parse_kind(line, &row.kind)?,
                    delta: parse_scalar(line, &row.delta)?,
                });
            } else {
                body.push((line, row));
            }
        }
        let model = if body.iter().any(|(_, r)| r.action == "full_cycle") {
            Model::Atom
        } else {
            Model::Corda
        };
        let f = specs.iter().filter(|s| s.kind == RobotKind::Byzantine).count();
        let initial = SystemState::new(model, f, specs).map_err(|e| malformed(1, &e.to_string()))?;
        let mut trace = Trace::new(initial);
        for (line, row) in body {
            if row.step != trace.len() + 1 {
                return Err(malformed(line, "steps must be consecutive"));
            }
            if row.robot_id >= trace.params().n {
                return Err(malformed(line, "unknown robot"));
            }
            let action = match row.action.as_str() {
                "look" => ActionKind::Look,
                "compute" => ActionKind::Compute,
                "move" => ActionKind::Move,
                "full_cycle" => ActionKind::FullCycle,
                "teleport" => ActionKind::Teleport,
                other => return Err(malformed(line, &format!("unknown action `{other}`"))),
            };
            let outcome = match row.destination.as_str() {
                "" => None,
                "stay" => Some(ComputeOutcome::Stay),
                d => Some(ComputeOutcome::MoveTo(parse_scalar(line, d)?)),
            };
            let optional = |text: &str| -> Result<Option<Scalar>, TraceError> {
                if text.is_empty() {
                    Ok(None)
                } else {
                    parse_scalar(line, text).map(Some)
                }
            };
            let observed = if row.observed.is_empty() {
                None
            } else {
                Some(
                    row.observed
                        .parse()
                        .map_err(|_| malformed(line, "bad observed index"))?,
                )
            };
            trace.push(StepRecord {
                step: row.step,
                robot: RobotId(row.robot_id),
                kind: parse_kind(line, &row.kind)?,
                action,
                requested: optional(&row.requested)?,
                position_before: parse_scalar(line, &row.position_before)?,
                position_after: parse_scalar(line, &row.position_after)?,
                outcome,
                observed,
                diam_u: parse_scalar(line, &row.diam_u)?,
                diam_ud: parse_scalar(line, &row.diam_ud)?,
            });
        }
        Ok(trace)
    }
}

const DECIMALS: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    step: usize,
    robot_id: usize,
    kind: String,
    action: String,
    position_before: String,
    position_after: String,
    destination: String,
    #[serde(rename = "diam_U")]
    diam_u: String,
    #[serde(rename = "diam_UD")]
    diam_ud: String,
    observed: String,
    requested: String,
    delta: String,
    #[serde(rename = "diam_U_decimal")]
    diam_u_decimal: String,
}

fn malformed(row: usize, message: &str) -> TraceError {
    TraceError::Malformed {
        row,
        message: message.to_string(),
    }
}

fn parse_scalar(row: usize, text: &str) -> Result<Scalar, TraceError> {
    text.parse()
        .map_err(|_| malformed(row, &format!("bad scalar `{text}`")))
}

fn parse_kind(row: usize, text: &str) -> Result<RobotKind, TraceError> {
    match text {
        "correct" => Ok(RobotKind::Correct),
        "byzantine" => Ok(RobotKind::Byzantine),
        other => Err(malformed(row, &format!("unknown kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ScheduleEvent;
    use crate::protocol::TrimmedCenter;

    fn s(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    fn sample_trace() -> Trace {
        let specs = ["0", "1", "2", "3", "4"]
            .iter()
            .map(|p| RobotSpec {
                position: s(p),
                kind: RobotKind::Correct,
                delta: s("1/4"),
            })
            .chain(std::iter::once(RobotSpec {
                position: s("9"),
                kind: RobotKind::Byzantine,
                delta: s("1"),
            }))
            .collect();
        let mut state = SystemState::new(Model::Corda, 1, specs).unwrap();
        let mut trace = Trace::new(state.clone());
        let algo = TrimmedCenter;
        let events = [
            ScheduleEvent::look(RobotId(0)),
            ScheduleEvent::look(RobotId(4)),
            ScheduleEvent::teleport(RobotId(5), s("-7/3")),
            ScheduleEvent::compute(RobotId(0)),
            ScheduleEvent::compute(RobotId(4)),
            ScheduleEvent::move_by(RobotId(0), s("1/8")),
            ScheduleEvent::look(RobotId(2)),
            ScheduleEvent::compute(RobotId(2)),
            ScheduleEvent::move_by(RobotId(2), s("0")),
            ScheduleEvent::move_by(RobotId(4), s("5")),
        ];
        for e in &events {
            trace.push(state.apply_event(e, &algo).unwrap());
        }
        assert_eq!(trace.final_state().positions(), state.positions());
        trace
    }

    #[test]
    fn csv_round_trip_preserves_trace() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("step,robot_id,kind,action,position_before,position_after,destination,diam_U,diam_UD,")
        );
        assert!(text.contains(",stay,"));
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.steps(), trace.steps());
        assert_eq!(back.final_state().positions(), trace.final_state().positions());
    }

    #[test]
    fn replay_matches_live_states() {
        let trace = sample_trace();
        let mut seen = Vec::new();
        trace.replay(|step, state| {
            seen.push(state.diameters().0);
            if let Some(step) = step {
                assert_eq!(state.diameters(), (step.diam_u.clone(), step.diam_ud.clone()));
            }
        });
        assert_eq!(seen.len(), trace.len() + 1);
        for (i, d) in seen.iter().enumerate() {
            assert_eq!(d, &trace.diam_u(i));
        }
    }

    #[test]
    fn rejects_malformed_rows() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replacen(",look,", ",jump,", 1);
        assert!(matches!(
            Trace::read_csv(broken.as_bytes()),
            Err(TraceError::Malformed { .. })
        ));
    }
}
