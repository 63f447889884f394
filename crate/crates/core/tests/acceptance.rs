//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use byzline::adversary::{adversary_algorithm, AttackConfig, AttackVerdict};
use byzline::analysis::{check_cautious, check_convergence, epoch_boundaries, measure_shrinking};
use byzline::engine::{ActionKind, Model, RobotKind, RobotSpec, ScheduleEvent, SystemState};
use byzline::experiment::{run, AdversaryKind, ExperimentConfig, InitialPositions, SchedulerKind};
use byzline::protocol::{algorithm_by_name, center, elected, trim_2f, Params, RobotView, TrimmedCenter};
use byzline::scheduler::default_fairness_window;
use byzline::trace::Trace;
use byzline::{Interval, PositionMultiset, Scalar};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

const BUDGET: usize = 100_000;

fn async_config(n: usize, f: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n,
        f,
        seed,
        budget: BUDGET,
        model: Model::Corda,
        scheduler: SchedulerKind::Async,
        adversary: AdversaryKind::Random(None),
        rel_epsilon: Scalar::new(1, 1_000_000).unwrap(),
        ..ExperimentConfig::default()
    }
}

/// The campaign shared by the first, second and fourth criteria.
fn campaign() -> Vec<(usize, usize, u64, Trace)> {
    let jobs: Vec<(usize, usize, u64)> = [(6, 1), (11, 2)]
        .into_iter()
        .flat_map(|(n, f)| (0..50).map(move |s| (n, f, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(n, f, seed)| {
            let out = run(&async_config(n, f, seed)).expect("campaign run");
            (n, f, seed, out.trace)
        })
        .collect()
}

fn convergence(runs: &[(usize, usize, u64, Trace)]) -> Outcome {
    let threshold = Scalar::new(1, 1_000_000).unwrap();
    let mut failures = Vec::new();
    let mut worst = 0;
    for (n, f, seed, trace) in runs {
        let initial = trace.diam_u(0);
        let eps = &initial * &threshold;
        let verdict = check_convergence(trace, &eps).map_err(|e| e.to_string())?;
        match verdict.t_epsilon {
            Some(t) if verdict.converged && t <= BUDGET => worst = worst.max(t),
            _ => failures.push(format!("({n},{f}) seed {seed}")),
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{} of {} runs below 1e-6 of the initial diameter, slowest after {worst} events",
            runs.len(),
            runs.len()
        ))
    } else {
        Err(format!("not converged: {}", failures.join(", ")))
    }
}

fn cautiousness(runs: &[(usize, usize, u64, Trace)]) -> Outcome {
    let mut count = 0;
    let mut decisions = 0;
    for (n, _, _, trace) in runs {
        let report = check_cautious(trace, default_fairness_window(*n)).map_err(|e| e.to_string())?;
        count += report.out_of_range.len();
        // Independent check: every destination lies in the range of correct
        // positions of the state it observed.
        let ranges = correct_ranges_oracle(trace);
        for step in trace.steps() {
            if step.kind != RobotKind::Correct || !matches!(step.action, ActionKind::Compute | ActionKind::FullCycle) {
                continue;
            }
            decisions += 1;
            let r = &ranges[step.observed.unwrap()];
            if !r.contains(step.destination().unwrap()) {
                count += 1;
            }
        }
    }
    if count == 0 {
        Ok(format!("{decisions} destinations checked, none outside range(U)"))
    } else {
        Err(format!("{count} range violations"))
    }
}

fn correct_ranges_oracle(trace: &Trace) -> Vec<Interval> {
    let mut ranges = Vec::with_capacity(trace.len() + 1);
    trace.replay(|_, state| {
        let u: PositionMultiset = state
            .robots()
            .iter()
            .filter(|r| r.kind == RobotKind::Correct)
            .map(|r| r.position.clone())
            .collect();
        ranges.push(u.range().unwrap());
    });
    ranges
}

fn shrinking() -> Outcome {
    let alpha = Scalar::new(39, 40).unwrap();
    let mut ratios = 0;
    let mut worst: Option<Scalar> = None;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut positions: Vec<Scalar> = (0..5)
            .map(|_| Scalar::new(100 * rng.gen_range(0..=1024), 1024).unwrap())
            .collect();
        let max = positions.iter().max().unwrap().clone();
        positions.push(&max + &Scalar::one());
        let config = ExperimentConfig {
            n: 6,
            f: 1,
            seed,
            positions: InitialPositions::Explicit(positions),
            model: Model::Atom,
            scheduler: SchedulerKind::Sync,
            adversary: AdversaryKind::Static,
            budget: 2_000,
            rel_epsilon: Scalar::new(1, 1_000_000).unwrap(),
            ..ExperimentConfig::default()
        };
        let trace = run(&config).map_err(|e| e.to_string())?.trace;
        let report = measure_shrinking(&trace).map_err(|e| e.to_string())?;
        // Recompute each ratio from the raw diameters at the boundaries.
        let boundaries = epoch_boundaries(&trace);
        for pair in boundaries.windows(2) {
            let (before, after) = (trace.diam_ud(pair[0]), trace.diam_ud(pair[1]));
            if before.is_zero() {
                break;
            }
            let ratio = &after / &before;
            if ratio > alpha {
                return Err(format!(
                    "seed {seed}: ratio {ratio} between states {} and {}",
                    pair[0], pair[1]
                ));
            }
            ratios += 1;
            if worst.as_ref().is_none_or(|w| ratio > *w) {
                worst = Some(ratio);
            }
        }
        if !report.bounded_by(&alpha) {
            return Err(format!(
                "seed {seed}: checker reports alpha {:?}",
                report.observed_alpha
            ));
        }
    }
    let worst = worst.ok_or("no epochs measured")?;
    Ok(format!("{ratios} epoch ratios over 20 runs, worst {worst} <= 39/40"))
}

fn half_bound(runs: &[(usize, usize, u64, Trace)]) -> Outcome {
    let mut checked = 0;
    let mut ran = 0;
    for (n, f, seed, trace) in runs.iter().filter(|(_, _, s, _)| *s < 20) {
        ran += 1;
        let violations = byzline::analysis::check_half_bound_epochs(trace);
        if let Some(v) = violations.first() {
            return Err(format!(
                "({n},{f}) seed {seed}: step {} robot {} chose {} outside {}",
                v.step, v.robot, v.destination, v.bound
            ));
        }
        checked += half_bound_oracle(trace).map_err(|m| format!("({n},{f}) seed {seed}: {m}"))?;
    }
    Ok(format!(
        "{ran} runs, {checked} destination/boundary pairs within the bound"
    ))
}

/// Every destination computed from a snapshot taken at or after an epoch
/// boundary `t0` lies between the midpoints of the robot's position and the
/// ends of `range(U ∪ D)` at `t0`.
fn half_bound_oracle(trace: &Trace) -> Result<usize, String> {
    let boundaries = epoch_boundaries(trace);
    let mut ud = Vec::new();
    let mut index = 0;
    trace.replay(|_, state| {
        if boundaries.binary_search(&index).is_ok() {
            let mut points = Vec::new();
            for r in state.robots().iter().filter(|r| r.is_correct()) {
                points.push(r.position.clone());
                points.push(r.destination().clone());
            }
            let lo = points.iter().min().unwrap().clone();
            let hi = points.iter().max().unwrap().clone();
            ud.push((index, lo, hi));
        }
        index += 1;
    });
    let mut checked = 0;
    for step in trace.steps() {
        if step.kind != RobotKind::Correct || !matches!(step.action, ActionKind::Compute | ActionKind::FullCycle) {
            continue;
        }
        let observed = step.observed.unwrap();
        let x = &step.position_before;
        let d = step.destination().unwrap();
        for (t0, lo, hi) in ud.iter().filter(|(t0, _, _)| *t0 <= observed) {
            let (blo, bhi) = (Scalar::midpoint(x, lo), Scalar::midpoint(x, hi));
            if *d < blo || *d > bhi {
                return Err(format!(
                    "step {} robot {} chose {d} outside [{blo}, {bhi}] (t0 = {t0})",
                    step.step, step.robot
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn impossibility() -> Outcome {
    let mut lines = Vec::new();
    for (n, f, victim, branch) in [
        (9, 2, "algo4", "G2B2"),
        (13, 3, "algo4", "G2B1"),
        (12, 3, "fulltrim", "G2B2"),
    ] {
        let algo = algorithm_by_name(victim).unwrap();
        let config = AttackConfig::new(n, f, Scalar::zero(), Scalar::one());
        let report = adversary_algorithm(&config, algo.as_ref()).map_err(|e| format!("({n},{f}): {e}"))?;
        let bound = Scalar::new(6, 10).unwrap();
        if report.min_separation < bound {
            return Err(format!(
                "({n},{f}) {victim}: separation fell to {}",
                report.min_separation
            ));
        }
        if !report.fairness.is_fair() {
            return Err(format!(
                "({n},{f}) {victim}: unfair, max gap {}",
                report.fairness.max_gap
            ));
        }
        let verdict = check_convergence(&report.trace, &Scalar::new(1, 2).unwrap()).map_err(|e| e.to_string())?;
        if verdict.converged {
            return Err(format!("({n},{f}) {victim}: converged at 1/2"));
        }
        if report.loops.len() != 6 || report.verdict != AttackVerdict::NonConvergenceDemonstrated {
            return Err(format!(
                "({n},{f}) {victim}: verdict {:?} after {} loops",
                report.verdict,
                report.loops.len()
            ));
        }
        if (n - f) % 2 == 0 && branch != "G2B1" {
            return Err("parity table is wrong".into());
        }
        lines.push(format!(
            "({n},{f}) {victim} {branch} separation {}",
            report.min_separation
        ));
    }
    Ok(lines.join("; "))
}

/// All non-decreasing sequences of length `n` over `0..=max`.
fn sorted_snapshots(n: usize, max: i64) -> Vec<Vec<i64>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in sorted_snapshots(n - 1, max) {
        let start = rest.last().copied().unwrap_or(0);
        for v in start..=max {
            let mut s = rest.clone();
            s.push(v);
            out.push(s);
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let f = 1;
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for n in [5usize, 6, 7] {
        for p in sorted_snapshots(n, 4) {
            let mut values = p.clone();
            values.dedup();
            for &me in &values {
                // 1-based indices holding the caller's value.
                let holders: Vec<usize> = (1..=n).filter(|&i| p[i - 1] == me).collect();
                // Every holder index gives the same range and centre; the
                // multiplicity of the caller's value may differ, and the
                // widest of them is the trimmed multiset.
                let mut bounds = (n, 1);
                let mut twice_center = None;
                for &i in &holders {
                    let min_index = if p[i - 1] < p[2 * f] { i } else { 2 * f + 1 };
                    let max_index = if p[i - 1] > p[n - 2 * f - 1] { i } else { n - 2 * f };
                    bounds = (bounds.0.min(min_index), bounds.1.max(max_index));
                    let here = p[min_index - 1] + p[max_index - 1];
                    if twice_center.is_some_and(|c| c != here) {
                        mismatches.push(format!("{p:?} self {me}: index {i} moves the centre"));
                    }
                    twice_center = Some(here);
                }
                let trimmed: Vec<i64> = p[bounds.0 - 1..bounds.1].to_vec();
                let twice_center = twice_center.unwrap();
                let elect = me <= p[f] || me >= p[n - f - 1];

                let snapshot: PositionMultiset = p.iter().map(|&v| Scalar::integer(v)).collect();
                let view = RobotView::new(snapshot, Scalar::integer(me), Params::new(n, f)).unwrap();
                let got_trim = trim_2f(&view).unwrap();
                let got_trim: Vec<Scalar> = got_trim.as_slice().to_vec();
                let want_trim: Vec<Scalar> = trimmed.iter().map(|&v| Scalar::integer(v)).collect();
                let got_center = center(&PositionMultiset::from_unsorted(want_trim.clone())).unwrap();
                let want_center = Scalar::new(twice_center, 2).unwrap();
                let got_elected = elected(&view).unwrap();
                cases += 1;
                if got_trim != want_trim || got_center != want_center || got_elected != elect {
                    mismatches.push(format!("n={n} {p:?} self {me}"));
                }
            }
        }
    }
    if mismatches.is_empty() {
        Ok(format!("{cases} snapshot/caller pairs, zero mismatches"))
    } else {
        Err(format!("{} mismatches, first {}", mismatches.len(), mismatches[0]))
    }
}

fn containment() -> Outcome {
    let mut compared = 0;
    for seed in 0..100u64 {
        let (n, f) = if seed % 2 == 0 { (6, 1) } else { (11, 2) };
        let config = ExperimentConfig {
            n,
            f,
            seed,
            model: Model::Atom,
            scheduler: SchedulerKind::Async,
            budget: 400,
            ..ExperimentConfig::default()
        };
        let atom = run(&config).map_err(|e| e.to_string())?.trace;
        let specs: Vec<RobotSpec> = atom
            .initial()
            .robots()
            .iter()
            .map(|r| RobotSpec {
                position: r.position.clone(),
                kind: r.kind,
                delta: r.delta.clone(),
            })
            .collect();
        let mut corda = SystemState::new(Model::Corda, f, specs).map_err(|e| e.to_string())?;
        let algo = TrimmedCenter;
        let mut states = Vec::new();
        atom.replay(|_, s| states.push(s.robots().iter().map(|r| r.position.clone()).collect::<Vec<_>>()));
        for (i, step) in atom.steps().iter().enumerate() {
            let events = match step.action {
                ActionKind::FullCycle => vec![
                    ScheduleEvent::look(step.robot),
                    ScheduleEvent::compute(step.robot),
                    ScheduleEvent::move_by(step.robot, step.requested.clone().unwrap()),
                ],
                ActionKind::Teleport => vec![ScheduleEvent::teleport(step.robot, step.requested.clone().unwrap())],
                other => return Err(format!("seed {seed}: unexpected {other:?} in an ATOM trace")),
            };
            for e in &events {
                corda.apply_event(e, &algo).map_err(|e| format!("seed {seed}: {e}"))?;
            }
            let now: Vec<Scalar> = corda.robots().iter().map(|r| r.position.clone()).collect();
            if now != states[i + 1] {
                return Err(format!("seed {seed}: states differ after step {}", step.step));
            }
            compared += 1;
        }
    }
    Ok(format!("100 traces, {compared} cycle states identical"))
}

fn determinism() -> Outcome {
    let configs = [
        async_config(6, 1, 7),
        ExperimentConfig {
            scheduler: SchedulerKind::KBounded,
            k: 3,
            seed: 11,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            scheduler: SchedulerKind::Sync,
            model: Model::Atom,
            n: 11,
            f: 2,
            seed: 3,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            n: 9,
            f: 2,
            adversary: AdversaryKind::Attack,
            model: Model::Atom,
            ..ExperimentConfig::default()
        },
    ];
    let mut bytes = 0;
    for config in &configs {
        let csv = |c: &ExperimentConfig| -> Result<Vec<u8>, String> {
            let mut buf = Vec::new();
            run(c)
                .map_err(|e| e.to_string())?
                .trace
                .write_csv(&mut buf)
                .map_err(|e| e.to_string())?;
            Ok(buf)
        };
        let (first, second) = (csv(config)?, csv(config)?);
        if first != second {
            return Err(format!("seed {} n={} produced different traces", config.seed, config.n));
        }
        bytes += first.len();
    }
    Ok(format!(
        "{} configurations, {bytes} bytes identical across reruns",
        configs.len()
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = campaign();
    let criteria: Vec<(&str, Check)> = vec![
        ("convergence", Box::new(|| convergence(&runs))),
        ("cautiousness", Box::new(|| cautiousness(&runs))),
        ("shrinking", Box::new(shrinking)),
        ("half-bound", Box::new(|| half_bound(&runs))),
        ("impossibility", Box::new(impossibility)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("model containment", Box::new(containment)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1?}",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
