//! Seeded multi-trial runs, per-trial monitors and CSV output.

use std::cell::Cell;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use ssle_core::engine::trial_stream;
use ssle_core::oracle::{ranks_are_permutation, SurrogateTracker};
use ssle_core::orchestrator::validate_agent;
use ssle_core::{
    classify, AgentView, Configuration, Events, HierarchyLevel, Monitor, Params, Role, Runner,
    StepRecord, Trace,
};

use crate::measure::measure_stabilization;
use crate::scenario::{build_scenario, ScenarioError, ScenarioKind};

/// First line of every CSV file.
pub const CSV_VERSION: &str = "# ssle-csv v1";

/// Names of the per-trial monitors, in CSV column order.
pub const MONITORS: [&str; 6] = [
    "population",
    "agent-valid",
    "rank-immutable",
    "role-cycle",
    "event-consistency",
    "closure",
];

/// When a trial ends before its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Once the leader has held for the confirmation window.
    #[default]
    Confirmed,
    /// At the first interaction that produces an error state.
    FirstTop,
    /// Never; always run to the horizon.
    Horizon,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: ScenarioKind,
    pub params: Params,
    pub trials: u64,
    pub seed: u64,
    pub horizon: u64,
    pub confirm_window: u64,
    pub stop: StopRule,
    /// Collect a line-delimited event trace.
    pub events: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub total_interactions: u64,
    /// Post-hoc measurement from the recorded trace.
    pub stabilization_at: Option<u64>,
    pub full_resets: u64,
    pub soft_resets: u64,
    pub first_top_at: Option<u64>,
    pub safe_at: Option<u64>,
    pub closure_violation_at: Option<u64>,
    pub final_level: HierarchyLevel,
    pub final_ranks_permutation: bool,
    /// The unique rank-1 agent recomputed from the final configuration
    /// agrees with the incrementally tracked leader.
    pub leader_is_rank1: bool,
    /// First violation of each of [`MONITORS`], by index.
    pub violations: Vec<Option<u64>>,
    /// The online stabilization point disagrees with the post-hoc one.
    pub route_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: u64,
    pub stabilized: u64,
    pub stabilized_fraction: f64,
    pub median_stabilization: Option<u64>,
    pub p95_stabilization: Option<u64>,
    pub full_resets: u64,
    pub soft_resets: u64,
    /// Trials violating each monitor.
    pub violation_counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
    /// JSON lines, one per event, when requested.
    pub events: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("trial {trial}: {source}")]
    Scenario { trial: u64, source: ScenarioError },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[u64], q: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[k - 1])
}

pub fn summarize(rows: &[TrialRow]) -> Summary {
    let mut times: Vec<u64> = rows.iter().filter_map(|r| r.stabilization_at).collect();
    times.sort_unstable();
    let trials = rows.len() as u64;
    Summary {
        trials,
        stabilized: times.len() as u64,
        stabilized_fraction: if trials == 0 {
            0.0
        } else {
            times.len() as f64 / trials as f64
        },
        median_stabilization: percentile(&times, 0.5),
        p95_stabilization: percentile(&times, 0.95),
        full_resets: rows.iter().map(|r| r.full_resets).sum(),
        soft_resets: rows.iter().map(|r| r.soft_resets).sum(),
        violation_counts: (0..MONITORS.len())
            .map(|k| rows.iter().filter(|r| r.violations[k].is_some()).count() as u64)
            .collect(),
    }
}

fn role_step_allowed(before: Role, after: Role) -> bool {
    // A verifier can only leave through a reset, which is never immediately
    // followed by ranking in the same interaction.
    !(before == Role::Verifying && after == Role::Ranking)
}

fn events_consistent(rec: &StepRecord) -> bool {
    (0..2).all(|s| {
        let (b, a, e): (AgentView, AgentView, Events) =
            (rec.before[s], rec.after[s], rec.events[s]);
        (!e.contains(Events::BECAME_VERIFIER)
            || (!b.is_verifier() && (a.is_verifier() || e.contains(Events::TRIGGER_RESET))))
            && (!e.contains(Events::TRIGGER_RESET) || a.role == Role::Resetting)
            && (!e.contains(Events::RANKED) || a.role != Role::Resetting)
            && (!e.contains(Events::COLLISION_CHECK)
                || b.is_verifier()
                || e.contains(Events::BECAME_VERIFIER))
    })
}

fn event_lines(trial: u64, rec: &StepRecord, out: &mut Vec<String>) {
    let idx = [rec.pair.0, rec.pair.1];
    for s in 0..2 {
        for name in rec.events[s].names() {
            out.push(
                serde_json::json!({
                    "trial": trial,
                    "interaction": rec.index,
                    "event": name,
                    "agent": idx[s],
                    "partner": idx[1 - s],
                })
                .to_string(),
            );
        }
    }
}

struct TrialOutput {
    row: TrialRow,
    events: Vec<String>,
}

fn run_trial(e: &Experiment, trial: u64) -> Result<TrialOutput, ExperimentError> {
    let p = &e.params;
    let seed = ssle_core::engine::trial_seed(e.seed, trial);
    let mut rng = trial_stream(e.seed, trial);
    let mut config = build_scenario(&e.scenario, p, &mut rng)
        .map_err(|source| ExperimentError::Scenario { trial, source })?;

    let mut trace = Trace::start(&config, p);
    let mut tracker = SurrogateTracker::new(&config, p);
    let first_top = Cell::new(None);
    let mut events = Vec::new();
    let n = p.n;
    let window = e.confirm_window;

    let mut runner = Runner::new(e.horizon)
        .confirm_window(window)
        .monitor(Monitor::new(MONITORS[0], move |c: &Configuration, _| {
            c.agents.len() == n && c.coins.len() == n
        }))
        .monitor(Monitor::new(
            MONITORS[1],
            move |c: &Configuration, r: &StepRecord| {
                validate_agent(p, &c.agents[r.pair.0]).is_ok()
                    && validate_agent(p, &c.agents[r.pair.1]).is_ok()
            },
        ))
        .monitor(Monitor::new(MONITORS[2], |_, r: &StepRecord| {
            (0..2).all(|s| {
                !(r.before[s].is_verifier() && r.after[s].is_verifier())
                    || r.before[s].rank == r.after[s].rank
            })
        }))
        .monitor(Monitor::new(MONITORS[3], |_, r: &StepRecord| {
            (0..2).all(|s| role_step_allowed(r.before[s].role, r.after[s].role))
        }))
        .monitor(Monitor::new(MONITORS[4], |_, r: &StepRecord| {
            events_consistent(r)
        }))
        .monitor(Monitor::new(MONITORS[5], |_, r: &StepRecord| {
            tracker.observe(r)
        }))
        .observe(|_, r: &StepRecord| {
            if first_top.get().is_none() && r.any(Events::TOP) {
                first_top.set(Some(r.index));
            }
            if e.events {
                event_lines(trial, r, &mut events);
            }
        })
        .record(&mut trace);
    runner = match e.stop {
        StopRule::Confirmed => runner.stop_when_confirmed(),
        StopRule::FirstTop => runner.stop(|_, _| first_top.get().is_some()),
        StopRule::Horizon => runner,
    };
    let res = runner.run(&mut config, p, &mut rng);

    let stabilization_at = measure_stabilization(&trace, window);
    let views: Vec<_> = config.agents.iter().map(AgentView::of).collect();
    let leader = config.leader_of();
    let mut violations = vec![None; MONITORS.len()];
    for (at, name) in &res.monitor_violations {
        let k = MONITORS
            .iter()
            .position(|m| m == name)
            .expect("known monitor");
        violations[k] = Some(*at);
    }
    Ok(TrialOutput {
        row: TrialRow {
            trial,
            seed,
            total_interactions: res.total_interactions,
            stabilization_at,
            full_resets: res.full_resets,
            soft_resets: res.soft_resets,
            first_top_at: first_top.get(),
            safe_at: tracker.safe_at(),
            closure_violation_at: tracker.violation(),
            final_level: classify(&config),
            final_ranks_permutation: ranks_are_permutation(&views),
            leader_is_rank1: leader.is_some()
                && leader == res.final_leader
                && leader.and_then(|i| config.agents[i].rank()) == Some(1),
            violations,
            route_mismatch: stabilization_at != res.stabilization_at,
        },
        events,
    })
}

/// Run every trial (concurrently) and assemble rows in trial order.
pub fn run_experiment(e: &Experiment) -> Result<ExperimentRecord, ExperimentError> {
    let outputs: Vec<TrialOutput> = (0..e.trials)
        .into_par_iter()
        .map(|t| run_trial(e, t))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(outputs.len());
    let mut events = Vec::new();
    for o in outputs {
        rows.push(o.row);
        events.extend(o.events);
    }
    Ok(ExperimentRecord {
        scenario: e.scenario.clone(),
        n: e.params.n,
        r: e.params.r,
        seed: e.seed,
        summary: summarize(&rows),
        rows,
        events,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = [
        "kind",
        "scenario",
        "n",
        "r",
        "trial",
        "seed",
        "total_interactions",
        "stabilization_at",
        "p95_stabilization",
        "stabilized_fraction",
        "full_resets",
        "soft_resets",
        "first_top_at",
        "safe_at",
        "closure_violation_at",
        "final_level",
        "final_ranks_permutation",
        "leader_is_rank1",
        "route_mismatch",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(MONITORS.iter().map(|m| format!("violation_{m}")));
    h
}

/// Write the version line and header; call once per file.
pub fn write_csv_header<W: Write>(mut out: W) -> Result<(), ExperimentError> {
    writeln!(out, "{CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    w.flush()?;
    Ok(())
}

/// Append one row per trial and a summary row; nothing for an empty
/// experiment. The summary row carries the trial count in `trial`, the
/// median in `stabilization_at`, totals in the reset columns and, in each
/// violation column, the number of trials that violated that monitor.
pub fn write_csv_rows<W: Write>(rec: &ExperimentRecord, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let scenario = rec.scenario.to_string();
    for row in &rec.rows {
        let mut f = vec![
            "trial".to_string(),
            scenario.clone(),
            rec.n.to_string(),
            rec.r.to_string(),
            row.trial.to_string(),
            row.seed.to_string(),
            row.total_interactions.to_string(),
            opt(row.stabilization_at),
            String::new(),
            String::new(),
            row.full_resets.to_string(),
            row.soft_resets.to_string(),
            opt(row.first_top_at),
            opt(row.safe_at),
            opt(row.closure_violation_at),
            format!("{:?}", row.final_level),
            row.final_ranks_permutation.to_string(),
            row.leader_is_rank1.to_string(),
            row.route_mismatch.to_string(),
        ];
        f.extend(row.violations.iter().map(|v| opt(*v)));
        w.write_record(&f)?;
    }
    if rec.rows.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let s = &rec.summary;
    let mut f = vec![
        "summary".to_string(),
        scenario,
        rec.n.to_string(),
        rec.r.to_string(),
        s.trials.to_string(),
        rec.seed.to_string(),
        rec.rows
            .iter()
            .map(|r| r.total_interactions)
            .sum::<u64>()
            .to_string(),
        opt(s.median_stabilization),
        opt(s.p95_stabilization),
        format!("{:.4}", s.stabilized_fraction),
        s.full_resets.to_string(),
        s.soft_resets.to_string(),
        rec.rows
            .iter()
            .filter(|r| r.first_top_at.is_some())
            .count()
            .to_string(),
        rec.rows
            .iter()
            .filter(|r| r.safe_at.is_some())
            .count()
            .to_string(),
        rec.rows
            .iter()
            .filter(|r| r.closure_violation_at.is_some())
            .count()
            .to_string(),
        String::new(),
        rec.rows
            .iter()
            .filter(|r| r.final_ranks_permutation)
            .count()
            .to_string(),
        rec.rows
            .iter()
            .filter(|r| r.leader_is_rank1)
            .count()
            .to_string(),
        rec.rows
            .iter()
            .filter(|r| r.route_mismatch)
            .count()
            .to_string(),
    ];
    f.extend(s.violation_counts.iter().map(|c| c.to_string()));
    w.write_record(&f)?;
    w.flush()?;
    Ok(())
}
