//! Post-hoc stabilization measurement from recorded traces.

use ssle_core::engine::trial_stream;
use ssle_core::oracle::leader_series;
use ssle_core::ranking::Phase;
use ssle_core::{AgentState, Configuration, Events, Params, Runner, Trace};

use crate::scenario::{build_scenario, ScenarioKind};

/// Default confirmation window: `20 * (n^2 / r) * ln n` interactions.
pub fn default_confirm_window(p: &Params) -> u64 {
    (20.0 * scale(p)).ceil() as u64
}

/// `(n^2 / r) * ln n`, the unit all bounds are expressed in.
pub fn scale(p: &Params) -> f64 {
    (p.n * p.n) as f64 / p.r as f64 * p.ln_n()
}

/// Earliest `t` from which the leader is constant and present and no full
/// reset fires through the end of the trace, provided the trace runs at least
/// `window` interactions past `t`.
pub fn measure_stabilization(trace: &Trace, window: u64) -> Option<u64> {
    let leaders = leader_series(trace);
    let end = trace.len();
    let last = (*leaders.last()?)?;
    // Walk back while the suffix stays clean.
    let mut t = end;
    while t > 0 {
        let step = &trace.steps[t as usize - 1];
        let reset = step
            .events
            .iter()
            .any(|e| e.contains(Events::TRIGGER_RESET));
        if reset || leaders[t as usize - 1] != Some(last) {
            break;
        }
        t -= 1;
    }
    (end - t >= window).then_some(t)
}

/// Rank held by an agent that has finished ranking.
fn settled_rank(a: &AgentState) -> Option<usize> {
    match a {
        AgentState::Ranking { ranking, .. } if ranking.phase == Phase::Ranked => Some(ranking.rank),
        AgentState::Verifying { rank, .. } => Some(*rank),
        _ => None,
    }
}

/// Outcome of a ranking run from a fully dormant start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankingOutcome {
    /// First interaction at which every agent is ranked or verifying.
    pub completed_at: Option<u64>,
    /// The settled ranks at that point form a permutation of `[n]`.
    pub permutation: bool,
}

/// Run trial `trial` from a fully dormant configuration until every agent
/// has settled on a rank.
pub fn ranking_completion(p: &Params, seed: u64, trial: u64, horizon: u64) -> RankingOutcome {
    let mut rng = trial_stream(seed, trial);
    let mut config =
        build_scenario(&ScenarioKind::FullyDormant, p, &mut rng).expect("dormant start is valid");
    let settled =
        |c: &Configuration| -> Option<Vec<usize>> { c.agents.iter().map(settled_rank).collect() };
    let res = Runner::new(horizon)
        .stop(|c, _| c.agents.iter().all(|a| settled_rank(a).is_some()))
        .run(&mut config, p, &mut rng);
    match settled(&config) {
        Some(mut ranks) => {
            ranks.sort_unstable();
            RankingOutcome {
                completed_at: Some(res.total_interactions),
                permutation: ranks.iter().copied().eq(1..=p.n),
            }
        }
        None => RankingOutcome {
            completed_at: None,
            permutation: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssle_core::orchestrator::Role;
    use ssle_core::trace::{AgentView, TraceStep};

    fn view(rank: u32) -> AgentView {
        AgentView {
            role: if rank == 0 {
                Role::Ranking
            } else {
                Role::Verifying
            },
            rank,
            generation: 0,
            probation: 0,
            top: false,
        }
    }

    /// Two agents; agent 0 gains rank 1 at `at` and keeps it.
    fn trace(len: u64, at: u64) -> Trace {
        let mut t = Trace {
            initial: vec![view(0), view(2)],
            initial_clean: vec![false, true],
            steps: Vec::new(),
        };
        for i in 1..=len {
            let r = if i >= at { 1 } else { 0 };
            t.steps.push(TraceStep {
                pair: (0, 1),
                after: [view(r), view(2)],
                events: [Events::default(); 2],
            });
        }
        t
    }

    #[test]
    fn stable_suffix() {
        assert_eq!(measure_stabilization(&trace(100, 30), 50), Some(30));
        assert_eq!(measure_stabilization(&trace(100, 30), 70), Some(30));
        assert_eq!(measure_stabilization(&trace(100, 30), 71), None);
    }

    #[test]
    fn no_leader_at_end() {
        assert_eq!(measure_stabilization(&trace(10, 50), 1), None);
    }

    #[test]
    fn reset_breaks_suffix() {
        let mut t = trace(100, 10);
        t.steps[59].events[1] = Events::TRIGGER_RESET;
        assert_eq!(measure_stabilization(&t, 10), Some(60));
    }

    #[test]
    fn shorter_than_window() {
        assert_eq!(measure_stabilization(&trace(5, 0), 10), None);
    }
}
