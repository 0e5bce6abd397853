//! Quick invariant suite behind the `check` subcommand.

use ssle_core::collision::GroupCtx;
use ssle_core::oracle::{explore_soundness, Exploration, GroupSpec};
use ssle_core::params::GroupSizes;
use ssle_core::Params;

use crate::experiment::{run_experiment, Experiment, StopRule, MONITORS};
use crate::measure::default_confirm_window;
use crate::scenario::ScenarioKind;

/// Population shapes the suite covers.
pub const CHECK_SHAPES: [(usize, usize); 4] = [(4, 2), (8, 2), (8, 4), (9, 4)];
pub const CHECK_TRIALS: u64 = 4;
pub const CHECK_HORIZON: u64 = 30_000;
pub const BFS_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn scenarios() -> Vec<ScenarioKind> {
    vec![
        ScenarioKind::CleanTriggered,
        ScenarioKind::FullyDormant,
        ScenarioKind::CorrectRankedVerifiers,
        ScenarioKind::DuplicateRanks(2),
        ScenarioKind::CorruptedMessages(1),
        ScenarioKind::MixedGenerations(2),
        ScenarioKind::UniformRandomStates,
    ]
}

/// Shrunk group for exhaustive exploration.
pub fn shrunk_group(ranks: Vec<usize>, group_len: usize) -> GroupSpec {
    GroupSpec {
        ctx: GroupCtx::new(
            1..group_len + 1,
            GroupSizes {
                sig_space: 2,
                ids_per_rank: 2,
                sig_refresh: 2,
            },
        ),
        ranks,
    }
}

/// Short monitored runs of every scenario plus the shrunk soundness search.
pub fn run_checks(seed: u64) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for (n, r) in CHECK_SHAPES {
        let params = Params::new(n, r).expect("check shapes are valid");
        for scenario in scenarios() {
            let name = format!("monitors n={n} r={r} {scenario}");
            let e = Experiment {
                scenario,
                params: params.clone(),
                trials: CHECK_TRIALS,
                seed,
                horizon: CHECK_HORIZON,
                confirm_window: default_confirm_window(&params),
                stop: StopRule::Horizon,
                events: false,
            };
            match run_experiment(&e) {
                Err(err) => out.push(CheckLine {
                    name,
                    pass: false,
                    detail: err.to_string(),
                }),
                Ok(rec) => {
                    let bad: Vec<String> = MONITORS
                        .iter()
                        .zip(&rec.summary.violation_counts)
                        .filter(|(_, &c)| c > 0)
                        .map(|(m, c)| format!("{m}:{c}"))
                        .collect();
                    out.push(CheckLine {
                        name,
                        pass: bad.is_empty(),
                        detail: if bad.is_empty() {
                            "no violations".into()
                        } else {
                            bad.join(" ")
                        },
                    });
                }
            }
        }
    }
    let sound = explore_soundness(&shrunk_group(vec![1, 2], 2), BFS_BUDGET);
    out.push(CheckLine {
        name: "soundness-bfs correct pair".into(),
        pass: !sound.top_reachable && sound.exploration == Exploration::Exhausted,
        detail: format!("{sound:?}"),
    });
    let planted = explore_soundness(&shrunk_group(vec![1, 1], 2), BFS_BUDGET);
    out.push(CheckLine {
        name: "soundness-bfs planted duplicate".into(),
        pass: planted.top_reachable,
        detail: format!("{planted:?}"),
    });
    out
}
