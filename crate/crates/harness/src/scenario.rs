//! Initial configurations, clean and adversarial.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use ssle_core::bootstrap::BootState;
use ssle_core::collision::{init_dc, DcLive, DcState, GroupCtx};
use ssle_core::ranking::{Phase, RankingState};
use ssle_core::reset::{trigger_reset, ResetState};
use ssle_core::verify::{VerifyState, GENERATIONS};
use ssle_core::{AgentState, Configuration, Params, Stream};

/// Probability that a uniformly random verifier starts in the error state.
pub const RANDOM_TOP_PROBABILITY: f64 = 0.05;

/// Spread used by `mixed-generations` when none is given.
pub const DEFAULT_GENERATION_SPREAD: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioKind {
    /// One triggered agent, everyone else a fresh ranker.
    CleanTriggered,
    /// Every agent dormant with a full delay timer.
    FullyDormant,
    /// A correct ranking of freshly entered verifiers.
    CorrectRankedVerifiers,
    /// `k` verifiers share one rank; the rest are distinct.
    DuplicateRanks(usize),
    /// A correct ranking off probation with `k` circulating copies altered.
    CorruptedMessages(usize),
    /// A correct ranking off probation with generations in `0..=spread`.
    MixedGenerations(u8),
    /// Every field drawn uniformly from its declared range.
    UniformRandomStates,
    /// Agent states read from a JSON file.
    Custom(PathBuf),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario `{name}` needs an argument: {hint}")]
    MissingArgument {
        name: &'static str,
        hint: &'static str,
    },
    #[error("bad scenario argument `{0}`")]
    BadArgument(String),
    #[error("scenario cannot be built for n={n}, r={r}: {reason}")]
    Unsatisfiable { n: usize, r: usize, reason: String },
    #[error("reading custom scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing custom scenario {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("scenario produced an invalid configuration: {0}")]
    Invalid(String),
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::CleanTriggered => write!(f, "clean-triggered"),
            ScenarioKind::FullyDormant => write!(f, "fully-dormant"),
            ScenarioKind::CorrectRankedVerifiers => write!(f, "correct-ranked"),
            ScenarioKind::DuplicateRanks(k) => write!(f, "duplicate-ranks:{k}"),
            ScenarioKind::CorruptedMessages(k) => write!(f, "corrupted-messages:{k}"),
            ScenarioKind::MixedGenerations(s) => write!(f, "mixed-generations:{s}"),
            ScenarioKind::UniformRandomStates => write!(f, "uniform-random"),
            ScenarioKind::Custom(p) => write!(f, "custom:{}", p.display()),
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let count = |name: &'static str, hint: &'static str| -> Result<usize, ScenarioError> {
            let a = arg.ok_or(ScenarioError::MissingArgument { name, hint })?;
            a.parse()
                .map_err(|_| ScenarioError::BadArgument(a.to_string()))
        };
        Ok(match name {
            "clean-triggered" => ScenarioKind::CleanTriggered,
            "fully-dormant" => ScenarioKind::FullyDormant,
            "correct-ranked" => ScenarioKind::CorrectRankedVerifiers,
            "duplicate-ranks" => ScenarioKind::DuplicateRanks(count(
                "duplicate-ranks",
                "copies, e.g. duplicate-ranks:2",
            )?),
            "corrupted-messages" => ScenarioKind::CorruptedMessages(count(
                "corrupted-messages",
                "cells, e.g. corrupted-messages:3",
            )?),
            "mixed-generations" => match arg {
                None => ScenarioKind::MixedGenerations(DEFAULT_GENERATION_SPREAD),
                Some(a) => ScenarioKind::MixedGenerations(
                    a.parse()
                        .map_err(|_| ScenarioError::BadArgument(a.to_string()))?,
                ),
            },
            "uniform-random" => ScenarioKind::UniformRandomStates,
            "custom" => ScenarioKind::Custom(PathBuf::from(arg.ok_or(
                ScenarioError::MissingArgument {
                    name: "custom",
                    hint: "a JSON file, e.g. custom:start.json",
                },
            )?)),
            other => return Err(ScenarioError::Unknown(other.to_string())),
        })
    }
}

fn unsatisfiable(p: &Params, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Unsatisfiable {
        n: p.n,
        r: p.r,
        reason: reason.into(),
    }
}

fn fresh_ranker(p: &Params) -> AgentState {
    AgentState::Ranking {
        countdown: p.c_max,
        ranking: RankingState::initial(p),
    }
}

fn permutation(p: &Params, rng: &mut Stream) -> Vec<usize> {
    let mut ranks: Vec<usize> = (1..=p.n).collect();
    ranks.shuffle(rng);
    ranks
}

fn off_probation(p: &Params, rank: usize, generation: u8) -> AgentState {
    AgentState::Verifying {
        rank,
        verify: VerifyState {
            generation,
            probation: 0,
            dc: init_dc(p, rank),
        },
    }
}

/// Build the initial configuration and type-check it.
pub fn build_scenario(
    kind: &ScenarioKind,
    p: &Params,
    rng: &mut Stream,
) -> Result<Configuration, ScenarioError> {
    let agents = match kind {
        ScenarioKind::CleanTriggered => {
            let mut a = vec![fresh_ranker(p); p.n];
            trigger_reset(p, &mut a[0]);
            a
        }
        ScenarioKind::FullyDormant => vec![
            AgentState::Resetting(ResetState {
                reset_count: 0,
                delay_timer: p.d_max,
            });
            p.n
        ],
        ScenarioKind::CorrectRankedVerifiers => permutation(p, rng)
            .into_iter()
            .map(|r| AgentState::verifier(p, r))
            .collect(),
        ScenarioKind::DuplicateRanks(k) => {
            let k = *k;
            if k < 2 || k > p.n {
                return Err(unsatisfiable(p, format!("need 2 <= k <= n, got k={k}")));
            }
            let distinct = p.n - k + 1;
            let dup = rng.gen_range(1..=distinct);
            let mut ranks: Vec<usize> = (1..=distinct).collect();
            ranks.extend(std::iter::repeat_n(dup, k - 1));
            ranks.shuffle(rng);
            ranks
                .into_iter()
                .map(|r| AgentState::verifier(p, r))
                .collect()
        }
        ScenarioKind::CorruptedMessages(k) => {
            let mut agents: Vec<AgentState> = permutation(p, rng)
                .into_iter()
                .map(|r| off_probation(p, r, 0))
                .collect();
            corrupt(p, &mut agents, *k, rng)?;
            agents
        }
        ScenarioKind::MixedGenerations(spread) => {
            if *spread >= GENERATIONS {
                return Err(unsatisfiable(p, format!("spread {spread} exceeds Z6")));
            }
            permutation(p, rng)
                .into_iter()
                .map(|r| off_probation(p, r, rng.gen_range(0..=*spread)))
                .collect()
        }
        ScenarioKind::UniformRandomStates => (0..p.n).map(|_| random_agent(p, rng)).collect(),
        ScenarioKind::Custom(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| ScenarioError::Json {
                path: path.clone(),
                source,
            })?
        }
    };
    let config = Configuration::new(agents, p);
    config.validate(p).map_err(ScenarioError::Invalid)?;
    Ok(config)
}

/// Alter `k` distinct circulating copies held by non-owners to a different content.
fn corrupt(
    p: &Params,
    agents: &mut [AgentState],
    k: usize,
    rng: &mut Stream,
) -> Result<(), ScenarioError> {
    let mut cells = Vec::new();
    for (a, agent) in agents.iter().enumerate() {
        let AgentState::Verifying { rank, verify } = agent else {
            continue;
        };
        let ctx = GroupCtx::of(p, *rank);
        if ctx.sizes.sig_space < 2 {
            continue;
        }
        let own = ctx.pos(*rank);
        if let Some(live) = verify.dc.live() {
            for (cell, _) in live.held_cells() {
                if cell / ctx.ids() != own {
                    cells.push((a, cell));
                }
            }
        }
    }
    if cells.len() < k {
        return Err(unsatisfiable(
            p,
            format!(
                "only {} non-owner copies to corrupt, asked for {k}",
                cells.len()
            ),
        ));
    }
    for &(a, cell) in cells.choose_multiple(rng, k) {
        if let AgentState::Verifying { rank, verify } = &mut agents[a] {
            let sig = GroupCtx::of(p, *rank).sizes.sig_space;
            if let DcState::Live(l) = &mut verify.dc {
                let old = l.msgs[cell];
                let mut new = rng.gen_range(1..sig);
                if new >= old {
                    new += 1;
                }
                l.msgs[cell] = new;
            }
        }
    }
    Ok(())
}

fn random_label(p: &Params, rng: &mut Stream) -> Option<(u32, u32)> {
    rng.gen_bool(0.5).then(|| {
        (
            rng.gen_range(1..=p.r as u32),
            rng.gen_range(1..=p.label_pool),
        )
    })
}

fn random_agent(p: &Params, rng: &mut Stream) -> AgentState {
    match rng.gen_range(0..3) {
        0 => {
            let reset_count = rng.gen_range(0..=p.r_max);
            let delay_timer = if reset_count > 0 {
                p.d_max
            } else {
                rng.gen_range(0..=p.d_max)
            };
            AgentState::Resetting(ResetState {
                reset_count,
                delay_timer,
            })
        }
        1 => AgentState::Ranking {
            countdown: rng.gen_range(0..=p.c_max),
            ranking: random_ranking(p, rng),
        },
        _ => {
            let rank = rng.gen_range(1..=p.n);
            let dc = if rng.gen_bool(RANDOM_TOP_PROBABILITY) {
                DcState::Top
            } else {
                DcState::Live(random_dc(p, rank, rng))
            };
            AgentState::Verifying {
                rank,
                verify: VerifyState {
                    generation: rng.gen_range(0..GENERATIONS),
                    probation: rng.gen_range(0..=p.p_max),
                    dc,
                },
            }
        }
    }
}

fn random_ranking(p: &Params, rng: &mut Stream) -> RankingState {
    let r = p.r as u32;
    let mut channel: Vec<u32> = (0..p.r).map(|_| rng.gen_range(0..=p.label_pool)).collect();
    let phase = match rng.gen_range(0..6) {
        0 => Phase::InElection(rng.gen_bool(0.5).then(|| {
            let identifier = rng.gen_range(1..=p.id_space);
            let le_count = rng.gen_range(0..=p.le_count);
            let leader_done = le_count == 0 && rng.gen_bool(0.5);
            BootState {
                identifier,
                min_identifier: rng.gen_range(1..=identifier),
                le_count,
                leader_done,
                leader_bit: leader_done && rng.gen_bool(0.5),
            }
        })),
        1 => {
            let low = rng.gen_range(1..=r);
            Phase::Sheriff {
                low,
                high: rng.gen_range(low..=r),
            }
        }
        2 => {
            let id = rng.gen_range(1..=r);
            let slot = &mut channel[id as usize - 1];
            *slot = (*slot).max(1);
            Phase::Deputy {
                id,
                counter: rng.gen_range(1..=p.label_pool),
            }
        }
        3 => Phase::Recipient {
            label: random_label(p, rng),
        },
        4 => Phase::Sleeper {
            timer: rng.gen_range(1..=p.sleep_max),
            label: random_label(p, rng),
        },
        _ => Phase::Ranked,
    };
    RankingState {
        phase,
        channel,
        rank: rng.gen_range(1..=p.n),
    }
}

/// Uniform live state for an agent of `rank`: every cell empty or a uniform
/// content, then the agent's own copies forced onto its observations.
fn random_dc(p: &Params, rank: usize, rng: &mut Stream) -> DcLive {
    let ctx = GroupCtx::of(p, rank);
    let sig = ctx.sizes.sig_space;
    let mut live = DcLive {
        signature: rng.gen_range(1..=sig),
        counter: rng.gen_range(1..=ctx.sizes.sig_refresh),
        msgs: (0..ctx.cells()).map(|_| rng.gen_range(0..=sig)).collect(),
        observations: (0..ctx.ids()).map(|_| rng.gen_range(1..=sig)).collect(),
    };
    let base = ctx.pos(rank) * ctx.ids();
    for j in 0..ctx.ids() {
        if live.msgs[base + j] != 0 {
            live.msgs[base + j] = live.observations[j];
        }
    }
    live
}
