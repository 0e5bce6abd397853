//! Agent states and the top-level transition function.

use serde::{Deserialize, Serialize};

use crate::collision::{validate_dc, DcOutcome, DcState, GroupCtx};
use crate::params::Params;
use crate::randomness::{CoinState, Draw};
use crate::ranking::{assign_ranks_step, RankingState};
use crate::reset::{propagate_reset, trigger_reset, ResetState};
use crate::verify::{stable_verify_step, VerifyAction, VerifyState, GENERATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Resetting,
    Ranking,
    Verifying,
}

/// One agent. Only the active role's fields exist.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentState {
    Resetting(ResetState),
    Ranking {
        countdown: u32,
        ranking: RankingState,
    },
    Verifying {
        rank: usize,
        verify: VerifyState,
    },
}

impl AgentState {
    pub fn role(&self) -> Role {
        match self {
            AgentState::Resetting(_) => Role::Resetting,
            AgentState::Ranking { .. } => Role::Ranking,
            AgentState::Verifying { .. } => Role::Verifying,
        }
    }

    pub fn is_resetting(&self) -> bool {
        matches!(self, AgentState::Resetting(_))
    }

    pub fn is_ranking(&self) -> bool {
        matches!(self, AgentState::Ranking { .. })
    }

    pub fn is_verifying(&self) -> bool {
        matches!(self, AgentState::Verifying { .. })
    }

    /// Rank of a verifier.
    pub fn rank(&self) -> Option<usize> {
        match self {
            AgentState::Verifying { rank, .. } => Some(*rank),
            _ => None,
        }
    }

    pub fn verify(&self) -> Option<&VerifyState> {
        match self {
            AgentState::Verifying { verify, .. } => Some(verify),
            _ => None,
        }
    }

    /// A verifier entering with `rank`.
    pub fn verifier(params: &Params, rank: usize) -> Self {
        AgentState::Verifying {
            rank,
            verify: VerifyState::entry(params, rank),
        }
    }
}

/// Type check of a single agent, including the owner-copy restriction.
pub fn validate_agent(params: &Params, a: &AgentState) -> Result<(), String> {
    match a {
        AgentState::Resetting(s) => {
            if !s.is_valid(params) {
                return Err(format!("reset fields out of range: {s:?}"));
            }
        }
        AgentState::Ranking { countdown, ranking } => {
            if *countdown > params.c_max {
                return Err(format!("countdown {countdown} exceeds cMax"));
            }
            if !ranking.is_valid(params) {
                return Err(format!("ranking fields out of range: {:?}", ranking.phase));
            }
        }
        AgentState::Verifying { rank, verify } => {
            if !(1..=params.n).contains(rank) {
                return Err(format!("rank {rank} outside [n]"));
            }
            if verify.generation >= GENERATIONS {
                return Err(format!("generation {} outside Z6", verify.generation));
            }
            if verify.probation > params.p_max {
                return Err(format!("probation {} exceeds pMax", verify.probation));
            }
            if let DcState::Live(l) = &verify.dc {
                validate_dc(&GroupCtx::of(params, *rank), *rank, l)
                    .map_err(|e| format!("agent of rank {rank}: {e}"))?;
            }
        }
    }
    Ok(())
}

/// Per-agent event bits of one interaction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Events(pub u16);

impl Events {
    pub const TRIGGER_RESET: Events = Events(1);
    pub const SOFT_RESET: Events = Events(1 << 1);
    pub const ADOPT: Events = Events(1 << 2);
    pub const TOP: Events = Events(1 << 3);
    pub const BECAME_VERIFIER: Events = Events(1 << 4);
    pub const AWOKE: Events = Events(1 << 5);
    pub const INFECTED: Events = Events(1 << 6);
    pub const COLLISION_CHECK: Events = Events(1 << 7);
    pub const RANKED: Events = Events(1 << 8);

    pub const ALL: [(Events, &'static str); 9] = [
        (Events::TRIGGER_RESET, "trigger-reset"),
        (Events::SOFT_RESET, "soft-reset"),
        (Events::ADOPT, "adopt-generation"),
        (Events::TOP, "collision"),
        (Events::BECAME_VERIFIER, "became-verifier"),
        (Events::AWOKE, "awoke"),
        (Events::INFECTED, "infected"),
        (Events::COLLISION_CHECK, "collision-check"),
        (Events::RANKED, "ranked"),
    ];

    pub fn contains(self, other: Events) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Events) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn names(self) -> impl Iterator<Item = &'static str> {
        Events::ALL
            .into_iter()
            .filter(move |(e, _)| self.contains(*e))
            .map(|(_, name)| name)
    }
}

/// The population: `n` agents, their synthetic coins and the interaction count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub agents: Vec<AgentState>,
    pub coins: Vec<CoinState>,
    pub interaction_count: u64,
}

impl Configuration {
    /// Wrap `agents` with all-zero coins sized for `params`.
    pub fn new(agents: Vec<AgentState>, params: &Params) -> Self {
        let coin = CoinState::new(params.max_draw_range());
        Self {
            coins: vec![coin; agents.len()],
            agents,
            interaction_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Index of the unique verifier with rank 1, if exactly one exists.
    pub fn leader_of(&self) -> Option<usize> {
        let mut found = None;
        for (i, a) in self.agents.iter().enumerate() {
            if a.rank() == Some(1) {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// Type-check every agent.
    pub fn validate(&self, params: &Params) -> Result<(), String> {
        if self.agents.len() != params.n {
            return Err(format!(
                "configuration has {} agents, expected {}",
                self.agents.len(),
                params.n
            ));
        }
        if self.coins.len() != params.n {
            return Err("coin vector length differs from n".into());
        }
        for (i, a) in self.agents.iter().enumerate() {
            validate_agent(params, a).map_err(|e| format!("agent {i}: {e}"))?;
        }
        Ok(())
    }
}

/// The top-level transition on the ordered pair `(u, v)`.
pub fn elect_leader_step(
    params: &Params,
    u: &mut AgentState,
    v: &mut AgentState,
    draw: &mut dyn Draw,
) -> [Events; 2] {
    let mut ev = [Events::default(); 2];
    if u.is_resetting() {
        let r = propagate_reset(params, u, v);
        for i in 0..2 {
            if r.infected[i] {
                ev[i].insert(Events::INFECTED);
            }
            if r.awoke[i] {
                ev[i].insert(Events::AWOKE);
            }
        }
    }
    if let (
        AgentState::Ranking {
            countdown: cu,
            ranking: ru,
        },
        AgentState::Ranking {
            countdown: cv,
            ranking: rv,
        },
    ) = (&mut *u, &mut *v)
    {
        let r = assign_ranks_step(params, ru, rv, draw);
        *cu = cu.saturating_sub(1);
        *cv = cv.saturating_sub(1);
        for i in 0..2 {
            if r.became_ranked[i] {
                ev[i].insert(Events::RANKED);
            }
        }
    }
    for i in 0..2 {
        let (a, b) = if i == 0 {
            (&mut *u, &*v)
        } else {
            (&mut *v, &*u)
        };
        let partner_verifying = b.is_verifying();
        if let AgentState::Ranking { countdown, ranking } = a {
            if *countdown == 0 || partner_verifying {
                *a = AgentState::verifier(params, ranking.rank);
                ev[i].insert(Events::BECAME_VERIFIER);
            }
        }
    }
    if let (
        AgentState::Verifying {
            rank: rank_u,
            verify: vu,
        },
        AgentState::Verifying {
            rank: rank_v,
            verify: vv,
        },
    ) = (&mut *u, &mut *v)
    {
        let out = stable_verify_step(params, *rank_u, vu, *rank_v, vv, draw);
        if matches!(out.dc, Some(DcOutcome::Ran | DcOutcome::Collision)) {
            for e in ev.iter_mut() {
                e.insert(Events::COLLISION_CHECK);
            }
        }
        let mut trigger = [false; 2];
        for i in 0..2 {
            match out.actions[i] {
                VerifyAction::None => {}
                VerifyAction::SoftReset => {
                    ev[i].insert(Events::TOP);
                    ev[i].insert(Events::SOFT_RESET);
                }
                VerifyAction::Adopt => ev[i].insert(Events::ADOPT),
                VerifyAction::TriggerReset => {
                    if out.dc.is_some() {
                        ev[i].insert(Events::TOP);
                    }
                    ev[i].insert(Events::TRIGGER_RESET);
                    trigger[i] = true;
                }
            }
        }
        if trigger[0] {
            trigger_reset(params, u);
        }
        if trigger[1] {
            trigger_reset(params, v);
        }
    }
    ev
}
