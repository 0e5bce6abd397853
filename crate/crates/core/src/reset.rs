//! Full-reset broadcast.
//!
//! A triggered agent carries `resetCount = rMax` and infects every computing
//! agent it meets. Meeting resetters share `max(count - 1)`. Once the count
//! drains to zero the agent is dormant and waits `dMax` of its own
//! interactions, or until it meets a computing agent, before re-entering the
//! protocol through [`reset`].

use serde::{Deserialize, Serialize};

use crate::orchestrator::{AgentState, Configuration};
use crate::params::Params;
use crate::ranking::RankingState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResetState {
    pub reset_count: u32,
    pub delay_timer: u32,
}

impl ResetState {
    pub fn is_valid(&self, params: &Params) -> bool {
        self.reset_count <= params.r_max
            && self.delay_timer <= params.d_max
            && (self.reset_count == 0 || self.delay_timer == params.d_max)
    }
}

/// Make `a` a triggered resetter, discarding its role fields.
pub fn trigger_reset(params: &Params, a: &mut AgentState) {
    *a = AgentState::Resetting(ResetState {
        reset_count: params.r_max,
        delay_timer: params.d_max,
    });
}

/// Re-enter the protocol as a ranker in its initial state.
pub fn reset(params: &Params, a: &mut AgentState) {
    *a = AgentState::Ranking {
        countdown: params.c_max,
        ranking: RankingState::initial(params),
    };
}

/// What the broadcast did to each side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ResetEvents {
    pub infected: [bool; 2],
    pub awoke: [bool; 2],
}

/// One broadcast interaction; `u` must be resetting.
pub fn propagate_reset(params: &Params, u: &mut AgentState, v: &mut AgentState) -> ResetEvents {
    let mut ev = ResetEvents::default();
    let AgentState::Resetting(us) = u else {
        return ev;
    };
    if us.reset_count > 0 && !v.is_resetting() {
        *v = AgentState::Resetting(ResetState {
            reset_count: 0,
            delay_timer: params.d_max,
        });
        ev.infected[1] = true;
    }
    let mut just_zero = [false; 2];
    if let AgentState::Resetting(vs) = v {
        let before = [us.reset_count, vs.reset_count];
        let m = before[0].max(before[1]).saturating_sub(1);
        us.reset_count = m;
        vs.reset_count = m;
        for (i, &b) in before.iter().enumerate() {
            just_zero[i] = b > 0 && m == 0;
        }
        if m > 0 {
            us.delay_timer = params.d_max;
            vs.delay_timer = params.d_max;
        }
    }
    for i in 0..2 {
        let (a, b) = if i == 0 {
            (&mut *u, &*v)
        } else {
            (&mut *v, &*u)
        };
        let partner_resetting = b.is_resetting();
        let AgentState::Resetting(s) = a else {
            continue;
        };
        if s.reset_count != 0 {
            continue;
        }
        if just_zero[i] {
            s.delay_timer = params.d_max;
        } else {
            s.delay_timer = s.delay_timer.saturating_sub(1);
        }
        if s.delay_timer == 0 || !partner_resetting {
            reset(params, a);
            ev.awoke[i] = true;
        }
    }
    ev
}

/// Resetting with a drained count.
pub fn is_dormant(a: &AgentState) -> bool {
    matches!(a, AgentState::Resetting(s) if s.reset_count == 0)
}

pub fn is_fully_dormant(c: &Configuration) -> bool {
    c.agents.iter().all(is_dormant)
}

/// Some agent still carries a positive reset count.
pub fn is_triggered(c: &Configuration) -> bool {
    c.agents
        .iter()
        .any(|a| matches!(a, AgentState::Resetting(s) if s.reset_count > 0))
}
