//! Compact per-step run records.
//!
//! A trace stores a small view of every agent at the start and, for each
//! interaction, the views of the two participants afterwards plus their
//! event bits. That is enough to replay the leader, the hierarchy level and
//! the safe-set surrogate at every step without storing message tables.

use serde::{Deserialize, Serialize};

use crate::collision::init_dc;
use crate::orchestrator::{AgentState, Configuration, Events, Role};
use crate::params::Params;

/// The fields of an agent the oracles look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentView {
    pub role: Role,
    /// Verifier rank; 0 for other roles.
    pub rank: u32,
    pub generation: u8,
    pub probation: u32,
    pub top: bool,
}

impl AgentView {
    pub fn of(a: &AgentState) -> Self {
        match a {
            AgentState::Verifying { rank, verify } => Self {
                role: Role::Verifying,
                rank: *rank as u32,
                generation: verify.generation,
                probation: verify.probation,
                top: verify.dc.is_top(),
            },
            other => Self {
                role: other.role(),
                rank: 0,
                generation: 0,
                probation: 0,
                top: false,
            },
        }
    }

    pub fn is_verifier(&self) -> bool {
        self.role == Role::Verifying
    }
}

/// One interaction as seen by monitors and traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based interaction number.
    pub index: u64,
    pub pair: (usize, usize),
    pub before: [AgentView; 2],
    pub after: [AgentView; 2],
    pub events: [Events; 2],
}

impl StepRecord {
    pub fn any(&self, e: Events) -> bool {
        self.events.iter().any(|x| x.contains(e))
    }

    pub fn count(&self, e: Events) -> u64 {
        self.events.iter().filter(|x| x.contains(e)).count() as u64
    }
}

/// Trace step without the `before` views, which replay reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pair: (u32, u32),
    pub after: [AgentView; 2],
    pub events: [Events; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: Vec<AgentView>,
    /// Whether each agent starts as a verifier with collision detection at `q0`.
    pub initial_clean: Vec<bool>,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn start(config: &Configuration, params: &Params) -> Self {
        Self {
            initial: config.agents.iter().map(AgentView::of).collect(),
            initial_clean: config
                .agents
                .iter()
                .map(|a| match a {
                    AgentState::Verifying { rank, verify } => verify.dc == init_dc(params, *rank),
                    _ => false,
                })
                .collect(),
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: &StepRecord) {
        self.steps.push(TraceStep {
            pair: (rec.pair.0 as u32, rec.pair.1 as u32),
            after: rec.after,
            events: rec.events,
        });
    }

    pub fn len(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Replay cursor positioned before the first interaction.
    pub fn replay(&self) -> Replay<'_> {
        Replay {
            trace: self,
            views: self.initial.clone(),
            clean: self.initial_clean.clone(),
            next: 0,
        }
    }
}

/// Clean flags of the two participants after an interaction.
///
/// Entering verification, a soft reset and a generation adoption set `q0`;
/// a collision-detection interaction leaves both clean only if both were.
pub fn next_clean(before: [bool; 2], events: [Events; 2], after: [AgentView; 2]) -> [bool; 2] {
    let mut clean = before;
    for s in 0..2 {
        if events[s].contains(Events::BECAME_VERIFIER) {
            clean[s] = true;
        }
    }
    if events[0].contains(Events::COLLISION_CHECK) {
        let both = clean[0] && clean[1];
        clean = [both, both];
    }
    for s in 0..2 {
        if events[s].contains(Events::SOFT_RESET) || events[s].contains(Events::ADOPT) {
            clean[s] = true;
        }
        if !after[s].is_verifier() {
            clean[s] = false;
        }
    }
    clean
}

/// Walks a trace forward, maintaining every agent's view and clean flag.
///
/// An agent is clean while its collision-detection state provably descends
/// from `q0` within the trace: it was set to `q0` (entering verification, a
/// soft reset or a generation adoption) and has since only interacted with
/// clean agents.
pub struct Replay<'a> {
    trace: &'a Trace,
    views: Vec<AgentView>,
    clean: Vec<bool>,
    next: usize,
}

impl Replay<'_> {
    pub fn views(&self) -> &[AgentView] {
        &self.views
    }

    pub fn clean(&self) -> &[bool] {
        &self.clean
    }

    /// Number of interactions applied so far.
    pub fn position(&self) -> u64 {
        self.next as u64
    }

    /// Apply the next interaction; returns it, or `None` at the end.
    pub fn advance(&mut self) -> Option<&TraceStep> {
        let step = self.trace.steps.get(self.next)?;
        self.next += 1;
        let idx = [step.pair.0 as usize, step.pair.1 as usize];
        let clean = next_clean(
            [self.clean[idx[0]], self.clean[idx[1]]],
            step.events,
            step.after,
        );
        for s in 0..2 {
            self.views[idx[s]] = step.after[s];
            self.clean[idx[s]] = clean[s];
        }
        Some(step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_of_non_verifier_is_blank() {
        let p = Params::new(4, 2).unwrap();
        let a = AgentState::Ranking {
            countdown: 3,
            ranking: crate::ranking::RankingState::initial(&p),
        };
        let v = AgentView::of(&a);
        assert_eq!(v.role, Role::Ranking);
        assert_eq!(v.rank, 0);
    }

    #[test]
    fn initial_clean_flags() {
        let p = Params::new(4, 2).unwrap();
        let mut c = Configuration::new((1..=4).map(|r| AgentState::verifier(&p, r)).collect(), &p);
        if let AgentState::Verifying { verify, .. } = &mut c.agents[1] {
            verify.dc = crate::collision::DcState::Top;
        }
        let t = Trace::start(&c, &p);
        assert_eq!(t.initial_clean, vec![true, false, true, true]);
    }
}
