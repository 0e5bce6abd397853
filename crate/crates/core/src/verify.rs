//! Generations and probation around collision detection.
//!
//! Verifiers of equal generation run collision detection. A collision seen
//! off probation only restarts collision detection in the next generation
//! (soft reset); the new generation spreads by epidemic to agents one
//! generation behind. A collision on probation, or a generation gap other
//! than one, triggers a full reset.

use serde::{Deserialize, Serialize};

use crate::collision::{detect_collision_step, init_dc, DcOutcome, DcState};
use crate::params::Params;
use crate::randomness::Draw;

/// Generations live in `Z_6`.
pub const GENERATIONS: u8 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerifyState {
    pub generation: u8,
    pub probation: u32,
    pub dc: DcState,
}

impl VerifyState {
    /// State of a fresh verifier: generation 0, full probation, clean collision detection.
    pub fn entry(params: &Params, rank: usize) -> Self {
        Self {
            generation: 0,
            probation: params.p_max,
            dc: init_dc(params, rank),
        }
    }

    fn restart(&mut self, params: &Params, rank: usize, generation: u8) {
        self.generation = generation % GENERATIONS;
        self.dc = init_dc(params, rank);
        self.probation = params.p_max;
    }
}

/// Per-agent result of one verification interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyAction {
    #[default]
    None,
    /// Collision seen off probation: generation advanced, dc restarted.
    SoftReset,
    /// Joined the partner's newer generation.
    Adopt,
    /// The caller must run `TriggerReset` on this agent.
    TriggerReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub actions: [VerifyAction; 2],
    /// `None` when generations differ and collision detection did not run.
    pub dc: Option<DcOutcome>,
}

/// One interaction of two verifiers; `u` is the initiator.
pub fn stable_verify_step(
    params: &Params,
    u_rank: usize,
    u: &mut VerifyState,
    v_rank: usize,
    v: &mut VerifyState,
    draw: &mut dyn Draw,
) -> VerifyOutcome {
    let mut actions = [VerifyAction::None; 2];
    u.probation = u.probation.saturating_sub(1);
    v.probation = v.probation.saturating_sub(1);
    if u.generation == v.generation {
        let dc = detect_collision_step(params, u_rank, &mut u.dc, v_rank, &mut v.dc, draw);
        for (i, (s, rank)) in [(&mut *u, u_rank), (&mut *v, v_rank)]
            .into_iter()
            .enumerate()
        {
            if s.dc.is_top() {
                if s.probation == 0 {
                    s.restart(params, rank, s.generation + 1);
                    actions[i] = VerifyAction::SoftReset;
                } else {
                    actions[i] = VerifyAction::TriggerReset;
                }
            }
        }
        return VerifyOutcome {
            actions,
            dc: Some(dc),
        };
    }
    if u.probation == 0 && (u.generation + 1) % GENERATIONS == v.generation {
        u.restart(params, u_rank, v.generation);
        actions[0] = VerifyAction::Adopt;
    } else if v.probation == 0 && (v.generation + 1) % GENERATIONS == u.generation {
        v.restart(params, v_rank, u.generation);
        actions[1] = VerifyAction::Adopt;
    } else {
        actions[0] = VerifyAction::TriggerReset;
    }
    VerifyOutcome { actions, dc: None }
}
