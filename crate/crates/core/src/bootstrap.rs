//! Non-self-stabilizing sheriff election from an awakening configuration.
//!
//! Every agent draws an identifier from `[n^3]`, spreads the minimum it has
//! seen by two-way epidemic and counts down a local timer. When the timer
//! runs out the agent is done, and it is the leader iff it still holds the
//! minimum.

use serde::{Deserialize, Serialize};

use crate::params::Params;
use crate::randomness::{Draw, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BootState {
    pub identifier: u64,
    pub min_identifier: u64,
    pub le_count: u32,
    pub leader_done: bool,
    pub leader_bit: bool,
}

impl BootState {
    pub fn new(identifier: u64, le_count: u32) -> Self {
        Self {
            identifier,
            min_identifier: identifier,
            le_count,
            leader_done: false,
            leader_bit: false,
        }
    }

    /// `min_identifier <= identifier` and done only at timer zero.
    pub fn is_valid(&self, params: &Params) -> bool {
        (1..=params.id_space).contains(&self.identifier)
            && (1..=self.identifier).contains(&self.min_identifier)
            && self.le_count <= params.le_count
            && (!self.leader_done || self.le_count == 0)
            && (self.leader_done || !self.leader_bit)
    }
}

/// Fresh election state with an identifier drawn from `[id_space]`.
pub fn boot_init(params: &Params, draw: &mut dyn Draw, side: Side) -> BootState {
    BootState::new(draw.draw(side, params.id_space), params.le_count)
}

/// One election interaction: share the minimum, tick both timers and let an
/// agent whose timer just reached zero decide.
pub fn boot_step(u: &mut BootState, v: &mut BootState) {
    let m = u.min_identifier.min(v.min_identifier);
    for s in [u, v] {
        s.min_identifier = m;
        if s.le_count > 0 {
            s.le_count -= 1;
            if s.le_count == 0 {
                s.leader_done = true;
                s.leader_bit = s.identifier == s.min_identifier;
            }
        }
    }
}
