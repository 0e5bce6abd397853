//! Mechanical invariant predicates shared by the property tests, the
//! acceptance suite and the `check` command.

use std::collections::BTreeMap;

use crate::collision::{owner_copy_ok, DcLive, DcState, GroupCtx};
use crate::orchestrator::{AgentState, Configuration};
use crate::params::Params;
use crate::ranking::Phase;
use crate::verify::{VerifyAction, VerifyState, GENERATIONS};

/// `(cell, content)` pairs held by the two agents, as a multiset.
fn held_multiset(u: &DcLive, v: &DcLive) -> BTreeMap<(usize, u32), usize> {
    let mut m = BTreeMap::new();
    for (cell, c) in u.held_cells().chain(v.held_cells()) {
        *m.entry((cell, c)).or_insert(0) += 1;
    }
    m
}

/// Load balancing neither creates nor destroys messages.
pub fn balance_conserves(before: [&DcLive; 2], after: [&DcLive; 2]) -> bool {
    held_multiset(before[0], before[1]) == held_multiset(after[0], after[1])
}

/// For every governing row and content, the two counts differ by at most one.
pub fn balanced(ctx: &GroupCtx, u: &DcLive, v: &DcLive) -> bool {
    let ids = ctx.ids();
    let mut diff: BTreeMap<(usize, u32), i64> = BTreeMap::new();
    for (cell, c) in u.held_cells() {
        *diff.entry((cell / ids, c)).or_insert(0) += 1;
    }
    for (cell, c) in v.held_cells() {
        *diff.entry((cell / ids, c)).or_insert(0) -= 1;
    }
    diff.values().all(|d| d.abs() <= 1)
}

/// Held cell indices (ignoring contents) across both agents, as a multiset.
pub fn held_cells(states: &[&DcState]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for s in states {
        if let DcState::Live(l) = s {
            for (cell, _) in l.held_cells() {
                *m.entry(cell).or_insert(0) += 1;
            }
        }
    }
    m
}

/// Owner-copy restriction for a state that may be `Top`.
pub fn owner_copy_holds(ctx: &GroupCtx, rank: usize, s: &DcState) -> bool {
    match s {
        DcState::Top => true,
        DcState::Live(l) => owner_copy_ok(ctx, rank, l).is_ok(),
    }
}

/// Transition rules of one verifier across a verification interaction:
/// the probation timer moves down by one (floored) or jumps to `pMax` on a
/// soft reset or adoption; the generation is unchanged or advances by one,
/// and only by an agent whose timer had run out.
pub fn verify_transition_ok(
    p: &Params,
    before: &VerifyState,
    after: &VerifyState,
    action: VerifyAction,
) -> Result<(), String> {
    let ticked = before.probation.saturating_sub(1);
    let next = (before.generation + 1) % GENERATIONS;
    match action {
        VerifyAction::SoftReset | VerifyAction::Adopt => {
            if ticked != 0 {
                return Err(format!("{action:?} while on probation ({ticked})"));
            }
            if after.generation != next {
                return Err(format!(
                    "{action:?} moved generation {} to {}",
                    before.generation, after.generation
                ));
            }
            if after.probation != p.p_max {
                return Err(format!("{action:?} left probation at {}", after.probation));
            }
        }
        VerifyAction::None | VerifyAction::TriggerReset => {
            if after.generation != before.generation {
                return Err(format!(
                    "generation changed {} -> {} without a reset",
                    before.generation, after.generation
                ));
            }
            if after.probation != ticked {
                return Err(format!(
                    "probation {} -> {}, expected {ticked}",
                    before.probation, after.probation
                ));
            }
        }
    }
    Ok(())
}

/// Only the two participants may change in an interaction.
pub fn locality_ok(before: &Configuration, after: &Configuration, pair: (usize, usize)) -> bool {
    before.agents.len() == after.agents.len()
        && before
            .agents
            .iter()
            .zip(&after.agents)
            .enumerate()
            .all(|(k, (a, b))| k == pair.0 || k == pair.1 || a == b)
}

/// Badge bookkeeping over a clean ranking run: every badge is either inside
/// exactly one sheriff interval or belongs to exactly one deputy, current or
/// past, and no id is ever held by two different agents.
#[derive(Debug, Clone, Default)]
pub struct BadgeLedger {
    /// Agent that first became deputy of each badge.
    deputies: BTreeMap<u32, usize>,
    started: bool,
}

impl BadgeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of agents that have ever been deputies.
    pub fn deputies_seen(&self) -> usize {
        self.deputies.len()
    }

    pub fn observe(&mut self, p: &Params, config: &Configuration) -> Result<(), String> {
        let r = p.r as u32;
        let mut owners = vec![0u32; p.r];
        for (k, a) in config.agents.iter().enumerate() {
            let AgentState::Ranking { ranking, .. } = a else {
                continue;
            };
            match ranking.phase {
                Phase::Sheriff { low, high } => {
                    self.started = true;
                    for b in low..=high {
                        owners[b as usize - 1] += 1;
                    }
                }
                Phase::Deputy { id, .. } => {
                    self.started = true;
                    let first = *self.deputies.entry(id).or_insert(k);
                    if first != k {
                        return Err(format!("badge {id} held by agents {first} and {k}"));
                    }
                }
                _ => {}
            }
        }
        if !self.started {
            return Ok(());
        }
        for b in 1..=r {
            let held = owners[b as usize - 1] + u32::from(self.deputies.contains_key(&b));
            if held != 1 {
                return Err(format!("badge {b} accounted {held} times"));
            }
        }
        Ok(())
    }
}
