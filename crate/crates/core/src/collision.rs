//! Group-partitioned collision detection with circulating messages.
//!
//! Ranks are split into consecutive groups; only agents whose ranks share a
//! group interact non-trivially. Every rank governs `ids_per_rank` messages
//! which travel between agents of the group. The owner stamps its current
//! signature onto every copy it meets and remembers the stamp in
//! `observations`; a copy carrying a stamp the owner never issued, a second
//! copy of one message, or two agents with one rank all produce [`DcState::Top`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::params::{GroupSizes, Params};
use crate::randomness::{Draw, Side};

/// Partition of `[n]` into consecutive blocks of sizes in `{floor(r/2), ..., r}`.
///
/// Blocks have size `r`; a trailing remainder shorter than `floor(r/2)` is
/// merged with the previous block and the pair is split floor/ceil.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupPartition {
    n: usize,
    /// First rank of every block plus `n + 1` as sentinel.
    starts: Vec<usize>,
}

impl GroupPartition {
    pub fn new(n: usize, r: usize) -> Self {
        let r = r.max(1);
        let mut sizes = vec![r; n / r];
        let rem = n % r;
        if rem > 0 {
            if rem >= r / 2 || sizes.is_empty() {
                sizes.push(rem);
            } else {
                let last = sizes.pop().unwrap() + rem;
                sizes.push(last / 2);
                sizes.push(last - last / 2);
            }
        }
        let mut starts = Vec::with_capacity(sizes.len() + 1);
        let mut s = 1;
        for len in sizes {
            starts.push(s);
            s += len;
        }
        starts.push(s);
        Self { n, starts }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.starts.len() - 1
    }

    /// Blocks as half-open ranges of 1-based ranks, in ascending order.
    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.starts.windows(2).map(|w| w[0]..w[1])
    }

    /// Index of the block containing `rank`. Panics if `rank` is outside `[n]`.
    pub fn group_index(&self, rank: usize) -> usize {
        assert!(
            rank >= 1 && rank <= self.n,
            "rank {rank} outside [1, {}]",
            self.n
        );
        self.starts.partition_point(|&s| s <= rank) - 1
    }

    pub fn group_of(&self, rank: usize) -> Range<usize> {
        let g = self.group_index(rank);
        self.starts[g]..self.starts[g + 1]
    }

    /// 1-based position of `rank` inside its block.
    pub fn rank_within_group(&self, rank: usize) -> usize {
        rank - self.group_of(rank).start + 1
    }
}

/// One group as seen by collision detection: its rank range and sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupCtx {
    pub ranks: Range<usize>,
    pub sizes: GroupSizes,
}

impl GroupCtx {
    pub fn new(ranks: Range<usize>, sizes: GroupSizes) -> Self {
        Self { ranks, sizes }
    }

    /// The group of `rank` under `params`.
    pub fn of(params: &Params, rank: usize) -> Self {
        let ranks = params.partition.group_of(rank);
        let sizes = params.group_sizes(ranks.len());
        Self { ranks, sizes }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ids(&self) -> usize {
        self.sizes.ids_per_rank as usize
    }

    pub fn cells(&self) -> usize {
        self.len() * self.ids()
    }

    pub fn contains(&self, rank: usize) -> bool {
        self.ranks.contains(&rank)
    }

    /// 0-based position of `rank` in the group.
    pub fn pos(&self, rank: usize) -> usize {
        rank - self.ranks.start
    }

    /// Cell index of message `(governing rank, id)`; `id` is 1-based.
    pub fn cell(&self, governing: usize, id: usize) -> usize {
        self.pos(governing) * self.ids() + (id - 1)
    }

    /// IDs initially held per governing rank by the agent at 1-based
    /// position `p`: the `p`-th of `len` balanced consecutive blocks of
    /// `[ids_per_rank]`.
    pub fn init_block(&self, p: usize) -> Range<usize> {
        let ids = self.ids();
        let g = self.len();
        let lo = (p - 1) * ids / g;
        let hi = p * ids / g;
        lo + 1..hi + 1
    }
}

/// Non-error collision-detection state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DcLive {
    pub signature: u32,
    pub counter: u32,
    /// Message contents indexed by `pos(governing) * ids_per_rank + (id - 1)`;
    /// 0 marks an empty cell.
    pub msgs: Vec<u32>,
    /// Content last stamped on each message this agent governs, by `id - 1`.
    pub observations: Vec<u32>,
}

impl DcLive {
    pub fn held(&self) -> usize {
        self.msgs.iter().filter(|&&c| c != 0).count()
    }

    /// Held messages as `(cell, content)`.
    pub fn held_cells(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.msgs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (i, c))
    }
}

/// Collision-detection state: the error marker or live fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DcState {
    Top,
    Live(DcLive),
}

impl DcState {
    pub fn is_top(&self) -> bool {
        matches!(self, DcState::Top)
    }

    pub fn live(&self) -> Option<&DcLive> {
        match self {
            DcState::Top => None,
            DcState::Live(l) => Some(l),
        }
    }
}

/// The clean state `q0` for an agent of `rank` in group `ctx`.
pub fn init_dc_in(ctx: &GroupCtx, rank: usize) -> DcLive {
    let ids = ctx.ids();
    let mut msgs = vec![0u32; ctx.cells()];
    let block = ctx.init_block(ctx.pos(rank) + 1);
    for g in 0..ctx.len() {
        for j in block.clone() {
            msgs[g * ids + j - 1] = 1;
        }
    }
    DcLive {
        signature: 1,
        counter: 1,
        msgs,
        observations: vec![1; ids],
    }
}

pub fn init_dc(params: &Params, rank: usize) -> DcState {
    DcState::Live(init_dc_in(&GroupCtx::of(params, rank), rank))
}

/// Why a live state is outside its type.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DcInvalid {
    #[error("table has {got} cells, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("field {0} out of range")]
    Range(&'static str),
    #[error("owner copy of id {0} differs from its observation")]
    OwnerCopy(usize),
}

/// Type check of a live state for an agent of `rank`, including the
/// owner-copy restriction.
pub fn validate_dc(ctx: &GroupCtx, rank: usize, s: &DcLive) -> Result<(), DcInvalid> {
    let sig = ctx.sizes.sig_space;
    if s.msgs.len() != ctx.cells() {
        return Err(DcInvalid::Shape {
            got: s.msgs.len(),
            expected: ctx.cells(),
        });
    }
    if s.observations.len() != ctx.ids() {
        return Err(DcInvalid::Shape {
            got: s.observations.len(),
            expected: ctx.ids(),
        });
    }
    if s.signature < 1 || s.signature > sig {
        return Err(DcInvalid::Range("signature"));
    }
    if s.counter < 1 || s.counter > ctx.sizes.sig_refresh {
        return Err(DcInvalid::Range("counter"));
    }
    if s.msgs.iter().any(|&c| c > sig) {
        return Err(DcInvalid::Range("msgs"));
    }
    if s.observations.iter().any(|&c| c < 1 || c > sig) {
        return Err(DcInvalid::Range("observations"));
    }
    owner_copy_ok(ctx, rank, s)
}

/// The owner-copy restriction: own held messages match `observations`.
pub fn owner_copy_ok(ctx: &GroupCtx, rank: usize, s: &DcLive) -> Result<(), DcInvalid> {
    let base = ctx.pos(rank) * ctx.ids();
    for j in 0..ctx.ids() {
        let c = s.msgs[base + j];
        if c != 0 && c != s.observations[j] {
            return Err(DcInvalid::OwnerCopy(j + 1));
        }
    }
    Ok(())
}

/// Whether a same-group interaction ran and what it produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcOutcome {
    /// Ranks in different groups or an input already `Top`.
    Skipped,
    Ran,
    Collision,
}

/// One interaction of collision detection between `u` (initiator) and `v`.
pub fn detect_collision_step(
    params: &Params,
    u_rank: usize,
    u: &mut DcState,
    v_rank: usize,
    v: &mut DcState,
    draw: &mut dyn Draw,
) -> DcOutcome {
    let p = &params.partition;
    if p.group_index(u_rank) != p.group_index(v_rank) {
        return DcOutcome::Skipped;
    }
    let ctx = GroupCtx::of(params, u_rank);
    detect_collision_in(&ctx, u_rank, u, v_rank, v, draw)
}

/// [`detect_collision_step`] inside a known group; both ranks must be in `ctx`.
pub fn detect_collision_in(
    ctx: &GroupCtx,
    u_rank: usize,
    u: &mut DcState,
    v_rank: usize,
    v: &mut DcState,
    draw: &mut dyn Draw,
) -> DcOutcome {
    let (DcState::Live(us), DcState::Live(vs)) = (&mut *u, &mut *v) else {
        return DcOutcome::Skipped;
    };
    let collision = u_rank == v_rank
        || us
            .msgs
            .iter()
            .zip(&vs.msgs)
            .any(|(&a, &b)| a != 0 && b != 0)
        || !consistent(ctx, u_rank, us, vs)
        || !consistent(ctx, v_rank, vs, us);
    if collision {
        *u = DcState::Top;
        *v = DcState::Top;
        return DcOutcome::Collision;
    }
    update_messages(ctx, u_rank, us, vs, draw, Side::Initiator);
    update_messages(ctx, v_rank, vs, us, draw, Side::Responder);
    balance_load(ctx, us, vs);
    DcOutcome::Ran
}

/// Every copy held by `v` of a message governed by `u` carries `u`'s
/// observation for that id.
pub fn consistent(ctx: &GroupCtx, u_rank: usize, u: &DcLive, v: &DcLive) -> bool {
    let ids = ctx.ids();
    let base = ctx.pos(u_rank) * ids;
    v.msgs[base..base + ids]
        .iter()
        .zip(&u.observations)
        .all(|(&c, &o)| c == 0 || c == o)
}

/// Advance `u`'s refresh counter, resample its signature when due, then
/// stamp `u`'s signature on every copy of a `u`-governed message held by `v`.
pub fn update_messages(
    ctx: &GroupCtx,
    u_rank: usize,
    u: &mut DcLive,
    v: &mut DcLive,
    draw: &mut dyn Draw,
    side: Side,
) {
    let ids = ctx.ids();
    let base = ctx.pos(u_rank) * ids;
    u.counter += 1;
    if u.counter >= ctx.sizes.sig_refresh {
        u.signature = draw.draw(side, ctx.sizes.sig_space as u64) as u32;
        u.counter = 1;
        for j in 0..ids {
            if u.msgs[base + j] != 0 {
                u.msgs[base + j] = u.signature;
                u.observations[j] = u.signature;
            }
        }
    }
    for j in 0..ids {
        if v.msgs[base + j] != 0 {
            v.msgs[base + j] = u.signature;
            u.observations[j] = u.signature;
        }
    }
}

/// Redistribute the union of both tables so that, for every governing rank
/// and content, the two agents' counts differ by at most one.
///
/// Governing ranks are visited in ascending order and contents in ascending
/// order; each ID set is split into its lower floor half and upper ceil half.
/// The ceil half goes to `v` if `u`'s rebuilt table already holds more
/// messages, otherwise to `u`.
pub fn balance_load(ctx: &GroupCtx, u: &mut DcLive, v: &mut DcLive) {
    let ids = ctx.ids();
    let mut u_count = 0usize;
    let mut v_count = 0usize;
    let mut items: Vec<(u32, usize)> = Vec::new();
    for g in 0..ctx.len() {
        let row = g * ids..(g + 1) * ids;
        items.clear();
        for j in row.clone() {
            let (a, b) = (u.msgs[j], v.msgs[j]);
            if a != 0 {
                items.push((a, j));
            }
            if b != 0 {
                items.push((b, j));
            }
        }
        if items.is_empty() {
            continue;
        }
        items.sort_unstable();
        u.msgs[row.clone()].fill(0);
        v.msgs[row].fill(0);
        let mut start = 0;
        while start < items.len() {
            let k = items[start].0;
            let end = start + items[start..].iter().take_while(|x| x.0 == k).count();
            let set = &items[start..end];
            let half = set.len() / 2;
            let (floor_ids, ceil_ids) = set.split_at(half);
            let (to_floor, to_ceil) = if u_count > v_count {
                (&mut *u, &mut *v)
            } else {
                (&mut *v, &mut *u)
            };
            for &(c, j) in floor_ids {
                to_floor.msgs[j] = c;
            }
            for &(c, j) in ceil_ids {
                to_ceil.msgs[j] = c;
            }
            if u_count > v_count {
                u_count += floor_ids.len();
                v_count += ceil_ids.len();
            } else {
                v_count += floor_ids.len();
                u_count += ceil_ids.len();
            }
            start = end;
        }
    }
}
