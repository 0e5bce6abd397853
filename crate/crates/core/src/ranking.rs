//! Silent ranking from an awakening configuration.
//!
//! A bootstrap election picks a sheriff holding badges `[r]`. Sheriffs halve
//! their badge interval with every recipient they meet; a single-badge sheriff
//! becomes a deputy. Deputies hand out labels `(id, j)` and every agent
//! forwards the largest counter it has heard of each deputy through its
//! `channel`. Once the channel accounts for `n` labels the agent sleeps for a
//! while to keep forwarding, then takes the lexicographic position of its
//! label as its rank.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{boot_init, boot_step, BootState};
use crate::params::Params;
use crate::randomness::{Draw, Side};

/// `(deputy id, label index)`, both 1-based.
pub type Label = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// In bootstrap election; `None` until the first election interaction.
    InElection(Option<BootState>),
    Sheriff {
        low: u32,
        high: u32,
    },
    Deputy {
        id: u32,
        counter: u32,
    },
    Recipient {
        label: Option<Label>,
    },
    Sleeper {
        timer: u32,
        label: Option<Label>,
    },
    Ranked,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::InElection(_) => "election",
            Phase::Sheriff { .. } => "sheriff",
            Phase::Deputy { .. } => "deputy",
            Phase::Recipient { .. } => "recipient",
            Phase::Sleeper { .. } => "sleeper",
            Phase::Ranked => "ranked",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankingState {
    pub phase: Phase,
    /// Largest known counter of each deputy, indexed by `id - 1`.
    pub channel: Vec<u32>,
    pub rank: usize,
}

impl RankingState {
    /// The initial ranking state: in election, channels zero, rank 1.
    pub fn initial(params: &Params) -> Self {
        Self {
            phase: Phase::InElection(None),
            channel: vec![0; params.r],
            rank: 1,
        }
    }

    pub fn in_election(&self) -> bool {
        matches!(self.phase, Phase::InElection(_))
    }

    pub fn is_sleeper(&self) -> bool {
        matches!(self.phase, Phase::Sleeper { .. })
    }

    pub fn is_ranked(&self) -> bool {
        matches!(self.phase, Phase::Ranked)
    }

    pub fn channel_sum(&self) -> u64 {
        self.channel.iter().map(|&c| c as u64).sum()
    }

    /// The label this agent ranks itself by; deputies use `(id, 1)`.
    pub fn own_label(&self) -> Option<Label> {
        match self.phase {
            Phase::Deputy { id, .. } => Some((id, 1)),
            Phase::Recipient { label } | Phase::Sleeper { label, .. } => label,
            _ => None,
        }
    }

    /// Whether every field lies in its declared range.
    pub fn is_valid(&self, params: &Params) -> bool {
        let r = params.r as u32;
        let pool = params.label_pool;
        let label_ok = |l: &Option<Label>| match l {
            None => true,
            Some((i, j)) => (1..=r).contains(i) && (1..=pool).contains(j),
        };
        let phase_ok = match &self.phase {
            Phase::InElection(b) => b.is_none_or(|b| b.is_valid(params)),
            Phase::Sheriff { low, high } => 1 <= *low && low <= high && *high <= r,
            Phase::Deputy { id, counter } => {
                (1..=r).contains(id)
                    && (1..=pool).contains(counter)
                    && self
                        .channel
                        .get(*id as usize - 1)
                        .is_some_and(|&c| c >= 1)
            }
            Phase::Recipient { label } => label_ok(label),
            Phase::Sleeper { timer, label } => {
                (1..=params.sleep_max).contains(timer) && label_ok(label)
            }
            Phase::Ranked => true,
        };
        phase_ok
            && self.channel.len() == params.r
            && self.channel.iter().all(|&c| c <= pool)
            && (1..=params.n).contains(&self.rank)
    }
}

/// Lexicographic position of `label` among the labels certified by `channel`
/// (`(i, j)` with `j <= channel[i]`). `None` if the label is not certified or
/// the position falls outside `[n]`.
pub fn rank_from_label(label: Label, channel: &[u32], n: usize) -> Option<usize> {
    let (i, j) = label;
    let i = i as usize;
    if i == 0 || i > channel.len() || j == 0 || j > channel[i - 1] {
        return None;
    }
    let before: u64 = channel[..i - 1].iter().map(|&c| c as u64).sum();
    let rank = before + j as u64;
    (rank as usize <= n).then_some(rank as usize)
}

/// What changed in one ranking interaction, per side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RankingEvents {
    pub became_ranked: [bool; 2],
}

/// One ranking interaction between `u` (initiator) and `v`.
pub fn assign_ranks_step(
    params: &Params,
    u: &mut RankingState,
    v: &mut RankingState,
    draw: &mut dyn Draw,
) -> RankingEvents {
    let mut ev = RankingEvents::default();
    if u.in_election() || v.in_election() {
        elect_sheriff(params, u, v, draw);
        return ev;
    }
    if u.is_sleeper() || v.is_sleeper() {
        sleep(params, u, v, &mut ev);
    } else if is_sheriff(u) && is_recipient(v) {
        deputize(params, u, v);
    } else if is_sheriff(v) && is_recipient(u) {
        deputize(params, v, u);
    } else if is_deputy(u) && is_unlabeled(v) {
        labeling(params, u, v);
    } else if is_deputy(v) && is_unlabeled(u) {
        labeling(params, v, u);
    }
    if !u.is_ranked() && !v.is_ranked() {
        for (a, b) in u.channel.iter_mut().zip(v.channel.iter_mut()) {
            let m = (*a).max(*b);
            *a = m;
            *b = m;
        }
    }
    for s in [&mut *u, &mut *v] {
        if !s.is_ranked() && !s.is_sleeper() && s.channel_sum() == params.n as u64 {
            let label = s.own_label();
            s.phase = Phase::Sleeper { timer: 1, label };
        }
    }
    ev
}

fn is_sheriff(s: &RankingState) -> bool {
    matches!(s.phase, Phase::Sheriff { .. })
}

fn is_recipient(s: &RankingState) -> bool {
    matches!(s.phase, Phase::Recipient { .. })
}

fn is_deputy(s: &RankingState) -> bool {
    matches!(s.phase, Phase::Deputy { .. })
}

fn is_unlabeled(s: &RankingState) -> bool {
    matches!(s.phase, Phase::Recipient { label: None })
}

/// Bootstrap election, or release of a lone election agent as a recipient.
pub fn elect_sheriff(
    params: &Params,
    u: &mut RankingState,
    v: &mut RankingState,
    draw: &mut dyn Draw,
) {
    match (&mut u.phase, &mut v.phase) {
        (Phase::InElection(a), Phase::InElection(b)) => {
            let a = a.get_or_insert_with(|| boot_init(params, draw, Side::Initiator));
            let b = b.get_or_insert_with(|| boot_init(params, draw, Side::Responder));
            boot_step(a, b);
        }
        (Phase::InElection(_), _) => u.phase = Phase::Recipient { label: None },
        (_, Phase::InElection(_)) => v.phase = Phase::Recipient { label: None },
        _ => return,
    }
    for s in [u, v] {
        if let Phase::InElection(Some(b)) = s.phase {
            if b.leader_done && b.leader_bit {
                s.phase = Phase::Sheriff {
                    low: 1,
                    high: params.r as u32,
                };
                promote_single_badge(s);
            }
        }
    }
}

fn promote_single_badge(s: &mut RankingState) {
    if let Phase::Sheriff { low, high } = s.phase {
        if low == high {
            s.phase = Phase::Deputy {
                id: low,
                counter: 1,
            };
            s.channel[low as usize - 1] = 1;
        }
    }
}

/// Sheriff `w` hands the upper half of its badges to recipient `x`.
pub fn deputize(_params: &Params, w: &mut RankingState, x: &mut RankingState) {
    let Phase::Sheriff { low, high } = w.phase else {
        return;
    };
    if low == high {
        // Only reachable from an adversarial start: nothing to split.
        promote_single_badge(w);
        return;
    }
    let mid = (low + high) / 2;
    w.phase = Phase::Sheriff { low, high: mid };
    x.phase = Phase::Sheriff { low: mid + 1, high };
    promote_single_badge(x);
    promote_single_badge(w);
}

/// Deputy `w` gives the next label to unlabeled recipient `x`, if `w` has
/// heard of at least `r` labels and its pool is not exhausted.
pub fn labeling(params: &Params, w: &mut RankingState, x: &mut RankingState) {
    if w.channel_sum() < params.r as u64 {
        return;
    }
    let Phase::Deputy { id, counter } = w.phase else {
        return;
    };
    if counter < params.label_pool {
        let counter = counter + 1;
        w.phase = Phase::Deputy { id, counter };
        w.channel[id as usize - 1] = counter;
        x.phase = Phase::Recipient {
            label: Some((id, counter)),
        };
    }
}

fn become_ranked(params: &Params, s: &mut RankingState) {
    if let Some(rank) = s
        .own_label()
        .and_then(|l| rank_from_label(l, &s.channel, params.n))
    {
        s.rank = rank;
    }
    s.phase = Phase::Ranked;
}

fn sleeper_timer(s: &RankingState) -> Option<u32> {
    match s.phase {
        Phase::Sleeper { timer, .. } => Some(timer),
        _ => None,
    }
}

/// At least one of `u`, `v` sleeps.
pub fn sleep(params: &Params, u: &mut RankingState, v: &mut RankingState, ev: &mut RankingEvents) {
    let cap = params.sleep_max;
    if u.is_ranked() || v.is_ranked() {
        for (i, s) in [&mut *u, &mut *v].into_iter().enumerate() {
            if s.is_sleeper() {
                become_ranked(params, s);
                ev.became_ranked[i] = true;
            }
        }
        return;
    }
    let due = [sleeper_timer(u), sleeper_timer(v)]
        .into_iter()
        .flatten()
        .any(|t| t >= cap);
    if due {
        for (i, s) in [&mut *u, &mut *v].into_iter().enumerate() {
            become_ranked(params, s);
            ev.became_ranked[i] = true;
        }
        return;
    }
    for s in [&mut *u, &mut *v] {
        match &mut s.phase {
            Phase::Sleeper { timer, .. } => *timer = (*timer + 1).min(cap),
            _ => {
                let label = s.own_label();
                s.phase = Phase::Sleeper { timer: 1, label };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::ScriptedDraw;

    fn params() -> Params {
        Params::new(6, 3).unwrap()
    }

    fn with_phase(p: &Params, phase: Phase, channel: Vec<u32>) -> RankingState {
        RankingState {
            phase,
            channel,
            ..RankingState::initial(p)
        }
    }

    fn recipient(p: &Params, channel: Vec<u32>) -> RankingState {
        with_phase(p, Phase::Recipient { label: None }, channel)
    }

    #[test]
    fn channels_merge_by_max() {
        let p = params();
        let mut u = recipient(&p, vec![2, 0, 1]);
        let mut v = recipient(&p, vec![1, 3, 0]);
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!(u.channel, vec![2, 3, 1]);
        assert_eq!(v.channel, vec![2, 3, 1]);
    }

    #[test]
    fn full_channel_puts_both_to_sleep() {
        let p = params();
        let mut u = recipient(&p, vec![2, 1, 3]);
        u.phase = Phase::Recipient {
            label: Some((3, 2)),
        };
        let mut v = recipient(&p, vec![2, 1, 2]);
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!(
            u.phase,
            Phase::Sleeper {
                timer: 1,
                label: Some((3, 2))
            }
        );
        assert!(v.is_sleeper());
    }

    #[test]
    fn ranked_pair_is_silent() {
        let p = params();
        let mut u = with_phase(&p, Phase::Ranked, vec![2, 1, 3]);
        u.rank = 4;
        let mut v = with_phase(&p, Phase::Ranked, vec![2, 1, 3]);
        v.rank = 2;
        let (u0, v0) = (u.clone(), v.clone());
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!((u, v), (u0, v0));
    }

    #[test]
    fn election_pair_runs_epidemic() {
        let p = params();
        let mut u = RankingState::initial(&p);
        let mut v = RankingState::initial(&p);
        let mut d = ScriptedDraw::new(vec![40, 7]);
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        let (Phase::InElection(Some(a)), Phase::InElection(Some(b))) = (&u.phase, &v.phase) else {
            panic!("still in election expected");
        };
        assert_eq!((a.identifier, b.identifier), (40, 7));
        assert_eq!((a.min_identifier, b.min_identifier), (7, 7));
    }

    #[test]
    fn lone_election_agent_becomes_recipient() {
        let p = params();
        let mut u = RankingState::initial(&p);
        let mut v = recipient(&p, vec![0, 0, 0]);
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!(u.phase, Phase::Recipient { label: None });
        assert_eq!(v.phase, Phase::Recipient { label: None });
    }

    #[test]
    fn finished_leader_becomes_sheriff() {
        let p = params();
        let mut b = BootState::new(5, 1);
        b.min_identifier = 5;
        let mut u = with_phase(&p, Phase::InElection(Some(b)), vec![0; 3]);
        let mut v = with_phase(
            &p,
            Phase::InElection(Some(BootState::new(9, 4))),
            vec![0; 3],
        );
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!(u.phase, Phase::Sheriff { low: 1, high: 3 });
        assert!(v.in_election());
    }

    #[test]
    fn deputize_splits_interval() {
        let p = Params::new(8, 4).unwrap();
        let mut w = with_phase(&p, Phase::Sheriff { low: 1, high: 4 }, vec![0; 4]);
        let mut x = recipient(&p, vec![0; 4]);
        deputize(&p, &mut w, &mut x);
        assert_eq!(w.phase, Phase::Sheriff { low: 1, high: 2 });
        assert_eq!(x.phase, Phase::Sheriff { low: 3, high: 4 });
    }

    #[test]
    fn single_badge_sheriff_keeps_badge() {
        let p = Params::new(8, 4).unwrap();
        let mut w = with_phase(&p, Phase::Sheriff { low: 2, high: 2 }, vec![0; 4]);
        let mut x = recipient(&p, vec![0; 4]);
        deputize(&p, &mut w, &mut x);
        assert_eq!(w.phase, Phase::Deputy { id: 2, counter: 1 });
        assert_eq!(x.phase, Phase::Recipient { label: None });
    }

    #[test]
    fn deputize_to_two_deputies() {
        let p = Params::new(8, 4).unwrap();
        let mut w = with_phase(&p, Phase::Sheriff { low: 3, high: 4 }, vec![0; 4]);
        let mut x = recipient(&p, vec![0; 4]);
        deputize(&p, &mut w, &mut x);
        assert_eq!(w.phase, Phase::Deputy { id: 3, counter: 1 });
        assert_eq!(x.phase, Phase::Deputy { id: 4, counter: 1 });
        assert_eq!(w.channel[2], 1);
        assert_eq!(x.channel[3], 1);
    }

    #[test]
    fn single_badge_sheriff_is_deputy() {
        let p = Params::new(4, 1).unwrap();
        let mut b = BootState::new(2, 1);
        b.min_identifier = 2;
        let mut u = with_phase(&p, Phase::InElection(Some(b)), vec![0]);
        let mut v = with_phase(&p, Phase::InElection(Some(BootState::new(3, 5))), vec![0]);
        let mut d = ScriptedDraw::default();
        assign_ranks_step(&p, &mut u, &mut v, &mut d);
        assert_eq!(u.phase, Phase::Deputy { id: 1, counter: 1 });
        assert_eq!(u.channel, vec![1]);
    }

    #[test]
    fn labeling_cases() {
        let p = Params::new(8, 2).unwrap();
        let mut w = with_phase(&p, Phase::Deputy { id: 2, counter: 3 }, vec![1, 3]);
        let mut x = recipient(&p, vec![0, 0]);
        labeling(&p, &mut w, &mut x);
        assert_eq!(w.phase, Phase::Deputy { id: 2, counter: 4 });
        assert_eq!(w.channel[1], 4);
        assert_eq!(
            x.phase,
            Phase::Recipient {
                label: Some((2, 4))
            }
        );

        let mut w = with_phase(&p, Phase::Deputy { id: 2, counter: 1 }, vec![0, 1]);
        let mut x = recipient(&p, vec![0, 0]);
        labeling(&p, &mut w, &mut x);
        assert_eq!(x.phase, Phase::Recipient { label: None });

        let pool = p.label_pool;
        let mut w = with_phase(
            &p,
            Phase::Deputy {
                id: 1,
                counter: pool,
            },
            vec![pool, 1],
        );
        let mut x = recipient(&p, vec![0, 0]);
        labeling(&p, &mut w, &mut x);
        assert_eq!(x.phase, Phase::Recipient { label: None });
        assert_eq!(
            w.phase,
            Phase::Deputy {
                id: 1,
                counter: pool
            }
        );
    }

    #[test]
    fn sleep_cases() {
        let p = params();
        let cap = p.sleep_max;
        let ch = vec![2, 1, 3];
        let mut ev = RankingEvents::default();

        let mut u = with_phase(
            &p,
            Phase::Sleeper {
                timer: cap,
                label: Some((1, 2)),
            },
            ch.clone(),
        );
        let mut v = with_phase(
            &p,
            Phase::Sleeper {
                timer: 3,
                label: Some((3, 1)),
            },
            ch.clone(),
        );
        sleep(&p, &mut u, &mut v, &mut ev);
        assert!(u.is_ranked() && v.is_ranked());
        assert_eq!((u.rank, v.rank), (2, 4));

        let mut u = with_phase(
            &p,
            Phase::Sleeper {
                timer: 2,
                label: Some((2, 1)),
            },
            ch.clone(),
        );
        let mut v = with_phase(&p, Phase::Ranked, ch.clone());
        sleep(&p, &mut u, &mut v, &mut ev);
        assert!(u.is_ranked());
        assert_eq!(u.rank, 3);

        let mut u = with_phase(
            &p,
            Phase::Sleeper {
                timer: 2,
                label: Some((2, 1)),
            },
            ch.clone(),
        );
        let mut v = with_phase(
            &p,
            Phase::Recipient {
                label: Some((3, 3)),
            },
            ch.clone(),
        );
        sleep(&p, &mut u, &mut v, &mut ev);
        assert_eq!(
            u.phase,
            Phase::Sleeper {
                timer: 3,
                label: Some((2, 1))
            }
        );
        assert_eq!(
            v.phase,
            Phase::Sleeper {
                timer: 1,
                label: Some((3, 3))
            }
        );
    }

    #[test]
    fn rank_from_label_examples() {
        let ch = [2, 1, 3];
        assert_eq!(rank_from_label((2, 1), &ch, 6), Some(3));
        assert_eq!(rank_from_label((1, 1), &ch, 6), Some(1));
        assert_eq!(rank_from_label((3, 3), &ch, 6), Some(6));
        assert_eq!(rank_from_label((2, 2), &ch, 6), None);
        assert_eq!(rank_from_label((4, 1), &ch, 6), None);
    }
}
