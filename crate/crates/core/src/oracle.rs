//! Configuration classifiers and exhaustive small-instance checks.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::collision::{detect_collision_in, init_dc_in, DcState, GroupCtx};
use crate::orchestrator::{Configuration, Role};
use crate::params::Params;
use crate::randomness::ScriptedDraw;
use crate::trace::{next_clean, AgentView, StepRecord, Trace};
use crate::verify::GENERATIONS;

/// Recovery hierarchy, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HierarchyLevel {
    /// No constraint.
    C0,
    /// No resetters.
    C1,
    /// All agents verify.
    C2,
    /// All generations equal.
    C3,
    /// All probation timers zero.
    C4,
    /// Ranks form a permutation of `[n]`.
    C5,
}

/// Whether the verifier ranks are exactly `{1, ..., n}`.
pub fn ranks_are_permutation(views: &[AgentView]) -> bool {
    let n = views.len();
    let mut seen = vec![false; n + 1];
    for v in views {
        let r = v.rank as usize;
        if !v.is_verifier() || r == 0 || r > n || seen[r] {
            return false;
        }
        seen[r] = true;
    }
    true
}

/// Deepest hierarchy level whose predicates all hold.
pub fn classify_views(views: &[AgentView]) -> HierarchyLevel {
    if views.iter().any(|v| v.role == Role::Resetting) {
        return HierarchyLevel::C0;
    }
    if !views.iter().all(AgentView::is_verifier) {
        return HierarchyLevel::C1;
    }
    let g = views.first().map(|v| v.generation);
    if !views.iter().all(|v| Some(v.generation) == g) {
        return HierarchyLevel::C2;
    }
    if !views.iter().all(|v| v.probation == 0) {
        return HierarchyLevel::C3;
    }
    if !ranks_are_permutation(views) {
        return HierarchyLevel::C4;
    }
    HierarchyLevel::C5
}

pub fn classify(config: &Configuration) -> HierarchyLevel {
    let views: Vec<_> = config.agents.iter().map(AgentView::of).collect();
    classify_views(&views)
}

/// The safe-set surrogate on a snapshot plus clean flags: all agents verify
/// with a correct ranking, and for some generation `i` every agent is in `i`
/// or `i + 1`, every generation-`i` agent is off probation, and every
/// generation-`(i + 1)` agent is clean.
pub fn surrogate_holds(views: &[AgentView], clean: &[bool]) -> bool {
    if !ranks_are_permutation(views) {
        return false;
    }
    (0..GENERATIONS).any(|i| {
        let next = (i + 1) % GENERATIONS;
        views.iter().zip(clean).all(|(v, &c)| {
            (v.generation == i && v.probation == 0) || (v.generation == next && c && !v.top)
        })
    })
}

/// First interaction count at which the surrogate holds along `trace`.
pub fn safe_surrogate(trace: &Trace) -> Option<u64> {
    let mut rp = trace.replay();
    loop {
        if surrogate_holds(rp.views(), rp.clean()) {
            return Some(rp.position());
        }
        rp.advance()?;
    }
}

/// Leader after every prefix of `trace`: entry `t` is the leader after `t` interactions.
pub fn leader_series(trace: &Trace) -> Vec<Option<usize>> {
    let leader = |views: &[AgentView]| {
        let mut it = views
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_verifier() && v.rank == 1);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    };
    let mut rp = trace.replay();
    let mut out = vec![leader(rp.views())];
    while rp.advance().is_some() {
        out.push(leader(rp.views()));
    }
    out
}

/// First step at which closure fails after the surrogate first holds: the
/// leader changes or a full reset fires. `None` if closure holds throughout.
pub fn closure_violation(trace: &Trace) -> Option<u64> {
    let safe = safe_surrogate(trace)?;
    let leaders = leader_series(trace);
    let fixed = leaders[safe as usize];
    for t in safe as usize + 1..leaders.len() {
        let step = &trace.steps[t - 1];
        let full = step
            .events
            .iter()
            .any(|e| e.contains(crate::orchestrator::Events::TRIGGER_RESET));
        if full || leaders[t] != fixed {
            return Some(t as u64);
        }
    }
    None
}

/// Online counterpart of [`safe_surrogate`] and [`closure_violation`], fed
/// one step at a time by a run monitor.
#[derive(Debug, Clone)]
pub struct SurrogateTracker {
    views: Vec<AgentView>,
    clean: Vec<bool>,
    steps: u64,
    safe_at: Option<u64>,
    leader_at_safe: Option<usize>,
    violation: Option<u64>,
}

impl SurrogateTracker {
    pub fn new(config: &Configuration, params: &Params) -> Self {
        let t = Trace::start(config, params);
        let mut s = Self {
            views: t.initial,
            clean: t.initial_clean,
            steps: 0,
            safe_at: None,
            leader_at_safe: None,
            violation: None,
        };
        s.check_safe();
        s
    }

    fn leader(&self) -> Option<usize> {
        let mut it = self
            .views
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_verifier() && v.rank == 1);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    fn check_safe(&mut self) {
        if self.safe_at.is_none() && surrogate_holds(&self.views, &self.clean) {
            self.safe_at = Some(self.steps);
            self.leader_at_safe = self.leader();
        }
    }

    /// Feed one step; returns `false` once closure has been violated.
    pub fn observe(&mut self, rec: &StepRecord) -> bool {
        self.steps += 1;
        let idx = [rec.pair.0, rec.pair.1];
        let clean = next_clean(
            [self.clean[idx[0]], self.clean[idx[1]]],
            rec.events,
            rec.after,
        );
        for s in 0..2 {
            self.views[idx[s]] = rec.after[s];
            self.clean[idx[s]] = clean[s];
        }
        if self.safe_at.is_some() {
            if self.violation.is_none()
                && (rec.any(crate::orchestrator::Events::TRIGGER_RESET)
                    || self.leader() != self.leader_at_safe)
            {
                self.violation = Some(self.steps);
            }
        } else {
            self.check_safe();
        }
        self.violation.is_none()
    }

    pub fn safe_at(&self) -> Option<u64> {
        self.safe_at
    }

    pub fn violation(&self) -> Option<u64> {
        self.violation
    }
}

/// A group of agents for exhaustive exploration: one rank per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub ctx: GroupCtx,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    /// Every reachable configuration was visited.
    Exhausted,
    /// The state budget ran out first; the result is incomplete.
    BudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub top_reachable: bool,
    pub states_visited: usize,
    pub exploration: Exploration,
}

type GroupState = Vec<(usize, DcState)>;

fn canonical(mut s: GroupState) -> GroupState {
    s.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.cmp_key().cmp(&b.1.cmp_key()))
    });
    s
}

trait CmpKey {
    fn cmp_key(&self) -> (u8, u32, u32, &[u32], &[u32]);
}

impl CmpKey for DcState {
    fn cmp_key(&self) -> (u8, u32, u32, &[u32], &[u32]) {
        match self {
            DcState::Top => (0, 0, 0, &[], &[]),
            DcState::Live(l) => (1, l.signature, l.counter, &l.msgs, &l.observations),
        }
    }
}

/// Every outcome of one ordered interaction over all signature draws.
fn successors(spec: &GroupSpec, s: &GroupState, a: usize, b: usize) -> Vec<GroupState> {
    let mut out = Vec::new();
    let mut scripts: Vec<Vec<u64>> = vec![Vec::new()];
    while let Some(script) = scripts.pop() {
        let mut next = s.clone();
        let mut draw = ScriptedDraw::new(script.clone());
        let (lo, hi) = (a.min(b), a.max(b));
        let (left, right) = next.split_at_mut(hi);
        let (x, y) = (&mut left[lo], &mut right[0]);
        let (u, v) = if a < b { (x, y) } else { (y, x) };
        detect_collision_in(&spec.ctx, u.0, &mut u.1, v.0, &mut v.1, &mut draw);
        if let Some(&range) = draw.overflow.first() {
            for value in 1..=range {
                let mut longer = script.clone();
                longer.push(value);
                scripts.push(longer);
            }
        } else {
            out.push(next);
        }
    }
    out
}

/// Breadth-first search over all collision-detection configurations of one
/// group reachable from clean initialization, across every ordered pair and
/// every signature draw. Stops early once a `Top` is found.
pub fn explore_soundness(spec: &GroupSpec, budget: usize) -> SoundnessReport {
    let start: GroupState = spec
        .ranks
        .iter()
        .map(|&r| (r, DcState::Live(init_dc_in(&spec.ctx, r))))
        .collect();
    let start = canonical(start);
    let mut seen: HashSet<GroupState> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    let k = spec.ranks.len();
    while let Some(s) = queue.pop_front() {
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                for t in successors(spec, &s, a, b) {
                    if t.iter().any(|(_, d)| d.is_top()) {
                        return SoundnessReport {
                            top_reachable: true,
                            states_visited: seen.len() + 1,
                            exploration: Exploration::Exhausted,
                        };
                    }
                    let t = canonical(t);
                    if !seen.contains(&t) {
                        if seen.len() >= budget {
                            return SoundnessReport {
                                top_reachable: false,
                                states_visited: seen.len(),
                                exploration: Exploration::BudgetExceeded,
                            };
                        }
                        seen.insert(t.clone());
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    SoundnessReport {
        top_reachable: false,
        states_visited: seen.len(),
        exploration: Exploration::Exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::GroupSizes;

    fn view(gen: u8, prob: u32, rank: u32) -> AgentView {
        AgentView {
            role: Role::Verifying,
            rank,
            generation: gen,
            probation: prob,
            top: false,
        }
    }

    #[test]
    fn classify_examples() {
        let mut v = vec![view(2, 0, 1), view(2, 0, 2), view(3, 0, 3)];
        assert_eq!(classify_views(&v), HierarchyLevel::C2);
        v[2].generation = 2;
        v[0].probation = 4;
        assert_eq!(classify_views(&v), HierarchyLevel::C3);
        v[0].probation = 0;
        assert_eq!(classify_views(&v), HierarchyLevel::C5);
        v[1].rank = 1;
        assert_eq!(classify_views(&v), HierarchyLevel::C4);
        v[1].role = Role::Resetting;
        assert_eq!(classify_views(&v), HierarchyLevel::C0);
        v[1].role = Role::Ranking;
        assert_eq!(classify_views(&v), HierarchyLevel::C1);
    }

    #[test]
    fn surrogate_generation_window() {
        let v = vec![view(5, 0, 1), view(0, 9, 2), view(0, 0, 3)];
        assert!(surrogate_holds(&v, &[false, true, true]));
        assert!(!surrogate_holds(&v, &[false, false, true]));
        let v = vec![view(1, 0, 1), view(3, 0, 2)];
        assert!(!surrogate_holds(&v, &[true, true]));
    }

    fn shrunk(ranks: Vec<usize>, len: usize) -> GroupSpec {
        GroupSpec {
            ctx: GroupCtx::new(
                1..len + 1,
                GroupSizes {
                    sig_space: 2,
                    ids_per_rank: 2,
                    sig_refresh: 2,
                },
            ),
            ranks,
        }
    }

    #[test]
    fn shrunk_pair_is_sound() {
        let r = explore_soundness(&shrunk(vec![1, 2], 2), 1_000_000);
        assert_eq!(r.exploration, Exploration::Exhausted);
        assert!(!r.top_reachable);
        assert!(r.states_visited > 1);
    }

    #[test]
    fn planted_duplicate_reaches_top() {
        let r = explore_soundness(&shrunk(vec![1, 1], 2), 1_000_000);
        assert!(r.top_reachable);
    }

    #[test]
    fn single_agent_has_no_successors() {
        let r = explore_soundness(&shrunk(vec![1], 1), 1_000_000);
        assert_eq!(r.states_visited, 1);
        assert!(!r.top_reachable);
    }

    #[test]
    fn budget_overflow_is_reported() {
        let r = explore_soundness(&shrunk(vec![1, 2], 2), 1);
        assert_eq!(r.exploration, Exploration::BudgetExceeded);
    }
}
