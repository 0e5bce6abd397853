//! Uniform random scheduler and run driver.

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::orchestrator::{elect_leader_step, Configuration, Events};
use crate::params::Params;
use crate::randomness::{InteractionDraw, Stream};
use crate::trace::{AgentView, StepRecord, Trace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("population of {0} agents cannot interact; need at least 2")]
    TooSmall(usize),
}

/// Uniform ordered pair of distinct agent indices.
pub fn sample_pair(rng: &mut Stream, n: usize) -> Result<(usize, usize), EngineError> {
    if n < 2 {
        return Err(EngineError::TooSmall(n));
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    Ok((i, j))
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &mut b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &mut a[j])
    }
}

/// Apply the transition to the ordered pair `(i, j)`: protocol step, then
/// both agents flip their coins and harvest the partner's previous coin.
pub fn interact(
    config: &mut Configuration,
    params: &Params,
    rng: &mut Stream,
    i: usize,
    j: usize,
) -> StepRecord {
    let (u, v) = pair_mut(&mut config.agents, i, j);
    let before = [AgentView::of(u), AgentView::of(v)];
    let (cu, cv) = pair_mut(&mut config.coins, i, j);
    let events = {
        let mut draw = InteractionDraw {
            mode: params.rng_mode,
            stream: rng,
            coins: [&*cu, &*cv],
        };
        elect_leader_step(params, u, v, &mut draw)
    };
    let (bu, bv) = (cu.coin, cv.coin);
    cu.tick(bv);
    cv.tick(bu);
    config.interaction_count += 1;
    StepRecord {
        index: config.interaction_count,
        pair: (i, j),
        before,
        after: [AgentView::of(u), AgentView::of(v)],
        events,
    }
}

/// One scheduler step.
pub fn step(config: &mut Configuration, params: &Params, rng: &mut Stream) -> StepRecord {
    let (i, j) = sample_pair(rng, config.agents.len()).expect("population validated");
    interact(config, params, rng, i, j)
}

/// Incremental leader bookkeeping: the number of rank-1 verifiers and the
/// sum of their indices, so the unique leader is the sum when the count is 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct LeaderIndex {
    count: usize,
    sum: usize,
}

impl LeaderIndex {
    fn of(config: &Configuration) -> Self {
        let mut s = Self::default();
        for (i, a) in config.agents.iter().enumerate() {
            if a.rank() == Some(1) {
                s.count += 1;
                s.sum += i;
            }
        }
        s
    }

    fn update(&mut self, rec: &StepRecord) {
        let idx = [rec.pair.0, rec.pair.1];
        for s in 0..2 {
            let was = rec.before[s].is_verifier() && rec.before[s].rank == 1;
            let is = rec.after[s].is_verifier() && rec.after[s].rank == 1;
            if was && !is {
                self.count -= 1;
                self.sum -= idx[s];
            } else if is && !was {
                self.count += 1;
                self.sum += idx[s];
            }
        }
    }

    fn leader(&self) -> Option<usize> {
        (self.count == 1).then_some(self.sum)
    }
}

/// Running totals visible to stop predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub interactions: u64,
    pub leader: Option<usize>,
    /// Earliest `t` such that the leader has been constant since `t` and no
    /// full reset fired after `t`.
    pub stable_since: u64,
    pub full_resets: u64,
    pub soft_resets: u64,
}

impl Progress {
    /// Stabilization point if the leader exists and has held for `window`.
    pub fn stabilized(&self, window: u64) -> Option<u64> {
        (self.leader.is_some() && self.interactions - self.stable_since >= window)
            .then_some(self.stable_since)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunResult {
    pub total_interactions: u64,
    pub full_resets: u64,
    pub soft_resets: u64,
    pub stabilization_at: Option<u64>,
    /// Unique rank-1 verifier at the end of the run.
    pub final_leader: Option<usize>,
    /// First violation of each monitor: `(interaction index, monitor name)`.
    pub monitor_violations: Vec<(u64, String)>,
}

type Check<'a> = Box<dyn FnMut(&Configuration, &StepRecord) -> bool + 'a>;

/// Named read-only predicate evaluated after every step.
pub struct Monitor<'a> {
    pub name: String,
    check: Check<'a>,
}

impl<'a> Monitor<'a> {
    pub fn new(
        name: impl Into<String>,
        check: impl FnMut(&Configuration, &StepRecord) -> bool + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            check: Box::new(check),
        }
    }
}

type Stop<'a> = Box<dyn FnMut(&Configuration, &Progress) -> bool + 'a>;
type Observer<'a> = Box<dyn FnMut(&Configuration, &StepRecord) + 'a>;

/// Drives a configuration until a stop predicate holds or the horizon is hit.
pub struct Runner<'a> {
    pub horizon: u64,
    /// Confirmation window for `stabilization_at`; `None` leaves it unset.
    pub confirm_window: Option<u64>,
    monitors: Vec<Monitor<'a>>,
    stop: Option<Stop<'a>>,
    observer: Option<Observer<'a>>,
    trace: Option<&'a mut Trace>,
}

impl<'a> Runner<'a> {
    pub fn new(horizon: u64) -> Self {
        Self {
            horizon,
            confirm_window: None,
            monitors: Vec::new(),
            stop: None,
            observer: None,
            trace: None,
        }
    }

    pub fn confirm_window(mut self, w: u64) -> Self {
        self.confirm_window = Some(w);
        self
    }

    pub fn monitor(mut self, m: Monitor<'a>) -> Self {
        self.monitors.push(m);
        self
    }

    pub fn stop(mut self, f: impl FnMut(&Configuration, &Progress) -> bool + 'a) -> Self {
        self.stop = Some(Box::new(f));
        self
    }

    /// Stop once the leader has held for the confirmation window.
    pub fn stop_when_confirmed(self) -> Self {
        let w = self.confirm_window.expect("confirm window set first");
        self.stop(move |_, p| p.stabilized(w).is_some())
    }

    pub fn observe(mut self, f: impl FnMut(&Configuration, &StepRecord) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    /// Record every step into `trace`; it must already hold the start state.
    pub fn record(mut self, trace: &'a mut Trace) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn run(
        mut self,
        config: &mut Configuration,
        params: &Params,
        rng: &mut Stream,
    ) -> RunResult {
        let start = config.interaction_count;
        let mut leader = LeaderIndex::of(config);
        let mut progress = Progress {
            interactions: 0,
            leader: leader.leader(),
            stable_since: 0,
            full_resets: 0,
            soft_resets: 0,
        };
        let mut violated = vec![false; self.monitors.len()];
        let mut violations = Vec::new();
        loop {
            if let Some(stop) = self.stop.as_mut() {
                if stop(config, &progress) {
                    break;
                }
            }
            if progress.interactions >= self.horizon {
                break;
            }
            let rec = step(config, params, rng);
            leader.update(&rec);
            let now = leader.leader();
            progress.interactions += 1;
            let full = rec.count(Events::TRIGGER_RESET);
            progress.full_resets += full;
            progress.soft_resets += rec.count(Events::SOFT_RESET) + rec.count(Events::ADOPT);
            if full > 0 || now != progress.leader {
                progress.stable_since = progress.interactions;
            }
            progress.leader = now;
            for (k, m) in self.monitors.iter_mut().enumerate() {
                if !violated[k] && !(m.check)(config, &rec) {
                    violated[k] = true;
                    violations.push((rec.index - start, m.name.clone()));
                }
            }
            if let Some(obs) = self.observer.as_mut() {
                obs(config, &rec);
            }
            if let Some(t) = self.trace.as_mut() {
                t.push(&rec);
            }
        }
        RunResult {
            total_interactions: progress.interactions,
            full_resets: progress.full_resets,
            soft_resets: progress.soft_resets,
            stabilization_at: self.confirm_window.and_then(|w| progress.stabilized(w)),
            final_leader: progress.leader,
            monitor_violations: violations,
        }
    }
}

/// Stream for trial `trial` of an experiment with master seed `seed`.
pub fn trial_stream(seed: u64, trial: u64) -> Stream {
    Stream::seed_from_u64(trial_seed(seed, trial))
}

/// Per-trial seed: `seed + (trial + 1) * 0x9E3779B97F4A7C15` (wrapping).
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
