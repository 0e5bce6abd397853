use proptest::prelude::*;
use rand::SeedableRng;

use ssle_core::invariants::verify_transition_ok;
use ssle_core::randomness::StreamDraw;
use ssle_core::verify::{stable_verify_step, VerifyAction, VerifyState, GENERATIONS};
use ssle_core::{step, AgentState, Configuration, Events, Params, Stream};

const TRIALS: u64 = 100;
const WHP: usize = 95;

fn verifier(p: &Params, rank: usize, generation: u8, probation: u32) -> VerifyState {
    let mut s = VerifyState::entry(p, rank);
    s.generation = generation;
    s.probation = probation;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn transition_rules(
        ru in 1usize..=8,
        rv in 1usize..=8,
        gu in 0u8..GENERATIONS,
        gv in 0u8..GENERATIONS,
        pu in 0u32..4,
        pv in 0u32..4,
        warmup in 0usize..6,
        seed in any::<u64>(),
    ) {
        let p = Params::new(8, 4).unwrap();
        let mut rng = Stream::seed_from_u64(seed);
        let (mut u, mut v) = (verifier(&p, ru, gu, pu), verifier(&p, rv, gv, pv));
        // A few earlier exchanges so tables are not all at init.
        for _ in 0..warmup {
            let (mut a, mut b) = (u.clone(), v.clone());
            let out = stable_verify_step(&p, ru, &mut a, rv, &mut b, &mut StreamDraw(&mut rng));
            if out.actions != [VerifyAction::None; 2] {
                break;
            }
            a.probation = u.probation;
            b.probation = v.probation;
            u = a;
            v = b;
        }
        let (bu, bv) = (u.clone(), v.clone());
        let out = stable_verify_step(&p, ru, &mut u, rv, &mut v, &mut StreamDraw(&mut rng));
        prop_assert!(verify_transition_ok(&p, &bu, &u, out.actions[0]).is_ok(),
            "{:?}", verify_transition_ok(&p, &bu, &u, out.actions[0]));
        prop_assert!(verify_transition_ok(&p, &bv, &v, out.actions[1]).is_ok(),
            "{:?}", verify_transition_ok(&p, &bv, &v, out.actions[1]));
        if gu != gv {
            prop_assert!(out.dc.is_none());
        }
    }
}

#[test]
fn duplicate_rank_off_probation_soft_resets() {
    let p = Params::new(8, 4).unwrap();
    let mut u = verifier(&p, 2, 3, 0);
    let mut v = verifier(&p, 2, 3, 0);
    let mut rng = Stream::seed_from_u64(7);
    let out = stable_verify_step(&p, 2, &mut u, 2, &mut v, &mut StreamDraw(&mut rng));
    assert_eq!(out.actions, [VerifyAction::SoftReset; 2]);
    assert_eq!((u.generation, v.generation), (4, 4));
    assert_eq!(
        u,
        VerifyState {
            generation: 4,
            ..VerifyState::entry(&p, 2)
        }
    );
}

#[test]
fn duplicate_rank_on_probation_triggers() {
    let p = Params::new(8, 4).unwrap();
    let mut u = verifier(&p, 2, 0, 5);
    let mut v = verifier(&p, 2, 0, 0);
    let mut rng = Stream::seed_from_u64(7);
    let out = stable_verify_step(&p, 2, &mut u, 2, &mut v, &mut StreamDraw(&mut rng));
    assert_eq!(
        out.actions,
        [VerifyAction::TriggerReset, VerifyAction::SoftReset]
    );
}

#[test]
fn generation_gap_of_two_triggers() {
    let p = Params::new(8, 4).unwrap();
    let mut u = verifier(&p, 1, 0, 0);
    let mut v = verifier(&p, 2, 2, 0);
    let mut rng = Stream::seed_from_u64(7);
    let out = stable_verify_step(&p, 1, &mut u, 2, &mut v, &mut StreamDraw(&mut rng));
    assert!(out.actions.contains(&VerifyAction::TriggerReset));
}

#[test]
fn wraps_from_five_to_zero() {
    let p = Params::new(8, 4).unwrap();
    let mut u = verifier(&p, 1, 5, 0);
    let mut v = verifier(&p, 2, 0, 7);
    let mut rng = Stream::seed_from_u64(7);
    let out = stable_verify_step(&p, 1, &mut u, 2, &mut v, &mut StreamDraw(&mut rng));
    assert_eq!(out.actions[0], VerifyAction::Adopt);
    assert_eq!(u.generation, 0);
}

/// Interactions until every agent is in generation `g + 1`, or `None` if a
/// full reset fires first or the budget runs out.
fn epidemic(n: usize, seed: u64, budget: u64) -> Option<u64> {
    let p = Params::new(n, 2).unwrap();
    let g = 2;
    let mut agents: Vec<_> = (1..=n)
        .map(|k| AgentState::Verifying {
            rank: k,
            verify: verifier(&p, k, g, 0),
        })
        .collect();
    agents[0] = AgentState::Verifying {
        rank: 1,
        verify: verifier(&p, 1, g + 1, p.p_max),
    };
    let mut c = Configuration::new(agents, &p);
    let mut rng = Stream::seed_from_u64(seed);
    let done = |c: &Configuration| {
        c.agents
            .iter()
            .all(|a| a.verify().map(|v| v.generation) == Some(g + 1))
    };
    for t in 0..=budget {
        if done(&c) {
            return Some(t);
        }
        let rec = step(&mut c, &p, &mut rng);
        if rec.events.iter().any(|e| e.contains(Events::TRIGGER_RESET)) {
            return Some(t + 1);
        }
    }
    None
}

#[test]
fn soft_reset_epidemic_within_ten_n_ln_n() {
    for n in [8, 16, 32] {
        let budget = (10.0 * n as f64 * (n as f64).ln()).ceil() as u64;
        let hits = (0..TRIALS)
            .filter(|&s| epidemic(n, s, budget).is_some())
            .count();
        assert!(hits >= WHP, "n={n}: {hits}/{TRIALS} within {budget}");
    }
}
