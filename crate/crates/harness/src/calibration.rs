//! One-off calibration of the acceptance constants at n = 8.
//!
//! Each constant is the largest 95th-percentile time over `r in {2, 4}`,
//! in units of `(n^2 / r) ln n`, times [`MARGIN`], rounded up. The frozen
//! values live in [`FROZEN`]; `calibrate` recomputes them for audit.

use serde::Serialize;
use ssle_core::Params;

use crate::experiment::{percentile, run_experiment, Experiment, StopRule};
use crate::measure::{default_confirm_window, ranking_completion, scale};
use crate::scenario::ScenarioKind;

pub const CALIBRATION_N: usize = 8;
pub const CALIBRATION_R: [usize; 2] = [2, 4];
pub const CALIBRATION_TRIALS: u64 = 50;
pub const CALIBRATION_SEED: u64 = 0x5EED_CA1B;
pub const MARGIN: f64 = 1.25;
/// Horizon for calibration runs, in units of the scale.
pub const CALIBRATION_HORIZON_UNITS: f64 = 2_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Stabilization from a clean trigger.
    pub c: f64,
    /// First error state after planting a duplicate rank.
    pub c_detect: f64,
    /// Every agent ranked from a fully dormant start.
    pub c_rank_accept: f64,
}

/// Values produced by [`calibrate`] with the settings above.
pub const FROZEN: Constants = Constants {
    c: 64.0,
    c_detect: 3.0,
    c_rank_accept: 16.0,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// `(r, stabilization, detection, ranking)` p95 ratios per r.
    pub ratios: Vec<(usize, f64, f64, f64)>,
    pub constants: Constants,
}

fn p95_ratio(mut times: Vec<u64>, trials: u64, unit: f64) -> f64 {
    assert_eq!(times.len() as u64, trials, "calibration run did not finish");
    times.sort_unstable();
    percentile(&times, 0.95).expect("non-empty") as f64 / unit
}

fn constant(ratio: f64) -> f64 {
    (ratio * MARGIN).ceil()
}

pub fn calibrate() -> Calibration {
    let mut ratios = Vec::new();
    for r in CALIBRATION_R {
        let p = Params::new(CALIBRATION_N, r).expect("valid calibration shape");
        let unit = scale(&p);
        let window = default_confirm_window(&p);
        let horizon = (CALIBRATION_HORIZON_UNITS * unit) as u64;
        let base = Experiment {
            scenario: ScenarioKind::CleanTriggered,
            params: p.clone(),
            trials: CALIBRATION_TRIALS,
            seed: CALIBRATION_SEED,
            horizon: horizon + window,
            confirm_window: window,
            stop: StopRule::Confirmed,
            events: false,
        };
        let stab = run_experiment(&base).expect("clean start");
        let stab: Vec<u64> = stab
            .rows
            .iter()
            .filter_map(|t| t.stabilization_at)
            .collect();
        let detect = run_experiment(&Experiment {
            scenario: ScenarioKind::DuplicateRanks(2),
            horizon,
            stop: StopRule::FirstTop,
            ..base
        })
        .expect("duplicate start");
        let detect: Vec<u64> = detect.rows.iter().filter_map(|t| t.first_top_at).collect();
        let rank: Vec<u64> = (0..CALIBRATION_TRIALS)
            .filter_map(|t| ranking_completion(&p, CALIBRATION_SEED, t, horizon).completed_at)
            .collect();
        ratios.push((
            r,
            p95_ratio(stab, CALIBRATION_TRIALS, unit),
            p95_ratio(detect, CALIBRATION_TRIALS, unit),
            p95_ratio(rank, CALIBRATION_TRIALS, unit),
        ));
    }
    let max = |f: fn(&(usize, f64, f64, f64)) -> f64| ratios.iter().map(f).fold(0.0, f64::max);
    let constants = Constants {
        c: constant(max(|x| x.1)),
        c_detect: constant(max(|x| x.2)),
        c_rank_accept: constant(max(|x| x.3)),
    };
    Calibration { ratios, constants }
}
