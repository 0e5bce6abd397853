//! Population and protocol constants.
//!
//! Every timer cap and space size used by the transition function is derived
//! here from `(n, r)` and a small set of tunable multipliers. All logarithms are
//! natural and every derived cap is rounded up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::GroupPartition;

/// Fixed multiplier of the reset propagation cap, `rMax = ceil(60 ln n)`.
pub const RESET_PROPAGATION_FACTOR: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("trade-off parameter r={r} must satisfy 1 <= r <= n/2 (n={n})")]
    TradeOffOutOfRange { n: usize, r: usize },
    #[error("label pool too small: r * labelPool = {total} must exceed n = {n}")]
    LabelPoolTooSmall { total: u64, n: usize },
    #[error("{name} must be at least {min}, got {value}")]
    CapTooSmall {
        name: &'static str,
        min: u64,
        value: u64,
    },
    #[error("multiplier {name} must be finite and positive, got {value}")]
    BadMultiplier { name: &'static str, value: f64 },
}

/// How agents obtain random values inside the transition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RngMode {
    /// Draws come from the run's seeded pseudo-random stream.
    #[default]
    TrueRandom,
    /// Draws are assembled from coin bits harvested from interaction partners.
    SyntheticCoins,
}

impl RngMode {
    pub fn name(self) -> &'static str {
        match self {
            RngMode::TrueRandom => "true-random",
            RngMode::SyntheticCoins => "synthetic-coins",
        }
    }
}

impl std::str::FromStr for RngMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true-random" => Ok(RngMode::TrueRandom),
            "synthetic-coins" => Ok(RngMode::SyntheticCoins),
            other => Err(format!(
                "unknown rng mode `{other}`; expected true-random or synthetic-coins"
            )),
        }
    }
}

/// Multipliers in front of the asymptotic timer and pool sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Multipliers {
    /// `cMax = ceil(countdown * (n/r) * ln n)`
    pub countdown: f64,
    /// `pMax = ceil(probation * (n/r) * ln n)`
    pub probation: f64,
    /// signature refresh period `ceil(signature * ln r_g)`
    pub signature: f64,
    /// `sleepMax = ceil(sleep * ln n)`
    pub sleep: f64,
    /// bootstrap election timer `ceil(election * ln n)`
    pub election: f64,
    /// `dMax = ceil(delay * ln n)`
    pub delay: f64,
    /// per-deputy label pool `ceil(pool * n/r)`, must exceed 1
    pub pool: f64,
}

impl Default for Multipliers {
    fn default() -> Self {
        Self {
            countdown: 40.0,
            probation: 40.0,
            signature: 8.0,
            sleep: 20.0,
            election: 15.0,
            delay: 4.0,
            pool: 2.0,
        }
    }
}

/// Sizes used by collision detection inside one rank group of size `r_g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupSizes {
    /// Range of signatures and message contents, `[sig_space]`.
    pub sig_space: u32,
    /// Circulating message IDs per governing rank, `[ids_per_rank]`.
    pub ids_per_rank: u32,
    /// Interactions between signature resamples.
    pub sig_refresh: u32,
}

/// Optional overrides of the per-group collision-detection sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupOverrides {
    pub sig_space: Option<u32>,
    pub ids_per_rank: Option<u32>,
    pub sig_refresh: Option<u32>,
}

/// All constants of one protocol instance. Construct with [`Params::new`] or
/// [`Params::builder`]; fields are public for reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub n: usize,
    pub r: usize,
    pub multipliers: Multipliers,
    /// Ranking countdown cap.
    pub c_max: u32,
    /// Probation timer cap.
    pub p_max: u32,
    /// Reset propagation cap.
    pub r_max: u32,
    /// Dormancy delay cap.
    pub d_max: u32,
    /// Sleep timer cap.
    pub sleep_max: u32,
    /// Bootstrap election timer.
    pub le_count: u32,
    /// Labels per deputy.
    pub label_pool: u32,
    /// Bootstrap identifier range `[id_space]`.
    pub id_space: u64,
    pub overrides: GroupOverrides,
    pub rng_mode: RngMode,
    pub partition: GroupPartition,
}

fn ceil_cap(x: f64) -> u32 {
    let c = x.ceil();
    if c >= u32::MAX as f64 {
        u32::MAX
    } else {
        c as u32
    }
}

impl Params {
    /// Default parameters for a population of `n` agents with trade-off `r`.
    pub fn new(n: usize, r: usize) -> Result<Self, ParamsError> {
        Self::builder(n, r).build()
    }

    pub fn builder(n: usize, r: usize) -> ParamsBuilder {
        ParamsBuilder {
            n,
            r,
            multipliers: Multipliers::default(),
            overrides: GroupOverrides::default(),
            rng_mode: RngMode::default(),
            caps: CapOverrides::default(),
        }
    }

    pub fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// Collision-detection sizes for a group of `group_len` ranks.
    pub fn group_sizes(&self, group_len: usize) -> GroupSizes {
        let g = group_len.max(1) as u64;
        let sig_space = self
            .overrides
            .sig_space
            .unwrap_or_else(|| g.pow(5).clamp(2, u32::MAX as u64) as u32);
        let ids_per_rank = self
            .overrides
            .ids_per_rank
            .unwrap_or_else(|| (2 * g * g).min(u32::MAX as u64) as u32);
        let sig_refresh = self
            .overrides
            .sig_refresh
            .unwrap_or_else(|| ceil_cap(self.multipliers.signature * (g as f64).ln()).max(1));
        GroupSizes {
            sig_space,
            ids_per_rank,
            sig_refresh,
        }
    }

    /// Largest range any agent ever draws from; sizes the synthetic coin array.
    pub fn max_draw_range(&self) -> u64 {
        let sig = self
            .partition
            .blocks()
            .map(|b| self.group_sizes(b.len()).sig_space as u64)
            .max()
            .unwrap_or(2);
        sig.max(self.id_space)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CapOverrides {
    c_max: Option<u32>,
    p_max: Option<u32>,
    r_max: Option<u32>,
    d_max: Option<u32>,
    sleep_max: Option<u32>,
    le_count: Option<u32>,
    label_pool: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct ParamsBuilder {
    n: usize,
    r: usize,
    multipliers: Multipliers,
    overrides: GroupOverrides,
    rng_mode: RngMode,
    caps: CapOverrides,
}

impl ParamsBuilder {
    pub fn multipliers(mut self, m: Multipliers) -> Self {
        self.multipliers = m;
        self
    }

    pub fn group_overrides(mut self, o: GroupOverrides) -> Self {
        self.overrides = o;
        self
    }

    pub fn rng_mode(mut self, mode: RngMode) -> Self {
        self.rng_mode = mode;
        self
    }

    pub fn c_max(mut self, v: u32) -> Self {
        self.caps.c_max = Some(v);
        self
    }

    pub fn p_max(mut self, v: u32) -> Self {
        self.caps.p_max = Some(v);
        self
    }

    pub fn r_max(mut self, v: u32) -> Self {
        self.caps.r_max = Some(v);
        self
    }

    pub fn d_max(mut self, v: u32) -> Self {
        self.caps.d_max = Some(v);
        self
    }

    pub fn sleep_max(mut self, v: u32) -> Self {
        self.caps.sleep_max = Some(v);
        self
    }

    pub fn le_count(mut self, v: u32) -> Self {
        self.caps.le_count = Some(v);
        self
    }

    pub fn label_pool(mut self, v: u32) -> Self {
        self.caps.label_pool = Some(v);
        self
    }

    pub fn build(self) -> Result<Params, ParamsError> {
        let Self {
            n,
            r,
            multipliers: m,
            overrides,
            rng_mode,
            caps,
        } = self;
        if n < 2 {
            return Err(ParamsError::PopulationTooSmall(n));
        }
        if r < 1 || r > n / 2 {
            return Err(ParamsError::TradeOffOutOfRange { n, r });
        }
        for (name, value) in [
            ("countdown", m.countdown),
            ("probation", m.probation),
            ("signature", m.signature),
            ("sleep", m.sleep),
            ("election", m.election),
            ("delay", m.delay),
            ("pool", m.pool),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ParamsError::BadMultiplier { name, value });
            }
        }
        let ln_n = (n as f64).ln();
        let ratio = n as f64 / r as f64;
        let params = Params {
            n,
            r,
            multipliers: m,
            c_max: caps
                .c_max
                .unwrap_or_else(|| ceil_cap(m.countdown * ratio * ln_n)),
            p_max: caps
                .p_max
                .unwrap_or_else(|| ceil_cap(m.probation * ratio * ln_n)),
            r_max: caps
                .r_max
                .unwrap_or_else(|| ceil_cap(RESET_PROPAGATION_FACTOR * ln_n)),
            d_max: caps.d_max.unwrap_or_else(|| ceil_cap(m.delay * ln_n)),
            sleep_max: caps.sleep_max.unwrap_or_else(|| ceil_cap(m.sleep * ln_n)),
            le_count: caps.le_count.unwrap_or_else(|| ceil_cap(m.election * ln_n)),
            label_pool: caps.label_pool.unwrap_or_else(|| ceil_cap(m.pool * ratio)),
            id_space: (n as u64).pow(3),
            overrides,
            rng_mode,
            partition: GroupPartition::new(n, r),
        };
        for (name, value) in [
            ("cMax", params.c_max),
            ("pMax", params.p_max),
            ("rMax", params.r_max),
            ("dMax", params.d_max),
            ("sleepMax", params.sleep_max),
            ("leCount", params.le_count),
            ("labelPool", params.label_pool),
        ] {
            if value < 1 {
                return Err(ParamsError::CapTooSmall {
                    name,
                    min: 1,
                    value: value as u64,
                });
            }
        }
        let total = r as u64 * params.label_pool as u64;
        if total <= n as u64 {
            return Err(ParamsError::LabelPoolTooSmall { total, n });
        }
        if let Some(s) = overrides.sig_space {
            if s < 2 {
                return Err(ParamsError::CapTooSmall {
                    name: "sigSpace",
                    min: 2,
                    value: s as u64,
                });
            }
        }
        for (name, v) in [
            ("idsPerRank", overrides.ids_per_rank),
            ("sigRefresh", overrides.sig_refresh),
        ] {
            if v == Some(0) {
                return Err(ParamsError::CapTooSmall {
                    name,
                    min: 1,
                    value: 0,
                });
            }
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_at_n8_r2() {
        let p = Params::new(8, 2).unwrap();
        let ln8 = 8f64.ln();
        assert_eq!(p.c_max, (40.0 * 4.0 * ln8).ceil() as u32);
        assert_eq!(p.p_max, (40.0 * 4.0 * ln8).ceil() as u32);
        assert_eq!(p.r_max, (60.0 * ln8).ceil() as u32);
        assert_eq!(p.r_max, 125);
        assert_eq!(p.d_max, 9);
        assert_eq!(p.label_pool, 8);
        assert_eq!(p.id_space, 512);
        let g = p.group_sizes(2);
        assert_eq!(g.sig_space, 32);
        assert_eq!(g.ids_per_rank, 8);
        assert_eq!(g.sig_refresh, 6);
    }

    #[test]
    fn rejects_bad_tradeoff() {
        assert!(matches!(
            Params::new(8, 5),
            Err(ParamsError::TradeOffOutOfRange { .. })
        ));
        assert!(matches!(
            Params::new(8, 0),
            Err(ParamsError::TradeOffOutOfRange { .. })
        ));
        assert!(matches!(
            Params::new(1, 1),
            Err(ParamsError::PopulationTooSmall(1))
        ));
    }

    #[test]
    fn rejects_small_label_pool() {
        let err = Params::builder(8, 2).label_pool(4).build().unwrap_err();
        assert_eq!(err, ParamsError::LabelPoolTooSmall { total: 8, n: 8 });
    }

    #[test]
    fn singleton_group_keeps_two_signatures() {
        let p = Params::new(2, 1).unwrap();
        assert_eq!(p.group_sizes(1).sig_space, 2);
        assert!(p.group_sizes(1).sig_refresh >= 1);
    }
}
