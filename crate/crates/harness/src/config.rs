//! Run settings: a TOML file mirroring the command-line flags, with flags
//! taking precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use ssle_core::{Params, ParamsError, RngMode};

use crate::experiment::{Experiment, StopRule};
use crate::measure::default_confirm_window;
use crate::scenario::{ScenarioError, ScenarioKind};

pub const DEFAULT_TRIALS: u64 = 10;
pub const DEFAULT_SEED: u64 = 1;
/// Default horizon as a multiple of `(n^2 / r) ln n`, on top of the window.
pub const DEFAULT_HORIZON_FACTOR: f64 = 600.0;

/// Every setting a run accepts. All fields are optional so that a file and
/// the flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunSettings {
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub scenario: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub confirm_window: Option<u64>,
    pub rng_mode: Option<String>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Run every trial to the horizon instead of stopping once confirmed.
    pub full_horizon: Option<bool>,
    /// Lists used by `sweep`.
    pub n_list: Option<Vec<usize>>,
    pub r_list: Option<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    RngMode(String),
}

impl RunSettings {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    /// `self` with every field that `flags` sets replaced.
    pub fn overlay(self, flags: RunSettings) -> Self {
        Self {
            n: flags.n.or(self.n),
            r: flags.r.or(self.r),
            scenario: flags.scenario.or(self.scenario),
            trials: flags.trials.or(self.trials),
            seed: flags.seed.or(self.seed),
            horizon: flags.horizon.or(self.horizon),
            confirm_window: flags.confirm_window.or(self.confirm_window),
            rng_mode: flags.rng_mode.or(self.rng_mode),
            out: flags.out.or(self.out),
            trace: flags.trace.or(self.trace),
            full_horizon: flags.full_horizon.or(self.full_horizon),
            n_list: flags.n_list.or(self.n_list),
            r_list: flags.r_list.or(self.r_list),
        }
    }

    /// The experiment for population `n` and parameter `r`, filling unset
    /// fields with defaults.
    pub fn experiment(&self, n: usize, r: usize) -> Result<Experiment, ConfigError> {
        let rng_mode = match &self.rng_mode {
            Some(s) => s.parse().map_err(ConfigError::RngMode)?,
            None => RngMode::default(),
        };
        let params = Params::builder(n, r).rng_mode(rng_mode).build()?;
        let scenario: ScenarioKind = self
            .scenario
            .as_deref()
            .unwrap_or("clean-triggered")
            .parse()?;
        let window = self
            .confirm_window
            .unwrap_or_else(|| default_confirm_window(&params));
        let horizon = self.horizon.unwrap_or_else(|| {
            window + (DEFAULT_HORIZON_FACTOR * crate::measure::scale(&params)).ceil() as u64
        });
        Ok(Experiment {
            scenario,
            params,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            horizon,
            confirm_window: window,
            stop: if self.full_horizon.unwrap_or(false) {
                StopRule::Horizon
            } else {
                StopRule::Confirmed
            },
            events: self.trace.is_some(),
        })
    }

    /// The single experiment of a `run`.
    pub fn single(&self) -> Result<Experiment, ConfigError> {
        self.experiment(
            self.n.ok_or(ConfigError::Missing("n"))?,
            self.r.ok_or(ConfigError::Missing("r"))?,
        )
    }

    /// Cartesian product of the n and r lists for `sweep`; a scalar `n` or
    /// `r` stands in for a missing list. Pairs outside `1 <= r <= n/2` are skipped.
    pub fn sweep_pairs(&self) -> Result<Vec<(usize, usize)>, ConfigError> {
        let ns = self
            .n_list
            .clone()
            .or(self.n.map(|n| vec![n]))
            .ok_or(ConfigError::Missing("n-list"))?;
        let rs = self
            .r_list
            .clone()
            .or(self.r.map(|r| vec![r]))
            .ok_or(ConfigError::Missing("r-list"))?;
        Ok(ns
            .iter()
            .flat_map(|&n| rs.iter().map(move |&r| (n, r)))
            .filter(|&(n, r)| r >= 1 && r <= n / 2)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunSettings =
            toml::from_str("n = 8\nr = 2\nseed = 5\nscenario = \"fully-dormant\"").unwrap();
        let flags = RunSettings {
            seed: Some(9),
            ..Default::default()
        };
        let s = file.overlay(flags);
        assert_eq!(s.seed, Some(9));
        assert_eq!(s.n, Some(8));
        let e = s.single().unwrap();
        assert_eq!(e.scenario, ScenarioKind::FullyDormant);
        assert_eq!(e.seed, 9);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<RunSettings>("n = 8\nbogus = 1").is_err());
    }

    #[test]
    fn sweep_product() {
        let s: RunSettings = toml::from_str("n-list = [8, 16]\nr-list = [2, 4, 16]").unwrap();
        assert_eq!(
            s.sweep_pairs().unwrap(),
            vec![(8, 2), (8, 4), (16, 2), (16, 4)]
        );
    }
}
