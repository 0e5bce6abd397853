//! Self-stabilizing leader election by ranking, simulated under the uniform
//! random pairwise scheduler.
//!
//! Agents cycle through three roles. Resetters broadcast a full reset and
//! then wake up as rankers; rankers elect a sheriff, distribute labels and
//! derive ranks; verifiers run collision detection on their ranks and fall
//! back to a soft or a full reset when a collision shows up. The leader is
//! the unique verifier of rank 1.

pub mod bootstrap;
pub mod collision;
pub mod engine;
pub mod invariants;
pub mod oracle;
pub mod orchestrator;
pub mod params;
pub mod randomness;
pub mod ranking;
pub mod reset;
pub mod trace;
pub mod verify;

pub use collision::{DcLive, DcState, GroupCtx, GroupPartition};
pub use engine::{sample_pair, step, Monitor, Progress, RunResult, Runner};
pub use oracle::{classify, HierarchyLevel};
pub use orchestrator::{elect_leader_step, AgentState, Configuration, Events, Role};
pub use params::{Multipliers, Params, ParamsError, RngMode};
pub use randomness::{CoinState, Stream};
pub use trace::{AgentView, StepRecord, Trace};
