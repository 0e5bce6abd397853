//! Random values inside the transition function.
//!
//! Two backends exist. [`RngMode::TrueRandom`] draws from the run's seeded
//! stream. [`RngMode::SyntheticCoins`] derandomizes: every agent flips a coin on
//! each interaction, records its partner's coin in a cyclic buffer, and reads
//! the buffer as a binary number when it needs a value.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::params::RngMode;

/// The random stream type used by every run.
pub type Stream = ChaCha8Rng;

/// Which participant of an interaction is drawing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Initiator,
    Responder,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Initiator => Side::Responder,
            Side::Responder => Side::Initiator,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Initiator => 0,
            Side::Responder => 1,
        }
    }
}

/// Source of values in `[range] = {1, ..., range}` for one interaction.
pub trait Draw {
    fn draw(&mut self, side: Side, range: u64) -> u64;
}

/// Number of bits needed to address `[range]`, i.e. `ceil(log2 range)`, at least 1.
pub fn bits_for(range: u64) -> usize {
    if range <= 2 {
        1
    } else {
        (64 - (range - 1).leading_zeros()) as usize
    }
}

/// Per-agent synthetic coin: the agent's own coin, the last `len` harvested
/// partner coins, and the cyclic write position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoinState {
    pub coin: bool,
    pub coins: Vec<bool>,
    pub coin_count: usize,
}

impl CoinState {
    /// All-zero coin state sized for draws from `[range]`.
    pub fn new(range: u64) -> Self {
        Self {
            coin: false,
            coins: vec![false; bits_for(range)],
            coin_count: 0,
        }
    }

    /// One interaction: complement the coin, store the partner's coin at the
    /// current position and advance the cyclic counter.
    pub fn tick(&mut self, partner_coin: bool) {
        self.coin = !self.coin;
        self.coins[self.coin_count] = partner_coin;
        self.coin_count = (self.coin_count + 1) % self.coins.len();
    }

    /// The buffer read as a binary number (cell 0 is the least significant bit).
    pub fn value(&self) -> u64 {
        self.coins
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    /// Value in `[range]` by modular reduction of the buffer.
    pub fn draw(&self, range: u64) -> u64 {
        debug_assert!(range >= 1);
        self.value() % range + 1
    }
}

/// Draw one value from `[range]` for an agent under the given mode.
pub fn draw_uniform(coins: &CoinState, stream: &mut Stream, range: u64, mode: RngMode) -> u64 {
    if range <= 1 {
        return 1;
    }
    match mode {
        RngMode::TrueRandom => stream.gen_range(1..=range),
        RngMode::SyntheticCoins => coins.draw(range),
    }
}

/// The [`Draw`] used by the engine: both participants' coin buffers as they
/// were at the start of the interaction plus the run's stream.
pub struct InteractionDraw<'a> {
    pub mode: RngMode,
    pub stream: &'a mut Stream,
    pub coins: [&'a CoinState; 2],
}

impl Draw for InteractionDraw<'_> {
    fn draw(&mut self, side: Side, range: u64) -> u64 {
        draw_uniform(self.coins[side.index()], self.stream, range, self.mode)
    }
}

/// [`Draw`] over the stream alone, ignoring sides.
pub struct StreamDraw<'a>(pub &'a mut Stream);

impl Draw for StreamDraw<'_> {
    fn draw(&mut self, _side: Side, range: u64) -> u64 {
        if range <= 1 {
            1
        } else {
            self.0.gen_range(1..=range)
        }
    }
}

/// Replays a fixed sequence of outcomes; used to enumerate every branch of a
/// randomized transition. Draws past the end of the script return 1 and are
/// recorded in `overflow` so the caller can extend the script.
#[derive(Debug, Default, Clone)]
pub struct ScriptedDraw {
    pub script: Vec<u64>,
    pub position: usize,
    pub overflow: Vec<u64>,
}

impl ScriptedDraw {
    pub fn new(script: Vec<u64>) -> Self {
        Self {
            script,
            position: 0,
            overflow: Vec::new(),
        }
    }
}

impl Draw for ScriptedDraw {
    fn draw(&mut self, _side: Side, range: u64) -> u64 {
        let v = if let Some(&v) = self.script.get(self.position) {
            v.clamp(1, range.max(1))
        } else {
            self.overflow.push(range);
            1
        };
        self.position += 1;
        v
    }
}
