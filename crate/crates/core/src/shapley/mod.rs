//! Exact Shapley values for the weighted K-nearest-neighbor utility.
//!
//! A [`Game`] is a list of players in distance-rank order (nearest first).
//! Each player carries a positive similarity weight and a flag telling
//! whether its token matches the target token. The utility of a coalition is
//! 1 when the signed weights of its `min(K, |S|)` nearest members sum to a
//! non-negative value, so the empty coalition has utility 1.

mod brute;
mod exact;
mod utility;

pub use brute::{shapley_bruteforce, MAX_BRUTE_FORCE_PLAYERS};
pub use exact::{
    g_count_table, shapley_dp, shapley_k1, tail_factors, DiscreteGame, GCountTable, DEFAULT_WEIGHT_BITS,
    MAX_WEIGHT_BITS, MIN_WEIGHT_BITS,
};
pub use utility::{flip_conditions, marginal_contribution, marginal_from_conditions, utility, FlipConditions};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Player<T> {
    pub weight: T,
    pub label_match: bool,
}

impl<T: Scalar> Player<T> {
    pub fn new(weight: T, label_match: bool) -> Self {
        Self { weight, label_match }
    }

    /// `+weight` for a matching token, `-weight` otherwise.
    pub fn signed_weight(&self) -> T {
        if self.label_match {
            self.weight.clone()
        } else {
            -self.weight.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game<T> {
    players: Vec<Player<T>>,
}

impl<T: Scalar> Game<T> {
    /// Players must be in rank order: strictly positive, non-increasing weights.
    pub fn new(players: Vec<Player<T>>) -> Result<Self> {
        for (i, p) in players.iter().enumerate() {
            if p.weight <= T::zero() {
                return Err(Error::InvalidArgument(format!("player {i} has non-positive weight {:?}", p.weight)));
            }
            if i > 0 && p.weight > players[i - 1].weight {
                return Err(Error::InvalidArgument(format!("player {i} is heavier than player {}", i - 1)));
            }
        }
        Ok(Self { players })
    }

    /// Equal unit weights; only the rank order matters.
    pub fn from_labels(labels: &[bool]) -> Self {
        Self { players: labels.iter().map(|&m| Player::new(T::one(), m)).collect() }
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn players(&self) -> &[Player<T>] {
        &self.players
    }

    pub fn player(&self, rank: usize) -> &Player<T> {
        &self.players[rank]
    }

    pub fn labels(&self) -> Vec<bool> {
        self.players.iter().map(|p| p.label_match).collect()
    }

    /// Utility of the grand coalition minus utility of the empty one.
    pub fn total_gain(&self, k: usize) -> T {
        let all: Vec<usize> = (0..self.len()).collect();
        indicator::<T>(utility(self, &all, k)) - T::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    K1Exact,
    Dp,
    BruteForce,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::K1Exact => "k1-exact",
            Method::Dp => "dp",
            Method::BruteForce => "brute-force",
        })
    }
}

/// Shapley values indexed by player rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyResult<T> {
    pub values: Vec<T>,
    pub k: usize,
    pub method: Method,
    /// `sum(values) - (v(all) - v(empty))`, summed in rank order.
    pub efficiency_gap: T,
}

impl<T: Scalar> ShapleyResult<T> {
    pub(crate) fn new(values: Vec<T>, k: usize, method: Method, gain: T) -> Self {
        let total = values.iter().fold(T::zero(), |acc, v| acc + v.clone());
        Self { efficiency_gap: total - gain, values, k, method }
    }
}

pub(crate) fn indicator<T: Scalar>(v: u8) -> T {
    if v == 0 {
        T::zero()
    } else {
        T::one()
    }
}
