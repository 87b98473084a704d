//! Polynomial-time Shapley values.
//!
//! For player `i` the Shapley value is `sign_i / N * sum_l G[i][l] / C(N-1, l)`
//! where `G[i][l]` counts size-`l` coalitions in which adding `i` flips the
//! vote. A coalition with at least `K` members flips only through its
//! `K-1` nearest members (sum `A`) and its `K`-th nearest member `k`, which
//! must rank after `i`. Every such configuration extends by any choice of
//! players ranked after `k`, so its total weight over sizes is the tail
//! factor `B[k] = sum_l C(N-1-k, l-K) / C(N-1, l)`. What remains is to count
//! `(K-1)`-subsets ranked before `k` by their signed-weight sum, done here
//! over integer weight levels.

use num_traits::{One, Zero};

use super::{indicator, utility, Game, Method, Player, ShapleyResult};
use crate::error::{Error, Result};
use crate::scalar::{binomial, binomial_u128, Scalar};

pub const DEFAULT_WEIGHT_BITS: u32 = 10;
pub const MIN_WEIGHT_BITS: u32 = 4;
pub const MAX_WEIGHT_BITS: u32 = 16;

/// Largest game for which [`g_count_table`] keeps exact integer counts.
const MAX_TABLE_PLAYERS: usize = 64;

/// `B[j] = sum_{l=K}^{N-1} C(N-1-j, l-K) / C(N-1, l)` for each rank `j`.
///
/// Consecutive terms are related by a ratio, so no binomial is formed beyond
/// `C(N-1, K)`.
pub fn tail_factors<T: Scalar>(n: usize, k: usize) -> Vec<T> {
    if n == 0 || k > n - 1 || k == 0 {
        return vec![T::zero(); n];
    }
    let b = n - 1;
    let first = T::one() / binomial::<T>(b, k);
    (0..n)
        .map(|j| {
            let after = b - j;
            let mut term = first.clone();
            let mut sum = first.clone();
            let (mut l, mut m) = (k, 0);
            while m < after && l < b {
                // C(after, m+1)/C(after, m) divided by C(b, l+1)/C(b, l)
                term = term * T::from_usize_exact(after - m) / T::from_usize_exact(m + 1)
                    * T::from_usize_exact(l + 1)
                    / T::from_usize_exact(b - l);
                sum = sum + term.clone();
                l += 1;
                m += 1;
            }
            sum
        })
        .collect()
}

fn finish<T: Scalar>(small: T, large: T, label_match: bool, n: usize) -> T {
    let v = (small + large) / T::from_usize_exact(n);
    if label_match {
        v
    } else {
        -v
    }
}

/// Exact Shapley values for `K = 1`. Only the rank order and labels matter:
/// a matching player gains from every coalition whose nearest member is a
/// farther non-matching player, a non-matching one loses on the empty
/// coalition and on those led by a farther matching player.
pub fn shapley_k1<T: Scalar>(game: &Game<T>) -> ShapleyResult<T> {
    let n = game.len();
    let tail = tail_factors::<T>(n, 1);
    let labels = game.labels();
    let values = (0..n)
        .map(|r| {
            let small = if labels[r] { T::zero() } else { T::one() };
            let large = (r + 1..n)
                .filter(|&j| labels[j] != labels[r])
                .fold(T::zero(), |acc, j| acc + tail[j].clone());
            finish(small, large, labels[r], n)
        })
        .collect();
    ShapleyResult::new(values, 1, Method::K1Exact, game.total_gain(1))
}

/// A game whose weights are integer levels in `1..=2^bits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteGame {
    bits: u32,
    /// Signed levels in rank order.
    levels: Vec<i64>,
}

impl DiscreteGame {
    /// Maps `|w| / max|w|` to `max(1, round(x * 2^bits))`.
    pub fn from_game<T: Scalar>(game: &Game<T>, bits: u32) -> Result<Self> {
        if !(MIN_WEIGHT_BITS..=MAX_WEIGHT_BITS).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "weight_bits must be in [{MIN_WEIGHT_BITS}, {MAX_WEIGHT_BITS}], got {bits}"
            )));
        }
        let scale = (1u64 << bits) as f64;
        let max = game.players().first().and_then(|p| p.weight.to_f64()).unwrap_or(1.0);
        let levels = game
            .players()
            .iter()
            .map(|p| {
                let x = p.weight.to_f64().unwrap_or(0.0) / max;
                let q = ((x * scale).round() as i64).clamp(1, 1 << bits);
                if p.label_match {
                    q
                } else {
                    -q
                }
            })
            .collect();
        Ok(Self { bits, levels })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// The discretized game with weights `level / 2^bits` (exact in binary floats).
    pub fn to_game<T: Scalar>(&self) -> Game<T> {
        let scale = T::from_u64(1u64 << self.bits).unwrap();
        let players = self
            .levels
            .iter()
            .map(|&q| Player::new(T::from_i64(q.abs()).unwrap() / scale.clone(), q > 0))
            .collect();
        Game::new(players).expect("levels are positive and non-increasing")
    }

    /// Counts flip coalitions for player `i`.
    ///
    /// Calls `on_kth(j, count)` for every candidate K-th member `j > i` with
    /// the number of `(K-1)`-subsets ranked before `j` (excluding `i`) whose
    /// sum puts `i` on the flipping side; returns, for each size `c < K`,
    /// the number of size-`c` coalitions that flip.
    fn flip_counts<C>(&self, i: usize, k: usize, mut on_kth: impl FnMut(usize, &C)) -> Vec<C>
    where
        C: Zero + One + Clone,
    {
        let n = self.len();
        let w = &self.levels;
        let q = w[i].abs();
        let matched = w[i] > 0;
        let sizes = k.min(n);
        let max_level = 1i64 << self.bits;
        let span = (sizes.saturating_sub(1) as i64) * max_level;
        let width = (2 * span + 1) as usize;
        let idx = |s: i64| (s + span) as usize;

        let in_large = |a: i64, kth: i64| if matched { a >= -q && a < -kth } else { a >= -kth && a < q };
        let in_small = |a: i64| if matched { a >= -q && a < 0 } else { a >= 0 && a < q };

        // counts[c][s]: subsets of size c among the players seen so far, by sum
        let mut counts = vec![vec![C::zero(); width]; sizes];
        counts[0][idx(0)] = C::one();
        for (j, &wj) in w.iter().enumerate() {
            if j == i {
                continue;
            }
            if j > i && k < n {
                let row = &counts[k - 1];
                let mut total = C::zero();
                for (s, c) in row.iter().enumerate() {
                    if !c.is_zero() && in_large(s as i64 - span, wj) {
                        total = total + c.clone();
                    }
                }
                if !total.is_zero() {
                    on_kth(j, &total);
                }
            }
            for c in (0..sizes.saturating_sub(1)).rev() {
                let (lo, hi) = counts.split_at_mut(c + 1);
                let (src, dst) = (&lo[c], &mut hi[0]);
                for (s, cnt) in src.iter().enumerate() {
                    if !cnt.is_zero() {
                        let t = (s as i64 + wj) as usize;
                        dst[t] = dst[t].clone() + cnt.clone();
                    }
                }
            }
        }
        counts
            .iter()
            .take(n)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(s, c)| !c.is_zero() && in_small(*s as i64 - span))
                    .fold(C::zero(), |acc, (_, c)| acc + c.clone())
            })
            .collect()
    }
}

/// Exact Shapley values of the weight-discretized game for any `K`, in
/// `O(N^2 * K^2 * 2^bits)` time.
pub fn shapley_dp<T: Scalar>(game: &Game<T>, k: usize, weight_bits: u32) -> Result<ShapleyResult<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let disc = DiscreteGame::from_game(game, weight_bits)?;
    let n = disc.len();
    let tail = tail_factors::<T>(n, k);
    let small_binom: Vec<T> = (0..k.min(n)).map(|c| binomial::<T>(n - 1, c)).collect();
    let values = (0..n)
        .map(|i| {
            let mut large = T::zero();
            let small_counts = disc.flip_counts::<T>(i, k, |j, cnt| {
                large = large.clone() + cnt.clone() * tail[j].clone();
            });
            let small = small_counts
                .into_iter()
                .zip(&small_binom)
                .fold(T::zero(), |acc, (cnt, b)| acc + cnt / b.clone());
            finish(small, large, disc.levels[i] > 0, n)
        })
        .collect();
    let discrete = disc.to_game::<T>();
    let all: Vec<usize> = (0..n).collect();
    let gain = indicator::<T>(utility(&discrete, &all, k)) - T::one();
    Ok(ShapleyResult::new(values, k, Method::Dp, gain))
}

/// `G[i][l]`: number of size-`l` coalitions of the other players in which
/// adding player `i` flips the discretized vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GCountTable {
    labels: Vec<bool>,
    counts: Vec<Vec<u128>>,
}

impl GCountTable {
    pub fn count(&self, i: usize, size: usize) -> u128 {
        self.counts[i][size]
    }

    pub fn row(&self, i: usize) -> &[u128] {
        &self.counts[i]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(2*match - 1) / N * sum_l G[i][l] / C(N-1, l)`.
    pub fn shapley<T: Scalar>(&self) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let sum = self.counts[i].iter().enumerate().fold(T::zero(), |acc, (l, &g)| {
                    acc + T::from_count(g) / binomial::<T>(n - 1, l)
                });
                let v = sum / T::from_usize_exact(n);
                if self.labels[i] {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }
}

pub fn g_count_table<T: Scalar>(game: &Game<T>, k: usize, weight_bits: u32) -> Result<GCountTable> {
    let n = game.len();
    if n > MAX_TABLE_PLAYERS {
        return Err(Error::TooLarge { players: n, max: MAX_TABLE_PLAYERS });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let disc = DiscreteGame::from_game(game, weight_bits)?;
    let counts = (0..n)
        .map(|i| {
            let mut row = vec![0u128; n];
            let small = disc.flip_counts::<u128>(i, k, |j, &cnt| {
                let after = n - 1 - j;
                for extra in 0..=after {
                    row[k + extra] += cnt * binomial_u128(after, extra).expect("n <= 64");
                }
            });
            for (c, cnt) in small.into_iter().enumerate() {
                row[c] += cnt;
            }
            row
        })
        .collect();
    Ok(GCountTable { labels: game.labels(), counts })
}
