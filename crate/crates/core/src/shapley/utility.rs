use super::Game;
use crate::scalar::Scalar;

fn sorted(subset: &[usize]) -> Vec<usize> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Weighted vote of the `min(k, |S|)` nearest members of `subset` (player
/// ranks): 1 when matching weight is at least non-matching weight.
pub fn utility<T: Scalar>(game: &Game<T>, subset: &[usize], k: usize) -> u8 {
    let total = sorted(subset)
        .into_iter()
        .take(k)
        .fold(T::zero(), |acc, r| acc + game.player(r).signed_weight());
    u8::from(total >= T::zero())
}

/// `v(S + {i}) - v(S)`.
pub fn marginal_contribution<T: Scalar>(game: &Game<T>, subset: &[usize], i: usize, k: usize) -> i8 {
    debug_assert!(!subset.contains(&i));
    let mut with = subset.to_vec();
    with.push(i);
    utility(game, &with, k) as i8 - utility(game, subset, k) as i8
}

/// The three conditions that decide whether adding player `i` flips the vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipConditions {
    /// `i` is among the `k` nearest of `S + {i}`.
    pub knn: bool,
    /// Adding `i` (matching) turns a losing vote into a winning one.
    pub zero_to_one: bool,
    /// Adding `i` (non-matching) turns a winning vote into a losing one.
    pub one_to_zero: bool,
}

pub fn flip_conditions<T: Scalar>(game: &Game<T>, subset: &[usize], i: usize, k: usize) -> FlipConditions {
    let s = sorted(subset);
    let weight_i = game.player(i).weight.clone();
    let knn = s.iter().filter(|&&r| r < i).count() < k;
    let zero = T::zero();
    if s.len() < k {
        let sum = s.iter().fold(T::zero(), |acc, &r| acc + game.player(r).signed_weight());
        FlipConditions {
            knn,
            zero_to_one: sum >= -weight_i.clone() && sum < zero,
            one_to_zero: sum >= zero && sum < weight_i,
        }
    } else {
        let head = s[..k - 1].iter().fold(T::zero(), |acc, &r| acc + game.player(r).signed_weight());
        let kth = game.player(s[k - 1]).signed_weight();
        FlipConditions {
            knn,
            zero_to_one: head >= -weight_i.clone() && head < -kth.clone(),
            one_to_zero: head >= -kth && head < weight_i,
        }
    }
}

/// Closed-form marginal contribution from the flip conditions.
pub fn marginal_from_conditions<T: Scalar>(game: &Game<T>, subset: &[usize], i: usize, k: usize) -> i8 {
    let c = flip_conditions(game, subset, i, k);
    match (game.player(i).label_match, c.knn) {
        (true, true) if c.zero_to_one => 1,
        (false, true) if c.one_to_zero => -1,
        _ => 0,
    }
}
