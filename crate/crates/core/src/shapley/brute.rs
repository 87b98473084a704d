use super::{Game, Method, ShapleyResult};
use crate::error::{Error, Result};
use crate::scalar::{binomial, Scalar};

pub const MAX_BRUTE_FORCE_PLAYERS: usize = 20;

fn utility_mask<T: Scalar>(game: &Game<T>, mask: u32, k: usize) -> bool {
    let mut total = T::zero();
    let mut taken = 0;
    let mut rest = mask;
    while rest != 0 && taken < k {
        let r = rest.trailing_zeros() as usize;
        total = total + game.player(r).signed_weight();
        taken += 1;
        rest &= rest - 1;
    }
    total >= T::zero()
}

/// Shapley values by enumerating every coalition: for each player, the
/// marginal contributions over all subsets of the others, weighted by
/// `1 / (N * C(N-1, |S|))`.
pub fn shapley_bruteforce<T: Scalar>(game: &Game<T>, k: usize) -> Result<ShapleyResult<T>> {
    let n = game.len();
    if n > MAX_BRUTE_FORCE_PLAYERS {
        return Err(Error::TooLarge { players: n, max: MAX_BRUTE_FORCE_PLAYERS });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let full = 1u32 << n;
    let v: Vec<bool> = (0..full).map(|mask| utility_mask(game, mask, k)).collect();
    let n_t = T::from_usize_exact(n);
    let values = (0..n)
        .map(|i| {
            let bit = 1u32 << i;
            // net marginal contribution, bucketed by coalition size
            let mut net = vec![0i64; n];
            for mask in (0..full).filter(|m| m & bit == 0) {
                let delta = i64::from(v[(mask | bit) as usize]) - i64::from(v[mask as usize]);
                net[mask.count_ones() as usize] += delta;
            }
            let sum = net.iter().enumerate().fold(T::zero(), |acc, (size, &d)| {
                acc + T::from_i64(d).expect("count fits scalar") / binomial::<T>(n - 1, size)
            });
            sum / n_t.clone()
        })
        .collect();
    let gain = if n == 0 { T::zero() } else { T::from_i64(i64::from(v[(full - 1) as usize]) - 1).unwrap() };
    Ok(ShapleyResult::new(values, k, Method::BruteForce, gain))
}
