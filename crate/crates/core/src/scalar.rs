//! Numeric abstraction for the Shapley engine.
//!
//! Games and Shapley values are generic over [`Scalar`], so the same code runs
//! in `f64` for production and in [`BigRational`] when exact golden values are
//! needed.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub type BigRational = Ratio<BigInt>;

pub trait Scalar: Num + Signed + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug {
    fn from_count(n: u128) -> Self {
        Self::from_u128(n).expect("count representable in scalar")
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar")
    }
}

impl<T> Scalar for T where T: Num + Signed + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug {}

/// `C(n, k)` by cumulative ratios, `C(n, j + 1) = C(n, j) * (n - j) / (j + 1)`.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut c = T::one();
    for j in 0..k {
        c = c * T::from_usize_exact(n - j) / T::from_usize_exact(j + 1);
    }
    c
}

/// Exact `C(n, k)` in integers; `None` on overflow.
pub fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 0..k {
        // c * (n - j) is divisible by (j + 1) at every step
        c = c.checked_mul((n - j) as u128)? / (j as u128 + 1);
    }
    Some(c)
}
