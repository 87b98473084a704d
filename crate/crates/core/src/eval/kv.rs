use std::collections::HashSet;

use super::{Context, EvalExample, Gold};
use crate::error::{Error, Result};

/// Vigna's splitmix64.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Synthetic key-value retrieval example: `n_pairs` lines of `key: value`
/// with 16-hex-digit keys and values, one of which is asked for.
pub fn gen_kv(n_pairs: usize, seed: u64) -> Result<EvalExample> {
    if n_pairs < 2 {
        return Err(Error::InvalidArgument(format!("n_pairs must be at least 2, got {n_pairs}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut seen = HashSet::with_capacity(2 * n_pairs);
    let mut fresh = |rng: &mut SplitMix64| loop {
        let s = format!("{:016x}", rng.next_u64());
        if seen.insert(s.clone()) {
            break s;
        }
    };
    let pairs: Vec<(String, String)> = (0..n_pairs)
        .map(|_| {
            let k = fresh(&mut rng);
            let v = fresh(&mut rng);
            (k, v)
        })
        .collect();
    let gold = (rng.next_u64() % n_pairs as u64) as usize;
    let context = pairs.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n");
    Ok(EvalExample {
        id: format!("kv-{seed}"),
        query: format!("What is the value of key {}?", pairs[gold].0),
        context: Context::Text(context),
        response: pairs[gold].1.clone(),
        gold: Gold::sentence_set(&[gold]),
        targets: None,
    })
}
