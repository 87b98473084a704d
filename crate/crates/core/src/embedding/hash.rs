use super::EmbeddingProvider;
use crate::error::{Error, Result};

pub const MIN_HASH_DIM: usize = 16;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing of character 3-, 4- and 5-grams of `^text$`,
/// L2-normalized. The empty string maps to the zero vector.
pub fn hash_embed(text: &str, dim: usize) -> Vec<f32> {
    assert!(dim >= MIN_HASH_DIM, "hash_embed needs dim >= {MIN_HASH_DIM}");
    let mut counts = vec![0i32; dim];
    if !text.is_empty() {
        let padded: Vec<char> = std::iter::once('^').chain(text.chars()).chain(std::iter::once('$')).collect();
        let mut gram = String::new();
        for n in 3..=5 {
            for window in padded.windows(n) {
                gram.clear();
                gram.extend(window);
                let h = fnv1a64(gram.as_bytes());
                let slot = (h % dim as u64) as usize;
                counts[slot] += if h >> 63 == 0 { 1 } else { -1 };
            }
        }
    }
    let norm = counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    counts.iter().map(|&c| (f64::from(c) / norm) as f32).collect()
}

/// Model-free stand-in for a hidden-state encoder.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
    id: String,
}

impl HashProvider {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_HASH_DIM {
            return Err(Error::InvalidArgument(format!("hash dimension must be >= {MIN_HASH_DIM}, got {dim}")));
        }
        Ok(Self { dim, id: format!("hash:{dim}") })
    }
}

impl EmbeddingProvider for HashProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn normalized(&self) -> bool {
        true
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        Ok(texts.iter().map(|t| hash_embed(t, self.dim)).collect())
    }
}
