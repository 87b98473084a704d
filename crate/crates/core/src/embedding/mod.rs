//! Sources of prefix embeddings: the function mapping a prefix text to a key
//! vector.

mod file;
mod hash;
mod http;

use std::fmt;
use std::str::FromStr;

pub use file::{read_embedding_file, write_embedding_file, EmbeddingEntry, EmbeddingFile, FileProvider};
pub use hash::{fnv1a64, hash_embed, HashProvider, MIN_HASH_DIM};
pub use http::{HttpProvider, EMBED_URL_ENV};

use crate::error::{Error, Result};

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Whether returned vectors are L2-normalized (the zero vector excepted).
    fn normalized(&self) -> bool;

    /// One vector per input text, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>>;

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or_else(|| Error::Protocol("provider returned no vector".into()))
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn normalized(&self) -> bool {
        (**self).normalized()
    }
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        (**self).embed_batch(texts)
    }
}

/// Scales `v` to unit L2 norm in place; the zero vector is left untouched.
pub fn l2_normalize(v: &mut [f32]) {
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

/// Parsed `hash:<dim>`, `file:<path>` or `http:<url>` provider selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Hash { dim: usize },
    File { path: String },
    /// `None` means "take the URL from the environment".
    Http { url: Option<String> },
}

impl ProviderSpec {
    pub fn open(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Hash { dim } => Box::new(HashProvider::new(*dim)?),
            ProviderSpec::File { path } => Box::new(FileProvider::open(path, true)?),
            ProviderSpec::Http { url } => {
                let url = match url {
                    Some(u) => u.clone(),
                    None => std::env::var(EMBED_URL_ENV)
                        .map_err(|_| Error::InvalidArgument(format!("http provider needs a URL or ${EMBED_URL_ENV}")))?,
                };
                Box::new(HttpProvider::connect(&url)?)
            }
        })
    }
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "hash" => {
                let dim = rest
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad hash dimension in {s:?}")))?;
                if dim < MIN_HASH_DIM {
                    return Err(Error::InvalidArgument(format!("hash dimension must be >= {MIN_HASH_DIM}")));
                }
                Ok(ProviderSpec::Hash { dim })
            }
            "file" if !rest.is_empty() => Ok(ProviderSpec::File { path: rest.to_owned() }),
            "http" if rest.is_empty() => Ok(ProviderSpec::Http { url: None }),
            // "http://host:port" arrives as kind "http" with rest "//host:port"
            "http" if rest.starts_with("//") => Ok(ProviderSpec::Http { url: Some(s.to_owned()) }),
            "http" => Ok(ProviderSpec::Http { url: Some(rest.to_owned()) }),
            _ => Err(Error::InvalidArgument(format!("unknown provider {s:?} (hash:<dim> | file:<path> | http:<url>)"))),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Hash { dim } => write!(f, "hash:{dim}"),
            ProviderSpec::File { path } => write!(f, "file:{path}"),
            ProviderSpec::Http { url: Some(u) } => write!(f, "http:{u}"),
            ProviderSpec::Http { url: None } => write!(f, "http"),
        }
    }
}
