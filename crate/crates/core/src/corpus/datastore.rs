use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::PrefixRecord;
use crate::codec::{put_f32s, put_str_u16, put_str_u32, Reader};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TKSH";
const VERSION: u32 = 1;
const EMBED_BATCH: usize = 256;
const NORM_TOLERANCE: f64 = 1e-6;

pub const PREFIX_POLICY: &str = "sentence_start";
pub const PREFIX_JOIN: &str = " ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatastoreEntry {
    pub value_token: String,
    pub position: usize,
    pub sentence_id: usize,
}

/// Key-value store of `(prefix embedding, next token)` pairs for one context.
/// Keys live in one flat row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Datastore {
    dim: usize,
    keys: Vec<f32>,
    entries: Vec<DatastoreEntry>,
    provider_id: String,
    normalized: bool,
    build_params: BTreeMap<String, String>,
}

impl Datastore {
    pub fn new(
        dim: usize,
        keys: Vec<f32>,
        entries: Vec<DatastoreEntry>,
        provider_id: impl Into<String>,
        normalized: bool,
        build_params: BTreeMap<String, String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("datastore dimension must be positive".into()));
        }
        if keys.len() != dim * entries.len() {
            return Err(Error::DimensionMismatch { expected: dim * entries.len(), got: keys.len() });
        }
        if normalized {
            for (i, key) in keys.chunks_exact(dim).enumerate() {
                let norm = key.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
                if norm != 0.0 && (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(Error::InvalidArgument(format!("key {i} has norm {norm} in a normalized store")));
                }
            }
        }
        Ok(Self { dim, keys, entries, provider_id: provider_id.into(), normalized, build_params })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn key(&self, index: usize) -> &[f32] {
        &self.keys[index * self.dim..(index + 1) * self.dim]
    }

    pub fn keys(&self) -> impl Iterator<Item = &[f32]> {
        self.keys.chunks_exact(self.dim)
    }

    pub fn entry(&self, index: usize) -> &DatastoreEntry {
        &self.entries[index]
    }

    pub fn entries(&self) -> &[DatastoreEntry] {
        &self.entries
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn build_params(&self) -> &BTreeMap<String, String> {
        &self.build_params
    }

    /// Number of distinct sentence ids covered by the store.
    pub fn sentence_count(&self) -> usize {
        self.entries.iter().map(|e| e.sentence_id + 1).max().unwrap_or(0)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dim).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        let params = serde_json::to_string(&self.build_params).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(64 + self.keys.len() * 4 + self.entries.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        out.push(u8::from(self.normalized));
        put_str_u16(&mut out, &self.provider_id, "provider_id")?;
        put_str_u32(&mut out, &params, "build_params")?;
        for (key, e) in self.keys().zip(&self.entries) {
            put_f32s(&mut out, key);
            put_str_u16(&mut out, &e.value_token, "value_token")?;
            let position = u32::try_from(e.position).map_err(|_| Error::Format("position exceeds u32".into()))?;
            let sentence = u32::try_from(e.sentence_id).map_err(|_| Error::Format("sentence id exceeds u32".into()))?;
            out.extend_from_slice(&position.to_le_bytes());
            out.extend_from_slice(&sentence.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported datastore version {version}")));
        }
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format("zero datastore dimension".into()));
        }
        let count = r.u64("count")?;
        let normalized = match r.u8("normalization flag")? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad normalization flag {other}"))),
        };
        let provider_id = r.str_u16("provider_id")?;
        let params = r.str_u32("build_params")?;
        let build_params: BTreeMap<String, String> =
            serde_json::from_str(&params).map_err(|e| Error::Format(format!("build_params: {e}")))?;
        let mut keys = Vec::new();
        let mut entries = Vec::new();
        for _ in 0..count {
            r.f32s(dim, &mut keys, "key")?;
            let value_token = r.str_u16("value_token")?;
            let position = r.u32("position")? as usize;
            let sentence_id = r.u32("sentence_id")? as usize;
            entries.push(DatastoreEntry { value_token, position, sentence_id });
        }
        r.finish()?;
        // bypasses the norm check: a loaded store is taken as written
        Ok(Self { dim, keys, entries, provider_id, normalized, build_params })
    }
}

/// Embeds every record's prefix and stores it against the record's token.
pub fn build_datastore<P: EmbeddingProvider + ?Sized>(records: &[PrefixRecord], provider: &P) -> Result<Datastore> {
    let dim = provider.dim();
    let mut keys = Vec::with_capacity(records.len() * dim);
    for chunk in records.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = chunk.iter().map(|r| r.prefix_text.as_str()).collect();
        let vectors = provider.embed_batch(&texts).map_err(|e| locate_failure(e, chunk))?;
        if vectors.len() != chunk.len() {
            return Err(Error::Protocol(format!("provider returned {} vectors for {} texts", vectors.len(), chunk.len())));
        }
        for (v, rec) in vectors.iter().zip(chunk) {
            if v.len() != dim {
                return Err(Error::Provider {
                    position: rec.position,
                    source: Box::new(Error::DimensionMismatch { expected: dim, got: v.len() }),
                });
            }
            keys.extend_from_slice(v);
        }
    }
    let entries = records
        .iter()
        .map(|r| DatastoreEntry { value_token: r.target_token.clone(), position: r.position, sentence_id: r.sentence_id })
        .collect();
    let mut params = BTreeMap::new();
    params.insert("prefix_policy".to_owned(), PREFIX_POLICY.to_owned());
    params.insert("prefix_join".to_owned(), PREFIX_JOIN.to_owned());
    params.insert("normalized".to_owned(), provider.normalized().to_string());
    Ok(Datastore {
        dim,
        keys,
        entries,
        provider_id: provider.provider_id().to_owned(),
        normalized: provider.normalized(),
        build_params: params,
    })
}

fn locate_failure(err: Error, chunk: &[PrefixRecord]) -> Error {
    let position = match &err {
        Error::MissingText(text) => chunk.iter().find(|r| &r.prefix_text == text).map(|r| r.position),
        _ => None,
    };
    Error::Provider { position: position.unwrap_or(chunk[0].position), source: Box::new(err) }
}

pub fn save_datastore(store: &Datastore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, store.to_bytes()?)?;
    Ok(())
}

pub fn load_datastore(path: impl AsRef<Path>) -> Result<Datastore> {
    Datastore::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_records, tokenize};
    use crate::embedding::{EmbeddingEntry, EmbeddingFile, FileProvider, HashProvider};

    const TEXT: &str = "The cat sat on the mat. It was warm there! Then rain came down hard today?";

    #[test]
    fn one_entry_per_token() {
        let seq = tokenize(TEXT);
        let records = build_records(&seq);
        let store = build_datastore(&records, &HashProvider::new(256).unwrap()).unwrap();
        assert_eq!(store.len(), seq.len());
        assert_eq!(store.dim(), 256);
        assert!(store.normalized());
        assert_eq!(store.build_params()["prefix_policy"], "sentence_start");
        for (i, e) in store.entries().iter().enumerate() {
            assert_eq!(e.position, i);
            assert_eq!(e.value_token, seq.tokens()[i].surface);
        }
    }

    #[test]
    fn deterministic_bytes() {
        let records = build_records(&tokenize(TEXT));
        let p = HashProvider::new(256).unwrap();
        let a = build_datastore(&records, &p).unwrap().to_bytes().unwrap();
        let b = build_datastore(&records, &p).unwrap().to_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_embedding_names_position() {
        let records = build_records(&tokenize("alpha beta gamma."));
        let entries = records
            .iter()
            .filter(|r| r.position != 2)
            .map(|r| EmbeddingEntry::new(r.prefix_text.clone(), vec![1.0; 4]))
            .collect();
        let provider = FileProvider::new(EmbeddingFile { dim: 4, entries }, "file:partial", false);
        match build_datastore(&records, &provider) {
            Err(Error::Provider { position, source }) => {
                assert_eq!(position, 2);
                assert!(matches!(*source, Error::MissingText(ref t) if t == "alpha beta"));
            }
            other => panic!("expected provider error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tksh");
        let store = build_datastore(&build_records(&tokenize(TEXT)), &HashProvider::new(64).unwrap()).unwrap();
        save_datastore(&store, &path).unwrap();
        assert_eq!(load_datastore(&path).unwrap(), store);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let store = build_datastore(&build_records(&tokenize(TEXT)), &HashProvider::new(32).unwrap()).unwrap();
        let bytes = store.to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Datastore::from_bytes(&bad), Err(Error::Format(_))));
        let mut ver = bytes.clone();
        ver[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(Datastore::from_bytes(&ver), Err(Error::Format(_))));
        // cut inside the last entry's key
        assert!(matches!(Datastore::from_bytes(&bytes[..bytes.len() - 20]), Err(Error::Format(_))));
        assert!(matches!(Datastore::from_bytes(&bytes[..3]), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_unnormalized_keys_when_flagged() {
        let e = DatastoreEntry { value_token: "x".into(), position: 0, sentence_id: 0 };
        assert!(Datastore::new(2, vec![3.0, 4.0], vec![e.clone()], "t", true, BTreeMap::new()).is_err());
        assert!(Datastore::new(2, vec![0.6, 0.8], vec![e.clone()], "t", true, BTreeMap::new()).is_ok());
        assert!(Datastore::new(2, vec![0.0, 0.0], vec![e], "t", true, BTreeMap::new()).is_ok());
    }
}
