use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::{fnv1a64, l2_normalize, EmbeddingProvider};
use crate::codec::{put_f32s, put_str_u32, Reader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TSEM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEntry {
    pub text: String,
    pub vector: Vec<f32>,
}

impl EmbeddingEntry {
    pub fn new(text: impl Into<String>, vector: Vec<f32>) -> Self {
        Self { text: text.into(), vector }
    }

    pub fn text_hash(&self) -> u64 {
        fnv1a64(self.text.as_bytes())
    }
}

/// Precomputed embeddings keyed by text (`.tsem` interchange format).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub entries: Vec<EmbeddingEntry>,
}

impl EmbeddingFile {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            if e.vector.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: e.vector.len() });
            }
            if !seen.insert(e.text.as_str()) {
                return Err(Error::DuplicateText(e.text.clone()));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let dim = u32::try_from(self.dim).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        let mut out = Vec::with_capacity(20 + self.entries.len() * (12 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.text_hash().to_le_bytes());
            put_str_u32(&mut out, &e.text, "text")?;
            put_f32s(&mut out, &e.vector);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported embedding file version {version}")));
        }
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format("zero embedding dimension".into()));
        }
        let count = r.u64("count")?;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for i in 0..count {
            let hash = r.u64("text hash")?;
            let text = r.str_u32("text")?;
            if fnv1a64(text.as_bytes()) != hash {
                return Err(Error::Format(format!("entry {i}: text hash does not match text")));
            }
            if !seen.insert(text.clone()) {
                return Err(Error::Format(format!("entry {i}: duplicate text {text:?}")));
            }
            let mut vector = Vec::with_capacity(dim);
            r.f32s(dim, &mut vector, "vector")?;
            entries.push(EmbeddingEntry { text, vector });
        }
        r.finish()?;
        Ok(Self { dim, entries })
    }
}

pub fn write_embedding_file(file: &EmbeddingFile, path: impl AsRef<Path>) -> Result<()> {
    let bytes = file.to_bytes()?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    EmbeddingFile::from_bytes(&fs::read(path)?)
}

/// Serves embeddings out of a loaded `.tsem` file.
#[derive(Debug, Clone)]
pub struct FileProvider {
    id: String,
    file: EmbeddingFile,
    index: HashMap<String, usize>,
    normalize: bool,
}

impl FileProvider {
    pub fn new(file: EmbeddingFile, id: impl Into<String>, normalize: bool) -> Self {
        let index = file.entries.iter().enumerate().map(|(i, e)| (e.text.clone(), i)).collect();
        Self { id: id.into(), file, index, normalize }
    }

    pub fn open(path: impl AsRef<Path>, normalize: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = read_embedding_file(path)?;
        Ok(Self::new(file, format!("file:{}", path.display()), normalize))
    }
}

impl EmbeddingProvider for FileProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.file.dim
    }

    fn normalized(&self) -> bool {
        self.normalize
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        texts
            .iter()
            .map(|&t| {
                let idx = *self.index.get(t).ok_or_else(|| Error::MissingText(t.to_owned()))?;
                let mut v = self.file.entries[idx].vector.clone();
                if self.normalize {
                    l2_normalize(&mut v);
                }
                Ok(v)
            })
            .collect()
    }
}
