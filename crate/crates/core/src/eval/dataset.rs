use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Context {
    Text(String),
    Passages(Vec<String>),
}

impl Context {
    /// Full context text; passages are joined by newlines.
    pub fn text(&self) -> String {
        match self {
            Context::Text(t) => t.clone(),
            Context::Passages(p) => p.join("\n"),
        }
    }

    /// Byte range of each passage inside [`Context::text`].
    pub fn passage_ranges(&self) -> Vec<(usize, usize)> {
        match self {
            Context::Text(t) => vec![(0, t.len())],
            Context::Passages(p) => {
                let mut out = Vec::with_capacity(p.len());
                let mut start = 0;
                for passage in p {
                    out.push((start, start + passage.len()));
                    start += passage.len() + 1;
                }
                out
            }
        }
    }
}

/// Ground truth: `passage_index` (int), `sentence_set` (int list) or
/// `answer_span` (`{"start", "end"}` byte range of the context).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gold {
    pub kind: String,
    pub payload: Value,
}

impl Gold {
    pub fn sentence_set(ids: &[usize]) -> Self {
        Self { kind: "sentence_set".into(), payload: Value::from(ids.to_vec()) }
    }

    pub fn passage_index(index: usize) -> Self {
        Self { kind: "passage_index".into(), payload: Value::from(index) }
    }

    pub fn sentence_ids(&self) -> Option<Vec<usize>> {
        if self.kind != "sentence_set" {
            return None;
        }
        self.payload.as_array()?.iter().map(|v| v.as_u64().map(|x| x as usize)).collect()
    }

    pub fn passage(&self) -> Option<usize> {
        (self.kind == "passage_index").then(|| self.payload.as_u64().map(|x| x as usize)).flatten()
    }

    pub fn answer_span(&self) -> Option<(usize, usize)> {
        if self.kind != "answer_span" {
            return None;
        }
        let start = self.payload.get("start")?.as_u64()? as usize;
        let end = self.payload.get("end")?.as_u64()? as usize;
        (start <= end).then_some((start, end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalExample {
    pub id: String,
    pub query: String,
    pub context: Context,
    pub response: String,
    pub gold: Gold,
    /// Optional 1-based response-token indices to attribute; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
}

/// Parses one example per non-blank line.
pub fn parse_jsonl(text: &str) -> Result<Vec<EvalExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<EvalExample>> {
    parse_jsonl(&fs::read_to_string(path)?)
}

pub fn write_jsonl(examples: &[EvalExample], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
