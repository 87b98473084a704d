//! End-to-end attribution: response-token features, retrieval, Shapley
//! scoring and accumulation over context spans.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{render_tokens, Datastore, TokenSeq};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::retrieval::{query_top_m, CandidateSet, DEFAULT_GAMMA, DEFAULT_M};
use crate::shapley::{shapley_dp, shapley_k1, ShapleyResult, DEFAULT_WEIGHT_BITS};

/// Separator between the query and the response prefix in a feature.
pub const FEATURE_JOIN: &str = " ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionParams {
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub weight_bits: u32,
}

impl Default for AttributionParams {
    fn default() -> Self {
        Self { k: 1, m: DEFAULT_M, gamma: DEFAULT_GAMMA, weight_bits: DEFAULT_WEIGHT_BITS }
    }
}

impl AttributionParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("K and M must be positive".into()));
        }
        if self.k > self.m {
            return Err(Error::InvalidArgument(format!("K ({}) must not exceed M ({})", self.k, self.m)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// One attribution request. Response indices `t` are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionQuery {
    pub query_text: String,
    pub context: TokenSeq,
    pub response: TokenSeq,
    target_indices: Vec<usize>,
}

impl AttributionQuery {
    /// Targets every response token.
    pub fn new(query_text: impl Into<String>, context: TokenSeq, response: TokenSeq) -> Self {
        let target_indices = (1..=response.len()).collect();
        Self { query_text: query_text.into(), context, response, target_indices }
    }

    pub fn with_targets(mut self, targets: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = targets.iter().find(|&&t| t == 0 || t > self.response.len()) {
            return Err(Error::IndexOutOfBounds { index: bad, len: self.response.len() });
        }
        self.target_indices = targets;
        Ok(self)
    }

    pub fn target_indices(&self) -> &[usize] {
        &self.target_indices
    }
}

/// The query followed by response tokens `1..t-1`.
pub fn build_feature(query: &str, response: &TokenSeq, t: usize) -> Result<String> {
    if t == 0 || t > response.len() {
        return Err(Error::IndexOutOfBounds { index: t, len: response.len() });
    }
    let prefix = render_tokens(response.surfaces().take(t - 1));
    Ok(if prefix.is_empty() { query.to_owned() } else { format!("{query}{FEATURE_JOIN}{prefix}") })
}

fn response_label(response: &TokenSeq, t: usize) -> &str {
    &response.tokens()[t - 1].surface
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenAttribution {
    pub t: usize,
    pub feature: String,
    pub candidates: CandidateSet,
    pub shapley: ShapleyResult<f64>,
    /// Context position to Shapley value; positions outside the candidate set are 0.
    pub phi: BTreeMap<usize, f64>,
}

fn check_store<P: EmbeddingProvider + ?Sized>(store: &Datastore, provider: &P) -> Result<()> {
    if store.dim() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: store.dim(), got: provider.dim() });
    }
    Ok(())
}

fn score_candidates(t: usize, feature: String, query: &[f32], store: &Datastore, label: &str, params: &AttributionParams) -> Result<TokenAttribution> {
    let candidates = query_top_m(store, query, params.m, params.gamma, label)?;
    let game = candidates.game::<f64>();
    let shapley = if params.k == 1 { shapley_k1(&game) } else { shapley_dp(&game, params.k, params.weight_bits)? };
    let phi = candidates.candidates.iter().zip(&shapley.values).map(|(c, &v)| (c.position, v)).collect();
    Ok(TokenAttribution { t, feature, candidates, shapley, phi })
}

pub fn attribute_token<P: EmbeddingProvider + ?Sized>(
    store: &Datastore,
    provider: &P,
    aq: &AttributionQuery,
    t: usize,
    params: &AttributionParams,
) -> Result<TokenAttribution> {
    params.validate()?;
    check_store(store, provider)?;
    let feature = build_feature(&aq.query_text, &aq.response, t)?;
    let query = provider.embed(&feature)?;
    score_candidates(t, feature, &query, store, response_label(&aq.response, t), params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixParams {
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub weight_bits: u32,
    pub provider_id: String,
}

/// Shapley value for every (context position, response index) pair that was
/// scored; absent pairs are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    phi: BTreeMap<(usize, usize), f64>,
    targets: Vec<usize>,
    pub params: MatrixParams,
}

impl AttributionMatrix {
    pub fn get(&self, position: usize, t: usize) -> f64 {
        self.phi.get(&(position, t)).copied().unwrap_or(0.0)
    }

    /// Entries in ascending `(position, t)` order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.phi.iter().map(|(&k, &v)| (k, v))
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Attributes every target token. Features are embedded in one batch; the
/// per-token retrieval and Shapley work runs on the rayon pool and is merged
/// by `t`, so the result does not depend on thread count.
pub fn attribute_response<P: EmbeddingProvider + ?Sized>(
    store: &Datastore,
    provider: &P,
    aq: &AttributionQuery,
    params: &AttributionParams,
) -> Result<AttributionMatrix> {
    params.validate()?;
    check_store(store, provider)?;
    let targets = aq.target_indices().to_vec();
    let features = targets
        .iter()
        .map(|&t| build_feature(&aq.query_text, &aq.response, t))
        .collect::<Result<Vec<_>>>()?;
    let texts: Vec<&str> = features.iter().map(String::as_str).collect();
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != targets.len() {
        return Err(Error::Protocol(format!("provider returned {} vectors for {} features", vectors.len(), targets.len())));
    }
    let per_token = targets
        .par_iter()
        .zip(features.into_par_iter())
        .zip(vectors.par_iter())
        .map(|((&t, feature), v)| score_candidates(t, feature, v, store, response_label(&aq.response, t), params))
        .collect::<Result<Vec<_>>>()?;
    let mut phi = BTreeMap::new();
    for tok in per_token {
        for (pos, v) in tok.phi {
            phi.insert((pos, tok.t), v);
        }
    }
    Ok(AttributionMatrix {
        phi,
        targets,
        params: MatrixParams {
            k: params.k,
            m: params.m,
            gamma: params.gamma,
            weight_bits: params.weight_bits,
            provider_id: provider.provider_id().to_owned(),
        },
    })
}

/// `sum_{i in span} sum_{t in targets} phi(i, t)`, in ascending `(i, t)` order.
pub fn accumulate(matrix: &AttributionMatrix, span_positions: &BTreeSet<usize>, targets: &BTreeSet<usize>) -> f64 {
    matrix
        .entries()
        .filter(|((i, t), _)| span_positions.contains(i) && targets.contains(t))
        .fold(0.0, |acc, (_, v)| acc + v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanKind {
    Sentence,
    Passage,
    Custom,
}

/// A group of context positions scored as one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub kind: SpanKind,
    /// Sentence id, passage index, or caller-chosen id.
    pub id: usize,
    pub positions: Vec<usize>,
}

impl Span {
    pub fn start(&self) -> Option<usize> {
        self.positions.iter().min().copied()
    }

    pub fn end(&self) -> Option<usize> {
        self.positions.iter().max().map(|p| p + 1)
    }
}

pub fn sentence_spans(context: &TokenSeq) -> Vec<Span> {
    group_spans(context.tokens().iter().enumerate().map(|(i, t)| (t.sentence_id, i)), SpanKind::Sentence)
}

/// Sentence spans recovered from a store's entry metadata.
pub fn sentence_spans_from_store(store: &Datastore) -> Vec<Span> {
    group_spans(store.entries().iter().map(|e| (e.sentence_id, e.position)), SpanKind::Sentence)
}

fn group_spans(items: impl Iterator<Item = (usize, usize)>, kind: SpanKind) -> Vec<Span> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, pos) in items {
        groups.entry(id).or_default().push(pos);
    }
    groups
        .into_iter()
        .map(|(id, mut positions)| {
            positions.sort_unstable();
            Span { kind, id, positions }
        })
        .collect()
}

/// Spans for tokens falling inside each byte range of the context text.
pub fn spans_from_byte_ranges(context: &TokenSeq, ranges: &[(usize, usize)], kind: SpanKind) -> Vec<Span> {
    ranges
        .iter()
        .enumerate()
        .map(|(id, &(start, end))| Span {
            kind,
            id,
            positions: context
                .tokens()
                .iter()
                .enumerate()
                .filter(|(_, t)| t.byte_start >= start && t.byte_end <= end)
                .map(|(i, _)| i)
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanScore {
    pub span: Span,
    pub score: f64,
    pub per_target: BTreeMap<usize, f64>,
}

pub fn score_span(matrix: &AttributionMatrix, span: &Span) -> SpanScore {
    let positions: BTreeSet<usize> = span.positions.iter().copied().collect();
    let per_target: BTreeMap<usize, f64> = matrix
        .targets()
        .iter()
        .map(|&t| (t, accumulate(matrix, &positions, &BTreeSet::from([t]))))
        .collect();
    let score = per_target.values().fold(0.0, |acc, v| acc + v);
    SpanScore { span: span.clone(), score, per_target }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSpan {
    /// 1-based.
    pub rank: usize,
    pub score: SpanScore,
}

/// Top-`k` spans by score, ties going to the span that starts first.
pub fn rank_sources(matrix: &AttributionMatrix, spans: &[Span], k: usize) -> Result<Vec<RankedSpan>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut scored: Vec<SpanScore> = spans.iter().map(|s| score_span(matrix, s)).collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.span.start().unwrap_or(usize::MAX).cmp(&b.span.start().unwrap_or(usize::MAX)))
    });
    Ok(scored.into_iter().take(k).enumerate().map(|(i, score)| RankedSpan { rank: i + 1, score }).collect())
}
