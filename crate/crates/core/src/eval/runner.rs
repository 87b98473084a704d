use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::EvalExample;
use super::metrics::{metric_pr_at_k, MetricsAtK};
use crate::corpus::{build_datastore, build_records, tokenize, TokenSeq};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::pipeline::{
    attribute_response, rank_sources, sentence_spans, spans_from_byte_ranges, AttributionParams, AttributionQuery,
    RankedSpan, Span, SpanKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub id: String,
    /// Id of the top-ranked span.
    pub predicted: usize,
    pub gold: Vec<usize>,
    pub correct: bool,
    pub pr: MetricsAtK,
    pub rankings: Vec<RankedSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub k: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub outcomes: Vec<ExampleOutcome>,
}

/// Source spans and the gold span ids for an example.
fn spans_and_gold(ex: &EvalExample, context: &TokenSeq) -> Result<(Vec<Span>, BTreeSet<usize>)> {
    let bad = |msg: String| Error::InvalidArgument(format!("example `{}`: {msg}", ex.id));
    match ex.gold.kind.as_str() {
        "passage_index" => {
            let spans = spans_from_byte_ranges(context, &ex.context.passage_ranges(), SpanKind::Passage);
            let g = ex.gold.passage().ok_or_else(|| bad("passage_index payload must be an integer".into()))?;
            if g >= spans.len() {
                return Err(bad(format!("passage {g} out of {}", spans.len())));
            }
            Ok((spans, BTreeSet::from([g])))
        }
        "sentence_set" => {
            let spans = sentence_spans(context);
            let ids = ex.gold.sentence_ids().ok_or_else(|| bad("sentence_set payload must be an integer list".into()))?;
            if let Some(&g) = ids.iter().find(|&&g| g >= spans.len()) {
                return Err(bad(format!("sentence {g} out of {}", spans.len())));
            }
            Ok((spans, ids.into_iter().collect()))
        }
        "answer_span" => {
            let (start, end) = ex.gold.answer_span().ok_or_else(|| bad("answer_span payload needs start <= end".into()))?;
            let gold: BTreeSet<usize> = context
                .tokens()
                .iter()
                .filter(|t| t.byte_start < end && t.byte_end > start)
                .map(|t| t.sentence_id)
                .collect();
            Ok((sentence_spans(context), gold))
        }
        other => Err(bad(format!("unknown gold kind `{other}`"))),
    }
}

/// Builds a store from the example's context, attributes the response, and
/// scores the top-`k_eval` spans against the gold.
pub fn evaluate_example<P: EmbeddingProvider + ?Sized>(
    ex: &EvalExample,
    provider: &P,
    params: &AttributionParams,
    k_eval: usize,
) -> Result<ExampleOutcome> {
    let context = tokenize(&ex.context.text());
    let (spans, gold) = spans_and_gold(ex, &context)?;
    let store = build_datastore(&build_records(&context), provider)?;
    let mut aq = AttributionQuery::new(ex.query.clone(), context, tokenize(&ex.response));
    if let Some(targets) = &ex.targets {
        aq = aq.with_targets(targets.clone())?;
    }
    let matrix = attribute_response(&store, provider, &aq, params)?;
    let rankings = rank_sources(&matrix, &spans, k_eval)?;
    let predicted = rankings.first().map(|r| r.score.span.id).ok_or(Error::InsufficientData("no spans to rank"))?;
    let ids: Vec<usize> = rankings.iter().map(|r| r.score.span.id).collect();
    let pr = metric_pr_at_k(&ids, &gold, k_eval)?;
    Ok(ExampleOutcome {
        id: ex.id.clone(),
        predicted,
        correct: gold.contains(&predicted),
        gold: gold.into_iter().collect(),
        pr,
        rankings,
    })
}

/// Examples run concurrently; aggregation is in input order.
pub fn evaluate_dataset<P: EmbeddingProvider + ?Sized>(
    examples: &[EvalExample],
    provider: &P,
    params: &AttributionParams,
    k_eval: usize,
) -> Result<EvalSummary> {
    if examples.is_empty() {
        return Err(Error::InsufficientData("empty dataset"));
    }
    let outcomes = examples
        .par_iter()
        .map(|ex| evaluate_example(ex, provider, params, k_eval))
        .collect::<Result<Vec<_>>>()?;
    let n = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let mean = |f: fn(&MetricsAtK) -> f64| outcomes.iter().map(|o| f(&o.pr)).sum::<f64>() / n as f64;
    Ok(EvalSummary {
        n,
        correct,
        accuracy: correct as f64 / n as f64,
        k: k_eval,
        mean_precision: mean(|m| m.precision),
        mean_recall: mean(|m| m.recall),
        mean_f1: mean(|m| m.f1),
        outcomes,
    })
}
