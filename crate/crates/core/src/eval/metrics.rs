use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of positions where prediction equals gold.
pub fn metric_accuracy(predictions: &[usize], gold: &[usize]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: gold.len() });
    }
    if gold.is_empty() {
        return Err(Error::InsufficientData("accuracy over zero examples"));
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `|predicted ∩ gold|`.
    pub matches: usize,
}

/// Precision = matches / k, recall = matches / |gold|.
pub fn metric_pr_at_k(predicted_topk: &[usize], gold: &BTreeSet<usize>, k: usize) -> Result<MetricsAtK> {
    if gold.is_empty() {
        return Err(Error::InsufficientData("empty gold set"));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if predicted_topk.len() > k {
        return Err(Error::InvalidArgument(format!("{} predictions for k = {k}", predicted_topk.len())));
    }
    let predicted: BTreeSet<usize> = predicted_topk.iter().copied().collect();
    let matches = predicted.intersection(gold).count();
    let precision = matches as f64 / k as f64;
    let recall = matches as f64 / gold.len() as f64;
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(MetricsAtK { k, precision, recall, f1, matches })
}
