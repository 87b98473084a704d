use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::pipeline::{AttributionMatrix, RankedSpan, FEATURE_JOIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub gamma: f64,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanEntry {
    pub span_start: usize,
    /// Exclusive.
    pub span_end: usize,
    pub score: f64,
    pub rank: usize,
    pub span_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPhi {
    pub pos: usize,
    pub t: usize,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub feature_join: String,
    pub weight_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub params: ReportParams,
    pub targets: Vec<usize>,
    pub span_scores: Vec<SpanEntry>,
    pub token_phi: Vec<TokenPhi>,
    pub metrics: Value,
    pub meta: ReportMeta,
}

impl Report {
    /// Zero entries of the matrix are kept so every retrieved position shows up.
    pub fn new(matrix: &AttributionMatrix, rankings: &[RankedSpan], metrics: Value) -> Self {
        let p = &matrix.params;
        Self {
            params: ReportParams { k: p.k, m: p.m, gamma: p.gamma, provider: p.provider_id.clone() },
            targets: matrix.targets().to_vec(),
            span_scores: rankings
                .iter()
                .map(|r| SpanEntry {
                    span_start: r.score.span.start().unwrap_or(0),
                    span_end: r.score.span.end().unwrap_or(0),
                    score: r.score.score,
                    rank: r.rank,
                    span_id: r.score.span.id,
                })
                .collect(),
            token_phi: matrix.entries().map(|((pos, t), phi)| TokenPhi { pos, t, phi }).collect(),
            metrics,
            meta: ReportMeta { feature_join: FEATURE_JOIN.into(), weight_bits: p.weight_bits, timestamp: None },
        }
    }

    pub fn with_timestamp(mut self, unix_seconds: u64) -> Self {
        self.meta.timestamp = Some(unix_seconds);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Html,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "html" => Ok(Self::Html),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn emit_report(report: &Report, context: &TokenSeq, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let body = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Html => render_html(report, context),
    };
    fs::write(path, body)?;
    Ok(())
}

fn escape(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
}

/// Static page with the context, one `<mark>` per ranked span.
pub fn render_html(report: &Report, context: &TokenSeq) -> String {
    let tokens = context.tokens();
    let source = context.source();
    let max_abs = report.span_scores.iter().fold(0.0f64, |m, s| m.max(s.score.abs()));

    let mut spans: Vec<&SpanEntry> = report.span_scores.iter().collect();
    spans.sort_by_key(|s| (s.span_start, s.rank));

    // Byte offset of a token boundary; `pos == len` is the end of the text.
    let byte_at = |pos: usize| tokens.get(pos).map_or(source.len(), |t| t.byte_start);

    let mut html = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Attribution report</title>\n<style>\n\
         body { font-family: sans-serif; max-width: 60em; margin: 2em auto; }\n\
         pre { white-space: pre-wrap; line-height: 1.6; }\n\
         mark { padding: 0 2px; border-radius: 3px; }\n\
         </style>\n</head>\n<body>\n",
    );
    let _ = writeln!(
        html,
        "<p>K = {}, M = {}, gamma = {}, provider = <code>{}</code></p>",
        report.params.k,
        report.params.m,
        report.params.gamma,
        {
            let mut s = String::new();
            escape(&mut s, &report.params.provider);
            s
        }
    );
    html.push_str("<pre>");
    let mut cursor = 0usize;
    for s in spans {
        let start = byte_at(s.span_start).max(cursor).min(source.len());
        let end = if s.span_end == 0 { start } else { tokens.get(s.span_end - 1).map_or(source.len(), |t| t.byte_end) };
        let end = end.max(start).min(source.len());
        escape(&mut html, &source[cursor..start]);
        let alpha = if max_abs > 0.0 { s.score.abs() / max_abs } else { 0.0 };
        let rgb = if s.score >= 0.0 { "46, 160, 67" } else { "215, 58, 73" };
        let _ = write!(
            html,
            "<mark data-rank=\"{}\" data-score=\"{}\" title=\"rank {} score {:.6}\" style=\"background: rgba({rgb}, {:.3})\">",
            s.rank, s.score, s.rank, s.score, 0.15 + 0.75 * alpha
        );
        escape(&mut html, &source[start..end]);
        html.push_str("</mark>");
        cursor = end;
    }
    escape(&mut html, &source[cursor..]);
    html.push_str("</pre>\n</body>\n</html>\n");
    html
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn report() -> Report {
        Report {
            params: ReportParams { k: 1, m: 10, gamma: 1.0, provider: "hash:256".into() },
            targets: vec![1, 2],
            span_scores: vec![
                SpanEntry { span_start: 4, span_end: 8, score: 0.75, rank: 1, span_id: 1 },
                SpanEntry { span_start: 0, span_end: 4, score: -0.25, rank: 2, span_id: 0 },
            ],
            token_phi: vec![TokenPhi { pos: 5, t: 1, phi: 0.5 }, TokenPhi { pos: 1, t: 2, phi: -0.25 }],
            metrics: serde_json::json!({"top1_correct": true}),
            meta: ReportMeta { feature_join: " ".into(), weight_bits: 10, timestamp: Some(7) },
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = report();
        emit_report(&r, &tokenize("a b c."), &path, ReportFormat::Json).unwrap();
        let back = Report::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
        let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["params"]["K"], 1);
        assert_eq!(v["span_scores"][0]["span_end"], 8);
    }

    #[test]
    fn html_marks_each_span() {
        let ctx = tokenize("a <b> c.\nd & e f.");
        let html = render_html(&report(), &ctx);
        assert_eq!(html.matches("<mark").count(), 2);
        assert!(html.contains("&lt;b&gt;"));
        assert!(html.contains("&amp;"));
        assert!(!html.contains("<b>"));
    }

    #[test]
    fn unknown_format() {
        assert!("pdf".parse::<ReportFormat>().is_err());
        assert_eq!("html".parse::<ReportFormat>().unwrap(), ReportFormat::Html);
    }
}
