//! Benchmark data, metrics and reporting.

mod dataset;
mod kv;
mod metrics;
mod report;
mod runner;

pub use dataset::{load_jsonl, parse_jsonl, write_jsonl, Context, EvalExample, Gold};
pub use kv::{gen_kv, SplitMix64};
pub use metrics::{metric_accuracy, metric_pr_at_k, MetricsAtK};
pub use report::{emit_report, render_html, Report, ReportFormat, ReportMeta, ReportParams, SpanEntry, TokenPhi};
pub use runner::{evaluate_dataset, evaluate_example, EvalSummary, ExampleOutcome};
