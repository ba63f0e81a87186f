//! Campaign report assembly and emission.
//!
//! A report is computed as a pure fold over the outcome log, so recomputing
//! it later from the persisted log reproduces the live report exactly. The
//! JSON form is schema-versioned and round-trips byte for byte; the
//! markdown form renders the five indicators as one table row, with a dash
//! for any indicator that is undefined because nothing succeeded.

use serde::{Deserialize, Serialize};

use crate::metrics::{
    change_rate, mean_perplexity, query_number, success_rate, time_overhead, MetricsError,
    NgramScorer,
};
use crate::search::{OutcomeStatus, SearchOutcome};

/// Version stamp of the report JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// What was run: enough context to interpret the numbers and to tell two
/// campaigns apart.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct CampaignInfo {
    pub dataset: String,
    pub method: String,
    pub prompt: String,
    pub model: String,
    pub seed: u64,
    /// Hash of the resolved configuration; identical configs hash alike.
    pub config_hash: String,
}

/// The five indicators plus the counts they were computed from. Indicators
/// defined only over successes are `None` when nothing succeeded.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub s_rate: f64,
    pub c_rate: Option<f64>,
    pub ppl: Option<f64>,
    pub t_o: Option<f64>,
    pub q_n: Option<f64>,
    pub n: usize,
    pub n_suc: usize,
    /// Which language model produced the perplexity column.
    pub ppl_scorer: String,
}

/// One line per example, enough to audit without reopening the log.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct ExampleSummary {
    pub id: String,
    pub status: OutcomeStatus,
    pub queries_used: u64,
    pub elapsed_seconds: f64,
    pub edits: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub campaign: CampaignInfo,
    pub metrics: MetricsSummary,
    pub examples: Vec<ExampleSummary>,
}

#[derive(Clone, Copy, Debug, Eq, PartialEq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Computes the indicators over an outcome log. Outcomes are ordered by id
/// before any aggregation: float summation is order-sensitive, and the log's
/// append order depends on worker scheduling, so the report must not.
pub fn build_report(
    info: CampaignInfo,
    scorer: &NgramScorer,
    outcomes: &[SearchOutcome],
) -> Result<CampaignReport, MetricsError> {
    let mut ordered: Vec<SearchOutcome> = outcomes.to_vec();
    ordered.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let outcomes = ordered.as_slice();
    let s_rate = success_rate(outcomes)?;
    let metrics = MetricsSummary {
        s_rate,
        c_rate: change_rate(outcomes)?,
        ppl: mean_perplexity(scorer, outcomes)?,
        t_o: time_overhead(outcomes),
        q_n: query_number(outcomes),
        n: outcomes.len(),
        n_suc: outcomes
            .iter()
            .filter(|o| o.status == OutcomeStatus::Success)
            .count(),
        ppl_scorer: scorer.describe(),
    };
    let examples: Vec<ExampleSummary> = outcomes
        .iter()
        .map(|o| ExampleSummary {
            id: o.sample_id.clone(),
            status: o.status,
            queries_used: o.queries_used,
            elapsed_seconds: o.elapsed_seconds,
            edits: o.edits.len(),
        })
        .collect();
    Ok(CampaignReport {
        schema_version: SCHEMA_VERSION,
        campaign: info,
        metrics,
        examples,
    })
}

/// Renders the report; JSON for machines, markdown for people.
pub fn emit_report(report: &CampaignReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out =
                serde_json::to_string_pretty(report).expect("report serialization is infallible");
            out.push('\n');
            out
        }
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "—".to_string(),
    }
}

fn render_markdown(report: &CampaignReport) -> String {
    let c = &report.campaign;
    let m = &report.metrics;
    let mut out = String::new();
    out.push_str("# Robustness campaign\n\n");
    out.push_str(&format!("- dataset: {}\n", c.dataset));
    out.push_str(&format!("- prompt: {:?}\n", c.prompt));
    out.push_str(&format!("- model: {}\n", c.model));
    out.push_str(&format!("- seed: {}\n", c.seed));
    out.push_str(&format!("- config: {}\n", c.config_hash));
    out.push_str(&format!("- examples: {} ({} flipped)\n", m.n, m.n_suc));
    out.push_str(&format!("- perplexity scorer: {}\n", m.ppl_scorer));
    out.push('\n');
    out.push_str("| Method | S-rate | C-rate | PPL | T-O | Q-N |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- |\n");
    out.push_str(&format!(
        "| {} | {:.3} | {} | {} | {} | {} |\n",
        c.method,
        m.s_rate,
        cell(m.c_rate),
        cell(m.ppl),
        cell(m.t_o),
        cell(m.q_n),
    ));
    out
}
