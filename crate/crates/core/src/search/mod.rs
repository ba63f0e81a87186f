//! Search strategies that look for small perturbations flipping a decision.
//!
//! A strategy receives a [`SearchContext`] (model handle, query ledger,
//! budget, constraints, seeded randomness) and a [`TargetInput`] describing
//! which part of the classifier input it may rewrite. It explores candidates
//! until the model's label moves off the ground truth, the query or time
//! budget runs out, or its candidate space is exhausted, and reports a
//! [`SearchOutcome`] either way.
//!
//! Ranking probes (word deletion or unknown-token masking) order words by
//! how much hiding them hurts the model's confidence in the truth label;
//! greedy strategies then spend their queries on the most promising words
//! first.

pub mod presets;
mod strategies;

pub use strategies::{
    beam_search, char_bug_search, fixed_transformation_search, greedy_wir_search, random_search,
    saliency_weighted_search, Operator,
};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goal::{budget_exceeded, evaluate_goal, Budget, GoalStatus};
use crate::model::{query, ModelError, QueryLedger, ResponseCache, ThreatModel};
use crate::rng::{derive_rng, example_stream};
use crate::text::{render_input, tokenize, ModelInput, PromptTemplate, Span, TextError, TokenKind, TokenizedText};
use crate::transform::constraints::ConstraintSet;
use crate::transform::resources::SynonymTable;
use crate::transform::{word_delete_edit, Candidate, Edit, EditKind, TransformError};

/// Surface used by masking probes; deliberately outside any synonym table
/// or lexicon so the model sees an unknown word.
pub const UNK_SURFACE: &str = "[UNK]";

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no eligible words to perturb")]
    EmptyRegion,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Everything a strategy needs to run one example.
pub struct SearchContext<'a> {
    pub model: &'a dyn ThreatModel,
    pub ledger: &'a QueryLedger,
    pub cache: ResponseCache,
    pub budget: Budget,
    pub constraints: &'a ConstraintSet,
    pub synonyms: &'a SynonymTable,
    pub rng: ChaCha8Rng,
    pub sample_id: String,
    pub truth: String,
}

impl<'a> SearchContext<'a> {
    /// Context with a fresh in-memory cache and the default budget. The
    /// random stream is derived from `seed` and the sample id, so reruns of
    /// the same sample are identical regardless of worker scheduling.
    pub fn new(
        model: &'a dyn ThreatModel,
        ledger: &'a QueryLedger,
        constraints: &'a ConstraintSet,
        synonyms: &'a SynonymTable,
        sample_id: &str,
        truth: &str,
        seed: u64,
    ) -> Self {
        SearchContext {
            model,
            ledger,
            cache: ResponseCache::in_memory(),
            budget: Budget::default(),
            constraints,
            synonyms,
            rng: derive_rng(seed, &example_stream(sample_id)),
            sample_id: sample_id.to_string(),
            truth: truth.to_string(),
        }
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    /// True once this example's query or time budget is spent.
    pub fn budget_dead(&self) -> bool {
        budget_exceeded(&self.budget, self.ledger, &self.sample_id)
    }
}

/// The part of the classifier input a search may rewrite, plus how to
/// assemble a full model input from a perturbed version of it.
///
/// In the default mode only the example is perturbable and the prompt is
/// glued on at render time. In full-input mode the prompt text itself is
/// part of the region; the example boundary is tracked through edits so the
/// rendered input still reports correct spans.
#[derive(Clone, Debug)]
pub struct TargetInput {
    region: TokenizedText,
    example_token_start: usize,
    mode: RenderMode,
}

#[derive(Clone, Debug)]
enum RenderMode {
    ExampleOnly(PromptTemplate),
    FullInput,
}

impl TargetInput {
    /// Perturbable region is the example only; the prompt stays fixed.
    pub fn example_only(prompt: PromptTemplate, example: &str) -> Self {
        TargetInput {
            region: tokenize(example),
            example_token_start: 0,
            mode: RenderMode::ExampleOnly(prompt),
        }
    }

    /// Perturbable region covers the rendered prompt and the example.
    pub fn full_input(prompt: &PromptTemplate, example: &str) -> Self {
        let rendered = render_input(prompt, example);
        let region = tokenize(&rendered.full_text);
        let boundary = rendered.example_span.start;
        let example_token_start = region
            .tokens()
            .iter()
            .position(|t| t.start_byte >= boundary)
            .unwrap_or(region.len());
        TargetInput {
            region,
            example_token_start,
            mode: RenderMode::FullInput,
        }
    }

    pub fn region(&self) -> &TokenizedText {
        &self.region
    }

    /// The unperturbed region as a string.
    pub fn original_text(&self) -> String {
        self.region.text()
    }

    /// Index of the first example token in a candidate derived from this
    /// target. Head fragments push the boundary right; deletions before it
    /// pull it left; in-place token edits leave it alone.
    fn boundary_token(&self, edits: &[Edit]) -> usize {
        let mut boundary = self.example_token_start;
        for edit in edits {
            match edit.kind {
                EditKind::AppendHead => boundary += tokenize(&edit.after).len(),
                EditKind::WordDelete if edit.position < boundary => boundary -= 1,
                _ => {}
            }
        }
        boundary
    }

    /// Assembles the full classifier input for a candidate.
    pub fn render(&self, candidate: &Candidate) -> ModelInput {
        match &self.mode {
            RenderMode::ExampleOnly(prompt) => render_input(prompt, &candidate.text.text()),
            RenderMode::FullInput => {
                let full_text = candidate.text.text();
                let boundary = self.boundary_token(&candidate.edits);
                let example_start = candidate
                    .text
                    .token(boundary)
                    .map(|t| t.start_byte)
                    .unwrap_or(full_text.len());
                ModelInput {
                    prompt_span: Span::new(0, example_start),
                    example_span: Span::new(example_start, full_text.len()),
                    full_text,
                }
            }
        }
    }
}

/// How a strategy's attempt on one example ended.
#[derive(Clone, Copy, Debug, Deserialize, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    /// A perturbation moved the label off the ground truth.
    Success,
    /// The candidate space ran out with the label unmoved.
    Failed,
    /// The baseline query could not be answered; see `error`.
    Abstain,
    /// The query or time budget tripped mid-search.
    BudgetExhausted,
}

/// Per-example record written to the campaign log.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SearchOutcome {
    pub sample_id: String,
    pub truth: String,
    pub status: OutcomeStatus,
    /// Unperturbed region text; the baseline for edit-cost metrics.
    pub original_text: String,
    /// Region text after the reported edits.
    pub final_text: String,
    pub edits: Vec<Edit>,
    pub baseline_label: Option<String>,
    pub final_label: Option<String>,
    /// Model invocations charged to this example (cache hits excluded).
    pub queries_used: u64,
    /// Wall-clock seconds from first query to finish.
    pub elapsed_seconds: f64,
    /// Goal score of each accepted state, the baseline first. Greedy
    /// strategies produce a non-decreasing trace.
    pub score_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Model verdict on one candidate, folded into goal terms.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub status: GoalStatus,
    pub score: f64,
    pub label: String,
}

/// Queries the model on a rendered candidate. Returns `None` when the
/// example's budget is spent; the gate applies before the cache lookup, so
/// an exhausted example stops evaluating entirely.
pub(crate) fn evaluate_candidate(
    ctx: &SearchContext,
    target: &TargetInput,
    candidate: &Candidate,
) -> Result<Option<Evaluation>, SearchError> {
    if budget_exceeded(&ctx.budget, ctx.ledger, &ctx.sample_id) {
        return Ok(None);
    }
    let input = target.render(candidate);
    let prediction = query(ctx.model, &input, &ctx.sample_id, ctx.ledger, &ctx.cache)?;
    let result = evaluate_goal(&prediction, &ctx.truth);
    Ok(Some(Evaluation {
        status: result.status,
        score: result.score,
        label: prediction.top_label,
    }))
}

/// Builds the outcome record, freezing the example's query count and wall
/// clock.
pub(crate) fn finish_outcome(
    ctx: &SearchContext,
    target: &TargetInput,
    status: OutcomeStatus,
    candidate: &Candidate,
    baseline_label: Option<String>,
    final_label: Option<String>,
    score_trace: Vec<f64>,
) -> SearchOutcome {
    let (queries_used, elapsed_seconds) = ctx.ledger.finish_example(&ctx.sample_id);
    SearchOutcome {
        sample_id: ctx.sample_id.clone(),
        truth: ctx.truth.clone(),
        status,
        original_text: target.original_text(),
        final_text: candidate.text.text(),
        edits: candidate.edits.clone(),
        baseline_label,
        final_label,
        queries_used,
        elapsed_seconds,
        score_trace,
        error: None,
    }
}

/// One word with its measured influence on the truth label.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedWord {
    pub position: usize,
    pub importance: f64,
}

/// Words ordered by descending importance; equal importances fall back to
/// ascending position.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WordRanking {
    pub words: Vec<RankedWord>,
}

impl WordRanking {
    pub fn positions(&self) -> Vec<usize> {
        self.words.iter().map(|w| w.position).collect()
    }
}

/// Word-token positions a search may touch: word tokens whose lowercased
/// surface is not a configured stop word.
pub fn eligible_positions(ctx: &SearchContext, target: &TargetInput) -> Vec<usize> {
    target
        .region()
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Word)
        .filter(|(_, t)| !ctx.constraints.stop_words.contains(&t.surface.to_lowercase()))
        .map(|(i, _)| i)
        .collect()
}

/// How a ranking pass hides a word to measure its influence.
#[derive(Clone, Copy, Debug, Eq, PartialEq)]
pub enum ProbeKind {
    /// Remove the word entirely.
    Deletion,
    /// Replace it with [`UNK_SURFACE`].
    UnkMask,
}

/// Ranks eligible words by how much hiding each one raises the goal score
/// (one probe query per word, charged to the example's budget).
///
/// The baseline query is issued here too; strategies that already queried
/// the original text get it back from the cache for free. A probe that runs
/// into the budget ceiling ends the pass with the words ranked so far, and a
/// probe whose query fails keeps its word at the bottom of the ranking
/// (importance negative infinity) rather than aborting the search.
pub fn rank_words(
    ctx: &SearchContext,
    target: &TargetInput,
    probe: ProbeKind,
) -> Result<WordRanking, SearchError> {
    ctx.ledger.begin_example(&ctx.sample_id);
    let eligible = eligible_positions(ctx, target);
    if eligible.is_empty() {
        return Err(SearchError::EmptyRegion);
    }
    let identity = Candidate::identity(target.region());
    let base_score = match evaluate_candidate(ctx, target, &identity)? {
        Some(eval) => eval.score,
        None => return Ok(WordRanking::default()),
    };
    let mut words = Vec::new();
    for position in eligible {
        let edit = match probe {
            ProbeKind::Deletion => word_delete_edit(target.region(), position)?,
            ProbeKind::UnkMask => {
                let before = &target.region().token(position).expect("eligible position").surface;
                Edit {
                    position,
                    kind: EditKind::Substitute,
                    before: before.clone(),
                    after: UNK_SURFACE.to_string(),
                }
            }
        };
        let candidate = Candidate::single(target.region(), edit)?;
        match evaluate_candidate(ctx, target, &candidate) {
            Ok(Some(eval)) => words.push(RankedWord {
                position,
                importance: eval.score - base_score,
            }),
            Ok(None) => break,
            Err(SearchError::Model(_)) => words.push(RankedWord {
                position,
                importance: f64::NEG_INFINITY,
            }),
            Err(other) => return Err(other),
        }
    }
    words.sort_by(|a, b| {
        b.importance
            .partial_cmp(&a.importance)
            .expect("importances are never NaN")
            .then(a.position.cmp(&b.position))
    });
    Ok(WordRanking { words })
}

/// Ranks words by how much deleting each one raises the goal score.
pub fn rank_by_deletion(
    ctx: &SearchContext,
    target: &TargetInput,
) -> Result<WordRanking, SearchError> {
    rank_words(ctx, target, ProbeKind::Deletion)
}

/// Ranks words by how much masking each one with [`UNK_SURFACE`] raises the
/// goal score.
pub fn rank_by_unk_saliency(
    ctx: &SearchContext,
    target: &TargetInput,
) -> Result<WordRanking, SearchError> {
    rank_words(ctx, target, ProbeKind::UnkMask)
}
