//! The five campaign indicators computed over an outcome log.
//!
//! * Success rate: fraction of examples where a perturbation flipped the
//!   label (abstained and budget-exhausted examples count in the total).
//! * Change rate: mean fraction of words edited, over successes only.
//! * Perplexity: mean fluency score of the successful final texts under an
//!   additive-smoothed bigram model.
//! * Time overhead and query number: mean wall-clock seconds and mean model
//!   queries spent per successful example.
//!
//! The per-success metrics are undefined when nothing succeeded; they come
//! back as `None` and render as a dash, never as zero, so "no data" stays
//! distinguishable from "no change".

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::search::{OutcomeStatus, SearchOutcome};
use crate::text::{tokenize, TokenizedText};
use crate::transform::constraints::changed_word_count;
use crate::transform::{apply_edits, Edit, TransformError};

/// Context token standing in for "start of sequence" in the bigram model.
const BOS: &str = "<s>";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no outcomes to aggregate")]
    EmptyOutcomes,
    #[error("cannot score an empty token sequence")]
    EmptyText,
    #[error("vocabulary size must be at least 1")]
    EmptyVocabulary,
    #[error("smoothing constant must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("edit replay produced {produced:?}, expected {expected:?}")]
    ReplayMismatch { expected: String, produced: String },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Fraction of outcomes that flipped the label. Abstains and exhausted
/// budgets stay in the denominator: an example the campaign could not crack
/// still counts against the method.
pub fn success_rate(outcomes: &[SearchOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyOutcomes);
    }
    let successes = outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Success)
        .count();
    Ok(successes as f64 / outcomes.len() as f64)
}

/// Number of words an edit script touches: distinct original word positions
/// edited, plus the words of every appended fragment. Punctuation edits
/// count zero. The script is replayed against `original` and must reproduce
/// `final_text` exactly.
pub fn word_diff(
    original: &TokenizedText,
    final_text: &TokenizedText,
    edits: &[Edit],
) -> Result<usize, MetricsError> {
    let produced = apply_edits(original, edits)?;
    if produced.text() != final_text.text() {
        return Err(MetricsError::ReplayMismatch {
            expected: final_text.text(),
            produced: produced.text(),
        });
    }
    Ok(changed_word_count(original, edits))
}

/// Mean fraction of changed words over the successful outcomes, each
/// success weighted equally. `None` when nothing succeeded.
pub fn change_rate(outcomes: &[SearchOutcome]) -> Result<Option<f64>, MetricsError> {
    let mut ratios = Vec::new();
    for outcome in outcomes {
        if outcome.status != OutcomeStatus::Success {
            continue;
        }
        let original = tokenize(&outcome.original_text);
        let final_text = tokenize(&outcome.final_text);
        let diff = word_diff(&original, &final_text, &outcome.edits)?;
        let words = original.word_count();
        let ratio = if diff == 0 {
            0.0
        } else {
            diff as f64 / words as f64
        };
        ratios.push(ratio);
    }
    Ok(mean(&ratios))
}

/// Mean wall-clock seconds per successful outcome; `None` when nothing
/// succeeded.
pub fn time_overhead(outcomes: &[SearchOutcome]) -> Option<f64> {
    let seconds: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Success)
        .map(|o| o.elapsed_seconds)
        .collect();
    mean(&seconds)
}

/// Mean model queries per successful outcome; `None` when nothing
/// succeeded.
pub fn query_number(outcomes: &[SearchOutcome]) -> Option<f64> {
    let queries: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Success)
        .map(|o| o.queries_used as f64)
        .collect();
    mean(&queries)
}

/// Mean perplexity of the successful final texts; `None` when nothing
/// succeeded.
pub fn mean_perplexity(
    scorer: &NgramScorer,
    outcomes: &[SearchOutcome],
) -> Result<Option<f64>, MetricsError> {
    let mut values = Vec::new();
    for outcome in outcomes {
        if outcome.status != OutcomeStatus::Success {
            continue;
        }
        values.push(scorer.perplexity(&outcome.final_text)?);
    }
    Ok(mean(&values))
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Additive-smoothed bigram language model over lowercased tokens.
///
/// The probability of a token given its predecessor is
/// `(count(prev, token) + alpha) / (count(prev) + alpha * vocab)`, with the
/// first token conditioned on a begin-of-sequence marker. Perplexity of a
/// sequence is the exponentiated mean negative log probability, so it is at
/// least 1 and equals the vocabulary size for an untrained scorer.
#[derive(Clone, Debug)]
pub struct NgramScorer {
    pair_counts: HashMap<(String, String), u64>,
    prev_counts: HashMap<String, u64>,
    vocab: usize,
    alpha: f64,
}

impl NgramScorer {
    /// Counts bigrams over the corpus. The vocabulary is the set of
    /// distinct tokens seen; an empty corpus degenerates to a single-token
    /// vocabulary so probabilities stay well defined.
    pub fn train<I, S>(corpus: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut pair_counts = HashMap::new();
        let mut prev_counts = HashMap::new();
        let mut vocab = HashSet::new();
        for doc in corpus {
            let tokens = scorer_tokens(doc.as_ref());
            let mut prev = BOS.to_string();
            for token in tokens {
                vocab.insert(token.clone());
                *prev_counts.entry(prev.clone()).or_insert(0) += 1;
                *pair_counts.entry((prev, token.clone())).or_insert(0) += 1;
                prev = token;
            }
        }
        NgramScorer {
            pair_counts,
            prev_counts,
            vocab: vocab.len().max(1),
            alpha: 1.0,
        }
    }

    /// Zero-count scorer over a fixed vocabulary size: every token gets
    /// probability `1 / vocab`, so perplexity is `vocab` for any sequence.
    pub fn uniform(vocab: usize) -> Result<Self, MetricsError> {
        if vocab == 0 {
            return Err(MetricsError::EmptyVocabulary);
        }
        Ok(NgramScorer {
            pair_counts: HashMap::new(),
            prev_counts: HashMap::new(),
            vocab,
            alpha: 1.0,
        })
    }

    /// Replaces the smoothing constant (default 1.0).
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, MetricsError> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(MetricsError::InvalidAlpha(alpha));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    /// One-line description of the scorer for report provenance.
    pub fn describe(&self) -> String {
        format!(
            "additive-smoothed bigram (alpha={}, vocab={})",
            self.alpha, self.vocab
        )
    }

    /// Perplexity of `text` under the model; errors on a text with no
    /// tokens, where the mean is undefined.
    pub fn perplexity(&self, text: &str) -> Result<f64, MetricsError> {
        let tokens = scorer_tokens(text);
        if tokens.is_empty() {
            return Err(MetricsError::EmptyText);
        }
        let mut sum_log = 0.0;
        let mut prev = BOS.to_string();
        for token in &tokens {
            let pair = self
                .pair_counts
                .get(&(prev.clone(), token.clone()))
                .copied()
                .unwrap_or(0) as f64;
            let context = self.prev_counts.get(&prev).copied().unwrap_or(0) as f64;
            let prob = (pair + self.alpha) / (context + self.alpha * self.vocab as f64);
            sum_log += prob.ln();
            prev = token.clone();
        }
        Ok((-sum_log / tokens.len() as f64).exp())
    }
}

/// The scorer's tokenization: the campaign tokenizer's surfaces, lowercased
/// so that case changes do not masquerade as fluency changes.
fn scorer_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .tokens()
        .iter()
        .map(|t| t.surface.to_lowercase())
        .collect()
}
