//! Offline surrogate classifier.
//!
//! A linear bag-of-words model: each label scores as its bias plus the sum
//! of per-word weights over the example-span tokens (lowercased), and the
//! scores go through a softmax. Deterministic, instant, and entirely local,
//! which makes it the reference adapter for tests, dry runs, and any
//! experiment that needs exact reproducibility.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{ModelError, Prediction, ThreatModel};
use crate::dataset::LabelSet;
use crate::text::{tokenize, ModelInput};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("lexicon parse error: {0}")]
    Parse(String),
    #[error("lexicon has no nonzero weight")]
    AllZero,
    #[error("lexicon references label {0:?} outside the label set")]
    UnknownLabel(String),
}

/// Per-label bias and word weights.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct SurrogateLexicon {
    #[serde(default)]
    bias: HashMap<String, f64>,
    #[serde(default)]
    weights: HashMap<String, HashMap<String, f64>>,
}

impl SurrogateLexicon {
    /// Builds a lexicon from `(label, word, weight)` triples. Words are
    /// stored lowercased.
    pub fn from_weights(weights: &[(&str, &str, f64)]) -> Self {
        let mut lex = SurrogateLexicon::default();
        for (label, word, w) in weights {
            lex.weights
                .entry(label.to_string())
                .or_default()
                .insert(word.to_lowercase(), *w);
        }
        lex
    }

    pub fn with_bias(mut self, label: &str, bias: f64) -> Self {
        self.bias.insert(label.to_string(), bias);
        self
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let raw = std::fs::read_to_string(path)?;
        let mut lex: SurrogateLexicon =
            serde_json::from_str(&raw).map_err(|e| LexiconError::Parse(e.to_string()))?;
        for words in lex.weights.values_mut() {
            let lowered: HashMap<String, f64> = words
                .drain()
                .map(|(w, v)| (w.to_lowercase(), v))
                .collect();
            *words = lowered;
        }
        if !lex
            .weights
            .values()
            .flat_map(|m| m.values())
            .any(|w| *w != 0.0)
        {
            return Err(LexiconError::AllZero);
        }
        Ok(lex)
    }

    /// Checks that every label mentioned by the lexicon is in `labels`.
    pub fn validate_labels(&self, labels: &LabelSet) -> Result<(), LexiconError> {
        for label in self.bias.keys().chain(self.weights.keys()) {
            if !labels.contains(label) {
                return Err(LexiconError::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }

    fn margin(&self, label: &str, tokens: &[String]) -> f64 {
        let bias = self.bias.get(label).copied().unwrap_or(0.0);
        let words = self.weights.get(label);
        tokens.iter().fold(bias, |acc, tok| {
            acc + words.and_then(|m| m.get(tok)).copied().unwrap_or(0.0)
        })
    }
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Scores the example span of `input` against every label.
///
/// Only tokens inside the example span contribute; the prompt region is
/// invisible to the surrogate even when a search perturbs it.
pub fn surrogate_classify(
    lexicon: &SurrogateLexicon,
    input: &ModelInput,
    labels: &LabelSet,
) -> Prediction {
    let tokens: Vec<String> = tokenize(input.example_text())
        .tokens()
        .iter()
        .map(|t| t.surface.to_lowercase())
        .collect();
    let margins: Vec<f64> = labels
        .labels()
        .iter()
        .map(|l| lexicon.margin(l, &tokens))
        .collect();
    let probs = softmax(&margins);
    let pairs: Vec<(String, f64)> = labels
        .labels()
        .iter()
        .cloned()
        .zip(probs.iter().copied())
        .collect();
    let raw = labels
        .labels()
        .iter()
        .zip(margins.iter())
        .map(|(l, m)| format!("{l}:{m:.6}"))
        .collect::<Vec<_>>()
        .join(" ");
    Prediction::from_label_scores(&pairs, labels, format!("surrogate margins {raw}"))
}

#[derive(Debug)]
pub struct SurrogateModel {
    lexicon: SurrogateLexicon,
    labels: LabelSet,
}

impl SurrogateModel {
    pub fn new(lexicon: SurrogateLexicon, labels: LabelSet) -> Result<Self, LexiconError> {
        lexicon.validate_labels(&labels)?;
        Ok(SurrogateModel { lexicon, labels })
    }
}

impl ThreatModel for SurrogateModel {
    fn classify(&self, input: &ModelInput) -> Result<Prediction, ModelError> {
        Ok(surrogate_classify(&self.lexicon, input, &self.labels))
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn describe(&self) -> String {
        "surrogate".into()
    }
}
