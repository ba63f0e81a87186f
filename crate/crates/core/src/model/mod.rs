//! The query interface to the classifier under test.
//!
//! Everything the search layer knows about the model goes through
//! [`ThreatModel::classify`]: full text in, label distribution out. The two
//! bundled adapters are an offline [`surrogate`] (a linear bag-of-words
//! scorer, used for tests and dry runs) and an [`http`] chat-completion
//! client. [`query`] wraps the trait with response caching and ledger
//! accounting so strategies never call an adapter directly.

pub mod cache;
pub mod http;
pub mod ledger;
pub mod limiter;
pub mod surrogate;

use std::collections::{BTreeMap, HashMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelSet;
use crate::text::ModelInput;

pub use cache::ResponseCache;
pub use http::{HttpChatModel, RetryPolicy};
pub use ledger::QueryLedger;
pub use limiter::RateLimiter;
pub use surrogate::{surrogate_classify, SurrogateLexicon, SurrogateModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("query failed after {attempts} attempts: {message}")]
    QueryFailed { attempts: u32, message: String },
    #[error("no label trigger matched in response {raw:?}")]
    LabelParseFailed { raw: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum VerbalizerError {
    #[error("label {0:?} has no triggers")]
    MissingTriggers(String),
    #[error("trigger {0:?} is empty")]
    EmptyTrigger(String),
    #[error("trigger {0:?} appears under more than one label")]
    DuplicateTrigger(String),
    #[error("confidence pattern invalid: {0}")]
    BadPattern(String),
}

/// Normalized label distribution for one query.
///
/// `top_label` is always the argmax of `scores`, ties broken by label-set
/// order, and the scores sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: BTreeMap<String, f64>,
    pub top_label: String,
    pub raw_response: String,
}

impl Prediction {
    /// Builds a prediction from per-label scores, normalizing them and
    /// computing the top label. Every label in `labels` must appear in
    /// `pairs`; a degenerate total (zero, negative, or non-finite) falls back
    /// to the uniform distribution.
    pub fn from_label_scores(
        pairs: &[(String, f64)],
        labels: &LabelSet,
        raw_response: String,
    ) -> Prediction {
        let by_label: HashMap<&str, f64> =
            pairs.iter().map(|(l, s)| (l.as_str(), *s)).collect();
        let ordered: Vec<f64> = labels
            .labels()
            .iter()
            .map(|l| by_label.get(l.as_str()).copied().unwrap_or(0.0))
            .collect();
        let sum: f64 = ordered.iter().sum();
        let k = labels.len() as f64;
        let normalized: Vec<f64> = if sum.is_finite() && sum > 0.0 && ordered.iter().all(|s| *s >= 0.0)
        {
            ordered.iter().map(|s| s / sum).collect()
        } else {
            vec![1.0 / k; labels.len()]
        };
        let mut top = 0;
        for (i, s) in normalized.iter().enumerate() {
            if *s > normalized[top] {
                top = i;
            }
        }
        let scores = labels
            .labels()
            .iter()
            .cloned()
            .zip(normalized.iter().copied())
            .collect();
        Prediction {
            scores,
            top_label: labels.labels()[top].clone(),
            raw_response,
        }
    }

    /// Score for `label`, zero if the label is unknown.
    pub fn score(&self, label: &str) -> f64 {
        self.scores.get(label).copied().unwrap_or(0.0)
    }
}

/// Maps free-text model responses onto the label set.
///
/// Each label owns a set of case-insensitive trigger strings; the trigger
/// matching earliest in the response decides the label (ties go to the
/// earlier label in set order). An optional confidence pattern extracts a
/// number in [0, 1] that becomes the top label's probability mass, the rest
/// being spread evenly over the other labels.
#[derive(Clone, Debug)]
pub struct Verbalizer {
    triggers: HashMap<String, Vec<String>>,
    confidence_pattern: Option<Regex>,
}

/// Default confidence extraction: the first number after the word
/// "confidence", e.g. "positive, confidence 0.9".
pub const DEFAULT_CONFIDENCE_PATTERN: &str = r"(?i)confidence[^0-9]*([0-9]*\.?[0-9]+)";

impl Verbalizer {
    /// Validates trigger coverage (every label has at least one non-empty
    /// trigger, no trigger claimed by two labels) and compiles the default
    /// confidence pattern.
    pub fn new(
        labels: &LabelSet,
        triggers: &[(String, Vec<String>)],
    ) -> Result<Self, VerbalizerError> {
        let mut map: HashMap<String, Vec<String>> = HashMap::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (label, ts) in triggers {
            let entry = map.entry(label.clone()).or_default();
            for t in ts {
                let t = t.to_lowercase();
                if t.is_empty() {
                    return Err(VerbalizerError::EmptyTrigger(label.clone()));
                }
                if !seen.insert(t.clone()) {
                    return Err(VerbalizerError::DuplicateTrigger(t));
                }
                entry.push(t);
            }
        }
        for label in labels.labels() {
            if map.get(label).is_none_or(|ts| ts.is_empty()) {
                return Err(VerbalizerError::MissingTriggers(label.clone()));
            }
        }
        Ok(Verbalizer {
            triggers: map,
            confidence_pattern: Some(
                Regex::new(DEFAULT_CONFIDENCE_PATTERN)
                    .expect("default confidence pattern compiles"),
            ),
        })
    }

    /// Each label triggers on its own name. The usual starting point.
    pub fn labels_as_triggers(labels: &LabelSet) -> Self {
        let triggers: Vec<(String, Vec<String>)> = labels
            .labels()
            .iter()
            .map(|l| (l.clone(), vec![l.clone()]))
            .collect();
        Verbalizer::new(labels, &triggers).expect("label names are valid triggers")
    }

    /// Replaces the confidence pattern. The regex needs one capture group
    /// for the number; `None` disables extraction entirely.
    pub fn with_confidence_pattern(
        mut self,
        pattern: Option<&str>,
    ) -> Result<Self, VerbalizerError> {
        self.confidence_pattern = match pattern {
            None => None,
            Some(p) => {
                let re = Regex::new(p).map_err(|e| VerbalizerError::BadPattern(e.to_string()))?;
                if re.captures_len() < 2 {
                    return Err(VerbalizerError::BadPattern(
                        "pattern needs a capture group for the number".into(),
                    ));
                }
                Some(re)
            }
        };
        Ok(self)
    }

    fn triggers_for(&self, label: &str) -> &[String] {
        self.triggers.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    fn extract_confidence(&self, raw: &str) -> Option<f64> {
        let re = self.confidence_pattern.as_ref()?;
        let caps = re.captures(raw)?;
        let c: f64 = caps.get(1)?.as_str().parse().ok()?;
        (0.0..=1.0).contains(&c).then_some(c)
    }

    /// One-line summary for reports.
    pub fn describe(&self, labels: &LabelSet) -> String {
        let mut parts = Vec::new();
        for label in labels.labels() {
            parts.push(format!("{}<-{}", label, self.triggers_for(label).join("|")));
        }
        format!("triggers[{}]", parts.join(", "))
    }
}

/// Interprets a raw model response as a label distribution.
///
/// The label whose trigger matches earliest (case-insensitively) wins. With
/// an extracted confidence `c`, the winning label gets `c` and the remaining
/// labels share `1 - c` evenly; without one the distribution is hard. When
/// `c` falls below `1/k` the reported distribution no longer ranks the
/// triggered label first; the argmax invariant on [`Prediction`] wins in
/// that case.
pub fn parse_label(
    raw: &str,
    verbalizer: &Verbalizer,
    labels: &LabelSet,
) -> Result<Prediction, ModelError> {
    let haystack = raw.to_lowercase();
    let mut best: Option<(usize, usize)> = None;
    for (index, label) in labels.labels().iter().enumerate() {
        for trigger in verbalizer.triggers_for(label) {
            if let Some(pos) = haystack.find(trigger.as_str()) {
                if best.is_none_or(|(bp, _)| pos < bp) {
                    best = Some((pos, index));
                }
            }
        }
    }
    let Some((_, winner)) = best else {
        return Err(ModelError::LabelParseFailed {
            raw: raw.to_string(),
        });
    };
    let k = labels.len();
    let (top_mass, other_mass) = match verbalizer.extract_confidence(raw) {
        Some(c) => (c, (1.0 - c) / (k as f64 - 1.0)),
        None => (1.0, 0.0),
    };
    let pairs: Vec<(String, f64)> = labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), if i == winner { top_mass } else { other_mass }))
        .collect();
    Ok(Prediction::from_label_scores(
        &pairs,
        labels,
        raw.to_string(),
    ))
}

/// Black-box classifier interface. Implementations must be shareable across
/// worker threads.
pub trait ThreatModel: Send + Sync {
    fn classify(&self, input: &ModelInput) -> Result<Prediction, ModelError>;

    fn label_set(&self) -> &LabelSet;

    /// Short description for reports, e.g. `surrogate` or `http:gpt-x`.
    fn describe(&self) -> String;

    /// Cheap reachability check run before a campaign spends budget.
    fn preflight(&self) -> Result<(), ModelError> {
        Ok(())
    }
}

/// Queries the model through the cache. A cache hit returns the stored
/// prediction without touching the ledger; a miss counts one query against
/// `sample_id` whether or not the adapter ultimately succeeds. Failed
/// queries are not cached.
pub fn query(
    model: &dyn ThreatModel,
    input: &ModelInput,
    sample_id: &str,
    ledger: &QueryLedger,
    cache: &ResponseCache,
) -> Result<Prediction, ModelError> {
    if let Some(hit) = cache.get(&input.full_text) {
        return Ok(hit);
    }
    ledger.record_query(sample_id);
    let prediction = model.classify(input)?;
    cache.put(&input.full_text, &prediction);
    Ok(prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{render_input, PromptTemplate};

    fn labels() -> LabelSet {
        LabelSet::new(["positive", "negative"]).unwrap()
    }

    #[test]
    fn prediction_normalizes_and_breaks_ties_by_label_order() {
        let p = Prediction::from_label_scores(
            &[("positive".into(), 2.0), ("negative".into(), 2.0)],
            &labels(),
            String::new(),
        );
        assert!((p.score("positive") - 0.5).abs() < 1e-12);
        assert_eq!(p.top_label, "positive");
        let sum: f64 = p.scores.values().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_scores_become_uniform() {
        let p = Prediction::from_label_scores(
            &[("positive".into(), 0.0), ("negative".into(), 0.0)],
            &labels(),
            String::new(),
        );
        assert!((p.score("negative") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parse_label_reads_trigger_and_confidence() {
        let v = Verbalizer::labels_as_triggers(&labels());
        let p = parse_label("positive, confidence 0.9", &v, &labels()).unwrap();
        assert_eq!(p.top_label, "positive");
        assert!((p.score("positive") - 0.9).abs() < 1e-12);
        assert!((p.score("negative") - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parse_label_hard_scores_without_confidence() {
        let v = Verbalizer::labels_as_triggers(&labels());
        let p = parse_label("Negative.", &v, &labels()).unwrap();
        assert_eq!(p.top_label, "negative");
        assert_eq!(p.score("negative"), 1.0);
        assert_eq!(p.score("positive"), 0.0);
    }

    #[test]
    fn earliest_trigger_wins() {
        let v = Verbalizer::labels_as_triggers(&labels());
        // Both triggers occur; "negative" starts earlier.
        let p = parse_label("negative, though some call it positive", &v, &labels()).unwrap();
        assert_eq!(p.top_label, "negative");
    }

    #[test]
    fn trigger_tie_at_same_position_prefers_earlier_label() {
        let ls = LabelSet::new(["pos", "positive"]).unwrap();
        let v = Verbalizer::new(
            &ls,
            &[
                ("pos".into(), vec!["pos".into()]),
                ("positive".into(), vec!["positive".into()]),
            ],
        )
        .unwrap();
        // "positive..." matches both triggers at byte 0; "pos" is first in
        // the label set.
        let p = parse_label("positive outlook", &v, &ls).unwrap();
        assert_eq!(p.top_label, "pos");
    }

    #[test]
    fn unmatched_response_is_a_parse_failure() {
        let v = Verbalizer::labels_as_triggers(&labels());
        let err = parse_label("no idea", &v, &labels()).unwrap_err();
        assert!(matches!(err, ModelError::LabelParseFailed { .. }));
    }

    #[test]
    fn out_of_range_confidence_falls_back_to_hard_scores() {
        let v = Verbalizer::labels_as_triggers(&labels());
        let p = parse_label("positive, confidence 7.5", &v, &labels()).unwrap();
        assert_eq!(p.score("positive"), 1.0);
    }

    #[test]
    fn low_confidence_keeps_argmax_coherent() {
        let v = Verbalizer::labels_as_triggers(&labels());
        let p = parse_label("positive, confidence 0.3", &v, &labels()).unwrap();
        // The reported distribution ranks "negative" higher, and top_label
        // follows the distribution, not the trigger.
        assert_eq!(p.top_label, "negative");
        assert!((p.score("negative") - 0.7).abs() < 1e-12);
    }

    #[test]
    fn verbalizer_rejects_bad_trigger_tables() {
        let ls = labels();
        assert_eq!(
            Verbalizer::new(&ls, &[("positive".into(), vec!["yes".into()])]).unwrap_err(),
            VerbalizerError::MissingTriggers("negative".into())
        );
        assert_eq!(
            Verbalizer::new(
                &ls,
                &[
                    ("positive".into(), vec!["yes".into()]),
                    ("negative".into(), vec!["Yes".into()]),
                ],
            )
            .unwrap_err(),
            VerbalizerError::DuplicateTrigger("yes".into())
        );
    }

    #[test]
    fn custom_confidence_pattern_requires_capture_group() {
        let v = Verbalizer::labels_as_triggers(&labels());
        assert!(v
            .clone()
            .with_confidence_pattern(Some("score: ([01]\\.\\d+)"))
            .is_ok());
        assert!(matches!(
            v.with_confidence_pattern(Some("score: [01]")).unwrap_err(),
            VerbalizerError::BadPattern(_)
        ));
    }

    struct Fixed(Prediction, LabelSet);

    impl ThreatModel for Fixed {
        fn classify(&self, _input: &ModelInput) -> Result<Prediction, ModelError> {
            Ok(self.0.clone())
        }
        fn label_set(&self) -> &LabelSet {
            &self.1
        }
        fn describe(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn query_counts_misses_and_skips_hits() {
        let ls = labels();
        let pred = Prediction::from_label_scores(
            &[("positive".into(), 1.0), ("negative".into(), 0.0)],
            &ls,
            String::new(),
        );
        let model = Fixed(pred, ls);
        let ledger = QueryLedger::new();
        let cache = ResponseCache::in_memory();
        let prompt = PromptTemplate::with_prefix("Classify:").unwrap();
        let input = render_input(&prompt, "good movie");

        query(&model, &input, "s1", &ledger, &cache).unwrap();
        assert_eq!(ledger.per_example("s1"), 1);
        query(&model, &input, "s1", &ledger, &cache).unwrap();
        assert_eq!(ledger.per_example("s1"), 1);
        assert_eq!(ledger.total(), 1);

        let other = render_input(&prompt, "bad movie");
        query(&model, &other, "s1", &ledger, &cache).unwrap();
        assert_eq!(ledger.per_example("s1"), 2);
    }
}
