//! Decision-flip objective and search budgets.
//!
//! A perturbed input succeeds when the model's top label moves away from
//! the ground truth. The goal score is `1 - p(truth)`, so raising the score
//! means eroding the model's confidence in the right answer; a score above
//! one half on a binary task is a flip.

use serde::{Deserialize, Serialize};

use crate::model::{Prediction, QueryLedger};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Success,
    Failed,
    /// The query layer could not produce a usable prediction for the
    /// example. Never returned by [`evaluate_goal`] itself.
    Abstain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalResult {
    pub status: GoalStatus,
    pub score: f64,
}

/// Scores a prediction against the ground-truth label.
pub fn evaluate_goal(prediction: &Prediction, truth: &str) -> GoalResult {
    let score = 1.0 - prediction.score(truth);
    let status = if prediction.top_label != truth {
        GoalStatus::Success
    } else {
        GoalStatus::Failed
    };
    GoalResult { status, score }
}

/// Per-example ceilings on model queries and wall-clock seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_queries: u64,
    pub max_seconds: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_queries: 500,
            max_seconds: 3600.0,
        }
    }
}

/// True once the example has consumed its budget. Both bounds are
/// inclusive: an example that has spent exactly `max_queries` queries is
/// out of budget.
pub fn budget_exceeded(budget: &Budget, ledger: &QueryLedger, sample_id: &str) -> bool {
    ledger.per_example(sample_id) >= budget.max_queries
        || ledger.elapsed_seconds(sample_id) >= budget.max_seconds
}
