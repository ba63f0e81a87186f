//! Core engine for probing the input robustness of LLM-backed text
//! classifiers.
//!
//! The pipeline is black box end to end: a classifier is reachable only
//! through a query interface that maps a full prompt-plus-example string to a
//! label distribution. Search strategies perturb the input at the character,
//! word, or sentence level, subject to a constraint set and a query/time
//! budget, and try to flip the predicted label away from the ground truth.
//! Campaign-level metrics summarize how often that works and what it costs.
//!
//! Module map:
//!
//! * [`text`], [`dataset`]: reversible tokenization, prompt assembly, and
//!   sample loading.
//! * [`model`]: the query interface, response parsing, caching, accounting,
//!   and the two bundled adapters (offline surrogate, HTTP chat endpoint).
//! * [`goal`]: the decision-flip objective and budgets.
//! * [`transform`]: perturbation operators, candidate bookkeeping, and
//!   constraint checking.
//! * [`search`]: ranking passes and the search strategies, plus the named
//!   presets built from them.
//! * [`metrics`], [`report`]: the five campaign indicators and report
//!   emission.

pub mod dataset;
pub mod goal;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod search;
pub mod text;
pub mod transform;
