//! The individual search strategies.
//!
//! All strategies share the same skeleton: query the original input first
//! (a misclassified original is an immediate zero-edit success), then walk
//! their candidate space until the label flips, the space is exhausted, or
//! the budget dies. They differ in how candidates are proposed and ordered:
//!
//! * [`greedy_wir_search`] ranks words by a hiding probe and commits the
//!   best scoring synonym per word, most important word first.
//! * [`saliency_weighted_search`] scores every single-word substitution from
//!   the original, weights the gains by a saliency softmax, and folds the
//!   substitutions in priority order.
//! * [`char_bug_search`] runs the greedy loop with character corruptions
//!   plus the top synonym of each word.
//! * [`fixed_transformation_search`] tries appending each configured
//!   fragment independently.
//! * [`random_search`] walks seeded-random single edits, keeping those that
//!   raise the goal score.
//! * [`beam_search`] keeps the best `width` partial rewrites per round.
//!
//! Failure handling is uniform: a model error on the baseline query aborts
//! the example as [`OutcomeStatus::Abstain`], a model error on any later
//! query just skips that candidate, and a tripped budget ends the search as
//! [`OutcomeStatus::BudgetExhausted`].

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::goal::GoalStatus;
use crate::text::TokenizedText;
use crate::transform::constraints::check_constraints;
use crate::transform::{
    append_edit, char_edits, synonym_edits, AppendPlacement, Candidate, Edit, EditKind,
    TransformError,
};

use super::{
    eligible_positions, evaluate_candidate, finish_outcome, rank_words, OutcomeStatus, ProbeKind,
    SearchContext, SearchError, SearchOutcome, TargetInput, WordRanking,
};

/// Edit family the random and beam strategies may draw from.
#[derive(Clone, Copy, Debug, Deserialize, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Synonym,
    CharInsert,
    CharDelete,
    CharSwap,
    CharNeighbor,
    CharHomoglyph,
}

impl Operator {
    fn char_kind(self) -> Option<EditKind> {
        match self {
            Operator::Synonym => None,
            Operator::CharInsert => Some(EditKind::CharInsert),
            Operator::CharDelete => Some(EditKind::CharDelete),
            Operator::CharSwap => Some(EditKind::CharSwap),
            Operator::CharNeighbor => Some(EditKind::CharNeighbor),
            Operator::CharHomoglyph => Some(EditKind::CharHomoglyph),
        }
    }
}

/// Result of the mandatory first query on the unedited input.
enum Baseline {
    /// The search is already over: zero-edit success, dead budget, or an
    /// unanswerable baseline query. Boxed so the variant stays close in size
    /// to `Scored`.
    Done(Box<SearchOutcome>),
    /// The model holds the truth label; searching is worthwhile.
    Scored { score: f64, label: String },
}

fn query_baseline(ctx: &SearchContext, target: &TargetInput) -> Result<Baseline, SearchError> {
    ctx.ledger.begin_example(&ctx.sample_id);
    let identity = Candidate::identity(target.region());
    match evaluate_candidate(ctx, target, &identity) {
        Err(SearchError::Model(err)) => {
            let mut outcome = finish_outcome(
                ctx,
                target,
                OutcomeStatus::Abstain,
                &identity,
                None,
                None,
                Vec::new(),
            );
            outcome.error = Some(err.to_string());
            Ok(Baseline::Done(Box::new(outcome)))
        }
        Err(other) => Err(other),
        Ok(None) => Ok(Baseline::Done(Box::new(finish_outcome(
            ctx,
            target,
            OutcomeStatus::BudgetExhausted,
            &identity,
            None,
            None,
            Vec::new(),
        )))),
        Ok(Some(eval)) if eval.status == GoalStatus::Success => {
            let score = eval.score;
            let label = eval.label;
            Ok(Baseline::Done(Box::new(finish_outcome(
                ctx,
                target,
                OutcomeStatus::Success,
                &identity,
                Some(label.clone()),
                Some(label),
                vec![score],
            ))))
        }
        Ok(Some(eval)) => Ok(Baseline::Scored {
            score: eval.score,
            label: eval.label,
        }),
    }
}

/// Ranks words, treating an empty region as an empty ranking so the caller
/// falls through to a no-candidate failure instead of erroring out.
fn rank_or_empty(
    ctx: &SearchContext,
    target: &TargetInput,
    probe: ProbeKind,
) -> Result<WordRanking, SearchError> {
    match rank_words(ctx, target, probe) {
        Ok(ranking) => Ok(ranking),
        Err(SearchError::EmptyRegion) => Ok(WordRanking::default()),
        Err(other) => Err(other),
    }
}

/// Failed when the candidate space ran out; exhausted when the budget did.
fn residual_status(ctx: &SearchContext) -> OutcomeStatus {
    if ctx.budget_dead() {
        OutcomeStatus::BudgetExhausted
    } else {
        OutcomeStatus::Failed
    }
}

/// Shared greedy loop: visit `positions` in order, query every generated
/// edit at that position, and commit the one that strictly improves the
/// running score (first proposal wins ties). Returns on the first flip or
/// when the budget dies.
fn greedy_over_positions<G>(
    ctx: &mut SearchContext,
    target: &TargetInput,
    base_score: f64,
    base_label: &str,
    positions: &[usize],
    mut generate: G,
) -> Result<SearchOutcome, SearchError>
where
    G: FnMut(&TokenizedText, usize, &mut ChaCha8Rng) -> Result<Vec<Edit>, TransformError>,
{
    let original = target.region().clone();
    let mut current = Candidate::identity(&original);
    let mut current_score = base_score;
    let mut current_label = base_label.to_string();
    let mut trace = vec![base_score];
    'positions: for &position in positions {
        let edits = generate(&original, position, &mut ctx.rng)?;
        let mut best: Option<(Candidate, f64, String)> = None;
        for edit in edits {
            let candidate = current.extended(&original, edit)?;
            if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
                continue;
            }
            match evaluate_candidate(ctx, target, &candidate) {
                Err(SearchError::Model(_)) => continue,
                Err(other) => return Err(other),
                Ok(None) => break 'positions,
                Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                    trace.push(eval.score);
                    return Ok(finish_outcome(
                        ctx,
                        target,
                        OutcomeStatus::Success,
                        &candidate,
                        Some(base_label.to_string()),
                        Some(eval.label),
                        trace,
                    ));
                }
                Ok(Some(eval)) => {
                    let beats_current = eval.score > current_score;
                    let beats_best = best.as_ref().map(|(_, s, _)| eval.score > *s).unwrap_or(true);
                    if beats_current && beats_best {
                        best = Some((candidate, eval.score, eval.label));
                    }
                }
            }
        }
        if let Some((candidate, score, label)) = best {
            current = candidate;
            current_score = score;
            current_label = label;
            trace.push(score);
        }
    }
    Ok(finish_outcome(
        ctx,
        target,
        residual_status(ctx),
        &current,
        Some(base_label.to_string()),
        Some(current_label),
        trace,
    ))
}

/// Word-importance-ranked greedy synonym substitution.
pub fn greedy_wir_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
    probe: ProbeKind,
    synonym_limit: usize,
) -> Result<SearchOutcome, SearchError> {
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let ranking = rank_or_empty(ctx, target, probe)?;
    let table = ctx.synonyms;
    greedy_over_positions(
        ctx,
        target,
        base_score,
        &base_label,
        &ranking.positions(),
        move |text, position, _| synonym_edits(text, position, table, synonym_limit),
    )
}

/// Greedy loop over character corruptions plus the top synonym per word,
/// with deletion-probe word ordering.
pub fn char_bug_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
) -> Result<SearchOutcome, SearchError> {
    const CHAR_KINDS: [EditKind; 5] = [
        EditKind::CharInsert,
        EditKind::CharDelete,
        EditKind::CharSwap,
        EditKind::CharNeighbor,
        EditKind::CharHomoglyph,
    ];
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let ranking = rank_or_empty(ctx, target, ProbeKind::Deletion)?;
    let table = ctx.synonyms;
    greedy_over_positions(
        ctx,
        target,
        base_score,
        &base_label,
        &ranking.positions(),
        move |text, position, rng| {
            let mut edits = char_edits(text, position, &CHAR_KINDS, rng)?;
            edits.extend(synonym_edits(text, position, table, 1)?);
            Ok(edits)
        },
    )
}

/// Saliency-weighted substitution: pick the best synonym per word using
/// single-edit queries from the original, rank positions by gain times a
/// saliency softmax, then fold the substitutions in that order. The first
/// folded edit re-creates an already-queried text, so it comes back from
/// the cache without spending budget.
pub fn saliency_weighted_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
    synonym_limit: usize,
) -> Result<SearchOutcome, SearchError> {
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let original = target.region().clone();
    let identity = Candidate::identity(&original);
    let mut trace = vec![base_score];
    let saliency = rank_or_empty(ctx, target, ProbeKind::UnkMask)?;

    // Saliency softmax. When every probe failed the maximum is not finite;
    // fall back to uniform weights rather than propagate NaN.
    let max_saliency = saliency
        .words
        .iter()
        .map(|w| w.importance)
        .fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = if max_saliency.is_finite() {
        saliency
            .words
            .iter()
            .map(|w| (w.importance - max_saliency).exp())
            .collect()
    } else {
        vec![1.0; saliency.words.len()]
    };
    let normalizer: f64 = exp.iter().sum();

    struct Pick {
        position: usize,
        edit: Edit,
        priority: f64,
    }
    let mut picks: Vec<Pick> = Vec::new();
    'selection: for (idx, word) in saliency.words.iter().enumerate() {
        let weight = exp[idx] / normalizer;
        let mut best: Option<(Edit, f64)> = None;
        for edit in synonym_edits(&original, word.position, ctx.synonyms, synonym_limit)? {
            let candidate = Candidate::single(&original, edit.clone())?;
            if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
                continue;
            }
            match evaluate_candidate(ctx, target, &candidate) {
                Err(SearchError::Model(_)) => continue,
                Err(other) => return Err(other),
                Ok(None) => break 'selection,
                Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                    trace.push(eval.score);
                    return Ok(finish_outcome(
                        ctx,
                        target,
                        OutcomeStatus::Success,
                        &candidate,
                        Some(base_label),
                        Some(eval.label),
                        trace,
                    ));
                }
                Ok(Some(eval)) => {
                    let gain = eval.score - base_score;
                    if best.as_ref().map(|(_, g)| gain > *g).unwrap_or(true) {
                        best = Some((edit, gain));
                    }
                }
            }
        }
        if let Some((edit, gain)) = best {
            picks.push(Pick {
                position: word.position,
                edit,
                priority: gain * weight,
            });
        }
    }
    picks.sort_by(|a, b| {
        b.priority
            .partial_cmp(&a.priority)
            .expect("priorities are never NaN")
            .then(a.position.cmp(&b.position))
    });

    let mut current = identity;
    let mut current_label = base_label.clone();
    for pick in picks {
        let candidate = current.extended(&original, pick.edit)?;
        if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
            continue;
        }
        match evaluate_candidate(ctx, target, &candidate) {
            Err(SearchError::Model(_)) => continue,
            Err(other) => return Err(other),
            Ok(None) => break,
            Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                trace.push(eval.score);
                return Ok(finish_outcome(
                    ctx,
                    target,
                    OutcomeStatus::Success,
                    &candidate,
                    Some(base_label),
                    Some(eval.label),
                    trace,
                ));
            }
            Ok(Some(eval)) => {
                trace.push(eval.score);
                current = candidate;
                current_label = eval.label;
            }
        }
    }
    Ok(finish_outcome(
        ctx,
        target,
        residual_status(ctx),
        &current,
        Some(base_label),
        Some(current_label),
        trace,
    ))
}

/// Tries appending each fragment on its own, in order, until one flips the
/// label. Costs at most one query per fragment plus the baseline.
pub fn fixed_transformation_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
    fragments: &[String],
    placement: AppendPlacement,
) -> Result<SearchOutcome, SearchError> {
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let original = target.region().clone();
    let identity = Candidate::identity(&original);
    let mut trace = vec![base_score];
    for fragment in fragments {
        let candidate = Candidate::single(&original, append_edit(fragment, placement)?)?;
        if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
            continue;
        }
        match evaluate_candidate(ctx, target, &candidate) {
            Err(SearchError::Model(_)) => continue,
            Err(other) => return Err(other),
            Ok(None) => break,
            Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                trace.push(eval.score);
                return Ok(finish_outcome(
                    ctx,
                    target,
                    OutcomeStatus::Success,
                    &candidate,
                    Some(base_label),
                    Some(eval.label),
                    trace,
                ));
            }
            Ok(Some(_)) => {}
        }
    }
    Ok(finish_outcome(
        ctx,
        target,
        residual_status(ctx),
        &identity,
        Some(base_label.clone()),
        Some(base_label),
        trace,
    ))
}

/// Seeded random hill climb over single edits. Draws a (position, operator,
/// edit) triple uniformly, keeps the extension when it strictly raises the
/// goal score, and never revisits an edited position. The step cap bounds
/// the walk when constraints or empty tables reject everything.
pub fn random_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
    operators: &[Operator],
    synonym_limit: usize,
) -> Result<SearchOutcome, SearchError> {
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let original = target.region().clone();
    let mut current = Candidate::identity(&original);
    let mut current_score = base_score;
    let mut current_label = base_label.clone();
    let mut trace = vec![base_score];
    let eligible = eligible_positions(ctx, target);
    if eligible.is_empty() || operators.is_empty() {
        return Ok(finish_outcome(
            ctx,
            target,
            residual_status(ctx),
            &current,
            Some(base_label.clone()),
            Some(current_label),
            trace,
        ));
    }
    let steps = 64.max((ctx.budget.max_queries as usize).saturating_mul(4));
    for _ in 0..steps {
        let position = eligible[ctx.rng.random_range(0..eligible.len())];
        if current.edited_positions().contains(&position) {
            continue;
        }
        let operator = operators[ctx.rng.random_range(0..operators.len())];
        let edits = match operator.char_kind() {
            None => synonym_edits(&original, position, ctx.synonyms, synonym_limit)?,
            Some(kind) => char_edits(&original, position, &[kind], &mut ctx.rng)?,
        };
        if edits.is_empty() {
            continue;
        }
        let edit = edits[ctx.rng.random_range(0..edits.len())].clone();
        let candidate = current.extended(&original, edit)?;
        if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
            continue;
        }
        match evaluate_candidate(ctx, target, &candidate) {
            Err(SearchError::Model(_)) => continue,
            Err(other) => return Err(other),
            Ok(None) => break,
            Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                trace.push(eval.score);
                return Ok(finish_outcome(
                    ctx,
                    target,
                    OutcomeStatus::Success,
                    &candidate,
                    Some(base_label),
                    Some(eval.label),
                    trace,
                ));
            }
            Ok(Some(eval)) if eval.score > current_score => {
                trace.push(eval.score);
                current = candidate;
                current_score = eval.score;
                current_label = eval.label;
            }
            Ok(Some(_)) => {}
        }
    }
    Ok(finish_outcome(
        ctx,
        target,
        residual_status(ctx),
        &current,
        Some(base_label),
        Some(current_label),
        trace,
    ))
}

/// Beam search over single-edit extensions. Each round extends every chain
/// in the frontier by one unedited position, merges parents and children,
/// and keeps the best `width` by score (ties prefer fewer edits, then
/// lexicographic text). Stops on a flip, a dead budget, or a stalled
/// frontier.
pub fn beam_search(
    ctx: &mut SearchContext,
    target: &TargetInput,
    operators: &[Operator],
    width: usize,
    synonym_limit: usize,
) -> Result<SearchOutcome, SearchError> {
    struct Entry {
        candidate: Candidate,
        score: f64,
        label: String,
        text: String,
    }
    let width = width.max(1);
    let (base_score, base_label) = match query_baseline(ctx, target)? {
        Baseline::Done(outcome) => return Ok(*outcome),
        Baseline::Scored { score, label } => (score, label),
    };
    let original = target.region().clone();
    let table = ctx.synonyms;
    let eligible = eligible_positions(ctx, target);
    let mut trace = vec![base_score];
    let mut frontier = vec![Entry {
        candidate: Candidate::identity(&original),
        score: base_score,
        label: base_label.clone(),
        text: original.text(),
    }];
    // Every surviving chain gains at most one edit per round, so this many
    // rounds exhausts the positions.
    'rounds: for _ in 0..eligible.len() {
        let mut children: Vec<Entry> = Vec::new();
        let mut seen: HashSet<String> = frontier.iter().map(|e| e.text.clone()).collect();
        for parent in &frontier {
            let used = parent.candidate.edited_positions();
            for &position in &eligible {
                if used.contains(&position) {
                    continue;
                }
                let mut edits: Vec<Edit> = Vec::new();
                for operator in operators {
                    match operator.char_kind() {
                        None => edits.extend(synonym_edits(&original, position, table, synonym_limit)?),
                        Some(kind) => {
                            edits.extend(char_edits(&original, position, &[kind], &mut ctx.rng)?)
                        }
                    }
                }
                for edit in edits {
                    let candidate = parent.candidate.extended(&original, edit)?;
                    if !check_constraints(&original, &candidate, ctx.constraints).is_pass() {
                        continue;
                    }
                    let text = candidate.text.text();
                    if !seen.insert(text.clone()) {
                        continue;
                    }
                    match evaluate_candidate(ctx, target, &candidate) {
                        Err(SearchError::Model(_)) => continue,
                        Err(other) => return Err(other),
                        Ok(None) => break 'rounds,
                        Ok(Some(eval)) if eval.status == GoalStatus::Success => {
                            trace.push(eval.score);
                            return Ok(finish_outcome(
                                ctx,
                                target,
                                OutcomeStatus::Success,
                                &candidate,
                                Some(base_label),
                                Some(eval.label),
                                trace,
                            ));
                        }
                        Ok(Some(eval)) => children.push(Entry {
                            candidate,
                            score: eval.score,
                            label: eval.label,
                            text,
                        }),
                    }
                }
            }
        }
        if children.is_empty() {
            break;
        }
        let before: Vec<String> = frontier.iter().map(|e| e.text.clone()).collect();
        let mut merged: Vec<Entry> = frontier.drain(..).chain(children).collect();
        merged.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are never NaN")
                .then(a.candidate.edits.len().cmp(&b.candidate.edits.len()))
                .then(a.text.cmp(&b.text))
        });
        merged.truncate(width);
        let stalled = merged.len() == before.len()
            && merged.iter().zip(&before).all(|(e, t)| e.text == *t);
        frontier = merged;
        if stalled {
            break;
        }
        trace.push(frontier[0].score);
    }
    let best = &frontier[0];
    Ok(finish_outcome(
        ctx,
        target,
        residual_status(ctx),
        &best.candidate,
        Some(base_label),
        Some(best.label.clone()),
        trace,
    ))
}
