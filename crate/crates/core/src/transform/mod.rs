//! Perturbation operators and the edit algebra they produce.
//!
//! Every perturbed input is a [`Candidate`]: an original text plus a replay
//! script of [`Edit`]s. Keeping the script rather than just the final string
//! lets constraints count exactly which words changed, lets search strategies
//! grow a candidate one edit at a time, and lets metrics re-derive the edit
//! cost after the fact.
//!
//! Three operator families generate edits:
//!
//! * word-level synonym substitution from a similarity table,
//! * character-level corruptions (insert, delete, swap, keyboard neighbor,
//!   homoglyph) that keep the first and last characters of a word anchored,
//! * sentence fragments appended before or after the whole input.

pub mod constraints;
pub mod resources;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{tokenize, TokenKind, TokenizedText};
use resources::{homoglyph, qwerty_neighbors, SynonymTable};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("edit position {position} out of range for {count} tokens")]
    PositionOutOfRange { position: usize, count: usize },
    #[error("edit at position {position} expected {expected:?} but found {found:?}")]
    BeforeMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("append fragment is empty")]
    EmptyFragment,
}

/// What a single edit does to the text.
#[derive(Clone, Copy, Debug, Deserialize, Eq, Hash, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    /// Replace a whole token with another surface.
    Substitute,
    /// Insert one character inside a token.
    CharInsert,
    /// Delete one interior character of a token.
    CharDelete,
    /// Swap two adjacent characters of a token.
    CharSwap,
    /// Replace one character with a keyboard neighbor.
    CharNeighbor,
    /// Replace one character with a visually confusable one.
    CharHomoglyph,
    /// Remove a token entirely.
    WordDelete,
    /// Prepend a sentence fragment to the whole input.
    AppendHead,
    /// Append a sentence fragment after the whole input.
    AppendTail,
}

impl EditKind {
    /// Edits that attach a fragment rather than touching a token in place.
    pub fn is_append(self) -> bool {
        matches!(self, EditKind::AppendHead | EditKind::AppendTail)
    }

    /// Edits that rewrite a token at the character level.
    pub fn is_char_level(self) -> bool {
        matches!(
            self,
            EditKind::CharInsert
                | EditKind::CharDelete
                | EditKind::CharSwap
                | EditKind::CharNeighbor
                | EditKind::CharHomoglyph
        )
    }
}

/// One step of a replay script. `position` is a token index at the time the
/// edit is applied; append edits ignore it. `before` records the surface the
/// edit expects to find, which replay verifies.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct Edit {
    pub position: usize,
    pub kind: EditKind,
    pub before: String,
    pub after: String,
}

impl Edit {
    pub fn substitute(position: usize, before: &str, after: &str) -> Self {
        Edit {
            position,
            kind: EditKind::Substitute,
            before: before.to_string(),
            after: after.to_string(),
        }
    }
}

/// Replays `edits` over `original` in order, verifying each `before` surface
/// against the text as it stands when the edit applies.
pub fn apply_edits(
    original: &TokenizedText,
    edits: &[Edit],
) -> Result<TokenizedText, TransformError> {
    let mut text = original.clone();
    for edit in edits {
        text = apply_one(&text, edit)?;
    }
    Ok(text)
}

fn apply_one(text: &TokenizedText, edit: &Edit) -> Result<TokenizedText, TransformError> {
    if edit.kind.is_append() {
        let fragment = tokenize(&edit.after);
        if fragment.is_empty() {
            return Err(TransformError::EmptyFragment);
        }
        return Ok(match edit.kind {
            EditKind::AppendHead => TokenizedText::joined(&fragment, " ", text),
            _ => TokenizedText::joined(text, " ", &fragment),
        });
    }
    let token = text
        .token(edit.position)
        .ok_or(TransformError::PositionOutOfRange {
            position: edit.position,
            count: text.len(),
        })?;
    if token.surface != edit.before {
        return Err(TransformError::BeforeMismatch {
            position: edit.position,
            expected: edit.before.clone(),
            found: token.surface.clone(),
        });
    }
    let next = match edit.kind {
        EditKind::WordDelete => text.with_token_deleted(edit.position),
        _ => text.with_token_replaced(edit.position, &edit.after),
    };
    // Range and emptiness were checked above, so the text ops cannot fail.
    Ok(next.expect("edit preconditions already verified"))
}

/// A perturbed text together with the replay script that produced it.
///
/// Scripts are kept in canonical order: token edits sorted by position,
/// append edits after them in insertion order. All strategies extend
/// candidates through [`Candidate::extended`], which preserves that order,
/// so the `before` field of a token edit is always the original surface at
/// that position.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub edits: Vec<Edit>,
    pub text: TokenizedText,
}

impl Candidate {
    /// The unedited original.
    pub fn identity(original: &TokenizedText) -> Self {
        Candidate {
            edits: Vec::new(),
            text: original.clone(),
        }
    }

    /// Builds a candidate by replaying `edits` over `original`.
    pub fn from_edits(
        original: &TokenizedText,
        edits: Vec<Edit>,
    ) -> Result<Self, TransformError> {
        let text = apply_edits(original, &edits)?;
        Ok(Candidate { edits, text })
    }

    /// A single-edit candidate.
    pub fn single(original: &TokenizedText, edit: Edit) -> Result<Self, TransformError> {
        Candidate::identity(original).extended(original, edit)
    }

    /// Copy of this candidate with one more edit, re-applied from `original`.
    /// The new edit is spliced into canonical order, so an edit computed
    /// against the original text can be merged into any chain that has not
    /// touched its position.
    pub fn extended(&self, original: &TokenizedText, edit: Edit) -> Result<Self, TransformError> {
        let mut edits = self.edits.clone();
        let at = if edit.kind.is_append() {
            edits.len()
        } else {
            edits
                .iter()
                .position(|e| e.kind.is_append() || e.position > edit.position)
                .unwrap_or(edits.len())
        };
        edits.insert(at, edit);
        Candidate::from_edits(original, edits)
    }

    pub fn is_identity(&self) -> bool {
        self.edits.is_empty()
    }

    /// Token positions of the original text touched by token-level edits,
    /// deduplicated and sorted.
    pub fn edited_positions(&self) -> Vec<usize> {
        let mut positions: Vec<usize> = self
            .edits
            .iter()
            .filter(|e| !e.kind.is_append())
            .map(|e| e.position)
            .collect();
        positions.sort_unstable();
        positions.dedup();
        positions
    }
}

/// Rewrites `synonym` to echo the casing of `original`: all-caps stays
/// all-caps, a capitalized word stays capitalized, anything else is returned
/// as the table stores it (lowercase).
fn match_case(original: &str, synonym: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().map(char::is_uppercase).unwrap_or(false);
    let rest_upper = original.chars().skip(1).any(char::is_uppercase);
    let all_upper = first_upper && (original.chars().count() == 1 || rest_upper)
        && original.chars().all(|c| !c.is_lowercase());
    if all_upper {
        synonym.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(synonym.len());
        let mut syn_chars = synonym.chars();
        if let Some(c) = syn_chars.next() {
            out.extend(c.to_uppercase());
        }
        out.push_str(syn_chars.as_str());
        out
    } else {
        synonym.to_string()
    }
}

/// Substitution edits for the word at `position`, best synonym first, up to
/// `limit`. Non-word tokens and words missing from the table yield nothing.
pub fn synonym_edits(
    text: &TokenizedText,
    position: usize,
    table: &SynonymTable,
    limit: usize,
) -> Result<Vec<Edit>, TransformError> {
    let token = text.token(position).ok_or(TransformError::PositionOutOfRange {
        position,
        count: text.len(),
    })?;
    if token.kind != TokenKind::Word {
        return Ok(Vec::new());
    }
    let mut edits = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for entry in table.synonyms(&token.surface) {
        if edits.len() >= limit {
            break;
        }
        let after = match_case(&token.surface, &entry.word);
        if after == token.surface || !seen.insert(after.clone()) {
            continue;
        }
        edits.push(Edit {
            position,
            kind: EditKind::Substitute,
            before: token.surface.clone(),
            after,
        });
    }
    Ok(edits)
}

/// Character-level edits for the token at `position`, one candidate per slot
/// per requested kind. Interior-only slot rules keep the first and last
/// characters of the token fixed for insert, delete, and swap; neighbor and
/// homoglyph substitutions may touch any character. Duplicate surfaces and
/// no-ops are dropped.
pub fn char_edits(
    text: &TokenizedText,
    position: usize,
    kinds: &[EditKind],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Edit>, TransformError> {
    let token = text.token(position).ok_or(TransformError::PositionOutOfRange {
        position,
        count: text.len(),
    })?;
    if token.kind != TokenKind::Word {
        return Ok(Vec::new());
    }
    let chars: Vec<char> = token.surface.chars().collect();
    let n = chars.len();
    let mut edits = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push = |kind: EditKind, after: String, edits: &mut Vec<Edit>| {
        if after != token.surface && seen.insert(after.clone()) {
            edits.push(Edit {
                position,
                kind,
                before: token.surface.clone(),
                after,
            });
        }
    };
    for kind in kinds {
        match kind {
            EditKind::CharInsert => {
                for slot in 1..n.saturating_sub(1) {
                    let letter = char::from(b'a' + rng.random_range(0..26u8));
                    let mut next = chars.clone();
                    next.insert(slot, letter);
                    push(*kind, next.into_iter().collect(), &mut edits);
                }
            }
            EditKind::CharDelete => {
                for slot in 1..n.saturating_sub(1) {
                    let mut next = chars.clone();
                    next.remove(slot);
                    push(*kind, next.into_iter().collect(), &mut edits);
                }
            }
            EditKind::CharSwap => {
                for slot in 1..n.saturating_sub(1) {
                    let mut next = chars.clone();
                    next.swap(slot, slot + 1);
                    push(*kind, next.into_iter().collect(), &mut edits);
                }
            }
            EditKind::CharNeighbor => {
                for slot in 0..n {
                    let neighbors = qwerty_neighbors(chars[slot]);
                    if neighbors.is_empty() {
                        continue;
                    }
                    let pick = neighbors[rng.random_range(0..neighbors.len())];
                    let mut next = chars.clone();
                    next[slot] = pick;
                    push(*kind, next.into_iter().collect(), &mut edits);
                }
            }
            EditKind::CharHomoglyph => {
                for slot in 0..n {
                    if let Some(glyph) = homoglyph(chars[slot]) {
                        let mut next = chars.clone();
                        next[slot] = glyph;
                        push(*kind, next.into_iter().collect(), &mut edits);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(edits)
}

/// An edit that removes the token at `position`. Used by word-importance
/// probes rather than final candidates.
pub fn word_delete_edit(text: &TokenizedText, position: usize) -> Result<Edit, TransformError> {
    let token = text.token(position).ok_or(TransformError::PositionOutOfRange {
        position,
        count: text.len(),
    })?;
    Ok(Edit {
        position,
        kind: EditKind::WordDelete,
        before: token.surface.clone(),
        after: String::new(),
    })
}

/// Where an appended fragment goes relative to the existing input.
#[derive(Clone, Copy, Debug, Deserialize, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AppendPlacement {
    Head,
    Tail,
}

/// An edit that attaches `fragment` before or after the whole input.
pub fn append_edit(fragment: &str, placement: AppendPlacement) -> Result<Edit, TransformError> {
    if tokenize(fragment).is_empty() {
        return Err(TransformError::EmptyFragment);
    }
    Ok(Edit {
        position: 0,
        kind: match placement {
            AppendPlacement::Head => EditKind::AppendHead,
            AppendPlacement::Tail => EditKind::AppendTail,
        },
        before: String::new(),
        after: fragment.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn surfaces(edits: &[Edit]) -> Vec<&str> {
        edits.iter().map(|e| e.after.as_str()).collect()
    }

    #[test]
    fn substitute_replays_and_verifies() {
        let original = tokenize("a good movie");
        let cand = Candidate::single(&original, Edit::substitute(1, "good", "fine")).unwrap();
        assert_eq!(cand.text.text(), "a fine movie");

        let stale = Edit::substitute(1, "bad", "fine");
        match Candidate::single(&original, stale).unwrap_err() {
            TransformError::BeforeMismatch { expected, found, .. } => {
                assert_eq!(expected, "bad");
                assert_eq!(found, "good");
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn word_delete_merges_whitespace() {
        let original = tokenize("a good movie");
        let edit = word_delete_edit(&original, 1).unwrap();
        let cand = Candidate::single(&original, edit).unwrap();
        assert_eq!(cand.text.text(), "a movie");
    }

    #[test]
    fn appends_join_with_a_single_space() {
        let original = tokenize("fine film.");
        let tail = append_edit("and true is true", AppendPlacement::Tail).unwrap();
        let head = append_edit("note:", AppendPlacement::Head).unwrap();
        let cand = Candidate::from_edits(&original, vec![tail, head]).unwrap();
        // Token edits come first in canonical scripts, but replay itself is
        // order-faithful: the tail fragment lands before the head fragment
        // is prepended.
        assert_eq!(cand.text.text(), "note: fine film. and true is true");
    }

    #[test]
    fn extended_keeps_token_edits_sorted_and_appends_last() {
        let original = tokenize("a good long movie");
        let cand = Candidate::identity(&original)
            .extended(&original, append_edit("x y", AppendPlacement::Tail).unwrap())
            .unwrap()
            .extended(&original, Edit::substitute(3, "movie", "film"))
            .unwrap()
            .extended(&original, Edit::substitute(1, "good", "fine"))
            .unwrap();
        let kinds: Vec<EditKind> = cand.edits.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![EditKind::Substitute, EditKind::Substitute, EditKind::AppendTail]
        );
        assert_eq!(cand.edits[0].position, 1);
        assert_eq!(cand.edits[1].position, 3);
        assert_eq!(cand.text.text(), "a fine long film x y");
        assert_eq!(cand.edited_positions(), vec![1, 3]);
    }

    #[test]
    fn synonym_edits_rank_and_cap() {
        let table = SynonymTable::from_rows(&[
            ("good", "fine", 0.82),
            ("good", "great", 0.80),
            ("good", "decent", 0.74),
        ]);
        let text = tokenize("a good movie");
        let edits = synonym_edits(&text, 1, &table, 2).unwrap();
        assert_eq!(surfaces(&edits), vec!["fine", "great"]);
        assert!(synonym_edits(&text, 0, &table, 5).unwrap().is_empty());
        assert!(synonym_edits(&text, 5, &table, 5).is_err());
    }

    #[test]
    fn synonym_edits_preserve_case() {
        let table = SynonymTable::from_rows(&[("good", "fine", 0.82)]);
        for (input, expected) in [("Good movie", "Fine"), ("GOOD movie", "FINE")] {
            let text = tokenize(input);
            let edits = synonym_edits(&text, 0, &table, 5).unwrap();
            assert_eq!(surfaces(&edits), vec![expected]);
        }
    }

    #[test]
    fn synonym_matching_its_own_casing_is_skipped() {
        let table = SynonymTable::from_rows(&[("good", "fine", 0.9), ("fine", "good", 0.9)]);
        let text = tokenize("fine");
        let edits = synonym_edits(&text, 0, &table, 5).unwrap();
        assert_eq!(surfaces(&edits), vec!["good"]);
    }

    #[test]
    fn swap_keeps_outer_characters_fixed() {
        let text = tokenize("fast");
        let mut rng = derive_rng(7, "test");
        let edits = char_edits(&text, 0, &[EditKind::CharSwap], &mut rng).unwrap();
        let mut got = surfaces(&edits);
        got.sort_unstable();
        assert_eq!(got, vec!["fats", "fsat"]);
    }

    #[test]
    fn homoglyph_substitutions_follow_the_fixed_map() {
        let text = tokenize("fast");
        let mut rng = derive_rng(7, "test");
        let edits = char_edits(&text, 0, &[EditKind::CharHomoglyph], &mut rng).unwrap();
        let mut got = surfaces(&edits);
        got.sort_unstable();
        assert_eq!(got, vec!["f@st", "fa$t"]);
    }

    #[test]
    fn short_tokens_produce_no_interior_edits() {
        let mut rng = derive_rng(7, "test");
        for word in ["a", "at"] {
            let text = tokenize(word);
            let edits = char_edits(
                &text,
                0,
                &[EditKind::CharInsert, EditKind::CharDelete, EditKind::CharSwap],
                &mut rng,
            )
            .unwrap();
            assert!(edits.is_empty(), "{word} yielded {edits:?}");
        }
    }

    #[test]
    fn delete_and_insert_stay_interior() {
        let text = tokenize("fast");
        let mut rng = derive_rng(7, "test");
        let deletes = char_edits(&text, 0, &[EditKind::CharDelete], &mut rng).unwrap();
        let mut got = surfaces(&deletes);
        got.sort_unstable();
        assert_eq!(got, vec!["fat", "fst"]);

        let inserts = char_edits(&text, 0, &[EditKind::CharInsert], &mut rng).unwrap();
        assert_eq!(inserts.len(), 2);
        for edit in &inserts {
            assert_eq!(edit.after.len(), 5);
            assert!(edit.after.starts_with('f') && edit.after.ends_with("st"));
        }
    }

    #[test]
    fn repeated_letters_do_not_emit_no_op_swaps() {
        let text = tokenize("keep");
        let mut rng = derive_rng(7, "test");
        let edits = char_edits(&text, 0, &[EditKind::CharSwap], &mut rng).unwrap();
        // slots 1 and 2: "kepe" and the e<->e no-op, which is dropped.
        assert_eq!(surfaces(&edits), vec!["kepe"]);
    }

    #[test]
    fn neighbor_edits_are_seed_deterministic() {
        let text = tokenize("fast");
        let mut a = derive_rng(11, "sample:x");
        let mut b = derive_rng(11, "sample:x");
        let ea = char_edits(&text, 0, &[EditKind::CharNeighbor], &mut a).unwrap();
        let eb = char_edits(&text, 0, &[EditKind::CharNeighbor], &mut b).unwrap();
        assert_eq!(ea, eb);
        assert_eq!(ea.len(), 4);
        for edit in &ea {
            assert_ne!(edit.after, "fast");
        }
    }

    #[test]
    fn punctuation_tokens_yield_no_char_edits() {
        let text = tokenize("well!");
        let mut rng = derive_rng(7, "test");
        let edits = char_edits(&text, 1, &[EditKind::CharHomoglyph], &mut rng).unwrap();
        assert!(edits.is_empty());
    }

    #[test]
    fn blank_fragments_are_rejected() {
        assert!(matches!(
            append_edit("   ", AppendPlacement::Tail),
            Err(TransformError::EmptyFragment)
        ));
    }

    #[test]
    fn replay_round_trips_from_stored_script() {
        let original = tokenize("The staff were kind, the food was good.");
        let table = SynonymTable::from_rows(&[("good", "fine", 0.9), ("kind", "nice", 0.8)]);
        let e1 = synonym_edits(&original, 8, &table, 1).unwrap().remove(0);
        let e2 = synonym_edits(&original, 3, &table, 1).unwrap().remove(0);
        let cand = Candidate::identity(&original)
            .extended(&original, e1)
            .unwrap()
            .extended(&original, e2)
            .unwrap();
        let replayed = apply_edits(&original, &cand.edits).unwrap();
        assert_eq!(replayed.text(), cand.text.text());
        assert_eq!(cand.text.text(), "The staff were nice, the food was fine.");
    }
}
