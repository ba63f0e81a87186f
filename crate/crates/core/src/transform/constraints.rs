//! Validity rules a candidate must satisfy before it is worth a query.
//!
//! Checks are enumerated rather than short-circuited: a rejected candidate
//! reports every rule it breaks, which makes constraint tuning visible in
//! logs instead of a guessing game. The original, unedited input always
//! passes.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::text::{tokenize, TokenKind, TokenizedText};
use crate::transform::{Candidate, Edit, EditKind};

/// Rule set applied to every candidate before querying.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    /// Words that must not be edited (matched against the surface the edit
    /// replaces, lowercased).
    pub stop_words: HashSet<String>,
    /// Word-to-tag lexicon; when present, a substitution must keep the tag
    /// of the word it replaces. Words missing from the lexicon are skipped.
    pub pos_lexicon: Option<HashMap<String, String>>,
    /// Maximum fraction of the original words a candidate may change.
    pub max_change_rate: f64,
    /// Words that must not appear in replacement surfaces or appended
    /// fragments (lowercased).
    pub blacklist: HashSet<String>,
    /// Maximum number of edits in one candidate.
    pub max_edits: usize,
    /// Reject candidates that edit the same token position twice.
    pub forbid_re_edit: bool,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            stop_words: HashSet::new(),
            pos_lexicon: None,
            max_change_rate: 0.2,
            blacklist: HashSet::new(),
            max_edits: 20,
            forbid_re_edit: true,
        }
    }
}

impl ConstraintSet {
    /// A set that accepts everything; useful for strategies that manage
    /// their own limits.
    pub fn permissive() -> Self {
        ConstraintSet {
            stop_words: HashSet::new(),
            pos_lexicon: None,
            max_change_rate: f64::INFINITY,
            blacklist: HashSet::new(),
            max_edits: usize::MAX,
            forbid_re_edit: false,
        }
    }
}

/// One broken rule.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum Violation {
    #[error("position {position} edits stop word {word:?}")]
    StopWord { position: usize, word: String },
    #[error("position {position} changes part of speech {before_tag} -> {after_tag}")]
    PosMismatch {
        position: usize,
        before_tag: String,
        after_tag: String,
    },
    #[error("change rate {rate:.3} exceeds {max:.3}")]
    ChangeRate { rate: f64, max: f64 },
    #[error("blacklisted word {word:?} introduced")]
    Blacklisted { word: String },
    #[error("{edits} edits exceed budget of {max}")]
    EditBudget { edits: usize, max: usize },
    #[error("position {position} edited more than once")]
    ReEdit { position: usize },
}

/// Outcome of a constraint check.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintCheck {
    Pass,
    Violations(Vec<Violation>),
}

impl ConstraintCheck {
    pub fn is_pass(&self) -> bool {
        matches!(self, ConstraintCheck::Pass)
    }
}

/// Distinct original word positions touched by token-level edits, plus the
/// number of words each appended fragment introduces. Edits to punctuation
/// or number tokens do not add to the count.
pub fn changed_word_count(original: &TokenizedText, edits: &[Edit]) -> usize {
    let mut positions: Vec<usize> = edits
        .iter()
        .filter(|e| !e.kind.is_append())
        .filter(|e| {
            original
                .token(e.position)
                .map(|t| t.kind == TokenKind::Word)
                .unwrap_or(false)
        })
        .map(|e| e.position)
        .collect();
    positions.sort_unstable();
    positions.dedup();
    let appended: usize = edits
        .iter()
        .filter(|e| e.kind.is_append())
        .map(|e| tokenize(&e.after).word_count())
        .sum();
    positions.len() + appended
}

fn pos_sensitive(kind: EditKind) -> bool {
    kind == EditKind::Substitute || kind.is_char_level()
}

/// Checks `candidate` against every rule in `set`, reporting all violations.
pub fn check_constraints(
    original: &TokenizedText,
    candidate: &Candidate,
    set: &ConstraintSet,
) -> ConstraintCheck {
    if candidate.is_identity() {
        return ConstraintCheck::Pass;
    }
    let mut violations = Vec::new();

    let mut flagged_stop = HashSet::new();
    for edit in &candidate.edits {
        if edit.kind.is_append() {
            continue;
        }
        let word = edit.before.to_lowercase();
        if set.stop_words.contains(&word) && flagged_stop.insert(edit.position) {
            violations.push(Violation::StopWord {
                position: edit.position,
                word,
            });
        }
    }

    if let Some(lexicon) = &set.pos_lexicon {
        for edit in &candidate.edits {
            if !pos_sensitive(edit.kind) {
                continue;
            }
            let before_tag = lexicon.get(&edit.before.to_lowercase());
            let after_tag = lexicon.get(&edit.after.to_lowercase());
            if let (Some(before_tag), Some(after_tag)) = (before_tag, after_tag) {
                if before_tag != after_tag {
                    violations.push(Violation::PosMismatch {
                        position: edit.position,
                        before_tag: before_tag.clone(),
                        after_tag: after_tag.clone(),
                    });
                }
            }
        }
    }

    let words = original.word_count();
    let changed = changed_word_count(original, &candidate.edits);
    let rate = if changed == 0 {
        0.0
    } else if words == 0 {
        f64::INFINITY
    } else {
        changed as f64 / words as f64
    };
    if rate > set.max_change_rate {
        violations.push(Violation::ChangeRate {
            rate,
            max: set.max_change_rate,
        });
    }

    if !set.blacklist.is_empty() {
        let mut flagged: HashSet<String> = HashSet::new();
        for edit in &candidate.edits {
            if edit.kind.is_append() {
                for token in tokenize(&edit.after).tokens() {
                    let word = token.surface.to_lowercase();
                    if set.blacklist.contains(&word) && flagged.insert(word.clone()) {
                        violations.push(Violation::Blacklisted { word });
                    }
                }
            } else {
                let word = edit.after.to_lowercase();
                if set.blacklist.contains(&word) && flagged.insert(word.clone()) {
                    violations.push(Violation::Blacklisted { word });
                }
            }
        }
    }

    if candidate.edits.len() > set.max_edits {
        violations.push(Violation::EditBudget {
            edits: candidate.edits.len(),
            max: set.max_edits,
        });
    }

    if set.forbid_re_edit {
        let mut seen = HashSet::new();
        let mut flagged = HashSet::new();
        for edit in &candidate.edits {
            if edit.kind.is_append() {
                continue;
            }
            if !seen.insert(edit.position) && flagged.insert(edit.position) {
                violations.push(Violation::ReEdit {
                    position: edit.position,
                });
            }
        }
    }

    if violations.is_empty() {
        ConstraintCheck::Pass
    } else {
        ConstraintCheck::Violations(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{append_edit, AppendPlacement};

    fn set_with(f: impl FnOnce(&mut ConstraintSet)) -> ConstraintSet {
        let mut set = ConstraintSet::default();
        f(&mut set);
        set
    }

    fn violations(check: ConstraintCheck) -> Vec<Violation> {
        match check {
            ConstraintCheck::Pass => Vec::new(),
            ConstraintCheck::Violations(v) => v,
        }
    }

    #[test]
    fn identity_always_passes() {
        let original = tokenize("the and of");
        let set = set_with(|s| {
            s.stop_words = ["the", "and", "of"].iter().map(|w| w.to_string()).collect();
            s.max_change_rate = 0.0;
            s.max_edits = 0;
        });
        let cand = Candidate::identity(&original);
        assert!(check_constraints(&original, &cand, &set).is_pass());
    }

    #[test]
    fn stop_word_edits_are_flagged() {
        let original = tokenize("The movie was good");
        let set = set_with(|s| {
            s.stop_words.insert("the".to_string());
            s.max_change_rate = 1.0;
        });
        let cand = Candidate::single(&original, Edit::substitute(0, "The", "A")).unwrap();
        let got = violations(check_constraints(&original, &cand, &set));
        assert_eq!(
            got,
            vec![Violation::StopWord {
                position: 0,
                word: "the".to_string()
            }]
        );
    }

    #[test]
    fn pos_mismatch_uses_lexicon_and_skips_unknowns() {
        let original = tokenize("a good movie");
        let lexicon: HashMap<String, String> = [
            ("good", "ADJ"),
            ("run", "VERB"),
        ]
        .iter()
        .map(|(w, t)| (w.to_string(), t.to_string()))
        .collect();
        let set = set_with(|s| {
            s.pos_lexicon = Some(lexicon);
            s.max_change_rate = 1.0;
        });

        let mismatch = Candidate::single(&original, Edit::substitute(1, "good", "run")).unwrap();
        let got = violations(check_constraints(&original, &mismatch, &set));
        assert_eq!(
            got,
            vec![Violation::PosMismatch {
                position: 1,
                before_tag: "ADJ".to_string(),
                after_tag: "VERB".to_string()
            }]
        );

        let unknown = Candidate::single(&original, Edit::substitute(1, "good", "zzz")).unwrap();
        assert!(check_constraints(&original, &unknown, &set).is_pass());
    }

    #[test]
    fn change_rate_boundary_is_inclusive() {
        let original = tokenize("one two three four five six seven eight nine ten");
        let set = set_with(|s| s.max_change_rate = 0.2);
        let two_edits = Candidate::from_edits(
            &original,
            vec![
                Edit::substitute(0, "one", "win"),
                Edit::substitute(2, "three", "tree"),
            ],
        )
        .unwrap();
        assert!(check_constraints(&original, &two_edits, &set).is_pass());

        let three_edits = two_edits
            .extended(&original, Edit::substitute(4, "five", "hive"))
            .unwrap();
        let got = violations(check_constraints(&original, &three_edits, &set));
        assert_eq!(
            got,
            vec![Violation::ChangeRate {
                rate: 0.3,
                max: 0.2
            }]
        );
    }

    #[test]
    fn appended_words_count_toward_change_rate() {
        let original = tokenize("one two three four five six seven eight nine ten");
        let set = set_with(|s| s.max_change_rate = 0.2);
        let short = Candidate::single(
            &original,
            append_edit("so true", AppendPlacement::Tail).unwrap(),
        )
        .unwrap();
        assert!(check_constraints(&original, &short, &set).is_pass());

        let long = Candidate::single(
            &original,
            append_edit("and true is true", AppendPlacement::Tail).unwrap(),
        )
        .unwrap();
        let got = violations(check_constraints(&original, &long, &set));
        assert_eq!(got.len(), 1);
        assert!(matches!(got[0], Violation::ChangeRate { .. }));
    }

    #[test]
    fn empty_original_with_edits_is_infinite_rate() {
        let original = tokenize("!!!");
        let set = ConstraintSet::default();
        let cand = Candidate::single(
            &original,
            append_edit("word", AppendPlacement::Tail).unwrap(),
        )
        .unwrap();
        let got = violations(check_constraints(&original, &cand, &set));
        assert!(matches!(got[0], Violation::ChangeRate { rate, .. } if rate.is_infinite()));
    }

    #[test]
    fn blacklist_covers_replacements_and_fragments() {
        let original = tokenize("a good movie");
        let set = set_with(|s| {
            s.blacklist.insert("bad".to_string());
            s.max_change_rate = f64::INFINITY;
        });
        let replaced = Candidate::single(&original, Edit::substitute(1, "good", "Bad")).unwrap();
        assert_eq!(
            violations(check_constraints(&original, &replaced, &set)),
            vec![Violation::Blacklisted {
                word: "bad".to_string()
            }]
        );

        let appended = Candidate::single(
            &original,
            append_edit("so bad", AppendPlacement::Tail).unwrap(),
        )
        .unwrap();
        assert_eq!(
            violations(check_constraints(&original, &appended, &set)),
            vec![Violation::Blacklisted {
                word: "bad".to_string()
            }]
        );
    }

    #[test]
    fn edit_budget_counts_edits_not_words() {
        let original = tokenize("alpha beta gamma delta");
        let set = set_with(|s| {
            s.max_edits = 1;
            s.max_change_rate = f64::INFINITY;
        });
        let cand = Candidate::from_edits(
            &original,
            vec![
                Edit::substitute(0, "alpha", "alppha"),
                Edit::substitute(1, "beta", "betta"),
            ],
        )
        .unwrap();
        let got = violations(check_constraints(&original, &cand, &set));
        assert_eq!(got, vec![Violation::EditBudget { edits: 2, max: 1 }]);
    }

    #[test]
    fn re_edit_detection_can_be_disabled() {
        let original = tokenize("alpha beta");
        let edits = vec![
            Edit::substitute(0, "alpha", "beta"),
            Edit::substitute(0, "beta", "gamma"),
        ];
        let cand = Candidate::from_edits(&original, edits).unwrap();

        let strict = set_with(|s| s.max_change_rate = f64::INFINITY);
        assert_eq!(
            violations(check_constraints(&original, &cand, &strict)),
            vec![Violation::ReEdit { position: 0 }]
        );

        let relaxed = set_with(|s| {
            s.forbid_re_edit = false;
            s.max_change_rate = f64::INFINITY;
        });
        assert!(check_constraints(&original, &cand, &relaxed).is_pass());
    }

    #[test]
    fn violations_accumulate() {
        let original = tokenize("the movie");
        let set = set_with(|s| {
            s.stop_words.insert("the".to_string());
            s.blacklist.insert("bad".to_string());
            s.max_edits = 1;
            s.max_change_rate = 0.5;
        });
        let cand = Candidate::from_edits(
            &original,
            vec![
                Edit::substitute(0, "the", "bad"),
                Edit::substitute(1, "movie", "film"),
            ],
        )
        .unwrap();
        let got = violations(check_constraints(&original, &cand, &set));
        assert_eq!(got.len(), 4);
        assert!(got.iter().any(|v| matches!(v, Violation::StopWord { .. })));
        assert!(got.iter().any(|v| matches!(v, Violation::ChangeRate { .. })));
        assert!(got.iter().any(|v| matches!(v, Violation::Blacklisted { .. })));
        assert!(got.iter().any(|v| matches!(v, Violation::EditBudget { .. })));
    }

    #[test]
    fn changed_word_count_skips_punctuation_and_dedupes() {
        let original = tokenize("good, movie");
        let punct = vec![Edit {
            position: 1,
            kind: EditKind::Substitute,
            before: ",".to_string(),
            after: ";".to_string(),
        }];
        assert_eq!(changed_word_count(&original, &punct), 0);

        let twice = vec![
            Edit::substitute(0, "good", "fine"),
            Edit::substitute(0, "fine", "nice"),
        ];
        assert_eq!(changed_word_count(&original, &twice), 1);

        let with_fragment = vec![
            Edit::substitute(0, "good", "fine"),
            append_edit("and true is true", AppendPlacement::Tail).unwrap(),
        ];
        assert_eq!(changed_word_count(&original, &with_fragment), 5);
    }
}
