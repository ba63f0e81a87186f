//! Named attack recipes bundling a strategy with its default knobs.

use serde::{Deserialize, Serialize};

use crate::transform::AppendPlacement;

use super::strategies::{
    beam_search, char_bug_search, fixed_transformation_search, greedy_wir_search, random_search,
    saliency_weighted_search, Operator,
};
use super::{ProbeKind, SearchContext, SearchError, SearchOutcome, TargetInput};

/// Distractor sentences for the `stresstest` preset: tautologies that add
/// no sentiment yet often sway a classifier.
pub const STRESSTEST_FRAGMENTS: [&str; 3] = [
    "and true is true",
    "and false is not true",
    "and true is true and true is true",
];

/// Nonsense url-safe handles for the `checklist` preset.
pub const CHECKLIST_FRAGMENTS: [&str; 3] = ["zq0x9v", "u7k2pw", "m4j8tr"];

/// The built-in attack recipes.
#[derive(Clone, Copy, Debug, Deserialize, Eq, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Deletion-ranked greedy synonym substitution.
    Textfooler,
    /// Tautology sentences appended to the text.
    Stresstest,
    /// Nonsense handles appended to the text.
    Checklist,
    /// Greedy character corruptions plus the top synonym.
    Textbugger,
    /// Saliency-weighted synonym substitution.
    Pwws,
    /// Seeded random synonym hill climb.
    Random,
    /// Beam search over synonym substitutions.
    Beam,
}

impl Preset {
    /// All presets, in report order.
    pub const ALL: [Preset; 7] = [
        Preset::Textfooler,
        Preset::Stresstest,
        Preset::Checklist,
        Preset::Textbugger,
        Preset::Pwws,
        Preset::Random,
        Preset::Beam,
    ];

    /// Lowercase identifier as it appears in configs and reports.
    pub fn name(self) -> &'static str {
        match self {
            Preset::Textfooler => "textfooler",
            Preset::Stresstest => "stresstest",
            Preset::Checklist => "checklist",
            Preset::Textbugger => "textbugger",
            Preset::Pwws => "pwws",
            Preset::Random => "random",
            Preset::Beam => "beam",
        }
    }
}

/// Tunable knobs shared by the presets. `Default` matches the recipe
/// descriptions; campaigns may override any field.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
pub struct PresetParams {
    /// Synonyms tried per word by substitution strategies.
    pub synonym_limit: usize,
    /// Frontier size for the beam strategy.
    pub beam_width: usize,
    /// Fragments for append strategies; `None` selects the preset's
    /// built-in list.
    pub fragments: Option<Vec<String>>,
    /// Where append strategies place their fragment.
    pub placement: AppendPlacement,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            synonym_limit: 8,
            beam_width: 4,
            fragments: None,
            placement: AppendPlacement::Tail,
        }
    }
}

/// Runs one preset against one prepared input.
pub fn run_preset(
    preset: Preset,
    ctx: &mut SearchContext,
    target: &TargetInput,
    params: &PresetParams,
) -> Result<SearchOutcome, SearchError> {
    match preset {
        Preset::Textfooler => {
            greedy_wir_search(ctx, target, ProbeKind::Deletion, params.synonym_limit)
        }
        Preset::Pwws => saliency_weighted_search(ctx, target, params.synonym_limit),
        Preset::Textbugger => char_bug_search(ctx, target),
        Preset::Stresstest => {
            let fragments = params
                .fragments
                .clone()
                .unwrap_or_else(|| STRESSTEST_FRAGMENTS.iter().map(|f| f.to_string()).collect());
            fixed_transformation_search(ctx, target, &fragments, params.placement)
        }
        Preset::Checklist => {
            let fragments = params
                .fragments
                .clone()
                .unwrap_or_else(|| CHECKLIST_FRAGMENTS.iter().map(|f| f.to_string()).collect());
            fixed_transformation_search(ctx, target, &fragments, params.placement)
        }
        Preset::Random => random_search(ctx, target, &[Operator::Synonym], params.synonym_limit),
        Preset::Beam => beam_search(
            ctx,
            target,
            &[Operator::Synonym],
            params.beam_width,
            params.synonym_limit,
        ),
    }
}
