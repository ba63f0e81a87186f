//! Word tables and character maps that feed the perturbation operators.
//!
//! All of these are plain data: a synonym table with similarity weights,
//! one-word-per-line stop and blacklist files, a word-to-tag lexicon, and
//! two fixed character maps (keyboard adjacency and homoglyphs). A small
//! bundled synonym table and stop-word list keep the engine usable before
//! anyone supplies corpus-specific files.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> ResourceError {
    ResourceError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynonymEntry {
    pub word: String,
    pub similarity: f64,
}

/// Word to ranked synonyms. Lookups are lowercase; rows keep descending
/// similarity with file order breaking exact ties, and a word never lists
/// itself (such rows are dropped on load).
#[derive(Clone, Debug, Default)]
pub struct SynonymTable {
    entries: HashMap<String, Vec<SynonymEntry>>,
}

impl SynonymTable {
    /// Builds a table from `(word, synonym, similarity)` rows, applying the
    /// same normalization as the file loader.
    pub fn from_rows(rows: &[(&str, &str, f64)]) -> Self {
        let mut table = SynonymTable::default();
        for (word, synonym, similarity) in rows {
            table.push(word, synonym, *similarity);
        }
        table.sort();
        table
    }

    /// Loads a tab-separated table: `word<TAB>synonym<TAB>similarity`.
    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let raw = std::fs::read_to_string(path)?;
        let mut table = SynonymTable::default();
        for (idx, line) in raw.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (word, synonym, similarity) = match (fields.next(), fields.next(), fields.next())
            {
                (Some(w), Some(s), Some(v)) if fields.next().is_none() => (w, s, v),
                _ => return Err(parse_error(path, line_no, "expected 3 tab-separated fields")),
            };
            let similarity: f64 = similarity.trim().parse().map_err(|_| {
                parse_error(path, line_no, format!("bad similarity {similarity:?}"))
            })?;
            if !(0.0..=1.0).contains(&similarity) {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("similarity {similarity} outside [0, 1]"),
                ));
            }
            table.push(word, synonym, similarity);
        }
        table.sort();
        Ok(table)
    }

    /// Small general-purpose table compiled into the crate.
    pub fn bundled() -> Self {
        static RAW: &str = include_str!("../../data/synonyms.tsv");
        let mut table = SynonymTable::default();
        for line in RAW.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let word = fields.next().expect("bundled table well formed");
            let synonym = fields.next().expect("bundled table well formed");
            let similarity: f64 = fields
                .next()
                .and_then(|v| v.trim().parse().ok())
                .expect("bundled table well formed");
            table.push(word, synonym, similarity);
        }
        table.sort();
        table
    }

    fn push(&mut self, word: &str, synonym: &str, similarity: f64) {
        let word = word.trim().to_lowercase();
        let synonym = synonym.trim().to_lowercase();
        if word == synonym || word.is_empty() || synonym.is_empty() {
            return;
        }
        self.entries
            .entry(word)
            .or_default()
            .push(SynonymEntry {
                word: synonym,
                similarity,
            });
    }

    fn sort(&mut self) {
        for list in self.entries.values_mut() {
            list.sort_by(|a, b| b.similarity.partial_cmp(&a.similarity).unwrap());
        }
    }

    /// Ranked synonyms for `word` (case-insensitive), best first.
    pub fn synonyms(&self, word: &str) -> &[SynonymEntry] {
        self.entries
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Loads a one-word-per-line list, lowercasing each entry.
pub fn load_word_list(path: &Path) -> Result<HashSet<String>, ResourceError> {
    let raw = std::fs::read_to_string(path)?;
    Ok(raw
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Stop words compiled into the crate, used when no file is configured.
pub fn bundled_stop_words() -> HashSet<String> {
    static RAW: &str = include_str!("../../data/stop_words.txt");
    RAW.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Loads a tab-separated `word<TAB>tag` lexicon for the part-of-speech
/// constraint.
pub fn load_pos_lexicon(path: &Path) -> Result<HashMap<String, String>, ResourceError> {
    let raw = std::fs::read_to_string(path)?;
    let mut lexicon = HashMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next()) {
            (Some(word), Some(tag)) if fields.next().is_none() && !tag.trim().is_empty() => {
                lexicon.insert(word.trim().to_lowercase(), tag.trim().to_string());
            }
            _ => return Err(parse_error(path, line_no, "expected 2 tab-separated fields")),
        }
    }
    Ok(lexicon)
}

/// Keys adjacent to `c` on a QWERTY layout (letters only, lowercase).
pub fn qwerty_neighbors(c: char) -> &'static [char] {
    match c.to_ascii_lowercase() {
        'q' => &['w', 'a'],
        'w' => &['q', 'e', 'a', 's'],
        'e' => &['w', 'r', 's', 'd'],
        'r' => &['e', 't', 'd', 'f'],
        't' => &['r', 'y', 'f', 'g'],
        'y' => &['t', 'u', 'g', 'h'],
        'u' => &['y', 'i', 'h', 'j'],
        'i' => &['u', 'o', 'j', 'k'],
        'o' => &['i', 'p', 'k', 'l'],
        'p' => &['o', 'l'],
        'a' => &['q', 'w', 's', 'z'],
        's' => &['w', 'e', 'a', 'd', 'z', 'x'],
        'd' => &['e', 'r', 's', 'f', 'x', 'c'],
        'f' => &['r', 't', 'd', 'g', 'c', 'v'],
        'g' => &['t', 'y', 'f', 'h', 'v', 'b'],
        'h' => &['y', 'u', 'g', 'j', 'b', 'n'],
        'j' => &['u', 'i', 'h', 'k', 'n', 'm'],
        'k' => &['i', 'o', 'j', 'l', 'm'],
        'l' => &['o', 'p', 'k'],
        'z' => &['a', 's', 'x'],
        'x' => &['s', 'd', 'z', 'c'],
        'c' => &['d', 'f', 'x', 'v'],
        'v' => &['f', 'g', 'c', 'b'],
        'b' => &['g', 'h', 'v', 'n'],
        'n' => &['h', 'j', 'b', 'm'],
        'm' => &['j', 'k', 'n'],
        _ => &[],
    }
}

/// Visually confusable replacement for `c`, if one exists.
pub fn homoglyph(c: char) -> Option<char> {
    match c.to_ascii_lowercase() {
        'o' => Some('0'),
        'l' => Some('1'),
        'a' => Some('@'),
        'e' => Some('3'),
        'i' => Some('1'),
        's' => Some('$'),
        _ => None,
    }
}
