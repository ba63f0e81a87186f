//! Reversible tokenization and prompt assembly.
//!
//! Everything downstream edits text at the token level, so the tokenizer is
//! deliberately small and exactly invertible: words are maximal runs of
//! letters, digits, and apostrophes; every other non-whitespace character
//! becomes a single punctuation token; whitespace is kept verbatim in the
//! gaps between tokens. [`TokenizedText::text`] reproduces the input string
//! byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("token position {position} out of range (token count {count})")]
    PositionOutOfRange { position: usize, count: usize },
    #[error("replacement surface must be non-empty")]
    EmptySurface,
    #[error("prompt prefix must be non-empty")]
    EmptyPrompt,
}

/// Coarse classification of a token surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Number,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Byte offset of the surface within the detokenized string.
    pub start_byte: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn end_byte(&self) -> usize {
        self.start_byte + self.surface.len()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || c.is_numeric() || c == '\'' || c == '\u{2019}'
}

/// Kind of a surface in isolation: any letter makes it a word, otherwise any
/// digit makes it a number, otherwise it is punctuation.
pub fn classify_surface(surface: &str) -> TokenKind {
    if surface.chars().any(|c| c.is_alphabetic()) {
        TokenKind::Word
    } else if surface.chars().any(|c| c.is_numeric()) {
        TokenKind::Number
    } else {
        TokenKind::Punct
    }
}

/// A string split into tokens plus the whitespace gaps between them.
///
/// The gap vector always holds `tokens.len() + 1` entries: `gaps[i]` precedes
/// `tokens[i]` and the final entry is trailing whitespace. Token offsets are
/// recomputed whenever a surface changes, so `start_byte` is always valid for
/// the current state, not the string the tokens originally came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedText {
    tokens: Vec<Token>,
    gaps: Vec<String>,
}

/// Splits `text` into word, number, and punctuation tokens.
pub fn tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    let mut gaps: Vec<String> = Vec::new();
    let mut gap = String::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            gap.push(c);
            i += 1;
        } else if is_word_char(c) {
            let mut surface = String::new();
            while i < chars.len() && is_word_char(chars[i].1) {
                surface.push(chars[i].1);
                i += 1;
            }
            gaps.push(std::mem::take(&mut gap));
            tokens.push(Token {
                kind: classify_surface(&surface),
                surface,
                start_byte: start,
            });
        } else {
            gaps.push(std::mem::take(&mut gap));
            tokens.push(Token {
                surface: c.to_string(),
                start_byte: start,
                kind: TokenKind::Punct,
            });
            i += 1;
        }
    }
    gaps.push(gap);
    TokenizedText { tokens, gaps }
}

impl TokenizedText {
    pub fn empty() -> Self {
        TokenizedText {
            tokens: Vec::new(),
            gaps: vec![String::new()],
        }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, position: usize) -> Option<&Token> {
        self.tokens.get(position)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of tokens with [`TokenKind::Word`].
    pub fn word_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Word)
            .count()
    }

    /// Positions of word tokens, in order.
    pub fn word_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TokenKind::Word)
            .map(|(i, _)| i)
            .collect()
    }

    /// Joins gaps and surfaces back into a single string. For a freshly
    /// tokenized value this is the exact input string.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(&self.gaps[i]);
            out.push_str(&tok.surface);
        }
        out.push_str(self.gaps.last().map(String::as_str).unwrap_or(""));
        out
    }

    fn recompute_offsets(&mut self) {
        let mut offset = 0;
        for (i, tok) in self.tokens.iter_mut().enumerate() {
            offset += self.gaps[i].len();
            tok.start_byte = offset;
            offset += tok.surface.len();
        }
    }

    /// Copy with the surface at `position` replaced. The new surface is
    /// reclassified and all offsets are recomputed.
    pub fn with_token_replaced(&self, position: usize, surface: &str) -> Result<Self, TextError> {
        if position >= self.tokens.len() {
            return Err(TextError::PositionOutOfRange {
                position,
                count: self.tokens.len(),
            });
        }
        if surface.is_empty() {
            return Err(TextError::EmptySurface);
        }
        let mut next = self.clone();
        next.tokens[position].surface = surface.to_string();
        next.tokens[position].kind = classify_surface(surface);
        next.recompute_offsets();
        Ok(next)
    }

    /// Copy with the token at `position` removed. One of the two gaps around
    /// the token is dropped so that the surrounding whitespace stays single:
    /// the gap after the token for interior positions, the gap before it when
    /// the last token is removed.
    pub fn with_token_deleted(&self, position: usize) -> Result<Self, TextError> {
        if position >= self.tokens.len() {
            return Err(TextError::PositionOutOfRange {
                position,
                count: self.tokens.len(),
            });
        }
        let mut next = self.clone();
        next.tokens.remove(position);
        if position + 1 == self.tokens.len() {
            next.gaps.remove(position);
        } else {
            next.gaps.remove(position + 1);
        }
        next.recompute_offsets();
        Ok(next)
    }

    /// Concatenates two tokenized strings with `joint` between them.
    pub fn joined(head: &Self, joint: &str, tail: &Self) -> Self {
        if head.is_empty() {
            let mut next = tail.clone();
            next.gaps[0] = format!("{}{}{}", head.gaps[0], joint, next.gaps[0]);
            next.recompute_offsets();
            return next;
        }
        if tail.is_empty() {
            let mut next = head.clone();
            let last = next.gaps.len() - 1;
            next.gaps[last] = format!("{}{}{}", next.gaps[last], joint, tail.gaps[0]);
            return next;
        }
        let mut tokens = head.tokens.clone();
        tokens.extend(tail.tokens.iter().cloned());
        let mut gaps = head.gaps[..head.gaps.len() - 1].to_vec();
        gaps.push(format!(
            "{}{}{}",
            head.gaps[head.gaps.len() - 1],
            joint,
            tail.gaps[0]
        ));
        gaps.extend(tail.gaps[1..].iter().cloned());
        let mut next = TokenizedText { tokens, gaps };
        next.recompute_offsets();
        next
    }
}

/// Byte range within a string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn slice<'a>(&self, s: &'a str) -> &'a str {
        &s[self.start..self.end]
    }
}

/// Instruction prefix placed before every example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    prefix: String,
    separator: String,
}

impl PromptTemplate {
    pub fn new(prefix: &str, separator: &str) -> Result<Self, TextError> {
        if prefix.is_empty() {
            return Err(TextError::EmptyPrompt);
        }
        Ok(PromptTemplate {
            prefix: prefix.to_string(),
            separator: separator.to_string(),
        })
    }

    /// Prefix with a single-space separator.
    pub fn with_prefix(prefix: &str) -> Result<Self, TextError> {
        PromptTemplate::new(prefix, " ")
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }
}

/// Fully assembled classifier input with the prompt and example regions
/// marked off by byte spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInput {
    pub full_text: String,
    pub prompt_span: Span,
    pub example_span: Span,
}

impl ModelInput {
    pub fn example_text(&self) -> &str {
        self.example_span.slice(&self.full_text)
    }

    pub fn prompt_text(&self) -> &str {
        self.prompt_span.slice(&self.full_text)
    }
}

/// Builds `prefix + separator + example` and records both spans.
pub fn render_input(prompt: &PromptTemplate, example: &str) -> ModelInput {
    let full_text = format!("{}{}{}", prompt.prefix, prompt.separator, example);
    let prompt_span = Span::new(0, prompt.prefix.len());
    let example_start = prompt.prefix.len() + prompt.separator.len();
    let example_span = Span::new(example_start, full_text.len());
    ModelInput {
        full_text,
        prompt_span,
        example_span,
    }
}
