//! Rule-based sentence splitting and tokenization.
//!
//! Whitespace separates chunks; leading and trailing punctuation is peeled off
//! each chunk unless the chunk is a listed abbreviation. A sentence ends after
//! a terminator token (`.`, `!`, `?`, `...`) that is followed by whitespace and
//! an uppercase letter, or by the end of the input.

use std::collections::BTreeSet;
use std::path::Path;

use crate::conllu::{misc_set, Document, Sentence, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizerConfig {
    /// Entries end in `.` and are kept whole, e.g. `d.w.s.`.
    pub abbreviations: BTreeSet<String>,
    /// Characters split off the edges of a chunk.
    pub punctuation: BTreeSet<char>,
    pub terminators: BTreeSet<char>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            abbreviations: BTreeSet::new(),
            punctuation: ".,;:!?()[]{}\"«»„“”‘’…/".chars().collect(),
            terminators: ['.', '!', '?'].into_iter().collect(),
        }
    }
}

impl TokenizerConfig {
    pub fn with_abbreviations<I, S>(mut self, abbreviations: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for a in abbreviations {
            let a = a.into();
            if a.len() < 2 || !a.ends_with('.') || a.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "abbreviation '{a}' must be a non-empty word ending in '.'"
                )));
            }
            self.abbreviations.insert(a);
        }
        Ok(self)
    }

    /// Reads abbreviations from a file with one entry per line. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn load_abbreviations(self, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        self.with_abbreviations(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned)
                .collect::<Vec<_>>(),
        )
    }

    fn is_abbreviation(&self, chunk: &str) -> bool {
        self.abbreviations.contains(chunk)
            || (!self.abbreviations.is_empty() && self.abbreviations.contains(&chunk.to_lowercase()))
    }

    fn is_terminator_token(&self, form: &str) -> bool {
        !form.is_empty() && form.chars().all(|c| self.terminators.contains(&c) || c == '…')
    }
}

/// A token with its char offsets into the original input.
struct Piece<'a> {
    form: &'a str,
    start: usize,
    /// Whitespace follows this piece in the input (or the input ends).
    space_after: bool,
}

fn split_chunk<'a>(chunk: &'a str, cfg: &TokenizerConfig, out: &mut Vec<&'a str>) {
    if cfg.is_abbreviation(chunk) {
        out.push(chunk);
        return;
    }
    let mut rest = chunk;
    let mut lead = Vec::new();
    while let Some(c) = rest.chars().next() {
        if cfg.punctuation.contains(&c) && rest.len() > c.len_utf8() {
            lead.push(&rest[..c.len_utf8()]);
            rest = &rest[c.len_utf8()..];
        } else {
            break;
        }
    }
    let mut trail = Vec::new();
    loop {
        if cfg.is_abbreviation(rest) {
            break;
        }
        if rest.len() > 3 && rest.ends_with("...") {
            trail.push(&rest[rest.len() - 3..]);
            rest = &rest[..rest.len() - 3];
            continue;
        }
        match rest.chars().next_back() {
            Some(c) if cfg.punctuation.contains(&c) && rest.len() > c.len_utf8() => {
                let at = rest.len() - c.len_utf8();
                trail.push(&rest[at..]);
                rest = &rest[..at];
            }
            _ => break,
        }
    }
    out.extend(lead);
    out.push(rest);
    out.extend(trail.into_iter().rev());
}

fn pieces<'a>(text: &'a str, cfg: &TokenizerConfig) -> Vec<Piece<'a>> {
    let mut out = Vec::new();
    let mut forms = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some(&(start_byte, c)) = iter.peek() {
        if c.is_whitespace() {
            iter.next();
            continue;
        }
        let mut end_byte = start_byte;
        while let Some(&(b, c)) = iter.peek() {
            if c.is_whitespace() {
                break;
            }
            end_byte = b + c.len_utf8();
            iter.next();
        }
        let chunk = &text[start_byte..end_byte];
        forms.clear();
        split_chunk(chunk, cfg, &mut forms);
        let mut offset = start_byte;
        let n = forms.len();
        for (i, f) in forms.iter().enumerate() {
            out.push(Piece {
                form: f,
                start: offset,
                space_after: i + 1 == n,
            });
            offset += f.len();
        }
    }
    out
}

/// Splits raw text into sentences and tokens.
///
/// Each sentence gets `sent_id` and `text` comments; tokens glued to their
/// successor carry `SpaceAfter=No`, and `span` indexes the sentence text.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Document {
    let pieces = pieces(text, cfg);
    let mut sentences: Vec<Vec<&Piece>> = Vec::new();
    let mut current: Vec<&Piece> = Vec::new();
    for (i, p) in pieces.iter().enumerate() {
        current.push(p);
        let boundary = cfg.is_terminator_token(p.form)
            && match pieces.get(i + 1) {
                None => true,
                Some(next) => {
                    p.space_after && next.form.chars().next().is_some_and(char::is_uppercase)
                }
            };
        if boundary {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }

    let sentences = sentences
        .into_iter()
        .enumerate()
        .map(|(si, ps)| {
            let mut s = Sentence::new();
            let last = ps.len() - 1;
            for (i, p) in ps.iter().enumerate() {
                let mut t = Token::new(i + 1, p.form);
                if !p.space_after && i < last {
                    misc_set(&mut t.misc, "SpaceAfter", "No");
                }
                s.tokens.push(t);
            }
            debug_assert!(ps.windows(2).all(|w| w[0].start < w[1].start));
            s.set_comment("sent_id", (si + 1).to_string());
            s.set_comment("text", s.reconstruct_text());
            s.recompute_spans();
            s
        })
        .collect();
    Document::from_sentences(sentences)
}
