//! CoNLL-U and TSV reading and writing.

use std::fmt::Write as _;

use super::{Comment, Document, Features, MultiwordRange, Sentence, Token, Upos};
use crate::error::{Error, Result};

/// Comment keys with this prefix in the first comment block carry document metadata.
const DOC_META_PREFIX: &str = "doc.";

pub const TSV_HEADER: &str = "doc_id\tsent_id\ttoken_id\tform\tlemma\tupos\txpos\tfeats\thead\tdeprel";

struct Block {
    first_line: usize,
    comments: Vec<Comment>,
    tokens: Vec<Token>,
    ranges: Vec<MultiwordRange>,
}

impl Block {
    fn new(first_line: usize) -> Self {
        Block {
            first_line,
            comments: Vec::new(),
            tokens: Vec::new(),
            ranges: Vec::new(),
        }
    }
}

/// Parses CoNLL-U text into a validated [`Document`].
///
/// Writing the result back with [`serialize_conllu`] gives a normalized copy
/// of the input (LF endings, single blank separators, sorted FEATS); writing
/// that copy again is a fixpoint.
pub fn parse_conllu(input: &str) -> Result<Document> {
    let mut doc = Document::new();
    let mut block: Option<Block> = None;

    for (idx, raw) in input.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                finish_block(&mut doc, b)?;
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Block::new(line_no));
        if let Some(rest) = line.strip_prefix('#') {
            if !b.tokens.is_empty() {
                return Err(Error::parse(line_no, "comment line inside a sentence"));
            }
            b.comments.push(parse_comment(rest));
            continue;
        }
        parse_token_line(b, line, line_no)?;
    }
    if let Some(b) = block.take() {
        finish_block(&mut doc, b)?;
    }

    doc.validate()?;
    for s in &mut doc.sentences {
        s.recompute_spans();
    }
    Ok(doc)
}

fn parse_comment(rest: &str) -> Comment {
    let body = rest.trim();
    match body.split_once(" = ") {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Comment::Pair {
            key: k.trim().to_owned(),
            value: v.trim().to_owned(),
        },
        _ => Comment::Text(body.to_owned()),
    }
}

fn opt_field(s: &str) -> Option<String> {
    (s != "_").then(|| s.to_owned())
}

fn parse_token_line(b: &mut Block, line: &str, line_no: usize) -> Result<()> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(Error::parse(
            line_no,
            format!("expected 10 tab-separated columns, found {}", cols.len()),
        ));
    }
    if let Some(c) = cols.iter().position(|c| c.is_empty()) {
        return Err(Error::parse(line_no, format!("column {} is empty", c + 1)));
    }
    let id = cols[0];
    let expected = b.tokens.len() + 1;

    if let Some((start, end)) = id.split_once('-') {
        let start = parse_index(start, line_no)?;
        let end = parse_index(end, line_no)?;
        if start != expected {
            return Err(Error::parse(
                line_no,
                format!("range {id} must precede token {start}, next token is {expected}"),
            ));
        }
        if cols[2..9].iter().any(|c| *c != "_") {
            return Err(Error::parse(line_no, "range lines may only fill FORM and MISC"));
        }
        b.ranges.push(MultiwordRange {
            start,
            end,
            form: cols[1].to_owned(),
            misc: opt_field(cols[9]),
        });
        return Ok(());
    }
    if id.contains('.') {
        return Err(Error::parse(line_no, format!("empty nodes are not supported ({id})")));
    }

    let id = parse_index(id, line_no)?;
    if id != expected {
        let label = label_of(&b.comments, b.first_line);
        let message = if id < expected {
            format!("duplicate or out-of-order token id {id} (line {line_no})")
        } else {
            format!("token id {id} skips expected id {expected} (line {line_no})")
        };
        return Err(Error::validation(label, message));
    }

    let mut token = Token::new(id, cols[1]);
    token.lemma = opt_field(cols[2]);
    token.upos = match cols[3] {
        "_" => None,
        tag => Some(
            tag.parse::<Upos>()
                .map_err(|e| Error::parse(line_no, e.to_string()))?,
        ),
    };
    token.xpos = opt_field(cols[4]);
    token.feats = cols[5]
        .parse::<Features>()
        .map_err(|e| Error::parse(line_no, e.to_string()))?;
    token.head = match cols[6] {
        "_" => None,
        h => Some(
            h.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("invalid head '{h}'")))?,
        ),
    };
    token.deprel = opt_field(cols[7]);
    token.deps = opt_field(cols[8]);
    token.misc = opt_field(cols[9]);
    b.tokens.push(token);
    Ok(())
}

fn parse_index(s: &str, line_no: usize) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::parse(line_no, format!("invalid token id '{s}'"))),
    }
}

fn label_of(comments: &[Comment], first_line: usize) -> String {
    comments
        .iter()
        .find_map(|c| match c {
            Comment::Pair { key, value } if key == "sent_id" => Some(value.clone()),
            _ => None,
        })
        .unwrap_or_else(|| format!("starting at line {first_line}"))
}

fn finish_block(doc: &mut Document, mut b: Block) -> Result<()> {
    if doc.sentences.is_empty() && doc.metadata.is_empty() {
        let n_meta = b
            .comments
            .iter()
            .take_while(|c| matches!(c, Comment::Pair { key, .. } if key.starts_with(DOC_META_PREFIX)))
            .count();
        for c in b.comments.drain(..n_meta) {
            if let Comment::Pair { key, value } = c {
                doc.metadata
                    .insert(key[DOC_META_PREFIX.len()..].to_owned(), value);
            }
        }
        if b.tokens.is_empty() && b.comments.is_empty() && n_meta > 0 {
            return Ok(());
        }
    }
    if b.tokens.is_empty() {
        return Err(Error::parse(b.first_line, "comment block without tokens"));
    }
    let label = label_of(&b.comments, b.first_line);
    let n = b.tokens.len();
    if let Some(r) = b.ranges.iter().find(|r| r.end > n) {
        return Err(Error::validation(
            label,
            format!("range {}-{} exceeds the token count {n}", r.start, r.end),
        ));
    }
    let sentence = Sentence {
        tokens: b.tokens,
        ranges: b.ranges,
        comments: b.comments,
    };
    // Validate here so the diagnostic names the sentence by its position in the input.
    sentence.validate(doc.sentences.len()).map_err(|e| match e {
        Error::Validation { message, .. } => Error::Validation {
            sentence: label.clone(),
            message,
        },
        other => other,
    })?;
    doc.sentences.push(sentence);
    Ok(())
}

fn field(v: Option<&str>) -> &str {
    v.unwrap_or("_")
}

fn write_comment(out: &mut String, c: &Comment) {
    match c {
        Comment::Pair { key, value } => {
            let _ = writeln!(out, "# {key} = {value}");
        }
        Comment::Text(t) if t.is_empty() => out.push_str("#\n"),
        Comment::Text(t) => {
            let _ = writeln!(out, "# {t}");
        }
    }
}

/// Writes a document as CoNLL-U. Refuses documents that violate an invariant.
pub fn serialize_conllu(doc: &Document) -> Result<String> {
    doc.validate()?;
    let mut out = String::new();
    for (k, v) in &doc.metadata {
        let _ = writeln!(out, "# {DOC_META_PREFIX}{k} = {v}");
    }
    if doc.sentences.is_empty() && !doc.metadata.is_empty() {
        out.push('\n');
    }
    for s in &doc.sentences {
        for c in &s.comments {
            write_comment(&mut out, c);
        }
        let mut ranges = s.ranges.iter().peekable();
        for t in &s.tokens {
            while let Some(r) = ranges.next_if(|r| r.start == t.id) {
                let _ = writeln!(
                    out,
                    "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}",
                    r.start,
                    r.end,
                    r.form,
                    field(r.misc.as_deref())
                );
            }
            let head = t.head.map(|h| h.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id,
                t.form,
                field(t.lemma.as_deref()),
                t.upos.map(Upos::as_str).unwrap_or("_"),
                field(t.xpos.as_deref()),
                t.feats,
                field(head.as_deref()),
                field(t.deprel.as_deref()),
                field(t.deps.as_deref()),
                field(t.misc.as_deref()),
            );
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes one header row and one row per token, in document order.
pub fn serialize_tsv(doc: &Document) -> Result<String> {
    doc.validate()?;
    let doc_id = doc.metadata.get("id").map(String::as_str).unwrap_or("_");
    let mut out = String::new();
    out.push_str(TSV_HEADER);
    out.push('\n');
    for (si, s) in doc.sentences.iter().enumerate() {
        let sent_id = s
            .sent_id()
            .map(str::to_owned)
            .unwrap_or_else(|| (si + 1).to_string());
        for t in &s.tokens {
            let head = t.head.map(|h| h.to_string());
            let _ = writeln!(
                out,
                "{doc_id}\t{sent_id}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id,
                t.form,
                field(t.lemma.as_deref()),
                t.upos.map(Upos::as_str).unwrap_or("_"),
                field(t.xpos.as_deref()),
                t.feats,
                field(head.as_deref()),
                field(t.deprel.as_deref()),
            );
        }
    }
    Ok(out)
}
