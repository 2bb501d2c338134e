//! Line-oriented alignment input format.
//!
//! ```text
//! # comment
//! taxonomy 1 original
//! (A B C)
//! taxonomy 2 revised
//! (A F G)
//! articulations
//! [1.A {equals is_included_in} 2.A]
//! [1.B disjoint 2.F]
//! ```
//!
//! Concepts are declared by their first appearance in a tree line; the first
//! name of a tree line is the parent of the rest. A lone `(A)` declares a
//! single concept. Articulations may be written in either direction and are
//! stored oriented from taxonomy 1 to taxonomy 2.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Alignment, Articulation, ConceptRef, Side, Taxonomy};
use crate::relations::{RelationError, RelationMask};

/// Location of a token or line in the input. Columns are 1-based character
/// offsets, `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.line, self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    Lexical,
    UnknownTaxonomyId,
    DuplicateTaxonomy,
    MissingTaxonomy,
    EmptyTaxonomy,
    MultipleRoots,
    DuplicateChild,
    Cycle,
    MisplacedLine,
    MalformedArticulation,
    UnknownConcept,
    SameTaxonomy,
    UnknownRelation,
    EmptyRelation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {}, columns {}-{}: {message}", span.line, span.start, span.end)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub span: SourceSpan,
}

/// Renders all errors one per line, each followed by the offending source.
pub fn render_errors(errors: &[ParseError]) -> String {
    let mut out = String::new();
    for e in errors {
        out.push_str(&format!("error: {e}\n  | {}\n", e.span.text));
        let pad = " ".repeat(e.span.start.saturating_sub(1));
        let marks = "^".repeat(e.span.end.saturating_sub(e.span.start).max(1));
        out.push_str(&format!("  | {pad}{marks}\n"));
    }
    out
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '[' | ']' | '{' | '}' | ',' | '#')
}

/// Splits on whitespace, reporting character columns (1-based).
fn words(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (byte, c) in line.char_indices() {
        col += 1;
        if c.is_whitespace() {
            if let Some((b, s)) = start.take() {
                out.push(Token {
                    text: &line[b..byte],
                    start: s,
                    end: col,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, s)) = start {
        out.push(Token {
            text: &line[b..],
            start: s,
            end: col + 1,
        });
    }
    out
}

struct LineCtx<'a> {
    number: usize,
    raw: &'a str,
}

impl LineCtx<'_> {
    fn span(&self, start: usize, end: usize) -> SourceSpan {
        SourceSpan {
            line: self.number,
            start,
            end: end.max(start + 1),
            text: self.raw.to_string(),
        }
    }

    fn whole(&self) -> SourceSpan {
        let n = self.raw.chars().count();
        self.span(1, n + 1)
    }

    fn error(&self, kind: ParseErrorKind, start: usize, end: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            kind,
            message: message.into(),
            span: self.span(start, end),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Taxonomy(Side),
    Articulations,
}

struct TaxonomyDraft {
    taxonomy: Taxonomy,
    header: SourceSpan,
}

/// Parses and validates an alignment, collecting every error found.
pub fn parse_alignment(text: &str) -> Result<Alignment, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut drafts: [Option<TaxonomyDraft>; 2] = [None, None];
    let mut pending_articulations: Vec<(LineOwned, Vec<TokenOwned>)> = Vec::new();
    let mut section = Section::None;

    for (i, raw) in text.lines().enumerate() {
        let ctx = LineCtx { number: i + 1, raw };
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let toks = words(content);
        let first = &toks[0];
        if first.text == "taxonomy" {
            let Some(id_tok) = toks.get(1) else {
                errors.push(ctx.error(ParseErrorKind::Lexical, first.start, first.end, "expected `taxonomy <id> <label>`"));
                section = Section::None;
                continue;
            };
            let side = id_tok.text.parse::<u8>().ok().and_then(Side::from_id);
            let Some(side) = side else {
                errors.push(ctx.error(
                    ParseErrorKind::UnknownTaxonomyId,
                    id_tok.start,
                    id_tok.end,
                    format!("unknown taxonomy id `{}` (expected 1 or 2)", id_tok.text),
                ));
                section = Section::None;
                continue;
            };
            if drafts[side.slot()].is_some() {
                errors.push(ctx.error(
                    ParseErrorKind::DuplicateTaxonomy,
                    id_tok.start,
                    id_tok.end,
                    format!("taxonomy {} declared twice", side.id()),
                ));
                section = Section::None;
                continue;
            }
            let label = toks
                .get(2)
                .map(|t| content.trim_end()[byte_offset(content, t.start)..].to_string())
                .unwrap_or_default();
            drafts[side.slot()] = Some(TaxonomyDraft {
                taxonomy: Taxonomy::new(side, label),
                header: ctx.whole(),
            });
            section = Section::Taxonomy(side);
        } else if first.text == "articulations" || first.text == "articulation" {
            section = Section::Articulations;
        } else if trimmed.starts_with('(') {
            let Section::Taxonomy(side) = section else {
                errors.push(ctx.error(ParseErrorKind::MisplacedLine, first.start, first.end, "tree line outside a taxonomy section"));
                continue;
            };
            let draft = drafts[side.slot()].as_mut().expect("section implies draft");
            if let Err(e) = parse_tree_line(&ctx, content, &mut draft.taxonomy) {
                errors.push(e);
            }
        } else if trimmed.starts_with('[') {
            if section != Section::Articulations {
                errors.push(ctx.error(
                    ParseErrorKind::MisplacedLine,
                    first.start,
                    first.end,
                    "articulation outside the `articulations` section",
                ));
                continue;
            }
            match split_articulation(&ctx, content) {
                Ok(parts) => pending_articulations.push((
                    LineOwned {
                        number: ctx.number,
                        raw: raw.to_string(),
                    },
                    parts,
                )),
                Err(e) => errors.push(e),
            }
        } else {
            errors.push(ctx.error(
                ParseErrorKind::Lexical,
                first.start,
                first.end,
                format!("unexpected `{}`", first.text),
            ));
        }
    }

    let mut taxonomies = Vec::new();
    for (slot, draft) in drafts.into_iter().enumerate() {
        let side = if slot == 0 { Side::First } else { Side::Second };
        match draft {
            None => errors.push(ParseError {
                kind: ParseErrorKind::MissingTaxonomy,
                message: format!("taxonomy {} is missing", side.id()),
                span: SourceSpan {
                    line: text.lines().count().max(1),
                    start: 1,
                    end: 2,
                    text: text.lines().last().unwrap_or("").to_string(),
                },
            }),
            Some(d) => {
                if d.taxonomy.is_empty() {
                    errors.push(ParseError {
                        kind: ParseErrorKind::EmptyTaxonomy,
                        message: format!("taxonomy {} declares no concepts", side.id()),
                        span: d.header.clone(),
                    });
                } else {
                    let roots = d.taxonomy.roots();
                    if roots.len() > 1 {
                        let names: Vec<_> = roots.iter().map(|&r| d.taxonomy.key(r)).collect();
                        errors.push(ParseError {
                            kind: ParseErrorKind::MultipleRoots,
                            message: format!("taxonomy {} has several roots: {}", side.id(), names.join(", ")),
                            span: d.header.clone(),
                        });
                    }
                }
                taxonomies.push(d.taxonomy);
            }
        }
    }
    if taxonomies.len() != 2 {
        return Err(errors);
    }
    let second = taxonomies.pop().unwrap();
    let first = taxonomies.pop().unwrap();
    let mut alignment = Alignment::new(first, second);

    for (index, (line, parts)) in pending_articulations.into_iter().enumerate() {
        let ctx = LineCtx {
            number: line.number,
            raw: &line.raw,
        };
        match build_articulation(&ctx, &alignment, index, &parts) {
            Ok(a) => alignment.articulations.push(a),
            Err(e) => errors.push(e),
        }
    }

    if errors.is_empty() {
        Ok(alignment)
    } else {
        errors.sort_by_key(|e| (e.span.line, e.span.start));
        Err(errors)
    }
}

fn byte_offset(s: &str, col: usize) -> usize {
    s.char_indices().nth(col - 1).map(|(b, _)| b).unwrap_or(s.len())
}

struct LineOwned {
    number: usize,
    raw: String,
}

#[derive(Debug, Clone)]
struct TokenOwned {
    text: String,
    start: usize,
    end: usize,
}

fn check_name(ctx: &LineCtx<'_>, tok: &Token<'_>) -> Result<(), ParseError> {
    for (k, c) in tok.text.chars().enumerate() {
        if !is_name_char(c) {
            return Err(ctx.error(
                ParseErrorKind::Lexical,
                tok.start + k,
                tok.start + k + 1,
                format!("unexpected character `{c}` in name"),
            ));
        }
    }
    Ok(())
}

fn parse_tree_line(ctx: &LineCtx<'_>, content: &str, taxonomy: &mut Taxonomy) -> Result<(), ParseError> {
    let open = content.find('(').expect("caller checked");
    let open_col = content[..open].chars().count() + 1;
    let Some(close) = content.rfind(')') else {
        return Err(ctx.error(ParseErrorKind::Lexical, open_col, open_col + 1, "unclosed `(`"));
    };
    let close_col = content[..close].chars().count() + 1;
    if !content[close + 1..].trim().is_empty() {
        return Err(ctx.error(ParseErrorKind::Lexical, close_col + 1, content.chars().count() + 1, "trailing text after `)`"));
    }
    // Tokenize the inner text with columns relative to the whole line.
    let mut inner = String::with_capacity(content.len());
    for (b, c) in content.char_indices() {
        inner.push(if b == open || b == close { ' ' } else { c });
    }
    let toks = words(&inner);
    if toks.is_empty() {
        return Err(ctx.error(ParseErrorKind::Lexical, open_col, close_col + 1, "empty tree line"));
    }
    for t in &toks {
        check_name(ctx, t)?;
    }
    let parent = &toks[0];
    let children = &toks[1..];
    for (k, c) in children.iter().enumerate() {
        if c.text == parent.text || children[..k].iter().any(|o| o.text == c.text) {
            return Err(ctx.error(
                ParseErrorKind::DuplicateChild,
                c.start,
                c.end,
                format!("`{}` listed twice on this line", c.text),
            ));
        }
        if let Some(ci) = taxonomy.index_of(c.text) {
            if let Some(p) = taxonomy.parent(ci) {
                return Err(ctx.error(
                    ParseErrorKind::DuplicateChild,
                    c.start,
                    c.end,
                    format!("`{}` already has parent `{}`", c.text, taxonomy.name(p)),
                ));
            }
            if let Some(pi) = taxonomy.index_of(parent.text) {
                if taxonomy.is_ancestor_or_self(ci, pi) {
                    return Err(ctx.error(
                        ParseErrorKind::Cycle,
                        c.start,
                        c.end,
                        format!("`{}` is an ancestor of `{}`", c.text, parent.text),
                    ));
                }
            }
        }
    }
    let p = taxonomy.ensure_concept(parent.text);
    for c in children {
        let ci = taxonomy.ensure_concept(c.text);
        taxonomy.set_parent(ci, p);
    }
    Ok(())
}

/// Splits `[left relation right]` into three owned tokens.
fn split_articulation(ctx: &LineCtx<'_>, content: &str) -> Result<Vec<TokenOwned>, ParseError> {
    let open = content.find('[').expect("caller checked");
    let open_col = content[..open].chars().count() + 1;
    let Some(close) = content.rfind(']') else {
        return Err(ctx.error(ParseErrorKind::Lexical, open_col, open_col + 1, "unclosed `[`"));
    };
    let close_col = content[..close].chars().count() + 1;
    if close < open || !content[close + 1..].trim().is_empty() {
        return Err(ctx.error(ParseErrorKind::Lexical, close_col, content.chars().count() + 1, "trailing text after `]`"));
    }
    let mut inner = String::with_capacity(content.len());
    for (b, c) in content.char_indices() {
        inner.push(if b == open || b == close || b < open || b > close { ' ' } else { c });
    }
    let toks = words(&inner);
    if toks.len() < 3 {
        return Err(ctx.error(
            ParseErrorKind::MalformedArticulation,
            open_col,
            close_col + 1,
            "expected `[<key> <relation> <key>]`",
        ));
    }
    let left = &toks[0];
    let right = &toks[toks.len() - 1];
    let mid_start = toks[1].start;
    let mid_end = toks[toks.len() - 2].end;
    let mid_text: String = inner
        .chars()
        .skip(mid_start - 1)
        .take(mid_end - mid_start)
        .collect();
    Ok(vec![
        TokenOwned {
            text: left.text.to_string(),
            start: left.start,
            end: left.end,
        },
        TokenOwned {
            text: mid_text,
            start: mid_start,
            end: mid_end,
        },
        TokenOwned {
            text: right.text.to_string(),
            start: right.start,
            end: right.end,
        },
    ])
}

fn build_articulation(
    ctx: &LineCtx<'_>,
    alignment: &Alignment,
    index: usize,
    parts: &[TokenOwned],
) -> Result<Articulation, ParseError> {
    let resolve = |t: &TokenOwned| -> Result<ConceptRef, ParseError> {
        let c = ConceptRef::parse_key(&t.text).ok_or_else(|| {
            ctx.error(
                ParseErrorKind::UnknownConcept,
                t.start,
                t.end,
                format!("`{}` is not a concept key like `1.A`", t.text),
            )
        })?;
        if alignment.resolve(&c).is_none() {
            return Err(ctx.error(
                ParseErrorKind::UnknownConcept,
                t.start,
                t.end,
                format!("unknown concept `{}`", t.text),
            ));
        }
        Ok(c)
    };
    let left = resolve(&parts[0])?;
    let right = resolve(&parts[2])?;
    let rel = &parts[1];
    let mask: RelationMask = rel.text.parse().map_err(|e| match e {
        RelationError::EmptyMask => ctx.error(ParseErrorKind::EmptyRelation, rel.start, rel.end, "empty relation set `{}`"),
        other => ctx.error(ParseErrorKind::UnknownRelation, rel.start, rel.end, other.to_string()),
    })?;
    if left.side == right.side {
        return Err(ctx.error(
            ParseErrorKind::SameTaxonomy,
            parts[0].start,
            parts[2].end,
            "an articulation must relate concepts of different taxonomies",
        ));
    }
    let (left, mask, right) = if left.side == Side::Second {
        (right, mask.converse(), left)
    } else {
        (left, mask, right)
    };
    Ok(Articulation {
        index,
        left,
        right,
        mask,
        source: Some(ctx.whole()),
    })
}

/// Canonical text: children sorted by name, tree lines in preorder, long
/// relation names, articulations in index order.
pub fn serialize_alignment(a: &Alignment) -> String {
    let mut out = String::new();
    for t in &a.taxonomies {
        if t.label().is_empty() {
            out.push_str(&format!("taxonomy {}\n", t.side().id()));
        } else {
            out.push_str(&format!("taxonomy {} {}\n", t.side().id(), t.label()));
        }
        let children = t.children_lists();
        let mut roots = t.roots();
        roots.sort_by(|x, y| t.name(*x).cmp(t.name(*y)));
        for root in roots {
            if children[root].is_empty() {
                out.push_str(&format!("({})\n", t.name(root)));
                continue;
            }
            let mut stack = vec![root];
            while let Some(n) = stack.pop() {
                let mut kids = children[n].clone();
                if kids.is_empty() {
                    continue;
                }
                kids.sort_by(|x, y| t.name(*x).cmp(t.name(*y)));
                let names: Vec<&str> = kids.iter().map(|&k| t.name(k)).collect();
                out.push_str(&format!("({} {})\n", t.name(n), names.join(" ")));
                stack.extend(kids.into_iter().rev());
            }
        }
    }
    out.push_str("articulations\n");
    let mut arts: Vec<&Articulation> = a.articulations.iter().collect();
    arts.sort_by_key(|x| x.index);
    for art in arts {
        out.push_str(&format!("[{}]\n", art));
    }
    out
}
