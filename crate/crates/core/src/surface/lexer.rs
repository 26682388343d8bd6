use thiserror::Error;

use crate::diag::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(u64),
    Str(String),
    Hole,
    /// Fixed punctuation or a registered operator.
    Sym(String),
    Eof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

const FIXED: &[&str] = &[":=", ":", ",", "(", ")", "{", "}", "@", "->", "=>", ">->", "|", ";", "=", "."];

/// Maps byte offsets to line/column positions.
pub(crate) struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub(crate) fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { starts }
    }

    pub(crate) fn span(&self, src: &str, start: usize, end: usize) -> Span {
        let line = self.starts.partition_point(|&s| s <= start) - 1;
        let col = src[self.starts[line]..start].chars().count() + 1;
        Span::new(start, end, line as u32 + 1, col as u32)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Skips a comment starting at `i` (either `--` or `(*`), returning the
/// offset after it, or `None` if `i` does not start a comment. Block
/// comments nest.
fn skip_comment(src: &str, i: usize) -> Result<Option<usize>, usize> {
    let rest = &src[i..];
    if rest.starts_with("--") {
        return Ok(Some(rest.find('\n').map(|n| i + n + 1).unwrap_or(src.len())));
    }
    if !rest.starts_with("(*") {
        return Ok(None);
    }
    let mut depth = 0usize;
    let mut j = i;
    while j < src.len() {
        let r = &src[j..];
        if r.starts_with("(*") {
            depth += 1;
            j += 2;
        } else if r.starts_with("*)") {
            depth -= 1;
            j += 2;
            if depth == 0 {
                return Ok(Some(j));
            }
        } else {
            j += r.chars().next().map(char::len_utf8).unwrap_or(1);
        }
    }
    Err(i)
}

/// Splits a file into commands. A command ends with a `.` followed by
/// whitespace or the end of input; comments and strings are skipped.
/// Returns `(start, end)` byte ranges including the final dot.
pub fn split_commands(src: &str) -> Result<Vec<(usize, usize)>, LexError> {
    let lines = LineIndex::new(src);
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < src.len() {
        match skip_comment(src, i) {
            Ok(Some(j)) => {
                i = j;
                continue;
            }
            Ok(None) => {}
            Err(at) => {
                return Err(LexError { message: "unterminated comment".into(), span: lines.span(src, at, at + 2) })
            }
        }
        let c = src[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        start.get_or_insert(i);
        if c == '"' {
            match src[i + 1..].find('"') {
                Some(n) => i += n + 2,
                None => {
                    return Err(LexError { message: "unterminated string".into(), span: lines.span(src, i, i + 1) })
                }
            }
            continue;
        }
        if c == '.' {
            let next = src[i + 1..].chars().next();
            if next.is_none_or(char::is_whitespace) {
                out.push((start.take().expect("set above"), i + 1));
            }
        }
        i += c.len_utf8();
    }
    if let Some(s) = start {
        return Err(LexError { message: "missing `.` at end of command".into(), span: lines.span(src, s, src.len()) });
    }
    Ok(out)
}

/// Tokenizes `src[start..end]` with the given operator tokens in addition
/// to the fixed punctuation. Symbols are matched longest-first.
pub fn tokenize(src: &str, start: usize, end: usize, operators: &[&str]) -> Result<Vec<Token>, LexError> {
    let lines = LineIndex::new(src);
    tokenize_with(&lines, src, start, end, operators)
}

pub(crate) fn tokenize_with(
    lines: &LineIndex,
    src: &str,
    start: usize,
    end: usize,
    operators: &[&str],
) -> Result<Vec<Token>, LexError> {
    let mut toks = Vec::new();
    let mut i = start;
    let text = &src[..end];
    while i < end {
        match skip_comment(text, i) {
            Ok(Some(j)) => {
                i = j;
                continue;
            }
            Ok(None) => {}
            Err(at) => {
                return Err(LexError { message: "unterminated comment".into(), span: lines.span(src, at, at + 2) })
            }
        }
        let c = text[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let begin = i;
        let tok = if is_ident_start(c) {
            while let Some(ch) = text[i..].chars().next().filter(|ch| is_ident_char(*ch)) {
                i += ch.len_utf8();
            }
            let word = &text[begin..i];
            if word == "_" {
                Tok::Hole
            } else {
                Tok::Ident(word.to_string())
            }
        } else if c.is_ascii_digit() {
            while text[i..].starts_with(|ch: char| ch.is_ascii_digit()) {
                i += 1;
            }
            let n = text[begin..i]
                .parse::<u64>()
                .map_err(|_| LexError { message: "numeral too large".into(), span: lines.span(src, begin, i) })?;
            Tok::Num(n)
        } else if c == '"' {
            let close = text[i + 1..].find('"').ok_or_else(|| LexError {
                message: "unterminated string".into(),
                span: lines.span(src, begin, begin + 1),
            })?;
            i += close + 2;
            Tok::Str(text[begin + 1..i - 1].to_string())
        } else {
            let rest = &text[i..];
            let best = FIXED
                .iter()
                .copied()
                .chain(operators.iter().copied())
                .filter(|s| rest.starts_with(*s))
                .max_by_key(|s| s.len());
            match best {
                Some(s) => {
                    i += s.len();
                    Tok::Sym(s.to_string())
                }
                None => {
                    return Err(LexError {
                        message: format!("unexpected character `{c}`"),
                        span: lines.span(src, begin, begin + c.len_utf8()),
                    })
                }
            }
        };
        toks.push(Token { tok, span: lines.span(src, begin, i) });
    }
    toks.push(Token { tok: Tok::Eof, span: lines.span(src, end, end) });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str, ops: &[&str]) -> Vec<Tok> {
        tokenize(src, 0, src.len(), ops).unwrap().into_iter().map(|t| t.tok).collect()
    }

    fn id(s: &str) -> Tok {
        Tok::Ident(s.into())
    }

    #[test]
    fn holes_and_idents() {
        assert_eq!(kinds("mulg _ g h", &[]), vec![id("mulg"), Tok::Hole, id("g"), id("h"), Tok::Eof]);
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(kinds("(* c *) x", &[]), vec![id("x"), Tok::Eof]);
        assert_eq!(kinds("(* a (* nested *) b *) x -- tail", &[]), vec![id("x"), Tok::Eof]);
    }

    #[test]
    fn longest_match_operators() {
        assert_eq!(kinds("g *h", &["*"]), vec![id("g"), Tok::Sym("*".into()), id("h"), Tok::Eof]);
        assert_eq!(
            kinds("x == y = z", &["=="]),
            vec![id("x"), Tok::Sym("==".into()), id("y"), Tok::Sym("=".into()), id("z"), Tok::Eof]
        );
        assert_eq!(kinds("a >-> b", &[]), vec![id("a"), Tok::Sym(">->".into()), id("b"), Tok::Eof]);
        assert!(tokenize("g * h", 0, 5, &[]).is_err());
    }

    #[test]
    fn spans_have_line_and_column() {
        let src = "x\n  yy";
        let toks = tokenize(src, 0, src.len(), &[]).unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
        assert_eq!((toks[1].span.start, toks[1].span.end), (4, 6));
    }

    #[test]
    fn command_splitting() {
        let src = "Check x. (* a. b *) Check \"s. t\".\nCheck y.";
        let cmds = split_commands(src).unwrap();
        assert_eq!(cmds.len(), 3);
        assert_eq!(&src[cmds[1].0..cmds[1].1], "Check \"s. t\".");
        assert!(split_commands("Check x").is_err());
        assert!(split_commands("(* open").is_err());
    }
}
