use thiserror::Error;

use super::lexer::{split_commands, tokenize_with, LexError, LineIndex, Tok, Token};
use super::{Assoc, ClassSpec, Command, CtorSpec, FieldSpec, SBinder, SKind, SurfaceTerm};
use crate::diag::{Category, Span};

/// Built-in `=`: level 70, no associativity.
pub const EQ_LEVEL: u32 = 70;
/// Built-in `->`: level 99, right associative.
pub const ARROW_LEVEL: u32 = 99;
/// Loosest level; binder forms live here.
pub const TOP_LEVEL: u32 = 200;
pub const DEFAULT_NOTATION_LEVEL: u32 = 40;

const RESERVED: &[&str] = &["forall", "fun", "Type", "Prop"];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct ParseError {
    pub category: Category,
    pub message: String,
    pub span: Span,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError { category: Category::LexError, message: e.message, span: e.span }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedCommand {
    pub cmd: Command,
    pub span: Span,
}

/// Operator token with its precedence, as seen by the parser.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpInfo {
    pub token: String,
    pub level: u32,
    pub assoc: Assoc,
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    ops: &'a [OpInfo],
    last: Span,
}

type PResult<T> = Result<T, ParseError>;

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(n) => format!("`{n}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Hole => "`_`".into(),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of command".into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        self.last = t.span;
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError {
            category: Category::ParseError,
            message: format!("expected {expected}, found {}", describe(self.peek())),
            span: self.span(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => self.error("an identifier"),
        }
    }

    fn op_info(&self) -> Option<(String, u32, Assoc)> {
        let Tok::Sym(s) = self.peek() else { return None };
        match s.as_str() {
            "=" => Some((s.clone(), EQ_LEVEL, Assoc::NoAssoc)),
            "->" => Some((s.clone(), ARROW_LEVEL, Assoc::Right)),
            _ => self.ops.iter().find(|o| o.token == *s).map(|o| (s.clone(), o.level, o.assoc)),
        }
    }

    fn term(&mut self, max: u32) -> PResult<SurfaceTerm> {
        if self.is_kw("forall") || self.is_kw("fun") {
            return self.binder_form();
        }
        let start = self.span();
        let mut lhs = self.app()?;
        let mut lhs_level = 0;
        while let Some((op, level, assoc)) = self.op_info() {
            if level > max {
                break;
            }
            let fits = match assoc {
                Assoc::Left => lhs_level <= level,
                _ => lhs_level < level,
            };
            if !fits {
                break;
            }
            self.bump();
            let rhs = self.term(if assoc == Assoc::Right { level } else { level - 1 })?;
            let span = start.to(self.last);
            lhs = if op == "->" {
                SurfaceTerm::new(SKind::Arrow(Box::new(lhs), Box::new(rhs)), span)
            } else {
                SurfaceTerm::new(SKind::Infix(op, Box::new(lhs), Box::new(rhs)), span)
            };
            lhs_level = level;
        }
        Ok(lhs)
    }

    fn binder_form(&mut self) -> PResult<SurfaceTerm> {
        let start = self.span();
        let is_pi = self.is_kw("forall");
        self.bump();
        let binders = self.binders(true)?;
        if binders.is_empty() {
            return self.error("a binder");
        }
        self.expect_sym(if is_pi { "," } else { "=>" })?;
        let body = self.term(TOP_LEVEL)?;
        let span = start.to(self.last);
        let kind = if is_pi { SKind::Pi(binders, Box::new(body)) } else { SKind::Lam(binders, Box::new(body)) };
        Ok(SurfaceTerm::new(kind, span))
    }

    /// Binder groups. With `bare_annot`, a run of bare names may be followed
    /// by `: T` (as in `forall x y : T, …`).
    fn binders(&mut self, bare_annot: bool) -> PResult<Vec<SBinder>> {
        let mut out = Vec::new();
        loop {
            if self.is_sym("(") || self.is_sym("{") {
                let implicit = self.is_sym("{");
                self.bump();
                let mut names = Vec::new();
                while matches!(self.peek(), Tok::Ident(_) | Tok::Hole) {
                    names.push(self.binder_name()?);
                }
                if names.is_empty() {
                    return self.error("a binder name");
                }
                let ty = if self.eat_sym(":") {
                    Some(self.term(TOP_LEVEL)?)
                } else if implicit {
                    None
                } else {
                    return self.error("`:`");
                };
                self.expect_sym(if implicit { "}" } else { ")" })?;
                out.push(SBinder { names, ty, implicit });
            } else if matches!(self.peek(), Tok::Ident(s) if !RESERVED.contains(&s.as_str()))
                || *self.peek() == Tok::Hole
            {
                let mut names = Vec::new();
                while matches!(self.peek(), Tok::Ident(s) if !RESERVED.contains(&s.as_str()))
                    || *self.peek() == Tok::Hole
                {
                    names.push(self.binder_name()?);
                }
                let ty =
                    if bare_annot && out.is_empty() && self.eat_sym(":") { Some(self.term(TOP_LEVEL)?) } else { None };
                let annotated = ty.is_some();
                out.push(SBinder { names, ty, implicit: false });
                if annotated {
                    return Ok(out);
                }
            } else {
                return Ok(out);
            }
        }
    }

    fn binder_name(&mut self) -> PResult<(String, Span)> {
        if *self.peek() == Tok::Hole {
            let sp = self.bump().span;
            return Ok(("_".into(), sp));
        }
        self.ident()
    }

    fn atom_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !matches!(s.as_str(), "forall" | "fun"),
            Tok::Num(_) | Tok::Hole => true,
            Tok::Sym(s) => s == "(" || s == "@",
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<SurfaceTerm> {
        let head = self.atom()?;
        let mut args = Vec::new();
        while self.atom_start() {
            args.push(self.atom()?);
        }
        if args.is_empty() {
            return Ok(head);
        }
        let span = head.span.to(self.last);
        Ok(SurfaceTerm::new(SKind::App(Box::new(head), args), span))
    }

    fn atom(&mut self) -> PResult<SurfaceTerm> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Ident(s) if s == "Prop" => {
                self.bump();
                SKind::Prop
            }
            Tok::Ident(s) if s == "Type" => {
                self.bump();
                match *self.peek() {
                    Tok::Num(n) if n <= u32::MAX as u64 => {
                        self.bump();
                        SKind::Type(Some(n as u32))
                    }
                    _ => SKind::Type(None),
                }
            }
            Tok::Ident(_) => SKind::Var(self.ident()?.0),
            Tok::Num(n) => {
                self.bump();
                SKind::Num(n)
            }
            Tok::Hole => {
                self.bump();
                SKind::Hole
            }
            Tok::Sym(s) if s == "@" => {
                self.bump();
                SKind::Explicit(self.ident()?.0)
            }
            Tok::Sym(s) if s == "(" => {
                self.bump();
                let inner = self.term(TOP_LEVEL)?;
                if self.eat_sym(":") {
                    let ty = self.term(TOP_LEVEL)?;
                    self.expect_sym(")")?;
                    SKind::Ascribe(Box::new(inner), Box::new(ty))
                } else {
                    self.expect_sym(")")?;
                    return Ok(SurfaceTerm { kind: inner.kind, span: start.to(self.last) });
                }
            }
            _ => return self.error("a term"),
        };
        Ok(SurfaceTerm::new(kind, start.to(self.last)))
    }

    fn command(&mut self) -> PResult<ParsedCommand> {
        let start = self.span();
        let Tok::Ident(kw) = self.peek().clone() else {
            return self.error("a command");
        };
        self.bump();
        let cmd = match kw.as_str() {
            "Definition" => {
                let (name, _) = self.ident()?;
                let binders = self.binders(false)?;
                let ty = if self.eat_sym(":") { Some(self.term(TOP_LEVEL)?) } else { None };
                self.expect_sym(":=")?;
                let body = self.term(TOP_LEVEL)?;
                Command::Definition { name, binders, ty, body }
            }
            "Axiom" => {
                let mut names = vec![self.ident()?];
                while matches!(self.peek(), Tok::Ident(_)) {
                    names.push(self.ident()?);
                }
                self.expect_sym(":")?;
                let ty = self.term(TOP_LEVEL)?;
                Command::Axiom { names, ty }
            }
            "Inductive" => {
                let (name, _) = self.ident()?;
                let params = self.binders(false)?;
                let sort = if self.eat_sym(":") { Some(self.term(TOP_LEVEL)?) } else { None };
                self.expect_sym(":=")?;
                let mut ctors = Vec::new();
                self.eat_sym("|");
                if !self.is_sym(".") {
                    loop {
                        let (cname, span) = self.ident()?;
                        let binders = self.binders(false)?;
                        let ty = if self.eat_sym(":") { Some(self.term(TOP_LEVEL)?) } else { None };
                        ctors.push(CtorSpec { name: cname, span, binders, ty });
                        if !self.eat_sym("|") {
                            break;
                        }
                    }
                }
                Command::Inductive { name, params, sort, ctors }
            }
            "Record" => {
                let (name, _) = self.ident()?;
                let params = self.binders(false)?;
                let sort = if self.eat_sym(":") { Some(self.term(TOP_LEVEL)?) } else { None };
                self.expect_sym(":=")?;
                let (ctor, _) = self.ident()?;
                self.expect_sym("{")?;
                let mut fields = Vec::new();
                while !self.is_sym("}") {
                    let (fname, span) = self.ident()?;
                    self.expect_sym(":")?;
                    let ty = self.term(TOP_LEVEL)?;
                    fields.push(FieldSpec { name: fname, span, ty });
                    if !self.eat_sym(";") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                Command::Record { name, params, sort, ctor, fields }
            }
            "Coercion" => {
                let (name, _) = self.ident()?;
                self.expect_sym(":")?;
                let (source, _) = self.ident()?;
                self.expect_sym(">->")?;
                let target = match self.peek().clone() {
                    Tok::Ident(s) if s == "Type" || s == "Sortclass" => {
                        self.bump();
                        ClassSpec::Sortclass
                    }
                    Tok::Ident(s) if s == "Funclass" => {
                        self.bump();
                        ClassSpec::Funclass
                    }
                    _ => ClassSpec::Named(self.ident()?.0),
                };
                Command::Coercion { name, source, target }
            }
            "Canonical" => {
                if self.is_kw("Structure") {
                    self.bump();
                }
                Command::Canonical { name: self.ident()?.0 }
            }
            "Notation" => self.notation()?,
            "Check" => Command::Check(self.term(TOP_LEVEL)?),
            "Eval" => Command::Eval(self.term(TOP_LEVEL)?),
            "Fail" => {
                let inner = self.command()?;
                Command::Fail(Box::new(inner))
            }
            _ => {
                self.pos -= 1;
                return self.error("a command");
            }
        };
        Ok(ParsedCommand { cmd, span: start.to(self.last) })
    }

    fn notation(&mut self) -> PResult<Command> {
        let Tok::Str(pattern) = self.peek().clone() else {
            return self.error("a notation string");
        };
        let pat_span = self.bump().span;
        let parts: Vec<&str> = pattern.split_whitespace().collect();
        let valid_name = |s: &str| {
            s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        };
        let valid_op = |s: &str| {
            !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace() && !"()\"{}_,.@".contains(c))
        };
        if parts.len() != 3
            || !valid_name(parts[0])
            || !valid_name(parts[2])
            || !valid_op(parts[1])
            || parts[0] == parts[2]
        {
            return Err(ParseError {
                category: Category::ParseError,
                message: format!("notation \"{pattern}\" must have the form \"x op y\""),
                span: pat_span,
            });
        }
        self.expect_sym(":=")?;
        if !self.is_sym("(") {
            return self.error("a parenthesized template");
        }
        let template = self.atom()?;
        let mut level = None;
        let mut assoc = None;
        if self.eat_sym("(") {
            loop {
                if self.is_kw("at") {
                    self.bump();
                    self.expect_kw("level")?;
                    match *self.peek() {
                        Tok::Num(n) if n <= 100 => {
                            self.bump();
                            level = Some(n as u32);
                        }
                        _ => return self.error("a level between 0 and 100"),
                    }
                } else {
                    let a = match self.peek() {
                        Tok::Ident(s) if s == "left" => Assoc::Left,
                        Tok::Ident(s) if s == "right" => Assoc::Right,
                        Tok::Ident(s) if s == "no" => Assoc::NoAssoc,
                        _ => return self.error("`at level` or an associativity"),
                    };
                    self.bump();
                    self.expect_kw("associativity")?;
                    assoc = Some(a);
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
        }
        Ok(Command::Notation {
            token: parts[1].to_string(),
            lhs: parts[0].to_string(),
            rhs: parts[2].to_string(),
            template,
            level,
            assoc,
        })
    }
}

fn parse_tokens<T>(toks: Vec<Token>, ops: &[OpInfo], f: impl FnOnce(&mut Parser) -> PResult<T>) -> PResult<T> {
    let mut p = Parser { toks, pos: 0, ops, last: Span::default() };
    f(&mut p)
}

/// Parses a standalone term (no terminating dot).
pub fn parse_term(src: &str, ops: &[OpInfo]) -> PResult<SurfaceTerm> {
    let lines = LineIndex::new(src);
    let op_tokens: Vec<&str> = ops.iter().map(|o| o.token.as_str()).collect();
    let toks = tokenize_with(&lines, src, 0, src.len(), &op_tokens)?;
    parse_tokens(toks, ops, |p| {
        let t = p.term(TOP_LEVEL)?;
        if *p.peek() != Tok::Eof {
            return p.error("end of input");
        }
        Ok(t)
    })
}

/// Parses the command in `src[start..end]`, which must end with its `.`.
pub fn parse_command(src: &str, start: usize, end: usize, ops: &[OpInfo]) -> PResult<ParsedCommand> {
    let lines = LineIndex::new(src);
    parse_command_with(&lines, src, start, end, ops)
}

/// A source file prepared for incremental, command-by-command parsing, so
/// that each command sees the operators declared before it.
pub struct Source<'s> {
    src: &'s str,
    lines: LineIndex,
}

impl<'s> Source<'s> {
    pub fn new(src: &'s str) -> Self {
        Source { src, lines: LineIndex::new(src) }
    }

    pub fn commands(&self) -> Result<Vec<(usize, usize)>, ParseError> {
        Ok(split_commands(self.src)?)
    }

    pub fn parse(&self, range: (usize, usize), ops: &[OpInfo]) -> PResult<ParsedCommand> {
        parse_command_with(&self.lines, self.src, range.0, range.1, ops)
    }
}

pub(crate) fn parse_command_with(
    lines: &LineIndex,
    src: &str,
    start: usize,
    end: usize,
    ops: &[OpInfo],
) -> PResult<ParsedCommand> {
    let op_tokens: Vec<&str> = ops.iter().map(|o| o.token.as_str()).collect();
    let toks = tokenize_with(lines, src, start, end, &op_tokens)?;
    parse_tokens(toks, ops, |p| {
        let c = p.command()?;
        p.expect_sym(".")?;
        if *p.peek() != Tok::Eof {
            return p.error("end of command");
        }
        Ok(c)
    })
}

/// Parses a whole file, registering notations as they are declared so that
/// later commands see them. Stops at the first error.
pub fn parse_file(src: &str, ops: &[OpInfo]) -> PResult<Vec<ParsedCommand>> {
    let lines = LineIndex::new(src);
    let mut ops = ops.to_vec();
    let mut out = Vec::new();
    for (start, end) in split_commands(src)? {
        let cmd = parse_command_with(&lines, src, start, end, &ops)?;
        if let Command::Notation { token, level, assoc, .. } = &cmd.cmd {
            ops.push(OpInfo {
                token: token.clone(),
                level: level.unwrap_or(DEFAULT_NOTATION_LEVEL),
                assoc: assoc.unwrap_or(Assoc::Left),
            });
        }
        out.push(cmd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops() -> Vec<OpInfo> {
        vec![
            OpInfo { token: "*".into(), level: 40, assoc: Assoc::Left },
            OpInfo { token: "+".into(), level: 50, assoc: Assoc::Left },
            OpInfo { token: "<=".into(), level: 70, assoc: Assoc::NoAssoc },
        ]
    }

    fn t(src: &str) -> SurfaceTerm {
        parse_term(src, &ops()).unwrap()
    }

    fn v(s: &str) -> SurfaceTerm {
        SurfaceTerm::new(SKind::Var(s.into()), Span::default())
    }

    fn infix(op: &str, a: SurfaceTerm, b: SurfaceTerm) -> SurfaceTerm {
        SurfaceTerm::new(SKind::Infix(op.into(), Box::new(a), Box::new(b)), Span::default())
    }

    fn arrow(a: SurfaceTerm, b: SurfaceTerm) -> SurfaceTerm {
        SurfaceTerm::new(SKind::Arrow(Box::new(a), Box::new(b)), Span::default())
    }

    fn app(f: SurfaceTerm, args: Vec<SurfaceTerm>) -> SurfaceTerm {
        SurfaceTerm::new(SKind::App(Box::new(f), args), Span::default())
    }

    #[test]
    fn arrows_are_right_associative() {
        let c = v("carrier");
        assert_eq!(t("carrier -> carrier -> carrier"), arrow(c.clone(), arrow(c.clone(), c)));
    }

    #[test]
    fn left_associative_operators() {
        assert_eq!(t("g * h * k"), infix("*", infix("*", v("g"), v("h")), v("k")));
        assert_eq!(t("a + b * c"), infix("+", v("a"), infix("*", v("b"), v("c"))));
        assert_eq!(t("f a + b"), infix("+", app(v("f"), vec![v("a")]), v("b")));
    }

    #[test]
    fn non_associative_chain_rejected() {
        assert!(parse_term("a = b = c", &ops()).is_err());
        assert_eq!(t("a + b = c"), infix("=", infix("+", v("a"), v("b")), v("c")));
    }

    #[test]
    fn forall_groups_share_annotation() {
        let got = t("forall x y z : carrier G, mulg x (mulg y z) = mulg (mulg x y) z");
        let SKind::Pi(bs, body) = got.kind else { panic!("expected a Pi") };
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].names.iter().map(|n| n.0.as_str()).collect::<Vec<_>>(), ["x", "y", "z"]);
        assert!(matches!(body.kind, SKind::Infix(ref op, _, _) if op == "="));
    }

    #[test]
    fn mixed_binders_and_explicit() {
        let got = t("fun {A : Type} (x : A) => @id A x");
        let SKind::Lam(bs, body) = got.kind else { panic!("expected a lambda") };
        assert!(bs[0].implicit && !bs[1].implicit);
        assert_eq!(
            body.kind,
            SKind::App(Box::new(SurfaceTerm::new(SKind::Explicit("id".into()), Span::default())), vec![v("A"), v("x")])
        );
        assert_eq!(t("Type 2").kind, SKind::Type(Some(2)));
        assert_eq!(
            t("(t : Vec A n)").kind,
            SKind::Ascribe(Box::new(v("t")), Box::new(app(v("Vec"), vec![v("A"), v("n")])))
        );
    }

    #[test]
    fn record_command() {
        let src =
            "Record group : Type := Group { carrier : Type; mulg : carrier -> carrier -> carrier; oneg : carrier }.";
        let cmds = parse_file(src, &[]).unwrap();
        let Command::Record { name, ctor, fields, .. } = &cmds[0].cmd else { panic!("expected a record") };
        assert_eq!((name.as_str(), ctor.as_str(), fields.len()), ("group", "Group", 3));
    }

    #[test]
    fn vernacular_commands() {
        let src = "Coercion carrier : group >-> Type.\nCanonical Structure IntGroup.\n\
                   Notation \"g * h\" := (mulg _ g h) (at level 40, left associativity).\n\
                   Check a * b.\nFail Check (t : Vec A (n + 0)).";
        let cmds = parse_file(src, &[OpInfo { token: "+".into(), level: 50, assoc: Assoc::Left }]).unwrap();
        assert_eq!(
            cmds[0].cmd,
            Command::Coercion { name: "carrier".into(), source: "group".into(), target: ClassSpec::Sortclass }
        );
        assert_eq!(cmds[1].cmd, Command::Canonical { name: "IntGroup".into() });
        assert!(
            matches!(&cmds[2].cmd, Command::Notation { token, level: Some(40), assoc: Some(Assoc::Left), .. } if token == "*")
        );
        assert_eq!(cmds[3].cmd, Command::Check(infix("*", v("a"), v("b"))));
        assert!(matches!(&cmds[4].cmd, Command::Fail(inner) if matches!(inner.cmd, Command::Check(_))));
        assert_eq!(cmds[4].span.line, 5);
    }

    #[test]
    fn inductive_and_axioms() {
        let src = "Inductive nat : Type := O : nat | S : nat -> nat.\nAxiom a b c : nat.";
        let cmds = parse_file(src, &[]).unwrap();
        let Command::Inductive { ctors, .. } = &cmds[0].cmd else { panic!() };
        assert_eq!(ctors.len(), 2);
        let Command::Axiom { names, .. } = &cmds[1].cmd else { panic!() };
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn errors_have_spans_inside_input() {
        let src = "Check (a b.";
        let err = parse_file(src, &[]).unwrap_err();
        assert!(err.span.end <= src.len());
        assert_eq!(err.category, Category::ParseError);
        let err = parse_file("Check a $ b.", &[]).unwrap_err();
        assert_eq!(err.category, Category::LexError);
        assert_eq!(err.span.col, 9);
    }
}
