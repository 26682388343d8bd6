//! Surface syntax: tokens, terms and vernacular commands as written in
//! `.mtt` files.

mod lexer;
mod parser;
mod print;

pub use lexer::{split_commands, tokenize, LexError, Tok, Token};
pub use parser::{
    parse_command, parse_file, parse_term, OpInfo, ParseError, ParsedCommand, Source, ARROW_LEVEL,
    DEFAULT_NOTATION_LEVEL, EQ_LEVEL, TOP_LEVEL,
};
pub use print::print_surface;

use crate::diag::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Assoc {
    Left,
    Right,
    NoAssoc,
}

/// A binary infix notation `lhs token rhs := template`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotationEntry {
    pub token: String,
    pub level: u32,
    pub assoc: Assoc,
    /// Names of the two operand holes, in order.
    pub lhs: String,
    pub rhs: String,
    pub template: SurfaceTerm,
}

impl NotationEntry {
    /// Fills the template's holes with the operands.
    /// Instantiates the template with the operands. Template nodes take the
    /// span of the whole occurrence; operands keep their own.
    pub fn expand(&self, lhs: &SurfaceTerm, rhs: &SurfaceTerm, span: Span) -> SurfaceTerm {
        let template = respan(&self.template, span);
        subst_names(&template, &[(self.lhs.as_str(), lhs), (self.rhs.as_str(), rhs)])
    }
}

fn respan(t: &SurfaceTerm, span: Span) -> SurfaceTerm {
    let r = |t: &SurfaceTerm| Box::new(respan(t, span));
    let binders = |bs: &[SBinder]| {
        bs.iter()
            .map(|b| SBinder {
                names: b.names.iter().map(|(n, _)| (n.clone(), span)).collect(),
                ty: b.ty.as_ref().map(|t| respan(t, span)),
                implicit: b.implicit,
            })
            .collect()
    };
    let kind = match &t.kind {
        SKind::App(f, args) => SKind::App(r(f), args.iter().map(|a| respan(a, span)).collect()),
        SKind::Lam(bs, body) => SKind::Lam(binders(bs), r(body)),
        SKind::Pi(bs, body) => SKind::Pi(binders(bs), r(body)),
        SKind::Arrow(a, b) => SKind::Arrow(r(a), r(b)),
        SKind::Infix(op, a, b) => SKind::Infix(op.clone(), r(a), r(b)),
        SKind::Ascribe(a, b) => SKind::Ascribe(r(a), r(b)),
        other => other.clone(),
    };
    SurfaceTerm { kind, span }
}

fn subst_names(t: &SurfaceTerm, map: &[(&str, &SurfaceTerm)]) -> SurfaceTerm {
    let kind = match &t.kind {
        SKind::Var(x) => match map.iter().find(|(n, _)| n == x) {
            Some((_, r)) => return (*r).clone(),
            None => SKind::Var(x.clone()),
        },
        SKind::App(f, args) => {
            SKind::App(Box::new(subst_names(f, map)), args.iter().map(|a| subst_names(a, map)).collect())
        }
        SKind::Lam(bs, body) | SKind::Pi(bs, body) => {
            let mut inner: Vec<(&str, &SurfaceTerm)> = map.to_vec();
            let mut new_bs = Vec::new();
            for b in bs {
                let ty = b.ty.as_ref().map(|ty| subst_names(ty, &inner));
                inner.retain(|(n, _)| !b.names.iter().any(|(bn, _)| bn == n));
                new_bs.push(SBinder { names: b.names.clone(), ty, implicit: b.implicit });
            }
            let body = Box::new(subst_names(body, &inner));
            if matches!(t.kind, SKind::Lam(..)) {
                SKind::Lam(new_bs, body)
            } else {
                SKind::Pi(new_bs, body)
            }
        }
        SKind::Arrow(a, b) => SKind::Arrow(Box::new(subst_names(a, map)), Box::new(subst_names(b, map))),
        SKind::Infix(op, a, b) => {
            SKind::Infix(op.clone(), Box::new(subst_names(a, map)), Box::new(subst_names(b, map)))
        }
        SKind::Ascribe(a, b) => SKind::Ascribe(Box::new(subst_names(a, map)), Box::new(subst_names(b, map))),
        other => other.clone(),
    };
    SurfaceTerm { kind, span: t.span }
}

#[derive(Clone, Debug)]
pub struct SurfaceTerm {
    pub kind: SKind,
    pub span: Span,
}

impl PartialEq for SurfaceTerm {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for SurfaceTerm {}

impl SurfaceTerm {
    pub fn new(kind: SKind, span: Span) -> Self {
        SurfaceTerm { kind, span }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SKind {
    Var(String),
    /// `@name`: no implicit-argument insertion.
    Explicit(String),
    Hole,
    Num(u64),
    Prop,
    /// `Type` with an optional explicit level.
    Type(Option<u32>),
    App(Box<SurfaceTerm>, Vec<SurfaceTerm>),
    Lam(Vec<SBinder>, Box<SurfaceTerm>),
    Pi(Vec<SBinder>, Box<SurfaceTerm>),
    Arrow(Box<SurfaceTerm>, Box<SurfaceTerm>),
    /// A binary operator occurrence, `=` included.
    Infix(String, Box<SurfaceTerm>, Box<SurfaceTerm>),
    Ascribe(Box<SurfaceTerm>, Box<SurfaceTerm>),
}

/// A group of binders sharing one (optional) type annotation.
#[derive(Clone, Debug)]
pub struct SBinder {
    pub names: Vec<(String, Span)>,
    pub ty: Option<SurfaceTerm>,
    pub implicit: bool,
}

impl PartialEq for SBinder {
    fn eq(&self, other: &Self) -> bool {
        self.implicit == other.implicit
            && self.ty == other.ty
            && self.names.len() == other.names.len()
            && self.names.iter().zip(&other.names).all(|(a, b)| a.0 == b.0)
    }
}

impl Eq for SBinder {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassSpec {
    Named(String),
    Sortclass,
    Funclass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorSpec {
    pub name: String,
    pub span: Span,
    pub binders: Vec<SBinder>,
    pub ty: Option<SurfaceTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub span: Span,
    pub ty: SurfaceTerm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Definition {
        name: String,
        binders: Vec<SBinder>,
        ty: Option<SurfaceTerm>,
        body: SurfaceTerm,
    },
    Axiom {
        names: Vec<(String, Span)>,
        ty: SurfaceTerm,
    },
    Inductive {
        name: String,
        params: Vec<SBinder>,
        sort: Option<SurfaceTerm>,
        ctors: Vec<CtorSpec>,
    },
    Record {
        name: String,
        params: Vec<SBinder>,
        sort: Option<SurfaceTerm>,
        ctor: String,
        fields: Vec<FieldSpec>,
    },
    Coercion {
        name: String,
        source: String,
        target: ClassSpec,
    },
    Canonical {
        name: String,
    },
    Notation {
        token: String,
        lhs: String,
        rhs: String,
        template: SurfaceTerm,
        level: Option<u32>,
        assoc: Option<Assoc>,
    },
    Check(SurfaceTerm),
    Eval(SurfaceTerm),
    Fail(Box<ParsedCommand>),
}

impl Command {
    pub fn keyword(&self) -> &'static str {
        match self {
            Command::Definition { .. } => "Definition",
            Command::Axiom { .. } => "Axiom",
            Command::Inductive { .. } => "Inductive",
            Command::Record { .. } => "Record",
            Command::Coercion { .. } => "Coercion",
            Command::Canonical { .. } => "Canonical",
            Command::Notation { .. } => "Notation",
            Command::Check(_) => "Check",
            Command::Eval(_) => "Eval",
            Command::Fail(_) => "Fail",
        }
    }
}
