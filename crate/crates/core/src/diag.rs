//! Source spans and structured diagnostics.

use std::fmt;

use serde::Serialize;

/// Byte range in a source file with the 1-based line/column of its start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, col: u32) -> Self {
        Span { start, end, line, col }
    }

    /// Smallest span covering both.
    pub fn to(self, other: Span) -> Span {
        let (first, _) = if self.start <= other.start { (self, other) } else { (other, self) };
        Span { start: first.start, end: self.end.max(other.end), line: first.line, col: first.col }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Category {
    LexError,
    ParseError,
    UnknownIdentifier,
    TypeMismatch,
    NotAFunction,
    SortError,
    UnresolvedMeta,
    StuckConstraint,
    Mismatch,
    OccursCheck,
    ScopeError,
    NoCoercionPath,
    AmbiguousNotation,
    DuplicateName,
    IllFormedTelescope,
    BadInductive,
    DuplicateCoercionPath,
    DuplicateHint,
    BadCoercionTarget,
    BadCanonical,
    FuelExhausted,
    UnexpectedSuccess,
    IoError,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::LexError => "LexError",
            Category::ParseError => "ParseError",
            Category::UnknownIdentifier => "UnknownIdentifier",
            Category::TypeMismatch => "TypeMismatch",
            Category::NotAFunction => "NotAFunction",
            Category::SortError => "SortError",
            Category::UnresolvedMeta => "UnresolvedMeta",
            Category::StuckConstraint => "StuckConstraint",
            Category::Mismatch => "Mismatch",
            Category::OccursCheck => "OccursCheck",
            Category::ScopeError => "ScopeError",
            Category::NoCoercionPath => "NoCoercionPath",
            Category::AmbiguousNotation => "AmbiguousNotation",
            Category::DuplicateName => "DuplicateName",
            Category::IllFormedTelescope => "IllFormedTelescope",
            Category::BadInductive => "BadInductive",
            Category::DuplicateCoercionPath => "DuplicateCoercionPath",
            Category::DuplicateHint => "DuplicateHint",
            Category::BadCoercionTarget => "BadCoercionTarget",
            Category::BadCanonical => "BadCanonical",
            Category::FuelExhausted => "FuelExhausted",
            Category::UnexpectedSuccess => "UnexpectedSuccess",
            Category::IoError => "IoError",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub category: Category,
    pub message: String,
    pub span: Span,
    pub notes: Vec<String>,
}

impl Diagnostic {
    pub fn new(category: Category, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { category, message: message.into(), span, notes: Vec::new() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// `file:line:col: category: message`, followed by indented notes.
    pub fn render(&self, file: &str) -> String {
        let mut s = format!("{file}:{}:{}: {}: {}", self.span.line, self.span.col, self.category, self.message);
        for n in &self.notes {
            s.push_str("\n  note: ");
            s.push_str(n);
        }
        s
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl std::error::Error for Diagnostic {}
