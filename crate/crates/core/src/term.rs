//! Core term syntax and de Bruijn machinery.
//!
//! Variables are de Bruijn indices: `Var(0)` is the innermost binder. Binder
//! names are kept for printing only and never take part in equality.

use std::borrow::Borrow;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A global constant name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Name::new(&s))
    }
}

/// Display name of a binder. Always compares equal: alpha-equivalence is
/// index equality.
#[derive(Clone)]
pub struct BinderName(Arc<str>);

impl BinderName {
    pub fn new(s: &str) -> Self {
        BinderName(Arc::from(s))
    }

    pub fn anonymous() -> Self {
        BinderName::new("_")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_anonymous(&self) -> bool {
        &*self.0 == "_"
    }
}

impl PartialEq for BinderName {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for BinderName {}

impl Hash for BinderName {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl fmt::Debug for BinderName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Universe level of a sort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Prop,
    Type(u32),
}

impl Level {
    /// The sort a sort lives in: `Prop : Type 0`, `Type i : Type (i+1)`.
    pub fn succ(self) -> Level {
        match self {
            Level::Prop => Level::Type(0),
            Level::Type(i) => Level::Type(i + 1),
        }
    }

    /// Cumulativity: `Prop ⊑ Type 0 ⊑ Type 1 ⊑ …`.
    pub fn leq(self, other: Level) -> bool {
        match (self, other) {
            (Level::Prop, _) => true,
            (Level::Type(_), Level::Prop) => false,
            (Level::Type(i), Level::Type(j)) => i <= j,
        }
    }

    fn rank(self) -> u32 {
        match self {
            Level::Prop => 0,
            Level::Type(i) => i,
        }
    }

    /// Sort of a product with domain in `dom` and codomain in `cod`. Prop is
    /// impredicative.
    pub fn product(dom: Level, cod: Level) -> Level {
        match cod {
            Level::Prop => Level::Prop,
            Level::Type(j) => Level::Type(dom.rank().max(j)),
        }
    }

    pub fn max(self, other: Level) -> Level {
        if self.leq(other) {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Prop => f.write_str("Prop"),
            Level::Type(0) => f.write_str("Type"),
            Level::Type(i) => write!(f, "Type {i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaId(pub u32);

impl fmt::Display for MetaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Sort(Level),
    Var(usize),
    Const(Name),
    App(Arc<Term>, Arc<Term>),
    Lam(BinderName, Arc<Term>, Arc<Term>),
    Pi(BinderName, Arc<Term>, Arc<Term>),
    /// A metavariable occurrence. The spine has one entry per variable of
    /// the meta's local context, outermost first.
    Meta(MetaId, Arc<[Term]>),
}

impl Term {
    pub fn sort(level: Level) -> Term {
        Term::Sort(level)
    }

    pub fn prop() -> Term {
        Term::Sort(Level::Prop)
    }

    pub fn ty(i: u32) -> Term {
        Term::Sort(Level::Type(i))
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(Name::new(name))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Arc::new(f), Arc::new(a))
    }

    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }

    pub fn lam(name: &str, dom: Term, body: Term) -> Term {
        Term::Lam(BinderName::new(name), Arc::new(dom), Arc::new(body))
    }

    pub fn pi(name: &str, dom: Term, cod: Term) -> Term {
        Term::Pi(BinderName::new(name), Arc::new(dom), Arc::new(cod))
    }

    /// Non-dependent function type; `cod` lives in the same context as `dom`.
    pub fn arrow(dom: Term, cod: Term) -> Term {
        Term::Pi(BinderName::anonymous(), Arc::new(dom), Arc::new(cod.lift(0, 1)))
    }

    pub fn meta(id: MetaId, spine: Vec<Term>) -> Term {
        Term::Meta(id, spine.into())
    }

    /// The spine `[Var(n-1), …, Var(0)]` of a context of length `n`.
    pub fn identity_spine(n: usize) -> Vec<Term> {
        (0..n).rev().map(Term::Var).collect()
    }

    /// Head and arguments of an application spine.
    pub fn head_args(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Term::App(f, a) = cur {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn head(&self) -> &Term {
        let mut cur = self;
        while let Term::App(f, _) = cur {
            cur = f;
        }
        cur
    }

    pub fn head_const(&self) -> Option<&Name> {
        match self.head() {
            Term::Const(n) => Some(n),
            _ => None,
        }
    }

    /// Contracts beta-redexes at the head: `(fun x => b) a args` becomes
    /// `b[a] args`, repeatedly.
    pub fn head_beta(&self) -> Term {
        let (head, args) = self.head_args();
        if !matches!(head, Term::Lam(..)) || args.is_empty() {
            return self.clone();
        }
        let mut cur = head.clone();
        let mut rest = args.into_iter();
        for a in rest.by_ref() {
            match cur {
                Term::Lam(_, _, b) => cur = b.instantiate(a),
                other => {
                    cur = Term::app(other, a.clone());
                    break;
                }
            }
        }
        let t = Term::apps(cur, rest.cloned());
        if matches!(t.head(), Term::Lam(..)) && matches!(t, Term::App(..)) {
            t.head_beta()
        } else {
            t
        }
    }

    pub fn is_sort(&self) -> bool {
        matches!(self, Term::Sort(_))
    }

    /// Shifts free variables with index `>= cutoff` by `amount`.
    pub fn lift(&self, cutoff: usize, amount: usize) -> Term {
        if amount == 0 {
            return self.clone();
        }
        self.map_vars(cutoff, &|idx, depth| {
            if idx >= depth {
                Term::Var(idx + amount)
            } else {
                Term::Var(idx)
            }
        })
    }

    /// Replaces free `Var(index)` with `replacement` and closes the gap left
    /// by the removed variable. `replacement` lives in the resulting context.
    pub fn subst(&self, index: usize, replacement: &Term) -> Term {
        self.map_vars(index, &|idx, depth| {
            if idx == depth {
                replacement.lift(0, depth - index)
            } else if idx > depth {
                Term::Var(idx - 1)
            } else {
                Term::Var(idx)
            }
        })
    }

    /// Beta-instantiates the innermost bound variable.
    pub fn instantiate(&self, value: &Term) -> Term {
        self.subst(0, value)
    }

    /// Simultaneously replaces the `vals.len()` innermost variables.
    /// `vals[0]` replaces the outermost of them. Values live in the context
    /// obtained by dropping those variables.
    pub fn instantiate_many(&self, vals: &[Term]) -> Term {
        let k = vals.len();
        if k == 0 {
            return self.clone();
        }
        self.map_vars(0, &|idx, depth| {
            if idx < depth {
                Term::Var(idx)
            } else if idx - depth < k {
                vals[k - 1 - (idx - depth)].lift(0, depth)
            } else {
                Term::Var(idx - k)
            }
        })
    }

    /// Rebuilds the term, replacing every variable occurrence through `f`,
    /// which receives the index and the current binder depth (offset by
    /// `start`).
    fn map_vars(&self, start: usize, f: &dyn Fn(usize, usize) -> Term) -> Term {
        fn go(t: &Term, depth: usize, f: &dyn Fn(usize, usize) -> Term) -> Term {
            match t {
                Term::Var(i) => f(*i, depth),
                Term::Sort(_) | Term::Const(_) => t.clone(),
                Term::App(a, b) => Term::App(Arc::new(go(a, depth, f)), Arc::new(go(b, depth, f))),
                Term::Lam(n, d, b) => Term::Lam(n.clone(), Arc::new(go(d, depth, f)), Arc::new(go(b, depth + 1, f))),
                Term::Pi(n, d, b) => Term::Pi(n.clone(), Arc::new(go(d, depth, f)), Arc::new(go(b, depth + 1, f))),
                Term::Meta(m, spine) => Term::Meta(*m, spine.iter().map(|s| go(s, depth, f)).collect()),
            }
        }
        if !self.has_vars() {
            return self.clone();
        }
        go(self, start, f)
    }

    fn has_vars(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::Sort(_) | Term::Const(_) => false,
            Term::App(a, b) | Term::Lam(_, a, b) | Term::Pi(_, a, b) => a.has_vars() || b.has_vars(),
            Term::Meta(_, spine) => spine.iter().any(Term::has_vars),
        }
    }

    /// Partial renaming of free variables: `f` maps a free index (relative to
    /// the term's context) to a new one, or refuses.
    pub fn rename_free(&self, f: &dyn Fn(usize) -> Option<usize>) -> Option<Term> {
        fn go(t: &Term, depth: usize, f: &dyn Fn(usize) -> Option<usize>) -> Option<Term> {
            Some(match t {
                Term::Var(i) if *i < depth => Term::Var(*i),
                Term::Var(i) => Term::Var(f(*i - depth)? + depth),
                Term::Sort(_) | Term::Const(_) => t.clone(),
                Term::App(a, b) => Term::App(Arc::new(go(a, depth, f)?), Arc::new(go(b, depth, f)?)),
                Term::Lam(n, d, b) => Term::Lam(n.clone(), Arc::new(go(d, depth, f)?), Arc::new(go(b, depth + 1, f)?)),
                Term::Pi(n, d, b) => Term::Pi(n.clone(), Arc::new(go(d, depth, f)?), Arc::new(go(b, depth + 1, f)?)),
                Term::Meta(m, spine) => {
                    Term::Meta(*m, spine.iter().map(|s| go(s, depth, f)).collect::<Option<Vec<_>>>()?.into())
                }
            })
        }
        go(self, 0, f)
    }

    /// True when free variable `idx` occurs.
    pub fn has_free_var(&self, idx: usize) -> bool {
        fn go(t: &Term, target: usize) -> bool {
            match t {
                Term::Var(i) => *i == target,
                Term::Sort(_) | Term::Const(_) => false,
                Term::App(a, b) => go(a, target) || go(b, target),
                Term::Lam(_, d, b) | Term::Pi(_, d, b) => go(d, target) || go(b, target + 1),
                Term::Meta(_, spine) => spine.iter().any(|s| go(s, target)),
            }
        }
        go(self, idx)
    }

    /// Calls `f` on every metavariable occurrence.
    pub fn for_each_meta(&self, f: &mut dyn FnMut(MetaId, &[Term])) {
        match self {
            Term::Var(_) | Term::Sort(_) | Term::Const(_) => {}
            Term::App(a, b) | Term::Lam(_, a, b) | Term::Pi(_, a, b) => {
                a.for_each_meta(f);
                b.for_each_meta(f);
            }
            Term::Meta(m, spine) => {
                f(*m, spine);
                for s in spine.iter() {
                    s.for_each_meta(f);
                }
            }
        }
    }

    pub fn has_metas(&self) -> bool {
        let mut found = false;
        self.for_each_meta(&mut |_, _| found = true);
        found
    }

    pub fn mentions_meta(&self, id: MetaId) -> bool {
        let mut found = false;
        self.for_each_meta(&mut |m, _| found |= m == id);
        found
    }

    pub fn metas(&self) -> Vec<MetaId> {
        let mut out = Vec::new();
        self.for_each_meta(&mut |m, _| {
            if !out.contains(&m) {
                out.push(m)
            }
        });
        out
    }

    pub fn mentions_const(&self, name: &str) -> bool {
        match self {
            Term::Const(n) => n.as_str() == name,
            Term::Var(_) | Term::Sort(_) => false,
            Term::App(a, b) | Term::Lam(_, a, b) | Term::Pi(_, a, b) => {
                a.mentions_const(name) || b.mentions_const(name)
            }
            Term::Meta(_, spine) => spine.iter().any(|s| s.mentions_const(name)),
        }
    }

    /// Number of nodes; used by generators and benchmarks.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Sort(_) | Term::Const(_) => 1,
            Term::App(a, b) | Term::Lam(_, a, b) | Term::Pi(_, a, b) => 1 + a.size() + b.size(),
            Term::Meta(_, spine) => 1 + spine.iter().map(Term::size).sum::<usize>(),
        }
    }
}

/// Key used to index canonical-structure hints.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeadKey {
    Const(Name),
    Sort,
    Pi,
}

impl fmt::Display for HeadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadKey::Const(n) => write!(f, "{n}"),
            HeadKey::Sort => f.write_str("Sort"),
            HeadKey::Pi => f.write_str("forall"),
        }
    }
}

/// Key of a term in weak-head-normal form. Flexible and variable heads have
/// no key.
pub fn head_key(t: &Term) -> Option<HeadKey> {
    match t.head() {
        Term::Const(n) => Some(HeadKey::Const(n.clone())),
        Term::Sort(_) => Some(HeadKey::Sort),
        Term::Pi(..) => Some(HeadKey::Pi),
        _ => None,
    }
}
