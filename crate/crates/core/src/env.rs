//! The global environment: declarations in order plus the tables derived
//! from them (coercion graph, canonical hints, notations, implicit flags).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::surface::{NotationEntry, OpInfo};
use crate::term::{BinderName, HeadKey, Level, Name, Term};

/// Level of the sort that recursor motives and `eq_rect` motives land in.
pub const MOTIVE_LEVEL: u32 = 2;
/// Level of the domain of the built-in equality.
pub const EQ_LEVEL: u32 = 1;

#[derive(Clone, Debug)]
pub struct InductiveDecl {
    pub name: Name,
    pub params: Vec<(BinderName, Term)>,
    pub level: Level,
    /// Constructor types in the context of the parameters; the inductive
    /// itself is referenced as a constant.
    pub ctors: Vec<(Name, Term)>,
    pub recursor: Name,
}

#[derive(Clone, Debug)]
pub struct RecordDecl {
    pub name: Name,
    pub params: Vec<(BinderName, Term)>,
    pub level: Level,
    pub ctor: Name,
    /// Field `i` lives in the context of the parameters and fields `< i`.
    pub fields: Vec<(Name, Term)>,
}

type ClassPair = (CoercionClass, CoercionClass);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoercionClass {
    Named(Name),
    Sortclass,
    Funclass,
}

impl fmt::Display for CoercionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoercionClass::Named(n) => write!(f, "{n}"),
            CoercionClass::Sortclass => f.write_str("Sortclass"),
            CoercionClass::Funclass => f.write_str("Funclass"),
        }
    }
}

/// Coercion class of a type, read off its head.
pub fn class_of(ty: &Term) -> Option<CoercionClass> {
    match ty {
        Term::Sort(_) => Some(CoercionClass::Sortclass),
        Term::Pi(..) => Some(CoercionClass::Funclass),
        _ => ty.head_const().map(|n| CoercionClass::Named(n.clone())),
    }
}

#[derive(Clone, Debug)]
pub enum Declaration {
    Definition { name: Name, ty: Term, body: Term },
    Axiom { name: Name, ty: Term },
    Inductive(InductiveDecl),
    Record(RecordDecl),
    Coercion { function: Name, source: CoercionClass, target: CoercionClass },
    CanonicalHint { projection: Name, key: HeadKey, instance: Name },
    Notation(NotationEntry),
    Implicit { name: Name, flags: Vec<bool> },
}

#[derive(Clone, Debug)]
pub struct InductiveInfo {
    pub name: Name,
    pub nparams: usize,
    pub level: Level,
    pub ctors: Vec<Name>,
    /// Per constructor, which arguments are recursive occurrences.
    pub recursive: Vec<Vec<bool>>,
    pub recursor: Option<Name>,
    /// Projection names when the inductive is a record.
    pub projections: Vec<Name>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Eq,
    EqRefl,
    EqRect,
}

#[derive(Clone, Debug)]
pub enum ConstKind {
    Axiom,
    Definition { body: Term },
    Inductive(Arc<InductiveInfo>),
    Constructor { inductive: Name, index: usize, nparams: usize, nargs: usize },
    Recursor { inductive: Name, nparams: usize, nminors: usize },
    Projection { record: Name, index: usize, nparams: usize },
    Builtin(Builtin),
}

#[derive(Clone, Debug)]
pub struct ConstInfo {
    pub name: Name,
    pub ty: Term,
    pub kind: ConstKind,
    /// Declaration position; later constants are unfolded first.
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoercionEdge {
    pub function: Name,
    pub source: CoercionClass,
    pub target: CoercionClass,
    /// Arguments preceding the coerced one.
    pub nparams: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CoercionGraph {
    edges: Vec<CoercionEdge>,
    paths: BTreeMap<(CoercionClass, CoercionClass), Vec<usize>>,
}

impl CoercionGraph {
    pub fn edges(&self) -> &[CoercionEdge] {
        &self.edges
    }

    pub fn path(&self, from: &CoercionClass, to: &CoercionClass) -> Option<Vec<&CoercionEdge>> {
        let idx = self.paths.get(&(from.clone(), to.clone()))?;
        Some(idx.iter().map(|&i| &self.edges[i]).collect())
    }

    pub fn paths(&self) -> impl Iterator<Item = (&(CoercionClass, CoercionClass), Vec<&CoercionEdge>)> {
        self.paths.iter().map(|(k, v)| (k, v.iter().map(|&i| &self.edges[i]).collect()))
    }

    /// All composite paths, or the first class pair reached twice.
    fn compute_paths(edges: &[CoercionEdge]) -> Result<BTreeMap<ClassPair, Vec<usize>>, ClassPair> {
        let mut paths = BTreeMap::new();
        let mut sources: Vec<&CoercionClass> = edges.iter().map(|e| &e.source).collect();
        sources.sort();
        sources.dedup();
        for src in sources {
            let mut stack = vec![(src.clone(), Vec::<usize>::new())];
            while let Some((at, path)) = stack.pop() {
                for (i, e) in edges.iter().enumerate() {
                    if e.source != at {
                        continue;
                    }
                    let visited = e.target == *src || path.iter().any(|&j| edges[j].source == e.target);
                    if visited {
                        continue;
                    }
                    let mut next = path.clone();
                    next.push(i);
                    let key = (src.clone(), e.target.clone());
                    if paths.contains_key(&key) {
                        return Err(key);
                    }
                    paths.insert(key, next.clone());
                    stack.push((e.target.clone(), next));
                }
            }
        }
        Ok(paths)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DeclError {
    #[error("`{0}` is already declared")]
    DuplicateName(Name),
    #[error("unknown constant `{0}`")]
    UnknownConstant(Name),
    #[error("ill-formed telescope: {0}")]
    IllFormedTelescope(String),
    #[error("ill-formed inductive `{name}`: {reason}")]
    BadInductive { name: Name, reason: String },
    #[error("`{function}` does not map {source_class} to {target}")]
    BadCoercionTarget { function: Name, source_class: CoercionClass, target: CoercionClass },
    #[error("coercion `{function}` creates a second path from {from} to {to}")]
    DuplicateCoercionPath { function: Name, from: CoercionClass, to: CoercionClass },
    #[error("a canonical instance for `{projection}` on `{key}` is already declared (`{existing}`)")]
    DuplicateHint { projection: Name, key: HeadKey, existing: Name },
    #[error("notation token `{0}` is already in use")]
    AmbiguousNotation(String),
}

#[derive(Clone, Debug)]
pub struct Environment {
    decls: Vec<Declaration>,
    consts: IndexMap<Name, ConstInfo>,
    coercions: CoercionGraph,
    hints: BTreeMap<(Name, HeadKey), Name>,
    notations: IndexMap<String, NotationEntry>,
    implicits: BTreeMap<Name, Vec<bool>>,
}

impl Default for Environment {
    fn default() -> Self {
        Self::new()
    }
}

fn var_at(pos: usize, len: usize) -> Term {
    Term::Var(len - 1 - pos)
}

pub fn pis(binders: &[(BinderName, Term)], body: Term) -> Term {
    binders.iter().rev().fold(body, |acc, (n, ty)| Term::Pi(n.clone(), Arc::new(ty.clone()), Arc::new(acc)))
}

/// Splits a Pi telescope into binders and codomain.
pub fn strip_pis(t: &Term) -> (Vec<(BinderName, Term)>, Term) {
    let mut binders = Vec::new();
    let mut cur = t;
    while let Term::Pi(n, d, b) = cur {
        binders.push((n.clone(), (**d).clone()));
        cur = b;
    }
    (binders, cur.clone())
}

impl Environment {
    /// An environment holding only the built-in equality.
    pub fn new() -> Self {
        let mut env = Environment {
            decls: Vec::new(),
            consts: IndexMap::new(),
            coercions: CoercionGraph::default(),
            hints: BTreeMap::new(),
            notations: IndexMap::new(),
            implicits: BTreeMap::new(),
        };
        env.install_equality();
        env
    }

    /// Rebuilds an environment from scratch by declaring `decls` in order.
    pub fn from_declarations(decls: &[Declaration]) -> Result<Self, DeclError> {
        let mut env = Environment::new();
        for d in decls {
            env.declare_mut(d.clone())?;
        }
        Ok(env)
    }

    fn install_equality(&mut self) {
        let eq = Term::constant("eq");
        let eq_ty =
            Term::pi("A", Term::ty(EQ_LEVEL), Term::pi("x", Term::Var(0), Term::pi("y", Term::Var(1), Term::prop())));
        let refl_ty = Term::pi(
            "A",
            Term::ty(EQ_LEVEL),
            Term::pi("x", Term::Var(0), Term::apps(eq.clone(), [Term::Var(1), Term::Var(0), Term::Var(0)])),
        );
        let motive = Term::pi(
            "y",
            Term::Var(1),
            Term::pi("e", Term::apps(eq.clone(), [Term::Var(2), Term::Var(1), Term::Var(0)]), Term::ty(MOTIVE_LEVEL)),
        );
        let base = Term::apps(
            Term::Var(0),
            [Term::Var(1), Term::apps(Term::constant("eq_refl"), [Term::Var(2), Term::Var(1)])],
        );
        let rect_ty = pis(
            &[
                (BinderName::new("A"), Term::ty(EQ_LEVEL)),
                (BinderName::new("x"), Term::Var(0)),
                (BinderName::new("P"), motive),
                (BinderName::new("h"), base),
                (BinderName::new("y"), Term::Var(3)),
                (BinderName::new("e"), Term::apps(eq, [Term::Var(4), Term::Var(3), Term::Var(0)])),
            ],
            Term::apps(Term::Var(3), [Term::Var(1), Term::Var(0)]),
        );
        self.insert_const("eq", eq_ty, ConstKind::Builtin(Builtin::Eq));
        self.insert_const("eq_refl", refl_ty, ConstKind::Builtin(Builtin::EqRefl));
        self.insert_const("eq_rect", rect_ty, ConstKind::Builtin(Builtin::EqRect));
        self.implicits.insert(Name::new("eq_refl"), vec![true]);
        self.implicits.insert(Name::new("eq_rect"), vec![true, true]);
    }

    fn insert_const(&mut self, name: &str, ty: Term, kind: ConstKind) {
        let order = self.consts.len();
        let name = Name::new(name);
        self.consts.insert(name.clone(), ConstInfo { name, ty, kind, order });
    }

    pub fn declarations(&self) -> &[Declaration] {
        &self.decls
    }

    pub fn get(&self, name: &str) -> Option<&ConstInfo> {
        self.consts.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.consts.contains_key(name)
    }

    pub fn constants(&self) -> impl Iterator<Item = &ConstInfo> {
        self.consts.values()
    }

    pub fn inductive(&self, name: &str) -> Option<&InductiveInfo> {
        match &self.get(name)?.kind {
            ConstKind::Inductive(info) => Some(info),
            _ => None,
        }
    }

    pub fn coercions(&self) -> &CoercionGraph {
        &self.coercions
    }

    pub fn coercion_path(&self, from: &CoercionClass, to: &CoercionClass) -> Option<Vec<&CoercionEdge>> {
        self.coercions.path(from, to)
    }

    pub fn coercion_edge(&self, function: &str) -> Option<&CoercionEdge> {
        self.coercions.edges.iter().find(|e| e.function.as_str() == function)
    }

    pub fn hint(&self, projection: &Name, key: &HeadKey) -> Option<&Name> {
        self.hints.get(&(projection.clone(), key.clone()))
    }

    pub fn hints(&self) -> impl Iterator<Item = (&(Name, HeadKey), &Name)> {
        self.hints.iter()
    }

    pub fn notation(&self, token: &str) -> Option<&NotationEntry> {
        self.notations.get(token)
    }

    pub fn notations(&self) -> impl Iterator<Item = &NotationEntry> {
        self.notations.values()
    }

    /// Registered operator tokens as the parser sees them.
    pub fn operators(&self) -> Vec<OpInfo> {
        self.notations.values().map(|n| OpInfo { token: n.token.clone(), level: n.level, assoc: n.assoc }).collect()
    }

    /// Number of leading implicit binders of `name`.
    pub fn implicit_prefix(&self, name: &str) -> usize {
        self.implicits.get(name).map(|f| f.iter().take_while(|b| **b).count()).unwrap_or(0)
    }

    pub fn declare(&self, d: Declaration) -> Result<Environment, DeclError> {
        let mut env = self.clone();
        env.declare_mut(d)?;
        Ok(env)
    }

    /// Adds a declaration in place. On error the environment is unchanged.
    pub fn declare_mut(&mut self, d: Declaration) -> Result<(), DeclError> {
        match &d {
            Declaration::Definition { name, ty, body } => {
                self.fresh(&[name])?;
                self.insert_const(name.as_str(), ty.clone(), ConstKind::Definition { body: body.clone() });
            }
            Declaration::Axiom { name, ty } => {
                self.fresh(&[name])?;
                self.insert_const(name.as_str(), ty.clone(), ConstKind::Axiom);
            }
            Declaration::Inductive(ind) => self.add_inductive(ind)?,
            Declaration::Record(rec) => self.add_record(rec)?,
            Declaration::Coercion { function, source, target } => self.add_coercion(function, source, target)?,
            Declaration::CanonicalHint { projection, key, instance } => {
                self.known(projection)?;
                self.known(instance)?;
                let k = (projection.clone(), key.clone());
                if let Some(existing) = self.hints.get(&k) {
                    return Err(DeclError::DuplicateHint {
                        projection: projection.clone(),
                        key: key.clone(),
                        existing: existing.clone(),
                    });
                }
                self.hints.insert(k, instance.clone());
            }
            Declaration::Notation(entry) => {
                if self.notations.contains_key(&entry.token) || entry.token == "=" || entry.token == "->" {
                    return Err(DeclError::AmbiguousNotation(entry.token.clone()));
                }
                self.notations.insert(entry.token.clone(), entry.clone());
            }
            Declaration::Implicit { name, flags } => {
                self.known(name)?;
                self.implicits.insert(name.clone(), flags.clone());
            }
        }
        self.decls.push(d);
        Ok(())
    }

    fn known(&self, name: &Name) -> Result<(), DeclError> {
        if self.contains(name.as_str()) {
            Ok(())
        } else {
            Err(DeclError::UnknownConstant(name.clone()))
        }
    }

    fn fresh(&self, names: &[&Name]) -> Result<(), DeclError> {
        for (i, n) in names.iter().enumerate() {
            if self.contains(n.as_str()) || names[..i].contains(n) {
                return Err(DeclError::DuplicateName((*n).clone()));
            }
        }
        Ok(())
    }

    fn add_inductive(&mut self, ind: &InductiveDecl) -> Result<(), DeclError> {
        let mut names = vec![&ind.name, &ind.recursor];
        names.extend(ind.ctors.iter().map(|(n, _)| n));
        self.fresh(&names)?;
        let p = ind.params.len();
        let bad = |reason: String| DeclError::BadInductive { name: ind.name.clone(), reason };
        let self_at = |len: usize| Term::apps(Term::Const(ind.name.clone()), (0..p).map(|k| var_at(k, len)));

        // constructor shapes and recursive positions
        let mut recursive = Vec::new();
        let mut ctor_args = Vec::new();
        for (cname, cty) in &ind.ctors {
            let (args, concl) = strip_pis(cty);
            let mut flags = Vec::new();
            for (i, (_, aty)) in args.iter().enumerate() {
                if *aty == self_at(p + i) {
                    flags.push(true);
                } else if aty.mentions_const(ind.name.as_str()) {
                    return Err(bad(format!("non-positive occurrence in constructor `{cname}`")));
                } else {
                    flags.push(false);
                }
            }
            if concl != self_at(p + args.len()) {
                return Err(bad(format!("constructor `{cname}` must return the inductive applied to its parameters")));
            }
            recursive.push(flags);
            ctor_args.push(args);
        }

        // recursor: Π Δ (P : I Δ → Type) minors (x : I Δ), P x
        let motive_ty = Term::Pi(BinderName::new("x"), Arc::new(self_at(p)), Arc::new(Term::ty(MOTIVE_LEVEL)));
        let mut rec_binders = ind.params.clone();
        rec_binders.push((BinderName::new("P"), motive_ty));
        for (j, (cname, _)) in ind.ctors.iter().enumerate() {
            let base = p + 1 + j;
            let args: Vec<(BinderName, Term)> =
                ctor_args[j].iter().enumerate().map(|(i, (n, t))| (n.clone(), t.lift(i, 1 + j))).collect();
            let m = args.len();
            let rec_positions: Vec<usize> = (0..m).filter(|&i| recursive[j][i]).collect();
            let mut binders = args.clone();
            for (h, &r) in rec_positions.iter().enumerate() {
                let len = base + m + h;
                binders.push((BinderName::new("IH"), Term::app(var_at(p, len), var_at(base + r, len))));
            }
            let len = base + m + rec_positions.len();
            let ctor_app = Term::apps(
                Term::Const(cname.clone()),
                (0..p).map(|k| var_at(k, len)).chain((0..m).map(|r| var_at(base + r, len))),
            );
            let minor = pis(&binders, Term::app(var_at(p, len), ctor_app));
            rec_binders.push((BinderName::new(&format!("f{j}")), minor));
        }
        let len = p + 1 + ind.ctors.len();
        rec_binders.push((BinderName::new("x"), self_at(len)));
        let rec_ty = pis(&rec_binders, Term::app(var_at(p, len + 1), Term::Var(0)));

        let info = Arc::new(InductiveInfo {
            name: ind.name.clone(),
            nparams: p,
            level: ind.level,
            ctors: ind.ctors.iter().map(|(n, _)| n.clone()).collect(),
            recursive,
            recursor: Some(ind.recursor.clone()),
            projections: Vec::new(),
        });
        self.insert_const(ind.name.as_str(), pis(&ind.params, Term::sort(ind.level)), ConstKind::Inductive(info));
        for (j, (cname, cty)) in ind.ctors.iter().enumerate() {
            self.insert_const(
                cname.as_str(),
                pis(&ind.params, cty.clone()),
                ConstKind::Constructor { inductive: ind.name.clone(), index: j, nparams: p, nargs: ctor_args[j].len() },
            );
        }
        self.insert_const(
            ind.recursor.as_str(),
            rec_ty,
            ConstKind::Recursor { inductive: ind.name.clone(), nparams: p, nminors: ind.ctors.len() },
        );
        Ok(())
    }

    fn add_record(&mut self, rec: &RecordDecl) -> Result<(), DeclError> {
        let mut names = vec![&rec.name, &rec.ctor];
        names.extend(rec.fields.iter().map(|(n, _)| n));
        self.fresh(&names)?;
        let p = rec.params.len();
        let k = rec.fields.len();
        for (i, (fname, fty)) in rec.fields.iter().enumerate() {
            if fty.mentions_const(rec.name.as_str()) {
                return Err(DeclError::BadInductive {
                    name: rec.name.clone(),
                    reason: format!("field `{fname}` mentions the record itself"),
                });
            }
            // a field may only see the parameters and earlier fields
            if fty.rename_free(&|v| (v < p + i).then_some(v)).is_none() {
                return Err(DeclError::IllFormedTelescope(format!("field `{fname}` mentions an unbound variable")));
            }
        }
        let self_at = |len: usize| Term::apps(Term::Const(rec.name.clone()), (0..p).map(|j| var_at(j, len)));
        let field_binders: Vec<(BinderName, Term)> =
            rec.fields.iter().map(|(n, t)| (BinderName::new(n.as_str()), t.clone())).collect();
        let ctor_ty = pis(&rec.params, pis(&field_binders, self_at(p + k)));

        let info = Arc::new(InductiveInfo {
            name: rec.name.clone(),
            nparams: p,
            level: rec.level,
            ctors: vec![rec.ctor.clone()],
            recursive: vec![vec![false; k]],
            recursor: None,
            projections: rec.fields.iter().map(|(n, _)| n.clone()).collect(),
        });
        self.insert_const(rec.name.as_str(), pis(&rec.params, Term::sort(rec.level)), ConstKind::Inductive(info));
        self.insert_const(
            rec.ctor.as_str(),
            ctor_ty,
            ConstKind::Constructor { inductive: rec.name.clone(), index: 0, nparams: p, nargs: k },
        );
        for (i, (fname, fty)) in rec.fields.iter().enumerate() {
            let vals: Vec<Term> = rec.fields[..i]
                .iter()
                .map(|(prev, _)| {
                    Term::apps(
                        Term::Const(prev.clone()),
                        (0..p).map(|j| var_at(j, p + 1)).chain(std::iter::once(Term::Var(0))),
                    )
                })
                .collect();
            let field_ty = fty.lift(i, 1).instantiate_many(&vals);
            let mut binders = rec.params.clone();
            binders.push((BinderName::new("r"), self_at(p)));
            self.insert_const(
                fname.as_str(),
                pis(&binders, field_ty),
                ConstKind::Projection { record: rec.name.clone(), index: i, nparams: p },
            );
        }
        Ok(())
    }

    fn add_coercion(
        &mut self,
        function: &Name,
        source: &CoercionClass,
        target: &CoercionClass,
    ) -> Result<(), DeclError> {
        let info = self.get(function.as_str()).ok_or_else(|| DeclError::UnknownConstant(function.clone()))?;
        let bad = || DeclError::BadCoercionTarget {
            function: function.clone(),
            source_class: source.clone(),
            target: target.clone(),
        };
        if !matches!(source, CoercionClass::Named(_)) {
            return Err(bad());
        }
        let (binders, _) = strip_pis(&info.ty);
        let mut nparams = None;
        let mut cur = &info.ty;
        for i in 0..binders.len() {
            let Term::Pi(_, dom, cod) = cur else { break };
            if class_of(dom).as_ref() == Some(source) && class_of(cod).as_ref() == Some(target) {
                nparams = Some(i);
                break;
            }
            cur = cod;
        }
        let nparams = nparams.ok_or_else(bad)?;
        if self.coercion_edge(function.as_str()).is_some() {
            return Err(DeclError::DuplicateCoercionPath {
                function: function.clone(),
                from: source.clone(),
                to: target.clone(),
            });
        }
        let mut edges = self.coercions.edges.clone();
        edges.push(CoercionEdge {
            function: function.clone(),
            source: source.clone(),
            target: target.clone(),
            nparams,
        });
        let paths = CoercionGraph::compute_paths(&edges).map_err(|(from, to)| DeclError::DuplicateCoercionPath {
            function: function.clone(),
            from,
            to,
        })?;
        self.coercions = CoercionGraph { edges, paths };
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Term {
        Term::constant(s)
    }

    fn nat_env() -> Environment {
        let env = Environment::new();
        env.declare(Declaration::Inductive(InductiveDecl {
            name: Name::new("nat"),
            params: vec![],
            level: Level::Type(0),
            ctors: vec![(Name::new("O"), c("nat")), (Name::new("S"), Term::arrow(c("nat"), c("nat")))],
            recursor: Name::new("nat_rect"),
        }))
        .unwrap()
    }

    #[test]
    fn nat_recursor_type() {
        let env = nat_env();
        let rec = env.get("nat_rect").unwrap();
        // forall P : nat -> Type 2, P O -> (forall n, P n -> P (S n)) -> forall x, P x
        let expected = Term::pi(
            "P",
            Term::pi("x", c("nat"), Term::ty(MOTIVE_LEVEL)),
            Term::pi(
                "f0",
                Term::app(Term::Var(0), c("O")),
                Term::pi(
                    "f1",
                    Term::pi(
                        "n",
                        c("nat"),
                        Term::pi(
                            "IH",
                            Term::app(Term::Var(2), Term::Var(0)),
                            Term::app(Term::Var(3), Term::app(c("S"), Term::Var(1))),
                        ),
                    ),
                    Term::pi("x", c("nat"), Term::app(Term::Var(3), Term::Var(0))),
                ),
            ),
        );
        assert_eq!(rec.ty, expected);
        let info = env.inductive("nat").unwrap();
        assert_eq!(info.recursive, vec![vec![], vec![true]]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let env = nat_env();
        let err = env.declare(Declaration::Axiom { name: Name::new("S"), ty: c("nat") }).unwrap_err();
        assert_eq!(err, DeclError::DuplicateName(Name::new("S")));
    }

    #[test]
    fn record_projection_types_follow_schema() {
        // Record pt : Type := mk { A : Type; a : A; f : A -> A }
        let env = Environment::new()
            .declare(Declaration::Record(RecordDecl {
                name: Name::new("pt"),
                params: vec![],
                level: Level::Type(1),
                ctor: Name::new("mk"),
                fields: vec![
                    (Name::new("A"), Term::ty(0)),
                    (Name::new("a"), Term::Var(0)),
                    (Name::new("f"), Term::arrow(Term::Var(1), Term::Var(1))),
                ],
            }))
            .unwrap();
        let a_of_r = Term::app(c("A"), Term::Var(0));
        assert_eq!(env.get("a").unwrap().ty, Term::pi("r", c("pt"), a_of_r.clone()));
        assert_eq!(env.get("f").unwrap().ty, Term::pi("r", c("pt"), Term::arrow(a_of_r.clone(), a_of_r)));
        assert!(matches!(env.get("f").unwrap().kind, ConstKind::Projection { index: 2, .. }));
    }

    #[test]
    fn telescope_scope_checked() {
        let err = Environment::new()
            .declare(Declaration::Record(RecordDecl {
                name: Name::new("bad"),
                params: vec![],
                level: Level::Type(0),
                ctor: Name::new("mk"),
                fields: vec![(Name::new("x"), Term::Var(0))],
            }))
            .unwrap_err();
        assert!(matches!(err, DeclError::IllFormedTelescope(_)));
    }

    #[test]
    fn hints_and_duplicates() {
        let env = nat_env().declare(Declaration::Axiom { name: Name::new("inst"), ty: c("nat") }).unwrap();
        let key = HeadKey::Const(Name::new("nat"));
        let env = env
            .declare(Declaration::CanonicalHint {
                projection: Name::new("S"),
                key: key.clone(),
                instance: Name::new("inst"),
            })
            .unwrap();
        assert_eq!(env.hint(&Name::new("S"), &key), Some(&Name::new("inst")));
        let err = env
            .declare(Declaration::CanonicalHint { projection: Name::new("S"), key, instance: Name::new("O") })
            .unwrap_err();
        assert!(matches!(err, DeclError::DuplicateHint { .. }));
    }

    #[test]
    fn coercion_paths_are_unique() {
        let mut env = Environment::new();
        for name in ["a", "b", "c"] {
            env.declare_mut(Declaration::Axiom { name: Name::new(name), ty: Term::ty(0) }).unwrap();
        }
        let ab = Term::arrow(c("a"), c("b"));
        let bc = Term::arrow(c("b"), c("c"));
        let ac = Term::arrow(c("a"), c("c"));
        for (n, t) in [("ab", ab), ("bc", bc), ("ac", ac)] {
            env.declare_mut(Declaration::Axiom { name: Name::new(n), ty: t }).unwrap();
        }
        let named = |s: &str| CoercionClass::Named(Name::new(s));
        env.declare_mut(Declaration::Coercion { function: Name::new("ab"), source: named("a"), target: named("b") })
            .unwrap();
        env.declare_mut(Declaration::Coercion { function: Name::new("bc"), source: named("b"), target: named("c") })
            .unwrap();
        let path = env.coercion_path(&named("a"), &named("c")).unwrap();
        assert_eq!(path.iter().map(|e| e.function.as_str()).collect::<Vec<_>>(), ["ab", "bc"]);
        let err = env
            .declare(Declaration::Coercion { function: Name::new("ac"), source: named("a"), target: named("c") })
            .unwrap_err();
        assert!(matches!(err, DeclError::DuplicateCoercionPath { .. }));
        let err = env
            .declare(Declaration::Coercion { function: Name::new("ac"), source: named("a"), target: named("b") })
            .unwrap_err();
        assert!(matches!(err, DeclError::BadCoercionTarget { .. }));
    }

    #[test]
    fn rebuild_from_declarations_is_identical() {
        let env = nat_env();
        let again = Environment::from_declarations(env.declarations()).unwrap();
        let a: Vec<_> = env.constants().map(|c| (c.name.clone(), c.ty.clone(), c.order)).collect();
        let b: Vec<_> = again.constants().map(|c| (c.name.clone(), c.ty.clone(), c.order)).collect();
        assert_eq!(a, b);
    }
}
