//! Bidirectional elaboration of surface terms into core terms.
//!
//! Constants with implicit binders get one fresh meta per leading implicit
//! binder at each occurrence (unless written `@c`). Coercions are inserted
//! at three places only: an argument whose type does not unify with the
//! expected one, a term used as a type, and a non-function in head position.

mod command;

pub use command::{process_command, CheckedTerm, CommandResult, ElabOptions};

use crate::diag::{Category, Diagnostic, Span};
use crate::env::{class_of, CoercionClass, CoercionEdge, ConstKind, Environment, MOTIVE_LEVEL};
use crate::kernel::{Context, KernelError};
use crate::surface::{SBinder, SKind, SurfaceTerm};
use crate::term::{head_key, BinderName, Level, MetaId, Term};
use crate::unify::{Constraint, Direction, ElabState, MetaOrigin, MetaReason, UnifyError};

pub type EResult<T> = Result<T, Diagnostic>;

/// Numerals unfold to `S (S … O)`; anything larger is almost certainly a typo.
const MAX_NUMERAL: u64 = 10_000;

pub struct Elaborator<'a, 'e> {
    pub st: &'a mut ElabState<'e>,
}

/// One binder of a flattened telescope.
#[derive(Clone, Copy)]
pub(crate) struct Bind<'s> {
    pub name: &'s str,
    pub span: Span,
    pub ty: Option<&'s SurfaceTerm>,
    pub implicit: bool,
}

pub(crate) fn flatten(bs: &[SBinder]) -> Vec<Bind<'_>> {
    bs.iter()
        .flat_map(|b| {
            b.names.iter().map(move |(n, sp)| Bind {
                name: n.as_str(),
                span: *sp,
                ty: b.ty.as_ref(),
                implicit: b.implicit,
            })
        })
        .collect()
}

pub(crate) fn binder_name(s: &str) -> BinderName {
    if s == "_" {
        BinderName::anonymous()
    } else {
        BinderName::new(s)
    }
}

fn origin(span: Span, reason: MetaReason) -> MetaOrigin {
    MetaOrigin { span, reason }
}

pub(crate) fn kernel_diag(e: KernelError, span: Span) -> Diagnostic {
    let category = match &e {
        KernelError::UnboundVariable(_) | KernelError::UnknownConstant(_) => Category::UnknownIdentifier,
        KernelError::NotAFunction { .. } => Category::NotAFunction,
        KernelError::TypeMismatch { .. } => Category::TypeMismatch,
        KernelError::SortError { .. } => Category::SortError,
        KernelError::FuelExhausted => Category::FuelExhausted,
        KernelError::UnexpectedMeta(_) => Category::UnresolvedMeta,
    };
    Diagnostic::new(category, span, e.to_string())
}

impl<'a, 'e> Elaborator<'a, 'e> {
    pub fn new(st: &'a mut ElabState<'e>) -> Self {
        Elaborator { st }
    }

    fn env(&self) -> &'e Environment {
        self.st.env()
    }

    fn print(&self, ctx: &Context, t: &Term) -> String {
        self.st.print(ctx, t)
    }

    fn whnf(&self, t: &Term, span: Span) -> EResult<Term> {
        let t = self.st.instantiate(t);
        self.st.whnf(&t).map_err(|e| kernel_diag(e, span))
    }

    fn is_flex(&self, t: &Term) -> bool {
        matches!(t.head(), Term::Meta(id, _) if !self.st.is_assigned(*id))
    }

    /// A meta standing for an unknown type.
    pub fn type_hole(&mut self, ctx: &Context, span: Span) -> Term {
        self.st.new_meta(ctx, Term::ty(MOTIVE_LEVEL), origin(span, MetaReason::Hole))
    }

    /// Best known sort of the type `ty`.
    pub fn sort_level(&self, ctx: &Context, ty: &Term) -> Level {
        let t = self.st.instantiate(ty);
        match self.st.infer(ctx, &t).and_then(|s| self.st.whnf(&s)) {
            Ok(Term::Sort(l)) => l,
            _ => Level::Type(MOTIVE_LEVEL),
        }
    }

    fn unify_diag(&self, e: UnifyError, span: Span, category: Category, message: String) -> Diagnostic {
        match e {
            UnifyError::Mismatch { lhs, rhs, note } => {
                let mut d =
                    Diagnostic::new(category, span, message).with_note(format!("cannot unify `{lhs}` with `{rhs}`"));
                if let Some(n) = note {
                    d = d.with_note(n);
                }
                d
            }
            UnifyError::OccursCheck { .. } => Diagnostic::new(Category::OccursCheck, span, e.to_string()),
            UnifyError::ScopeError { .. } => Diagnostic::new(Category::ScopeError, span, e.to_string()),
            UnifyError::FuelExhausted => Diagnostic::new(Category::FuelExhausted, span, e.to_string()),
            UnifyError::Kernel(k) => kernel_diag(k, span),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn unify(
        &mut self,
        ctx: &Context,
        want: &Term,
        have: &Term,
        dir: Direction,
        span: Span,
        category: Category,
        message: impl FnOnce(&Self) -> String,
    ) -> EResult<()> {
        match self.st.unify(ctx, want, have, dir, span) {
            Ok(()) => Ok(()),
            Err(e) => {
                let msg = message(self);
                Err(self.unify_diag(e, span, category, msg))
            }
        }
    }

    pub fn infer(&mut self, ctx: &Context, s: &SurfaceTerm) -> EResult<(Term, Term)> {
        match &s.kind {
            SKind::Var(x) => self.name(ctx, x, s.span, true),
            SKind::Explicit(x) => self.name(ctx, x, s.span, false),
            SKind::Hole => {
                let ty = self.type_hole(ctx, s.span);
                let t = self.st.new_meta(ctx, ty.clone(), origin(s.span, MetaReason::Hole));
                Ok((t, ty))
            }
            SKind::Num(n) => self.numeral(*n, s.span),
            SKind::Prop => Ok((Term::prop(), Term::ty(0))),
            SKind::Type(n) => {
                let i = n.unwrap_or(0);
                Ok((Term::ty(i), Term::ty(i + 1)))
            }
            SKind::App(f, args) => self.app(ctx, f, args),
            SKind::Lam(bs, body) => self.lam(ctx, &flatten(bs), body, None, s.span),
            SKind::Pi(bs, body) => {
                let (t, l) = self.pi(ctx, &flatten(bs), body)?;
                Ok((t, Term::sort(l)))
            }
            SKind::Arrow(a, b) => {
                let bind = Bind { name: "_", span: a.span, ty: Some(a), implicit: false };
                let (t, l) = self.pi(ctx, &[bind], b)?;
                Ok((t, Term::sort(l)))
            }
            SKind::Infix(op, l, r) => self.infix(ctx, op, l, r, s.span),
            SKind::Ascribe(t, ty) => {
                let ty = self.elab_type(ctx, ty)?;
                let t = self.check(ctx, t, &ty)?;
                Ok((t, ty))
            }
        }
    }

    pub fn check(&mut self, ctx: &Context, s: &SurfaceTerm, expected: &Term) -> EResult<Term> {
        match &s.kind {
            SKind::Hole => Ok(self.st.new_meta(ctx, expected.clone(), origin(s.span, MetaReason::Hole))),
            SKind::Lam(bs, body) => Ok(self.lam(ctx, &flatten(bs), body, Some(expected), s.span)?.0),
            _ => {
                let (t, ty) = self.infer(ctx, s)?;
                self.coerce_to(ctx, t, &ty, expected, s.span)
            }
        }
    }

    /// Elaborates `s` in a position where a type is expected.
    pub fn elab_type(&mut self, ctx: &Context, s: &SurfaceTerm) -> EResult<Term> {
        if s.kind == SKind::Hole {
            return Ok(self.type_hole(ctx, s.span));
        }
        let (t, ty) = self.infer(ctx, s)?;
        let w = self.whnf(&ty, s.span)?;
        if w.is_sort() {
            return Ok(t);
        }
        if self.is_flex(&w) {
            self.unify(ctx, &Term::ty(MOTIVE_LEVEL), &w, Direction::Cumul, s.span, Category::SortError, |e| {
                format!("`{}` is not a type", e.print(ctx, &t))
            })?;
            return Ok(t);
        }
        let from = class_of(&w);
        if let Some(from @ CoercionClass::Named(_)) = &from {
            if let Some(path) = self.path(from, &CoercionClass::Sortclass) {
                let (t2, ty2) = self.apply_path(ctx, t, w, &path, s.span)?;
                if self.whnf(&ty2, s.span)?.is_sort() {
                    return Ok(t2);
                }
                return Err(Diagnostic::new(
                    Category::SortError,
                    s.span,
                    format!("`{}` is not a type", self.print(ctx, &t2)),
                ));
            }
        }
        let class = from.map(|c| c.to_string()).unwrap_or_else(|| self.print(ctx, &w));
        Err(Diagnostic::new(
            Category::NoCoercionPath,
            s.span,
            format!("`{}` of type `{}` is used as a type", self.print(ctx, &t), self.print(ctx, &w)),
        )
        .with_note(format!("no coercion from {class} to Sortclass")))
    }

    fn path(&self, from: &CoercionClass, to: &CoercionClass) -> Option<Vec<CoercionEdge>> {
        self.env().coercion_path(from, to).map(|p| p.into_iter().cloned().collect())
    }

    fn name(&mut self, ctx: &Context, x: &str, span: Span, insert: bool) -> EResult<(Term, Term)> {
        if let Some(i) = ctx.entries().iter().rev().position(|(n, _)| !n.is_anonymous() && n.as_str() == x) {
            let ty = ctx.lookup(i).expect("index in range");
            return Ok((Term::Var(i), ty));
        }
        let env = self.env();
        let Some(info) = env.get(x) else {
            return Err(Diagnostic::new(Category::UnknownIdentifier, span, format!("unknown identifier `{x}`")));
        };
        let mut t = Term::Const(info.name.clone());
        let mut ty = info.ty.clone();
        if insert {
            for position in 0..env.implicit_prefix(x) {
                let Term::Pi(_, d, c) = self.whnf(&ty, span)? else { break };
                let reason = MetaReason::Implicit { constant: info.name.clone(), position };
                let m = self.st.new_meta(ctx, (*d).clone(), origin(span, reason));
                t = Term::app(t, m.clone());
                ty = c.instantiate(&m);
            }
        }
        Ok((t, ty))
    }

    fn numeral(&mut self, n: u64, span: Span) -> EResult<(Term, Term)> {
        let env = self.env();
        let nat_ctor = |c: &str| matches!(env.get(c).map(|i| &i.kind), Some(ConstKind::Constructor { inductive, .. }) if inductive.as_str() == "nat");
        if !nat_ctor("O") || !nat_ctor("S") {
            return Err(Diagnostic::new(
                Category::UnknownIdentifier,
                span,
                "numerals need the natural numbers `nat`, `O` and `S`",
            ));
        }
        if n > MAX_NUMERAL {
            return Err(Diagnostic::new(
                Category::TypeMismatch,
                span,
                format!("numeral {n} is too large (limit {MAX_NUMERAL})"),
            ));
        }
        let t = (0..n).fold(Term::constant("O"), |acc, _| Term::app(Term::constant("S"), acc));
        Ok((t, Term::constant("nat")))
    }

    fn app(&mut self, ctx: &Context, f: &SurfaceTerm, args: &[SurfaceTerm]) -> EResult<(Term, Term)> {
        let (mut t, mut ty) = self.infer(ctx, f)?;
        let mut span = f.span;
        for a in args {
            let (t2, d, c) = self.expect_pi(ctx, t, ty, span)?;
            let arg = self.check(ctx, a, &d)?;
            ty = c.instantiate(&arg).head_beta();
            t = Term::app(t2, arg);
            span = span.to(a.span);
        }
        Ok((t, ty))
    }

    /// Returns `(t', dom, cod)` with `t' : forall _ : dom, cod`, inserting a
    /// coercion to Funclass if needed.
    fn expect_pi(&mut self, ctx: &Context, t: Term, ty: Term, span: Span) -> EResult<(Term, Term, Term)> {
        let w = self.whnf(&ty, span)?;
        if let Term::Pi(_, d, c) = &w {
            return Ok((t, (**d).clone(), (**c).clone()));
        }
        if self.is_flex(&w) {
            let a = self.type_hole(ctx, span);
            let inner = ctx.extended(BinderName::new("x"), a.clone());
            let b = self.type_hole(&inner, span);
            let pi = Term::Pi(BinderName::new("x"), a.clone().into(), b.clone().into());
            self.unify(ctx, &w, &pi, Direction::Conv, span, Category::NotAFunction, |e| {
                format!("`{}` is not a function", e.print(ctx, &t))
            })?;
            return Ok((t, a, b));
        }
        if let Some(from @ CoercionClass::Named(_)) = class_of(&w) {
            if let Some(path) = self.path(&from, &CoercionClass::Funclass) {
                let (t2, ty2) = self.apply_path(ctx, t, w, &path, span)?;
                if let Term::Pi(_, d, c) = self.whnf(&ty2, span)? {
                    return Ok((t2, (*d).clone(), (*c).clone()));
                }
                return Err(Diagnostic::new(
                    Category::NotAFunction,
                    span,
                    format!("`{}` is not a function", self.print(ctx, &t2)),
                ));
            }
        }
        Err(Diagnostic::new(
            Category::NotAFunction,
            span,
            format!("`{}` of type `{}` is not a function", self.print(ctx, &t), self.print(ctx, &w)),
        ))
    }

    pub(crate) fn lam(
        &mut self,
        ctx: &Context,
        binds: &[Bind<'_>],
        body: &SurfaceTerm,
        expected: Option<&Term>,
        whole: Span,
    ) -> EResult<(Term, Term)> {
        let Some((b, rest)) = binds.split_first() else {
            return match expected {
                Some(e) => Ok((self.check(ctx, body, e)?, e.clone())),
                None => self.infer(ctx, body),
            };
        };
        let exp = match expected {
            Some(e) => match self.whnf(e, whole)? {
                Term::Pi(_, d, c) => Some(((*d).clone(), (*c).clone())),
                _ => None,
            },
            None => None,
        };
        if let (Some(e), None) = (expected, &exp) {
            let (t, ty) = self.lam(ctx, binds, body, None, whole)?;
            let t = self.coerce_to(ctx, t, &ty, e, whole)?;
            return Ok((t, e.clone()));
        }
        let annotation = b.ty.filter(|s| s.kind != SKind::Hole);
        let dom = match (annotation, &exp) {
            (Some(s), Some((d, _))) => {
                let dom = self.elab_type(ctx, s)?;
                self.unify(ctx, d, &dom, Direction::Conv, s.span, Category::TypeMismatch, |e| {
                    format!(
                        "binder `{}` is annotated with `{}` but `{}` is expected",
                        b.name,
                        e.print(ctx, &dom),
                        e.print(ctx, d)
                    )
                })?;
                dom
            }
            (Some(s), None) => self.elab_type(ctx, s)?,
            (None, Some((d, _))) => d.clone(),
            (None, None) => self.type_hole(ctx, b.span),
        };
        let name = binder_name(b.name);
        let inner = ctx.extended(name.clone(), dom.clone());
        let (bt, bty) = self.lam(&inner, rest, body, exp.as_ref().map(|(_, c)| c), whole)?;
        Ok((Term::Lam(name.clone(), dom.clone().into(), bt.into()), Term::Pi(name, dom.into(), bty.into())))
    }

    pub(crate) fn pi(&mut self, ctx: &Context, binds: &[Bind<'_>], body: &SurfaceTerm) -> EResult<(Term, Level)> {
        let Some((b, rest)) = binds.split_first() else {
            let t = self.elab_type(ctx, body)?;
            let l = self.sort_level(ctx, &t);
            return Ok((t, l));
        };
        let dom = match b.ty {
            Some(s) => self.elab_type(ctx, s)?,
            None => self.type_hole(ctx, b.span),
        };
        let name = binder_name(b.name);
        let inner = ctx.extended(name.clone(), dom.clone());
        let (cod, lc) = self.pi(&inner, rest, body)?;
        // the domain may only be known after the body is elaborated
        let ld = self.sort_level(ctx, &dom);
        Ok((Term::Pi(name, dom.into(), cod.into()), Level::product(ld, lc)))
    }

    fn infix(
        &mut self,
        ctx: &Context,
        op: &str,
        l: &SurfaceTerm,
        r: &SurfaceTerm,
        span: Span,
    ) -> EResult<(Term, Term)> {
        if op == "=" {
            let eq = SurfaceTerm::new(
                SKind::App(
                    Box::new(SurfaceTerm::new(SKind::Explicit("eq".into()), span)),
                    vec![SurfaceTerm::new(SKind::Hole, span), l.clone(), r.clone()],
                ),
                span,
            );
            return self.infer(ctx, &eq);
        }
        match self.env().notation(op) {
            Some(entry) => {
                let e = entry.expand(l, r, span);
                self.infer(ctx, &e)
            }
            None => Err(Diagnostic::new(Category::ParseError, span, format!("unknown operator `{op}`"))),
        }
    }

    /// Checking-mode subsumption `have ⊑ want`, inserting a coercion when
    /// the types do not unify.
    pub fn coerce_to(&mut self, ctx: &Context, t: Term, have: &Term, want: &Term, span: Span) -> EResult<Term> {
        let err = match self.st.unify(ctx, want, have, Direction::Cumul, span) {
            Ok(()) => return Ok(t),
            Err(e @ UnifyError::Mismatch { .. }) => e,
            Err(e) => return Err(self.unify_diag(e, span, Category::TypeMismatch, String::new())),
        };
        if let Some(t2) = self.try_coercion(ctx, &t, have, want, span)? {
            return Ok(t2);
        }
        let msg = format!(
            "`{}` has type `{}` but is expected to have type `{}`",
            self.print(ctx, &t),
            self.print(ctx, have),
            self.print(ctx, want)
        );
        Err(self.unify_diag(err, span, Category::TypeMismatch, msg))
    }

    fn try_coercion(&mut self, ctx: &Context, t: &Term, have: &Term, want: &Term, span: Span) -> EResult<Option<Term>> {
        let hw = self.whnf(have, span)?;
        let ww = self.whnf(want, span)?;
        let (Some(from @ CoercionClass::Named(_)), Some(to)) = (class_of(&hw), class_of(&ww)) else {
            return Ok(None);
        };
        if from == to {
            return Ok(None);
        }
        let Some(path) = self.path(&from, &to) else { return Ok(None) };
        let cp = self.st.checkpoint();
        let res = self
            .apply_path(ctx, t.clone(), hw, &path, span)
            .ok()
            .and_then(|(t2, ty2)| self.st.unify(ctx, want, &ty2, Direction::Cumul, span).ok().map(|_| t2));
        if res.is_none() {
            self.st.rollback(cp);
        }
        Ok(res)
    }

    fn apply_path(
        &mut self,
        ctx: &Context,
        mut t: Term,
        mut ty: Term,
        path: &[CoercionEdge],
        span: Span,
    ) -> EResult<(Term, Term)> {
        for edge in path {
            let info = self.env().get(edge.function.as_str()).expect("coercions name declared constants");
            let mut f = Term::Const(edge.function.clone());
            let mut fty = info.ty.clone();
            for _ in 0..edge.nparams {
                let Term::Pi(_, d, c) = self.whnf(&fty, span)? else { break };
                let m = self.st.new_meta(ctx, (*d).clone(), origin(span, MetaReason::CoercionProbe));
                f = Term::app(f, m.clone());
                fty = c.instantiate(&m);
            }
            let Term::Pi(_, d, c) = self.whnf(&fty, span)? else {
                return Err(Diagnostic::new(
                    Category::BadCoercionTarget,
                    span,
                    format!("`{}` is not a function", edge.function),
                ));
            };
            self.unify(ctx, &d, &ty, Direction::Cumul, span, Category::TypeMismatch, |e| {
                format!("coercion `{}` does not apply to `{}`", edge.function, e.print(ctx, &t))
            })?;
            let constraint = format!("{} : {} >-> {}", self.print(ctx, &t), self.print(ctx, &ty), edge.target);
            self.st.record_elab(constraint, 2, format!("insert coercion {}", edge.function), "success", span);
            ty = c.instantiate(&t);
            t = Term::app(f, t);
        }
        Ok((t, ty))
    }

    /// Runs the postponed constraints a last time and reports whatever is
    /// left, plus every unassigned meta occurring in `terms`.
    pub fn finalize(&mut self, terms: &[&Term]) -> Result<(), Vec<Diagnostic>> {
        if let Err(e) = self.st.wake() {
            let span = self.st.postponed().first().map(|c| c.span).unwrap_or_default();
            return Err(vec![self.unify_diag(e, span, Category::Mismatch, "constraint cannot be solved".into())]);
        }
        let mut diags = Vec::new();
        let mut blamed: Vec<MetaId> = Vec::new();
        for c in self.st.postponed().to_vec() {
            let l = self.st.instantiate(&c.lhs);
            let r = self.st.instantiate(&c.rhs);
            if let Some(Term::Meta(id, _)) = [&l, &r].into_iter().map(|t| t.head()).find(|h| self.is_flex(h)) {
                if !blamed.contains(id) {
                    blamed.push(*id);
                    diags.push(
                        self.unresolved(*id)
                            .with_note(format!("unsolved constraint `{}`", self.st.print_constraint(&c))),
                    );
                }
                continue;
            }
            let mut d = Diagnostic::new(
                Category::StuckConstraint,
                c.span,
                format!("cannot solve `{}`", self.st.print_constraint(&c)),
            );
            if let Some(n) = self.explain(&c) {
                d = d.with_note(n);
            }
            diags.push(d);
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        for t in terms {
            for id in self.st.instantiate(t).metas() {
                if !blamed.contains(&id) && !self.st.is_assigned(id) {
                    blamed.push(id);
                    diags.push(self.unresolved(id));
                }
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(diags)
        }
    }

    fn unresolved(&self, id: MetaId) -> Diagnostic {
        let m = self.st.meta(id);
        let mut origin = &m.origin;
        // report a pruned meta at its source
        while let MetaReason::Pruned(parent) = origin.reason {
            origin = &self.st.meta(parent).origin;
        }
        Diagnostic::new(Category::UnresolvedMeta, origin.span, format!("cannot infer {} ({id})", origin.reason))
    }

    /// A missing canonical instance, if that is why `c` is stuck.
    fn explain(&self, c: &Constraint) -> Option<String> {
        let env = self.env();
        for (p, other) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
            let p = self.st.instantiate(p);
            let (head, args) = p.head_args();
            let Term::Const(proj) = head else { continue };
            let Some(ConstKind::Projection { nparams, .. }) = env.get(proj.as_str()).map(|i| &i.kind) else { continue };
            if !args.get(*nparams).is_some_and(|s| self.is_flex(s)) {
                continue;
            }
            let key = head_key(&self.st.whnf(&self.st.instantiate(other)).ok()?)?;
            if env.hint(proj, &key).is_none() {
                return Some(format!("no canonical structure registers a value of `{proj}` for `{key}`"));
            }
        }
        None
    }
}
