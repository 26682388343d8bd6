//! Reduction, conversion and type inference for fully elaborated terms.
//!
//! The same machinery is reused by the unifier with a [`MetaView`] that
//! exposes metavariable assignments; the pure kernel uses [`NoMetas`] and
//! rejects any metavariable it meets.

use std::cell::Cell;

use thiserror::Error;

use crate::env::{Builtin, ConstKind, Environment};
use crate::term::{BinderName, Level, MetaId, Name, Term};

pub const DEFAULT_CONV_FUEL: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReductionFlags {
    pub beta: bool,
    pub delta: bool,
    pub iota: bool,
}

impl Default for ReductionFlags {
    fn default() -> Self {
        ReductionFlags { beta: true, delta: true, iota: true }
    }
}

/// Read access to metavariables for reduction and inference.
pub trait MetaView {
    /// The assignment of `id`, a term in the meta's local context.
    fn assignment(&self, id: MetaId) -> Option<&Term>;
    /// The declared type of `id`, in the meta's local context.
    fn meta_type(&self, id: MetaId) -> Option<&Term>;
}

/// View for meta-free checking.
pub struct NoMetas;

impl MetaView for NoMetas {
    fn assignment(&self, _: MetaId) -> Option<&Term> {
        None
    }

    fn meta_type(&self, _: MetaId) -> Option<&Term> {
        None
    }
}

/// A local context. Entry `i` has its type in the context of entries `< i`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Context {
    entries: Vec<(BinderName, Term)>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, name: BinderName, ty: Term) {
        self.entries.push((name, ty));
    }

    pub fn pop(&mut self) -> Option<(BinderName, Term)> {
        self.entries.pop()
    }

    pub fn extended(&self, name: BinderName, ty: Term) -> Context {
        let mut c = self.clone();
        c.push(name, ty);
        c
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    /// Type of `Var(idx)`, lifted into the full context.
    pub fn lookup(&self, idx: usize) -> Option<Term> {
        let pos = self.entries.len().checked_sub(idx + 1)?;
        Some(self.entries[pos].1.lift(0, idx + 1))
    }

    /// Binder name of `Var(idx)`.
    pub fn name_of(&self, idx: usize) -> Option<&BinderName> {
        let pos = self.entries.len().checked_sub(idx + 1)?;
        Some(&self.entries[pos].0)
    }

    pub fn entries(&self) -> &[(BinderName, Term)] {
        &self.entries
    }

    pub fn prefix(&self, len: usize) -> Context {
        Context { entries: self.entries[..len].to_vec() }
    }

    /// Binder names, outermost first.
    pub fn names(&self) -> Vec<BinderName> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("unbound variable #{0}")]
    UnboundVariable(usize),
    #[error("unknown constant `{0}`")]
    UnknownConstant(Name),
    #[error("`{term}` has type `{ty}`, which is not a function type")]
    NotAFunction { term: Term, ty: Term },
    #[error("expected type `{expected}`, found `{actual}`")]
    TypeMismatch { expected: Term, actual: Term },
    #[error("`{term}` has type `{ty}`, which is not a sort")]
    SortError { term: Term, ty: Term },
    #[error("reduction fuel exhausted")]
    FuelExhausted,
    #[error("unexpected metavariable {0}")]
    UnexpectedMeta(MetaId),
}

pub type KResult<T> = Result<T, KernelError>;

pub struct Kernel<'a> {
    env: &'a Environment,
    metas: &'a dyn MetaView,
    flags: ReductionFlags,
    fuel_limit: u64,
    fuel: Cell<u64>,
    steps: Cell<u64>,
}

impl<'a> Kernel<'a> {
    pub fn new(env: &'a Environment) -> Self {
        Self::with_metas(env, &NoMetas)
    }

    pub fn with_metas(env: &'a Environment, metas: &'a dyn MetaView) -> Self {
        Kernel {
            env,
            metas,
            flags: ReductionFlags::default(),
            fuel_limit: DEFAULT_CONV_FUEL,
            fuel: Cell::new(DEFAULT_CONV_FUEL),
            steps: Cell::new(0),
        }
    }

    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.fuel_limit = fuel;
        self.fuel.set(fuel);
        self
    }

    pub fn with_flags(mut self, flags: ReductionFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    /// Total reduction steps taken by this kernel instance.
    pub fn steps(&self) -> u64 {
        self.steps.get()
    }

    fn reset(&self) {
        self.fuel.set(self.fuel_limit);
    }

    fn tick(&self) -> KResult<()> {
        let f = self.fuel.get();
        if f == 0 {
            return Err(KernelError::FuelExhausted);
        }
        self.fuel.set(f - 1);
        self.steps.set(self.steps.get() + 1);
        Ok(())
    }

    pub fn whnf(&self, t: &Term) -> KResult<Term> {
        self.reset();
        self.whnf_inner(t)
    }

    /// Weak-head normal form without unfolding the head constant.
    pub fn whnf_core(&self, t: &Term) -> KResult<Term> {
        self.reset();
        self.whnf_core_inner(t)
    }

    pub fn normalize(&self, t: &Term) -> KResult<Term> {
        self.reset();
        self.normalize_inner(t)
    }

    pub fn is_def_eq(&self, t: &Term, u: &Term) -> KResult<bool> {
        self.reset();
        self.conv(t, u, false)
    }

    /// `t ⊑ u`: convertible up to cumulativity at the top and in Pi
    /// codomains.
    pub fn is_sub(&self, t: &Term, u: &Term) -> KResult<bool> {
        self.reset();
        self.conv(t, u, true)
    }

    /// Declaration order of an unfoldable head constant.
    pub fn unfold_order(&self, t: &Term) -> Option<usize> {
        if !self.flags.delta {
            return None;
        }
        let info = self.env.get(t.head_const()?.as_str())?;
        matches!(info.kind, ConstKind::Definition { .. }).then_some(info.order)
    }

    /// Unfolds the head constant one step, if it is a definition.
    pub fn unfold_head(&self, t: &Term) -> Option<Term> {
        self.unfold_order(t)?;
        let (head, args) = t.head_args();
        let Term::Const(name) = head else { return None };
        match &self.env.get(name.as_str())?.kind {
            ConstKind::Definition { body } => Some(Term::apps(body.clone(), args.into_iter().cloned())),
            _ => None,
        }
    }

    fn whnf_inner(&self, t: &Term) -> KResult<Term> {
        let mut cur = self.whnf_core_inner(t)?;
        while let Some(next) = self.unfold_head(&cur) {
            self.tick()?;
            cur = self.whnf_core_inner(&next)?;
        }
        Ok(cur)
    }

    fn whnf_core_inner(&self, t: &Term) -> KResult<Term> {
        let mut cur = t.clone();
        loop {
            match self.step_core(&cur)? {
                Some(next) => {
                    self.tick()?;
                    cur = next;
                }
                None => return Ok(cur),
            }
        }
    }

    /// One head step of beta, iota or meta instantiation.
    fn step_core(&self, t: &Term) -> KResult<Option<Term>> {
        let (head, args) = t.head_args();
        match head {
            Term::Lam(_, _, body) if self.flags.beta && !args.is_empty() => {
                let reduced = body.instantiate(args[0]);
                Ok(Some(Term::apps(reduced, args[1..].iter().map(|a| (*a).clone()))))
            }
            Term::Meta(id, spine) => Ok(self
                .metas
                .assignment(*id)
                .map(|body| Term::apps(body.instantiate_many(spine), args.into_iter().cloned()))),
            Term::Const(name) if self.flags.iota => self.iota(name, &args),
            _ => Ok(None),
        }
    }

    fn iota(&self, name: &Name, args: &[&Term]) -> KResult<Option<Term>> {
        let Some(info) = self.env.get(name.as_str()) else { return Ok(None) };
        let rest = |from: usize| args[from..].iter().map(|a| (*a).clone()).collect::<Vec<_>>();
        match &info.kind {
            ConstKind::Recursor { inductive, nparams, nminors } => {
                let major_idx = nparams + 1 + nminors;
                if args.len() <= major_idx {
                    return Ok(None);
                }
                let major = self.whnf_inner(args[major_idx])?;
                let Some((index, ctor_args)) = self.constructor_app(&major, inductive) else {
                    return Ok(None);
                };
                let ind = self.env.inductive(inductive.as_str()).expect("recursor of a known inductive");
                let fields = &ctor_args[*nparams..];
                let rec_prefix = Term::apps(Term::Const(name.clone()), args[..major_idx].iter().map(|a| (*a).clone()));
                let ihs = ind.recursive[index]
                    .iter()
                    .zip(fields)
                    .filter(|(r, _)| **r)
                    .map(|(_, a)| Term::app(rec_prefix.clone(), a.clone()));
                let minor = args[nparams + 1 + index].clone();
                let out = Term::apps(minor, fields.iter().cloned().chain(ihs));
                Ok(Some(Term::apps(out, rest(major_idx + 1))))
            }
            ConstKind::Projection { record, index, nparams } => {
                if args.len() <= *nparams {
                    return Ok(None);
                }
                let major = self.whnf_inner(args[*nparams])?;
                let Some((_, ctor_args)) = self.constructor_app(&major, record) else {
                    return Ok(None);
                };
                let field = ctor_args[nparams + index].clone();
                Ok(Some(Term::apps(field, rest(nparams + 1))))
            }
            ConstKind::Builtin(Builtin::EqRect) => {
                if args.len() < 6 {
                    return Ok(None);
                }
                let major = self.whnf_inner(args[5])?;
                let (h, margs) = major.head_args();
                match h {
                    Term::Const(n) if n.as_str() == "eq_refl" && margs.len() == 2 => {
                        Ok(Some(Term::apps(args[3].clone(), rest(6))))
                    }
                    _ => Ok(None),
                }
            }
            _ => Ok(None),
        }
    }

    /// Constructor index and all arguments (params included) when `t` is a
    /// saturated constructor application of `inductive`.
    fn constructor_app(&self, t: &Term, inductive: &Name) -> Option<(usize, Vec<Term>)> {
        let (head, args) = t.head_args();
        let Term::Const(c) = head else { return None };
        match &self.env.get(c.as_str())?.kind {
            ConstKind::Constructor { inductive: ind, index, nparams, nargs }
                if ind == inductive && args.len() == nparams + nargs =>
            {
                Some((*index, args.into_iter().cloned().collect()))
            }
            _ => None,
        }
    }

    fn normalize_inner(&self, t: &Term) -> KResult<Term> {
        let w = self.whnf_inner(t)?;
        Ok(match &w {
            Term::Lam(n, d, b) => {
                Term::Lam(n.clone(), self.normalize_inner(d)?.into(), self.normalize_inner(b)?.into())
            }
            Term::Pi(n, d, b) => Term::Pi(n.clone(), self.normalize_inner(d)?.into(), self.normalize_inner(b)?.into()),
            Term::App(..) => {
                let (head, args) = w.head_args();
                let head = self.normalize_inner(head)?;
                let mut out = head;
                for a in args {
                    out = Term::app(out, self.normalize_inner(a)?);
                }
                out
            }
            Term::Meta(id, spine) => {
                let spine = spine.iter().map(|s| self.normalize_inner(s)).collect::<KResult<Vec<_>>>()?;
                Term::meta(*id, spine)
            }
            _ => w,
        })
    }

    fn conv(&self, t: &Term, u: &Term, cumul: bool) -> KResult<bool> {
        if t == u {
            return Ok(true);
        }
        let mut t = self.whnf_core_inner(t)?;
        let mut u = self.whnf_core_inner(u)?;
        loop {
            if t == u {
                return Ok(true);
            }
            match (self.unfold_order(&t), self.unfold_order(&u)) {
                (Some(a), Some(b)) => {
                    if a == b && self.same_head_args(&t, &u)? {
                        return Ok(true);
                    }
                    if a >= b {
                        t = self.whnf_core_inner(&self.unfold_head(&t).expect("unfoldable"))?;
                    }
                    if b >= a {
                        u = self.whnf_core_inner(&self.unfold_head(&u).expect("unfoldable"))?;
                    }
                }
                (Some(_), None) => t = self.whnf_core_inner(&self.unfold_head(&t).expect("unfoldable"))?,
                (None, Some(_)) => u = self.whnf_core_inner(&self.unfold_head(&u).expect("unfoldable"))?,
                (None, None) => break,
            }
            self.tick()?;
        }
        self.conv_whnf(&t, &u, cumul)
    }

    /// Compares two applications of the same head argument-wise, without
    /// unfolding the heads.
    fn same_head_args(&self, t: &Term, u: &Term) -> KResult<bool> {
        let (h1, a1) = t.head_args();
        let (h2, a2) = u.head_args();
        if h1 != h2 || a1.len() != a2.len() {
            return Ok(false);
        }
        for (x, y) in a1.iter().zip(&a2) {
            if !self.conv(x, y, false)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn conv_whnf(&self, t: &Term, u: &Term, cumul: bool) -> KResult<bool> {
        match (t, u) {
            (Term::Sort(a), Term::Sort(b)) => Ok(if cumul { a.leq(*b) } else { a == b }),
            (Term::Pi(_, d1, c1), Term::Pi(_, d2, c2)) => Ok(self.conv(d1, d2, false)? && self.conv(c1, c2, cumul)?),
            (Term::Lam(_, d1, b1), Term::Lam(_, d2, b2)) => Ok(self.conv(d1, d2, false)? && self.conv(b1, b2, false)?),
            (Term::Lam(_, _, b), other) | (other, Term::Lam(_, _, b)) => {
                // eta
                let expanded = Term::app(other.lift(0, 1), Term::Var(0));
                self.conv(b, &expanded, false)
            }
            (Term::Meta(i, s1), Term::Meta(j, s2)) if i == j => {
                for (x, y) in s1.iter().zip(s2.iter()) {
                    if !self.conv(x, y, false)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (Term::App(..), Term::App(..)) => {
                let (h1, a1) = t.head_args();
                let (h2, a2) = u.head_args();
                if a1.len() != a2.len() || !self.conv_whnf(h1, h2, false)? {
                    return Ok(false);
                }
                for (x, y) in a1.iter().zip(&a2) {
                    if !self.conv(x, y, false)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Ok(t == u),
        }
    }

    pub fn infer(&self, ctx: &Context, t: &Term) -> KResult<Term> {
        match t {
            Term::Sort(l) => Ok(Term::Sort(l.succ())),
            Term::Var(i) => ctx.lookup(*i).ok_or(KernelError::UnboundVariable(*i)),
            Term::Const(n) => {
                self.env.get(n.as_str()).map(|c| c.ty.clone()).ok_or_else(|| KernelError::UnknownConstant(n.clone()))
            }
            Term::App(f, a) => {
                let fty = self.infer(ctx, f)?;
                let Term::Pi(_, dom, cod) = self.whnf(&fty)? else {
                    return Err(KernelError::NotAFunction { term: (**f).clone(), ty: fty });
                };
                let aty = self.infer(ctx, a)?;
                if !self.is_sub(&aty, &dom)? {
                    return Err(KernelError::TypeMismatch { expected: (*dom).clone(), actual: aty });
                }
                Ok(cod.instantiate(a))
            }
            Term::Lam(n, d, b) => {
                self.ensure_sort(ctx, d)?;
                let bty = self.infer(&ctx.extended(n.clone(), (**d).clone()), b)?;
                Ok(Term::Pi(n.clone(), d.clone(), bty.into()))
            }
            Term::Pi(n, d, c) => {
                let l1 = self.ensure_sort(ctx, d)?;
                let l2 = self.ensure_sort(&ctx.extended(n.clone(), (**d).clone()), c)?;
                Ok(Term::Sort(Level::product(l1, l2)))
            }
            Term::Meta(id, spine) => match self.metas.meta_type(*id) {
                Some(ty) => Ok(ty.instantiate_many(spine)),
                None => Err(KernelError::UnexpectedMeta(*id)),
            },
        }
    }

    /// Level of a term that must be a type.
    pub fn ensure_sort(&self, ctx: &Context, t: &Term) -> KResult<Level> {
        let ty = self.infer(ctx, t)?;
        match self.whnf(&ty)? {
            Term::Sort(l) => Ok(l),
            _ => Err(KernelError::SortError { term: t.clone(), ty }),
        }
    }

    pub fn check(&self, ctx: &Context, t: &Term, expected: &Term) -> KResult<()> {
        let ty = self.infer(ctx, t)?;
        if self.is_sub(&ty, expected)? {
            Ok(())
        } else {
            Err(KernelError::TypeMismatch { expected: expected.clone(), actual: ty })
        }
    }
}
