//! Metavariable context and unification.
//!
//! Each constraint goes through the resources in order: syntactic
//! decomposition (1), pattern solving (2), canonical hints (3) and reduction
//! (4). Problems outside the pattern fragment, flex-flex problems and
//! problems blocked on an unassigned meta are postponed and woken once one
//! of their metas is assigned.

use std::fmt;

use thiserror::Error;

use crate::diag::Span;
use crate::env::{ConstKind, Environment};
use crate::kernel::{Context, Kernel, KernelError, MetaView};
use crate::pretty::{print_term, PrintOptions};
use crate::term::{head_key, BinderName, MetaId, Name, Term};
use crate::trace::{TraceKind, TraceRecord};

pub const DEFAULT_UNIFY_FUEL: u64 = 10_000;
const MAX_DEPTH: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Definitional equality.
    Conv,
    /// The right-hand side must be a subtype of the left-hand side.
    Cumul,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetaReason {
    Implicit { constant: Name, position: usize },
    Hole,
    CoercionProbe,
    HintArgument(Name),
    Pruned(MetaId),
    Inferred,
}

impl fmt::Display for MetaReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetaReason::Implicit { constant, position } => {
                write!(f, "implicit argument {} of `{constant}`", position + 1)
            }
            MetaReason::Hole => f.write_str("hole"),
            MetaReason::CoercionProbe => f.write_str("coercion parameter"),
            MetaReason::HintArgument(n) => write!(f, "argument of canonical instance `{n}`"),
            MetaReason::Pruned(m) => write!(f, "pruned copy of {m}"),
            MetaReason::Inferred => f.write_str("inferred type"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaOrigin {
    pub span: Span,
    pub reason: MetaReason,
}

#[derive(Clone, Debug)]
pub struct MetaDecl {
    pub id: MetaId,
    pub ctx: Context,
    /// Type in `ctx`.
    pub ty: Term,
    /// Assignment in `ctx`; never changed once set, except by rollback.
    pub assignment: Option<Term>,
    pub origin: MetaOrigin,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub ctx: Context,
    pub lhs: Term,
    pub rhs: Term,
    pub dir: Direction,
    pub span: Span,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum UnifyError {
    #[error("cannot unify `{lhs}` with `{rhs}`")]
    Mismatch { lhs: String, rhs: String, note: Option<String> },
    #[error("occurs check failed: {meta} occurs in `{term}`")]
    OccursCheck { meta: MetaId, term: String },
    #[error("`{term}` mentions variables outside the scope of {meta}")]
    ScopeError { meta: MetaId, term: String },
    #[error("unification fuel exhausted")]
    FuelExhausted,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

enum Pattern {
    Solved(String),
    NotPattern,
}

/// Saved metavariable state; see [`ElabState::checkpoint`].
pub struct Snapshot {
    metas: usize,
    trail: usize,
    postponed: Vec<Constraint>,
}

pub struct ElabState<'e> {
    env: &'e Environment,
    metas: Vec<MetaDecl>,
    postponed: Vec<Constraint>,
    trail: Vec<MetaId>,
    trace: Vec<TraceRecord>,
    tracing: bool,
    steps: u64,
    pub fuel_unify: u64,
    pub fuel_conv: u64,
    fuel_left: u64,
    /// Pending reduct for `solve` to continue with.
    tail: Option<(Term, Term)>,
    span: Span,
    depth: usize,
}

impl MetaView for ElabState<'_> {
    fn assignment(&self, id: MetaId) -> Option<&Term> {
        self.metas.get(id.0 as usize)?.assignment.as_ref()
    }

    fn meta_type(&self, id: MetaId) -> Option<&Term> {
        self.metas.get(id.0 as usize).map(|m| &m.ty)
    }
}

impl<'e> ElabState<'e> {
    pub fn new(env: &'e Environment) -> Self {
        ElabState {
            env,
            metas: Vec::new(),
            postponed: Vec::new(),
            trail: Vec::new(),
            trace: Vec::new(),
            tracing: false,
            steps: 0,
            fuel_unify: DEFAULT_UNIFY_FUEL,
            fuel_conv: crate::kernel::DEFAULT_CONV_FUEL,
            fuel_left: DEFAULT_UNIFY_FUEL,
            tail: None,
            span: Span::default(),
            depth: 0,
        }
    }

    pub fn with_fuel(mut self, unify: u64, conv: u64) -> Self {
        self.fuel_unify = unify;
        self.fuel_conv = conv;
        self
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    pub fn kernel(&self) -> Kernel<'_> {
        Kernel::with_metas(self.env, self).with_fuel(self.fuel_conv)
    }

    pub fn metas(&self) -> &[MetaDecl] {
        &self.metas
    }

    pub fn meta(&self, id: MetaId) -> &MetaDecl {
        &self.metas[id.0 as usize]
    }

    pub fn is_assigned(&self, id: MetaId) -> bool {
        self.meta(id).assignment.is_some()
    }

    pub fn postponed(&self) -> &[Constraint] {
        &self.postponed
    }

    /// Unification steps taken so far (one per trace record).
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    /// Records an elaboration step (e.g. a coercion insertion).
    pub fn record_elab(&mut self, constraint: String, resource: u8, action: String, result: &str, span: Span) {
        if self.tracing {
            self.trace.push(TraceRecord {
                kind: TraceKind::Elab,
                constraint,
                resource,
                action,
                result: result.into(),
                span,
                hint: None,
                note: None,
            });
        }
    }

    /// A fresh meta in `ctx`, returned applied to the identity spine.
    pub fn new_meta(&mut self, ctx: &Context, ty: Term, origin: MetaOrigin) -> Term {
        let id = MetaId(self.metas.len() as u32);
        self.metas.push(MetaDecl { id, ctx: ctx.clone(), ty, assignment: None, origin });
        Term::meta(id, Term::identity_spine(ctx.len()))
    }

    fn assign(&mut self, id: MetaId, body: Term) {
        let m = &mut self.metas[id.0 as usize];
        debug_assert!(m.assignment.is_none(), "assignments are monotone");
        m.assignment = Some(body);
        self.trail.push(id);
    }

    /// Saves the state so speculative work can be undone with
    /// [`ElabState::rollback`].
    pub fn checkpoint(&self) -> Snapshot {
        self.snapshot()
    }

    pub fn rollback(&mut self, s: Snapshot) {
        self.restore(s)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { metas: self.metas.len(), trail: self.trail.len(), postponed: self.postponed.clone() }
    }

    fn restore(&mut self, s: Snapshot) {
        for id in self.trail.drain(s.trail..) {
            if let Some(m) = self.metas.get_mut(id.0 as usize) {
                m.assignment = None;
            }
        }
        self.metas.truncate(s.metas);
        self.postponed = s.postponed;
    }

    /// Substitutes all assigned metas, beta-reducing instantiated heads.
    pub fn instantiate(&self, t: &Term) -> Term {
        if !t.has_metas() {
            return t.clone();
        }
        self.zonk(t)
    }

    fn zonk(&self, t: &Term) -> Term {
        match t {
            Term::Var(_) | Term::Sort(_) | Term::Const(_) => t.clone(),
            Term::Meta(id, spine) => {
                let spine: Vec<Term> = spine.iter().map(|s| self.zonk(s)).collect();
                match self.assignment(*id) {
                    Some(body) => self.zonk(&body.instantiate_many(&spine)),
                    None => Term::meta(*id, spine),
                }
            }
            Term::App(..) => {
                let (head, args) = t.head_args();
                let was_meta = matches!(head, Term::Meta(..));
                let mut cur = self.zonk(head);
                let args: Vec<Term> = args.iter().map(|a| self.zonk(a)).collect();
                let mut i = 0;
                if was_meta {
                    while let (Term::Lam(_, _, body), Some(a)) = (&cur, args.get(i)) {
                        cur = body.instantiate(a);
                        i += 1;
                    }
                    if i > 0 {
                        cur = self.zonk(&cur);
                    }
                }
                Term::apps(cur, args[i..].iter().cloned())
            }
            Term::Lam(n, d, b) => Term::Lam(n.clone(), self.zonk(d).into(), self.zonk(b).into()),
            Term::Pi(n, d, b) => Term::Pi(n.clone(), self.zonk(d).into(), self.zonk(b).into()),
        }
    }

    pub fn whnf(&self, t: &Term) -> Result<Term, KernelError> {
        self.kernel().whnf(t)
    }

    pub fn infer(&self, ctx: &Context, t: &Term) -> Result<Term, KernelError> {
        self.kernel().infer(ctx, t)
    }

    pub fn print(&self, ctx: &Context, t: &Term) -> String {
        print_term(self.env, &ctx.names(), &self.instantiate(t), PrintOptions::default())
    }

    pub fn print_constraint(&self, c: &Constraint) -> String {
        format!("{} ≡ {}", self.print(&c.ctx, &c.lhs), self.print(&c.ctx, &c.rhs))
    }

    fn flex_head(&self, t: &Term) -> Option<MetaId> {
        match t.head() {
            Term::Meta(id, _) if !self.is_assigned(*id) => Some(*id),
            _ => None,
        }
    }

    /// Unifies `lhs` and `rhs` in `ctx`. On failure every assignment and
    /// postponement made by this call is undone.
    pub fn unify(
        &mut self,
        ctx: &Context,
        lhs: &Term,
        rhs: &Term,
        dir: Direction,
        span: Span,
    ) -> Result<(), UnifyError> {
        let snap = self.snapshot();
        self.span = span;
        self.fuel_left = self.fuel_unify;
        self.depth = 0;
        let res = self.solve(ctx, lhs, rhs, dir).and_then(|_| self.wake());
        if res.is_err() {
            self.restore(snap);
        }
        res
    }

    /// Re-runs postponed constraints whose metas have been assigned, until
    /// none is left to wake.
    pub fn wake(&mut self) -> Result<(), UnifyError> {
        loop {
            let ready = self.postponed.iter().position(|c| {
                let mut hit = false;
                c.lhs.for_each_meta(&mut |m, _| hit |= self.is_assigned(m));
                c.rhs.for_each_meta(&mut |m, _| hit |= self.is_assigned(m));
                hit
            });
            let Some(i) = ready else { return Ok(()) };
            let c = self.postponed.remove(i);
            let saved = self.span;
            self.span = c.span;
            self.fuel_left = self.fuel_unify;
            self.depth = 0;
            let res = self.solve(&c.ctx, &c.lhs, &c.rhs, c.dir);
            self.span = saved;
            res?;
        }
    }

    fn record(&mut self, ctx: &Context, l: &Term, r: &Term, resource: u8, action: String, result: &str) -> usize {
        self.steps += 1;
        if !self.tracing {
            return usize::MAX;
        }
        let constraint = format!("{} ≡ {}", self.print(ctx, l), self.print(ctx, r));
        self.trace.push(TraceRecord {
            kind: TraceKind::Unify,
            constraint,
            resource,
            action,
            result: result.into(),
            span: self.span,
            hint: None,
            note: None,
        });
        self.trace.len() - 1
    }

    fn set_result(&mut self, idx: usize, ok: bool) {
        if let Some(r) = self.trace.get_mut(idx) {
            r.result = if ok { "success" } else { "failure" }.into();
        }
    }

    fn spend(&mut self) -> Result<(), UnifyError> {
        if self.fuel_left == 0 {
            return Err(UnifyError::FuelExhausted);
        }
        self.fuel_left -= 1;
        Ok(())
    }

    fn postpone(&mut self, ctx: &Context, l: &Term, r: &Term, dir: Direction) {
        let dup = self.postponed.iter().any(|c| c.ctx.len() == ctx.len() && c.lhs == *l && c.rhs == *r && c.dir == dir);
        if !dup {
            self.postponed.push(Constraint { ctx: ctx.clone(), lhs: l.clone(), rhs: r.clone(), dir, span: self.span });
        }
    }

    fn mismatch(&self, ctx: &Context, l: &Term, r: &Term, note: Option<String>) -> UnifyError {
        UnifyError::Mismatch { lhs: self.print(ctx, l), rhs: self.print(ctx, r), note }
    }

    fn solve(&mut self, ctx: &Context, l: &Term, r: &Term, dir: Direction) -> Result<(), UnifyError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(UnifyError::FuelExhausted);
        }
        // reduction steps continue in place rather than nesting
        let mut res = self.solve_step(ctx, l, r, dir);
        while let Some((nl, nr)) = self.tail.take() {
            if res.is_err() {
                break;
            }
            res = self.solve_step(ctx, &nl, &nr, dir);
        }
        self.depth -= 1;
        res
    }

    fn solve_step(&mut self, ctx: &Context, l: &Term, r: &Term, dir: Direction) -> Result<(), UnifyError> {
        let l = self.instantiate(l);
        let r = self.instantiate(r);
        if l == r {
            self.record(ctx, &l, &r, 1, "syntactic".into(), "success");
            return Ok(());
        }

        // resource 2: metavariables
        match (self.flex_head(&l), self.flex_head(&r)) {
            (Some(a), Some(b)) => {
                // distinct metas: assign one to the other when either side
                // is a pattern; this is most general only for conversion
                if a != b && dir == Direction::Conv {
                    for (flex, other) in [(&l, &r), (&r, &l)] {
                        let idx = self.record(ctx, &l, &r, 2, "flex-flex pattern".into(), "pending");
                        let snap = self.checkpoint();
                        match self.solve_pattern(ctx, flex, other)? {
                            Ok(Pattern::Solved(desc)) => {
                                if let Some(rec) = self.trace.get_mut(idx) {
                                    rec.action = desc;
                                    rec.result = "success".into();
                                }
                                return Ok(());
                            }
                            _ => {
                                self.rollback(snap);
                                self.trace.truncate(idx);
                                self.steps -= 1;
                            }
                        }
                    }
                }
                self.record(ctx, &l, &r, 2, "postpone flex-flex".into(), "postponed");
                self.postpone(ctx, &l, &r, dir);
                return Ok(());
            }
            (Some(_), None) | (None, Some(_)) => {
                let flex_left = self.flex_head(&l).is_some();
                let (flex, rigid) = if flex_left { (&l, &r) } else { (&r, &l) };
                let idx = self.record(ctx, &l, &r, 2, "pattern".into(), "pending");
                let outcome = self.solve_pattern(ctx, flex, rigid)?;
                let (action, result): (String, &str) = match &outcome {
                    Ok(Pattern::Solved(desc)) => (desc.clone(), "success"),
                    Ok(Pattern::NotPattern) => ("postpone non-pattern".into(), "postponed"),
                    Err(UnifyError::OccursCheck { .. }) => ("occurs check".into(), "failure"),
                    Err(_) => ("scope check".into(), "failure"),
                };
                if let Some(rec) = self.trace.get_mut(idx) {
                    rec.action = action;
                    rec.result = result.into();
                }
                match outcome {
                    Ok(Pattern::Solved(_)) => return Ok(()),
                    Ok(Pattern::NotPattern) => {
                        self.postpone(ctx, &l, &r, dir);
                        return Ok(());
                    }
                    Err(e) => {
                        // reduction may remove the offending occurrence
                        if let Some(reduced) = self.reduce_once(rigid)? {
                            self.spend()?;
                            if let Some(rec) = self.trace.get_mut(idx) {
                                rec.result = "retry".into();
                            }
                            self.record(ctx, &l, &r, 4, "reduce rigid side".into(), "reduced");
                            return if flex_left {
                                self.solve(ctx, &l, &reduced, dir)
                            } else {
                                self.solve(ctx, &reduced, &r, dir)
                            };
                        }
                        return Err(e);
                    }
                }
            }
            (None, None) => {}
        }

        // resource 1: rigid-rigid decomposition
        let mut deferred = None;
        match (&l, &r) {
            (Term::Sort(a), Term::Sort(b)) => {
                let ok = match dir {
                    Direction::Conv => a == b,
                    Direction::Cumul => b.leq(*a),
                };
                self.record(ctx, &l, &r, 1, "compare sorts".into(), if ok { "success" } else { "failure" });
                return if ok { Ok(()) } else { Err(self.mismatch(ctx, &l, &r, None)) };
            }
            (Term::Pi(n, d1, c1), Term::Pi(_, d2, c2)) => {
                let idx = self.record(ctx, &l, &r, 1, "decompose forall".into(), "pending");
                let res = self.solve(ctx, d1, d2, Direction::Conv).and_then(|_| {
                    let inner = ctx.extended(n.clone(), (**d1).clone());
                    self.solve(&inner, c1, c2, dir)
                });
                self.set_result(idx, res.is_ok());
                return res;
            }
            (Term::Lam(n, d1, b1), Term::Lam(_, d2, b2)) => {
                let idx = self.record(ctx, &l, &r, 1, "decompose fun".into(), "pending");
                let res = self.solve(ctx, d1, d2, Direction::Conv).and_then(|_| {
                    let inner = ctx.extended(n.clone(), (**d1).clone());
                    self.solve(&inner, b1, b2, Direction::Conv)
                });
                self.set_result(idx, res.is_ok());
                return res;
            }
            (Term::Lam(n, d, b), other) | (other, Term::Lam(n, d, b)) => {
                let idx = self.record(ctx, &l, &r, 1, "eta-expand".into(), "pending");
                let inner = ctx.extended(n.clone(), (**d).clone());
                let expanded = Term::app(other.lift(0, 1), Term::Var(0));
                let res = if matches!(l, Term::Lam(..)) {
                    self.solve(&inner, b, &expanded, Direction::Conv)
                } else {
                    self.solve(&inner, &expanded, b, Direction::Conv)
                };
                self.set_result(idx, res.is_ok());
                return res;
            }
            _ => {
                let (h1, a1) = l.head_args();
                let (h2, a2) = r.head_args();
                let rigid_head = matches!(h1, Term::Const(_) | Term::Var(_));
                if rigid_head && h1 == h2 && a1.len() == a2.len() && !a1.is_empty() {
                    let (a1, a2): (Vec<Term>, Vec<Term>) =
                        (a1.into_iter().cloned().collect(), a2.into_iter().cloned().collect());
                    let snap = self.snapshot();
                    let idx = self.record(ctx, &l, &r, 1, "decompose application".into(), "pending");
                    let mut res = Ok(());
                    for (x, y) in a1.iter().zip(&a2) {
                        res = self.solve(ctx, x, y, Direction::Conv);
                        if res.is_err() {
                            break;
                        }
                    }
                    self.set_result(idx, res.is_ok());
                    match res {
                        Ok(()) => return Ok(()),
                        Err(UnifyError::FuelExhausted) => return Err(UnifyError::FuelExhausted),
                        Err(e) => {
                            self.restore(snap);
                            deferred = Some(e);
                        }
                    }
                }
            }
        }

        // resource 3: canonical structures
        let mut note = None;
        if self.try_hints(ctx, &l, &r, dir, &mut note)? {
            return Ok(());
        }

        // resource 4: reduction, beta/iota before delta
        let (kl, kr) = {
            let k = self.kernel();
            (k.whnf_core(&l)?, k.whnf_core(&r)?)
        };
        if kl != l || kr != r {
            self.spend()?;
            self.record(ctx, &l, &r, 4, "beta/iota".into(), "reduced");
            self.tail = Some((kl, kr));
            return Ok(());
        }
        let unfolded = {
            let k = self.kernel();
            match (k.unfold_order(&l), k.unfold_order(&r)) {
                (Some(a), Some(b)) => {
                    let nl = if a >= b { k.unfold_head(&l) } else { None };
                    let nr = if b >= a { k.unfold_head(&r) } else { None };
                    let name = if a >= b { l.head_const() } else { r.head_const() }.cloned();
                    Some((nl.unwrap_or_else(|| l.clone()), nr.unwrap_or_else(|| r.clone()), name))
                }
                (Some(_), None) => Some((k.unfold_head(&l).expect("unfoldable"), r.clone(), l.head_const().cloned())),
                (None, Some(_)) => Some((l.clone(), k.unfold_head(&r).expect("unfoldable"), r.head_const().cloned())),
                (None, None) => None,
            }
        };
        if let Some((nl, nr, name)) = unfolded {
            self.spend()?;
            let name = name.map(|n| n.to_string()).unwrap_or_default();
            self.record(ctx, &l, &r, 4, format!("delta {name}"), "reduced");
            self.tail = Some((nl, nr));
            return Ok(());
        }

        if self.is_blocked(&l)? || self.is_blocked(&r)? {
            self.record(ctx, &l, &r, 4, "postpone blocked".into(), "postponed");
            self.postpone(ctx, &l, &r, dir);
            return Ok(());
        }
        let idx = self.record(ctx, &l, &r, 1, "head clash".into(), "failure");
        if let (Some(n), Some(rec)) = (&note, self.trace.get_mut(idx)) {
            rec.note = Some(n.clone());
        }
        Err(match deferred {
            Some(UnifyError::Mismatch { lhs, rhs, note: inner }) => {
                UnifyError::Mismatch { lhs, rhs, note: inner.or(note) }
            }
            Some(e) => e,
            None => self.mismatch(ctx, &l, &r, note),
        })
    }

    /// One head reduction step (beta/iota, then delta).
    fn reduce_once(&self, t: &Term) -> Result<Option<Term>, UnifyError> {
        let k = self.kernel();
        let w = k.whnf_core(t)?;
        if w != *t {
            return Ok(Some(w));
        }
        Ok(k.unfold_head(t))
    }

    /// Whether reduction of `t` is stuck on an unassigned meta.
    fn is_blocked(&self, t: &Term) -> Result<bool, UnifyError> {
        let w = self.whnf(t)?;
        let (head, args) = w.head_args();
        match head {
            Term::Meta(id, _) => Ok(!self.is_assigned(*id)),
            Term::Const(c) => {
                let major = match self.env.get(c.as_str()).map(|i| &i.kind) {
                    Some(ConstKind::Recursor { nparams, nminors, .. }) => Some(nparams + nminors + 1),
                    Some(ConstKind::Projection { nparams, .. }) => Some(*nparams),
                    Some(ConstKind::Builtin(crate::env::Builtin::EqRect)) => Some(5),
                    _ => None,
                };
                match major.and_then(|i| args.get(i)) {
                    Some(m) => self.is_blocked(m),
                    None => Ok(false),
                }
            }
            _ => Ok(false),
        }
    }

    /// Resource 3: `proj params ?s extra ≡ t` with a hint for `(proj, key t)`.
    fn try_hints(
        &mut self,
        ctx: &Context,
        l: &Term,
        r: &Term,
        dir: Direction,
        note: &mut Option<String>,
    ) -> Result<bool, UnifyError> {
        for proj_left in [true, false] {
            let (pt, other) = if proj_left { (l, r) } else { (r, l) };
            let (head, args) = pt.head_args();
            let Term::Const(p) = head else { continue };
            let Some(ConstKind::Projection { nparams, .. }) = self.env.get(p.as_str()).map(|i| &i.kind) else {
                continue;
            };
            let np = *nparams;
            if args.len() <= np {
                continue;
            }
            let s = self.instantiate(args[np]);
            if self.flex_head(&s).is_none() {
                continue;
            }
            let Some(key) = head_key(&self.whnf(other)?) else { continue };
            let Some(inst) = self.env.hint(p, &key).cloned() else {
                let msg = format!("no canonical instance of `{p}` for `{key}`");
                let idx = self.record(ctx, l, r, 3, format!("hint lookup {p} on {key}"), "miss");
                if let Some(rec) = self.trace.get_mut(idx) {
                    rec.note = Some(msg.clone());
                }
                *note = Some(msg);
                continue;
            };
            self.spend()?;
            let args: Vec<Term> = args.into_iter().cloned().collect();
            let snap = self.snapshot();
            let idx = self.record(ctx, l, r, 3, format!("hint {inst}"), "pending");
            if let Some(rec) = self.trace.get_mut(idx) {
                rec.hint = Some(inst.to_string());
            }
            let res = self.apply_hint(ctx, p, &inst, np, &args, other, proj_left, dir);
            self.set_result(idx, res.is_ok());
            match res {
                Ok(()) => return Ok(true),
                Err(UnifyError::FuelExhausted) => return Err(UnifyError::FuelExhausted),
                Err(e) => {
                    self.restore(snap);
                    *note = Some(format!("canonical instance `{inst}` does not fit: {e}"));
                }
            }
        }
        Ok(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_hint(
        &mut self,
        ctx: &Context,
        proj: &Name,
        inst: &Name,
        np: usize,
        args: &[Term],
        other: &Term,
        proj_left: bool,
        dir: Direction,
    ) -> Result<(), UnifyError> {
        let info = self.env.get(inst.as_str()).expect("hints name declared constants");
        let mut inst_term = Term::Const(inst.clone());
        let mut ty = info.ty.clone();
        loop {
            match self.whnf(&ty)? {
                Term::Pi(_, d, c) => {
                    let origin = MetaOrigin { span: self.span, reason: MetaReason::HintArgument(inst.clone()) };
                    let m = self.new_meta(ctx, (*d).clone(), origin);
                    inst_term = Term::app(inst_term, m.clone());
                    ty = c.instantiate(&m);
                }
                w => {
                    ty = w;
                    break;
                }
            }
        }
        self.solve(ctx, &args[np], &inst_term, Direction::Conv)?;
        let (_, iargs) = ty.head_args();
        if iargs.len() == np {
            let iargs: Vec<Term> = iargs.into_iter().cloned().collect();
            for (a, b) in args[..np].iter().zip(&iargs) {
                self.solve(ctx, a, b, Direction::Conv)?;
            }
        }
        let projected = Term::apps(Term::Const(proj.clone()), args[..np].iter().cloned().chain([inst_term]));
        let field = self.kernel().whnf_core(&self.instantiate(&projected))?;
        let lhs = Term::apps(field, args[np + 1..].iter().cloned());
        if proj_left {
            self.solve(ctx, &lhs, other, dir)
        } else {
            self.solve(ctx, other, &lhs, dir)
        }
    }

    /// Resource 2: `?m spine extras ≡ rigid` with distinct variables.
    fn solve_pattern(
        &mut self,
        ctx: &Context,
        flex: &Term,
        rigid: &Term,
    ) -> Result<Result<Pattern, UnifyError>, UnifyError> {
        let (head, extras) = flex.head_args();
        let Term::Meta(id, spine) = head else { unreachable!("flex side has a meta head") };
        let id = *id;
        let n = spine.len();
        let k = extras.len();
        let mut vars = Vec::with_capacity(n + k);
        for t in spine.iter().chain(extras.iter().copied()) {
            match t {
                Term::Var(v) if !vars.contains(v) => vars.push(*v),
                _ => return Ok(Ok(Pattern::NotPattern)),
            }
        }
        if rigid.mentions_meta(id) {
            return Ok(Err(UnifyError::OccursCheck { meta: id, term: self.print(ctx, rigid) }));
        }
        let in_scope = |v: usize| vars.contains(&v);
        match self.prune(rigid, &in_scope, 0, false)? {
            Prune::Ok => {}
            Prune::GiveUp => return Ok(Ok(Pattern::NotPattern)),
            Prune::OutOfScope => {
                return Ok(Err(UnifyError::ScopeError { meta: id, term: self.print(ctx, rigid) }));
            }
        }
        let rigid = self.instantiate(rigid);
        if rigid.mentions_meta(id) {
            return Ok(Err(UnifyError::OccursCheck { meta: id, term: self.print(ctx, &rigid) }));
        }
        let rename = |bound: usize| {
            let vars = vars.clone();
            move |v: usize| -> Option<usize> {
                let p = vars.iter().position(|x| *x == v)?;
                if p < n {
                    Some(bound + n - 1 - p)
                } else if p - n < bound {
                    Some(bound - 1 - (p - n))
                } else {
                    None
                }
            }
        };
        let Some(mut body) = rigid.rename_free(&rename(k)) else {
            return Ok(Err(UnifyError::ScopeError { meta: id, term: self.print(ctx, &rigid) }));
        };

        // lambda domains: from the meta's type, else from the context
        let mut doms: Vec<(BinderName, Term)> = Vec::with_capacity(k);
        let mut ty = self.meta(id).ty.clone();
        for (i, extra) in extras.iter().enumerate().take(k) {
            let w = self.whnf(&ty)?;
            if let Term::Pi(nm, d, c) = w {
                doms.push((nm.clone(), (*d).clone()));
                ty = (*c).clone();
                continue;
            }
            let Term::Var(v) = extra else { unreachable!() };
            let Some(cty) = ctx.lookup(*v) else { return Ok(Ok(Pattern::NotPattern)) };
            let cty = self.instantiate(&cty);
            let Some(d) = cty.rename_free(&rename(i)) else { return Ok(Ok(Pattern::NotPattern)) };
            let name = ctx.name_of(*v).cloned().unwrap_or_else(BinderName::anonymous);
            doms.push((name, d));
            // remaining domains come from the context as well
            ty = Term::Sort(crate::term::Level::Prop);
        }
        for (nm, d) in doms.into_iter().rev() {
            body = Term::Lam(nm, d.into(), body.into());
        }
        let desc = format!("assign {id}");
        self.assign(id, body);
        Ok(Ok(Pattern::Solved(desc)))
    }

    /// Removes out-of-scope variables occurring in spines of other metas by
    /// restricting those metas.
    fn prune(
        &mut self,
        t: &Term,
        ok: &dyn Fn(usize) -> bool,
        depth: usize,
        under_flex: bool,
    ) -> Result<Prune, UnifyError> {
        let bad = |v: usize| v >= depth && !ok(v - depth);
        match t {
            Term::Var(v) => Ok(if !bad(*v) {
                Prune::Ok
            } else if under_flex {
                Prune::GiveUp
            } else {
                Prune::OutOfScope
            }),
            Term::Sort(_) | Term::Const(_) => Ok(Prune::Ok),
            Term::Lam(_, d, b) | Term::Pi(_, d, b) => {
                let r = self.prune(d, ok, depth, under_flex)?;
                if r != Prune::Ok {
                    return Ok(r);
                }
                self.prune(b, ok, depth + 1, under_flex)
            }
            Term::App(..) => {
                let (head, args) = t.head_args();
                let flex = matches!(head, Term::Meta(..));
                let r = self.prune(head, ok, depth, under_flex)?;
                if r != Prune::Ok {
                    return Ok(r);
                }
                for a in args {
                    let r = self.prune(a, ok, depth, under_flex || flex)?;
                    if r != Prune::Ok {
                        return Ok(r);
                    }
                }
                Ok(Prune::Ok)
            }
            Term::Meta(m, spine) => {
                let mut drop = Vec::new();
                for (j, e) in spine.iter().enumerate() {
                    if !free_vars(e).into_iter().any(bad) {
                        continue;
                    }
                    match e {
                        Term::Var(_) => drop.push(j),
                        _ => return Ok(Prune::GiveUp),
                    }
                }
                if drop.is_empty() {
                    return Ok(Prune::Ok);
                }
                Ok(if self.restrict(*m, &drop) { Prune::Ok } else { Prune::GiveUp })
            }
        }
    }

    /// Assigns `?m := ?p[kept]` where `?p` lives in `?m`'s context without
    /// the positions in `drop`. Fails if a kept type depends on a dropped
    /// variable.
    fn restrict(&mut self, m: MetaId, drop: &[usize]) -> bool {
        let decl = self.meta(m).clone();
        let n = decl.ctx.len();
        let kept: Vec<usize> = (0..n).filter(|p| !drop.contains(p)).collect();
        let new_index = |len: usize| {
            let kept = kept.clone();
            move |v: usize| -> Option<usize> {
                // `v` is relative to a prefix of length `len`
                let pos = len.checked_sub(v + 1)?;
                let new_pos = kept.iter().position(|k| *k == pos)?;
                let new_len = kept.iter().filter(|k| **k < len).count();
                Some(new_len - 1 - new_pos)
            }
        };
        let mut ctx = Context::new();
        for &p in &kept {
            let (name, ty) = &decl.ctx.entries()[p];
            let ty = self.instantiate(ty);
            let Some(ty) = ty.rename_free(&new_index(p)) else { return false };
            ctx.push(name.clone(), ty);
        }
        let ty = self.instantiate(&decl.ty);
        let Some(ty) = ty.rename_free(&new_index(n)) else { return false };
        let origin = MetaOrigin { span: decl.origin.span, reason: MetaReason::Pruned(m) };
        let fresh = self.new_meta(&ctx, ty, origin);
        let Term::Meta(pid, _) = fresh else { unreachable!() };
        let spine: Vec<Term> = kept.iter().map(|&p| Term::Var(n - 1 - p)).collect();
        self.assign(m, Term::meta(pid, spine));
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Prune {
    Ok,
    GiveUp,
    OutOfScope,
}

fn free_vars(t: &Term) -> Vec<usize> {
    fn go(t: &Term, depth: usize, out: &mut Vec<usize>) {
        match t {
            Term::Var(v) if *v >= depth => out.push(v - depth),
            Term::Var(_) | Term::Sort(_) | Term::Const(_) => {}
            Term::App(a, b) => {
                go(a, depth, out);
                go(b, depth, out);
            }
            Term::Lam(_, d, b) | Term::Pi(_, d, b) => {
                go(d, depth, out);
                go(b, depth + 1, out);
            }
            Term::Meta(_, spine) => spine.iter().for_each(|s| go(s, depth, out)),
        }
    }
    let mut out = Vec::new();
    go(t, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Declaration, InductiveDecl, RecordDecl};
    use crate::term::Level;

    fn c(s: &str) -> Term {
        Term::constant(s)
    }

    fn env() -> Environment {
        let mut env = Environment::new();
        env.declare_mut(Declaration::Inductive(InductiveDecl {
            name: "nat".into(),
            params: vec![],
            level: Level::Type(0),
            ctors: vec![("O".into(), c("nat")), ("S".into(), Term::arrow(c("nat"), c("nat")))],
            recursor: "nat_rect".into(),
        }))
        .unwrap();
        env.declare_mut(Declaration::Record(RecordDecl {
            name: "group".into(),
            params: vec![],
            level: Level::Type(1),
            ctor: "Group".into(),
            fields: vec![
                ("carrier".into(), Term::ty(0)),
                ("mulg".into(), Term::arrow(Term::Var(0), Term::arrow(Term::Var(0), Term::Var(0)))),
            ],
        }))
        .unwrap();
        env.declare_mut(Declaration::Axiom { name: "int".into(), ty: Term::ty(0) }).unwrap();
        let int2 = Term::arrow(c("int"), Term::arrow(c("int"), c("int")));
        env.declare_mut(Declaration::Axiom { name: "addz".into(), ty: int2 }).unwrap();
        env.declare_mut(Declaration::Definition {
            name: "IntGroup".into(),
            ty: c("group"),
            body: Term::apps(c("Group"), [c("int"), c("addz")]),
        })
        .unwrap();
        env.declare_mut(Declaration::CanonicalHint {
            projection: "carrier".into(),
            key: HeadKey::Const("int".into()),
            instance: "IntGroup".into(),
        })
        .unwrap();
        env
    }

    use crate::term::HeadKey;

    fn origin() -> MetaOrigin {
        MetaOrigin { span: Span::default(), reason: MetaReason::Hole }
    }

    fn nat_ctx(names: &[&str]) -> Context {
        let mut ctx = Context::new();
        for n in names {
            ctx.push(BinderName::new(n), c("nat"));
        }
        ctx
    }

    #[test]
    fn pattern_solution_abstracts_spine() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = nat_ctx(&["x"]);
        let m = st.new_meta(&ctx, c("nat"), origin());
        let rhs = Term::app(c("S"), Term::Var(0));
        st.unify(&ctx, &m, &rhs, Direction::Conv, Span::default()).unwrap();
        assert_eq!(st.instantiate(&m), rhs);
        assert!(st.postponed().is_empty());
    }

    #[test]
    fn extra_arguments_become_lambdas() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = nat_ctx(&["x"]);
        let f = st.new_meta(&Context::new(), Term::arrow(c("nat"), c("nat")), origin());
        let lhs = Term::app(f.clone(), Term::Var(0));
        st.unify(&ctx, &lhs, &Term::app(c("S"), Term::Var(0)), Direction::Conv, Span::default()).unwrap();
        assert_eq!(st.instantiate(&f), Term::lam("_", c("nat"), Term::app(c("S"), Term::Var(0))));
    }

    #[test]
    fn occurs_check_fails_and_rolls_back() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = Context::new();
        let m = st.new_meta(&ctx, c("nat"), origin());
        let err = st.unify(&ctx, &m, &Term::app(c("S"), m.clone()), Direction::Conv, Span::default()).unwrap_err();
        assert!(matches!(err, UnifyError::OccursCheck { .. }), "{err}");
        assert_eq!(st.metas().len(), 1);
        assert!(!st.is_assigned(MetaId(0)));
    }

    #[test]
    fn out_of_scope_variable_is_rejected() {
        let env = env();
        let mut st = ElabState::new(&env);
        let m = st.new_meta(&Context::new(), c("nat"), origin());
        let ctx = nat_ctx(&["x"]);
        let err = st.unify(&ctx, &m, &Term::Var(0), Direction::Conv, Span::default()).unwrap_err();
        assert!(matches!(err, UnifyError::ScopeError { .. }), "{err}");
    }

    #[test]
    fn pruning_restricts_other_metas() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = nat_ctx(&["x", "y"]);
        st.new_meta(&nat_ctx(&["x"]), c("nat"), origin());
        let outer = Term::meta(MetaId(0), vec![Term::Var(1)]);
        let inner = st.new_meta(&ctx, c("nat"), origin());
        st.unify(&ctx, &outer, &Term::app(c("S"), inner.clone()), Direction::Conv, Span::default()).unwrap();
        // the inner meta can no longer depend on y
        let solved = st.instantiate(&inner);
        let Term::Meta(p, spine) = &solved else { panic!("{solved:?}") };
        assert_eq!(&spine[..], &[Term::Var(1)]);
        assert_eq!(st.meta(*p).ctx.len(), 1);
    }

    #[test]
    fn canonical_hint_solves_projection() {
        let env = env();
        let mut st = ElabState::new(&env);
        st.set_tracing(true);
        let ctx = Context::new();
        let g = st.new_meta(&ctx, c("group"), origin());
        let lhs = Term::app(c("carrier"), g.clone());
        st.unify(&ctx, &lhs, &c("int"), Direction::Conv, Span::default()).unwrap();
        assert_eq!(st.instantiate(&g), c("IntGroup"));
        let hint = st.trace().iter().find(|r| r.resource == 3).expect("hint step");
        assert_eq!(hint.hint.as_deref(), Some("IntGroup"));
        assert_eq!(hint.result, "success");
    }

    #[test]
    fn missing_hint_postpones_with_note() {
        let env = env();
        let mut st = ElabState::new(&env);
        st.set_tracing(true);
        let ctx = Context::new();
        let g = st.new_meta(&ctx, c("group"), origin());
        let lhs = Term::app(c("carrier"), g);
        st.unify(&ctx, &lhs, &c("nat"), Direction::Conv, Span::default()).unwrap();
        assert_eq!(st.postponed().len(), 1);
        assert!(st.trace().iter().any(|r| r.result == "miss"));
    }

    #[test]
    fn postponed_constraint_wakes() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = Context::new();
        let f = st.new_meta(&ctx, Term::arrow(c("nat"), c("nat")), origin());
        // not a pattern: the argument is not a variable
        let lhs = Term::app(f.clone(), c("O"));
        st.unify(&ctx, &lhs, &Term::app(c("S"), c("O")), Direction::Conv, Span::default()).unwrap();
        assert_eq!(st.postponed().len(), 1);
        let bad = Term::lam("n", c("nat"), Term::Var(0));
        assert!(st.unify(&ctx, &f, &bad, Direction::Conv, Span::default()).is_err());
        assert!(!st.is_assigned(MetaId(0)));
        assert_eq!(st.postponed().len(), 1);
        let good = Term::lam("n", c("nat"), Term::app(c("S"), Term::Var(0)));
        st.unify(&ctx, &f, &good, Direction::Conv, Span::default()).unwrap();
        assert!(st.postponed().is_empty());
    }

    #[test]
    fn cumulativity_is_directed() {
        let env = env();
        let mut st = ElabState::new(&env);
        let ctx = Context::new();
        assert!(st.unify(&ctx, &Term::ty(1), &Term::ty(0), Direction::Cumul, Span::default()).is_ok());
        assert!(st.unify(&ctx, &Term::ty(0), &Term::ty(1), Direction::Cumul, Span::default()).is_err());
        assert!(st.unify(&ctx, &Term::ty(1), &Term::prop(), Direction::Conv, Span::default()).is_err());
    }

    #[test]
    fn mismatch_prints_both_sides() {
        let env = env();
        let mut st = ElabState::new(&env);
        let err = st.unify(&Context::new(), &c("nat"), &c("int"), Direction::Conv, Span::default()).unwrap_err();
        assert_eq!(err.to_string(), "cannot unify `nat` with `int`");
    }
}
