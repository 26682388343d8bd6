//! Vernacular commands: elaborate, re-check in the kernel, then declare.

use crate::diag::{Category, Diagnostic, Span};
use crate::env::{
    pis, strip_pis, CoercionClass, ConstKind, DeclError, Declaration, Environment, InductiveDecl, RecordDecl,
};
use crate::kernel::{Context, Kernel, DEFAULT_CONV_FUEL};
use crate::pretty::{print_term, PrintOptions};
use crate::surface::{
    Assoc, ClassSpec, Command, CtorSpec, FieldSpec, NotationEntry, ParsedCommand, SBinder, SKind, SurfaceTerm,
    DEFAULT_NOTATION_LEVEL,
};
use crate::term::{head_key, BinderName, Level, Name, Term};
use crate::trace::TraceRecord;
use crate::unify::{ElabState, DEFAULT_UNIFY_FUEL};

use super::{binder_name, flatten, kernel_diag, Elaborator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElabOptions {
    pub trace: bool,
    /// Print implicit arguments and coercions in `Check`/`Eval` output.
    pub explicit: bool,
    pub fuel_unify: u64,
    pub fuel_conv: u64,
}

impl Default for ElabOptions {
    fn default() -> Self {
        ElabOptions { trace: false, explicit: false, fuel_unify: DEFAULT_UNIFY_FUEL, fuel_conv: DEFAULT_CONV_FUEL }
    }
}

/// A closed term accepted by the kernel, with its elaborated type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckedTerm {
    pub name: Option<Name>,
    pub term: Term,
    pub ty: Term,
}

#[derive(Clone, Debug, Default)]
pub struct CommandResult {
    pub output: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
    pub trace: Vec<TraceRecord>,
    /// Unification steps, including those of rolled-back attempts.
    pub steps: u64,
    pub checked: Vec<CheckedTerm>,
}

impl CommandResult {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

type CResult<T> = Result<T, Vec<Diagnostic>>;

/// Processes one command. The environment is only changed if the command
/// succeeds.
pub fn process_command(env: &mut Environment, cmd: &ParsedCommand, opts: &ElabOptions) -> CommandResult {
    let mut res = CommandResult::default();
    let mut next = env.clone();
    match (Runner { opts, res: &mut res, span: cmd.span }).run(&mut next, &cmd.cmd) {
        Ok(()) => *env = next,
        Err(d) => res.diagnostics.extend(d),
    }
    res
}

fn decl_diag(e: DeclError, span: Span) -> Vec<Diagnostic> {
    let category = match &e {
        DeclError::DuplicateName(_) => Category::DuplicateName,
        DeclError::UnknownConstant(_) => Category::UnknownIdentifier,
        DeclError::IllFormedTelescope(_) => Category::IllFormedTelescope,
        DeclError::BadInductive { .. } => Category::BadInductive,
        DeclError::BadCoercionTarget { .. } => Category::BadCoercionTarget,
        DeclError::DuplicateCoercionPath { .. } => Category::DuplicateCoercionPath,
        DeclError::DuplicateHint { .. } => Category::DuplicateHint,
        DeclError::AmbiguousNotation(_) => Category::AmbiguousNotation,
    };
    vec![Diagnostic::new(category, span, e.to_string())]
}

fn lams(binders: &[(BinderName, Term)], body: Term) -> Term {
    binders.iter().rev().fold(body, |acc, (n, t)| Term::Lam(n.clone(), t.clone().into(), acc.into()))
}

/// Implicit flags of the leading binders of a surface type.
fn leading_flags(s: &SurfaceTerm, out: &mut Vec<bool>) {
    match &s.kind {
        SKind::Pi(bs, body) => {
            out.extend(flatten(bs).iter().map(|b| b.implicit));
            leading_flags(body, out);
        }
        SKind::Arrow(_, body) => {
            out.push(false);
            leading_flags(body, out);
        }
        _ => {}
    }
}

fn declare_implicits(env: &mut Environment, name: &str, mut flags: Vec<bool>, span: Span) -> CResult<()> {
    while flags.last() == Some(&false) {
        flags.pop();
    }
    if flags.is_empty() {
        return Ok(());
    }
    env.declare_mut(Declaration::Implicit { name: Name::new(name), flags }).map_err(|e| decl_diag(e, span))
}

struct Runner<'r> {
    opts: &'r ElabOptions,
    res: &'r mut CommandResult,
    span: Span,
}

/// Elaborated telescope: binders plus their implicit flags.
struct Telescope {
    binders: Vec<(BinderName, Term)>,
    flags: Vec<bool>,
}

fn telescope(el: &mut Elaborator<'_, '_>, ctx: &mut Context, binders: &[SBinder]) -> CResult<Telescope> {
    let mut t = Telescope { binders: Vec::new(), flags: Vec::new() };
    for b in flatten(binders) {
        let dom = match b.ty {
            Some(s) => el.elab_type(ctx, s).map_err(|d| vec![d])?,
            None => el.type_hole(ctx, b.span),
        };
        let name = binder_name(b.name);
        ctx.push(name.clone(), dom.clone());
        t.binders.push((name, dom));
        t.flags.push(b.implicit);
    }
    Ok(t)
}

impl Runner<'_> {
    fn session<'e>(&self, env: &'e Environment) -> ElabState<'e> {
        let mut st = ElabState::new(env).with_fuel(self.opts.fuel_unify, self.opts.fuel_conv);
        st.set_tracing(self.opts.trace);
        st
    }

    fn harvest(&mut self, st: &mut ElabState<'_>) {
        self.res.trace.extend(st.take_trace());
        self.res.steps += st.steps();
    }

    fn kernel<'e>(&self, env: &'e Environment) -> Kernel<'e> {
        Kernel::new(env).with_fuel(self.opts.fuel_conv)
    }

    fn print_opts(&self) -> PrintOptions {
        PrintOptions { explicit: self.opts.explicit, ..PrintOptions::default() }
    }

    /// Re-checks a closed elaborated term in the meta-free kernel.
    fn kernel_check(&self, env: &Environment, term: &Term, ty: &Term) -> CResult<()> {
        let k = self.kernel(env);
        let ctx = Context::new();
        let span = self.span;
        k.ensure_sort(&ctx, ty).map_err(|e| vec![kernel_diag(e, span)])?;
        let inferred = k.infer(&ctx, term).map_err(|e| vec![kernel_diag(e, span)])?;
        if !k.is_sub(&inferred, ty).map_err(|e| vec![kernel_diag(e, span)])? {
            return Err(vec![Diagnostic::new(
                Category::TypeMismatch,
                span,
                format!("kernel rejected the elaborated term: `{term}` does not have type `{ty}`"),
            )]);
        }
        Ok(())
    }

    fn run(&mut self, env: &mut Environment, cmd: &Command) -> CResult<()> {
        match cmd {
            Command::Definition { name, binders, ty, body } => self.definition(env, name, binders, ty.as_ref(), body),
            Command::Axiom { names, ty } => self.axiom(env, names, ty),
            Command::Inductive { name, params, sort, ctors } => self.inductive(env, name, params, sort.as_ref(), ctors),
            Command::Record { name, params, sort, ctor, fields } => {
                self.record(env, name, params, sort.as_ref(), ctor, fields)
            }
            Command::Coercion { name, source, target } => self.coercion(env, name, source, target),
            Command::Canonical { name } => self.canonical(env, name),
            Command::Notation { token, lhs, rhs, template, level, assoc } => {
                let entry = NotationEntry {
                    token: token.clone(),
                    level: level.unwrap_or(DEFAULT_NOTATION_LEVEL),
                    assoc: assoc.unwrap_or(Assoc::Left),
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                    template: template.clone(),
                };
                env.declare_mut(Declaration::Notation(entry)).map_err(|e| decl_diag(e, self.span))
            }
            Command::Check(s) => self.check(env, s, false),
            Command::Eval(s) => self.check(env, s, true),
            Command::Fail(inner) => {
                let mut scratch = env.clone();
                let r = process_command(&mut scratch, inner, self.opts);
                self.res.trace.extend(r.trace);
                self.res.steps += r.steps;
                match r.diagnostics.first() {
                    Some(d) => {
                        self.res.output.push(format!("expected failure: {}: {}", d.category, d.message));
                        Ok(())
                    }
                    None => Err(vec![Diagnostic::new(
                        Category::UnexpectedSuccess,
                        inner.span,
                        format!("`{}` was expected to fail but succeeded", inner.cmd.keyword()),
                    )]),
                }
            }
        }
    }

    fn definition(
        &mut self,
        env: &mut Environment,
        name: &str,
        binders: &[SBinder],
        ty: Option<&SurfaceTerm>,
        body: &SurfaceTerm,
    ) -> CResult<()> {
        let elaborated = {
            let mut st = self.session(env);
            let r: CResult<_> = (|| {
                let mut el = Elaborator::new(&mut st);
                let mut ctx = Context::new();
                let tele = telescope(&mut el, &mut ctx, binders)?;
                let (body, ty) = match ty {
                    Some(s) => {
                        let ty = el.elab_type(&ctx, s).map_err(|d| vec![d])?;
                        (el.check(&ctx, body, &ty).map_err(|d| vec![d])?, ty)
                    }
                    None => el.infer(&ctx, body).map_err(|d| vec![d])?,
                };
                let full_ty = pis(&tele.binders, ty);
                let full_body = lams(&tele.binders, body);
                el.finalize(&[&full_ty, &full_body])?;
                Ok((el.st.instantiate(&full_ty), el.st.instantiate(&full_body), tele.flags))
            })();
            self.harvest(&mut st);
            r
        };
        let (full_ty, body, mut flags) = elaborated?;
        self.kernel_check(env, &body, &full_ty)?;
        if let Some(s) = ty {
            leading_flags(s, &mut flags);
        }
        let ty = full_ty;
        env.declare_mut(Declaration::Definition { name: Name::new(name), ty: ty.clone(), body: body.clone() })
            .map_err(|e| decl_diag(e, self.span))?;
        self.res.checked.push(CheckedTerm { name: Some(Name::new(name)), term: body, ty });
        declare_implicits(env, name, flags, self.span)
    }

    fn axiom(&mut self, env: &mut Environment, names: &[(String, Span)], ty: &SurfaceTerm) -> CResult<()> {
        let elaborated = {
            let mut st = self.session(env);
            let r: CResult<_> = (|| {
                let mut el = Elaborator::new(&mut st);
                let t = el.elab_type(&Context::new(), ty).map_err(|d| vec![d])?;
                el.finalize(&[&t])?;
                Ok(el.st.instantiate(&t))
            })();
            self.harvest(&mut st);
            r
        };
        let t = elaborated?;
        let span = self.span;
        self.kernel(env).ensure_sort(&Context::new(), &t).map_err(|e| vec![kernel_diag(e, span)])?;
        let mut flags = Vec::new();
        leading_flags(ty, &mut flags);
        for (name, nspan) in names {
            env.declare_mut(Declaration::Axiom { name: Name::new(name), ty: t.clone() })
                .map_err(|e| decl_diag(e, *nspan))?;
            declare_implicits(env, name, flags.clone(), *nspan)?;
        }
        Ok(())
    }

    /// Elaborates a parameter telescope into closed binder types.
    fn params(&mut self, env: &Environment, params: &[SBinder]) -> CResult<Vec<(BinderName, Term)>> {
        let mut st = self.session(env);
        let r: CResult<_> = (|| {
            let mut el = Elaborator::new(&mut st);
            let mut ctx = Context::new();
            let tele = telescope(&mut el, &mut ctx, params)?;
            let closed = pis(&tele.binders, Term::prop());
            el.finalize(&[&closed])?;
            Ok(tele.binders.iter().map(|(n, t)| (n.clone(), el.st.instantiate(t))).collect())
        })();
        self.harvest(&mut st);
        r
    }

    fn declared_level(&self, sort: Option<&SurfaceTerm>, name: &str) -> CResult<Option<Level>> {
        match sort.map(|s| &s.kind) {
            None | Some(SKind::Type(None)) => Ok(None),
            Some(SKind::Prop) => Ok(Some(Level::Prop)),
            Some(SKind::Type(Some(n))) => Ok(Some(Level::Type(*n))),
            Some(_) => Err(vec![Diagnostic::new(
                Category::BadInductive,
                sort.map(|s| s.span).unwrap_or(self.span),
                format!("the sort of `{name}` must be `Prop` or `Type`"),
            )]),
        }
    }

    /// Level of a type family whose components live at `levels`, checked
    /// against the declared level if there is one.
    fn family_level(&self, name: &str, declared: Option<Level>, levels: &[(String, Level)]) -> CResult<Level> {
        match declared {
            Some(Level::Prop) => Ok(Level::Prop),
            Some(l) => {
                for (what, lv) in levels {
                    if !lv.leq(l) {
                        return Err(vec![Diagnostic::new(
                            Category::BadInductive,
                            self.span,
                            format!(
                                "universe inconsistency: {what} of `{name}` lives in `{}`, above `{}`",
                                Term::sort(*lv),
                                Term::sort(l)
                            ),
                        )]);
                    }
                }
                Ok(l)
            }
            None => Ok(levels.iter().fold(Level::Type(0), |acc, (_, l)| acc.max(*l))),
        }
    }

    fn inductive(
        &mut self,
        env: &mut Environment,
        name: &str,
        params: &[SBinder],
        sort: Option<&SurfaceTerm>,
        ctors: &[CtorSpec],
    ) -> CResult<()> {
        let declared = self.declared_level(sort, name)?;
        let tele = self.params(env, params)?;
        let p = tele.len();
        let span = self.span;

        // constructor types refer to the inductive through a placeholder
        let mut scratch = env.clone();
        let placeholder = pis(&tele, Term::sort(declared.unwrap_or(Level::Type(0))));
        scratch
            .declare_mut(Declaration::Axiom { name: Name::new(name), ty: placeholder })
            .map_err(|e| decl_diag(e, span))?;
        let ctor_tys = {
            let mut st = self.session(&scratch);
            let r: CResult<_> = (|| {
                let mut el = Elaborator::new(&mut st);
                let mut base = Context::new();
                for (n, t) in &tele {
                    base.push(n.clone(), t.clone());
                }
                let mut out = Vec::new();
                for c in ctors {
                    let mut ctx = base.clone();
                    let args = telescope(&mut el, &mut ctx, &c.binders)?;
                    let concl = match &c.ty {
                        Some(s) => el.elab_type(&ctx, s).map_err(|d| vec![d])?,
                        None => {
                            let len = ctx.len();
                            Term::apps(Term::constant(name), (0..p).map(|k| Term::Var(len - 1 - k)))
                        }
                    };
                    out.push(pis(&args.binders, concl));
                }
                let closed: Vec<Term> = out.iter().map(|t| pis(&tele, t.clone())).collect();
                el.finalize(&closed.iter().collect::<Vec<_>>())?;
                Ok(out.iter().map(|t| el.st.instantiate(t)).collect::<Vec<_>>())
            })();
            self.harvest(&mut st);
            r
        }?;

        // argument levels, checked in the kernel against the placeholder
        let k = self.kernel(&scratch);
        let mut levels = Vec::new();
        for (c, cty) in ctors.iter().zip(&ctor_tys) {
            let mut ctx = Context::new();
            for (n, t) in &tele {
                ctx.push(n.clone(), t.clone());
            }
            k.ensure_sort(&ctx, cty).map_err(|e| vec![kernel_diag(e, c.span)])?;
            let (args, _) = strip_pis(cty);
            for (an, at) in args {
                let l = k.ensure_sort(&ctx, &at).map_err(|e| vec![kernel_diag(e, c.span)])?;
                levels.push((format!("argument of constructor `{}`", c.name), l));
                ctx.push(an, at);
            }
        }
        let level = self.family_level(name, declared, &levels)?;
        let decl = InductiveDecl {
            name: Name::new(name),
            params: tele,
            level,
            ctors: ctors.iter().zip(ctor_tys).map(|(c, t)| (Name::new(&c.name), t)).collect(),
            recursor: Name::new(&format!("{name}_rect")),
        };
        env.declare_mut(Declaration::Inductive(decl)).map_err(|e| decl_diag(e, span))?;
        if p > 0 {
            for c in ctors {
                declare_implicits(env, &c.name, vec![true; p], span)?;
            }
            declare_implicits(env, &format!("{name}_rect"), vec![true; p], span)?;
        }
        Ok(())
    }

    fn record(
        &mut self,
        env: &mut Environment,
        name: &str,
        params: &[SBinder],
        sort: Option<&SurfaceTerm>,
        ctor: &str,
        fields: &[FieldSpec],
    ) -> CResult<()> {
        let declared = self.declared_level(sort, name)?;
        let tele = self.params(env, params)?;
        let p = tele.len();
        let span = self.span;
        let field_tys = {
            let mut st = self.session(env);
            let r: CResult<_> = (|| {
                let mut el = Elaborator::new(&mut st);
                let mut ctx = Context::new();
                for (n, t) in &tele {
                    ctx.push(n.clone(), t.clone());
                }
                let mut out = Vec::new();
                for f in fields {
                    let t = el.elab_type(&ctx, &f.ty).map_err(|d| vec![d])?;
                    ctx.push(BinderName::new(&f.name), t.clone());
                    out.push((BinderName::new(&f.name), t));
                }
                let closed = pis(&tele, pis(&out, Term::prop()));
                el.finalize(&[&closed])?;
                Ok(out.into_iter().map(|(n, t)| (n, el.st.instantiate(&t))).collect::<Vec<_>>())
            })();
            self.harvest(&mut st);
            r
        }?;

        let k = self.kernel(env);
        let mut ctx = Context::new();
        for (n, t) in &tele {
            ctx.push(n.clone(), t.clone());
        }
        let mut levels = Vec::new();
        for (f, (n, t)) in fields.iter().zip(&field_tys) {
            let l = k.ensure_sort(&ctx, t).map_err(|e| vec![kernel_diag(e, f.span)])?;
            levels.push((format!("field `{}`", f.name), l));
            ctx.push(n.clone(), t.clone());
        }
        let level = self.family_level(name, declared, &levels)?;
        let decl = RecordDecl {
            name: Name::new(name),
            params: tele,
            level,
            ctor: Name::new(ctor),
            fields: fields.iter().zip(field_tys).map(|(f, (_, t))| (Name::new(&f.name), t)).collect(),
        };
        env.declare_mut(Declaration::Record(decl)).map_err(|e| decl_diag(e, span))?;
        if p > 0 {
            declare_implicits(env, ctor, vec![true; p], span)?;
            for f in fields {
                declare_implicits(env, &f.name, vec![true; p], span)?;
            }
        }
        Ok(())
    }

    fn coercion(&mut self, env: &mut Environment, name: &str, source: &str, target: &ClassSpec) -> CResult<()> {
        let span = self.span;
        let unknown =
            |n: &str| vec![Diagnostic::new(Category::UnknownIdentifier, span, format!("unknown identifier `{n}`"))];
        for n in [name, source] {
            if !env.contains(n) {
                return Err(unknown(n));
            }
        }
        let target = match target {
            ClassSpec::Named(d) if !env.contains(d) => return Err(unknown(d)),
            ClassSpec::Named(d) => CoercionClass::Named(Name::new(d)),
            ClassSpec::Sortclass => CoercionClass::Sortclass,
            ClassSpec::Funclass => CoercionClass::Funclass,
        };
        let decl = Declaration::Coercion {
            function: Name::new(name),
            source: CoercionClass::Named(Name::new(source)),
            target,
        };
        env.declare_mut(decl).map_err(|e| decl_diag(e, span))
    }

    /// Registers one hint per field of the instance whose value has a key.
    fn canonical(&mut self, env: &mut Environment, name: &str) -> CResult<()> {
        let span = self.span;
        let bad = |msg: String| vec![Diagnostic::new(Category::BadCanonical, span, msg)];
        let Some(info) = env.get(name) else {
            return Err(vec![Diagnostic::new(
                Category::UnknownIdentifier,
                span,
                format!("unknown identifier `{name}`"),
            )]);
        };
        let ConstKind::Definition { body } = &info.kind else {
            return Err(bad(format!("`{name}` is not a definition")));
        };
        let (binders, concl) = strip_pis(&info.ty);
        let mut value = body.clone();
        for _ in 0..binders.len() {
            match value {
                Term::Lam(_, _, b) => value = (*b).clone(),
                _ => return Err(bad(format!("`{name}` must abstract over the parameters of its type"))),
            }
        }
        let k = self.kernel(env);
        let concl = k.whnf(&concl).map_err(|e| vec![kernel_diag(e, span)])?;
        let record = concl.head_const().and_then(|r| env.inductive(r.as_str())).filter(|i| !i.projections.is_empty());
        let Some(record) = record else {
            return Err(bad(format!("the type of `{name}` is not a record type")));
        };
        let value = k.whnf(&value).map_err(|e| vec![kernel_diag(e, span)])?;
        let (head, args) = value.head_args();
        let nfields = record.projections.len();
        if head.head_const() != Some(&record.ctors[0]) || args.len() != record.nparams + nfields {
            return Err(bad(format!("`{name}` does not reduce to an application of `{}`", record.ctors[0])));
        }
        let mut hints = Vec::new();
        for (proj, field) in record.projections.iter().zip(&args[record.nparams..]) {
            let v = k.whnf(field).map_err(|e| vec![kernel_diag(e, span)])?;
            if let Some(key) = head_key(&v) {
                hints.push(Declaration::CanonicalHint { projection: proj.clone(), key, instance: Name::new(name) });
            }
        }
        for h in hints {
            env.declare_mut(h).map_err(|e| decl_diag(e, span))?;
        }
        Ok(())
    }

    fn check(&mut self, env: &mut Environment, s: &SurfaceTerm, eval: bool) -> CResult<()> {
        let elaborated = {
            let mut st = self.session(env);
            let r: CResult<_> = (|| {
                let mut el = Elaborator::new(&mut st);
                let (t, ty) = el.infer(&Context::new(), s).map_err(|d| vec![d])?;
                el.finalize(&[&t, &ty])?;
                Ok((el.st.instantiate(&t), el.st.instantiate(&ty)))
            })();
            self.harvest(&mut st);
            r
        };
        let (t, ty) = elaborated?;
        self.kernel_check(env, &t, &ty)?;
        let opts = self.print_opts();
        let line = if eval {
            let span = self.span;
            let nf = self.kernel(env).normalize(&t).map_err(|e| vec![kernel_diag(e, span)])?;
            print_term(env, &[], &nf, opts)
        } else {
            format!("{} : {}", print_term(env, &[], &t, opts), print_term(env, &[], &ty, opts))
        };
        self.res.output.push(line);
        self.res.checked.push(CheckedTerm { name: None, term: t, ty });
        Ok(())
    }
}
