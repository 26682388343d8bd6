//! Core terms back to surface syntax.
//!
//! Printing goes through [`delab`], which rebuilds a [`SurfaceTerm`] with
//! named binders, hidden implicit arguments and coercions, folded numerals
//! and folded notations, and then through the surface printer.

use std::fmt;

use crate::diag::Span;
use crate::env::{ConstKind, Environment};
use crate::surface::{print_surface, SBinder, SKind, SurfaceTerm};
use crate::term::{BinderName, Level, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NotationMode {
    /// Fold `=` and notations whose template has no holes.
    #[default]
    Default,
    /// Fold every notation; used for print/re-elaborate round trips.
    Full,
    /// Fold nothing.
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PrintOptions {
    /// Show implicit arguments (with `@`) and coercion applications.
    pub explicit: bool,
    pub notations: NotationMode,
}

impl PrintOptions {
    pub fn explicit() -> Self {
        PrintOptions { explicit: true, notations: NotationMode::Default }
    }

    pub fn full_notations() -> Self {
        PrintOptions { explicit: false, notations: NotationMode::Full }
    }
}

pub fn print_term(env: &Environment, names: &[BinderName], t: &Term, opts: PrintOptions) -> String {
    let s = delab(Some(env), names, t, opts);
    print_surface(&s, &env.operators())
}

/// Printing without an environment: no implicit hiding and no notations.
pub fn print_raw(names: &[BinderName], t: &Term) -> String {
    let s = delab(None, names, t, PrintOptions { explicit: true, notations: NotationMode::Off });
    print_surface(&s, &[])
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_raw(&[], self))
    }
}

pub fn delab(env: Option<&Environment>, names: &[BinderName], t: &Term, opts: PrintOptions) -> SurfaceTerm {
    let mut scope: Vec<String> = Vec::new();
    for n in names {
        let fresh = fresh_name(env, &scope, n.as_str(), true);
        scope.push(fresh);
    }
    Delab { env, opts }.go(&mut scope, t)
}

fn s(kind: SKind) -> SurfaceTerm {
    SurfaceTerm::new(kind, Span::default())
}

fn var(x: &str) -> SurfaceTerm {
    s(SKind::Var(x.to_string()))
}

fn fresh_name(env: Option<&Environment>, scope: &[String], base: &str, used: bool) -> String {
    let base = if base.is_empty() || base == "_" {
        if !used {
            return "_".into();
        }
        "x"
    } else {
        base
    };
    let clash = |n: &str| scope.iter().any(|s| s == n) || env.is_some_and(|e| e.contains(n));
    if !clash(base) {
        return base.to_string();
    }
    if !used {
        return "_".into();
    }
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "x" } else { stem };
    (0..).map(|i| format!("{stem}{i}")).find(|n| !clash(n)).expect("infinite supply")
}

struct Delab<'a> {
    env: Option<&'a Environment>,
    opts: PrintOptions,
}

impl Delab<'_> {
    fn go(&self, scope: &mut Vec<String>, t: &Term) -> SurfaceTerm {
        match t {
            Term::Sort(Level::Prop) => s(SKind::Prop),
            Term::Sort(Level::Type(0)) => s(SKind::Type(None)),
            Term::Sort(Level::Type(i)) => s(SKind::Type(Some(*i))),
            Term::Var(i) => match scope.len().checked_sub(i + 1) {
                Some(pos) => var(&scope[pos]),
                None => var(&format!("#{}", i - scope.len())),
            },
            Term::Meta(id, _) => var(&id.to_string()),
            Term::Const(_) | Term::App(..) => self.app(scope, t),
            Term::Lam(..) => self.binders(scope, t, false),
            Term::Pi(_, dom, cod) if !cod.has_free_var(0) => {
                let d = self.go(scope, dom);
                scope.push("_".into());
                let c = self.go(scope, cod);
                scope.pop();
                s(SKind::Arrow(Box::new(d), Box::new(c)))
            }
            Term::Pi(..) => self.binders(scope, t, true),
        }
    }

    /// A run of lambdas (or dependent Pis), grouping adjacent binders with
    /// identical printed domains.
    fn binders(&self, scope: &mut Vec<String>, t: &Term, pi: bool) -> SurfaceTerm {
        let depth = scope.len();
        let mut groups: Vec<SBinder> = Vec::new();
        let mut cur = t;
        loop {
            let (n, dom, body) = match cur {
                Term::Lam(n, d, b) if !pi => (n, d, b),
                Term::Pi(n, d, b) if pi && b.has_free_var(0) => (n, d, b),
                _ => break,
            };
            let d = self.go(scope, dom);
            let name = fresh_name(self.env, scope, n.as_str(), body.has_free_var(0));
            scope.push(name.clone());
            match groups.last_mut() {
                Some(g) if g.ty.as_ref() == Some(&d) => g.names.push((name, Span::default())),
                _ => groups.push(SBinder { names: vec![(name, Span::default())], ty: Some(d), implicit: false }),
            }
            cur = body;
        }
        let body = self.go(scope, cur);
        scope.truncate(depth);
        let kind = if pi { SKind::Pi(groups, Box::new(body)) } else { SKind::Lam(groups, Box::new(body)) };
        s(kind)
    }

    fn app(&self, scope: &mut Vec<String>, t: &Term) -> SurfaceTerm {
        let (head, args) = t.head_args();
        if let Some(n) = self.numeral(t) {
            return s(SKind::Num(n));
        }
        let Term::Const(name) = head else {
            let h = self.go(scope, head);
            let args: Vec<SurfaceTerm> = args.iter().map(|a| self.go(scope, a)).collect();
            return mk_app(h, args);
        };
        let Some(env) = self.env else {
            let args: Vec<SurfaceTerm> = args.iter().map(|a| self.go(scope, a)).collect();
            return mk_app(var(name.as_str()), args);
        };

        // coercions
        if !self.opts.explicit {
            if let Some(edge) = env.coercion_edge(name.as_str()) {
                if args.len() > edge.nparams {
                    let inner = self.go(scope, args[edge.nparams]);
                    let rest: Vec<SurfaceTerm> = args[edge.nparams + 1..].iter().map(|a| self.go(scope, a)).collect();
                    return mk_app(inner, rest);
                }
            }
        }

        // equality
        if self.opts.notations != NotationMode::Off
            && name.as_str() == "eq"
            && args.len() == 3
            && matches!(env.get("eq").map(|c| &c.kind), Some(ConstKind::Builtin(_)))
        {
            let l = self.go(scope, args[1]);
            let r = self.go(scope, args[2]);
            return s(SKind::Infix("=".into(), Box::new(l), Box::new(r)));
        }

        if let Some(folded) = self.fold_notation(env, scope, name.as_str(), &args) {
            return folded;
        }

        let k = env.implicit_prefix(name.as_str());
        if k == 0 {
            let args: Vec<SurfaceTerm> = args.iter().map(|a| self.go(scope, a)).collect();
            return mk_app(var(name.as_str()), args);
        }
        // with no explicit arguments left the `@` form is needed to re-read it
        if self.opts.explicit || args.len() <= k {
            let args: Vec<SurfaceTerm> = args.iter().map(|a| self.go(scope, a)).collect();
            return mk_app(s(SKind::Explicit(name.to_string())), args);
        }
        let args: Vec<SurfaceTerm> = args[k..].iter().map(|a| self.go(scope, a)).collect();
        mk_app(var(name.as_str()), args)
    }

    fn fold_notation(
        &self,
        env: &Environment,
        scope: &mut Vec<String>,
        head: &str,
        args: &[&Term],
    ) -> Option<SurfaceTerm> {
        if self.opts.notations == NotationMode::Off {
            return None;
        }
        for entry in env.notations() {
            let (thead, targs) = match &entry.template.kind {
                SKind::App(f, a) => (f.as_ref(), a.as_slice()),
                _ => continue,
            };
            let (tname, explicit) = match &thead.kind {
                SKind::Var(x) => (x.as_str(), false),
                SKind::Explicit(x) => (x.as_str(), true),
                _ => continue,
            };
            if tname != head {
                continue;
            }
            let has_holes = targs.iter().any(|a| a.kind == SKind::Hole);
            if has_holes && self.opts.notations != NotationMode::Full {
                continue;
            }
            let skip = if explicit { 0 } else { env.implicit_prefix(head) };
            if args.len() != skip + targs.len() {
                continue;
            }
            let mut lhs = None;
            let mut rhs = None;
            let mut ok = true;
            for (a, ta) in args[skip..].iter().zip(targs) {
                match &ta.kind {
                    SKind::Hole => {}
                    SKind::Var(x) if *x == entry.lhs && lhs.is_none() => lhs = Some(*a),
                    SKind::Var(x) if *x == entry.rhs && rhs.is_none() => rhs = Some(*a),
                    _ => ok = false,
                }
            }
            if let (true, Some(l), Some(r)) = (ok, lhs, rhs) {
                let l = self.go(scope, l);
                let r = self.go(scope, r);
                return Some(s(SKind::Infix(entry.token.clone(), Box::new(l), Box::new(r))));
            }
        }
        None
    }

    fn numeral(&self, t: &Term) -> Option<u64> {
        let env = self.env?;
        let is_nat_ctor = |n: &str| matches!(env.get(n).map(|c| &c.kind), Some(ConstKind::Constructor { inductive, .. }) if inductive.as_str() == "nat");
        if !is_nat_ctor("O") || !is_nat_ctor("S") {
            return None;
        }
        let mut n = 0u64;
        let mut cur = t;
        loop {
            match cur {
                Term::Const(c) if c.as_str() == "O" => return Some(n),
                Term::App(f, a) if matches!(&**f, Term::Const(c) if c.as_str() == "S") => {
                    n += 1;
                    cur = a;
                }
                _ => return None,
            }
        }
    }
}

fn mk_app(head: SurfaceTerm, args: Vec<SurfaceTerm>) -> SurfaceTerm {
    if args.is_empty() {
        return head;
    }
    match head.kind {
        SKind::App(f, mut a) => {
            a.extend(args);
            s(SKind::App(f, a))
        }
        kind => s(SKind::App(Box::new(s(kind)), args)),
    }
}
