//! De Bruijn substitution against a named, capture-avoiding reference.
//!
//! Random terms are converted to named syntax with deliberately clashing
//! binder names (a binder may reuse any name its body does not need), the
//! substitution is done by textbook renaming, and the result is converted
//! back and compared with the de Bruijn operation.

use std::collections::BTreeSet;

use mtt_core::{BinderName, Level, MetaId, Term};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Debug)]
enum N {
    Sort(Level),
    Const(&'static str),
    Var(String),
    App(Box<N>, Box<N>),
    Lam(String, Box<N>, Box<N>),
    Pi(String, Box<N>, Box<N>),
    Meta(u32, Vec<N>),
}

const POOL: &[&str] = &["x", "y", "z", "v0", "v1"];

fn gen(rng: &mut StdRng, depth: usize, scope: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => Term::Sort(if rng.gen_bool(0.5) { Level::Prop } else { Level::Type(rng.gen_range(0..2)) }),
            1 => Term::constant(["c", "d"][rng.gen_range(0..2)]),
            _ if scope > 0 => Term::Var(rng.gen_range(0..scope)),
            _ => Term::constant("c"),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 | 1 => Term::app(gen(rng, d, scope), gen(rng, d, scope)),
        2 => Term::lam("_", gen(rng, d, scope), gen(rng, d, scope + 1)),
        3 => Term::pi("_", gen(rng, d, scope), gen(rng, d, scope + 1)),
        _ => {
            let n = rng.gen_range(0..3);
            Term::meta(MetaId(rng.gen_range(0..3)), (0..n).map(|_| gen(rng, d, scope)).collect())
        }
    }
}

/// Outer variables referenced from inside `t`, as indices relative to `t`'s
/// own context.
fn free_indices(t: &Term, depth: usize, out: &mut BTreeSet<usize>) {
    match t {
        Term::Var(i) if *i >= depth => {
            out.insert(i - depth);
        }
        Term::App(a, b) => {
            free_indices(a, depth, out);
            free_indices(b, depth, out);
        }
        Term::Lam(_, a, b) | Term::Pi(_, a, b) => {
            free_indices(a, depth, out);
            free_indices(b, depth + 1, out);
        }
        Term::Meta(_, spine) => spine.iter().for_each(|s| free_indices(s, depth, out)),
        _ => {}
    }
}

/// Names binders randomly from the pool, avoiding only the outer names the
/// body actually refers to. `scope` is innermost-last.
fn to_named(rng: &mut StdRng, t: &Term, scope: &mut Vec<String>) -> N {
    match t {
        Term::Sort(l) => N::Sort(*l),
        Term::Const(c) => N::Const(if c.as_str() == "c" { "c" } else { "d" }),
        Term::Var(i) => N::Var(scope[scope.len() - 1 - i].clone()),
        Term::App(a, b) => N::App(Box::new(to_named(rng, a, scope)), Box::new(to_named(rng, b, scope))),
        Term::Lam(_, d, b) | Term::Pi(_, d, b) => {
            let dom = to_named(rng, d, scope);
            let mut used = BTreeSet::new();
            free_indices(b, 1, &mut used);
            let taken: BTreeSet<&str> = used.iter().map(|i| scope[scope.len() - 1 - i].as_str()).collect();
            let choices: Vec<&str> = POOL.iter().copied().filter(|n| !taken.contains(n)).collect();
            let name = if choices.is_empty() {
                fresh(&taken.iter().map(|s| s.to_string()).collect())
            } else {
                choices[rng.gen_range(0..choices.len())].to_string()
            };
            scope.push(name.clone());
            let body = to_named(rng, b, scope);
            scope.pop();
            if matches!(t, Term::Lam(..)) {
                N::Lam(name, Box::new(dom), Box::new(body))
            } else {
                N::Pi(name, Box::new(dom), Box::new(body))
            }
        }
        Term::Meta(m, spine) => N::Meta(m.0, spine.iter().map(|s| to_named(rng, s, scope)).collect()),
    }
}

fn to_debruijn(n: &N, scope: &mut Vec<String>) -> Term {
    match n {
        N::Sort(l) => Term::Sort(*l),
        N::Const(c) => Term::constant(c),
        N::Var(x) => {
            let pos = scope.iter().rposition(|s| s == x).unwrap_or_else(|| panic!("unbound `{x}`"));
            Term::Var(scope.len() - 1 - pos)
        }
        N::App(a, b) => Term::app(to_debruijn(a, scope), to_debruijn(b, scope)),
        N::Lam(x, d, b) | N::Pi(x, d, b) => {
            let dom = to_debruijn(d, scope);
            scope.push(x.clone());
            let body = to_debruijn(b, scope);
            scope.pop();
            let name = BinderName::anonymous();
            if matches!(n, N::Lam(..)) {
                Term::Lam(name, dom.into(), body.into())
            } else {
                Term::Pi(name, dom.into(), body.into())
            }
        }
        N::Meta(m, spine) => Term::meta(MetaId(*m), spine.iter().map(|s| to_debruijn(s, scope)).collect()),
    }
}

fn fv(n: &N, out: &mut BTreeSet<String>) {
    match n {
        N::Var(x) => {
            out.insert(x.clone());
        }
        N::App(a, b) => {
            fv(a, out);
            fv(b, out);
        }
        N::Lam(x, d, b) | N::Pi(x, d, b) => {
            fv(d, out);
            let mut inner = BTreeSet::new();
            fv(b, &mut inner);
            inner.remove(x);
            out.extend(inner);
        }
        N::Meta(_, spine) => spine.iter().for_each(|s| fv(s, out)),
        _ => {}
    }
}

fn fresh(avoid: &BTreeSet<String>) -> String {
    (0..).map(|i| format!("w{i}")).find(|n| !avoid.contains(n)).expect("infinite supply")
}

/// Simultaneous capture-avoiding substitution.
fn subst(n: &N, map: &[(String, N)]) -> N {
    match n {
        N::Var(x) => map.iter().find(|(k, _)| k == x).map(|(_, v)| v.clone()).unwrap_or_else(|| n.clone()),
        N::Sort(_) | N::Const(_) => n.clone(),
        N::App(a, b) => N::App(Box::new(subst(a, map)), Box::new(subst(b, map))),
        N::Meta(m, spine) => N::Meta(*m, spine.iter().map(|s| subst(s, map)).collect()),
        N::Lam(x, d, b) | N::Pi(x, d, b) => {
            let dom = subst(d, map);
            let mut body_fv = BTreeSet::new();
            fv(b, &mut body_fv);
            let inner: Vec<(String, N)> = map.iter().filter(|(k, _)| k != x && body_fv.contains(k)).cloned().collect();
            let mut incoming = BTreeSet::new();
            inner.iter().for_each(|(_, v)| fv(v, &mut incoming));
            let (x2, body) = if incoming.contains(x) {
                let mut avoid = incoming.clone();
                avoid.extend(body_fv);
                avoid.extend(inner.iter().map(|(k, _)| k.clone()));
                let z = fresh(&avoid);
                let renamed = subst(b, &[(x.clone(), N::Var(z.clone()))]);
                (z, subst(&renamed, &inner))
            } else {
                (x.clone(), subst(b, &inner))
            };
            if matches!(n, N::Lam(..)) {
                N::Lam(x2, Box::new(dom), Box::new(body))
            } else {
                N::Pi(x2, Box::new(dom), Box::new(body))
            }
        }
    }
}

/// Context names: `v0` outermost, plus the extra targets.
fn ctx_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

#[test]
fn instantiate_matches_named_substitution() {
    let mut rng = StdRng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.gen_range(0..3);
        let t = gen(&mut rng, 4, n + 1);
        let r = gen(&mut rng, 3, n);
        let mut scope = ctx_names(n);
        scope.push("x".into());
        let named_t = to_named(&mut rng, &t, &mut scope);
        scope.pop();
        let named_r = to_named(&mut rng, &r, &mut scope);
        let named = subst(&named_t, &[("x".into(), named_r)]);
        let expected = to_debruijn(&named, &mut scope);
        assert_eq!(t.instantiate(&r), expected, "case {case}: t = {t}, r = {r}");
    }
}

#[test]
fn instantiate_many_matches_parallel_substitution() {
    let mut rng = StdRng::seed_from_u64(12);
    for case in 0..1000 {
        let n = rng.gen_range(0..3);
        let k = rng.gen_range(1..4);
        let t = gen(&mut rng, 4, n + k);
        let vals: Vec<Term> = (0..k).map(|_| gen(&mut rng, 2, n)).collect();
        let targets: Vec<String> = (0..k).map(|i| ["x", "y", "z"][i].to_string()).collect();
        let mut scope = ctx_names(n);
        scope.extend(targets.iter().cloned());
        let named_t = to_named(&mut rng, &t, &mut scope);
        scope.truncate(n);
        let map: Vec<(String, N)> =
            targets.iter().zip(&vals).map(|(x, v)| (x.clone(), to_named(&mut rng, v, &mut scope))).collect();
        let expected = to_debruijn(&subst(&named_t, &map), &mut scope);
        assert_eq!(t.instantiate_many(&vals), expected, "case {case}: t = {t}");
    }
}

#[test]
fn lift_matches_weakening() {
    let mut rng = StdRng::seed_from_u64(13);
    for case in 0..1000 {
        let n = rng.gen_range(0..4);
        let cut = rng.gen_range(0..=n);
        let t = gen(&mut rng, 4, n);
        // insert an unused variable `fresh_w` below the innermost `cut` variables
        let mut scope = ctx_names(n);
        let named = to_named(&mut rng, &t, &mut scope);
        scope.insert(n - cut, "fresh_w".into());
        assert_eq!(t.lift(cut, 1), to_debruijn(&named, &mut scope), "case {case}: t = {t}, cut = {cut}");
    }
}

#[test]
fn subst_at_depth_matches_named_substitution() {
    let mut rng = StdRng::seed_from_u64(14);
    for case in 0..1000 {
        // context v0.. x, then `index` more variables that stay in place
        let n = rng.gen_range(0..3);
        let index = rng.gen_range(0..3);
        let t = gen(&mut rng, 4, n + 1 + index);
        let inner: Vec<String> = (0..index).map(|i| format!("u{i}")).collect();
        // the replacement lives in the result context v0.., u0..
        let r = gen(&mut rng, 3, n + index);
        let mut scope = ctx_names(n);
        scope.push("x".into());
        scope.extend(inner.iter().cloned());
        let named_t = to_named(&mut rng, &t, &mut scope);
        scope.retain(|s| s != "x");
        let named_r = to_named(&mut rng, &r, &mut scope);
        let expected = to_debruijn(&subst(&named_t, &[("x".into(), named_r)]), &mut scope);
        assert_eq!(t.subst(index, &r), expected, "case {case}: t = {t}, r = {r}, index = {index}");
    }
}
