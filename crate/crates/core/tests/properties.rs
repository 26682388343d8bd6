//! Property tests: level algebra, de Bruijn laws, evaluation against a
//! direct interpreter, and print/re-elaborate round trips.

use mtt_core::driver::prelude;
use mtt_core::pretty::{print_term, PrintOptions};
use mtt_core::surface::parse_term;
use mtt_core::{Context, ElabState, Elaborator, Kernel, Level, Term};
use proptest::prelude::*;

fn level() -> impl Strategy<Value = Level> {
    prop_oneof![Just(Level::Prop), (0u32..4).prop_map(Level::Type)]
}

fn db_term(scope: usize) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::constant("c")),
        level().prop_map(Term::Sort),
        (0..scope.max(1) + 2).prop_map(Term::Var),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::lam("x", a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Term::pi("x", a, b)),
        ]
    })
}

/// Closed arithmetic over the prelude, with a reference value.
#[derive(Clone, Debug)]
enum E {
    Num(u64),
    Var(usize),
    S(Box<E>),
    Plus(Box<E>, Box<E>),
    Mult(Box<E>, Box<E>),
    /// `(fun x : nat => body) arg`
    Let(Box<E>, Box<E>),
    /// `fst (pair a b)`
    Fst(Box<E>, Box<E>),
    /// `bool_rect _ t e (leq a b)`
    IfLeq(Box<E>, Box<E>, Box<E>, Box<E>),
    Sum(Vec<E>),
}

fn expr() -> impl Strategy<Value = E> {
    let leaf = prop_oneof![(0u64..4).prop_map(E::Num), (0usize..3).prop_map(E::Var)];
    leaf.prop_recursive(4, 24, 4, |inner| {
        let b = |e: E| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |e| E::S(b(e))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| E::Plus(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| E::Mult(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| E::Let(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| E::Fst(b(x), b(y))),
            (inner.clone(), inner.clone(), inner.clone(), inner.clone()).prop_map(move |(p, q, t, e)| E::IfLeq(
                b(p),
                b(q),
                b(t),
                b(e)
            )),
            prop::collection::vec(inner, 0..3).prop_map(E::Sum),
        ]
    })
}

fn c(n: &str) -> Term {
    Term::constant(n)
}

fn to_term(e: &E, scope: usize) -> Term {
    match e {
        E::Num(n) => (0..*n).fold(c("O"), |t, _| Term::app(c("S"), t)),
        E::Var(i) if scope > 0 => Term::Var(i % scope),
        E::Var(_) => c("O"),
        E::S(x) => Term::app(c("S"), to_term(x, scope)),
        E::Plus(x, y) => Term::apps(c("plus"), [to_term(x, scope), to_term(y, scope)]),
        E::Mult(x, y) => Term::apps(c("mult"), [to_term(x, scope), to_term(y, scope)]),
        E::Let(body, arg) => Term::app(Term::lam("x", c("nat"), to_term(body, scope + 1)), to_term(arg, scope)),
        E::Fst(x, y) => {
            let p = Term::apps(c("pair"), [c("nat"), c("nat"), to_term(x, scope), to_term(y, scope)]);
            Term::apps(c("fst"), [c("nat"), c("nat"), p])
        }
        E::IfLeq(p, q, t, e) => {
            let cond = Term::apps(c("leq"), [to_term(p, scope), to_term(q, scope)]);
            let motive = Term::lam("_", c("bool"), c("nat"));
            Term::apps(c("bool_rect"), [motive, to_term(t, scope), to_term(e, scope), cond])
        }
        E::Sum(xs) => {
            let list = xs.iter().rev().fold(Term::app(c("nil"), c("nat")), |acc, x| {
                Term::apps(c("cons"), [c("nat"), to_term(x, scope), acc])
            });
            Term::app(c("sum"), list)
        }
    }
}

fn value(e: &E, env: &mut Vec<u64>) -> u64 {
    match e {
        E::Num(n) => *n,
        E::Var(i) if !env.is_empty() => env[env.len() - 1 - i % env.len()],
        E::Var(_) => 0,
        E::S(x) => value(x, env) + 1,
        E::Plus(x, y) => value(x, env) + value(y, env),
        E::Mult(x, y) => value(x, env) * value(y, env),
        E::Let(body, arg) => {
            let v = value(arg, env);
            env.push(v);
            let r = value(body, env);
            env.pop();
            r
        }
        E::Fst(x, _) => value(x, env),
        E::IfLeq(p, q, t, e) => {
            if value(p, env) <= value(q, env) {
                value(t, env)
            } else {
                value(e, env)
            }
        }
        E::Sum(xs) => xs.iter().map(|x| value(x, env)).sum(),
    }
}

fn elaborate(src: &str) -> Term {
    let env = prelude();
    let s = parse_term(src, &env.operators()).unwrap_or_else(|e| panic!("`{src}` does not parse: {e}"));
    let mut st = ElabState::new(env);
    let mut el = Elaborator::new(&mut st);
    let (t, ty) = el.infer(&Context::new(), &s).unwrap_or_else(|d| panic!("`{src}`: {d}"));
    el.finalize(&[&t, &ty]).unwrap_or_else(|d| panic!("`{src}`: {}", d[0]));
    el.st.instantiate(&t)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn product_level_laws(a in level(), b in level()) {
        prop_assert_eq!(Level::product(a, Level::Prop), Level::Prop);
        prop_assert!(a.leq(a.max(b)) && b.leq(a.max(b)));
        prop_assert_eq!(a.max(b), b.max(a));
        if b != Level::Prop {
            prop_assert_eq!(Level::product(a, b), a.max(b).max(Level::Type(0)));
        }
    }

    #[test]
    fn leq_is_transitive(a in level(), b in level(), c in level()) {
        if a.leq(b) && b.leq(c) {
            prop_assert!(a.leq(c));
        }
        prop_assert!(a.leq(a));
    }

    #[test]
    fn subst_cancels_lift(t in db_term(3), r in db_term(3), i in 0usize..3) {
        prop_assert_eq!(t.lift(i, 1).subst(i, &r), t.clone());
        prop_assert_eq!(t.lift(i, 0), t);
    }

    #[test]
    fn instantiate_many_of_one(t in db_term(2), r in db_term(2)) {
        prop_assert_eq!(t.instantiate_many(std::slice::from_ref(&r)), t.instantiate(&r));
    }

    #[test]
    fn closed_arithmetic_evaluates_to_its_value(e in expr()) {
        let env = prelude();
        let t = to_term(&e, 0);
        let k = Kernel::new(env);
        let ty = k.infer(&Context::new(), &t).unwrap();
        prop_assert!(k.is_def_eq(&ty, &c("nat")).unwrap());
        let nf = k.normalize(&t).unwrap();
        let printed = print_term(env, &[], &nf, PrintOptions::default());
        prop_assert_eq!(printed, value(&e, &mut Vec::new()).to_string());
    }

    #[test]
    fn printing_then_elaborating_is_the_identity(e in expr()) {
        let env = prelude();
        let t = Term::lam("n", c("nat"), to_term(&e, 1));
        let printed = print_term(env, &[], &t, PrintOptions::full_notations());
        prop_assert_eq!(elaborate(&printed), t, "printed as `{}`", printed);
    }
}
