//! Shared workloads for the benchmarks.

use mtt_core::driver::{prelude, run_source, FileReport, RunOptions};
use mtt_core::{Environment, Term};

/// Unary numeral `n`.
pub fn num(n: usize) -> Term {
    (0..n).fold(Term::constant("O"), |t, _| Term::app(Term::constant("S"), t))
}

pub fn binop(op: &str, a: Term, b: Term) -> Term {
    Term::apps(Term::constant(op), [a, b])
}

/// `x1 * x2 * ... * xn` over the canonical integer group, so that every
/// product goes through hint resolution.
pub fn group_chain(n: usize) -> String {
    let mut src = String::from("Axiom x : int.\n");
    let body = vec!["x"; n.max(1)].join(" * ");
    src.push_str(&format!("Check ({body}).\n"));
    src
}

/// `eq_refl` checks whose conversion needs `k` arithmetic unfoldings.
pub fn arithmetic_proofs(k: usize) -> String {
    (1..=k).map(|i| format!("Check (@eq_refl nat {} : mult {i} {i} = {}).\n", i * i, i * i)).collect()
}

pub fn corpus() -> Vec<(String, String)> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mtt"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

/// Checks `src` on a fresh copy of the prelude.
pub fn check(src: &str) -> FileReport {
    let mut env: Environment = prelude().clone();
    run_source(&mut env, "bench.mtt", src, &RunOptions { keep_going: true, ..RunOptions::default() })
}
