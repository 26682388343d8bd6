use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mtt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtt")).current_dir(root()).args(args).output().expect("mtt runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn trace(o: &Output) -> Vec<Value> {
    String::from_utf8(o.stderr.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not NDJSON: {l}: {e}")))
        .collect()
}

fn summary_steps(out: &str) -> u64 {
    let last = out.lines().last().unwrap();
    let tail = last.split(", ").nth(1).unwrap_or_else(|| panic!("summary: {last}"));
    tail.split(' ').next().unwrap().trim_start_matches('(').parse().unwrap()
}

fn scratch(src: &str) -> tempfile::NamedTempFile {
    let f = tempfile::Builder::new().suffix(".mtt").tempfile().unwrap();
    std::fs::write(f.path(), src).unwrap();
    f
}

#[test]
fn exit_codes_distinguish_success_failure_and_usage() {
    assert_eq!(mtt(&["check", "corpus/numerals.mtt"]).status.code(), Some(0));
    assert_eq!(mtt(&["check", "corpus/errors/occurs_check.mtt"]).status.code(), Some(1));
    assert_eq!(mtt(&["check", "corpus/does_not_exist.mtt"]).status.code(), Some(2));
    assert_eq!(mtt(&["check"]).status.code(), Some(2));
    assert_eq!(mtt(&["check", "--trace=bogus", "corpus/numerals.mtt"]).status.code(), Some(2));
}

#[test]
fn empty_file_checks() {
    let f = scratch("");
    let o = mtt(&["check", "--deterministic", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).ends_with(": ok (0 commands, 0 unification steps)\n"), "{}", stdout(&o));
}

#[test]
fn diagnostics_are_positioned() {
    let o = mtt(&["check", "--deterministic", "corpus/errors/missing_hint.mtt"]);
    let out = stdout(&o);
    assert!(out.contains("corpus/errors/missing_hint.mtt:4:8: StuckConstraint:"), "{out}");
    assert!(out.lines().last().unwrap().contains(": failed ("));
}

#[test]
fn canonical_resolution_appears_in_the_trace() {
    let o = mtt(&["check", "--deterministic", "--trace=unify", "corpus/group_canonical.mtt"]);
    assert!(o.status.success());
    let recs = trace(&o);
    let hint = recs
        .iter()
        .find(|r| r["resource"] == 3 && r["result"] == "success")
        .expect("a successful canonical-hint record");
    assert_eq!(hint["hint"], "IntGroup");
    assert!(hint["constraint"].as_str().unwrap().contains("carrier ?"));
    assert!(hint["span"]["line"].as_u64().unwrap() > 0);
}

#[test]
fn every_unification_step_is_traced() {
    for file in ["corpus/group_canonical.mtt", "corpus/eqtype.mtt", "corpus/bigop.mtt"] {
        let o = mtt(&["check", "--deterministic", "--trace=unify", file]);
        let recs = trace(&o);
        assert!(recs.iter().all(|r| r["kind"] == "unify"));
        assert_eq!(recs.len() as u64, summary_steps(&stdout(&o)), "{file}");
    }
}

#[test]
fn explicit_terms_need_no_inference() {
    let f = scratch(
        "Definition twice (f : nat -> nat) (n : nat) : nat := f (f n).\n\
         Check (twice S 2).\n\
         Check (@eq_refl nat 4 : @eq nat (plus 2 2) 4).\n",
    );
    let o = mtt(&["check", "--deterministic", "--trace=unify", f.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    for r in trace(&o) {
        let res = r["resource"].as_u64().unwrap();
        assert!(res == 1 || res == 4, "unexpected record {r}");
    }
}

#[test]
fn elaboration_trace_is_selectable() {
    let o = mtt(&["check", "--deterministic", "--trace=elab", "corpus/group_coercion.mtt"]);
    let recs = trace(&o);
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["kind"] == "elab"));
    let all = trace(&mtt(&["check", "--deterministic", "--trace=all", "corpus/group_coercion.mtt"]));
    assert!(all.len() > recs.len());
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let args =
        ["check", "--deterministic", "--trace=all", "--keep-going", "corpus/bigop.mtt", "corpus/group_stuck.mtt"];
    let a = mtt(&args);
    let b = mtt(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert!(!stdout(&a).contains(" ms)"));
    assert!(stdout(&mtt(&["check", "corpus/bigop.mtt"])).contains(" ms)"));
}

#[test]
fn explicit_mode_shows_implicits() {
    let plain = stdout(&mtt(&["check", "--deterministic", "corpus/leq_trans.mtt"]));
    let explicit = stdout(&mtt(&["check", "--deterministic", "--explicit", "corpus/leq_trans.mtt"]));
    assert_ne!(plain, explicit);
    assert!(explicit.contains("@leq_trans") || explicit.contains("leq_trans a b c"), "{explicit}");
}

#[test]
fn extra_preludes_load_in_order() {
    let p = scratch("Definition seven : nat := 7.\n");
    let f = scratch("Eval (plus seven 1).\n");
    let o = mtt(&["check", "--deterministic", "--prelude", p.path().to_str().unwrap(), f.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("8\n"));
    let bare = mtt(&["check", "--no-default-prelude", f.path().to_str().unwrap()]);
    assert_eq!(bare.status.code(), Some(1));
    assert!(stdout(&bare).contains("UnknownIdentifier: "), "{}", stdout(&bare));
}

#[test]
fn conversion_fuel_is_enforced() {
    let f = scratch("Check (@eq_refl nat 400 : mult 20 20 = 400).\n");
    let path = f.path().to_str().unwrap();
    assert!(mtt(&["check", path]).status.success());
    let o = mtt(&["check", "--fuel-conv", "50", path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FuelExhausted"), "{}", stdout(&o));
}

#[test]
fn eval_prints_normal_forms() {
    let o = mtt(&["eval", "2 + 2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "4\n");
    assert_eq!(stdout(&mtt(&["eval", "oneg IntGroup"])), "zeroi\n");
    let bad = mtt(&["eval", "plus true"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).starts_with("<term>:1:"));
}

#[test]
fn eval_honours_printing_and_fuel_flags() {
    assert_eq!(stdout(&mtt(&["eval", "@eq_refl nat 2"])), "eq_refl 2\n");
    assert_eq!(stdout(&mtt(&["eval", "--explicit", "@eq_refl nat 2"])), "@eq_refl nat 2\n");
    let o = mtt(&["eval", "--fuel-conv", "10", "mult 10 10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FuelExhausted"), "{}", stdout(&o));
}
