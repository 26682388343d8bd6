//! Running whole files: parsing command by command against a growing
//! environment, collecting outputs, diagnostics and traces.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use crate::diag::{Diagnostic, Span};
use crate::elab::{process_command, CheckedTerm, ElabOptions};
use crate::env::Environment;
use crate::surface::{parse_term, Command, ParsedCommand, Source};
use crate::trace::{TraceKind, TraceRecord};

/// The prelude shipped with the checker, in load order.
pub const PRELUDE: &[(&str, &str)] = &[
    ("prelude/01_logic.mtt", include_str!("../../../prelude/01_logic.mtt")),
    ("prelude/02_nat.mtt", include_str!("../../../prelude/02_nat.mtt")),
    ("prelude/03_group.mtt", include_str!("../../../prelude/03_group.mtt")),
    ("prelude/04_eqtype.mtt", include_str!("../../../prelude/04_eqtype.mtt")),
    ("prelude/05_list.mtt", include_str!("../../../prelude/05_list.mtt")),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub elab: ElabOptions,
    /// Continue past failing commands instead of aborting the file.
    pub keep_going: bool,
}

#[derive(Clone, Debug)]
pub struct CommandOutcome {
    pub keyword: &'static str,
    pub span: Span,
    pub output: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
    pub checked: Vec<CheckedTerm>,
}

impl CommandOutcome {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct FileReport {
    pub path: String,
    pub commands: Vec<CommandOutcome>,
    /// Errors not attached to a command (lexing, unterminated input).
    pub diagnostics: Vec<Diagnostic>,
    pub trace: Vec<TraceRecord>,
    pub steps: u64,
    pub elapsed: Duration,
}

impl FileReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty() && self.commands.iter().all(CommandOutcome::is_ok)
    }

    pub fn all_diagnostics(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().chain(self.commands.iter().flat_map(|c| &c.diagnostics))
    }

    pub fn checked(&self) -> impl Iterator<Item = &CheckedTerm> {
        self.commands.iter().flat_map(|c| &c.checked)
    }

    /// Outputs and rendered diagnostics in command order, then a summary.
    /// Timing is omitted when `deterministic`.
    pub fn render(&self, deterministic: bool) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&d.render(&self.path));
            out.push('\n');
        }
        for c in &self.commands {
            for line in &c.output {
                out.push_str(line);
                out.push('\n');
            }
            for d in &c.diagnostics {
                out.push_str(&d.render(&self.path));
                out.push('\n');
            }
        }
        out.push_str(&self.summary(deterministic));
        out.push('\n');
        out
    }

    pub fn summary(&self, deterministic: bool) -> String {
        let status = if self.is_ok() { "ok" } else { "failed" };
        let n = self.commands.len();
        let mut s = format!(
            "{}: {status} ({n} command{}, {} unification step{}",
            self.path,
            if n == 1 { "" } else { "s" },
            self.steps,
            if self.steps == 1 { "" } else { "s" },
        );
        if !deterministic {
            s.push_str(&format!(", {:.1} ms", self.elapsed.as_secs_f64() * 1000.0));
        }
        s.push(')');
        s
    }

    /// Trace records of the selected kinds as NDJSON.
    pub fn trace_ndjson(&self, kinds: &[TraceKind]) -> String {
        self.trace.iter().filter(|r| kinds.contains(&r.kind)).map(|r| r.to_json() + "\n").collect()
    }
}

/// Runs `src` against `env`, which is extended with every successful
/// declaration.
pub fn run_source(env: &mut Environment, path: &str, src: &str, opts: &RunOptions) -> FileReport {
    let started = Instant::now();
    let mut report = FileReport {
        path: path.to_string(),
        commands: Vec::new(),
        diagnostics: Vec::new(),
        trace: Vec::new(),
        steps: 0,
        elapsed: Duration::ZERO,
    };
    let source = Source::new(src);
    let ranges = match source.commands() {
        Ok(r) => r,
        Err(e) => {
            report.diagnostics.push(Diagnostic::new(e.category, e.span, e.message));
            report.elapsed = started.elapsed();
            return report;
        }
    };
    for range in ranges {
        let outcome = match source.parse(range, &env.operators()) {
            Err(e) => CommandOutcome {
                keyword: "",
                span: e.span,
                output: Vec::new(),
                diagnostics: vec![Diagnostic::new(e.category, e.span, e.message)],
                checked: Vec::new(),
            },
            Ok(cmd) => {
                let r = process_command(env, &cmd, &opts.elab);
                report.trace.extend(r.trace);
                report.steps += r.steps;
                CommandOutcome {
                    keyword: cmd.cmd.keyword(),
                    span: cmd.span,
                    output: r.output,
                    diagnostics: r.diagnostics,
                    checked: r.checked,
                }
            }
        };
        let failed = !outcome.is_ok();
        report.commands.push(outcome);
        if failed && !opts.keep_going {
            break;
        }
    }
    report.elapsed = started.elapsed();
    report
}

/// Loads the shipped prelude into a fresh environment.
pub fn load_prelude() -> Result<Environment, FileReport> {
    let mut env = Environment::new();
    for (path, src) in PRELUDE {
        let r = run_source(&mut env, path, src, &RunOptions::default());
        if !r.is_ok() {
            return Err(r);
        }
    }
    Ok(env)
}

/// The shipped prelude, loaded once per process.
///
/// # Panics
/// If the shipped prelude does not check.
pub fn prelude() -> &'static Environment {
    static PRELUDE_ENV: OnceLock<Environment> = OnceLock::new();
    PRELUDE_ENV.get_or_init(|| match load_prelude() {
        Ok(env) => env,
        Err(r) => panic!("the shipped prelude does not check:\n{}", r.render(true)),
    })
}

/// Elaborates a standalone term and prints its kernel normal form.
pub fn eval_term(env: &Environment, text: &str, opts: &ElabOptions) -> Result<String, Diagnostic> {
    let term = parse_term(text, &env.operators()).map_err(|e| Diagnostic::new(e.category, e.span, e.message))?;
    let cmd = ParsedCommand { span: term.span, cmd: Command::Eval(term) };
    let mut scratch = env.clone();
    let mut res = process_command(&mut scratch, &cmd, opts);
    if res.diagnostics.is_empty() {
        Ok(res.output.join("\n"))
    } else {
        Err(res.diagnostics.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::Category;

    #[test]
    fn prelude_checks() {
        if let Err(r) = load_prelude() {
            panic!("{}", r.render(true));
        }
    }

    #[test]
    fn empty_file_is_ok() {
        let mut env = prelude().clone();
        let r = run_source(&mut env, "empty.mtt", "", &RunOptions::default());
        assert!(r.is_ok());
        assert!(r.commands.is_empty());
    }

    #[test]
    fn eval_examples() {
        let env = prelude();
        let o = ElabOptions::default();
        assert_eq!(eval_term(env, "2 + 2", &o).unwrap(), "4");
        assert_eq!(eval_term(env, "oneg IntGroup", &o).unwrap(), "zeroi");
        assert_eq!(eval_term(env, "fun x : nat => x", &o).unwrap(), "fun x : nat => x");
        let tight = ElabOptions { fuel_conv: 10, ..o };
        assert_eq!(eval_term(env, "mult 10 10", &tight).unwrap_err().category, Category::FuelExhausted);
    }
}
