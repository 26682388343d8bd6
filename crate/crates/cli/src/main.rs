use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mtt_core::driver::{eval_term, load_prelude, run_source, RunOptions};
use mtt_core::{ElabOptions, Environment, TraceKind};

#[derive(Parser)]
#[command(name = "mtt", version, about = "Type checker for .mtt developments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Extra prelude files, loaded in order after the default prelude.
    #[arg(long = "prelude", value_name = "PATH")]
    preludes: Vec<PathBuf>,
    /// Do not load the shipped prelude.
    #[arg(long)]
    no_default_prelude: bool,
    /// Fuel for conversion checking in the kernel.
    #[arg(long, value_name = "N")]
    fuel_conv: Option<u64>,
    /// Fuel for unification.
    #[arg(long, value_name = "N")]
    fuel_unify: Option<u64>,
    /// Print implicit arguments and coercions.
    #[arg(long)]
    explicit: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check files, printing command output, diagnostics and a summary.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Emit trace records as NDJSON on stderr.
        #[arg(long, value_enum, value_name = "KIND")]
        trace: Option<TraceSel>,
        /// Keep checking a file after a failing command.
        #[arg(long)]
        keep_going: bool,
        /// Omit timings so that runs are byte-identical.
        #[arg(long)]
        deterministic: bool,
    },
    /// Elaborate a term and print its normal form.
    Eval {
        term: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceSel {
    Elab,
    Unify,
    All,
}

impl TraceSel {
    fn kinds(self) -> &'static [TraceKind] {
        match self {
            TraceSel::Elab => &[TraceKind::Elab],
            TraceSel::Unify => &[TraceKind::Unify],
            TraceSel::All => &[TraceKind::Unify, TraceKind::Elab],
        }
    }
}

enum Failure {
    Check,
    Usage,
}

fn elab_options(common: &Common, trace: bool) -> ElabOptions {
    let mut o = ElabOptions { trace, explicit: common.explicit, ..ElabOptions::default() };
    if let Some(n) = common.fuel_conv {
        o.fuel_conv = n;
    }
    if let Some(n) = common.fuel_unify {
        o.fuel_unify = n;
    }
    o
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: IoError: {e}", path.display());
        Failure::Usage
    })
}

fn base_env(common: &Common, opts: &RunOptions, deterministic: bool) -> Result<Environment, Failure> {
    let mut env = if common.no_default_prelude {
        Environment::new()
    } else {
        load_prelude().map_err(|r| {
            print!("{}", r.render(deterministic));
            Failure::Check
        })?
    };
    let opts = RunOptions { keep_going: false, ..*opts };
    for p in &common.preludes {
        let src = read(p)?;
        let r = run_source(&mut env, &p.display().to_string(), &src, &opts);
        if !r.is_ok() {
            print!("{}", r.render(deterministic));
            return Err(Failure::Check);
        }
    }
    Ok(env)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Check { files, common, trace, keep_going, deterministic } => {
            let opts = RunOptions { elab: elab_options(&common, trace.is_some()), keep_going };
            let base = base_env(
                &common,
                &RunOptions { elab: ElabOptions { trace: false, ..opts.elab }, ..opts },
                deterministic,
            )?;
            let mut ok = true;
            let stdout = std::io::stdout();
            let stderr = std::io::stderr();
            for f in &files {
                let src = read(f)?;
                let mut env = base.clone();
                let report = run_source(&mut env, &f.display().to_string(), &src, &opts);
                ok &= report.is_ok();
                if let Some(sel) = trace {
                    let _ = stderr.lock().write_all(report.trace_ndjson(sel.kinds()).as_bytes());
                }
                let _ = stdout.lock().write_all(report.render(deterministic).as_bytes());
            }
            if ok {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Cmd::Eval { term, common } => {
            let opts = RunOptions { elab: elab_options(&common, false), keep_going: false };
            let env = base_env(&common, &opts, true)?;
            match eval_term(&env, &term, &opts.elab) {
                Ok(s) => {
                    println!("{s}");
                    Ok(())
                }
                Err(d) => {
                    println!("{}", d.render("<term>"));
                    Err(Failure::Check)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage) => ExitCode::from(2),
    }
}
