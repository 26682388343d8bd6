//! Shared helpers for the integration tests: corpus discovery and runs.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mtt_core::driver::{prelude, run_source, FileReport, RunOptions};
use mtt_core::Environment;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("repository root")
}

/// `.mtt` files directly in `dir` (relative to the repository root), sorted.
pub fn mtt_files(dir: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(repo_root().join(dir))
        .expect("corpus directory")
        .map(|e| e.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "mtt"))
        .collect();
    files.sort();
    files
}

/// Path as printed in diagnostics: relative to the repository root.
pub fn display_path(p: &Path) -> String {
    p.strip_prefix(repo_root()).unwrap_or(p).display().to_string()
}

/// Runs a file on top of the shipped prelude; returns the report and the
/// final environment.
pub fn run_file(p: &Path, opts: &RunOptions) -> (FileReport, Environment) {
    let src = std::fs::read_to_string(p).expect("readable corpus file");
    let mut env = prelude().clone();
    let report = run_source(&mut env, &display_path(p), &src, opts);
    (report, env)
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(repo_root().join(name)).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}
