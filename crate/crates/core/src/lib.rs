//! A small dependent type theory kernel with an elaborator that infers
//! implicit arguments, inserts coercions and resolves canonical structures.

pub mod diag;
pub mod driver;
pub mod elab;
pub mod env;
pub mod kernel;
pub mod pretty;
pub mod surface;
pub mod term;
pub mod trace;
pub mod unify;

pub use diag::{Category, Diagnostic, Span};
pub use driver::{eval_term, load_prelude, prelude, run_source, CommandOutcome, FileReport, RunOptions};
pub use elab::{process_command, CheckedTerm, CommandResult, ElabOptions, Elaborator};
pub use env::{CoercionClass, ConstInfo, ConstKind, DeclError, Declaration, Environment};
pub use kernel::{Context, Kernel, KernelError, MetaView, NoMetas, ReductionFlags};
pub use term::{head_key, BinderName, HeadKey, Level, MetaId, Name, Term};
pub use trace::{TraceKind, TraceRecord};
pub use unify::{Constraint, Direction, ElabState, MetaOrigin, MetaReason, UnifyError};
