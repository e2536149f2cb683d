//! Compile-based verification of prover attempts, batch running with a
//! resume journal, and pass@k scoring.

pub mod adapter;
pub mod batch;
pub mod report;
pub mod score;
pub mod verify;

pub use adapter::{Adapter, AdapterError, AdapterKind, AdapterSpec, CommandAdapter, HttpAdapter, HttpStyle};
pub use batch::{collect_attempts, run_batch, Attempt, BatchError, BatchOptions};
pub use report::{format_cell, render_table, Cell, Report};
pub use score::{dispersion, pass_at_k, PassAtN, ScoreError};
pub use verify::{verify, EvalRecord, LeanVerifier, Mode, Toolchain, Verifier, VerifyError, DEFAULT_TIMEOUT};
