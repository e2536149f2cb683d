//! Inequality problems, a guarded transformation calculus over them, Lean 4
//! emission and a sampling oracle for numeric validity.

pub mod bundled;
pub mod corpus;
pub mod expr;
pub mod generator;
pub mod lean;
pub mod oracle;
pub mod problem;
pub mod prompt;
pub mod transforms;

pub use corpus::{parse_corpus, parse_problem, serialize_corpus, serialize_problem, ParseError};
pub use expr::{EvalFault, Expr, Node, Rational, VarId};
pub use problem::{Category, Condition, ConditionKind, Family, ParentRef, Problem, Step};
pub use oracle::{check_problem, sample_feasible, SampleReport};
pub use lean::{assemble_candidate, render_statement, LeanArtifact};
pub use prompt::{render_prompt, PromptTask, Template};
pub use generator::{expand_simp, filter_eligible, generate_mix, make_ft_corpus, GenConfig, SeedSplit};
