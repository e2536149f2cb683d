//! Batches of attempts: prompting, verification, and the resume journal.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use ineqcomp_core::lean::{assemble_candidate, extract_code_block, render_statement_with, AssembleError, RenderOptions};
use ineqcomp_core::{render_prompt, Problem, PromptTask};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{Adapter, AdapterSpec};
use crate::verify::{EvalRecord, Verifier};

/// One model answer for one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub problem_id: String,
    pub attempt_id: usize,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub proof_text: String,
    /// Set when the adapter failed or its answer had no code block; the
    /// attempt is scored as a failure with this message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("workers must be at least 1")]
    Workers,
    #[error("journal {path}: {source}")]
    Journal { path: String, source: std::io::Error },
    #[error("journal {path} line {line}: {msg}")]
    JournalLine { path: String, line: usize, msg: String },
    #[error("duplicate attempt ({0}, {1})")]
    Duplicate(String, usize),
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub workers: usize,
    pub render: RenderOptions,
    pub journal: Option<PathBuf>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { workers: 1, render: RenderOptions::default(), journal: None }
    }
}

/// Runs `f` over `0..n` on at most `workers` threads, returning results in
/// index order.
fn pool<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.min(n).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().unwrap() = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
}

/// Renders the adapter's template for each problem and asks for
/// `spec.attempts` completions each. Failures become attempts with `error`.
pub fn collect_attempts(
    problems: &[Problem],
    adapter: &dyn Adapter,
    spec: &AdapterSpec,
    render: &RenderOptions,
    workers: usize,
    icl_proofs: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<Attempt>, BatchError> {
    if workers == 0 {
        return Err(BatchError::Workers);
    }
    let model = spec.model_label();
    let jobs: Vec<(usize, usize)> =
        (0..problems.len()).flat_map(|i| (0..spec.attempts).map(move |a| (i, a))).collect();
    let prompts: Vec<Result<String, String>> = problems
        .iter()
        .map(|p| {
            let stmt = render_statement_with(p, render).statement();
            let task = PromptTask::new(spec.template, stmt)
                .with_proofs(icl_proofs.get(p.id()).cloned().unwrap_or_default());
            render_prompt(&task).map_err(|e| e.to_string())
        })
        .collect();
    Ok(pool(jobs.len(), workers, |j| {
        let (i, a) = jobs[j];
        let p = &problems[i];
        let result = prompts[i].clone().and_then(|pr| adapter.complete(&pr).map_err(|e| format!("adapter: {e}")));
        let (proof_text, error) = match result {
            Ok(t) => {
                let err = match extract_code_block(&t) {
                    Ok(Some(_)) => None,
                    Ok(None) => Some(format!("extraction: {}", AssembleError::NoCodeBlock)),
                    Err(e) => Some(format!("extraction: {e}")),
                };
                (t, err)
            }
            Err(e) => (String::new(), Some(e)),
        };
        Attempt { problem_id: p.id().to_string(), attempt_id: a, model: model.clone(), proof_text, error }
    }))
}

/// Reads completed records. A torn final line from an interrupted run is
/// ignored; corruption anywhere else is an error.
pub fn read_journal(path: &Path) -> Result<Vec<EvalRecord>, BatchError> {
    let jerr = |source| BatchError::Journal { path: path.display().to_string(), source };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(jerr(e)),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(jerr)?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EvalRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if Some(i) == last => {}
            Err(e) => {
                return Err(BatchError::JournalLine { path: path.display().to_string(), line: i + 1, msg: e.to_string() })
            }
        }
    }
    Ok(out)
}

fn score(p: Option<&Problem>, a: &Attempt, render: &RenderOptions, verifier: &dyn Verifier) -> EvalRecord {
    let Some(p) = p else {
        return EvalRecord::failed(&a.problem_id, a.attempt_id, "unknown problem id");
    };
    if let Some(e) = &a.error {
        return EvalRecord::failed(&a.problem_id, a.attempt_id, e.clone());
    }
    match assemble_candidate(p, render, &a.proof_text) {
        Ok(art) => verifier.verify(&a.problem_id, a.attempt_id, &art),
        Err(e) => EvalRecord::failed(&a.problem_id, a.attempt_id, format!("extraction: {e}")),
    }
}

/// Verifies every attempt not already in the journal. The result holds one
/// record per attempt, sorted by (problem id, attempt).
pub fn run_batch(
    problems: &[Problem],
    attempts: &[Attempt],
    verifier: &dyn Verifier,
    opts: &BatchOptions,
) -> Result<Vec<EvalRecord>, BatchError> {
    if opts.workers == 0 {
        return Err(BatchError::Workers);
    }
    let mut seen = BTreeSet::new();
    for a in attempts {
        if !seen.insert((a.problem_id.as_str(), a.attempt_id)) {
            return Err(BatchError::Duplicate(a.problem_id.clone(), a.attempt_id));
        }
    }
    let index: BTreeMap<&str, &Problem> = problems.iter().map(|p| (p.id(), p)).collect();

    let mut done: BTreeMap<(String, usize), EvalRecord> = BTreeMap::new();
    let mut journal = None;
    if let Some(path) = &opts.journal {
        for r in read_journal(path)? {
            done.insert(r.key(), r);
        }
        let jerr = |source| BatchError::Journal { path: path.display().to_string(), source };
        // Drop a torn tail before appending.
        let mut f = File::create(path).map_err(jerr)?;
        for r in done.values() {
            writeln!(f, "{}", serde_json::to_string(r).expect("record serializes")).map_err(jerr)?;
        }
        f.flush().map_err(jerr)?;
        drop(f);
        journal = Some(Mutex::new(OpenOptions::new().append(true).open(path).map_err(jerr)?));
    }

    let todo: Vec<&Attempt> =
        attempts.iter().filter(|a| !done.contains_key(&(a.problem_id.clone(), a.attempt_id))).collect();
    let write_err = Mutex::new(None);
    let fresh = pool(todo.len(), opts.workers, |i| {
        let a = todo[i];
        let rec = score(index.get(a.problem_id.as_str()).copied(), a, &opts.render, verifier);
        if let Some(j) = &journal {
            let line = serde_json::to_string(&rec).expect("record serializes");
            let mut f = j.lock().unwrap();
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                write_err.lock().unwrap().get_or_insert(e);
            }
        }
        rec
    });
    if let Some(source) = write_err.into_inner().unwrap() {
        let path = opts.journal.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        return Err(BatchError::Journal { path, source });
    }
    let wanted: BTreeSet<(String, usize)> = attempts.iter().map(|a| (a.problem_id.clone(), a.attempt_id)).collect();
    let mut out: Vec<EvalRecord> = done.into_values().filter(|r| wanted.contains(&r.key())).collect();
    out.extend(fresh);
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

/// Parses attempts JSONL.
pub fn parse_attempts(text: &str) -> Result<Vec<Attempt>, BatchError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BatchError::Input(format!("attempts line {}: {e}", i + 1))))
        .collect()
}

/// Parses records JSONL.
pub fn parse_records(text: &str) -> Result<Vec<EvalRecord>, BatchError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BatchError::Input(format!("records line {}: {e}", i + 1))))
        .collect()
}
