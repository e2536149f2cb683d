//! Compiling candidate files with a Lean toolchain.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use ineqcomp_core::LeanArtifact;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
const EXCERPT_LINES: usize = 20;
const SORRY_WARNING: &str = "declaration uses 'sorry'";

/// One verified attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub problem_id: String,
    pub attempt: usize,
    pub compiled: bool,
    pub wall_time: f64,
    pub error: String,
    pub timeout: bool,
}

impl EvalRecord {
    pub fn failed(problem_id: &str, attempt: usize, error: impl Into<String>) -> Self {
        EvalRecord {
            problem_id: problem_id.to_string(),
            attempt,
            compiled: false,
            wall_time: 0.0,
            error: error.into(),
            timeout: false,
        }
    }

    pub fn key(&self) -> (String, usize) {
        (self.problem_id.clone(), self.attempt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// A placeholder proof counts as failure.
    #[default]
    Proof,
    /// Only elaboration of the statement matters.
    Statement,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("no Lean toolchain configured (set {LEAN_ENV} or {PROJECT_ENV})")]
    ToolchainMissing,
    #[error("toolchain at {path}: {source}")]
    Launch { path: String, source: std::io::Error },
    #[error("workspace: {0}")]
    Io(#[from] std::io::Error),
}

pub const LEAN_ENV: &str = "INEQCOMP_LEAN";
pub const PROJECT_ENV: &str = "INEQCOMP_LEAN_PROJECT";
pub const MATHLIB_ENV: &str = "INEQCOMP_MATHLIB_REV";

/// How to invoke Lean. With a project directory the file is checked through
/// `lake env lean` inside it so the project's pinned Mathlib is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchain {
    pub lean: PathBuf,
    #[serde(default)]
    pub project: Option<PathBuf>,
    #[serde(default)]
    pub mathlib_rev: Option<String>,
}

impl Toolchain {
    pub fn from_env() -> Option<Self> {
        let project = std::env::var_os(PROJECT_ENV).map(PathBuf::from);
        let lean = std::env::var_os(LEAN_ENV).map(PathBuf::from);
        let mathlib_rev = std::env::var(MATHLIB_ENV).ok();
        match (lean, project) {
            (Some(lean), project) => Some(Toolchain { lean, project, mathlib_rev }),
            (None, Some(project)) => Some(Toolchain { lean: PathBuf::from("lake"), project: Some(project), mathlib_rev }),
            (None, None) => None,
        }
    }

    fn command(&self, file: &Path) -> Command {
        let uses_lake = self.lean.file_name().is_some_and(|n| n == "lake");
        let mut cmd = Command::new(&self.lean);
        if uses_lake {
            cmd.args(["env", "lean"]);
        }
        cmd.arg(file);
        if let Some(dir) = &self.project {
            cmd.current_dir(dir);
        }
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        cmd
    }

    /// The Mathlib revision: explicit, else read from the project manifest.
    pub fn mathlib_pin(&self) -> Option<String> {
        if let Some(r) = &self.mathlib_rev {
            return Some(r.clone());
        }
        let manifest = std::fs::read_to_string(self.project.as_ref()?.join("lake-manifest.json")).ok()?;
        let v: serde_json::Value = serde_json::from_str(&manifest).ok()?;
        v["packages"]
            .as_array()?
            .iter()
            .find(|p| p["name"] == "mathlib")
            .and_then(|p| p["rev"].as_str())
            .map(str::to_string)
    }
}

fn drain<R: Read + Send + 'static>(r: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut s = String::new();
        if let Some(mut r) = r {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            s = String::from_utf8_lossy(&buf).into_owned();
        }
        s
    })
}

/// Kills the child's whole process group.
fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    let _ = Command::new("kill").args(["-KILL", "--", &format!("-{}", child.id())]).status();
    let _ = child.kill();
    let _ = child.wait();
}

fn excerpt(text: &str) -> String {
    text.lines().filter(|l| !l.trim().is_empty()).take(EXCERPT_LINES).collect::<Vec<_>>().join("\n")
}

/// Compiles one artifact in a fresh temporary directory.
pub fn verify(
    problem_id: &str,
    attempt: usize,
    artifact: &LeanArtifact,
    toolchain: &Toolchain,
    timeout: Duration,
    mode: Mode,
) -> Result<EvalRecord, VerifyError> {
    let dir = tempfile::tempdir()?;
    let file = dir.path().join("Candidate.lean");
    std::fs::File::create(&file)?.write_all(artifact.file().as_bytes())?;
    let start = Instant::now();
    let mut child = toolchain
        .command(&file)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| VerifyError::Launch { path: toolchain.lean.display().to_string(), source })?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let status = match child.wait_timeout(timeout)? {
        Some(s) => Some(s),
        None => {
            kill_tree(&mut child);
            None
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    let text = format!("{}{}", out.join().unwrap_or_default(), err.join().unwrap_or_default());
    let mut rec = EvalRecord {
        problem_id: problem_id.to_string(),
        attempt,
        compiled: false,
        wall_time,
        error: String::new(),
        timeout: false,
    };
    match status {
        None => {
            rec.timeout = true;
            rec.error = format!("timed out after {}s", timeout.as_secs_f64());
        }
        Some(s) => {
            let sorry = text.contains(SORRY_WARNING);
            rec.compiled = s.success() && (mode == Mode::Statement || !sorry);
            if !rec.compiled {
                rec.error = if s.success() && sorry { SORRY_WARNING.to_string() } else { excerpt(&text) };
                if rec.error.is_empty() {
                    rec.error = format!("lean exited with {s}");
                }
            }
        }
    }
    Ok(rec)
}

/// Something that turns an artifact into a record.
pub trait Verifier: Sync {
    fn verify(&self, problem_id: &str, attempt: usize, artifact: &LeanArtifact) -> EvalRecord;
}

#[derive(Debug, Clone)]
pub struct LeanVerifier {
    pub toolchain: Toolchain,
    pub timeout: Duration,
    pub mode: Mode,
}

impl Verifier for LeanVerifier {
    fn verify(&self, problem_id: &str, attempt: usize, artifact: &LeanArtifact) -> EvalRecord {
        verify(problem_id, attempt, artifact, &self.toolchain, self.timeout, self.mode)
            .unwrap_or_else(|e| EvalRecord::failed(problem_id, attempt, e.to_string()))
    }
}
