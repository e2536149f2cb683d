//! Lean 4 statement rendering and candidate assembly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Node, Rational, VarId};
use crate::problem::{Condition, ConditionKind, Problem};

pub const PREAMBLE: &str =
    "import Mathlib\nimport Aesop\n\nset_option maxHeartbeats 0\n\nopen BigOperators Real Nat Topology Rat\n\n";

pub const PLACEHOLDER: &str = "by\n  sorry";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypStyle {
    /// `(hx : x > 0) (hy : y > 0)`
    #[default]
    PerVariable,
    /// `(hpos : x > 0 ∧ y > 0)`
    Conjunction,
}

impl std::str::FromStr for HypStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per-variable" => Ok(HypStyle::PerVariable),
            "conjunction" => Ok(HypStyle::Conjunction),
            _ => Err(format!("unknown hypothesis style {s:?} (per-variable|conjunction)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenderOptions {
    pub style: HypStyle,
    pub ascii: bool,
    /// Overrides the theorem name derived from the problem id.
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeanArtifact {
    pub preamble: String,
    pub name: String,
    /// `(x y : ℝ)` followed by every hypothesis binder.
    pub binders: Vec<String>,
    pub goal: String,
    pub proof: String,
}

impl LeanArtifact {
    /// `theorem name binders : goal :=`
    pub fn header(&self) -> String {
        let mut out = format!("theorem {}", self.name);
        for b in &self.binders {
            out.push(' ');
            out.push_str(b);
        }
        format!("{out} : {} :=", self.goal)
    }

    /// Header and proof, without the preamble.
    pub fn statement(&self) -> String {
        format!("{} {}\n", self.header(), self.proof)
    }

    pub fn file(&self) -> String {
        format!("{}{}", self.preamble, self.statement())
    }

    pub fn is_placeholder(&self) -> bool {
        self.proof == PLACEHOLDER
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssembleError {
    #[error("empty proof body")]
    Empty,
    #[error("no lean code block in candidate")]
    NoCodeBlock,
    #[error("unterminated code block")]
    Unterminated,
    #[error("candidate restates theorem {0} with a different statement")]
    StatementMismatch(String),
}

struct Symbols {
    real: &'static str,
    ge: &'static str,
    gt: &'static str,
    and: &'static str,
    ascii: bool,
}

impl Symbols {
    fn new(ascii: bool) -> Self {
        if ascii {
            Symbols { real: "Real", ge: ">=", gt: ">", and: "/\\", ascii }
        } else {
            Symbols { real: "ℝ", ge: "≥", gt: ">", and: "∧", ascii }
        }
    }

    fn subscript(&self, n: usize) -> String {
        if self.ascii {
            return n.to_string();
        }
        n.to_string()
            .chars()
            .map(|c| char::from_u32(0x2080 + c.to_digit(10).unwrap()).unwrap())
            .collect()
    }
}

const ATOM: u8 = 100;
const APP: u8 = 90;
const POW: u8 = 75;
const MUL: u8 = 70;
const ADD: u8 = 65;

struct Printer<'a> {
    sym: &'a Symbols,
}

impl Printer<'_> {
    fn level(&self, e: &Expr) -> u8 {
        match e.node() {
            Node::Var(_) | Node::Abs(_) => ATOM,
            Node::Const(c) => {
                if c.is_integer() {
                    ATOM
                } else {
                    MUL
                }
            }
            Node::Add(_) | Node::Sub(..) => ADD,
            Node::Mul(_) | Node::Div(..) => MUL,
            Node::PowNat(..) | Node::PowReal(..) | Node::Neg(_) => POW,
            Node::Sqrt(_) | Node::Exp(_) | Node::Log(_) | Node::Min(..) | Node::Max(..) => APP,
        }
    }

    fn wrap(&self, e: &Expr, need: u8) -> String {
        let s = self.expr(e);
        if self.level(e) < need {
            format!("({s})")
        } else {
            s
        }
    }

    fn int(&self, n: &num_bigint::BigInt) -> String {
        if n.is_negative() {
            format!("({n})")
        } else {
            n.to_string()
        }
    }

    /// `(3:ℝ)` or `(4:ℝ) / 7`.
    fn cast(&self, c: &Rational) -> String {
        let head = format!("({}:{})", c.numer(), self.sym.real);
        if c.denom().is_one() {
            head
        } else {
            format!("{head} / {}", c.denom())
        }
    }

    fn constant(&self, c: &Rational) -> String {
        if c.is_integer() {
            self.int(c.numer())
        } else {
            self.cast(c)
        }
    }

    fn chain(&self, xs: &[Expr], op: &str, same: fn(&Node) -> bool, lvl: u8) -> String {
        let mut out = String::new();
        for (i, x) in xs.iter().enumerate() {
            if i > 0 {
                write!(out, " {op} ").unwrap();
            }
            let need = if i == 0 && same(x.node()) { lvl } else { lvl + 1 };
            out.push_str(&self.wrap(x, need));
        }
        out
    }

    fn product(&self, xs: &[Expr]) -> String {
        let mut out = String::new();
        for (i, x) in xs.iter().enumerate() {
            if i > 0 {
                out.push_str(" * ");
            }
            let s = match (i, x.node()) {
                (0, Node::Const(c)) => self.cast(c),
                (_, Node::Const(c)) => format!("({})", self.constant(c)),
                (0, Node::Mul(_)) => self.wrap(x, MUL),
                _ => self.wrap(x, MUL + 1),
            };
            out.push_str(&s);
        }
        out
    }

    fn app(&self, f: &str, args: &[&Expr]) -> String {
        let mut out = f.to_string();
        for a in args {
            out.push(' ');
            out.push_str(&self.wrap(a, ATOM));
        }
        out
    }

    fn pow_base(&self, b: &Expr) -> String {
        match b.node() {
            Node::Const(c) => format!("({})", self.cast(c)),
            _ => self.wrap(b, ATOM),
        }
    }

    fn expr(&self, e: &Expr) -> String {
        match e.node() {
            Node::Var(v) => v.render(),
            Node::Const(c) => self.constant(c),
            Node::Add(xs) => self.chain(xs, "+", |n| matches!(n, Node::Add(_)), ADD),
            Node::Mul(xs) => self.product(xs),
            Node::Sub(l, r) => self.chain(&[l.clone(), r.clone()], "-", |n| matches!(n, Node::Sub(..)), ADD),
            Node::Div(l, r) => self.chain(&[l.clone(), r.clone()], "/", |n| matches!(n, Node::Div(..)), MUL),
            Node::PowNat(b, k) => format!("{} ^ {k}", self.pow_base(b)),
            Node::PowReal(b, q) => format!("{} ^ ({})", self.pow_base(b), self.cast(q)),
            Node::Sqrt(a) => self.app("Real.sqrt", &[a]),
            Node::Exp(a) => self.app("Real.exp", &[a]),
            Node::Log(a) => self.app("Real.log", &[a]),
            Node::Min(l, r) => self.app("min", &[l, r]),
            Node::Max(l, r) => self.app("max", &[l, r]),
            Node::Abs(a) => format!("|{}|", self.expr(a)),
            Node::Neg(a) => {
                let inner = if matches!(a.node(), Node::Neg(_)) {
                    format!("({})", self.expr(a))
                } else {
                    self.wrap(a, POW)
                };
                format!("-{inner}")
            }
        }
    }

    fn condition(&self, c: &Condition) -> String {
        let op = match c.kind {
            ConditionKind::Eq => "=",
            ConditionKind::Gt => self.sym.gt,
            ConditionKind::Ge => self.sym.ge,
        };
        format!("{} {op} {}", self.expr(&c.lhs), self.expr(&c.rhs))
    }
}

/// Renders an expression as Lean source.
pub fn render_expr(e: &Expr, ascii: bool) -> String {
    Printer { sym: &Symbols::new(ascii) }.expr(e)
}

fn theorem_name(id: &str) -> String {
    let mut s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if !s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s.insert_str(0, "thm_");
    }
    s
}

fn claim(taken: &mut BTreeSet<String>, base: String) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push('\'');
    }
    taken.insert(name.clone());
    name
}

pub fn render_statement(p: &Problem) -> LeanArtifact {
    render_statement_with(p, &RenderOptions::default())
}

pub fn render_statement_with(p: &Problem, opts: &RenderOptions) -> LeanArtifact {
    let sym = Symbols::new(opts.ascii);
    let pr = Printer { sym: &sym };
    let names: Vec<String> = p.variables().iter().map(VarId::render).collect();
    let mut taken: BTreeSet<String> = names.iter().cloned().collect();
    let mut binders = Vec::new();
    if !names.is_empty() {
        binders.push(format!("({} : {})", names.join(" "), sym.real));
    }
    match opts.style {
        _ if names.is_empty() => {}
        HypStyle::PerVariable => {
            for n in &names {
                let h = claim(&mut taken, format!("h{n}"));
                binders.push(format!("({h} : {n} > 0)"));
            }
        }
        HypStyle::Conjunction => {
            let h = claim(&mut taken, "hpos".to_string());
            let body: Vec<String> = names.iter().map(|n| format!("{n} > 0")).collect();
            binders.push(format!("({h} : {})", body.join(&format!(" {} ", sym.and))));
        }
    }
    for (i, c) in p.conditions().iter().enumerate() {
        let h = claim(&mut taken, format!("h{}", sym.subscript(i)));
        binders.push(format!("({h} : {})", pr.condition(c)));
    }
    let mut lhs = pr.expr(p.lhs());
    if p.lhs().free_vars().is_empty() && p.rhs().free_vars().is_empty() {
        lhs = format!("({lhs} : {})", sym.real);
    }
    let goal = format!("{lhs} {} {}", sym.ge, pr.expr(p.rhs()));
    LeanArtifact {
        preamble: PREAMBLE.to_string(),
        name: opts.name.clone().unwrap_or_else(|| theorem_name(p.id())),
        binders,
        goal,
        proof: PLACEHOLDER.to_string(),
    }
}

/// First fenced code block, with or without a language tag.
pub fn extract_code_block(text: &str) -> Result<Option<String>, AssembleError> {
    let Some(start) = text.find("```") else {
        return Ok(None);
    };
    let after = &text[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).ok_or(AssembleError::Unterminated)?;
    let body = &after[body_start..];
    let end = body.find("```").ok_or(AssembleError::Unterminated)?;
    Ok(Some(body[..end].trim_end().to_string()))
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Builds a checkable file from a proof body or a raw model answer. A bare
/// body (`by ...`) replaces the placeholder. Text containing a code fence is
/// reduced to its first code block, which must restate the theorem header
/// unchanged; it is used as the file, after the preamble if it has none.
pub fn assemble_candidate(p: &Problem, opts: &RenderOptions, candidate: &str) -> Result<LeanArtifact, AssembleError> {
    if candidate.trim().is_empty() {
        return Err(AssembleError::Empty);
    }
    let mut art = render_statement_with(p, opts);
    match extract_code_block(candidate)? {
        None => {
            let body = candidate.trim();
            if body.contains("theorem ") || body.contains("lemma ") {
                return Err(AssembleError::NoCodeBlock);
            }
            art.proof = body.to_string();
            Ok(art)
        }
        Some(code) => {
            let header = squash(&art.header());
            let flat = squash(&code);
            if !flat.contains(&header) {
                return Err(AssembleError::StatementMismatch(art.name.clone()));
            }
            let pos = code.find("theorem").unwrap_or(0);
            let (prefix, rest) = code.split_at(pos);
            if !prefix.contains("import Mathlib") {
                art.preamble = format!("{PREAMBLE}{prefix}");
            } else {
                art.preamble = prefix.to_string();
            }
            // The header is kept as rendered; the remainder after `:=` is
            // the proof.
            let idx = index_after_header(rest, &header).ok_or_else(|| AssembleError::StatementMismatch(art.name.clone()))?;
            let proof = rest[idx..].trim();
            if proof.is_empty() {
                return Err(AssembleError::Empty);
            }
            art.proof = proof.to_string();
            Ok(art)
        }
    }
}

/// Byte offset in `text` just past the whitespace-insensitive match of
/// `squashed` at its start.
fn index_after_header(text: &str, squashed: &str) -> Option<usize> {
    let mut want = squashed.chars().peekable();
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            continue;
        }
        if want.next()? != c {
            return None;
        }
        if want.peek().is_none() {
            return Some(i + c.len_utf8());
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub theorem: String,
}

/// Writes one `.lean` file per problem into `dir`, returning the manifest.
pub fn emit_files(problems: &[Problem], dir: &Path, opts: &RenderOptions) -> io::Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(problems.len());
    for p in problems {
        let art = render_statement_with(p, &RenderOptions { name: None, ..opts.clone() });
        let file = format!("{}.lean", art.name);
        fs::write(dir.join(&file), art.file())?;
        out.push(ManifestEntry { id: p.id().to_string(), path: file, theorem: art.name });
    }
    Ok(out)
}
