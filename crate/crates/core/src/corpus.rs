//! Corpus JSONL codec.
//!
//! Expressions are `{"op": ..., "args": [...]}` trees. Constants carry
//! `[numerator, denominator]`, variables `[base, index]`, `pown` a natural
//! exponent and `powr` a rational exponent as two integers.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::expr::{Expr, Node, Rational, VarId};
use crate::problem::{Category, Condition, ConditionKind, Problem, ProblemError, Step};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("record {id}: field `{field}`: {message}")]
    Schema {
        id: String,
        field: String,
        message: String,
    },
    #[error("record {id}: {source}")]
    Semantic { id: String, source: ProblemError },
    #[error("record {id}: integer parameter `{name}` cannot be represented")]
    IntegerParameter { id: String, name: String },
    #[error("record {id}: variable-arity family cannot be represented")]
    VariableArity { id: String },
    #[error("record {id}: variable {var} lacks the positivity assumption")]
    BasicAssumption { id: String, var: String },
}

impl ParseError {
    pub fn record_id(&self) -> Option<&str> {
        match self {
            ParseError::Json(_) => None,
            ParseError::Schema { id, .. }
            | ParseError::Semantic { id, .. }
            | ParseError::IntegerParameter { id, .. }
            | ParseError::VariableArity { id }
            | ParseError::BasicAssumption { id, .. } => Some(id),
        }
    }
}

struct Ctx<'a> {
    id: &'a str,
}

impl Ctx<'_> {
    fn err(&self, field: &str, message: impl fmt::Display) -> ParseError {
        ParseError::Schema {
            id: self.id.to_string(),
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}

/// Parses one corpus record.
pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
    problem_from_value(&value)
}

pub fn problem_from_value(value: &Value) -> Result<Problem, ParseError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::Json("record is not a JSON object".into()))?;
    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.as_str(),
        _ => {
            return Err(ParseError::Schema {
                id: "<unknown>".into(),
                field: "id".into(),
                message: "missing or not a nonempty string".into(),
            })
        }
    };
    let ctx = Ctx { id };

    if let Some(params) = obj.get("params") {
        let name = params
            .as_array()
            .and_then(|a| a.first())
            .and_then(Value::as_str)
            .or_else(|| params.as_object().and_then(|o| o.keys().next().map(String::as_str)))
            .unwrap_or("n");
        return Err(ParseError::IntegerParameter {
            id: id.to_string(),
            name: name.to_string(),
        });
    }
    if obj.get("variadic").is_some_and(|v| v != &Value::Bool(false)) {
        return Err(ParseError::VariableArity { id: id.to_string() });
    }

    let category: Category = obj
        .get("category")
        .and_then(Value::as_str)
        .ok_or_else(|| ctx.err("category", "missing or not a string"))?
        .parse()
        .map_err(|e: String| ctx.err("category", e))?;

    let vars_json = obj
        .get("variables")
        .and_then(Value::as_array)
        .ok_or_else(|| ctx.err("variables", "missing or not an array"))?;
    let mut variables = Vec::with_capacity(vars_json.len());
    for (i, vj) in vars_json.iter().enumerate() {
        let field = format!("variables[{i}]");
        let vo = vj
            .as_object()
            .ok_or_else(|| ctx.err(&field, "not an object"))?;
        let base = vo
            .get("base")
            .and_then(Value::as_str)
            .ok_or_else(|| ctx.err(&format!("{field}.base"), "missing or not a string"))?;
        let idx = match vo.get("idx") {
            None => 0,
            Some(v) => v
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| ctx.err(&format!("{field}.idx"), "not a natural number"))?,
        };
        if !VarId::valid_base(base) {
            return Err(ctx.err(&format!("{field}.base"), format!("invalid base `{base}`")));
        }
        let var = VarId::new(base, idx);
        match vo.get("positive") {
            None | Some(Value::Bool(true)) => {}
            Some(Value::Bool(false)) => {
                return Err(ParseError::BasicAssumption {
                    id: id.to_string(),
                    var: var.render(),
                })
            }
            Some(_) => return Err(ctx.err(&format!("{field}.positive"), "not a boolean")),
        }
        variables.push(var);
    }

    let conds_json = match obj.get("conditions") {
        None => &[][..],
        Some(v) => v
            .as_array()
            .ok_or_else(|| ctx.err("conditions", "not an array"))?
            .as_slice(),
    };
    let mut conditions = Vec::with_capacity(conds_json.len());
    for (i, cj) in conds_json.iter().enumerate() {
        let field = format!("conditions[{i}]");
        let co = cj
            .as_object()
            .ok_or_else(|| ctx.err(&field, "not an object"))?;
        let kind = match co.get("kind").and_then(Value::as_str) {
            Some("eq") => ConditionKind::Eq,
            Some("gt") => ConditionKind::Gt,
            Some("ge") => ConditionKind::Ge,
            Some(other) => {
                return Err(ctx.err(&format!("{field}.kind"), format!("unknown kind `{other}`")))
            }
            None => return Err(ctx.err(&format!("{field}.kind"), "missing")),
        };
        let lhs = expr_field(&ctx, co.get("lhs"), &format!("{field}.lhs"))?;
        let rhs = expr_field(&ctx, co.get("rhs"), &format!("{field}.rhs"))?;
        conditions.push(Condition::new(kind, lhs, rhs));
    }

    let lhs = expr_field(&ctx, obj.get("lhs"), "lhs")?;
    let rhs = expr_field(&ctx, obj.get("rhs"), "rhs")?;
    let rhs_positive = obj
        .get("rhs_positive")
        .and_then(Value::as_bool)
        .ok_or_else(|| ctx.err("rhs_positive", "missing or not a boolean"))?;
    let provenance: Vec<Step> = match obj.get("provenance") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| ctx.err("provenance", e))?,
    };

    let problem = Problem::new(id, category, variables, conditions, lhs, rhs, rhs_positive)
        .map_err(|source| ParseError::Semantic {
            id: id.to_string(),
            source,
        })?;
    Ok(problem.with_provenance(provenance))
}

fn expr_field(ctx: &Ctx<'_>, v: Option<&Value>, field: &str) -> Result<Expr, ParseError> {
    let v = v.ok_or_else(|| ctx.err(field, "missing"))?;
    expr_from_value(v).map_err(|(path, msg)| {
        let full = if path.is_empty() {
            field.to_string()
        } else {
            format!("{field}{path}")
        };
        ctx.err(&full, msg)
    })
}

type ExprErr = (String, String);

fn at<T>(r: Result<T, ExprErr>, step: &str) -> Result<T, ExprErr> {
    r.map_err(|(p, m)| (format!("{step}{p}"), m))
}

/// Decodes one expression tree. Errors carry a JSON path suffix.
pub fn expr_from_value(v: &Value) -> Result<Expr, ExprErr> {
    let obj = v
        .as_object()
        .ok_or_else(|| (String::new(), "expression is not an object".to_string()))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| (String::new(), "missing `op`".to_string()))?;
    let args = obj
        .get("args")
        .and_then(Value::as_array)
        .ok_or_else(|| (String::new(), "missing `args` array".to_string()))?;
    let arity = |n: usize| -> Result<(), ExprErr> {
        if args.len() == n {
            Ok(())
        } else {
            Err((
                ".args".into(),
                format!("`{op}` takes {n} arguments, got {}", args.len()),
            ))
        }
    };
    let sub = |i: usize| at(expr_from_value(&args[i]), &format!(".args[{i}]"));
    let bad = |e: crate::expr::ExprError| (String::new(), e.to_string());

    let expr = match op {
        "var" => {
            arity(2)?;
            let base = args[0]
                .as_str()
                .ok_or_else(|| (".args[0]".to_string(), "variable base must be a string".into()))?;
            let idx = args[1]
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| (".args[1]".to_string(), "index must be a natural".into()))?;
            Expr::new(Node::Var(VarId::new(base, idx))).map_err(bad)?
        }
        "const" => {
            arity(2)?;
            let num = big_from_value(&args[0]).map_err(|m| (".args[0]".to_string(), m))?;
            let den = big_from_value(&args[1]).map_err(|m| (".args[1]".to_string(), m))?;
            if den.is_zero() {
                return Err((".args[1]".into(), "zero denominator".into()));
            }
            Expr::constant(Rational::new(num, den))
        }
        "add" | "mul" => {
            let xs = (0..args.len()).map(sub).collect::<Result<Vec<_>, _>>()?;
            let node = if op == "add" {
                Node::Add(xs)
            } else {
                Node::Mul(xs)
            };
            Expr::new(node).map_err(bad)?
        }
        "sub" | "div" | "min" | "max" => {
            arity(2)?;
            let (l, r) = (sub(0)?, sub(1)?);
            match op {
                "sub" => Expr::sub(l, r),
                "div" => Expr::div(l, r).map_err(bad)?,
                "min" => Expr::min(l, r),
                _ => Expr::max(l, r),
            }
        }
        "pown" => {
            arity(2)?;
            let k = args[1]
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| (".args[1]".to_string(), "exponent must be a natural".into()))?;
            Expr::pow_nat(sub(0)?, k).map_err(bad)?
        }
        "powr" => {
            arity(3)?;
            let num = big_from_value(&args[1]).map_err(|m| (".args[1]".to_string(), m))?;
            let den = big_from_value(&args[2]).map_err(|m| (".args[2]".to_string(), m))?;
            if den.is_zero() {
                return Err((".args[2]".into(), "zero denominator".into()));
            }
            Expr::pow_real(sub(0)?, Rational::new(num, den))
        }
        "sqrt" | "exp" | "log" | "abs" | "neg" => {
            arity(1)?;
            let a = sub(0)?;
            match op {
                "sqrt" => Expr::sqrt(a),
                "exp" => Expr::exp(a),
                "log" => Expr::log(a),
                "abs" => Expr::abs(a),
                _ => Expr::neg(a),
            }
        }
        other => return Err((".op".into(), format!("unknown op `{other}`"))),
    };
    Ok(expr)
}

fn big_from_value(v: &Value) -> Result<BigInt, String> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| format!("{n} is not an integer")),
        Value::String(s) => s
            .parse::<BigInt>()
            .map_err(|_| format!("`{s}` is not an integer")),
        _ => Err("expected an integer".into()),
    }
}

struct Big<'a>(&'a BigInt);

impl Serialize for Big<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.to_i64() {
            Some(n) => s.serialize_i64(n),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

struct Args<'a>(&'a Expr);

impl Serialize for Args<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.node() {
            Node::Var(v) => (v.base(), v.idx()).serialize(s),
            Node::Const(c) => (Big(c.numer()), Big(c.denom())).serialize(s),
            Node::PowNat(b, k) => (b, k).serialize(s),
            Node::PowReal(b, q) => (b, Big(q.numer()), Big(q.denom())).serialize(s),
            _ => {
                let kids = self.0.children();
                let mut seq = s.serialize_seq(Some(kids.len()))?;
                for k in kids {
                    seq.serialize_element(k)?;
                }
                seq.end()
            }
        }
    }
}

pub fn op_name(e: &Expr) -> &'static str {
    match e.node() {
        Node::Var(_) => "var",
        Node::Const(_) => "const",
        Node::Add(_) => "add",
        Node::Mul(_) => "mul",
        Node::Sub(..) => "sub",
        Node::Div(..) => "div",
        Node::PowNat(..) => "pown",
        Node::PowReal(..) => "powr",
        Node::Sqrt(_) => "sqrt",
        Node::Exp(_) => "exp",
        Node::Log(_) => "log",
        Node::Min(..) => "min",
        Node::Max(..) => "max",
        Node::Abs(_) => "abs",
        Node::Neg(_) => "neg",
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("op", op_name(self))?;
        m.serialize_entry("args", &Args(self))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        expr_from_value(&v).map_err(|(p, m)| serde::de::Error::custom(format!("{p}: {m}")))
    }
}

#[derive(Serialize)]
struct VarRecord<'a> {
    base: &'a str,
    idx: u32,
}

#[derive(Serialize)]
struct CondRecord<'a> {
    kind: ConditionKind,
    lhs: &'a Expr,
    rhs: &'a Expr,
}

#[derive(Serialize)]
struct ProblemRecord<'a> {
    id: &'a str,
    category: Category,
    variables: Vec<VarRecord<'a>>,
    conditions: Vec<CondRecord<'a>>,
    lhs: &'a Expr,
    rhs: &'a Expr,
    rhs_positive: bool,
    provenance: &'a [Step],
}

/// One-line JSON record with a fixed key order.
pub fn serialize_problem(p: &Problem) -> String {
    let rec = ProblemRecord {
        id: p.id(),
        category: p.category(),
        variables: p
            .variables()
            .iter()
            .map(|v| VarRecord {
                base: v.base(),
                idx: v.idx(),
            })
            .collect(),
        conditions: p
            .conditions()
            .iter()
            .map(|c| CondRecord {
                kind: c.kind,
                lhs: &c.lhs,
                rhs: &c.rhs,
            })
            .collect(),
        lhs: p.lhs(),
        rhs: p.rhs(),
        rhs_positive: p.rhs_positive(),
        provenance: p.provenance(),
    };
    serde_json::to_string(&rec).expect("problem records always serialize")
}

/// Header line of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub seed: u64,
    pub families: Vec<String>,
    pub count: usize,
    pub depth: usize,
    pub weights: String,
    pub dedup: bool,
    pub version: String,
    pub sampling: String,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: CorpusMeta,
}

pub fn serialize_meta(meta: &CorpusMeta) -> String {
    serde_json::to_string(&MetaLine { meta: meta.clone() }).expect("meta always serializes")
}

/// A parsed corpus: optional metadata header plus problems in file order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub meta: Option<CorpusMeta>,
    pub problems: Vec<Problem>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {error}")]
pub struct LineError {
    pub line: usize,
    pub error: ParseError,
}

/// Parses a JSONL corpus. Blank lines are skipped; a `{"meta": ...}` first
/// record becomes the header. Line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Corpus, LineError> {
    let mut corpus = Corpus::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| LineError {
            line: line_no,
            error: ParseError::Json(e.to_string()),
        })?;
        if let Some(meta) = value.get("meta") {
            if corpus.meta.is_none() && corpus.problems.is_empty() {
                corpus.meta = Some(serde_json::from_value(meta.clone()).map_err(|e| {
                    LineError {
                        line: line_no,
                        error: ParseError::Json(format!("bad meta header: {e}")),
                    }
                })?);
                continue;
            }
        }
        let p = problem_from_value(&value).map_err(|error| LineError {
            line: line_no,
            error,
        })?;
        corpus.problems.push(p);
    }
    Ok(corpus)
}

pub fn serialize_corpus(meta: Option<&CorpusMeta>, problems: &[Problem]) -> String {
    let mut out = String::new();
    if let Some(m) = meta {
        out.push_str(&serialize_meta(m));
        out.push('\n');
    }
    for p in problems {
        out.push_str(&serialize_problem(p));
        out.push('\n');
    }
    out
}

/// Problems indexed by id.
pub fn index_by_id(problems: &[Problem]) -> BTreeMap<&str, &Problem> {
    problems.iter().map(|p| (p.id(), p)).collect()
}
