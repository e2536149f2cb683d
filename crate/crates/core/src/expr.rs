//! Immutable expression trees over positive real variables.
//!
//! Nodes are shared behind `Arc`, so cloning is cheap and subtrees untouched
//! by a substitution are reused rather than copied. Constants are exact
//! rationals; floating point only enters through [`Expr::eval`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Builds a rational from a small numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

const RESERVED: &[&str] = &[
    "at", "by", "do", "else", "end", "from", "fun", "have", "if", "in", "let", "match", "open",
    "show", "then", "theorem", "lemma", "def", "with", "Type", "Prop", "Sort",
];

/// A variable: a base name plus a duplication index (0 for original variables).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    base: String,
    idx: u32,
}

impl VarId {
    pub fn new(base: impl Into<String>, idx: u32) -> Self {
        Self {
            base: base.into(),
            idx,
        }
    }

    pub fn named(base: impl Into<String>) -> Self {
        Self::new(base, 0)
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn idx(&self) -> u32 {
        self.idx
    }

    /// Identifier used in emitted source. Bases never contain `_`, so
    /// `base_k` cannot collide with an index-0 name.
    pub fn render(&self) -> String {
        if self.idx == 0 {
            self.base.clone()
        } else {
            format!("{}_{}", self.base, self.idx)
        }
    }

    /// Whether `base` is usable: ASCII letter first, then letters and digits,
    /// and not a Lean keyword.
    pub fn valid_base(base: &str) -> bool {
        let mut chars = base.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric())
            && !RESERVED.contains(&base)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Var(VarId),
    Const(Rational),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Expr, Expr),
    Div(Expr, Expr),
    PowNat(Expr, u32),
    PowReal(Expr, Rational),
    Sqrt(Expr),
    Exp(Expr),
    Log(Expr),
    Min(Expr, Expr),
    Max(Expr, Expr),
    Abs(Expr),
    Neg(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("{op} needs at least two operands, got {got}")]
    TooFewOperands { op: &'static str, got: usize },
    #[error("division by the literal constant zero")]
    ZeroDenominator,
    #[error("natural power exponent must be at least 1")]
    ZeroExponent,
    #[error("invalid variable base name `{0}`")]
    InvalidBase(String),
}

/// Shared, immutable expression handle.
#[derive(Clone, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Expr {}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

/// Reason an expression could not be evaluated to a number.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalFault {
    #[error("domain fault in {0}")]
    Domain(&'static str),
    #[error("variable {0} has no value")]
    Unbound(VarId),
}

impl Expr {
    /// Validates the node invariants and wraps it.
    pub fn new(node: Node) -> Result<Self, ExprError> {
        match &node {
            Node::Add(xs) if xs.len() < 2 => {
                return Err(ExprError::TooFewOperands {
                    op: "add",
                    got: xs.len(),
                })
            }
            Node::Mul(xs) if xs.len() < 2 => {
                return Err(ExprError::TooFewOperands {
                    op: "mul",
                    got: xs.len(),
                })
            }
            Node::Div(_, d) if d.is_zero_const() => return Err(ExprError::ZeroDenominator),
            Node::PowNat(_, 0) => return Err(ExprError::ZeroExponent),
            Node::Var(v) if !VarId::valid_base(v.base()) => {
                return Err(ExprError::InvalidBase(v.base().to_string()))
            }
            _ => {}
        }
        Ok(Expr(Arc::new(node)))
    }

    // Internal constructor for nodes whose invariants hold by construction.
    fn wrap(node: Node) -> Self {
        debug_assert!(Expr::new(node.clone()).is_ok());
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn var(v: VarId) -> Self {
        Expr::wrap(Node::Var(v))
    }

    pub fn named(base: &str) -> Self {
        Expr::var(VarId::named(base))
    }

    pub fn constant(c: Rational) -> Self {
        Expr::wrap(Node::Const(c))
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(integer(n))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Expr::constant(ratio(num, den))
    }

    pub fn sub(l: Expr, r: Expr) -> Self {
        Expr::wrap(Node::Sub(l, r))
    }

    pub fn div(l: Expr, r: Expr) -> Result<Self, ExprError> {
        Expr::new(Node::Div(l, r))
    }

    pub fn recip(e: Expr) -> Result<Self, ExprError> {
        Expr::div(Expr::int(1), e)
    }

    pub fn pow_nat(base: Expr, k: u32) -> Result<Self, ExprError> {
        Expr::new(Node::PowNat(base, k))
    }

    pub fn pow_real(base: Expr, exponent: Rational) -> Self {
        Expr::wrap(Node::PowReal(base, exponent))
    }

    pub fn sqrt(e: Expr) -> Self {
        Expr::wrap(Node::Sqrt(e))
    }

    pub fn exp(e: Expr) -> Self {
        Expr::wrap(Node::Exp(e))
    }

    pub fn log(e: Expr) -> Self {
        Expr::wrap(Node::Log(e))
    }

    pub fn min(l: Expr, r: Expr) -> Self {
        Expr::wrap(Node::Min(l, r))
    }

    pub fn max(l: Expr, r: Expr) -> Self {
        Expr::wrap(Node::Max(l, r))
    }

    pub fn abs(e: Expr) -> Self {
        Expr::wrap(Node::Abs(e))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::wrap(Node::Neg(e))
    }

    /// Sum node exactly as given, no flattening or folding.
    pub fn add_raw(terms: Vec<Expr>) -> Result<Self, ExprError> {
        Expr::new(Node::Add(terms))
    }

    /// Product node exactly as given, no flattening or folding.
    pub fn mul_raw(factors: Vec<Expr>) -> Result<Self, ExprError> {
        Expr::new(Node::Mul(factors))
    }

    /// Flattening sum. Nested sums are spliced in, constants are folded into
    /// the position of the first one, and a zero is dropped when other terms
    /// remain.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        let flat = flatten(terms, |n| match n {
            Node::Add(xs) => Some(xs),
            _ => None,
        });
        let folded = fold_constants(flat, Rational::zero(), |a, b| a + b, |c| c.is_zero());
        match folded.len() {
            0 => Expr::int(0),
            1 => folded.into_iter().next().unwrap(),
            _ => Expr::wrap(Node::Add(folded)),
        }
    }

    /// Flattening product with the same folding policy as [`Expr::sum`];
    /// a unit factor is dropped.
    pub fn product(factors: Vec<Expr>) -> Expr {
        let flat = flatten(factors, |n| match n {
            Node::Mul(xs) => Some(xs),
            _ => None,
        });
        let folded = fold_constants(flat, Rational::one(), |a, b| a * b, |c| c.is_one());
        match folded.len() {
            0 => Expr::int(1),
            1 => folded.into_iter().next().unwrap(),
            _ => Expr::wrap(Node::Mul(folded)),
        }
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn as_var(&self) -> Option<&VarId> {
        match self.node() {
            Node::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Direct children in left-to-right order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Var(_) | Node::Const(_) => vec![],
            Node::Add(xs) | Node::Mul(xs) => xs.iter().collect(),
            Node::Sub(l, r) | Node::Div(l, r) | Node::Min(l, r) | Node::Max(l, r) => vec![l, r],
            Node::PowNat(b, _) | Node::PowReal(b, _) => vec![b],
            Node::Sqrt(a) | Node::Exp(a) | Node::Log(a) | Node::Abs(a) | Node::Neg(a) => vec![a],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        if let Node::Var(v) = self.node() {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    /// Variables in order of first (left-to-right, depth-first) occurrence.
    pub fn vars_in_order(&self) -> Vec<VarId> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.walk_vars(&mut seen, &mut out);
        out
    }

    fn walk_vars(&self, seen: &mut BTreeSet<VarId>, out: &mut Vec<VarId>) {
        if let Node::Var(v) = self.node() {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
        for c in self.children() {
            c.walk_vars(seen, out);
        }
    }

    /// Simultaneous substitution. Variables missing from `map` are kept.
    /// Subtrees without a substituted variable are shared with `self`.
    pub fn substitute(&self, map: &BTreeMap<VarId, Expr>) -> Expr {
        self.subst_inner(map).unwrap_or_else(|| self.clone())
    }

    // Returns `None` when nothing below changed.
    fn subst_inner(&self, map: &BTreeMap<VarId, Expr>) -> Option<Expr> {
        let one = |e: &Expr| e.subst_inner(map);
        let two = |l: &Expr, r: &Expr| match (l.subst_inner(map), r.subst_inner(map)) {
            (None, None) => None,
            (a, b) => Some((
                a.unwrap_or_else(|| l.clone()),
                b.unwrap_or_else(|| r.clone()),
            )),
        };
        let many = |xs: &[Expr]| {
            let replaced: Vec<Option<Expr>> = xs.iter().map(|x| x.subst_inner(map)).collect();
            if replaced.iter().all(Option::is_none) {
                None
            } else {
                Some(
                    replaced
                        .into_iter()
                        .zip(xs)
                        .map(|(r, x)| r.unwrap_or_else(|| x.clone()))
                        .collect::<Vec<_>>(),
                )
            }
        };
        let node = match self.node() {
            Node::Var(v) => return map.get(v).cloned(),
            Node::Const(_) => return None,
            Node::Add(xs) => Node::Add(many(xs)?),
            Node::Mul(xs) => Node::Mul(many(xs)?),
            Node::Sub(l, r) => {
                let (l, r) = two(l, r)?;
                Node::Sub(l, r)
            }
            Node::Div(l, r) => {
                let (l, r) = two(l, r)?;
                Node::Div(l, r)
            }
            Node::Min(l, r) => {
                let (l, r) = two(l, r)?;
                Node::Min(l, r)
            }
            Node::Max(l, r) => {
                let (l, r) = two(l, r)?;
                Node::Max(l, r)
            }
            Node::PowNat(b, k) => Node::PowNat(one(b)?, *k),
            Node::PowReal(b, q) => Node::PowReal(one(b)?, q.clone()),
            Node::Sqrt(a) => Node::Sqrt(one(a)?),
            Node::Exp(a) => Node::Exp(one(a)?),
            Node::Log(a) => Node::Log(one(a)?),
            Node::Abs(a) => Node::Abs(one(a)?),
            Node::Neg(a) => Node::Neg(one(a)?),
        };
        Some(Expr(Arc::new(node)))
    }

    /// Evaluates in `f64`. Overflow to infinity is allowed; out-of-domain
    /// operations and NaN produce an [`EvalFault`].
    pub fn eval<F>(&self, env: &F) -> Result<f64, EvalFault>
    where
        F: Fn(&VarId) -> Option<f64>,
    {
        let v = match self.node() {
            Node::Var(v) => env(v).ok_or_else(|| EvalFault::Unbound(v.clone()))?,
            Node::Const(c) => rational_to_f64(c),
            Node::Add(xs) => {
                let mut acc = 0.0;
                for x in xs {
                    acc += x.eval(env)?;
                }
                acc
            }
            Node::Mul(xs) => {
                let mut acc = 1.0;
                for x in xs {
                    acc *= x.eval(env)?;
                }
                acc
            }
            Node::Sub(l, r) => l.eval(env)? - r.eval(env)?,
            Node::Div(l, r) => {
                let num = l.eval(env)?;
                let den = r.eval(env)?;
                if den == 0.0 {
                    return Err(EvalFault::Domain("div"));
                }
                num / den
            }
            Node::PowNat(b, k) => {
                let base = b.eval(env)?;
                match i32::try_from(*k) {
                    Ok(k) => base.powi(k),
                    Err(_) => base.powf(f64::from(*k)),
                }
            }
            Node::PowReal(b, q) => {
                let base = b.eval(env)?;
                let e = rational_to_f64(q);
                if base < 0.0 || (base == 0.0 && e <= 0.0) {
                    return Err(EvalFault::Domain("rpow"));
                }
                base.powf(e)
            }
            Node::Sqrt(a) => {
                let x = a.eval(env)?;
                if x < 0.0 {
                    return Err(EvalFault::Domain("sqrt"));
                }
                x.sqrt()
            }
            Node::Exp(a) => a.eval(env)?.exp(),
            Node::Log(a) => {
                let x = a.eval(env)?;
                if x <= 0.0 {
                    return Err(EvalFault::Domain("log"));
                }
                x.ln()
            }
            Node::Min(l, r) => l.eval(env)?.min(r.eval(env)?),
            Node::Max(l, r) => l.eval(env)?.max(r.eval(env)?),
            Node::Abs(a) => a.eval(env)?.abs(),
            Node::Neg(a) => -a.eval(env)?,
        };
        if v.is_nan() {
            return Err(EvalFault::Domain("nan"));
        }
        Ok(v)
    }

    /// Evaluates against a map environment.
    pub fn eval_map(&self, env: &BTreeMap<VarId, f64>) -> Result<f64, EvalFault> {
        self.eval(&|v: &VarId| env.get(v).copied())
    }

    /// Copy with the operands of every sum and product sorted. Two
    /// expressions that differ only in the order of commutative operands
    /// have equal canonical forms.
    pub fn canonical(&self) -> Expr {
        let rebuilt = match self.node() {
            Node::Var(_) | Node::Const(_) => return self.clone(),
            Node::Add(xs) => Node::Add(sorted(xs)),
            Node::Mul(xs) => Node::Mul(sorted(xs)),
            Node::Sub(l, r) => Node::Sub(l.canonical(), r.canonical()),
            Node::Div(l, r) => Node::Div(l.canonical(), r.canonical()),
            Node::Min(l, r) => Node::Min(l.canonical(), r.canonical()),
            Node::Max(l, r) => Node::Max(l.canonical(), r.canonical()),
            Node::PowNat(b, k) => Node::PowNat(b.canonical(), *k),
            Node::PowReal(b, q) => Node::PowReal(b.canonical(), q.clone()),
            Node::Sqrt(a) => Node::Sqrt(a.canonical()),
            Node::Exp(a) => Node::Exp(a.canonical()),
            Node::Log(a) => Node::Log(a.canonical()),
            Node::Abs(a) => Node::Abs(a.canonical()),
            Node::Neg(a) => Node::Neg(a.canonical()),
        };
        Expr(Arc::new(rebuilt))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

fn sorted(xs: &[Expr]) -> Vec<Expr> {
    let mut out: Vec<Expr> = xs.iter().map(Expr::canonical).collect();
    out.sort();
    out
}

fn flatten(items: Vec<Expr>, nested: impl Fn(&Node) -> Option<&Vec<Expr>>) -> Vec<Expr> {
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        match nested(it.node()) {
            Some(inner) => out.extend(inner.iter().cloned()),
            None => out.push(it),
        }
    }
    out
}

fn fold_constants(
    items: Vec<Expr>,
    identity: Rational,
    combine: impl Fn(Rational, Rational) -> Rational,
    is_identity: impl Fn(&Rational) -> bool,
) -> Vec<Expr> {
    let n_consts = items.iter().filter(|e| e.as_const().is_some()).count();
    if n_consts == 0 {
        return items;
    }
    let total = items
        .iter()
        .filter_map(|e| e.as_const().cloned())
        .fold(identity, combine);
    let first = items.iter().position(|e| e.as_const().is_some()).unwrap();
    let mut out = Vec::with_capacity(items.len() - n_consts + 1);
    for (i, it) in items.into_iter().enumerate() {
        if i == first {
            out.push(Expr::constant(total.clone()));
        } else if it.as_const().is_none() {
            out.push(it);
        }
    }
    if out.len() > 1 && is_identity(&total) {
        out.remove(first);
    }
    out
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => q.to_f64().unwrap_or(f64::NAN),
    }
}

/// `true` when `q` is a nonnegative integer.
pub fn is_natural(q: &Rational) -> bool {
    q.is_integer() && !q.is_negative()
}
