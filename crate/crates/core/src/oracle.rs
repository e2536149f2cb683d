//! Numeric sanity checking by sampling the feasible region.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{rational_to_f64, Expr, Node, VarId};
use crate::problem::{Condition, ConditionKind, Problem};

pub type Env = BTreeMap<VarId, f64>;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const CONDITION_TOLERANCE: f64 = 1e-12;
const LOG_LO: f64 = -6.907_755_278_982_137; // ln 1e-3
const LOG_HI: f64 = 6.907_755_278_982_137;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub env: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagViolation {
    pub env: BTreeMap<String, f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub id: String,
    pub attempted: usize,
    pub accepted: usize,
    pub violations: Vec<Violation>,
    pub tag_violations: Vec<TagViolation>,
    pub domain_faults: usize,
    pub exhausted: bool,
}

impl SampleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.tag_violations.is_empty()
    }

    /// Samples on which both sides evaluated to finite values.
    pub fn evaluated(&self) -> usize {
        self.accepted - self.domain_faults
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSample {
    pub envs: Vec<Env>,
    pub attempted: usize,
}

impl FeasibleSample {
    pub fn exhausted(&self) -> bool {
        self.envs.is_empty()
    }
}

/// Expression lowered to indexed variables and `f64` constants.
#[derive(Debug, Clone)]
enum Op {
    Var(usize),
    Const(f64),
    Add(Vec<Op>),
    Mul(Vec<Op>),
    Sub(Box<Op>, Box<Op>),
    Div(Box<Op>, Box<Op>),
    PowNat(Box<Op>, i32),
    PowReal(Box<Op>, f64),
    Sqrt(Box<Op>),
    Exp(Box<Op>),
    Log(Box<Op>),
    Min(Box<Op>, Box<Op>),
    Max(Box<Op>, Box<Op>),
    Abs(Box<Op>),
    Neg(Box<Op>),
}

impl Op {
    fn lower(e: &Expr, index: &BTreeMap<VarId, usize>) -> Op {
        let b = |x: &Expr| Box::new(Op::lower(x, index));
        match e.node() {
            Node::Var(v) => Op::Var(index[v]),
            Node::Const(c) => Op::Const(rational_to_f64(c)),
            Node::Add(xs) => Op::Add(xs.iter().map(|x| Op::lower(x, index)).collect()),
            Node::Mul(xs) => Op::Mul(xs.iter().map(|x| Op::lower(x, index)).collect()),
            Node::Sub(l, r) => Op::Sub(b(l), b(r)),
            Node::Div(l, r) => Op::Div(b(l), b(r)),
            Node::PowNat(x, k) => Op::PowNat(b(x), i32::try_from(*k).unwrap_or(i32::MAX)),
            Node::PowReal(x, q) => Op::PowReal(b(x), rational_to_f64(q)),
            Node::Sqrt(x) => Op::Sqrt(b(x)),
            Node::Exp(x) => Op::Exp(b(x)),
            Node::Log(x) => Op::Log(b(x)),
            Node::Min(l, r) => Op::Min(b(l), b(r)),
            Node::Max(l, r) => Op::Max(b(l), b(r)),
            Node::Abs(x) => Op::Abs(b(x)),
            Node::Neg(x) => Op::Neg(b(x)),
        }
    }

    /// As [`Expr::eval`], except that overflow anywhere in the tree is also a
    /// fault: a result computed through an infinity is not trustworthy.
    fn eval(&self, x: &[f64]) -> Option<f64> {
        let v = match self {
            Op::Var(i) => x[*i],
            Op::Const(c) => *c,
            Op::Add(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += t.eval(x)?;
                }
                acc
            }
            Op::Mul(ts) => {
                let mut acc = 1.0;
                for t in ts {
                    acc *= t.eval(x)?;
                }
                acc
            }
            Op::Sub(l, r) => l.eval(x)? - r.eval(x)?,
            Op::Div(l, r) => {
                let (n, d) = (l.eval(x)?, r.eval(x)?);
                if d == 0.0 {
                    return None;
                }
                n / d
            }
            Op::PowNat(b, k) => b.eval(x)?.powi(*k),
            Op::PowReal(b, q) => {
                let base = b.eval(x)?;
                if base < 0.0 || (base == 0.0 && *q <= 0.0) {
                    return None;
                }
                base.powf(*q)
            }
            Op::Sqrt(a) => {
                let v = a.eval(x)?;
                if v < 0.0 {
                    return None;
                }
                v.sqrt()
            }
            Op::Exp(a) => a.eval(x)?.exp(),
            Op::Log(a) => {
                let v = a.eval(x)?;
                if v <= 0.0 {
                    return None;
                }
                v.ln()
            }
            Op::Min(l, r) => l.eval(x)?.min(r.eval(x)?),
            Op::Max(l, r) => l.eval(x)?.max(r.eval(x)?),
            Op::Abs(a) => a.eval(x)?.abs(),
            Op::Neg(a) => -a.eval(x)?,
        };
        v.is_finite().then_some(v)
    }

    fn finite(&self, x: &[f64]) -> Option<f64> {
        self.eval(x).filter(|v| v.is_finite())
    }
}

struct LoweredCondition {
    kind: ConditionKind,
    lhs: Op,
    rhs: Op,
}

impl LoweredCondition {
    fn residual(&self, x: &[f64]) -> Option<f64> {
        Some(self.lhs.finite(x)? - self.rhs.finite(x)?)
    }

    fn holds(&self, x: &[f64]) -> bool {
        let (Some(l), Some(r)) = (self.lhs.finite(x), self.rhs.finite(x)) else {
            return false;
        };
        let slack = CONDITION_TOLERANCE * r.abs().max(1.0);
        match self.kind {
            ConditionKind::Eq => (l - r).abs() <= slack,
            ConditionKind::Gt => l > r,
            ConditionKind::Ge => l >= r - slack,
        }
    }
}

fn positive_const(e: &Expr) -> Option<f64> {
    let v = rational_to_f64(e.as_const()?);
    (v > 0.0).then_some(v)
}

/// Positive-coefficient linear form in distinct variables.
fn linear_terms(e: &Expr) -> Option<Vec<(f64, VarId)>> {
    let term = |t: &Expr| -> Option<(f64, VarId)> {
        match t.node() {
            Node::Var(v) => Some((1.0, v.clone())),
            Node::Mul(fs) if fs.len() == 2 => Some((positive_const(&fs[0])?, fs[1].as_var()?.clone())),
            _ => None,
        }
    };
    let terms: Vec<_> = match e.node() {
        Node::Add(ts) => ts.iter().map(term).collect::<Option<_>>()?,
        _ => vec![term(e)?],
    };
    let distinct: BTreeSet<_> = terms.iter().map(|(_, v)| v).collect();
    (distinct.len() == terms.len()).then_some(terms)
}

fn monomial(e: &Expr) -> Option<Vec<VarId>> {
    let Node::Mul(fs) = e.node() else { return None };
    let vs: Vec<VarId> = fs.iter().map(|f| f.as_var().cloned()).collect::<Option<_>>()?;
    let distinct: BTreeSet<_> = vs.iter().collect();
    (distinct.len() == vs.len()).then_some(vs)
}

fn union_find_groups(vars: &[VarId], eqs: &[&Condition]) -> Vec<(Vec<usize>, usize)> {
    let index: BTreeMap<&VarId, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for c in eqs {
        let ids: Vec<usize> = c.free_vars().iter().map(|v| index[v]).collect();
        for w in ids.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a] = b;
        }
    }
    // Later equalities in a shared group are left to rejection.
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for (ci, c) in eqs.iter().enumerate() {
        if let Some(v) = c.free_vars().iter().next() {
            let root = find(&mut parent, index[v]);
            first.entry(root).or_insert(ci);
        }
    }
    first
        .into_iter()
        .map(|(root, ci)| {
            let members = (0..vars.len()).filter(|&i| find(&mut parent, i) == root).collect();
            (members, ci)
        })
        .collect()
}

/// How one equality is enforced along the ray through a draw.
enum Solver {
    Linear(Vec<(f64, usize)>, f64),
    Monomial(Vec<usize>, f64),
    Root(LoweredCondition),
}

struct Group {
    members: Vec<usize>,
    solver: Solver,
}

fn scale(x: &mut [f64], members: &[usize], t: f64) {
    for &i in members {
        x[i] *= t;
    }
}

impl Group {
    fn solve<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) -> bool {
        match &self.solver {
            Solver::Linear(terms, target) => {
                let s: f64 = terms.iter().map(|(k, i)| k * x[*i]).sum();
                scale(x, &self.members, target / s);
                true
            }
            Solver::Monomial(idx, target) => {
                let p: f64 = idx.iter().map(|i| x[*i]).product();
                scale(x, &self.members, (target / p).powf(1.0 / idx.len() as f64));
                true
            }
            Solver::Root(c) => {
                let base = x.to_vec();
                let mut probe = base.clone();
                let mut f = |s: f64| {
                    probe.copy_from_slice(&base);
                    scale(&mut probe, &self.members, s.exp());
                    c.residual(&probe)
                };
                let mut brackets = Vec::new();
                let mut prev = (-16.0, f(-16.0));
                for i in -63..=64 {
                    let s = f64::from(i) * 0.25;
                    let cur = (s, f(s));
                    if let ((a, Some(fa)), (b, Some(fb))) = (prev, cur) {
                        if fa.signum() != fb.signum() || fa == 0.0 {
                            brackets.push((a, b, fa));
                        }
                    }
                    prev = cur;
                }
                if brackets.is_empty() {
                    return false;
                }
                let (mut lo, mut hi, flo) = brackets[rng.gen_range(0..brackets.len())];
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    match f(mid) {
                        Some(m) if m != 0.0 && m.signum() == flo.signum() => lo = mid,
                        Some(_) => hi = mid,
                        None => return false,
                    }
                }
                let candidates = [lo, hi];
                let best = candidates
                    .iter()
                    .copied()
                    .min_by(|a, b| {
                        let ra = f(*a).map_or(f64::INFINITY, f64::abs);
                        let rb = f(*b).map_or(f64::INFINITY, f64::abs);
                        ra.total_cmp(&rb)
                    })
                    .unwrap();
                scale(x, &self.members, best.exp());
                true
            }
        }
    }
}

/// A problem lowered for repeated numeric evaluation.
struct Lowered {
    vars: Vec<VarId>,
    conditions: Vec<LoweredCondition>,
    groups: Vec<Group>,
    lhs: Op,
    rhs: Op,
}

impl Lowered {
    fn new(p: &Problem) -> Self {
        let vars = p.variables().to_vec();
        let index: BTreeMap<VarId, usize> = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let lower = |c: &Condition| LoweredCondition {
            kind: c.kind,
            lhs: Op::lower(&c.lhs, &index),
            rhs: Op::lower(&c.rhs, &index),
        };
        let eqs: Vec<&Condition> = p.conditions().iter().filter(|c| c.kind == ConditionKind::Eq).collect();
        let groups = union_find_groups(&vars, &eqs)
            .into_iter()
            .map(|(members, ci)| {
                let c = eqs[ci];
                let solver = match (linear_terms(&c.lhs), monomial(&c.lhs), positive_const(&c.rhs)) {
                    (Some(t), _, Some(k)) => Solver::Linear(t.into_iter().map(|(a, v)| (a, index[&v])).collect(), k),
                    (_, Some(m), Some(k)) => Solver::Monomial(m.iter().map(|v| index[v]).collect(), k),
                    _ => Solver::Root(lower(c)),
                };
                Group { members, solver }
            })
            .collect();
        Lowered {
            conditions: p.conditions().iter().map(lower).collect(),
            groups,
            lhs: Op::lower(p.lhs(), &index),
            rhs: Op::lower(p.rhs(), &index),
            vars,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let mut x: Vec<f64> = self.vars.iter().map(|_| rng.gen_range(LOG_LO..LOG_HI).exp()).collect();
        for g in &self.groups {
            if !g.solve(&mut x, rng) {
                return None;
            }
        }
        let feasible = x.iter().all(|v| *v > 0.0 && v.is_finite()) && self.conditions.iter().all(|c| c.holds(&x));
        feasible.then_some(x)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Vec<Vec<f64>>, usize) {
        let mut out = Vec::with_capacity(n);
        let mut attempted = 0;
        while out.len() < n && attempted < 10 * n {
            attempted += 1;
            if let Some(x) = self.draw(rng) {
                out.push(x);
            }
        }
        (out, attempted)
    }

    fn env(&self, x: &[f64]) -> Env {
        self.vars.iter().cloned().zip(x.iter().copied()).collect()
    }
}

/// Draws up to `n` positive environments satisfying every condition of `p`.
/// Equalities are enforced by scaling each connected variable group along a
/// ray; everything else is rejection sampled. Stops after `10 * n` draws.
pub fn sample_feasible<R: Rng + ?Sized>(
    p: &Problem,
    rng: &mut R,
    n: usize,
) -> Result<FeasibleSample, OracleError> {
    if n == 0 {
        return Err(OracleError::ZeroSamples);
    }
    let lowered = Lowered::new(p);
    let (xs, attempted) = lowered.sample(rng, n);
    Ok(FeasibleSample {
        envs: xs.iter().map(|x| lowered.env(x)).collect(),
        attempted,
    })
}

fn named(env: &Env) -> BTreeMap<String, f64> {
    env.iter().map(|(k, v)| (k.render(), *v)).collect()
}

/// Flags samples with `lhs < rhs - tol * |rhs| - 1e-12`, and samples where a
/// positively tagged rhs is not positive.
pub fn check_problem<R: Rng + ?Sized>(
    p: &Problem,
    rng: &mut R,
    n: usize,
    tol: f64,
) -> Result<SampleReport, OracleError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OracleError::BadTolerance(tol));
    }
    if n == 0 {
        return Err(OracleError::ZeroSamples);
    }
    let lowered = Lowered::new(p);
    let (xs, attempted) = lowered.sample(rng, n);
    let mut report = SampleReport {
        id: p.id().to_string(),
        attempted,
        accepted: xs.len(),
        violations: Vec::new(),
        tag_violations: Vec::new(),
        domain_faults: 0,
        exhausted: xs.is_empty(),
    };
    for x in &xs {
        let (Some(l), Some(r)) = (lowered.lhs.finite(x), lowered.rhs.finite(x)) else {
            report.domain_faults += 1;
            continue;
        };
        if p.rhs_positive() && r <= 0.0 {
            report.tag_violations.push(TagViolation { env: named(&lowered.env(x)), rhs: r });
        }
        if l < r - tol * r.abs() - 1e-12 {
            report.violations.push(Violation { env: named(&lowered.env(x)), lhs: l, rhs: r, gap: l - r });
        }
    }
    Ok(report)
}
