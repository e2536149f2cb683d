//! The transformation calculus: Type I/II variants, two-problem composition,
//! variable substitutions and monotone wrappers on the statement.

mod compose;
mod naming;
mod statement;
mod variable;
mod variants;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::problem::{Family, ParentRef, Problem, Step};

pub use compose::{compose, lift, lift_disjoint, LiftedPair};
pub use naming::FreshNamer;
pub use statement::apply_stmt_rule;
pub use variable::apply_var_rule;
pub use variants::{type1_variant, type2_variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompositionKind {
    DirectAddition,
    WeightedSum,
    Maxima,
    Minima,
    Multiplication,
    Division,
    Reciprocal,
}

impl CompositionKind {
    pub const ALL: [CompositionKind; 7] = [
        CompositionKind::DirectAddition,
        CompositionKind::WeightedSum,
        CompositionKind::Maxima,
        CompositionKind::Minima,
        CompositionKind::Multiplication,
        CompositionKind::Division,
        CompositionKind::Reciprocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompositionKind::DirectAddition => "Direct Addition",
            CompositionKind::WeightedSum => "Weighted Sum",
            CompositionKind::Maxima => "Maxima",
            CompositionKind::Minima => "Minima",
            CompositionKind::Multiplication => "Multiplication",
            CompositionKind::Division => "Division",
            CompositionKind::Reciprocal => "Reciprocal",
        }
    }

    /// Rows that only exist in the positive block of the table.
    pub fn positive_only(self) -> bool {
        matches!(
            self,
            CompositionKind::Multiplication | CompositionKind::Division | CompositionKind::Reciprocal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRuleKind {
    Shift,
    Rep,
    SqrtAll,
    SqrtRandom,
    SqAll,
    SqRandom,
    CubeAll,
    CubeRandom,
    ReciprocalAll,
    ReciprocalRandom,
    ExpAll,
    ExpRandom,
    LogAll,
    LogRandom,
    CycAdd,
    CycMul,
    CycDiv,
    CycDivAdd,
}

impl VarRuleKind {
    pub const ALL: [VarRuleKind; 18] = [
        VarRuleKind::Shift,
        VarRuleKind::Rep,
        VarRuleKind::SqrtAll,
        VarRuleKind::SqrtRandom,
        VarRuleKind::SqAll,
        VarRuleKind::SqRandom,
        VarRuleKind::CubeAll,
        VarRuleKind::CubeRandom,
        VarRuleKind::ReciprocalAll,
        VarRuleKind::ReciprocalRandom,
        VarRuleKind::ExpAll,
        VarRuleKind::ExpRandom,
        VarRuleKind::LogAll,
        VarRuleKind::LogRandom,
        VarRuleKind::CycAdd,
        VarRuleKind::CycMul,
        VarRuleKind::CycDiv,
        VarRuleKind::CycDivAdd,
    ];

    /// The block usable under any side conditions.
    pub fn upper_block() -> &'static [VarRuleKind] {
        &Self::ALL[..14]
    }

    pub fn name(self) -> &'static str {
        match self {
            VarRuleKind::Shift => "shift",
            VarRuleKind::Rep => "rep",
            VarRuleKind::SqrtAll => "sqrt_all",
            VarRuleKind::SqrtRandom => "sqrt_random",
            VarRuleKind::SqAll => "sq_all",
            VarRuleKind::SqRandom => "sq_random",
            VarRuleKind::CubeAll => "cube_all",
            VarRuleKind::CubeRandom => "cube_random",
            VarRuleKind::ReciprocalAll => "reciprocal_all",
            VarRuleKind::ReciprocalRandom => "reciprocal_random",
            VarRuleKind::ExpAll => "exp_all",
            VarRuleKind::ExpRandom => "exp_random",
            VarRuleKind::LogAll => "log_all",
            VarRuleKind::LogRandom => "log_random",
            VarRuleKind::CycAdd => "cyc_add",
            VarRuleKind::CycMul => "cyc_mul",
            VarRuleKind::CycDiv => "cyc_div",
            VarRuleKind::CycDivAdd => "cyc_div_add",
        }
    }

    pub fn basic_only(self) -> bool {
        matches!(
            self,
            VarRuleKind::CycAdd | VarRuleKind::CycMul | VarRuleKind::CycDiv | VarRuleKind::CycDivAdd
        )
    }

    pub fn is_random(self) -> bool {
        matches!(
            self,
            VarRuleKind::SqrtRandom
                | VarRuleKind::SqRandom
                | VarRuleKind::CubeRandom
                | VarRuleKind::ReciprocalRandom
                | VarRuleKind::ExpRandom
                | VarRuleKind::LogRandom
        )
    }

    /// Smallest variable count the rule accepts.
    pub fn min_vars(self) -> usize {
        if self.basic_only() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StmtRuleKind {
    Exp,
    Cube,
    Sqrt,
    Sq,
    Log,
}

impl StmtRuleKind {
    pub const ALL: [StmtRuleKind; 5] = [
        StmtRuleKind::Exp,
        StmtRuleKind::Cube,
        StmtRuleKind::Sqrt,
        StmtRuleKind::Sq,
        StmtRuleKind::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StmtRuleKind::Exp => "exp",
            StmtRuleKind::Cube => "cube",
            StmtRuleKind::Sqrt => "sqrt",
            StmtRuleKind::Sq => "sq",
            StmtRuleKind::Log => "log",
        }
    }

    pub fn requires_positive_rhs(self) -> bool {
        matches!(self, StmtRuleKind::Sqrt | StmtRuleKind::Sq | StmtRuleKind::Log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Compose { kind: CompositionKind, positive: bool },
    Var(VarRuleKind),
    Stmt(StmtRuleKind),
    TypeI,
    TypeII(VarRuleKind),
}

/// Weights for the Weighted Sum row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weights {
    Fixed(u32, u32),
    Uniform { lo: u32, hi: u32 },
}

impl Default for Weights {
    fn default() -> Self {
        Weights::Uniform { lo: 1, hi: 5 }
    }
}

impl Weights {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> (u32, u32) {
        match self {
            Weights::Fixed(m, l) => (m, l),
            Weights::Uniform { lo, hi } => (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)),
        }
    }

    pub fn describe(self) -> String {
        match self {
            Weights::Fixed(m, l) => format!("fixed:{m},{l}"),
            Weights::Uniform { lo, hi } => format!("uniform:{lo}..={hi}"),
        }
    }

    pub fn valid(self) -> bool {
        match self {
            Weights::Fixed(m, l) => m > 0 && l > 0,
            Weights::Uniform { lo, hi } => lo > 0 && lo <= hi,
        }
    }
}

/// A named, guarded rewrite together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformRule {
    kind: RuleKind,
    weights: Weights,
    index: Option<usize>,
}

impl TransformRule {
    pub fn new(kind: RuleKind) -> Self {
        Self {
            kind,
            weights: Weights::default(),
            index: None,
        }
    }

    pub fn compose(kind: CompositionKind, positive: bool) -> Self {
        Self::new(RuleKind::Compose {
            kind,
            positive: positive || kind.positive_only(),
        })
    }

    pub fn var(kind: VarRuleKind) -> Self {
        Self::new(RuleKind::Var(kind))
    }

    pub fn stmt(kind: StmtRuleKind) -> Self {
        Self::new(RuleKind::Stmt(kind))
    }

    pub fn type1() -> Self {
        Self::new(RuleKind::TypeI)
    }

    pub fn type2(kind: VarRuleKind) -> Self {
        Self::new(RuleKind::TypeII(kind))
    }

    pub fn with_weights(mut self, w: Weights) -> Self {
        self.weights = w;
        self
    }

    /// Presets the 1-based variable index used by `*_random` rules.
    pub fn with_index(mut self, one_based: usize) -> Self {
        self.index = Some(one_based);
        self
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn weights(&self) -> Weights {
        self.weights
    }

    pub fn index(&self) -> Option<usize> {
        self.index
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RuleKind::Compose { kind, .. } => kind.name(),
            RuleKind::Var(k) | RuleKind::TypeII(k) => k.name(),
            RuleKind::Stmt(k) => k.name(),
            RuleKind::TypeI => "typeI",
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            RuleKind::Compose { .. } => Family::Composition,
            RuleKind::Var(_) => Family::VariableLevel,
            RuleKind::Stmt(_) => Family::ProblemLevel,
            RuleKind::TypeI => Family::TypeI,
            RuleKind::TypeII(_) => Family::TypeII,
        }
    }

    pub fn arity(&self) -> usize {
        match self.kind {
            RuleKind::Compose { .. } => 2,
            _ => 1,
        }
    }

    pub fn requires_positive_rhs(&self) -> bool {
        match self.kind {
            RuleKind::Compose { positive, .. } => positive,
            RuleKind::Stmt(k) => k.requires_positive_rhs(),
            _ => false,
        }
    }

    pub fn requires_basic_only(&self) -> bool {
        match self.kind {
            RuleKind::Var(k) | RuleKind::TypeII(k) => k.basic_only(),
            _ => false,
        }
    }

    /// Identifier-safe form of the rule name used in generated ids.
    pub fn slug(&self) -> String {
        match self.kind {
            RuleKind::TypeI => "type1".into(),
            RuleKind::TypeII(k) => format!("type2_{}", k.name()),
            RuleKind::Stmt(k) => format!("stmt_{}", k.name()),
            _ => self.name().to_ascii_lowercase().replace(' ', "_"),
        }
    }

    /// Checks the guards of a one-problem rule.
    pub fn check_unary(&self, p: &Problem) -> Result<(), RuleError> {
        let fail = |guard| Err(RuleError::Inapplicable {
            rule: self.name().to_string(),
            guard,
        });
        match self.kind {
            RuleKind::Compose { .. } => fail(Guard::Arity { need: 2, got: 1 }),
            RuleKind::Var(k) | RuleKind::TypeII(k) => {
                if k.basic_only() && !p.is_basic_only() {
                    return fail(Guard::BasicOnly);
                }
                let m = p.variables().len();
                if m < k.min_vars() {
                    return fail(Guard::VariableCount {
                        need: k.min_vars(),
                        got: m,
                    });
                }
                if let Some(i) = self.index {
                    if !(1..=m).contains(&i) {
                        return fail(Guard::IndexOutOfRange { index: i, vars: m });
                    }
                }
                Ok(())
            }
            RuleKind::Stmt(k) => {
                if k.requires_positive_rhs() && !p.rhs_positive() {
                    return fail(Guard::PositiveRhs);
                }
                Ok(())
            }
            RuleKind::TypeI => Ok(()),
        }
    }

    /// Checks the guards of a composition on the raw, unlifted inputs.
    pub fn check_binary(&self, p1: &Problem, p2: &Problem) -> Result<(), RuleError> {
        let fail = |guard| Err(RuleError::Inapplicable {
            rule: self.name().to_string(),
            guard,
        });
        let RuleKind::Compose { positive, .. } = self.kind else {
            return fail(Guard::Arity { need: 1, got: 2 });
        };
        let overlap = p1.var_set().intersection(&p2.var_set()).next().is_some();
        if p1.id() == p2.id() && overlap {
            return fail(Guard::SelfComposition);
        }
        if !p1.is_basic_only() && !p2.is_basic_only() && overlap {
            return fail(Guard::Feasibility);
        }
        if positive && !(p1.rhs_positive() && p2.rhs_positive()) {
            return fail(Guard::PositiveRhs);
        }
        Ok(())
    }
}

impl fmt::Display for TransformRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RuleKind::Compose { positive: true, kind } if !kind.positive_only() => {
                write!(f, "{} (positive)", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for TransformRule {
    type Err = String;

    /// Accepts table names, `typeI`, `typeII:<var rule>` and `stmt:<name>`
    /// (the bare statement names `sqrt`, `exp`, ... also work). A trailing
    /// ` (positive)` selects the positive block of the composition table.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (base, positive) = match s.strip_suffix("(positive)") {
            Some(b) => (b.trim(), true),
            None => (s, false),
        };
        if let Some(k) = CompositionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(base) || k.name().replace(' ', "_").eq_ignore_ascii_case(base))
        {
            return Ok(TransformRule::compose(k, positive));
        }
        if base.eq_ignore_ascii_case("typeI") {
            return Ok(TransformRule::type1());
        }
        if let Some(rest) = base.strip_prefix("typeII:") {
            let k = VarRuleKind::ALL
                .into_iter()
                .find(|k| k.name() == rest)
                .ok_or_else(|| format!("unknown variable rule `{rest}`"))?;
            return Ok(TransformRule::type2(k));
        }
        let stmt_name = base.strip_prefix("stmt:").unwrap_or(base);
        if let Some(k) = StmtRuleKind::ALL.into_iter().find(|k| k.name() == stmt_name) {
            return Ok(TransformRule::stmt(k));
        }
        if let Some(k) = VarRuleKind::ALL.into_iter().find(|k| k.name() == base) {
            return Ok(TransformRule::var(k));
        }
        Err(format!("unknown rule `{s}`"))
    }
}

/// Which guard refused a rule application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Feasibility,
    PositiveRhs,
    BasicOnly,
    SelfComposition,
    VariableCount { need: usize, got: usize },
    IndexOutOfRange { index: usize, vars: usize },
    Arity { need: usize, got: usize },
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Feasibility => f.write_str("feasibility: both inputs carry conditions on shared variables"),
            Guard::PositiveRhs => f.write_str("positivity: input right-hand side is not tagged positive"),
            Guard::BasicOnly => f.write_str("basic-only: input has side conditions"),
            Guard::SelfComposition => f.write_str("self-composition: same problem on shared variables"),
            Guard::VariableCount { need, got } => {
                write!(f, "arity: needs at least {need} variables, problem has {got}")
            }
            Guard::IndexOutOfRange { index, vars } => {
                write!(f, "index {index} out of range for {vars} variables")
            }
            Guard::Arity { need, got } => write!(f, "rule takes {need} problem(s), got {got}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("rule `{rule}` is inapplicable: {guard}")]
    Inapplicable { rule: String, guard: Guard },
    #[error("rule `{rule}` produced an invalid problem: {message}")]
    Internal { rule: String, message: String },
}

impl RuleError {
    pub fn guard(&self) -> Option<&Guard> {
        match self {
            RuleError::Inapplicable { guard, .. } => Some(guard),
            RuleError::Internal { .. } => None,
        }
    }
}

/// A derived problem plus the step that produced it. The step is also the
/// last entry of the problem's provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub problem: Problem,
    pub step: Step,
}

/// Parent trace(s) followed by `step`; step references inside the second
/// trace are shifted past the first.
pub(crate) fn extend_trace(p1: &Problem, p2: Option<&Problem>, step: Step) -> Vec<Step> {
    let mut out = p1.provenance().to_vec();
    if let Some(p2) = p2 {
        let offset = out.len();
        out.extend(p2.provenance().iter().map(|s| {
            let mut s = s.clone();
            for r in &mut s.parents {
                if let ParentRef::Step(i) = r {
                    *i += offset;
                }
            }
            s
        }));
    }
    out.push(step);
    out
}

/// Every rule whose guards pass, in table order. With two problems only
/// composition rows are listed; with one, variable and statement rules.
pub fn applicable_rules(p1: &Problem, p2: Option<&Problem>) -> Vec<TransformRule> {
    let candidates: Vec<TransformRule> = match p2 {
        Some(_) => {
            let general = CompositionKind::ALL
                .into_iter()
                .filter(|k| !k.positive_only())
                .map(|k| TransformRule::compose(k, false));
            let positive = CompositionKind::ALL
                .into_iter()
                .map(|k| TransformRule::compose(k, true));
            general.chain(positive).collect()
        }
        None => VarRuleKind::ALL
            .into_iter()
            .map(TransformRule::var)
            .chain(StmtRuleKind::ALL.into_iter().map(TransformRule::stmt))
            .collect(),
    };
    candidates
        .into_iter()
        .filter(|r| match p2 {
            Some(q) => r.check_binary(p1, q).is_ok(),
            None => r.check_unary(p1).is_ok(),
        })
        .collect()
}

/// Applies any rule; two-problem rules need `p2`.
pub fn apply_rule<R: Rng + ?Sized>(
    rule: &TransformRule,
    p1: &Problem,
    p2: Option<&Problem>,
    rng: &mut R,
) -> Result<RuleOutcome, RuleError> {
    match (rule.kind(), p2) {
        (RuleKind::Compose { .. }, Some(q)) => compose(p1, q, rule, rng),
        (RuleKind::Compose { .. }, None) => Err(RuleError::Inapplicable {
            rule: rule.name().into(),
            guard: Guard::Arity { need: 2, got: 1 },
        }),
        (RuleKind::Var(_), None) | (RuleKind::TypeII(_), None) => apply_var_rule(p1, rule, rng),
        (RuleKind::Stmt(_), None) => apply_stmt_rule(p1, rule),
        (RuleKind::TypeI, None) => {
            let problem = type1_variant(p1, &mut FreshNamer::new(p1.variables().iter().cloned()));
            let step = problem
                .provenance()
                .last()
                .cloned()
                .expect("type I records a step");
            Ok(RuleOutcome { problem, step })
        }
        (_, Some(_)) => Err(RuleError::Inapplicable {
            rule: rule.name().into(),
            guard: Guard::Arity { need: 1, got: 2 },
        }),
    }
}

pub(crate) fn internal(rule: &TransformRule, e: impl fmt::Display) -> RuleError {
    RuleError::Internal {
        rule: rule.name().to_string(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_names_round_trip() {
        for k in VarRuleKind::ALL {
            let r: TransformRule = k.name().parse().unwrap();
            assert_eq!(r.kind(), RuleKind::Var(k));
        }
        for k in CompositionKind::ALL {
            let r: TransformRule = k.name().parse().unwrap();
            assert_eq!(r.name(), k.name());
        }
        let r: TransformRule = "Direct Addition (positive)".parse().unwrap();
        assert!(r.requires_positive_rhs());
        let r: TransformRule = "log".parse().unwrap();
        assert_eq!(r.kind(), RuleKind::Stmt(StmtRuleKind::Log));
        assert!("bogus".parse::<TransformRule>().is_err());
    }

    #[test]
    fn table_sizes() {
        assert_eq!(VarRuleKind::upper_block().len(), 14);
        assert!(VarRuleKind::upper_block().iter().all(|k| !k.basic_only()));
        assert_eq!(VarRuleKind::ALL.iter().filter(|k| k.basic_only()).count(), 4);
    }
}
