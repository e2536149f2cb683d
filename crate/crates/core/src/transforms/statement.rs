use std::collections::BTreeMap;

use super::{extend_trace, internal, RuleError, RuleKind, RuleOutcome, StmtRuleKind, TransformRule};
use crate::expr::{Expr, ExprError};
use crate::problem::{ParentRef, Problem, Step};

fn wrap(kind: StmtRuleKind, e: &Expr) -> Result<Expr, ExprError> {
    let e = e.clone();
    Ok(match kind {
        StmtRuleKind::Exp => Expr::exp(e),
        StmtRuleKind::Cube => Expr::pow_nat(e, 3)?,
        StmtRuleKind::Sqrt => Expr::sqrt(e),
        StmtRuleKind::Sq => Expr::pow_nat(e, 2)?,
        StmtRuleKind::Log => Expr::log(e),
    })
}

fn output_tag(kind: StmtRuleKind, input: bool) -> bool {
    match kind {
        StmtRuleKind::Exp | StmtRuleKind::Sqrt | StmtRuleKind::Sq => true,
        StmtRuleKind::Cube => input,
        StmtRuleKind::Log => false,
    }
}

/// Wraps both sides of the statement in a monotone function.
pub fn apply_stmt_rule(p: &Problem, rule: &TransformRule) -> Result<RuleOutcome, RuleError> {
    let RuleKind::Stmt(kind) = rule.kind() else {
        return Err(internal(rule, "not a statement-level rule"));
    };
    rule.check_unary(p)?;
    let lhs = wrap(kind, p.lhs()).map_err(|e| internal(rule, e))?;
    let rhs = wrap(kind, p.rhs()).map_err(|e| internal(rule, e))?;
    let step = Step {
        rule: rule.name().to_string(),
        family: rule.family(),
        variant: None,
        params: BTreeMap::new(),
        parents: vec![ParentRef::Problem(p.id().to_string())],
    };
    let problem = Problem::new(
        format!("{}_{}", p.id(), rule.slug()),
        p.category(),
        p.variables().to_vec(),
        p.conditions().to_vec(),
        lhs,
        rhs,
        output_tag(kind, p.rhs_positive()),
    )
    .map_err(|e| internal(rule, e))?
    .with_provenance(extend_trace(p, None, step.clone()));
    Ok(RuleOutcome { problem, step })
}
