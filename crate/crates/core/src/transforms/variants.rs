use std::collections::BTreeMap;

use rand::Rng;

use super::{apply_var_rule, extend_trace, FreshNamer, RuleError, TransformRule, VarRuleKind};
use crate::expr::{Expr, VarId};
use crate::problem::{Family, ParentRef, Problem, Step};

/// Duplicates a seed on fresh variables and joins the copies: by product
/// when the right-hand side is tagged positive, by sum otherwise.
pub fn type1_variant(seed: &Problem, namer: &mut FreshNamer) -> Problem {
    for v in seed.variables() {
        namer.reserve(v.clone());
    }
    let copy: Vec<VarId> = seed.variables().iter().map(|v| namer.fresh_for(v)).collect();
    let map: BTreeMap<VarId, Expr> = seed
        .variables()
        .iter()
        .cloned()
        .zip(copy.iter().cloned().map(Expr::var))
        .collect();
    let (fx, gx) = (seed.lhs().clone(), seed.rhs().clone());
    let (fy, gy) = (fx.substitute(&map), gx.substitute(&map));
    let tag = seed.rhs_positive();
    let (lhs, rhs) = if tag {
        (Expr::product(vec![fx, fy]), Expr::product(vec![gx, gy]))
    } else {
        (Expr::sum(vec![fx, fy]), Expr::sum(vec![gx, gy]))
    };
    let mut conditions = seed.conditions().to_vec();
    conditions.extend(seed.conditions().iter().map(|c| c.substitute(&map)));
    let mut variables = seed.variables().to_vec();
    variables.extend(copy);
    let rule = TransformRule::type1();
    let step = Step {
        rule: rule.name().to_string(),
        family: Family::TypeI,
        variant: Some(if tag { "product" } else { "sum" }.to_string()),
        params: BTreeMap::new(),
        parents: vec![ParentRef::Problem(seed.id().to_string())],
    };
    Problem::new(
        format!("{}_{}", seed.id(), rule.slug()),
        seed.category(),
        variables,
        conditions,
        lhs,
        rhs,
        tag,
    )
    .expect("a fresh duplicate of a valid problem is valid")
    .with_provenance(extend_trace(seed, None, step))
}

/// One Table 6 substitution recorded as a Type II variant.
pub fn type2_variant<R: Rng + ?Sized>(
    seed: &Problem,
    kind: VarRuleKind,
    rng: &mut R,
) -> Result<Problem, RuleError> {
    apply_var_rule(seed, &TransformRule::type2(kind), rng).map(|o| o.problem)
}
