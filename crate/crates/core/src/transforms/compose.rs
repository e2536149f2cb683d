use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::{extend_trace, internal, FreshNamer, RuleError, RuleKind, RuleOutcome, TransformRule};
use crate::expr::{Expr, VarId};
use crate::problem::{Category, ParamValue, ParentRef, Problem, Step};

/// Two problems placed on one shared variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPair {
    pub first: Problem,
    pub second: Problem,
    pub variables: Vec<VarId>,
}

/// Lifts onto the union of the variable lists. Variables of `p2` that clash
/// with `p1` are renamed only when both problems carry side conditions.
pub fn lift(p1: &Problem, p2: &Problem) -> LiftedPair {
    let rename = !p1.is_basic_only() && !p2.is_basic_only();
    lift_impl(p1, p2, rename)
}

/// Lifts with every clashing variable of `p2` renamed, regardless of
/// conditions.
pub fn lift_disjoint(p1: &Problem, p2: &Problem) -> LiftedPair {
    lift_impl(p1, p2, true)
}

fn lift_impl(p1: &Problem, p2: &Problem, rename: bool) -> LiftedPair {
    let left = p1.var_set();
    let second = if rename && p2.variables().iter().any(|v| left.contains(v)) {
        let mut namer = FreshNamer::new(left.iter().cloned().chain(p2.variables().iter().cloned()));
        let map: BTreeMap<VarId, Expr> = p2
            .variables()
            .iter()
            .filter(|v| left.contains(*v))
            .map(|v| (v.clone(), Expr::var(namer.fresh_for(v))))
            .collect();
        rename_problem(p2, &map)
    } else {
        p2.clone()
    };
    let mut variables = p1.variables().to_vec();
    variables.extend(second.variables().iter().filter(|v| !left.contains(*v)).cloned());
    LiftedPair {
        first: p1.clone(),
        second,
        variables,
    }
}

/// Applies a variable-to-variable renaming to every part of a problem.
pub(crate) fn rename_problem(p: &Problem, map: &BTreeMap<VarId, Expr>) -> Problem {
    let variables = p
        .variables()
        .iter()
        .map(|v| match map.get(v).and_then(Expr::as_var) {
            Some(n) => n.clone(),
            None => v.clone(),
        })
        .collect();
    Problem::new(
        p.id(),
        p.category(),
        variables,
        p.conditions().iter().map(|c| c.substitute(map)).collect(),
        p.lhs().substitute(map),
        p.rhs().substitute(map),
        p.rhs_positive(),
    )
    .expect("injective renaming preserves problem invariants")
    .with_provenance(p.provenance().to_vec())
}

fn weighted(c: u32, e: &Expr) -> Expr {
    Expr::mul_raw(vec![Expr::int(i64::from(c)), e.clone()]).expect("two factors")
}

/// Combines two problems with one row of the composition table.
pub fn compose<R: Rng + ?Sized>(
    p1: &Problem,
    p2: &Problem,
    rule: &TransformRule,
    rng: &mut R,
) -> Result<RuleOutcome, RuleError> {
    rule.check_binary(p1, p2)?;
    let RuleKind::Compose { kind, positive } = rule.kind() else {
        unreachable!("check_binary accepts only composition rules");
    };
    let lifted = lift(p1, p2);
    let (a, b) = (&lifted.first, &lifted.second);
    debug_assert_eq!(
        a.var_set()
            .union(&b.var_set())
            .cloned()
            .collect::<BTreeSet<_>>()
            .len(),
        lifted.variables.len()
    );
    let (f1, g1, f2, g2) = (a.lhs(), a.rhs(), b.lhs(), b.rhs());
    let mut params = BTreeMap::new();
    use super::CompositionKind::*;
    let (lhs, rhs) = match kind {
        DirectAddition => (
            Expr::sum(vec![f1.clone(), f2.clone()]),
            Expr::sum(vec![g1.clone(), g2.clone()]),
        ),
        WeightedSum => {
            let (mu, lambda) = rule.weights().draw(rng);
            params.insert("mu".to_string(), ParamValue::Int(i64::from(mu)));
            params.insert("lambda".to_string(), ParamValue::Int(i64::from(lambda)));
            let side = |x: &Expr, y: &Expr| {
                Expr::add_raw(vec![weighted(mu, x), weighted(lambda, y)]).expect("two terms")
            };
            (side(f1, f2), side(g1, g2))
        }
        Maxima => (
            Expr::max(f1.clone(), f2.clone()),
            Expr::max(g1.clone(), g2.clone()),
        ),
        Minima => (
            Expr::min(f1.clone(), f2.clone()),
            Expr::min(g1.clone(), g2.clone()),
        ),
        Multiplication => (
            Expr::product(vec![f1.clone(), f2.clone()]),
            Expr::product(vec![g1.clone(), g2.clone()]),
        ),
        Division => (
            Expr::div(f1.clone(), g2.clone()).map_err(|e| internal(rule, e))?,
            Expr::div(g1.clone(), f2.clone()).map_err(|e| internal(rule, e))?,
        ),
        Reciprocal => {
            let r = |e: &Expr| Expr::recip(e.clone()).map_err(|err| internal(rule, err));
            (
                Expr::add_raw(vec![r(g1)?, r(g2)?]).expect("two terms"),
                Expr::add_raw(vec![r(f1)?, r(f2)?]).expect("two terms"),
            )
        }
    };
    let mut conditions = a.conditions().to_vec();
    conditions.extend(b.conditions().iter().cloned());
    let step = Step {
        rule: rule.name().to_string(),
        family: rule.family(),
        variant: Some(if positive { "positive" } else { "general" }.to_string()),
        params,
        parents: vec![
            ParentRef::Problem(p1.id().to_string()),
            ParentRef::Problem(p2.id().to_string()),
        ],
    };
    let id = format!("{}_{}_{}", p1.id(), rule.slug(), p2.id());
    let problem = Problem::new(
        id,
        Category::Generated,
        lifted.variables.clone(),
        conditions,
        lhs,
        rhs,
        a.rhs_positive() && b.rhs_positive(),
    )
    .map_err(|e| internal(rule, e))?
    .with_provenance(extend_trace(p1, Some(p2), step.clone()));
    Ok(RuleOutcome { problem, step })
}
