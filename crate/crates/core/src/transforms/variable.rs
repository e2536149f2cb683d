use std::collections::BTreeMap;

use rand::Rng;

use super::{extend_trace, internal, FreshNamer, RuleError, RuleKind, RuleOutcome, TransformRule, VarRuleKind};
use crate::expr::{Expr, ExprError, VarId};
use crate::problem::{ParamValue, ParentRef, Problem, Step};

fn image(kind: VarRuleKind, x: Expr) -> Result<Expr, ExprError> {
    use VarRuleKind::*;
    Ok(match kind {
        SqrtAll | SqrtRandom => Expr::sqrt(x),
        SqAll | SqRandom => Expr::pow_nat(x, 2)?,
        CubeAll | CubeRandom => Expr::pow_nat(x, 3)?,
        ReciprocalAll | ReciprocalRandom => Expr::recip(x)?,
        ExpAll | ExpRandom => Expr::sub(Expr::exp(x), Expr::int(1)),
        LogAll | LogRandom => Expr::log(Expr::add_raw(vec![Expr::int(1), x])?),
        _ => unreachable!("not a pointwise substitution"),
    })
}

fn cyclic(kind: VarRuleKind, a: Expr, b: Expr) -> Result<Expr, ExprError> {
    use VarRuleKind::*;
    Ok(match kind {
        CycAdd => Expr::add_raw(vec![a, b])?,
        CycMul => Expr::mul_raw(vec![a, b])?,
        CycDiv => Expr::div(a, b)?,
        CycDivAdd => Expr::div(a.clone(), Expr::add_raw(vec![a, b])?)?,
        _ => unreachable!("not a cyclic substitution"),
    })
}

/// Applies a variable-level rule: one simultaneous substitution on the
/// statement and every condition. `rule` may be a plain variable rule or a
/// Type II rule; only the provenance family differs.
pub fn apply_var_rule<R: Rng + ?Sized>(
    p: &Problem,
    rule: &TransformRule,
    rng: &mut R,
) -> Result<RuleOutcome, RuleError> {
    let kind = match rule.kind() {
        RuleKind::Var(k) | RuleKind::TypeII(k) => k,
        _ => {
            return Err(internal(rule, "not a variable-level rule"));
        }
    };
    rule.check_unary(p)?;
    let vars = p.variables();
    let m = vars.len();
    let mut map: BTreeMap<VarId, Expr> = BTreeMap::new();
    let mut new_vars = vars.to_vec();
    let mut params = BTreeMap::new();
    let bad = |e: ExprError| internal(rule, e);
    use VarRuleKind::*;
    match kind {
        Shift => {
            let mut namer = FreshNamer::new(vars.iter().cloned());
            let last = namer.fresh_for(&vars[m - 1]);
            for i in 0..m {
                let target = if i + 1 < m { vars[i + 1].clone() } else { last.clone() };
                map.insert(vars[i].clone(), Expr::var(target));
            }
            new_vars = vars[1..].to_vec();
            new_vars.push(last);
        }
        Rep => {
            let mut namer = FreshNamer::new(vars.iter().cloned());
            new_vars = vars.iter().map(|v| namer.fresh_for(v)).collect();
            for (old, new) in vars.iter().zip(&new_vars) {
                map.insert(old.clone(), Expr::var(new.clone()));
            }
        }
        CycAdd | CycMul | CycDiv | CycDivAdd => {
            for i in 0..m {
                let a = Expr::var(vars[i].clone());
                let b = Expr::var(vars[(i + 1) % m].clone());
                map.insert(vars[i].clone(), cyclic(kind, a, b).map_err(bad)?);
            }
        }
        _ if kind.is_random() => {
            let i = match rule.index() {
                Some(i) => i,
                None => rng.gen_range(1..=m),
            };
            params.insert("index".to_string(), ParamValue::Int(i as i64));
            let v = &vars[i - 1];
            map.insert(v.clone(), image(kind, Expr::var(v.clone())).map_err(bad)?);
        }
        _ => {
            for v in vars {
                map.insert(v.clone(), image(kind, Expr::var(v.clone())).map_err(bad)?);
            }
        }
    }
    let step = Step {
        rule: rule.name().to_string(),
        family: rule.family(),
        variant: None,
        params,
        parents: vec![ParentRef::Problem(p.id().to_string())],
    };
    let problem = Problem::new(
        format!("{}_{}", p.id(), rule.slug()),
        p.category(),
        new_vars,
        p.conditions().iter().map(|c| c.substitute(&map)).collect(),
        p.lhs().substitute(&map),
        p.rhs().substitute(&map),
        p.rhs_positive(),
    )
    .map_err(|e| internal(rule, e))?
    .with_provenance(extend_trace(p, None, step.clone()));
    Ok(RuleOutcome { problem, step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Category, Condition, Family};
    use crate::transforms::Guard;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(n: &str) -> Expr {
        Expr::named(n)
    }

    fn amgm2() -> Problem {
        let lhs = Expr::add_raw(vec![e("x"), e("y")]).unwrap();
        let rhs = Expr::mul_raw(vec![
            Expr::int(2),
            Expr::sqrt(Expr::mul_raw(vec![e("x"), e("y")]).unwrap()),
        ])
        .unwrap();
        Problem::new("amgm_p1", Category::Amgm, vec![VarId::named("x"), VarId::named("y")], vec![], lhs, rhs, true)
            .unwrap()
    }

    fn sq(x: Expr) -> Expr {
        Expr::pow_nat(x, 2).unwrap()
    }

    #[test]
    fn sq_all_substitutes_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = apply_var_rule(&amgm2(), &TransformRule::type2(VarRuleKind::SqAll), &mut rng).unwrap();
        let lhs = Expr::add_raw(vec![sq(e("x")), sq(e("y"))]).unwrap();
        let rhs = Expr::mul_raw(vec![
            Expr::int(2),
            Expr::sqrt(Expr::mul_raw(vec![sq(e("x")), sq(e("y"))]).unwrap()),
        ])
        .unwrap();
        assert_eq!(out.problem.lhs(), &lhs);
        assert_eq!(out.problem.rhs(), &rhs);
        assert_eq!(out.step.family, Family::TypeII);
        assert!(out.problem.rhs_positive());
    }

    #[test]
    fn cyclic_rules_refuse_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Expr::add_raw(vec![e("x"), e("y"), e("z")]).unwrap();
        let p = Problem::new(
            "c",
            Category::Amgm,
            ["x", "y", "z"].iter().map(|n| VarId::named(*n)).collect(),
            vec![Condition::eq(s.clone(), Expr::int(3))],
            Expr::int(3),
            s,
            true,
        )
        .unwrap();
        let err = apply_var_rule(&p, &TransformRule::var(VarRuleKind::CycMul), &mut rng).unwrap_err();
        assert_eq!(err.guard(), Some(&Guard::BasicOnly));
    }

    #[test]
    fn sqrt_random_with_preset_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rule = TransformRule::var(VarRuleKind::SqrtRandom).with_index(1);
        let out = apply_var_rule(&amgm2(), &rule, &mut rng).unwrap();
        let want = Expr::add_raw(vec![Expr::sqrt(e("x")), e("y")]).unwrap();
        assert_eq!(out.problem.lhs(), &want);
        assert_eq!(out.step.params.get("index"), Some(&ParamValue::Int(1)));
    }

    #[test]
    fn shift_on_indexed_variable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x1 = VarId::new("x", 1);
        let p = Problem::new("s", Category::Misc, vec![x1.clone()], vec![], Expr::var(x1.clone()), Expr::int(0), false)
            .unwrap();
        let out = apply_var_rule(&p, &TransformRule::var(VarRuleKind::Shift), &mut rng).unwrap();
        let x2 = VarId::new("x", 2);
        assert_eq!(out.problem.variables(), &[x2.clone()]);
        assert_eq!(out.problem.lhs(), &Expr::var(x2));
    }

    #[test]
    fn exp_all_replaces_with_exp_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = apply_var_rule(&amgm2(), &TransformRule::var(VarRuleKind::ExpAll), &mut rng).unwrap();
        let em1 = |n| Expr::sub(Expr::exp(e(n)), Expr::int(1));
        assert_eq!(out.problem.lhs(), &Expr::add_raw(vec![em1("x"), em1("y")]).unwrap());
    }

    #[test]
    fn cyc_div_add_wraps_around() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let names = ["x", "y", "z"];
        let p = Problem::new(
            "t",
            Category::Misc,
            names.iter().map(|n| VarId::named(*n)).collect(),
            vec![],
            Expr::add_raw(names.iter().map(|n| e(n)).collect()).unwrap(),
            Expr::int(0),
            false,
        )
        .unwrap();
        let out = apply_var_rule(&p, &TransformRule::var(VarRuleKind::CycDivAdd), &mut rng).unwrap();
        let term = |a: &str, b: &str| {
            Expr::div(e(a), Expr::add_raw(vec![e(a), e(b)]).unwrap()).unwrap()
        };
        let want = Expr::add_raw(vec![term("x", "y"), term("y", "z"), term("z", "x")]).unwrap();
        assert_eq!(out.problem.lhs(), &want);
    }
}
