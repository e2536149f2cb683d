//! Seeded corpus generation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{problem_from_value, CorpusMeta, ParseError};
use crate::lean::render_statement;
use crate::problem::{Category, Family, ParentRef, Problem, StatementKey};
use crate::prompt::{PromptTask, Template};
use crate::transforms::{
    apply_rule, applicable_rules, apply_var_rule, type1_variant, type2_variant, FreshNamer, RuleError, RuleKind,
    TransformRule, VarRuleKind, Weights,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub families: BTreeSet<Family>,
    pub count: usize,
    pub depth: usize,
    pub weights: Weights,
    pub dedup: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            families: Family::ALL.into_iter().collect(),
            count: 100,
            depth: 1,
            weights: Weights::default(),
            dedup: true,
        }
    }
}

impl GenConfig {
    /// One composition per problem.
    pub fn composition_only(seed: u64, count: usize) -> Self {
        GenConfig {
            seed,
            families: [Family::Composition].into_iter().collect(),
            count,
            depth: 1,
            ..GenConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if self.families.is_empty() {
            return bad("at least one rule family must be enabled");
        }
        if !self.weights.valid() {
            return bad("weights must be positive with lo <= hi");
        }
        Ok(())
    }

    pub fn meta(&self) -> CorpusMeta {
        CorpusMeta {
            seed: self.seed,
            families: self.families.iter().map(|f| f.as_str().to_string()).collect(),
            count: self.count,
            depth: self.depth,
            weights: self.weights.describe(),
            dedup: self.dedup,
            version: VERSION.to_string(),
            sampling: "uniform-parents,uniform-applicable-rules,depth-uniform".to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no seeds to draw from")]
    NoSeeds,
    #[error("produced {produced} of {target} problems within {attempts} attempts")]
    Exhausted { produced: usize, target: usize, attempts: usize },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("no proof supplied for {0}")]
    MissingProof(String),
    #[error("seed split: {0}")]
    Split(String),
}

/// The generic Table 5 rows duplicate the positive ones when both inputs are
/// positively tagged; only the positive rows are kept then.
fn candidates(current: &Problem, partner: &Problem, families: &BTreeSet<Family>) -> Vec<TransformRule> {
    let mut out = Vec::new();
    if families.contains(&Family::Composition) {
        let both = current.rhs_positive() && partner.rhs_positive();
        out.extend(
            applicable_rules(current, Some(partner))
                .into_iter()
                .filter(|r| !both || matches!(r.kind(), RuleKind::Compose { positive: true, .. })),
        );
    }
    for r in applicable_rules(current, None) {
        let fam = r.family();
        if families.contains(&fam) {
            out.push(r);
        }
    }
    if families.contains(&Family::TypeI) {
        out.push(TransformRule::type1());
    }
    if families.contains(&Family::TypeII) {
        out.extend(
            VarRuleKind::upper_block()
                .iter()
                .map(|k| TransformRule::type2(*k))
                .filter(|r| r.check_unary(current).is_ok()),
        );
    }
    out
}

/// Seed id at the root of the first parent chain.
pub fn root_seed(p: &Problem) -> &str {
    match p.provenance().first().and_then(|s| s.parents.first()) {
        Some(ParentRef::Problem(id)) => id,
        _ => p.id(),
    }
}

fn build_one<R: Rng + ?Sized>(seeds: &[Problem], cfg: &GenConfig, rng: &mut R) -> Option<(Problem, TransformRule)> {
    let steps = rng.gen_range(1..=cfg.depth);
    let mut current = seeds.choose(rng)?.clone();
    let mut intermediates: BTreeMap<String, usize> = BTreeMap::new();
    let mut last = None;
    for i in 0..steps {
        let partner = seeds.choose(rng)?;
        let rule = *candidates(&current, partner, &cfg.families).choose(rng)?;
        let rule = rule.with_weights(cfg.weights);
        let p2 = matches!(rule.kind(), RuleKind::Compose { .. }).then_some(partner);
        let out = apply_rule(&rule, &current, p2, rng).ok()?;
        if i + 1 < steps {
            intermediates.insert(out.problem.id().to_string(), out.problem.provenance().len() - 1);
        }
        current = out.problem;
        last = Some(rule);
    }
    let last = last?;
    if intermediates.is_empty() {
        return Some((current, last));
    }
    let mut trace = current.provenance().to_vec();
    for step in &mut trace {
        for r in &mut step.parents {
            if let ParentRef::Problem(id) = r {
                if let Some(&j) = intermediates.get(id.as_str()) {
                    *r = ParentRef::Step(j);
                }
            }
        }
    }
    Some((current.with_provenance(trace), last))
}

fn generated_id(p: &Problem, rule: &TransformRule, k: usize) -> String {
    format!("{}_{}_{}_{}", p.category(), root_seed(p), rule.slug(), k)
}

/// Draws `cfg.count` problems, each from uniformly chosen seeds and a
/// uniformly chosen applicable rule per step.
pub fn generate_mix(seeds: &[Problem], cfg: &GenConfig) -> Result<Vec<Problem>, GenError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(GenError::NoSeeds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let budget = 10 * cfg.count;
    let mut seen: BTreeSet<StatementKey> = BTreeSet::new();
    let mut out = Vec::with_capacity(cfg.count);
    let mut attempts = 0;
    while out.len() < cfg.count {
        if attempts == budget {
            return Err(GenError::Exhausted { produced: out.len(), target: cfg.count, attempts });
        }
        attempts += 1;
        let Some((p, rule)) = build_one(seeds, cfg, &mut rng) else { continue };
        if cfg.dedup && !seen.insert(p.statement_key()) {
            continue;
        }
        let id = generated_id(&p, &rule, out.len() + 1);
        out.push(p.with_id(id));
    }
    Ok(out)
}

/// One Type I and one Type II variant per seed, in seed order. The Type II
/// rule is drawn from the rules that apply to every problem.
pub fn expand_simp<R: Rng + ?Sized>(seeds: &[Problem], rng: &mut R) -> Result<Vec<Problem>, GenError> {
    let mut out = Vec::with_capacity(2 * seeds.len());
    for s in seeds {
        out.push(type1_variant(s, &mut FreshNamer::default()));
        let kind = *VarRuleKind::upper_block().choose(rng).expect("nonempty rule block");
        out.push(type2_variant(s, kind, rng)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Eligibility {
    pub kept: Vec<Problem>,
    pub rejected: Vec<Rejection>,
}

fn reason(e: &ParseError) -> &'static str {
    match e {
        ParseError::IntegerParameter { .. } => "integer-parameter",
        ParseError::VariableArity { .. } => "variable-arity",
        ParseError::BasicAssumption { .. } => "basic-assumption",
        ParseError::Json(_) => "malformed",
        ParseError::Schema { .. } | ParseError::Semantic { .. } => "invalid",
    }
}

/// Splits raw corpus records into representable problems and rejections.
/// Works on text because ineligible records have no `Problem` form.
pub fn filter_eligible(text: &str) -> Eligibility {
    let mut out = Eligibility::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(line)
            .map_err(|e| ParseError::Json(e.to_string()))
            .and_then(|v| problem_from_value(&v));
        match parsed {
            Ok(p) => out.kept.push(p),
            Err(e) => out.rejected.push(Rejection {
                line: i + 1,
                id: e.record_id().map(str::to_string),
                reason: reason(&e).to_string(),
                detail: e.to_string(),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSplit {
    pub train: Vec<String>,
    pub held_out: Vec<String>,
}

impl SeedSplit {
    /// Seeds of `category` train; everything else is held out.
    pub fn by_category(seeds: &[Problem], category: Category) -> Self {
        let (train, held): (Vec<&Problem>, Vec<&Problem>) = seeds.iter().partition(|p| p.category() == category);
        SeedSplit {
            train: train.iter().map(|p| p.id().to_string()).collect(),
            held_out: held.iter().map(|p| p.id().to_string()).collect(),
        }
    }

    pub fn validate(&self, seeds: &[Problem]) -> Result<(), GenError> {
        let train: BTreeSet<&str> = self.train.iter().map(String::as_str).collect();
        let held: BTreeSet<&str> = self.held_out.iter().map(String::as_str).collect();
        if let Some(id) = train.intersection(&held).next() {
            return Err(GenError::Split(format!("{id} is in both sides")));
        }
        let all: BTreeSet<&str> = seeds.iter().map(Problem::id).collect();
        let union: BTreeSet<&str> = train.union(&held).copied().collect();
        if union != all {
            return Err(GenError::Split("split does not cover the seed corpus exactly".into()));
        }
        if train.is_empty() {
            return Err(GenError::Split("empty training side".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtTask {
    pub id: String,
    pub parents: Vec<String>,
    pub task: PromptTask,
}

#[derive(Debug, Clone, Default)]
pub struct FtCorpus {
    pub stage1: Vec<Problem>,
    pub stage2: Vec<Problem>,
    pub tasks: Vec<FtTask>,
}

pub const STAGE1_FACTOR: usize = 4;

/// Stage 1 gives every training seed `STAGE1_FACTOR` variable-level
/// variants with distinct statements; stage 2 composes stage-1 problems to
/// `cfg.count`. With `proofs`, each composed problem also gets an
/// in-context generation task holding the proofs of its two parents (looked
/// up by parent id, then by the parent's seed id).
pub fn make_ft_corpus(
    seeds: &[Problem],
    split: &SeedSplit,
    cfg: &GenConfig,
    proofs: Option<&BTreeMap<String, String>>,
) -> Result<FtCorpus, GenError> {
    cfg.validate()?;
    split.validate(seeds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let by_id: BTreeMap<&str, &Problem> = seeds.iter().map(|p| (p.id(), p)).collect();
    let mut stage1 = Vec::new();
    for id in &split.train {
        let seed = by_id[id.as_str()];
        let mut rules = VarRuleKind::upper_block().to_vec();
        rules.shuffle(&mut rng);
        let mut keys = BTreeSet::new();
        for k in rules {
            if keys.len() == STAGE1_FACTOR {
                break;
            }
            let out = apply_var_rule(seed, &TransformRule::var(k), &mut rng)?;
            if keys.insert(out.problem.statement_key()) {
                stage1.push(out.problem);
            }
        }
    }
    let stage2_cfg = GenConfig {
        families: [Family::Composition].into_iter().collect(),
        depth: 1,
        ..cfg.clone()
    };
    let stage2 = generate_mix(&stage1, &stage2_cfg)?;
    let mut tasks = Vec::new();
    if let Some(proofs) = proofs {
        let s1: BTreeMap<&str, &Problem> = stage1.iter().map(|p| (p.id(), p)).collect();
        for p in &stage2 {
            let parents: Vec<String> = p
                .provenance()
                .last()
                .map(|s| {
                    s.parents
                        .iter()
                        .filter_map(|r| match r {
                            ParentRef::Problem(id) => Some(id.clone()),
                            ParentRef::Step(_) => None,
                        })
                        .collect()
                })
                .unwrap_or_default();
            let mut code = Vec::new();
            for parent in &parents {
                let fallback = s1.get(parent.as_str()).map(|q| root_seed(q));
                let proof = proofs
                    .get(parent)
                    .or_else(|| fallback.and_then(|f| proofs.get(f)))
                    .ok_or_else(|| GenError::MissingProof(parent.clone()))?;
                code.push(proof.clone());
            }
            let task = PromptTask::new(Template::IclGen, render_statement(p).statement()).with_proofs(code);
            tasks.push(FtTask { id: p.id().to_string(), parents, task });
        }
    }
    Ok(FtCorpus { stage1, stage2, tasks })
}
