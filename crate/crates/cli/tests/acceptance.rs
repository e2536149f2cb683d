//! One line per acceptance criterion: PASS, FAIL or SKIP, with timing.
//! Run with `cargo test -p ineqcomp --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use ineqcomp_core::corpus::serialize_corpus;
use ineqcomp_core::lean::{render_statement, render_statement_with, RenderOptions, PREAMBLE};
use ineqcomp_core::oracle::{check_problem, DEFAULT_TOLERANCE};
use ineqcomp_core::transforms::{
    applicable_rules, apply_rule, apply_stmt_rule, compose, lift_disjoint, type1_variant, type2_variant, CompositionKind,
    FreshNamer, StmtRuleKind, TransformRule, VarRuleKind, Weights,
};
use ineqcomp_core::{bundled, expand_simp, filter_eligible, generate_mix, Family, GenConfig, LeanArtifact, Problem};
use ineqcomp_harness::score::estimate;
use ineqcomp_harness::{pass_at_k, run_batch, verify, Attempt, BatchOptions, EvalRecord, Mode, Toolchain, Verifier, DEFAULT_TIMEOUT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Outcome {
    name: &'static str,
    verdict: Verdict,
    elapsed: Duration,
    limit: Option<Duration>,
}

fn run(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Outcome {
    let t = Instant::now();
    let mut verdict = f();
    let elapsed = t.elapsed();
    if let (Some(l), Verdict::Pass(d)) = (limit, &verdict) {
        if elapsed > l {
            verdict = Verdict::Fail(format!("{d}; took {elapsed:.2?}, limit {l:?}"));
        }
    }
    Outcome { name, verdict, elapsed, limit }
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn corpus_counts() -> Verdict {
    let seeds = bundled::seeds();
    let out = expand_simp(&seeds, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let fam = |f: Family| out.iter().filter(|p| p.provenance()[0].family == f).count();
    let (t1, t2) = (fam(Family::TypeI), fam(Family::TypeII));
    let conformant = filter_eligible(bundled::SEEDS);
    let fixture = filter_eligible(bundled::SEED_EXCLUSIONS);
    check(
        out.len() == 150 && t1 == 75 && t2 == 75 && conformant.kept.len() == 75 && conformant.rejected.is_empty()
            && fixture.kept.len() == 65,
        format!(
            "{} seeds -> {} variants ({t1} Type I, {t2} Type II); bundled kept {}/75; exclusion fixture kept {}/75",
            seeds.len(),
            out.len(),
            conformant.kept.len(),
            fixture.kept.len()
        ),
    )
}

fn mix_shape() -> Verdict {
    let seeds = bundled::seeds();
    let cfg = GenConfig::composition_only(7, 100);
    let a = generate_mix(&seeds, &cfg).unwrap();
    let b = generate_mix(&seeds, &cfg).unwrap();
    let distinct: BTreeSet<_> = a.iter().map(Problem::statement_key).collect();
    let single = a.iter().all(|p| p.provenance().len() == 1 && p.provenance()[0].family == Family::Composition);
    let same = serialize_corpus(Some(&cfg.meta()), &a) == serialize_corpus(Some(&cfg.meta()), &b);
    check(
        a.len() == 100 && distinct.len() == 100 && single && same,
        format!("{} problems, {} distinct, single composition step: {single}, identical reruns: {same}", a.len(), distinct.len()),
    )
}

fn rule_key(r: &TransformRule) -> String {
    format!("{:?}", r.kind())
}

fn metamorphic() -> Verdict {
    let seeds = bundled::seeds();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut children = Vec::new();
    let mut covered = BTreeSet::new();
    for (i, p) in seeds.iter().enumerate() {
        for rule in applicable_rules(p, None) {
            covered.insert(rule_key(&rule));
            children.push(apply_rule(&rule, p, None, &mut rng).unwrap().problem);
        }
        let q = &seeds[(i + 1) % seeds.len()];
        for rule in applicable_rules(p, Some(q)) {
            covered.insert(rule_key(&rule));
            children.push(apply_rule(&rule, p, Some(q), &mut rng).unwrap().problem);
        }
        children.push(type1_variant(p, &mut FreshNamer::default()));
        for k in VarRuleKind::upper_block() {
            children.push(type2_variant(p, *k, &mut rng).unwrap());
        }
    }
    // Composition rows the cyclic pairing missed, from any applicable pair.
    let mut rows: Vec<TransformRule> = CompositionKind::ALL
        .into_iter()
        .filter(|k| !k.positive_only())
        .map(|k| TransformRule::compose(k, false))
        .chain(CompositionKind::ALL.into_iter().map(|k| TransformRule::compose(k, true)))
        .collect();
    rows.retain(|r| !covered.contains(&rule_key(r)));
    'row: for rule in rows {
        for p in &seeds {
            for q in &seeds {
                if p.id() != q.id() && rule.check_binary(p, q).is_ok() {
                    covered.insert(rule_key(&rule));
                    children.push(apply_rule(&rule, p, Some(q), &mut rng).unwrap().problem);
                    continue 'row;
                }
            }
        }
    }
    let unary: Vec<TransformRule> = VarRuleKind::ALL
        .into_iter()
        .map(TransformRule::var)
        .chain(StmtRuleKind::ALL.into_iter().map(TransformRule::stmt))
        .collect();
    let never: Vec<String> = unary.iter().map(rule_key).filter(|k| !covered.contains(k)).collect();

    let (mut viol, mut tags, mut seed_viol) = (0usize, 0usize, 0usize);
    for p in &seeds {
        let r = check_problem(p, &mut ChaCha8Rng::seed_from_u64(11), 1000, DEFAULT_TOLERANCE).unwrap();
        seed_viol += r.violations.len() + r.tag_violations.len();
    }
    for p in &children {
        let r = check_problem(p, &mut ChaCha8Rng::seed_from_u64(13), 1000, DEFAULT_TOLERANCE).unwrap();
        viol += r.violations.len();
        tags += r.tag_violations.len();
    }
    let muts = bundled::mutations();
    let caught = muts
        .iter()
        .filter(|p| !check_problem(p, &mut ChaCha8Rng::seed_from_u64(11), 1000, DEFAULT_TOLERANCE).unwrap().violations.is_empty())
        .count();
    check(
        viol == 0 && tags == 0 && seed_viol == 0 && caught == 5 && muts.len() == 5,
        format!(
            "{} rule kinds over {} children: {viol} violations, {tags} tag violations; seeds {seed_viol}; mutations caught {caught}/{}{}",
            covered.len(),
            children.len(),
            muts.len(),
            if never.is_empty() { String::new() } else { format!("; inapplicable to every seed: {}", never.join(", ")) }
        ),
    )
}

fn golden() -> Verdict {
    let type1 = |id: &str| type1_variant(&bundled::seed(id).unwrap(), &mut FreshNamer::default());
    let named = |p: &Problem, n: &str| render_statement_with(p, &RenderOptions { name: Some(n.into()), ..Default::default() });
    let (left, right) = bundled::p70_parents();
    let rule = TransformRule::compose(CompositionKind::WeightedSum, false).with_weights(Weights::Fixed(3, 2));
    let mixed = compose(&left, &right, &rule, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().problem;
    let p70 = apply_stmt_rule(&mixed, &TransformRule::stmt(StmtRuleKind::Cube)).unwrap().problem;
    let c1 = type1("cauchy_p1");
    let cases = [
        ("cauchy_p1", named(&c1, "cauchy_p1")),
        ("cauchy_p26", named(&c1, "cauchy_p26")),
        ("amgm_p36", named(&type1("amgm_p36"), "amgm_p36")),
        ("amgm_p47", named(&type1("amgm_p47"), "amgm_p47")),
        ("alge_whole_p70", named(&p70, "alge_whole_p70")),
    ];
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    let mut bad = Vec::new();
    for (name, art) in &cases {
        match std::fs::read_to_string(dir.join(format!("{name}.lean"))) {
            Ok(want) if want == art.file() => {}
            Ok(_) => bad.push(format!("{name} differs")),
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "5/5 byte-identical".into() } else { bad.join("; ") })
}

fn type1_consistency() -> Verdict {
    let seeds = bundled::seeds();
    let tagged: Vec<&Problem> = seeds.iter().filter(|p| p.rhs_positive()).collect();
    let mut mismatched = Vec::new();
    for s in &tagged {
        let t1 = type1_variant(s, &mut FreshNamer::default());
        let lifted = lift_disjoint(s, s);
        let copy = lifted.second.clone().with_id(format!("{}_copy", s.id()));
        let rule = TransformRule::compose(CompositionKind::Multiplication, true);
        let mixed = compose(&lifted.first, &copy, &rule, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().problem;
        if !t1.same_statement(&mixed) {
            mismatched.push(s.id().to_string());
        }
    }
    let goal = render_statement(&type1_variant(&bundled::seed("cauchy_p1").unwrap(), &mut FreshNamer::default())).goal;
    let has16 = goal.contains("16");
    check(
        mismatched.is_empty() && has16 && !tagged.is_empty(),
        format!("{}/{} tag-true seeds equal lift+compose(Multiplication); cauchy_p1 goal `{goal}`", tagged.len() - mismatched.len(), tagged.len()),
    )
}

fn brute(n: usize, c: usize, k: usize) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            total += 1;
            hit += ((mask & ((1 << c) - 1)) != 0) as u64;
        }
    }
    hit as f64 / total as f64
}

fn passk() -> Verdict {
    let (mut cases, mut wrong, mut nonmono) = (0, 0, 0);
    for n in 1..=8usize {
        for c in 0..=n {
            for k in 1..=n {
                cases += 1;
                let recs: Vec<EvalRecord> = (0..n)
                    .map(|a| EvalRecord { compiled: a < c, ..EvalRecord::failed("p", a, "") })
                    .collect();
                let got = pass_at_k(&recs, k).unwrap().mean;
                if (got - brute(n, c, k)).abs() > 1e-12 {
                    wrong += 1;
                }
                if k < n && estimate(n, c, k) > estimate(n, c, k + 1) + 1e-12 {
                    nonmono += 1;
                }
                if c < n && estimate(n, c, k) > estimate(n, c + 1, k) + 1e-12 {
                    nonmono += 1;
                }
            }
        }
    }
    check(wrong == 0 && nonmono == 0, format!("{cases} (n,c,k) cases: {wrong} mismatches with enumeration, {nonmono} monotonicity breaks"))
}

struct Fake(AtomicUsize);

impl Verifier for Fake {
    fn verify(&self, id: &str, attempt: usize, art: &LeanArtifact) -> EvalRecord {
        self.0.fetch_add(1, Ordering::SeqCst);
        EvalRecord { compiled: art.proof.contains("nlinarith"), ..EvalRecord::failed(id, attempt, "") }
    }
}

fn harness_determinism() -> Verdict {
    let problems: Vec<Problem> = bundled::seeds().into_iter().take(5).collect();
    let attempts: Vec<Attempt> = problems
        .iter()
        .flat_map(|p| {
            (0..4).map(move |a| Attempt {
                problem_id: p.id().into(),
                attempt_id: a,
                model: "fixture".into(),
                proof_text: if a % 2 == 0 { "by\n  nlinarith".into() } else { "by\n  simp".into() },
                error: None,
            })
        })
        .collect();
    let key = |v: &[EvalRecord]| {
        let mut k: Vec<_> = v.iter().map(|r| (r.problem_id.clone(), r.attempt, r.compiled)).collect();
        k.sort();
        k
    };
    let one = run_batch(&problems, &attempts, &Fake(AtomicUsize::new(0)), &BatchOptions { workers: 1, ..Default::default() }).unwrap();
    let eight = run_batch(&problems, &attempts, &Fake(AtomicUsize::new(0)), &BatchOptions { workers: 8, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = BatchOptions { workers: 4, journal: Some(dir.path().join("j.jsonl")), ..Default::default() };
    let half: Vec<Attempt> = attempts.iter().filter(|a| a.attempt_id < 2).cloned().collect();
    run_batch(&problems, &half, &Fake(AtomicUsize::new(0)), &opts).unwrap();
    let resumed = Fake(AtomicUsize::new(0));
    let all = run_batch(&problems, &attempts, &resumed, &opts).unwrap();
    let again = Fake(AtomicUsize::new(0));
    run_batch(&problems, &attempts, &again, &opts).unwrap();
    let (r, g) = (resumed.0.load(Ordering::SeqCst), again.0.load(Ordering::SeqCst));
    check(
        attempts.len() == 20 && key(&one) == key(&eight) && all.len() == 20 && r == 10 && g == 0,
        format!("workers 1 vs 8 identical: {}; resume verified {r} new of 20, full rerun verified {g}", key(&one) == key(&eight)),
    )
}

fn lean_integration() -> Verdict {
    let Some(tc) = Toolchain::from_env() else {
        return Verdict::Skip("no Lean toolchain (set INEQCOMP_LEAN or INEQCOMP_LEAN_PROJECT)".into());
    };
    let mut statements = bundled::seeds();
    statements.extend(generate_mix(&bundled::seeds(), &GenConfig { seed: 1, count: 20, depth: 2, ..GenConfig::default() }).unwrap());
    let mut failed = Vec::new();
    for p in &statements {
        let r = verify(p.id(), 0, &render_statement(p), &tc, DEFAULT_TIMEOUT, Mode::Statement).unwrap();
        if !r.compiled {
            failed.push(format!("{}: {}", p.id(), r.error.lines().next().unwrap_or("")));
        }
    }
    let text = include_str!("../../harness/tests/fixtures/cauchy_p26.lean");
    let (head, proof) = text.split_once(" := ").unwrap();
    let (head, goal) = head.split_once(" : (").unwrap();
    let (name, binders) = head.strip_prefix("theorem ").unwrap().split_once(' ').unwrap();
    let art = LeanArtifact {
        preamble: PREAMBLE.into(),
        name: name.into(),
        binders: binders.split(") (").map(|b| format!("({})", b.trim_matches(['(', ')']))).collect(),
        goal: format!("({goal}"),
        proof: proof.trim_end().into(),
    };
    let p26 = verify("cauchy_p26", 0, &art, &tc, DEFAULT_TIMEOUT, Mode::Proof).unwrap();
    check(
        failed.is_empty() && p26.compiled,
        format!(
            "{}/{} statements elaborate; cauchy_p26 listing compiled={}; mathlib {:?}; {}",
            statements.len() - failed.len(),
            statements.len(),
            p26.compiled,
            tc.mathlib_pin(),
            failed.join("; ")
        ),
    )
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let outcomes = vec![
        run("corpus-counts", Some(s(5)), corpus_counts),
        run("mix-composition-preset", Some(s(10)), mix_shape),
        run("metamorphic-validity", Some(s(120)), metamorphic),
        run("golden-emission", None, golden),
        run("type1-consistency", None, type1_consistency),
        run("pass-at-k-estimator", Some(s(1)), passk),
        run("harness-determinism", None, harness_determinism),
        run("lean-integration", None, lean_integration),
    ];
    let mut failed = BTreeMap::new();
    for o in &outcomes {
        let limit = o.limit.map(|l| format!(" / {l:?}")).unwrap_or_default();
        let (tag, detail) = match &o.verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed.insert(o.name, d.clone());
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        if tag == "SKIP" {
            println!("!!!!!!!! SKIP {} ({:.2?}): {detail} !!!!!!!!", o.name, o.elapsed);
        } else {
            println!("{tag} {} ({:.2?}{limit}): {detail}", o.name, o.elapsed);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
