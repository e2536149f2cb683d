//! Subcommand bodies.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use ineqcomp_core::bundled;
use ineqcomp_core::corpus::{parse_corpus, serialize_corpus};
use ineqcomp_core::generator::{root_seed, GenError, VERSION};
use ineqcomp_core::lean::{emit_files, render_statement_with, HypStyle, RenderOptions};
use ineqcomp_core::transforms::Weights;
use ineqcomp_core::{
    check_problem, expand_simp as expand, filter_eligible, generate_mix as mix, make_ft_corpus as ft, render_prompt,
    Category, Family, GenConfig, Problem, PromptTask, SeedSplit, Template,
};
use ineqcomp_harness::adapter::{AdapterKind, AdapterSpec, HttpStyle};
use ineqcomp_harness::batch::{parse_attempts, Attempt};
use ineqcomp_harness::report::{Cell, Report};
use ineqcomp_harness::score::{score, DEFAULT_RESAMPLES};
use ineqcomp_harness::verify::{LEAN_ENV, MATHLIB_ENV, PROJECT_ENV};
use ineqcomp_harness::{collect_attempts, run_batch, BatchOptions, LeanVerifier, Mode, Toolchain};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::Config;
use crate::{usage, Check, Emit, Eval, ExpandSimp, Failure, GenerateMix, MakeFtCorpus, Outcome, Source, Stats};

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Domain)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes()).context("writing stdout")?;
            Ok(())
        }
    }
}

fn parse_flag<T: std::str::FromStr<Err = String>>(what: &str, s: &str) -> Result<T, Failure> {
    s.parse().map_err(|e: String| usage(anyhow!("--{what}: {e}")))
}

/// Problems from `--input`, `--bundled`, or the bundled seeds, plus a label
/// for manifests.
fn load(src: &Source, cfg: &Config) -> Result<(Vec<Problem>, String), Failure> {
    let input: Option<PathBuf> = cfg.pick(src.input.clone(), "input").map_err(usage)?;
    let which: Option<String> = cfg.pick(src.bundled.clone(), "bundled").map_err(usage)?;
    let filter = src.filter || cfg.get::<bool>("filter").map_err(usage)?.unwrap_or(false);
    let (text, label) = match (input, which.as_deref()) {
        (Some(p), _) => (read(&p)?, p.display().to_string()),
        (None, None | Some("seeds")) => (bundled::SEEDS.to_string(), "bundled:seeds".into()),
        (None, Some("mutations")) => (bundled::MUTATIONS.to_string(), "bundled:mutations".into()),
        (None, Some("exclusions")) => (bundled::SEED_EXCLUSIONS.to_string(), "bundled:exclusions".into()),
        (None, Some(other)) => return Err(usage(anyhow!("--bundled: unknown corpus {other:?} (seeds|mutations|exclusions)"))),
    };
    if filter {
        let e = filter_eligible(&text);
        for r in &e.rejected {
            eprintln!("skipped line {} ({}): {}", r.line, r.reason, r.detail);
        }
        return Ok((e.kept, label));
    }
    let corpus = parse_corpus(&text).map_err(|e| Failure::Domain(anyhow!("{label}: {e}")))?;
    Ok((corpus.problems, label))
}

fn gen_failure(e: GenError) -> Failure {
    match e {
        GenError::Config(_) | GenError::Split(_) => usage(e),
        e => Failure::Domain(e.into()),
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

pub fn expand_simp(a: ExpandSimp, cfg: &Config) -> Outcome {
    let (seeds, label) = load(&a.source, cfg)?;
    let seed = cfg.pick_or(a.seed, "seed", 0u64).map_err(usage)?;
    let output: Option<PathBuf> = cfg.pick(a.output, "output").map_err(usage)?;
    let manifest: Option<PathBuf> = cfg.pick(a.manifest, "manifest").map_err(usage)?;
    cfg.check_unused().map_err(usage)?;
    let out = expand(&seeds, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(gen_failure)?;
    emit_text(output.as_deref(), &serialize_corpus(None, &out))?;
    let count = |f: Family| out.iter().filter(|p| p.provenance().first().map(|s| s.family) == Some(f)).count();
    let m = json!({
        "command": "expand-simp",
        "input": label,
        "seed": seed,
        "version": VERSION,
        "seeds": seeds.len(),
        "problems": out.len(),
        "typeI": count(Family::TypeI),
        "typeII": count(Family::TypeII),
    });
    if let Some(path) = manifest.or_else(|| output.as_deref().map(manifest_path)) {
        write(&path, &format!("{}\n", serde_json::to_string_pretty(&m).expect("json")))?;
    }
    eprintln!("{} seeds -> {} variants", seeds.len(), out.len());
    Ok(())
}

fn parse_families(s: &str) -> Result<BTreeSet<Family>, Failure> {
    if s.trim() == "all" {
        return Ok(Family::ALL.into_iter().collect());
    }
    s.split(',').map(|f| parse_flag::<Family>("families", f.trim())).collect()
}

fn parse_weights(s: &str) -> Result<Weights, Failure> {
    let bad = || usage(anyhow!("--weights: expected fixed:M,L or uniform:LO..=HI, got {s:?}"));
    if let Some(rest) = s.strip_prefix("fixed:") {
        let (m, l) = rest.split_once(',').ok_or_else(bad)?;
        return Ok(Weights::Fixed(m.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?));
    }
    if let Some(rest) = s.strip_prefix("uniform:") {
        let (lo, hi) = rest.split_once("..=").ok_or_else(bad)?;
        return Ok(Weights::Uniform { lo: lo.trim().parse().map_err(|_| bad())?, hi: hi.trim().parse().map_err(|_| bad())? });
    }
    Err(bad())
}

fn families_from(flag: Option<String>, cfg: &Config) -> Result<Option<BTreeSet<Family>>, Failure> {
    if let Some(f) = flag {
        return parse_families(&f).map(Some);
    }
    match cfg.get::<toml::Value>("families").map_err(usage)? {
        None => Ok(None),
        Some(toml::Value::String(s)) => parse_families(&s).map(Some),
        Some(toml::Value::Array(xs)) => xs
            .iter()
            .map(|x| x.as_str().ok_or_else(|| usage(anyhow!("families: expected strings"))).and_then(|s| parse_flag("families", s)))
            .collect::<Result<_, _>>()
            .map(Some),
        Some(_) => Err(usage(anyhow!("families: expected a string or list"))),
    }
}

pub fn generate_mix(a: GenerateMix, cfg: &Config) -> Outcome {
    let (seeds, _) = load(&a.source, cfg)?;
    let seed: u64 = cfg.pick(a.seed, "seed").map_err(usage)?.ok_or_else(|| usage(anyhow!("--seed is required")))?;
    let output: Option<PathBuf> = cfg.pick(a.output, "output").map_err(usage)?;
    let preset: Option<String> = cfg.pick(a.preset, "preset").map_err(usage)?;
    let families = families_from(a.families, cfg)?;
    let count: Option<usize> = cfg.pick(a.count, "count").map_err(usage)?;
    let depth: Option<usize> = cfg.pick(a.depth, "depth").map_err(usage)?;
    let weights: Option<String> = cfg.pick(a.weights, "weights").map_err(usage)?;
    let dedup = !(a.no_dedup || cfg.get::<bool>("no-dedup").map_err(usage)?.unwrap_or(false));
    cfg.check_unused().map_err(usage)?;

    let mut gc = match preset.as_deref() {
        None => GenConfig { seed, ..GenConfig::default() },
        Some("composition-only") => {
            if families.is_some() || depth.is_some_and(|d| d != 1) {
                return Err(usage(anyhow!("the composition-only preset fixes families and depth")));
            }
            GenConfig::composition_only(seed, GenConfig::default().count)
        }
        Some(other) => return Err(usage(anyhow!("--preset: unknown preset {other:?} (composition-only)"))),
    };
    if let Some(f) = families {
        gc.families = f;
    }
    if let Some(c) = count {
        gc.count = c;
    }
    if let Some(d) = depth {
        gc.depth = d;
    }
    if let Some(w) = weights {
        gc.weights = parse_weights(&w)?;
    }
    gc.dedup = dedup;
    gc.validate().map_err(gen_failure)?;
    let out = mix(&seeds, &gc).map_err(gen_failure)?;
    emit_text(output.as_deref(), &serialize_corpus(Some(&gc.meta()), &out))?;
    eprintln!("generated {} problems", out.len());
    Ok(())
}

#[derive(serde::Deserialize)]
struct SplitFile {
    train: Vec<String>,
    held_out: Vec<String>,
}

pub fn make_ft_corpus(a: MakeFtCorpus, cfg: &Config) -> Outcome {
    let (seeds, _) = load(&a.source, cfg)?;
    let seed: u64 = cfg.pick(a.seed, "seed").map_err(usage)?.ok_or_else(|| usage(anyhow!("--seed is required")))?;
    let dir: PathBuf = cfg.pick(a.output_dir, "output-dir").map_err(usage)?.ok_or_else(|| usage(anyhow!("--output-dir is required")))?;
    let count = cfg.pick_or(a.count, "count", 5000usize).map_err(usage)?;
    let cat: Option<String> = cfg.pick(a.train_category, "train-category").map_err(usage)?;
    let split_path: Option<PathBuf> = cfg.pick(a.split, "split").map_err(usage)?;
    let proofs_path: Option<PathBuf> = cfg.pick(a.proofs, "proofs").map_err(usage)?;
    cfg.check_unused().map_err(usage)?;

    let split = match (cat, split_path) {
        (Some(c), None) => SeedSplit::by_category(&seeds, parse_flag::<Category>("train-category", &c)?),
        (None, Some(p)) => {
            let f: SplitFile = serde_json::from_str(&read(&p)?).with_context(|| format!("split file {}", p.display()))?;
            SeedSplit { train: f.train, held_out: f.held_out }
        }
        _ => return Err(usage(anyhow!("give exactly one of --train-category or --split"))),
    };
    let proofs: Option<BTreeMap<String, String>> = match proofs_path {
        Some(p) => Some(serde_json::from_str(&read(&p)?).with_context(|| format!("proofs file {}", p.display()))?),
        None => None,
    };
    let gc = GenConfig::composition_only(seed, count);
    let corpus = ft(&seeds, &split, &gc, proofs.as_ref()).map_err(gen_failure)?;
    write(&dir.join("stage1.jsonl"), &serialize_corpus(None, &corpus.stage1))?;
    write(&dir.join("stage2.jsonl"), &serialize_corpus(Some(&gc.meta()), &corpus.stage2))?;
    if proofs.is_some() {
        let mut lines = String::new();
        for t in &corpus.tasks {
            let prompt = render_prompt(&t.task).map_err(|e| Failure::Domain(e.into()))?;
            let rec = json!({"id": t.id, "parents": t.parents, "task": t.task, "prompt": prompt});
            lines.push_str(&serde_json::to_string(&rec).expect("json"));
            lines.push('\n');
        }
        write(&dir.join("tasks.jsonl"), &lines)?;
    }
    eprintln!(
        "{} train seeds -> {} stage-1 -> {} stage-2, {} tasks",
        split.train.len(),
        corpus.stage1.len(),
        corpus.stage2.len(),
        corpus.tasks.len()
    );
    Ok(())
}

fn render_opts(style: Option<String>, ascii: bool) -> Result<RenderOptions, Failure> {
    Ok(RenderOptions {
        style: match style {
            Some(s) => parse_flag::<HypStyle>("style", &s)?,
            None => HypStyle::default(),
        },
        ascii,
        name: None,
    })
}

pub fn emit(a: Emit, cfg: &Config) -> Outcome {
    let (problems, _) = load(&a.source, cfg)?;
    let dir: PathBuf = cfg.pick(a.out_dir, "out-dir").map_err(usage)?.ok_or_else(|| usage(anyhow!("--out-dir is required")))?;
    let style: Option<String> = cfg.pick(a.style, "style").map_err(usage)?;
    let ascii = a.ascii || cfg.get::<bool>("ascii").map_err(usage)?.unwrap_or(false);
    let template: Option<String> = cfg.pick(a.template, "template").map_err(usage)?;
    let icl_path: Option<PathBuf> = cfg.pick(a.icl_proofs, "icl-proofs").map_err(usage)?;
    cfg.check_unused().map_err(usage)?;
    let opts = render_opts(style, ascii)?;
    let template = template.map(|t| parse_flag::<Template>("template", &t)).transpose()?;
    let icl: BTreeMap<String, Vec<String>> = match icl_path {
        Some(p) => serde_json::from_str(&read(&p)?).with_context(|| format!("icl proofs {}", p.display()))?,
        None => BTreeMap::new(),
    };
    if problems.is_empty() {
        eprintln!("empty corpus, nothing written");
        return Ok(());
    }
    let mut prompts = Vec::new();
    if let Some(t) = template {
        for p in &problems {
            let stmt = render_statement_with(p, &opts).statement();
            let task = PromptTask::new(t, stmt).with_proofs(icl.get(p.id()).cloned().unwrap_or_default());
            let text = render_prompt(&task).map_err(|e| usage(anyhow!("{}: {e}", p.id())))?;
            prompts.push((text, task.applies_chat_template()));
        }
    }
    let entries = emit_files(&problems, &dir, &opts).with_context(|| format!("writing into {}", dir.display()))?;
    let mut manifest = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let mut m = json!({"id": e.id, "path": e.path, "theorem": e.theorem});
        if let Some((text, chat)) = prompts.get(i) {
            let file = format!("{}.prompt.txt", e.theorem);
            write(&dir.join(&file), text)?;
            m["prompt"] = json!(file);
            m["chat_template"] = json!(chat);
        }
        manifest.push(m);
    }
    write(&dir.join("manifest.json"), &format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")))?;
    eprintln!("wrote {} statements to {}", entries.len(), dir.display());
    Ok(())
}

pub fn check(a: Check, cfg: &Config) -> Outcome {
    let (problems, label) = load(&a.source, cfg)?;
    let n = cfg.pick_or(a.n, "n", 1000usize).map_err(usage)?;
    let tol = cfg.pick_or(a.tol, "tol", ineqcomp_core::oracle::DEFAULT_TOLERANCE).map_err(usage)?;
    let seed = cfg.pick_or(a.seed, "seed", 0u64).map_err(usage)?;
    let report: Option<PathBuf> = cfg.pick(a.report, "report").map_err(usage)?;
    cfg.check_unused().map_err(usage)?;
    if n == 0 {
        return Err(usage(anyhow!("-n must be at least 1")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage(anyhow!("--tol must be positive and finite")));
    }
    let (mut bad, mut exhausted) = (0usize, 0usize);
    let mut lines = String::new();
    for (i, p) in problems.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let r = check_problem(p, &mut rng, n, tol).map_err(usage)?;
        if !r.passed() {
            bad += 1;
            eprintln!("{}: {} violations, {} tag violations", r.id, r.violations.len(), r.tag_violations.len());
        }
        if r.evaluated() == 0 {
            exhausted += 1;
            eprintln!("{}: no feasible sample evaluated", r.id);
        }
        lines.push_str(&r.to_json());
        lines.push('\n');
    }
    if let Some(path) = report {
        write(&path, &lines)?;
    }
    stdout(&format!("{label}: {} problems, {bad} failing, {exhausted} without samples (n={n}, tol={tol:e})\n", problems.len()))?;
    if bad > 0 {
        return Err(Failure::Domain(anyhow!("{bad} problem(s) failed the oracle")));
    }
    Ok(())
}

fn toolchain(a: &Eval, cfg: &Config) -> Result<Toolchain, Failure> {
    let lean: Option<PathBuf> = cfg.pick(a.toolchain.clone(), "toolchain").map_err(usage)?;
    let project: Option<PathBuf> = cfg.pick(a.lean_project.clone(), "lean-project").map_err(usage)?;
    let rev: Option<String> = cfg.pick(a.mathlib_rev.clone(), "mathlib-rev").map_err(usage)?;
    let mut tc = match (lean, project) {
        (None, None) => Toolchain::from_env()
            .ok_or_else(|| usage(anyhow!("no Lean toolchain: pass --toolchain/--lean-project or set {LEAN_ENV}/{PROJECT_ENV}")))?,
        (lean, project) => Toolchain {
            lean: lean.unwrap_or_else(|| PathBuf::from("lake")),
            project,
            mathlib_rev: std::env::var(MATHLIB_ENV).ok(),
        },
    };
    if rev.is_some() {
        tc.mathlib_rev = rev;
    }
    Ok(tc)
}

fn adapter_spec(a: &Eval, cfg: &Config) -> Result<Option<AdapterSpec>, Failure> {
    let flag = a.adapter_command.as_ref().map(|c| c.split_whitespace().map(str::to_string).collect());
    let command: Option<Vec<String>> = cfg.pick(flag, "adapter-command").map_err(usage)?;
    let endpoint: Option<String> = cfg.pick(a.endpoint.clone(), "endpoint").map_err(usage)?;
    let mut spec = AdapterSpec::default();
    if let Some(m) = cfg.pick(a.model.clone(), "model").map_err(usage)? {
        spec.model = m;
    }
    if let Some(s) = cfg.pick::<String>(a.http_style.clone(), "http-style").map_err(usage)? {
        spec.style = match s.as_str() {
            "chat" => HttpStyle::Chat,
            "completions" => HttpStyle::Completions,
            _ => return Err(usage(anyhow!("--http-style: expected chat or completions"))),
        };
    }
    spec.api_key_env = cfg.pick(a.api_key_env.clone(), "api-key-env").map_err(usage)?;
    if let Some(t) = cfg.pick::<String>(a.template.clone(), "template").map_err(usage)? {
        spec.template = parse_flag("template", &t)?;
    }
    spec.temperature = cfg.pick_or(a.temperature, "temperature", spec.temperature).map_err(usage)?;
    spec.max_tokens = cfg.pick_or(a.max_tokens, "max-tokens", spec.max_tokens).map_err(usage)?;
    spec.attempts = cfg.pick_or(a.samples, "samples", spec.attempts).map_err(usage)?;
    match (command, endpoint) {
        (None, None) => Ok(None),
        (Some(c), None) => {
            spec.kind = AdapterKind::Command;
            spec.command = c;
            spec.validate().map_err(usage)?;
            Ok(Some(spec))
        }
        (None, Some(e)) => {
            spec.kind = AdapterKind::HttpCompletions;
            spec.endpoint = e;
            spec.validate().map_err(usage)?;
            Ok(Some(spec))
        }
        (Some(_), Some(_)) => Err(usage(anyhow!("give either an adapter command or an endpoint, not both"))),
    }
}

fn parse_ks(s: &str) -> Result<Vec<usize>, Failure> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|k| k.trim().parse::<usize>().map_err(|_| usage(anyhow!("--k: bad budget {k:?}"))))
        .collect::<Result<_, _>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(usage(anyhow!("--k: budgets must be positive")));
    }
    Ok(ks)
}

fn attempts_text(atts: &[Attempt]) -> String {
    let mut out = String::new();
    for a in atts {
        out.push_str(&serde_json::to_string(a).expect("json"));
        out.push('\n');
    }
    out
}

pub fn eval(a: Eval, cfg: &Config) -> Outcome {
    let corpora: Vec<String> = if a.corpora.is_empty() {
        cfg.get::<Vec<String>>("corpus").map_err(usage)?.unwrap_or_default()
    } else {
        a.corpora.clone()
    };
    let attempts_path: Option<PathBuf> = cfg.pick(a.attempts.clone(), "attempts").map_err(usage)?;
    let ks = parse_ks(&cfg.pick_or(a.k.clone(), "k", "1".to_string()).map_err(usage)?)?;
    let workers = cfg.pick_or(a.workers, "workers", 1usize).map_err(usage)?;
    let journal: Option<PathBuf> = cfg.pick(a.journal.clone(), "journal").map_err(usage)?;
    let resume = a.resume || cfg.get::<bool>("resume").map_err(usage)?.unwrap_or(false);
    let resamples = cfg.pick_or(a.resamples, "resamples", DEFAULT_RESAMPLES).map_err(usage)?;
    let seed = cfg.pick_or(a.seed, "seed", 0u64).map_err(usage)?;
    let timeout = cfg.pick_or(a.timeout, "timeout", ineqcomp_harness::DEFAULT_TIMEOUT.as_secs()).map_err(usage)?;
    let mode: Option<String> = cfg.pick(a.mode.clone(), "mode").map_err(usage)?;
    let style: Option<String> = cfg.pick(a.style.clone(), "style").map_err(usage)?;
    let records_path: Option<PathBuf> = cfg.pick(a.records.clone(), "records").map_err(usage)?;
    let report_path: Option<PathBuf> = cfg.pick(a.report.clone(), "report").map_err(usage)?;
    let spec = adapter_spec(&a, cfg)?;
    let tc = toolchain(&a, cfg)?;
    cfg.check_unused().map_err(usage)?;

    if corpora.is_empty() {
        return Err(usage(anyhow!("at least one --corpus LABEL=PATH is required")));
    }
    if workers == 0 || timeout == 0 || resamples < 2 {
        return Err(usage(anyhow!("workers and timeout must be positive and resamples at least 2")));
    }
    let mode = match mode.as_deref() {
        None | Some("proof") => Mode::Proof,
        Some("statement") => Mode::Statement,
        Some(m) => return Err(usage(anyhow!("--mode: expected proof or statement, got {m:?}"))),
    };
    let render = render_opts(style, false)?;

    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    let mut problems: Vec<Problem> = Vec::new();
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    for c in &corpora {
        let (label, path) = c.split_once('=').ok_or_else(|| usage(anyhow!("--corpus: expected LABEL=PATH, got {c:?}")))?;
        let parsed = parse_corpus(&read(Path::new(path))?).map_err(|e| Failure::Domain(anyhow!("{path}: {e}")))?;
        let mut ids = Vec::new();
        for p in parsed.problems {
            match by_id.get(p.id()) {
                Some(&i) if !problems[i].same_statement(&p) => {
                    return Err(Failure::Domain(anyhow!("problem id {} has two different statements", p.id())))
                }
                Some(_) => {}
                None => {
                    by_id.insert(p.id().to_string(), problems.len());
                    problems.push(p.clone());
                }
            }
            ids.push(p.id().to_string());
        }
        groups.push((label.to_string(), ids));
    }

    let attempts = match &spec {
        Some(spec) => {
            let adapter = spec.build().map_err(usage)?;
            let mut have: Vec<Attempt> = match &attempts_path {
                Some(p) if resume && p.exists() => parse_attempts(&read(p)?)?,
                _ => Vec::new(),
            };
            let keys: BTreeSet<(String, usize)> = have.iter().map(|x| (x.problem_id.clone(), x.attempt_id)).collect();
            let todo: Vec<Problem> = problems
                .iter()
                .filter(|p| (0..spec.attempts).any(|i| !keys.contains(&(p.id().to_string(), i))))
                .cloned()
                .collect();
            let fresh = collect_attempts(&todo, adapter.as_ref(), spec, &render, workers, &BTreeMap::new())?;
            have.extend(fresh.into_iter().filter(|x| !keys.contains(&(x.problem_id.clone(), x.attempt_id))));
            have.sort_by(|x, y| (&x.problem_id, x.attempt_id).cmp(&(&y.problem_id, y.attempt_id)));
            if let Some(p) = &attempts_path {
                write(p, &attempts_text(&have))?;
            }
            have
        }
        None => {
            let p = attempts_path.ok_or_else(|| usage(anyhow!("--attempts is required without an adapter")))?;
            parse_attempts(&read(&p)?)?
        }
    };

    if let Some(j) = &journal {
        if !resume && j.exists() {
            std::fs::remove_file(j).with_context(|| format!("clearing journal {}", j.display()))?;
        }
    }
    let verifier = LeanVerifier { toolchain: tc.clone(), timeout: Duration::from_secs(timeout), mode };
    let opts = BatchOptions { workers, render, journal };
    let records = run_batch(&problems, &attempts, &verifier, &opts)?;
    if let Some(p) = &records_path {
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).expect("json"));
            text.push('\n');
        }
        write(p, &text)?;
    }

    let mut report = Report::new(resamples, seed, tc.mathlib_pin());
    for (label, ids) in &groups {
        let want: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let recs: Vec<_> = records.iter().filter(|r| want.contains(r.problem_id.as_str())).cloned().collect();
        let seen: BTreeSet<&str> = recs.iter().map(|r| r.problem_id.as_str()).collect();
        if let Some(missing) = want.iter().find(|id| !seen.contains(**id)) {
            return Err(Failure::Domain(anyhow!("problem {missing} in corpus {label} has no attempts")));
        }
        for &k in &ks {
            let s = score(&recs, k, resamples, seed).map_err(|e| Failure::Domain(anyhow!("corpus {label}: {e}")))?;
            report.cells.push(Cell { corpus: label.clone(), k, problems: want.len(), mean: s.mean, std: s.std.unwrap_or(0.0) });
        }
    }
    if let Some(p) = &report_path {
        write(p, &format!("{}\n", report.to_json()))?;
    }
    stdout(&report.to_text())
}

pub fn stats(a: Stats, cfg: &Config) -> Outcome {
    let (problems, label) = load(&a.source, cfg)?;
    let as_json = a.json || cfg.get::<bool>("json").map_err(usage)?.unwrap_or(false);
    cfg.check_unused().map_err(usage)?;
    let mut by_category: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_family: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_depth: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_arity: BTreeMap<usize, usize> = BTreeMap::new();
    let mut roots: BTreeSet<&str> = BTreeSet::new();
    for p in &problems {
        *by_category.entry(p.category().to_string()).or_default() += 1;
        let fam = p.provenance().first().map(|s| s.family.to_string()).unwrap_or_else(|| "seed".into());
        *by_family.entry(fam).or_default() += 1;
        *by_depth.entry(p.provenance().len()).or_default() += 1;
        *by_arity.entry(p.variables().len()).or_default() += 1;
        roots.insert(root_seed(p));
    }
    let distinct: BTreeSet<_> = problems.iter().map(Problem::statement_key).collect();
    let v = json!({
        "corpus": label,
        "problems": problems.len(),
        "distinct_statements": distinct.len(),
        "rhs_positive": problems.iter().filter(|p| p.rhs_positive()).count(),
        "with_conditions": problems.iter().filter(|p| !p.conditions().is_empty()).count(),
        "root_seeds": roots.len(),
        "category": by_category,
        "first_family": by_family,
        "depth": by_depth,
        "variables": by_arity,
    });
    if as_json {
        return stdout(&format!("{}\n", serde_json::to_string_pretty(&v).expect("json")));
    }
    let mut text = format!("corpus               {label}\n");
    for key in ["problems", "distinct_statements", "rhs_positive", "with_conditions", "root_seeds"] {
        text += &format!("{key:<20} {}\n", v[key]);
    }
    for key in ["category", "first_family", "depth", "variables"] {
        let parts: Vec<String> = v[key].as_object().unwrap().iter().map(|(k, n)| format!("{k}={n}")).collect();
        text += &format!("{key:<20} {}\n", parts.join(" "));
    }
    stdout(&text)
}

/// A closed pipe downstream is not an error.
fn stdout(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Domain(e.into())),
        _ => Ok(()),
    }
}
