use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ineqcomp_core::bundled;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ineqcomp"));
    c.env_remove("INEQCOMP_LEAN").env_remove("INEQCOMP_LEAN_PROJECT").env_remove("INEQCOMP_CONFIG");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn expand_simp_counts_and_idempotence() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["expand-simp", "-o", "a.jsonl", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(lines(&d.path().join("a.jsonl")), 150);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("a.manifest.json")).unwrap()).unwrap();
    assert_eq!((m["typeI"].as_u64(), m["typeII"].as_u64()), (Some(75), Some(75)));
    run(d.path(), &["expand-simp", "-o", "b.jsonl", "--seed", "3"]);
    assert_eq!(std::fs::read(d.path().join("a.jsonl")).unwrap(), std::fs::read(d.path().join("b.jsonl")).unwrap());
}

#[test]
fn expand_simp_edge_inputs() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("empty.jsonl"), "").unwrap();
    let o = run(d.path(), &["expand-simp", "-i", "empty.jsonl", "-o", "out.jsonl"]);
    assert_eq!(code(&o), 0);
    assert_eq!(lines(&d.path().join("out.jsonl")), 0);

    let mut text: Vec<&str> = bundled::SEEDS.lines().take(4).collect();
    text[2] = "{\"id\": \"broken\"";
    std::fs::write(d.path().join("bad.jsonl"), text.join("\n")).unwrap();
    let o = run(d.path(), &["expand-simp", "-i", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(d.path(), &["expand-simp", "-i", "missing.jsonl"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn filter_flag_drops_ineligible_records() {
    let d = tempfile::tempdir().unwrap();
    let strict = run(d.path(), &["stats", "--bundled", "exclusions"]);
    assert_eq!(code(&strict), 1);
    let o = run(d.path(), &["stats", "--bundled", "exclusions", "--filter", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["problems"], 65);
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("skipped")).count(), 10);
}

#[test]
fn generate_mix_preset_and_errors() {
    let d = tempfile::tempdir().unwrap();
    let args = ["generate-mix", "--preset", "composition-only", "--count", "100", "--seed", "7"];
    let a = run(d.path(), &[&args[..], &["-o", "a.jsonl"]].concat());
    let b = run(d.path(), &[&args[..], &["-o", "b.jsonl"]].concat());
    assert_eq!((code(&a), code(&b)), (0, 0), "{}", stderr(&a));
    let text = std::fs::read_to_string(d.path().join("a.jsonl")).unwrap();
    assert_eq!(text, std::fs::read_to_string(d.path().join("b.jsonl")).unwrap());
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().next().unwrap().starts_with("{\"meta\""));

    let o = run(d.path(), &["generate-mix", "--families", "all", "--depth", "2", "--count", "50", "--seed", "1", "-o", "m.jsonl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = run(d.path(), &["stats", "-i", "m.jsonl", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&s)).unwrap();
    assert!(v["first_family"].as_object().unwrap().len() > 1, "{v}");
    assert!(v["depth"].as_object().unwrap().contains_key("2"), "{v}");

    let one: String = bundled::SEEDS.lines().find(|l| l.contains("\"amgm_p1\"")).unwrap().to_string();
    std::fs::write(d.path().join("one.jsonl"), one).unwrap();
    let o = run(d.path(), &["generate-mix", "-i", "one.jsonl", "--families", "typeI", "--count", "5", "--seed", "1"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    assert_eq!(code(&run(d.path(), &["generate-mix", "--count", "5"])), 2);
    assert_eq!(code(&run(d.path(), &["generate-mix", "--seed", "1", "--families", "nope"])), 2);
    assert_eq!(code(&run(d.path(), &["generate-mix", "--seed", "1", "--count", "0"])), 2);
    assert_eq!(code(&run(d.path(), &["generate-mix", "--seed", "1", "--weights", "fixed:0,1"])), 2);
    assert_eq!(code(&run(d.path(), &["generate-mix", "--seed", "1", "--preset", "composition-only", "--depth", "2"])), 2);
    assert_eq!(code(&run(d.path(), &["frobnicate"])), 2);
}

#[test]
fn config_file_sits_under_flags() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "seed = 7\n[generate-mix]\npreset = \"composition-only\"\ncount = 30\n").unwrap();
    let o = run(d.path(), &["--config", "c.toml", "generate-mix", "-o", "a.jsonl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(lines(&d.path().join("a.jsonl")), 31);
    let o = run(d.path(), &["--config", "c.toml", "generate-mix", "-o", "b.jsonl", "--count", "12"]);
    assert_eq!(code(&o), 0);
    assert_eq!(lines(&d.path().join("b.jsonl")), 13);

    std::fs::write(d.path().join("typo.toml"), "[generate-mix]\nsed = 3\n").unwrap();
    let o = run(d.path(), &["--config", "typo.toml", "generate-mix", "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sed"));
    std::fs::write(d.path().join("junk.toml"), "seed = = 3").unwrap();
    assert_eq!(code(&run(d.path(), &["--config", "junk.toml", "stats"])), 2);
}

#[test]
fn make_ft_corpus_writes_stages() {
    let d = tempfile::tempdir().unwrap();
    let proofs: serde_json::Map<String, serde_json::Value> = bundled::seeds()
        .iter()
        .map(|p| (p.id().to_string(), serde_json::Value::String(format!("theorem {} := by\n  sorry", p.id()))))
        .collect();
    std::fs::write(d.path().join("proofs.json"), serde_json::to_string(&proofs).unwrap()).unwrap();
    let o = run(
        d.path(),
        &["make-ft-corpus", "--seed", "2", "--count", "50", "--train-category", "amgm", "--proofs", "proofs.json", "--output-dir", "ft"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(lines(&d.path().join("ft/stage1.jsonl")), 100);
    assert_eq!(lines(&d.path().join("ft/stage2.jsonl")), 51);
    let tasks = std::fs::read_to_string(d.path().join("ft/tasks.jsonl")).unwrap();
    assert_eq!(tasks.lines().count(), 50);
    let t: serde_json::Value = serde_json::from_str(tasks.lines().next().unwrap()).unwrap();
    assert_eq!(t["parents"].as_array().unwrap().len(), 2);
    assert!(t["prompt"].as_str().unwrap().contains("You can fully trust the provided code"));
    assert_eq!(code(&run(d.path(), &["make-ft-corpus", "--seed", "2", "--output-dir", "x"])), 2);
    assert_eq!(code(&run(d.path(), &["make-ft-corpus", "--seed", "2", "--output-dir", "x", "--train-category", "planets"])), 2);
}

#[test]
fn emit_files_and_prompts() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["emit", "--out-dir", "lean", "--template", "chat-thinking"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lean = d.path().join("lean");
    let files: Vec<PathBuf> = std::fs::read_dir(&lean).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.iter().filter(|p| p.extension().is_some_and(|e| e == "lean")).count(), 75);
    assert_eq!(files.iter().filter(|p| p.to_string_lossy().ends_with(".prompt.txt")).count(), 75);
    let p1 = std::fs::read_to_string(lean.join("cauchy_p1.lean")).unwrap();
    assert!(p1.starts_with("import Mathlib") && p1.ends_with("by\n  sorry\n"));
    let manifest: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(lean.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.len(), 75);
    assert_eq!(manifest[0]["chat_template"], true);

    std::fs::write(d.path().join("empty.jsonl"), "").unwrap();
    let o = run(d.path(), &["emit", "-i", "empty.jsonl", "--out-dir", "none"]);
    assert_eq!(code(&o), 0);
    assert!(!d.path().join("none").exists());

    assert_eq!(code(&run(d.path(), &["emit", "--out-dir", "x", "--template", "sonnet"])), 2);
    assert_eq!(code(&run(d.path(), &["emit", "--out-dir", "y", "--template", "icl"])), 2);
    assert!(!d.path().join("y").exists());
    assert_eq!(code(&run(d.path(), &["emit", "--out-dir", "z", "--style", "bulleted"])), 2);
}

#[test]
fn check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let ok = run(d.path(), &["check", "-n", "200", "--report", "r.jsonl"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(lines(&d.path().join("r.jsonl")), 75);
    let bad = run(d.path(), &["check", "--bundled", "mutations", "-n", "200"]);
    assert_eq!(code(&bad), 1);
    assert_eq!(stderr(&bad).lines().filter(|l| l.contains("violations")).count(), 5);
    assert_eq!(code(&run(d.path(), &["check", "-n", "0"])), 2);
    assert_eq!(code(&run(d.path(), &["check", "--tol", "-1"])), 2);
}

const FAKE_LEAN: &str = "#!/bin/sh\nif grep -q BROKEN \"$1\"; then echo \"$1:1:1: error: unknown identifier\"; exit 1; fi\nif grep -qE '^[[:space:]]*sorry[[:space:]]*$' \"$1\"; then echo \"warning: declaration uses 'sorry'\"; fi\nexit 0\n";

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

/// Three problems, two attempts each. Successes per problem: 2, 1, 0, so
/// pass@1 = (1 + 1/2 + 0) / 3 = 50.0 and pass@2 = (1 + 1 + 0) / 3 = 66.7.
fn eval_fixture(dir: &Path) {
    let seeds: Vec<&str> = bundled::SEEDS.lines().take(3).collect();
    std::fs::write(dir.join("seeds.jsonl"), seeds.join("\n")).unwrap();
    let ids: Vec<String> = bundled::seeds().iter().take(3).map(|p| p.id().to_string()).collect();
    let proof = |ok: bool| if ok { "by\n  nlinarith" } else { "by\n  BROKEN" };
    let mut text = String::new();
    for (i, id) in ids.iter().enumerate() {
        for a in 0..2 {
            let rec = serde_json::json!({"problem_id": id, "attempt_id": a, "model": "m", "proof_text": proof(a + i < 2)});
            text.push_str(&format!("{rec}\n"));
        }
    }
    std::fs::write(dir.join("attempts.jsonl"), text).unwrap();
}

#[test]
fn eval_scores_precomputed_attempts() {
    let d = tempfile::tempdir().unwrap();
    eval_fixture(d.path());
    let lean = script(d.path(), "lean", FAKE_LEAN);
    let lean = lean.to_str().unwrap();
    let args = [
        "eval", "--corpus", "seed=seeds.jsonl", "--attempts", "attempts.jsonl", "--k", "1,2", "--toolchain", lean,
        "--workers", "3", "--journal", "j.jsonl", "--records", "rec.jsonl", "--report", "rep.json", "--mathlib-rev", "deadbeef",
    ];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Seed") && table.contains("pass@1") && table.contains("pass@2"), "{table}");
    assert!(table.contains("50.0") && table.contains("66.7"), "{table}");
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["mathlib"], "deadbeef");
    assert_eq!(rep["cells"].as_array().unwrap().len(), 2);
    assert!((rep["cells"][0]["mean"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(lines(&d.path().join("rec.jsonl")), 6);

    // Resume: a toolchain that always fails would flip every record if anything were re-verified.
    let broken = script(d.path(), "broken-lean", "#!/bin/sh\nexit 1\n");
    let mut again: Vec<&str> = args.to_vec();
    let pos = again.iter().position(|a| *a == lean).unwrap();
    let broken = broken.to_str().unwrap().to_string();
    again[pos] = &broken;
    again.push("--resume");
    let o = run(d.path(), &again);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), table);

    let mut too_many = args.to_vec();
    let kpos = too_many.iter().position(|a| *a == "1,2").unwrap();
    too_many[kpos] = "3";
    assert_eq!(code(&run(d.path(), &too_many)), 1);
}

#[test]
fn eval_configuration_errors() {
    let d = tempfile::tempdir().unwrap();
    eval_fixture(d.path());
    let o = run(d.path(), &["eval", "--corpus", "seed=seeds.jsonl", "--attempts", "attempts.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("toolchain"));
    let lean = script(d.path(), "lean", FAKE_LEAN);
    let lean = lean.to_str().unwrap();
    assert_eq!(code(&run(d.path(), &["eval", "--toolchain", lean, "--attempts", "attempts.jsonl"])), 2);
    assert_eq!(code(&run(d.path(), &["eval", "--toolchain", lean, "--corpus", "seeds.jsonl", "--attempts", "attempts.jsonl"])), 2);
    assert_eq!(code(&run(d.path(), &["eval", "--toolchain", lean, "--corpus", "s=seeds.jsonl"])), 2);
    assert_eq!(code(&run(d.path(), &["eval", "--toolchain", lean, "--corpus", "s=seeds.jsonl", "--attempts", "attempts.jsonl", "--k", "0"])), 2);
}

#[test]
fn eval_with_command_adapter() {
    let d = tempfile::tempdir().unwrap();
    eval_fixture(d.path());
    let lean = script(d.path(), "lean", FAKE_LEAN);
    // Restates the statement from the prompt inside a code block, once with a
    // working proof and once without any code block.
    let prover = script(
        d.path(),
        "prover.sh",
        "#!/bin/sh\nstmt=$(grep '^theorem' | sed 's/ := by$//')\nn=$(cat count 2>/dev/null || echo 0)\necho $((n+1)) > count\nif [ $((n % 2)) -eq 1 ]; then echo 'no idea'; exit 0; fi\nprintf 'Proof:\\n```lean4\\n%s := by\\n  nlinarith\\n```\\n' \"$stmt\"\n",
    );
    let o = run(
        d.path(),
        &[
            "eval", "--corpus", "seed=seeds.jsonl", "--toolchain", lean.to_str().unwrap(), "--adapter-command", prover.to_str().unwrap(),
            "--samples", "2", "--attempts", "gen.jsonl", "--records", "rec.jsonl", "--template", "chat-thinking",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(lines(&d.path().join("gen.jsonl")), 6);
    let recs = std::fs::read_to_string(d.path().join("rec.jsonl")).unwrap();
    let compiled = recs.lines().filter(|l| l.contains("\"compiled\":true")).count();
    let extraction = recs.lines().filter(|l| l.contains("extraction")).count();
    assert_eq!(compiled + extraction, 6, "{recs}");
    assert_eq!(compiled, 3, "{recs}");
}

#[test]
fn stats_text() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["stats"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("problems             75"), "{}", stdout(&o));
}
