use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ineqcomp_core::lean::RenderOptions;
use ineqcomp_core::{bundled, LeanArtifact, Problem, Template};
use ineqcomp_harness::adapter::{Adapter, AdapterError, AdapterKind, AdapterSpec, HttpStyle};
use ineqcomp_harness::batch::{parse_attempts, read_journal};
use ineqcomp_harness::{collect_attempts, run_batch, Attempt, BatchOptions, EvalRecord, Verifier};

/// Passes proofs that mention `nlinarith`, counting calls.
#[derive(Default)]
struct Fake {
    calls: AtomicUsize,
    seen: Mutex<Vec<(String, usize)>>,
}

impl Verifier for Fake {
    fn verify(&self, id: &str, attempt: usize, art: &LeanArtifact) -> EvalRecord {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().unwrap().push((id.to_string(), attempt));
        let mut r = EvalRecord::failed(id, attempt, "");
        if art.proof.contains("nlinarith") {
            r.compiled = true;
        } else {
            r.error = "unsolved goals".into();
        }
        r
    }
}

fn problems() -> Vec<Problem> {
    bundled::seeds().into_iter().take(5).collect()
}

fn fixture(ps: &[Problem]) -> Vec<Attempt> {
    let mut out = Vec::new();
    for (i, p) in ps.iter().enumerate() {
        for a in 0..4 {
            let proof_text = match (i + a) % 4 {
                0 => "by\n  nlinarith [sq_nonneg (x - y)]".to_string(),
                1 => "by\n  positivity".to_string(),
                2 => "Here is my answer without any code.".to_string(),
                _ => format!("```lean4\ntheorem {} : False := by\n  nlinarith\n```", p.id()),
            };
            out.push(Attempt { problem_id: p.id().into(), attempt_id: a, model: "m".into(), proof_text, error: None });
        }
    }
    out
}

#[test]
fn cardinality_and_worker_independence() {
    let ps = problems();
    let att = fixture(&ps);
    assert_eq!(att.len(), 20);
    let one = run_batch(&ps, &att, &Fake::default(), &BatchOptions { workers: 1, ..Default::default() }).unwrap();
    let fake = Fake::default();
    let eight = run_batch(&ps, &att, &fake, &BatchOptions { workers: 8, ..Default::default() }).unwrap();
    assert_eq!(one.len(), 20);
    let strip = |v: &[EvalRecord]| v.iter().map(|r| (r.key(), r.compiled, r.error.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&one), strip(&eight));
    // Restated statements that differ from the rendered header never reach the verifier.
    assert!(eight.iter().filter(|r| r.error.starts_with("extraction:")).count() >= 5);
    assert_eq!(fake.calls.load(Ordering::SeqCst), eight.iter().filter(|r| !r.error.starts_with("extraction:")).count());
}

#[test]
fn two_by_three() {
    let ps = problems()[..2].to_vec();
    let att: Vec<Attempt> = fixture(&ps).into_iter().filter(|a| a.attempt_id < 3).collect();
    let out = run_batch(&ps, &att, &Fake::default(), &BatchOptions { workers: 2, ..Default::default() }).unwrap();
    assert_eq!(out.len(), 6);
}

#[test]
fn resume_skips_completed_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("records.jsonl");
    let ps = problems();
    let att = fixture(&ps);
    let opts = BatchOptions { workers: 4, journal: Some(journal.clone()), ..Default::default() };

    let first = Fake::default();
    let half: Vec<Attempt> = att.iter().filter(|a| a.attempt_id < 2).cloned().collect();
    run_batch(&ps, &half, &first, &opts).unwrap();
    // Simulate a kill mid-write.
    std::fs::OpenOptions::new().append(true).open(&journal).unwrap().write_all(b"{\"problem_id\":\"amg").unwrap();

    let second = Fake::default();
    let all = run_batch(&ps, &att, &second, &opts).unwrap();
    assert_eq!(all.len(), 20);
    let redone: Vec<_> = second.seen.lock().unwrap().clone();
    assert!(redone.iter().all(|(_, a)| *a >= 2), "{redone:?}");

    let third = Fake::default();
    let again = run_batch(&ps, &att, &third, &opts).unwrap();
    assert_eq!(third.calls.load(Ordering::SeqCst), 0);
    assert_eq!(again, all);
    assert_eq!(read_journal(&journal).unwrap().len(), 20);
}

#[test]
fn corrupt_journal_middle_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("r.jsonl");
    let good = serde_json::to_string(&EvalRecord::failed("a", 0, "e")).unwrap();
    std::fs::write(&journal, format!("{good}\nnot json\n{good}\n")).unwrap();
    assert!(read_journal(&journal).is_err());
}

#[test]
fn bad_inputs() {
    let ps = problems();
    let mut att = fixture(&ps);
    att.push(att[0].clone());
    assert!(run_batch(&ps, &att, &Fake::default(), &BatchOptions::default()).is_err());
    assert!(run_batch(&ps, &[], &Fake::default(), &BatchOptions { workers: 0, ..Default::default() }).is_err());
    let ghost = Attempt { problem_id: "nope".into(), attempt_id: 0, model: String::new(), proof_text: "by simp".into(), error: None };
    let r = run_batch(&ps, &[ghost], &Fake::default(), &BatchOptions::default()).unwrap();
    assert!(!r[0].compiled && r[0].error.contains("unknown"));
    let parsed = parse_attempts("{\"problem_id\":\"a\",\"attempt_id\":0,\"model\":\"m\",\"proof_text\":\"by simp\"}\n\n").unwrap();
    assert_eq!(parsed.len(), 1);
    assert!(parse_attempts("{").is_err());
}

/// Returns the prompt's own statement with a proof, except on the second call.
struct Scripted {
    calls: AtomicUsize,
}

impl Adapter for Scripted {
    fn complete(&self, prompt: &str) -> Result<String, AdapterError> {
        match self.calls.fetch_add(1, Ordering::SeqCst) {
            1 => Err(AdapterError::EmptyResponse),
            2 => Ok("I could not find a proof.".into()),
            _ => {
                let start = prompt.find("theorem").unwrap();
                let stmt = &prompt[start..prompt.find(":= by").unwrap()];
                Ok(format!("Sure.\n```lean4\nimport Mathlib\n{stmt}:= by\n  nlinarith [sq_nonneg 0]\n```\n"))
            }
        }
    }
}

#[test]
fn adapter_failures_are_recorded() {
    let ps = problems()[..1].to_vec();
    let spec = AdapterSpec { attempts: 4, template: Template::ChatThinking, ..AdapterSpec::default() };
    let att = collect_attempts(&ps, &Scripted { calls: AtomicUsize::new(0) }, &spec, &RenderOptions::default(), 1, &BTreeMap::new()).unwrap();
    assert_eq!(att.len(), 4);
    let out = run_batch(&ps, &att, &Fake::default(), &BatchOptions::default()).unwrap();
    let compiled: Vec<bool> = out.iter().map(|r| r.compiled).collect();
    assert_eq!(compiled, [true, false, false, true]);
    assert!(out[1].error.starts_with("adapter:"));
    assert!(out[2].error.starts_with("extraction:"));
}

#[test]
fn command_adapter_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("prover.sh");
    std::fs::write(&script, "#!/bin/sh\nwc -c > /dev/null\necho 'by'\necho '  nlinarith'\n").unwrap();
    let fail = dir.path().join("fail.sh");
    std::fs::write(&fail, "#!/bin/sh\necho boom >&2\nexit 3\n").unwrap();
    for s in [&script, &fail] {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(s, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let ok = AdapterSpec { command: vec![script.display().to_string()], ..AdapterSpec::default() }.build().unwrap();
    assert_eq!(ok.complete("prompt").unwrap(), "by\n  nlinarith\n");
    let bad = AdapterSpec { command: vec![fail.display().to_string()], ..AdapterSpec::default() }.build().unwrap();
    match bad.complete("prompt") {
        Err(AdapterError::Exit { stderr, .. }) => assert_eq!(stderr, "boom"),
        other => panic!("{other:?}"),
    }
}

fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let h = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut req = vec![0; len];
        reader.read_exact(&mut req).unwrap();
        let mut w = stream;
        write!(w, "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
        String::from_utf8(req).unwrap()
    });
    (url, h)
}

#[test]
fn http_adapter_round_trip() {
    let (url, h) = serve_once(r#"{"choices":[{"message":{"role":"assistant","content":"by\n  positivity"}}]}"#);
    let spec = AdapterSpec {
        kind: AdapterKind::HttpCompletions,
        endpoint: url,
        model: "prover-7b".into(),
        style: HttpStyle::Chat,
        ..AdapterSpec::default()
    };
    let a = spec.build().unwrap();
    assert_eq!(a.complete("hello").unwrap(), "by\n  positivity");
    let req: serde_json::Value = serde_json::from_str(&h.join().unwrap()).unwrap();
    assert_eq!(req["model"], "prover-7b");
    assert_eq!(req["temperature"], 1.0);
    assert_eq!(req["max_tokens"], 16384);
    assert_eq!(req["messages"][0]["content"], "hello");
}
