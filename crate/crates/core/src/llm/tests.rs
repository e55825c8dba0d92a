use super::scripted::estimate_tokens;
use super::*;

fn ask(backend: &dyn ChatBackend, prompt: &str) -> Result<ChatResponse, LlmError> {
    backend.complete(&ChatRequest::new(vec![ChatMessage::user(prompt)]))
}

#[test]
fn empty_table_misses() {
    let b = ScriptedBackend::new();
    assert!(matches!(ask(&b, "anything"), Err(LlmError::FixtureMiss(_))));
    assert_eq!(b.complete(&ChatRequest::new(vec![])), Err(LlmError::EmptyRequest));
}

#[test]
fn exact_beats_prefix_beats_wildcard() {
    let b = ScriptedBackend::new()
        .wildcard("Your task is to: *", Reply::Text("wild $1".into()))
        .prefix("Your task is to: put", Reply::Text("prefix".into()))
        .exact("Your task is to: put a clean plate in microwave.", Reply::Text("exact".into()));
    assert_eq!(ask(&b, "Your task is to: put a clean plate in microwave.").unwrap().content, "exact");
    assert_eq!(ask(&b, "Your task is to: put a mug in sink.").unwrap().content, "prefix");
    assert_eq!(ask(&b, "Your task is to: examine a cd").unwrap().content, "wild examine a cd");
}

#[test]
fn wildcard_captures_expand() {
    let b = ScriptedBackend::new().wildcard(
        "put a clean * in *.",
        Reply::Text("(exists (?t - $1 ?r - $2))".into()),
    );
    assert_eq!(ask(&b, "put a clean mug in coffeemachine.").unwrap().content, "(exists (?t - mug ?r - coffeemachine))");
    assert!(ask(&b, "put a clean mug in coffeemachine").is_err());
}

#[test]
fn wildcard_matches_only_whole_prompts() {
    let b = ScriptedBackend::new().wildcard("a*c", Reply::Text("$1".into()));
    assert_eq!(ask(&b, "abbc").unwrap().content, "bb");
    assert_eq!(ask(&b, "ac").unwrap().content, "");
    assert!(ask(&b, "abcd").is_err());
    assert!(ask(&b, "xabc").is_err());
}

#[test]
fn token_estimate_is_a_quarter_of_the_exchange() {
    assert_eq!(estimate_tokens(400), 100);
    assert_eq!(estimate_tokens(401), 101);
    assert_eq!(estimate_tokens(0), 0);
    let prompt = "p".repeat(300);
    let b = ScriptedBackend::new().exact(prompt.clone(), Reply::Text("r".repeat(100)));
    let r = ask(&b, &prompt).unwrap();
    assert_eq!(r.total_tokens(), 100);
    assert_eq!(r.completion_tokens, 25);
    let b = ScriptedBackend::new().exact("abc", Reply::Text("de".into()));
    let r = ask(&b, "abc").unwrap();
    assert_eq!(r.total_tokens(), 2);
}

#[test]
fn pick_option_is_pure_and_stays_in_the_list() {
    let b = ScriptedBackend::new().prefix("Choose", Reply::PickOption);
    let mut chosen = std::collections::BTreeSet::new();
    for k in 0..40 {
        let prompt = format!("Choose sample {k}\n- fridge-1\n- cabinet-2\n- countertop-1");
        let a = ask(&b, &prompt).unwrap().content;
        assert_eq!(a, ask(&b, &prompt).unwrap().content);
        assert!(["fridge-1", "cabinet-2", "countertop-1"].contains(&a.as_str()));
        chosen.insert(a);
    }
    assert_eq!(chosen.len(), 3, "hash spreads over options");
    assert_eq!(ask(&b, "Choose nothing").unwrap().content, "");
}

#[test]
fn fixture_directory_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let b = ScriptedBackend::new()
        .exact("hello", Reply::Text("(:goal\n  (and))".into()))
        .prefix("Choose", Reply::PickOption)
        .wildcard("put * in *.", Reply::Text("$2 gets $1".into()));
    b.save_dir(dir.path()).unwrap();
    let loaded = ScriptedBackend::from_dir(dir.path()).unwrap();
    assert_eq!(loaded.len(), 3);
    for p in ["hello", "Choose\n- a\n- b", "put cd in safe."] {
        assert_eq!(ask(&loaded, p), ask(&b, p));
    }
    std::fs::write(dir.path().join("zz.fixture"), "regex\nx\n---\ny\n").unwrap();
    assert!(matches!(ScriptedBackend::from_dir(dir.path()), Err(LlmError::BadFixture(_))));
}

#[test]
fn call_log_counts_are_sums_of_records() {
    let b = ScriptedBackend::new()
        .prefix("goal", Reply::Text("x".repeat(37)))
        .prefix("sample", Reply::PickOption);
    let log = CallLog::new();
    std::thread::scope(|s| {
        for t in 0..4 {
            let (log, b) = (&log, &b);
            s.spawn(move || {
                for i in 0..25 {
                    let role = if i % 3 == 0 { "goal" } else { "sampler" };
                    let prompt = format!("{} {t} {i}\n- a\n- bb", if role == "goal" { "goal" } else { "sample" });
                    log.complete(b, role, &ChatRequest::new(vec![ChatMessage::user(prompt)])).unwrap();
                }
            });
        }
    });
    log.complete(&b, "goal", &ChatRequest::new(vec![ChatMessage::user("nope")])).unwrap_err();
    let records = log.records();
    assert_eq!(records.len(), 101);
    let sum: u64 = records.iter().filter_map(|r| r.response.as_ref()).map(|r| r.total_tokens()).sum();
    let totals = log.totals();
    assert_eq!(totals.total(), sum);
    assert_eq!(totals.calls, 100);
    let per_role = log.per_role();
    assert_eq!(per_role["goal"].calls + per_role["sampler"].calls, 100);
}
