//! The HTTP chat client against a local mock server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread;
use std::time::Duration;

use llmdp::llm::{ChatBackend, ChatMessage, ChatRequest, HttpBackend, HttpConfig, LlmError};

const SECRET: &str = "sk-test-SECRET-0123456789";

struct Capture(Mutex<Vec<String>>);

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }
    fn log(&self, record: &log::Record) {
        self.0
            .lock()
            .unwrap()
            .push(format!("{} {} {}", record.level(), record.target(), record.args()));
    }
    fn flush(&self) {}
}

fn captured() -> &'static Capture {
    static CAPTURE: OnceLock<&'static Capture> = OnceLock::new();
    CAPTURE.get_or_init(|| {
        let c: &'static Capture = Box::leak(Box::new(Capture(Mutex::new(Vec::new()))));
        log::set_logger(c).unwrap();
        log::set_max_level(log::LevelFilter::Trace);
        c
    })
}

struct Received {
    head: String,
    body: String,
}

struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<Received>>>,
    peak: Arc<AtomicUsize>,
}

/// Serves the given statuses in order, one per connection; the last one
/// repeats. Successful replies carry a fixed completion with usage counts.
fn serve(statuses: Vec<u16>, delay: Duration) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let peak = Arc::new(AtomicUsize::new(0));
    let (reqs, pk) = (requests.clone(), peak.clone());
    thread::spawn(move || {
        let active = Arc::new(AtomicUsize::new(0));
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(stream) = stream else { break };
            let status = *statuses.get(i).or(statuses.last()).unwrap();
            let (reqs, pk, active) = (reqs.clone(), pk.clone(), active.clone());
            thread::spawn(move || {
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                pk.fetch_max(now, Ordering::SeqCst);
                handle(stream, status, delay, &reqs);
                active.fetch_sub(1, Ordering::SeqCst);
            });
        }
    });
    MockServer { url, requests, peak }
}

fn handle(stream: TcpStream, status: u16, delay: Duration, reqs: &Mutex<Vec<Received>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut head = String::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().unwrap();
        }
        head.push_str(&line);
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    reqs.lock().unwrap().push(Received {
        head,
        body: String::from_utf8(body).unwrap(),
    });
    thread::sleep(delay);
    let payload = if status == 200 {
        r#"{"choices":[{"message":{"role":"assistant","content":"countertop-1"}}],"usage":{"prompt_tokens":42,"completion_tokens":3}}"#
    } else {
        r#"{"error":"nope"}"#
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}

fn backend(url: &str) -> HttpBackend {
    let mut cfg = HttpConfig::new(url, SECRET);
    cfg.backoff_base = Duration::from_millis(5);
    HttpBackend::new(cfg)
}

fn request() -> ChatRequest {
    ChatRequest::new(vec![
        ChatMessage::system("You pick receptacles."),
        ChatMessage::user("Where is the tomato?\n- fridge-1\n- countertop-1"),
    ])
}

fn assert_no_secret_logged() {
    for line in captured().0.lock().unwrap().iter() {
        assert!(!line.contains(SECRET), "credential leaked into log: {line}");
    }
}

#[test]
fn transient_failures_are_retried() {
    captured();
    let server = serve(vec![500, 503, 200], Duration::ZERO);
    let r = backend(&server.url).complete(&request()).unwrap();
    assert_eq!(r.content, "countertop-1");
    assert_eq!((r.prompt_tokens, r.completion_tokens), (42, 3));
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 3);
    let last = &reqs[2];
    assert!(last.head.starts_with("POST /v1/chat/completions"));
    assert!(last.head.contains(&format!("Bearer {SECRET}")));
    let body: serde_json::Value = serde_json::from_str(&last.body).unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo-0613");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Where is the tomato?\n- fridge-1\n- countertop-1");
    drop(reqs);
    assert_no_secret_logged();
}

#[test]
fn gives_up_after_three_retries() {
    captured();
    let server = serve(vec![500], Duration::ZERO);
    let err = backend(&server.url).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::BackendUnavailable(_)));
    assert!(!err.to_string().contains(SECRET));
    assert_eq!(server.requests.lock().unwrap().len(), 4);
    assert_no_secret_logged();
}

#[test]
fn client_errors_are_not_retried() {
    captured();
    let server = serve(vec![401], Duration::ZERO);
    let err = backend(&server.url).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::BackendUnavailable(_)));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
    assert_no_secret_logged();
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    captured();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(&format!("http://127.0.0.1:{port}"));
    let err = b.complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::BackendUnavailable(_)));
    assert_no_secret_logged();
}

#[test]
fn in_flight_requests_are_capped() {
    captured();
    let server = serve(vec![200], Duration::from_millis(40));
    let mut cfg = HttpConfig::new(&server.url, SECRET);
    cfg.max_in_flight = 2;
    let b = HttpBackend::new(cfg);
    thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| b.complete(&request()).unwrap());
        }
    });
    assert_eq!(server.requests.lock().unwrap().len(), 8);
    assert!(server.peak.load(Ordering::SeqCst) <= 2);
    assert_no_secret_logged();
}

#[test]
fn debug_output_hides_the_credential() {
    let cfg = HttpConfig::new("http://localhost", SECRET);
    assert!(!format!("{cfg:?}").contains(SECRET));
    assert!(!format!("{:?}", HttpBackend::new(cfg)).contains(SECRET));
}
