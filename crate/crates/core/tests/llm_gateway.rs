use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use testmend_core::llm::{ChatMessage, ChatRequest, Gateway, HttpTransport, LlmError};

/// Minimal HTTP/1.1 server answering every POST with the scripted statuses
/// in order, then 200 forever. Returns the base URL and a hit counter.
fn stub_server(statuses: Vec<u16>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let status = statuses.get(n).copied().unwrap_or(200);
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let last = request["messages"]
                .as_array()
                .and_then(|m| m.last())
                .and_then(|m| m["content"].as_str())
                .unwrap_or("")
                .to_owned();
            let payload = if status == 200 {
                serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": format!("reply to {last}")}, "finish_reason": "stop"}],
                    "usage": {"prompt_tokens": 10, "completion_tokens": 5}
                })
                .to_string()
            } else {
                "{\"error\":\"busy\"}".to_owned()
            };
            let reason = if status == 200 { "OK" } else { "Error" };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, hits)
}

fn request(text: &str) -> ChatRequest {
    ChatRequest {
        messages: vec![ChatMessage::system("You are a Java expert."), ChatMessage::user(text)],
        model_id: "stub-model".into(),
        temperature: 0.1,
        max_output: 256,
    }
}

#[test]
fn record_mode_calls_the_network_once_per_distinct_request() {
    let (url, hits) = stub_server(vec![]);
    let dir = tempfile::tempdir().unwrap();
    let cassette = dir.path().join("cassette.json");
    let gateway = Gateway::record(HttpTransport::new(&url, None, Duration::from_secs(5)), Some(&cassette)).unwrap();

    let first = gateway.complete(&request("fix the test")).unwrap();
    assert_eq!(first.content, "reply to fix the test");
    assert_eq!(first.token_usage.total(), 15);
    let again = gateway.complete(&request("fix the test")).unwrap();
    assert_eq!(again.content, first.content);
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    // A fresh recorder over the same file is served entirely from disk.
    let reopened = Gateway::record(HttpTransport::new(&url, None, Duration::from_secs(5)), Some(&cassette)).unwrap();
    reopened.complete(&request("fix the test")).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    let replay = Gateway::replay_file(&cassette).unwrap();
    assert_eq!(replay.complete(&request("fix the test")).unwrap().content, first.content);
    assert!(matches!(
        replay.complete(&request("something else")),
        Err(LlmError::CassetteMiss(_))
    ));
}

#[test]
fn server_errors_are_retried_once() {
    let (url, hits) = stub_server(vec![503]);
    let gateway = Gateway::live(HttpTransport::new(&url, None, Duration::from_secs(5)));
    assert_eq!(gateway.complete(&request("x")).unwrap().content, "reply to x");
    assert_eq!(hits.load(Ordering::SeqCst), 2);

    let (url, hits) = stub_server(vec![429, 429, 429]);
    let gateway = Gateway::live(HttpTransport::new(&url, None, Duration::from_secs(5)));
    assert!(matches!(gateway.complete(&request("x")), Err(LlmError::ProviderError(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = stub_server(vec![400, 400]);
    let gateway = Gateway::live(HttpTransport::new(&url, None, Duration::from_secs(5)));
    assert!(matches!(gateway.complete(&request("x")), Err(LlmError::ProviderError(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn concurrent_replay_is_consistent() {
    let (url, _) = stub_server(vec![]);
    let recorder = Gateway::record(HttpTransport::new(&url, None, Duration::from_secs(5)), None).unwrap();
    for i in 0..8 {
        recorder.complete(&request(&format!("q{i}"))).unwrap();
    }
    let replay = Arc::new(Gateway::replay(recorder.cassette()));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let replay = replay.clone();
            thread::spawn(move || replay.complete(&request(&format!("q{i}"))).unwrap().content)
        })
        .collect();
    for (i, h) in handles.into_iter().enumerate() {
        assert_eq!(h.join().unwrap(), format!("reply to q{i}"));
    }
}
