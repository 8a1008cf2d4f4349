use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use sentaug::llm::{BackendKind, CompletionRequest, HttpBackend, LlmClient, LlmError, ResponseCache, RetryPolicy};
use sentaug::prompt::ChatMessage;

struct Seen {
    authorization: Option<String>,
    path: String,
    body: serde_json::Value,
}

fn read_request(stream: &mut TcpStream) -> Seen {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
    let mut length = 0;
    let mut authorization = None;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let (name, value) = h.split_once(':').unwrap();
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap(),
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    Seen {
        authorization,
        path,
        body: serde_json::from_slice(&body).unwrap(),
    }
}

/// Serves one scripted `(status, body)` per connection, then stops.
fn serve(script: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in script {
            let (mut stream, _) = listener.accept().unwrap();
            let seen = read_request(&mut stream);
            tx.send(seen).unwrap();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, rx)
}

fn ok_body(content: &str) -> String {
    serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string()
}

fn request() -> CompletionRequest {
    CompletionRequest::new("gpt-3.5-turbo", vec![ChatMessage::user("Paraphrase: nice place")])
}

fn client(url: &str, key: Option<&str>) -> LlmClient {
    let backend = HttpBackend::new(url, key.map(String::from), Duration::from_secs(5)).unwrap();
    LlmClient::new(Arc::new(backend))
        .with_retry(RetryPolicy {
            max_attempts: 3,
            base_backoff: Duration::from_millis(1),
            backoff_factor: 2.0,
        })
        .with_sleeper(|_| {})
}

#[test]
fn sends_openai_style_request_with_bearer_token() {
    let (url, rx) = serve(vec![(200, ok_body("A lovely spot."))]);
    let out = client(&url, Some("sk-test")).complete(&request()).unwrap();
    assert_eq!(out.content, "A lovely spot.");
    assert_eq!(out.backend, BackendKind::Http);
    let seen = rx.recv().unwrap();
    assert_eq!(seen.path, "/v1/chat/completions");
    assert_eq!(seen.authorization.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen.body["model"], "gpt-3.5-turbo");
    assert_eq!(seen.body["messages"][0]["role"], "user");
    assert_eq!(seen.body["messages"][0]["content"], "Paraphrase: nice place");
}

#[test]
fn rate_limit_is_retried() {
    let (url, rx) = serve(vec![
        (429, "{\"error\":\"slow down\"}".into()),
        (503, "{}".into()),
        (200, ok_body("done")),
    ]);
    let out = client(&url, None).complete(&request()).unwrap();
    assert_eq!(out.content, "done");
    assert_eq!(rx.iter().take(3).count(), 3);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, _rx) = serve(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
    match client(&url, None).complete(&request()) {
        Err(LlmError::Exhausted { attempts }) => assert_eq!(attempts.len(), 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, rx) = serve(vec![(401, "{\"error\":\"bad key\"}".into())]);
    match client(&url, Some("wrong")).complete(&request()) {
        Err(LlmError::Status { code: 401, body }) => assert!(body.contains("bad key")),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(rx.iter().count(), 1);
}

#[test]
fn empty_content_is_an_error() {
    let (url, _rx) = serve(vec![(200, ok_body("   "))]);
    assert!(matches!(
        client(&url, None).complete(&request()),
        Err(LlmError::EmptyCompletion { .. })
    ));
}

#[test]
fn cached_request_skips_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let (url, rx) = serve(vec![(200, ok_body("first"))]);
    let c = client(&url, None).with_cache(ResponseCache::new(dir.path()));
    assert_eq!(c.complete(&request()).unwrap().backend, BackendKind::Http);
    let again = c.complete(&request()).unwrap();
    assert_eq!(again.content, "first");
    assert_eq!(again.backend, BackendKind::Cache);
    assert_eq!(rx.iter().count(), 1);
}
