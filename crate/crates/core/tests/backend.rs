use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use scenefuse::backend::{
    BackendClient, BackendError, BackendRequest, CacheKey, GenerationParams, HttpConfig, HttpTransport,
    ResponseCache, RetryPolicy, Role, Transport,
};
use serde_json::Value;

/// A request seen by the test server.
#[derive(Debug, Clone)]
struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serves the scripted `(status, body)` replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, reply) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen { authorization, body: serde_json::from_slice(&body).unwrap() });
            let mut stream = reader.into_inner();
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

fn ok(text: &str) -> (u16, String) {
    (200, serde_json::json!({"choices": [{"message": {"content": text}}]}).to_string())
}

fn client(url: &str, auth_env: Option<&str>) -> BackendClient {
    let transport = HttpTransport::new(HttpConfig {
        endpoint: url.to_string(),
        auth_env: auth_env.map(String::from),
        timeout: Duration::from_secs(10),
    })
    .unwrap();
    BackendClient::new(Role::FactJudge, transport)
        .with_retry(RetryPolicy { attempts: 3, base_delay: Duration::from_millis(5) })
}

fn request(prompt: &str) -> BackendRequest {
    BackendRequest::new(
        Role::FactJudge,
        prompt,
        GenerationParams { max_output_tokens: 8, temperature: 0.0, model_name: "judge".into() },
    )
}

#[test]
fn sends_chat_completion_with_bearer_token() {
    std::env::set_var("SCENEFUSE_TEST_TOKEN_A", "sekrit");
    let (url, seen) = serve(vec![ok("True")]);
    let c = client(&url, Some("SCENEFUSE_TEST_TOKEN_A"));
    assert_eq!(c.complete(&request("Input: x True or False?")).unwrap(), "True");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekrit"));
    assert_eq!(seen[0].body["model"], "judge");
    assert_eq!(seen[0].body["messages"][0]["role"], "user");
    assert_eq!(seen[0].body["messages"][0]["content"], "Input: x True or False?");
    assert_eq!(seen[0].body["max_tokens"], 8);
}

#[test]
fn retries_server_errors() {
    let (url, seen) = serve(vec![(503, "busy".into()), (500, "oops".into()), ok("False")]);
    let c = client(&url, None);
    assert_eq!(c.complete(&request("q")).unwrap(), "False");
    assert_eq!(c.upstream_calls(), 3);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_three_attempts() {
    let (url, _) = serve(vec![(503, "a".into()), (503, "b".into()), (503, "c".into())]);
    let c = client(&url, None);
    assert!(matches!(c.complete(&request("q")), Err(BackendError::Unavailable { attempts: 3, .. })));
}

#[test]
fn auth_and_quota_are_not_retried() {
    let (url, _) = serve(vec![(401, "bad key".into())]);
    let c = client(&url, None);
    assert!(matches!(c.complete(&request("q")), Err(BackendError::Auth(_))));
    assert_eq!(c.upstream_calls(), 1);
    let (url, _) = serve(vec![(429, "quota exhausted".into())]);
    let c = client(&url, None);
    assert!(matches!(c.complete(&request("q")), Err(BackendError::QuotaExceeded(_))));
    assert_eq!(c.upstream_calls(), 1);
}

#[test]
fn missing_token_variable() {
    let err = HttpTransport::new(HttpConfig {
        endpoint: "http://127.0.0.1:9/".into(),
        auth_env: Some("SCENEFUSE_TEST_TOKEN_UNSET".into()),
        timeout: Duration::from_secs(1),
    })
    .err()
    .unwrap();
    assert!(matches!(err, BackendError::Auth(_)));
}

#[test]
fn cached_responses_skip_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let (url, seen) = serve(vec![ok("True")]);
    let c = client(&url, None).with_cache(ResponseCache::open(dir.path()).unwrap());
    assert_eq!(c.complete(&request("same")).unwrap(), "True");
    assert_eq!(c.complete(&request("same")).unwrap(), "True");
    assert_eq!(seen.lock().unwrap().len(), 1);

    let reopened = client("http://127.0.0.1:9/unused", None).with_cache(ResponseCache::open(dir.path()).unwrap());
    assert_eq!(reopened.complete(&request("same")).unwrap(), "True");
    assert_eq!(reopened.upstream_calls(), 0);
}

#[test]
fn cache_key_covers_params_and_role() {
    let a = request("p");
    let mut b = request("p");
    b.params.temperature = 0.7;
    let c = BackendRequest::new(Role::FactExtractor, "p", a.params.clone());
    assert_ne!(CacheKey::of(&a), CacheKey::of(&b));
    assert_ne!(CacheKey::of(&a), CacheKey::of(&c));
    assert_eq!(CacheKey::of(&a), CacheKey::of(&request("p")));
}

struct Slow {
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl Transport for Slow {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(20));
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(request.prompt.clone())
    }
}

#[test]
fn concurrency_bound_holds_across_threads() {
    let slow = Arc::new(Slow { in_flight: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
    struct Shared(Arc<Slow>);
    impl Transport for Shared {
        fn send(&self, r: &BackendRequest) -> Result<String, BackendError> {
            self.0.send(r)
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(
        BackendClient::new(Role::DialogueSummarizer, Shared(slow.clone()))
            .with_concurrency(2)
            .with_cache(ResponseCache::open(dir.path()).unwrap()),
    );
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let c = c.clone();
            thread::spawn(move || c.complete(&request(&format!("p{}", i % 4))).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert!(slow.peak.load(Ordering::SeqCst) <= 2);
    assert_eq!(c.cache().unwrap().len(), 4);
    for i in 0..4 {
        let key = CacheKey::of(&request(&format!("p{i}")));
        assert_eq!(c.cache().unwrap().get(&key).as_deref(), Some(format!("p{i}").as_str()));
    }
}
