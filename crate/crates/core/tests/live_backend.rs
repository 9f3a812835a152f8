use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use mhqa_core::generator::{Embedder, GeneratorClient, GeneratorError, HttpEmbedder, HttpGenerator, PromptSet};

struct Recorded {
    headers: String,
    body: serde_json::Value,
}

/// Serves the given (status, body) replies in order, one per connection.
fn mock(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Recorded>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/x", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let sink = log.clone();
    thread::spawn(move || {
        for (status, reply) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                headers.push_str(&line.to_ascii_lowercase());
            }
            let len: usize = headers
                .lines()
                .find_map(|l| l.strip_prefix("content-length:"))
                .map(|v| v.trim().parse().unwrap())
                .unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            sink.lock().unwrap().push(Recorded {
                headers,
                body: serde_json::from_slice(&body).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, log)
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

#[test]
fn chat_request_shape_and_model_routing() {
    let (url, log) = mock(vec![
        (200, chat("[\"Who directed Grown Ups?\", \"Where was he born?\"]")),
        (200, chat("Dennis Dugan")),
    ]);
    let generator = HttpGenerator::new(&url, "decomposer-m", "answer-m", Some("sk-test".into())).unwrap();
    let prompts = PromptSet::default();
    let client = GeneratorClient::new(&generator, &prompts, 0.0);
    let subs = client.decompose("Where was the director of Grown Ups born?").unwrap();
    assert_eq!(subs, vec!["Who directed Grown Ups?", "Where was he born?"]);
    let answer = client
        .answer("Who directed Grown Ups?", &["Dennis Dugan directed Grown Ups.".into()])
        .unwrap();
    assert_eq!(answer, "Dennis Dugan");

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].body["model"], "decomposer-m");
    assert_eq!(log[1].body["model"], "answer-m");
    assert_eq!(log[0].body["temperature"], 0.0);
    assert_eq!(log[0].body["messages"][0]["role"], "user");
    assert!(log[0].body["messages"][0]["content"]
        .as_str()
        .unwrap()
        .contains("Question:Where was the director of Grown Ups born?"));
    assert!(log[0].headers.contains("authorization: bearer sk-test"));
}

#[test]
fn server_error_is_retried_once() {
    let (url, log) = mock(vec![(503, "{}".into()), (200, chat("No"))]);
    let generator = HttpGenerator::new(&url, "d", "a", None).unwrap();
    let prompts = PromptSet::default();
    let client = GeneratorClient::new(&generator, &prompts, 0.0);
    assert!(!client.rewrite_decision("Where is Rome?", &[]).unwrap());
    assert_eq!(log.lock().unwrap().len(), 2);
    assert!(!log.lock().unwrap()[0].headers.contains("authorization"));
}

#[test]
fn client_error_is_not_retried() {
    let (url, log) = mock(vec![(401, "{\"error\": \"bad key\"}".into())]);
    let generator = HttpGenerator::new(&url, "d", "a", None).unwrap();
    let prompts = PromptSet::default();
    let err = GeneratorClient::new(&generator, &prompts, 0.0)
        .answer("q?", &[])
        .unwrap_err();
    assert!(matches!(err, GeneratorError::Transport(ref m) if m.contains("401")));
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let generator = HttpGenerator::new(format!("http://127.0.0.1:{port}/v1"), "d", "a", None).unwrap();
    let prompts = PromptSet::default();
    let err = GeneratorClient::new(&generator, &prompts, 0.0)
        .answer("q?", &[])
        .unwrap_err();
    assert!(matches!(err, GeneratorError::Transport(_)));
}

#[test]
fn embeddings_request_and_reply() {
    let reply = serde_json::json!({"data": [{"embedding": [0.5, -1.0, 2.0]}]}).to_string();
    let (url, log) = mock(vec![(200, reply)]);
    let embedder = HttpEmbedder::new(&url, "mini", None).unwrap();
    assert_eq!(embedder.embed("Grown Ups").unwrap(), vec![0.5, -1.0, 2.0]);
    let log = log.lock().unwrap();
    assert_eq!(log[0].body, serde_json::json!({"model": "mini", "input": "Grown Ups"}));
}
