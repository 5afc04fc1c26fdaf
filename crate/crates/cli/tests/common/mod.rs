//! Helpers shared by the CLI integration tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

type Handler = dyn Fn(usize, &str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering each request with `handler(hit, body)`.
pub struct FakeServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
}

impl FakeServer {
    pub fn start(handler: impl Fn(usize, &str) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        let handler: Arc<Handler> = Arc::new(handler);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                let mut line = String::new();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = l.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; length];
                let _ = reader.read_exact(&mut body);
                let hit = counter.fetch_add(1, Ordering::SeqCst);
                let (status, reply) = handler(hit, &String::from_utf8_lossy(&body));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        FakeServer { url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

pub fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

const WORDS: [&str; 16] = [
    "dasar", "perempuan", "cewek", "lemah", "sok", "pintar", "diam", "saja", "urus", "dapur", "banci", "emak",
    "rese", "manja", "cengeng", "ribet",
];

/// A deterministic tweet-like completion derived from the request body.
pub fn generated_tweet(body: &str) -> String {
    let digest = augbench::providers::sha256_hex(body.as_bytes());
    let words: Vec<&str> = digest.bytes().take(8).map(|b| WORDS[(b % 16) as usize]).collect();
    format!("{} {}", words.join(" "), &digest[..6])
}

/// Chat server that answers every prompt with [`generated_tweet`].
pub fn chat_server() -> FakeServer {
    FakeServer::start(|_, body| (200, chat_reply(&generated_tweet(body))))
}

/// Config with fast retries and no rate limiting, for tests against a fake server.
pub fn write_fast_http_config(path: &Path) {
    std::fs::write(
        path,
        "[augmentation.http]\nrate_limit_per_sec = 100000.0\ntimeout_secs = 10\n\n\
         [augmentation.http.retry]\nmax_attempts = 3\ninitial_backoff = 1\nmultiplier = 2.0\n",
    )
    .unwrap();
}

pub fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("augbench").chain(list.iter().copied()).map(String::from).collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
