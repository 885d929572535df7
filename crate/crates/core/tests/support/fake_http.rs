//! Minimal HTTP server replaying recorded encyclopedia responses.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub struct FakeEndpoint {
    pub base: String,
    pub requests: Arc<AtomicUsize>,
}

impl FakeEndpoint {
    pub fn api(&self) -> String {
        format!("{}/w/api.php", self.base)
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap();
                out.push(u8::from_str_radix(hex, 16).unwrap());
                i += 2;
            }
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8(out).unwrap()
}

fn param<'a>(params: &'a [(String, String)], key: &str) -> Option<&'a str> {
    params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn respond(target: &str) -> (u16, &'static str, String) {
    let (path, query) = target.split_once('?').unwrap_or((target, ""));
    let params: Vec<(String, String)> = query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            (decode(k), decode(v))
        })
        .collect();
    let read = |name: &str| std::fs::read_to_string(fixtures().join(name)).unwrap();
    match path {
        "/w/api.php" => match param(&params, "action") {
            Some("query") => match param(&params, "titles") {
                Some("Saint Petersburg") | Some("saint petersburg") => (200, "application/json", read("http/saint_petersburg.json")),
                Some("Rate Limited") => (429, "text/plain", "slow down".into()),
                Some("Broken Upstream") => (503, "text/plain", "unavailable".into()),
                Some("Garbage") => (200, "application/json", "<html>not json</html>".into()),
                _ => (200, "application/json", read("http/missing.json")),
            },
            Some("opensearch") => match param(&params, "search") {
                Some("Petersburg russia") => (200, "application/json", read("http/opensearch_saint_petersburg.json")),
                _ => (200, "application/json", read("http/opensearch_empty.json")),
            },
            _ => (400, "text/plain", "bad action".into()),
        },
        "/page.html" => (200, "text/html; charset=utf-8", read("html/nav_heavy.html")),
        "/saint_petersburg.txt" => (200, "text/plain", read("articles/saint_petersburg.txt")),
        _ => (404, "text/plain", "not found".into()),
    }
}

fn handle(stream: TcpStream) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) | Err(_) => break,
            Ok(_) if line == "\r\n" || line == "\n" => break,
            Ok(_) => {}
        }
    }
    let target = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let (status, content_type, body) = respond(&target);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

/// Serves recorded responses on an ephemeral local port until the process exits.
pub fn start() -> FakeEndpoint {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&requests);
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            counter.fetch_add(1, Ordering::SeqCst);
            std::thread::spawn(move || handle(stream));
        }
    });
    FakeEndpoint { base, requests }
}
