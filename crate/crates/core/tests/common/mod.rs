//! A minimal HTTP/1.1 stand-in for the bridge service, for client tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

#[derive(Clone)]
pub enum Mode {
    /// Uniform model over `n_words` words, matching `UniformLm`.
    Uniform { n_words: usize },
    /// Replies to each op with a fixed body.
    Fixed { score: Value, fill: Value, sentiment: Value },
    /// Health reports another protocol version.
    WrongProtocol,
    /// Fill replies drop the last candidate.
    DropCandidate,
    /// Fill replies sum to 0.5.
    Unnormalized,
    /// Everything but health answers 500.
    Failing,
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub method: String,
    pub path: String,
    pub auth: Option<String>,
    pub body: Option<Value>,
}

pub struct Stub {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl Stub {
    pub fn start(mode: Mode, token: Option<&str>) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let token = token.map(|t| format!("Bearer {t}"));
        thread::spawn(move || {
            for conn in listener.incoming() {
                let Ok(conn) = conn else { break };
                let (mode, log, token) = (mode.clone(), log.clone(), token.clone());
                thread::spawn(move || serve(conn, &mode, &log, token.as_deref()));
            }
        });
        Stub { url, seen }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn serve(conn: TcpStream, mode: &Mode, log: &Mutex<Vec<Seen>>, token: Option<&str>) {
    let _ = conn.set_nodelay(true);
    let mut reader = BufReader::new(conn.try_clone().unwrap());
    let mut out = conn;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or("").to_string();
        let path = parts.next().unwrap_or("").to_string();
        let mut len = 0;
        let mut auth = None;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            let (k, v) = h.split_once(':').unwrap();
            match k.to_ascii_lowercase().as_str() {
                "content-length" => len = v.trim().parse().unwrap(),
                "authorization" => auth = Some(v.trim().to_string()),
                _ => {}
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let body: Option<Value> = (len > 0).then(|| serde_json::from_slice(&body).unwrap());
        log.lock().unwrap().push(Seen {
            method: method.clone(),
            path: path.clone(),
            auth: auth.clone(),
            body: body.clone(),
        });
        let (status, reply) = if token.is_some() && auth.as_deref() != token {
            (401, json!({"error": "unauthorized"}))
        } else {
            respond(mode, &path, body.as_ref())
        };
        let text = reply.to_string();
        let head = format!(
            "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            if status == 200 { "OK" } else { "Error" },
            text.len()
        );
        if out.write_all((head + &text).as_bytes()).is_err() {
            return;
        }
    }
}

fn respond(mode: &Mode, path: &str, body: Option<&Value>) -> (u16, Value) {
    if path == "/healthz" {
        let protocol = if matches!(mode, Mode::WrongProtocol) { "tsmh-bridge/0" } else { "tsmh-bridge/1" };
        return (200, json!({"model": "stub-uniform", "protocol": protocol}));
    }
    if path != "/query" {
        return (404, json!({"error": "not found"}));
    }
    if matches!(mode, Mode::Failing) {
        return (500, json!({"error": "model crashed"}));
    }
    let body = body.expect("query has a body");
    let op = body["op"].as_str().unwrap();
    let tokens = body["tokens"].as_array().unwrap();
    if let Mode::Fixed { score, fill, sentiment } = mode {
        return (200, match op {
            "score" => score.clone(),
            "fill" => fill.clone(),
            _ => sentiment.clone(),
        });
    }
    match op {
        "score" => {
            let n = match mode {
                Mode::Uniform { n_words } => *n_words,
                _ => 2,
            };
            (200, json!({"log_score": -(tokens.len() as f64) * (n as f64).ln()}))
        }
        "fill" => {
            let mut cands: Vec<&str> = body["candidates"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
            let n = cands.len() as f64;
            let lp = match mode {
                Mode::Unnormalized => -n.ln() + 0.5f64.ln(),
                _ => -n.ln(),
            };
            if matches!(mode, Mode::DropCandidate) {
                cands.pop();
            }
            let map: serde_json::Map<String, Value> = cands.into_iter().map(|c| (c.to_string(), json!(lp))).collect();
            (200, json!({ "log_probs": map }))
        }
        "sentiment" => (200, json!({"positive": 0.5})),
        _ => (400, json!({"error": "unknown op"})),
    }
}
