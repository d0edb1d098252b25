//! Adapters for models running outside this process.
//!
//! Wire protocol v1. Images travel as PNG; replies are one JSON object
//! `{"probs":[...],"labels":[...]}`.
//!
//! * stdio: each request is a 4-byte big-endian length followed by the PNG
//!   bytes on the child's stdin; the reply is a single line on its stdout.
//! * HTTP: `POST /score` with `Content-Type: image/png`; a 200 reply carries
//!   the JSON body, any other status is a transport error.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use super::{ProbVector, Scorer, ScorerDescriptor, ScorerKind};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Deserialize)]
struct Reply {
    probs: Vec<f64>,
    labels: Vec<String>,
}

pub(crate) fn parse_reply(text: &str) -> Result<ProbVector> {
    let reply: Reply = serde_json::from_str(text.trim()).map_err(|e| {
        Error::Transport(format!("malformed scorer reply ({e}): {}", truncate(text)))
    })?;
    ProbVector::new(reply.probs, reply.labels)
}

fn truncate(text: &str) -> String {
    let t = text.trim();
    if t.len() > 200 {
        let mut end = 200;
        while !t.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &t[..end])
    } else {
        t.to_string()
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Session {
    fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self {
            child,
            stdin,
            stdout,
        })
    }

    fn request(&mut self, png: &[u8]) -> Result<String> {
        let len = u32::try_from(png.len())
            .map_err(|_| Error::Transport("image too large for the stdio frame".into()))?;
        let io_err = |e: std::io::Error| Error::Transport(format!("scorer pipe: {e}"));
        self.stdin.write_all(&len.to_be_bytes()).map_err(io_err)?;
        self.stdin.write_all(png).map_err(io_err)?;
        self.stdin.flush().map_err(io_err)?;
        let mut line = String::new();
        let n = self.stdout.read_line(&mut line).map_err(io_err)?;
        if n == 0 {
            let status = self
                .child
                .try_wait()
                .ok()
                .flatten()
                .map(|s| s.to_string())
                .unwrap_or_else(|| "still running".into());
            return Err(Error::Transport(format!(
                "scorer closed its stdout without replying ({status})"
            )));
        }
        Ok(line)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Long-lived child processes speaking the stdio protocol. Requests on one
/// process are serialized; `connections` processes may serve concurrently.
pub struct StdioScorer {
    command: String,
    sessions: Vec<Mutex<Session>>,
    next: AtomicUsize,
}

impl StdioScorer {
    pub fn spawn(command: &str, connections: usize) -> Result<Self> {
        let sessions = (0..connections.max(1))
            .map(|_| Session::spawn(command).map(Mutex::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            command: command.to_string(),
            sessions,
            next: AtomicUsize::new(0),
        })
    }
}

impl Scorer for StdioScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor {
            kind: ScorerKind::External,
            name: format!("exec:{}", self.command),
            input_size: None,
            class_labels: Vec::new(),
        }
    }

    fn predict(&self, img: &Raster) -> Result<ProbVector> {
        let png = img.encode_png()?;
        let start = self.next.fetch_add(1, Ordering::Relaxed) % self.sessions.len();
        // take the first idle process, otherwise wait on the round-robin pick
        let mut guard = None;
        for k in 0..self.sessions.len() {
            if let Ok(g) = self.sessions[(start + k) % self.sessions.len()].try_lock() {
                guard = Some(g);
                break;
            }
        }
        let mut session = match guard {
            Some(g) => g,
            None => self.sessions[start]
                .lock()
                .map_err(|_| Error::Transport("scorer session poisoned".into()))?,
        };
        let line = session.request(&png)?;
        parse_reply(&line)
    }
}

/// Client for the HTTP variant of the protocol.
pub struct HttpScorer {
    url: String,
    agent: ureq::Agent,
}

impl HttpScorer {
    pub fn new(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let url = if base.ends_with("/score") {
            base.to_string()
        } else {
            format!("{base}/score")
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self { url, agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Scorer for HttpScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        ScorerDescriptor {
            kind: ScorerKind::External,
            name: format!("http:{}", self.url),
            input_size: None,
            class_labels: Vec::new(),
        }
    }

    fn predict(&self, img: &Raster) -> Result<ProbVector> {
        let png = img.encode_png()?;
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "image/png")
            .send(&png[..])
            .map_err(|e| Error::Transport(format!("POST {}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        let mut body = String::new();
        resp.body_mut()
            .as_reader()
            .read_to_string(&mut body)
            .map_err(|e| Error::Transport(format!("reading reply from {}: {e}", self.url)))?;
        if status != 200 {
            return Err(Error::Transport(format!(
                "POST {} returned {status}: {}",
                self.url,
                truncate(&body)
            )));
        }
        parse_reply(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Minimal one-request-per-connection HTTP responder.
    fn serve(replies: Vec<(u16, &'static str)>) -> (String, thread::JoinHandle<Vec<Vec<u8>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                assert!(request_line.starts_with("POST /score "), "{request_line}");
                let mut content_type = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if let Some(v) = lower.strip_prefix("content-type:") {
                        content_type = v.trim().to_string();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                assert_eq!(content_type, "image/png");
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(buf);
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (format!("http://{addr}"), handle)
    }

    #[test]
    fn http_round_trip() {
        let (url, handle) = serve(vec![(200, r#"{"probs":[0.25,0.75],"labels":["x","y"]}"#)]);
        let scorer = HttpScorer::new(&url);
        let img = Raster::filled(4, 3, [1, 2, 3]);
        let p = scorer.predict(&img).unwrap();
        assert_eq!(p.probs(), &[0.25, 0.75]);
        assert_eq!(p.labels(), &["x".to_string(), "y".to_string()]);
        let bodies = handle.join().unwrap();
        assert_eq!(Raster::decode_png(&bodies[0]).unwrap(), img);
    }

    #[test]
    fn http_errors_are_transport_errors() {
        let (url, handle) = serve(vec![
            (500, "boom"),
            (200, "not json"),
            (200, r#"{"probs":[0.9,0.9],"labels":["a","b"]}"#),
        ]);
        let scorer = HttpScorer::new(&format!("{url}/score"));
        let img = Raster::filled(2, 2, [0; 3]);
        let e1 = scorer.predict(&img).unwrap_err();
        assert!(matches!(e1, Error::Transport(ref m) if m.contains("500")), "{e1}");
        let e2 = scorer.predict(&img).unwrap_err();
        assert!(e2.is_transport());
        let e3 = scorer.predict(&img).unwrap_err();
        assert!(matches!(e3, Error::InvalidProbs(_)));
        handle.join().unwrap();
    }

    #[test]
    fn http_unreachable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let scorer = HttpScorer::new(&format!("http://{addr}"));
        let err = scorer.predict(&Raster::filled(2, 2, [0; 3])).unwrap_err();
        assert!(err.is_transport());
    }

    #[test]
    fn stdio_missing_reply_is_transport_error() {
        // consumes nothing and exits immediately
        let scorer = StdioScorer::spawn("exit 0", 1).unwrap();
        let err = scorer.predict(&Raster::filled(2, 2, [0; 3])).unwrap_err();
        assert!(err.is_transport(), "{err}");
    }

    #[test]
    fn reply_parsing() {
        assert!(parse_reply(r#"{"probs":[1.0],"labels":["only"]}"#).is_ok());
        assert!(parse_reply(r#"{"probs":[0.5,0.5]}"#).is_err());
        assert!(parse_reply(r#"{"probs":[0.5,0.5],"labels":["a"]}"#).is_err());
    }
}
