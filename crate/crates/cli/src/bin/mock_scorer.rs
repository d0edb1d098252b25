//! Reference model process for the external scorer protocol: serves a
//! builtin scorer over stdio (default) or HTTP (`--http <addr>`).
//!
//! For tests: `--fixed 0.25,0.75` always answers that vector (labels A, B,
//! ...), `--fail-after <n>` stops after n replies, `--garbage` answers with
//! text that is not a probability vector.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use clap::Parser;
use serde_json::json;

use opexplain::raster::Raster;
use opexplain::scorer::{score, Scorer, ScorerSpec};

#[derive(Parser, Debug)]
#[command(name = "mock-scorer")]
struct Args {
    /// Builtin scorer to serve, e.g. `builtin:hue_gate:k=0.1,h0=90`.
    #[arg(long, default_value = "builtin:hue_gate:k=1,h0=90")]
    scorer: String,
    /// Serve HTTP on this address instead of stdio; the bound address is
    /// printed as the first stdout line.
    #[arg(long)]
    http: Option<String>,
    #[arg(long, value_delimiter = ',')]
    fixed: Option<Vec<f64>>,
    #[arg(long)]
    fail_after: Option<usize>,
    #[arg(long)]
    garbage: bool,
}

struct Service {
    scorer: Box<dyn Scorer>,
    fixed: Option<Vec<f64>>,
    garbage: bool,
    fail_after: Option<usize>,
    served: AtomicUsize,
}

impl Service {
    /// `None` once the reply budget is spent.
    fn reply(&self, png: &[u8]) -> Option<String> {
        let n = self.served.fetch_add(1, Ordering::SeqCst);
        if self.fail_after.is_some_and(|limit| n >= limit) {
            return None;
        }
        if self.garbage {
            return Some("probably class A".into());
        }
        if let Some(probs) = &self.fixed {
            let labels: Vec<String> = (0..probs.len()).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
            return Some(json!({ "probs": probs, "labels": labels }).to_string());
        }
        let body = match Raster::decode_png(png).and_then(|img| score(self.scorer.as_ref(), &img)) {
            Ok(p) => json!({ "probs": p.probs(), "labels": p.labels() }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        Some(body.to_string())
    }
}

fn serve_stdio(svc: &Service) -> io::Result<()> {
    let mut stdin = io::stdin().lock();
    let mut stdout = io::stdout().lock();
    loop {
        let mut len = [0u8; 4];
        match stdin.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        }
        let mut png = vec![0u8; u32::from_be_bytes(len) as usize];
        stdin.read_exact(&mut png)?;
        let Some(reply) = svc.reply(&png) else {
            return Ok(());
        };
        writeln!(stdout, "{reply}")?;
        stdout.flush()?;
    }
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn handle(stream: TcpStream, svc: &Service) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut stream = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut content_length = 0usize;
        let mut close = false;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                match k.trim().to_ascii_lowercase().as_str() {
                    "content-length" => content_length = v.trim().parse().unwrap_or(0),
                    "connection" => close = v.trim().eq_ignore_ascii_case("close"),
                    _ => {}
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let mut parts = request_line.split_whitespace();
        let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        if method != "POST" || path != "/score" {
            respond(&mut stream, "404 Not Found", "{\"error\":\"not found\"}")?;
        } else {
            match svc.reply(&body) {
                Some(reply) => respond(&mut stream, "200 OK", &reply)?,
                None => respond(&mut stream, "503 Service Unavailable", "{\"error\":\"budget spent\"}")?,
            }
        }
        if close {
            return Ok(());
        }
    }
}

fn serve_http(addr: &str, svc: Arc<Service>) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    println!("{}", listener.local_addr()?);
    io::stdout().flush()?;
    for stream in listener.incoming() {
        let stream = stream?;
        let svc = Arc::clone(&svc);
        thread::spawn(move || {
            let _ = handle(stream, &svc);
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scorer = match args.scorer.parse::<ScorerSpec>() {
        Ok(spec @ ScorerSpec::Builtin { .. }) => spec.build(),
        Ok(other) => {
            eprintln!("mock-scorer serves builtin scorers only, got `{other}`");
            return ExitCode::from(2);
        }
        Err(e) => Err(e),
    };
    let scorer = match scorer {
        Ok(s) => s,
        Err(e) => {
            eprintln!("mock-scorer: {e}");
            return ExitCode::from(2);
        }
    };
    let svc = Service {
        scorer,
        fixed: args.fixed,
        garbage: args.garbage,
        fail_after: args.fail_after,
        served: AtomicUsize::new(0),
    };
    let result = match &args.http {
        Some(addr) => serve_http(addr, Arc::new(svc)),
        None => serve_stdio(&svc),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mock-scorer: {e}");
            ExitCode::FAILURE
        }
    }
}
