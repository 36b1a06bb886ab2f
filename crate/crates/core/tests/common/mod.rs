#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use gkq::service::{build_state, router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const BIN: &str = env!("CARGO_BIN_EXE_gkq");

pub fn state(store: &Path) -> Arc<AppState> {
    Arc::new(build_state(&ServiceConfig { store: store.to_path_buf(), ..Default::default() }).unwrap())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }

    pub fn version(&self) -> u64 {
        self.headers["x-rulebase-version"].to_str().unwrap().parse().unwrap()
    }
}

pub async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: impl Into<String>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.into())).unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply { status, headers, body: String::from_utf8(bytes.to_vec()).unwrap() }
}

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// A `gkq serve` child process, killed on drop.
pub struct Server {
    pub child: Child,
    pub port: u16,
}

impl Server {
    pub fn spawn(store: &Path, extra: &[&str]) -> Server {
        let port = free_port();
        let child = Command::new(BIN)
            .arg("serve")
            .args(["--port", &port.to_string(), "--store"])
            .arg(store)
            .args(extra)
            .env_remove("GKQ_PORT")
            .env_remove("GKQ_STORE")
            .env_remove("GKQ_RULES")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let server = Server { child, port };
        let deadline = Instant::now() + Duration::from_secs(20);
        while Instant::now() < deadline {
            if let Ok((200, _)) = http(port, "GET", "/api/health", "") {
                return server;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        panic!("server on port {port} did not become ready");
    }

    pub fn request(&self, method: &str, path: &str, body: &str) -> (u16, String) {
        http(self.port, method, path, body).unwrap()
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Minimal HTTP/1.1 client over a raw socket.
pub fn http(port: u16, method: &str, path: &str, body: &str) -> std::io::Result<(u16, String)> {
    let mut s = TcpStream::connect(("127.0.0.1", port))?;
    s.set_read_timeout(Some(Duration::from_secs(10)))?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = Vec::new();
    s.read_to_end(&mut raw)?;
    let text = String::from_utf8_lossy(&raw);
    let (head, body) = text.split_once("\r\n\r\n").unwrap_or((&text, ""));
    let status = head.split_whitespace().nth(1).and_then(|c| c.parse().ok()).unwrap_or(0);
    Ok((status, body.to_string()))
}

pub fn profile_json(ratings: [f64; 7], height: f64) -> String {
    serde_json::to_string(&gkq::GKProfile::from_numbers(ratings, height)).unwrap()
}

pub mod gen {
    use gkq::fuzzy::{FuzzySet, LinguisticVariable, PiecewiseLinearMF, TNorm, Universe};
    use gkq::inference::{Defuzzifier, Implication, InferenceConfig, Rule, RuleBase};
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    const NAMES: [&str; 12] =
        ["speed", "x", "rule", "IS", "two words", "input", "then", "q_1", "Ünïcode", "a-b", "say \"hi\"", "back\\slash"];

    fn name(rng: &mut StdRng, taken: &mut Vec<String>) -> String {
        loop {
            let n = if rng.gen_bool(0.5) {
                NAMES.choose(rng).unwrap().to_string()
            } else {
                let len = rng.gen_range(1..8);
                let mut s: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
                if rng.gen_bool(0.2) {
                    s.push_str(&rng.gen_range(0..100).to_string());
                }
                s
            };
            if !taken.contains(&n) {
                taken.push(n.clone());
                return n;
            }
        }
    }

    fn value(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
        match rng.gen_range(0..4) {
            0 => rng.gen_range(lo..=hi).round(),
            1 => (rng.gen_range(lo..=hi) * 100.0).round() / 100.0,
            _ => rng.gen_range(lo..=hi),
        }
        .clamp(lo, hi)
    }

    pub fn variable(rng: &mut StdRng, var_name: String, grid: usize) -> LinguisticVariable {
        let lo = value(rng, -1000.0, 1000.0);
        let hi = lo + rng.gen_range(0.5..500.0);
        let universe = Universe::with_grid(lo, hi, grid).unwrap();
        let mut labels = Vec::new();
        let terms = (0..rng.gen_range(1..5))
            .map(|_| {
                let mut xs: Vec<f64> = Vec::new();
                while xs.len() < 2 {
                    let n = rng.gen_range(2..6);
                    xs = (0..n).map(|_| value(rng, lo, hi)).collect();
                    xs.sort_by(f64::total_cmp);
                    xs.dedup();
                }
                let pts = xs.into_iter().map(|x| (x, value(rng, 0.0, 1.0))).collect();
                let mf = PiecewiseLinearMF::new(pts).unwrap();
                FuzzySet::new(name(rng, &mut labels), universe, mf).unwrap()
            })
            .collect();
        LinguisticVariable::new(var_name, universe, terms).unwrap()
    }

    /// A valid rule base with random variables, terms, rules and config.
    pub fn rulebase(rng: &mut StdRng) -> RuleBase {
        let config = InferenceConfig {
            and_norm: *[TNorm::Min, TNorm::Product].choose(rng).unwrap(),
            implication: *[Implication::Clip, Implication::Scale].choose(rng).unwrap(),
            defuzzifier: *[Defuzzifier::Centroid, Defuzzifier::MeanOfMax].choose(rng).unwrap(),
            grid_points: *[1001, 1001, 2, 101, 2001].choose(rng).unwrap(),
            ..InferenceConfig::default()
        };
        let mut names = Vec::new();
        let inputs: Vec<_> = (0..rng.gen_range(1..5))
            .map(|_| {
                let n = name(rng, &mut names);
                variable(rng, n, config.grid_points)
            })
            .collect();
        let out_name = name(rng, &mut names);
        let output = variable(rng, out_name, config.grid_points);
        let rules = (0..rng.gen_range(1..12))
            .map(|_| {
                let mut vars: Vec<&LinguisticVariable> = inputs.iter().collect();
                vars.shuffle(rng);
                let k = rng.gen_range(1..=vars.len());
                let antecedent = vars[..k]
                    .iter()
                    .map(|v| (v.name().to_string(), v.terms().choose(rng).unwrap().label().to_string()))
                    .collect();
                let consequent =
                    (output.name().to_string(), output.terms().choose(rng).unwrap().label().to_string());
                Rule::new(antecedent, consequent).unwrap()
            })
            .collect();
        RuleBase::new(inputs, output, rules, config).unwrap()
    }
}
