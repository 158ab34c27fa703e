//! Performance oracles: recorded-benchmark lookup and an external trainer spoken to over
//! line-delimited JSON (subprocess stdio or HTTP POST).

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::info;

use crate::error::{Error, Result};
use crate::knowledge_base::BenchmarkTable;
use crate::search_space::Architecture;

/// Training hyperparameters sent to an external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub pre_process: u32,
    pub post_process: u32,
    pub dimension: u32,
    pub dropout: f64,
    pub optimizer: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: u32,
}

impl Hyperparams {
    fn row(pre: u32, post: u32, dim: u32, dropout: f64, opt: &str, lr: f64, wd: f64, epochs: u32) -> Self {
        Self {
            pre_process: pre,
            post_process: post,
            dimension: dim,
            dropout,
            optimizer: opt.into(),
            learning_rate: lr,
            weight_decay: wd,
            epochs,
        }
    }

    /// Published per-dataset settings for the standard benchmarks, matched case-insensitively.
    pub fn known(dataset: &str) -> Option<Self> {
        let h = Self::row;
        Some(match dataset.to_ascii_lowercase().as_str() {
            "cora" => h(0, 1, 256, 0.7, "SGD", 0.1, 0.0005, 400),
            "citeseer" => h(0, 1, 256, 0.7, "SGD", 0.2, 0.0005, 400),
            "pubmed" => h(0, 0, 128, 0.3, "SGD", 0.2, 0.0005, 500),
            "cs" => h(1, 0, 128, 0.6, "SGD", 0.5, 0.0005, 400),
            "physics" => h(1, 1, 256, 0.4, "SGD", 0.01, 0.0, 200),
            "photo" => h(1, 0, 128, 0.7, "Adam", 0.0002, 0.0005, 500),
            "computers" => h(1, 1, 64, 0.1, "Adam", 0.005, 0.0005, 500),
            "ogbn-arxiv" | "arxiv" => h(0, 1, 128, 0.2, "Adam", 0.002, 0.0, 500),
            "ogbn-proteins" | "proteins" => h(1, 1, 256, 0.0, "Adam", 0.01, 0.0005, 500),
            "dblp" => h(1, 1, 256, 0.5, "SGD", 0.1, 0.0005, 300),
            "flickr" => h(1, 1, 128, 0.5, "Adam", 0.001, 0.0005, 300),
            "actor" => h(1, 1, 128, 0.5, "Adam", 0.005, 0.0005, 400),
            _ => return None,
        })
    }

    /// `given` if present, else the known setting for `dataset`, else none.
    pub fn resolve(dataset: &str, given: Option<&Hyperparams>) -> Option<Self> {
        given.cloned().or_else(|| Self::known(dataset))
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("hyperparameter {m}")));
        if self.pre_process > 3 || self.post_process > 3 {
            return bad("pre_process/post_process must be in 0..=3");
        }
        if self.dimension == 0 {
            return bad("dimension must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !matches!(self.optimizer.to_ascii_lowercase().as_str(), "sgd" | "adam") {
            return bad("optimizer must be SGD or Adam");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be >= 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub dataset: String,
    pub dataset_path: Option<PathBuf>,
    pub arch: Architecture,
    pub seed: u64,
    pub hyperparams: Option<Hyperparams>,
}

impl EvalRequest {
    pub fn new(dataset: &str, arch: Architecture, seed: u64) -> Self {
        Self { dataset: dataset.into(), dataset_path: None, arch, seed, hyperparams: None }
    }

    /// The wire request body.
    pub fn to_wire(&self, id: &str) -> Value {
        let path = match &self.dataset_path {
            Some(p) => p.display().to_string(),
            None => self.dataset.clone(),
        };
        json!({
            "id": id,
            "dataset_path": path,
            "macro": self.arch.macro_pattern(),
            "ops": self.arch.ops().map(|o| o.tag()),
            "seed": self.seed,
            "hyperparams": self.hyperparams.as_ref().map(|h| serde_json::to_value(h).unwrap()).unwrap_or(json!({})),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSource {
    Lookup,
    Trainer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub valid_perf: f64,
    pub test_perf: Option<f64>,
    pub duration_s: f64,
    pub source: EvalSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_path: Option<PathBuf>,
}

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult>;

    /// Evaluations issued so far, including failed ones.
    fn eval_count(&self) -> usize;
}

/// Reads recorded performance. Lookups on guarded (held-out) datasets are refused unless
/// simulation mode is on, and are logged when it is.
pub struct LookupEvaluator {
    table: Arc<BenchmarkTable>,
    guarded: BTreeSet<String>,
    simulate: bool,
    count: AtomicUsize,
    guarded_log: Mutex<Vec<String>>,
}

impl LookupEvaluator {
    pub fn new(table: Arc<BenchmarkTable>) -> Self {
        Self { table, guarded: BTreeSet::new(), simulate: false, count: AtomicUsize::new(0), guarded_log: Mutex::default() }
    }

    pub fn guard(mut self, dataset: &str, simulate: bool) -> Self {
        self.guarded.insert(dataset.to_string());
        self.simulate = simulate;
        self
    }

    /// ArchKeys looked up on guarded datasets, in call order.
    pub fn guarded_accesses(&self) -> Vec<String> {
        self.guarded_log.lock().unwrap().clone()
    }
}

impl Evaluator for LookupEvaluator {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult> {
        self.count.fetch_add(1, Ordering::SeqCst);
        if self.guarded.contains(&req.dataset) {
            if !self.simulate {
                return Err(Error::Leakage(req.dataset.clone()));
            }
            info!(dataset = req.dataset, arch = %req.arch, "simulation lookup on held-out dataset");
            self.guarded_log.lock().unwrap().push(req.arch.to_string());
        }
        let r = self.table.record(&req.dataset, &req.arch)?;
        Ok(EvalResult { valid_perf: r.valid_perf, test_perf: Some(r.test_perf), duration_s: 0.0, source: EvalSource::Lookup, artifact_path: None })
    }

    fn eval_count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainerConfig {
    /// A long-running subprocess reading requests on stdin.
    Process { command: Vec<String> },
    Http { url: String },
}

/// Validates a wire response against the request id.
pub fn parse_response(line: &str, id: &str) -> Result<EvalResult> {
    let v: Value = serde_json::from_str(line).map_err(|e| Error::Protocol(format!("response is not JSON ({e}): {line}")))?;
    let got = v.get("id").ok_or_else(|| Error::Protocol(format!("response lacks id: {line}")))?;
    let got = match got {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if got != id {
        return Err(Error::Protocol(format!("response id {got} does not match request id {id}")));
    }
    if let Some(e) = v.get("error") {
        let msg = e.as_str().map(str::to_string).unwrap_or_else(|| e.to_string());
        return Err(Error::Trainer(msg));
    }
    let perf = |k: &str, required: bool| -> Result<Option<f64>> {
        match v.get(k) {
            None | Some(Value::Null) if !required => Ok(None),
            None | Some(Value::Null) => Err(Error::Protocol(format!("response lacks {k}"))),
            Some(x) => {
                let f = x.as_f64().ok_or_else(|| Error::Protocol(format!("{k} is not a number: {x}")))?;
                if !f.is_finite() || !(0.0..=1.0).contains(&f) {
                    return Err(Error::Protocol(format!("{k} = {f} outside [0, 1]")));
                }
                Ok(Some(f))
            }
        }
    };
    let valid_perf = perf("valid_perf", true)?.unwrap();
    let test_perf = perf("test_perf", false)?;
    let duration_s = match v.get("duration_s") {
        None | Some(Value::Null) => 0.0,
        Some(x) => match x.as_f64() {
            Some(d) if d.is_finite() && d >= 0.0 => d,
            _ => return Err(Error::Protocol(format!("duration_s invalid: {x}"))),
        },
    };
    let artifact_path = v.get("artifact_path").and_then(Value::as_str).map(PathBuf::from);
    Ok(EvalResult { valid_perf, test_perf, duration_s, source: EvalSource::Trainer, artifact_path })
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
}

impl Worker {
    fn spawn(command: &[String]) -> Result<Self> {
        let (prog, args) = command.split_first().ok_or_else(|| Error::InvalidInput("empty trainer command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Trainer(format!("cannot start {prog}: {e}")))?;
        let stdin = child.stdin.take().unwrap();
        let stdout = child.stdout.take().unwrap();
        let mut err_pipe = child.stderr.take().unwrap();
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = stderr.clone();
        std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > 64 * 1024 {
                    let cut = s.len() - 32 * 1024;
                    let cut = (cut..s.len()).find(|i| s.is_char_boundary(*i)).unwrap_or(s.len());
                    s.drain(..cut);
                }
            }
        });
        Ok(Self { child, stdin, lines, stderr })
    }

    fn diagnostics(&mut self) -> String {
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!("exited with {s}"),
            _ => "still running".into(),
        };
        let err = self.stderr.lock().unwrap().trim().to_string();
        if err.is_empty() {
            status
        } else {
            format!("{status}; stderr: {err}")
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Delegates evaluation to a trainer over the wire protocol. One request is in flight at a
/// time.
pub struct ExternalEvaluator {
    config: TrainerConfig,
    timeout: Duration,
    worker: Mutex<Option<Worker>>,
    count: AtomicUsize,
}

impl ExternalEvaluator {
    pub fn new(config: TrainerConfig, timeout: Duration) -> Self {
        Self { config, timeout, worker: Mutex::new(None), count: AtomicUsize::new(0) }
    }

    fn exchange_process(&self, command: &[String], body: &Value, id: &str) -> Result<EvalResult> {
        let mut slot = self.worker.lock().unwrap();
        if slot.is_none() {
            *slot = Some(Worker::spawn(command)?);
        }
        let w = slot.as_mut().unwrap();
        let sent = writeln!(w.stdin, "{body}").and_then(|_| w.stdin.flush());
        if let Err(e) = sent {
            std::thread::sleep(Duration::from_millis(50));
            let d = w.diagnostics();
            *slot = None;
            return Err(Error::Trainer(format!("cannot write request ({e}); {d}")));
        }
        match w.lines.recv_timeout(self.timeout) {
            Ok(line) => parse_response(&line, id),
            Err(RecvTimeoutError::Timeout) => {
                let d = w.diagnostics();
                *slot = None;
                Err(Error::Trainer(format!("no response within {:?}; {d}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let _ = w.child.wait();
                std::thread::sleep(Duration::from_millis(50));
                let d = w.diagnostics();
                *slot = None;
                Err(Error::Trainer(format!("trainer closed its output; {d}")))
            }
        }
    }

    fn exchange_http(&self, url: &str, body: &Value, id: &str) -> Result<EvalResult> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut resp = agent.post(url).send_json(body).map_err(|e| Error::Trainer(format!("{url}: {e}")))?;
        let text = resp.body_mut().read_to_string().map_err(|e| Error::Trainer(format!("{url}: {e}")))?;
        parse_response(text.trim(), id)
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult> {
        if let Some(h) = &req.hyperparams {
            h.check()?;
        }
        let n = self.count.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("req-{n}");
        let body = req.to_wire(&id);
        let start = Instant::now();
        let mut r = match &self.config {
            TrainerConfig::Process { command } => self.exchange_process(command, &body, &id),
            TrainerConfig::Http { url } => self.exchange_http(url, &body, &id),
        }?;
        if r.duration_s == 0.0 {
            r.duration_s = start.elapsed().as_secs_f64();
        }
        Ok(r)
    }

    fn eval_count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }
}
