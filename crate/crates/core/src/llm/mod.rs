//! Prompt assembly, chat backends and response parsing for the three controller roles:
//! weight elicitation, initial suggestion and refinement mutation.

mod client;
mod parse;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::warn;

pub use client::{ChatClient, ChatRequest, HttpChatClient, ScriptedClient};
pub use parse::{decision_line, parse_architecture, parse_weights};

use crate::error::{Error, Result};
use crate::knowledge_base::ConfidenceTable;
use crate::properties::{Property, PropertyVector};
use crate::search_space::{describe_space, mutate_one, Architecture};
use crate::similarity::{PoolEntry, WeightVector};

pub const ANON_TOKEN: &str = "UNSEEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    WeightElicit,
    InitialSuggest,
    RefineMutate,
}

impl PromptRole {
    pub const ALL: [PromptRole; 3] = [PromptRole::WeightElicit, PromptRole::InitialSuggest, PromptRole::RefineMutate];

    pub fn stem(self) -> &'static str {
        match self {
            PromptRole::WeightElicit => "weight_elicit",
            PromptRole::InitialSuggest => "initial_suggest",
            PromptRole::RefineMutate => "refine_mutate",
        }
    }

    fn builtin(self) -> (&'static str, &'static str) {
        match self {
            PromptRole::WeightElicit => (
                include_str!("../../prompts/weight_elicit.system.txt"),
                include_str!("../../prompts/weight_elicit.user.txt"),
            ),
            PromptRole::InitialSuggest => (
                include_str!("../../prompts/initial_suggest.system.txt"),
                include_str!("../../prompts/initial_suggest.user.txt"),
            ),
            PromptRole::RefineMutate => (
                include_str!("../../prompts/refine_mutate.system.txt"),
                include_str!("../../prompts/refine_mutate.user.txt"),
            ),
        }
    }
}

/// System and user templates per role. Placeholders are `{NAME}`.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    texts: [(String, String); 3],
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self { texts: PromptRole::ALL.map(|r| (r.builtin().0.to_string(), r.builtin().1.to_string())) }
    }
}

impl PromptTemplates {
    /// Templates from `<dir>/<role>.system.txt` and `<dir>/<role>.user.txt`; missing files
    /// keep the built-in text.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut t = Self::default();
        for (i, role) in PromptRole::ALL.iter().enumerate() {
            for (j, kind) in ["system", "user"].iter().enumerate() {
                let p = dir.join(format!("{}.{kind}.txt", role.stem()));
                match std::fs::read_to_string(&p) {
                    Ok(s) if j == 0 => t.texts[i].0 = s,
                    Ok(s) => t.texts[i].1 = s,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(Error::io(p, e)),
                }
            }
        }
        Ok(t)
    }

    fn get(&self, role: PromptRole) -> &(String, String) {
        &self.texts[PromptRole::ALL.iter().position(|r| *r == role).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: PromptRole,
    pub system_text: String,
    pub user_text: String,
    pub token_estimate: usize,
}

/// Replaces excluded dataset names with [`ANON_TOKEN`], case-insensitively on word
/// boundaries.
#[derive(Debug, Clone, Default)]
pub struct Anonymizer {
    re: Option<Regex>,
}

impl Anonymizer {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        let mut names: Vec<&str> = names.iter().map(|s| s.as_ref()).filter(|s| !s.is_empty()).collect();
        if names.is_empty() {
            return Self { re: None };
        }
        names.sort_by_key(|s| std::cmp::Reverse(s.len()));
        let alt: Vec<String> = names.iter().map(|s| regex::escape(s)).collect();
        let re = Regex::new(&format!(r"(?i)(?:^|\b){}(?:\b|$)", format_args!("(?:{})", alt.join("|")))).unwrap();
        Self { re: Some(re) }
    }

    pub fn apply(&self, text: &str) -> String {
        match &self.re {
            Some(re) => re.replace_all(text, ANON_TOKEN).into_owned(),
            None => text.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub kind: LlmKind,
    pub endpoint: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub timeout_s: f64,
    pub api_key_env: String,
    pub seed: u64,
    pub prompts_dir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            kind: LlmKind::Stub,
            endpoint: None,
            model_id: "gpt-4".into(),
            temperature: 0.0,
            max_retries: 2,
            timeout_s: 120.0,
            api_key_env: "OPENAI_API_KEY".into(),
            seed: 0,
            prompts_dir: None,
        }
    }
}

impl LlmConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidInput("temperature must be >= 0".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::InvalidInput("timeout_s must be > 0".into()));
        }
        if self.kind == LlmKind::Http && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::InvalidInput("http backend needs an endpoint".into()));
        }
        Ok(())
    }
}

/// A controller answer plus how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome<T> {
    pub value: T,
    pub attempts: usize,
    pub fallback: bool,
    pub raw_response: Option<String>,
}

impl<T> LlmOutcome<T> {
    fn direct(value: T) -> Self {
        Self { value, attempts: 0, fallback: false, raw_response: None }
    }
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "undefined".into()
    } else {
        format!("{x:.6}")
    }
}

/// One line per property: `name (description): value`.
pub fn properties_text(pv: &PropertyVector, props: &[Property]) -> String {
    props
        .iter()
        .map(|p| format!("- {} ({}): {}", p.name(), p.describe(), fmt_value(pv.get(*p))))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn selected_text(conf: &ConfidenceTable) -> String {
    conf.selected
        .iter()
        .map(|p| format!("- {} [{:.3}]: {}", p.name(), conf.averaged(*p), p.describe()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn sources_text(sources: &[&PropertyVector], props: &[Property]) -> String {
    sources
        .iter()
        .map(|s| {
            let vals: Vec<String> = props.iter().map(|p| format!("{}={}", p.name(), fmt_value(s.get(*p)))).collect();
            format!("- {}: {}", s.dataset, vals.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn arch_line(a: &Architecture) -> String {
    format!("{} (key {a})", decision_line(a))
}

pub fn pool_text(entry: &PoolEntry) -> String {
    entry
        .top_models
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{}. {} valid_perf {:.4}", i + 1, arch_line(&m.arch), m.valid_perf))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn trajectory_text(traj: &[(Architecture, f64)]) -> String {
    if traj.is_empty() {
        return "(nothing evaluated yet)".into();
    }
    traj.iter()
        .enumerate()
        .map(|(i, (a, p))| format!("step {}: {} valid_perf {:.4}", i + 1, arch_line(a), p))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

struct CallLog {
    file: Mutex<File>,
    secret: Option<String>,
}

impl CallLog {
    fn write(&self, entry: serde_json::Value) {
        let mut line = entry.to_string();
        if let Some(k) = self.secret.as_deref().filter(|k| !k.is_empty()) {
            line = line.replace(k, "[REDACTED]");
        }
        let mut f = self.file.lock().unwrap();
        if let Err(e) = writeln!(f, "{line}") {
            warn!(error = %e, "could not write LLM log");
        }
    }
}

enum Backend {
    Stub,
    Client(Box<dyn ChatClient>),
}

/// The controller: a stub or a chat client behind prompt templates and parsers.
pub struct LlmBridge {
    cfg: LlmConfig,
    backend: Backend,
    templates: PromptTemplates,
    anonymizer: Anonymizer,
    log: Option<CallLog>,
    secret: Option<String>,
}

impl LlmBridge {
    /// Builds the backend named by `cfg`. `excluded` names never appear in prompts.
    pub fn new(cfg: LlmConfig, excluded: &[String]) -> Result<Self> {
        cfg.check()?;
        let templates = match &cfg.prompts_dir {
            Some(d) => PromptTemplates::from_dir(d)?,
            None => PromptTemplates::default(),
        };
        let (backend, secret) = match cfg.kind {
            LlmKind::Stub => (Backend::Stub, None),
            LlmKind::Http => {
                let key = std::env::var(&cfg.api_key_env).ok();
                if key.is_none() {
                    warn!(var = cfg.api_key_env, "API key variable not set; sending requests without one");
                }
                let c = HttpChatClient::new(
                    cfg.endpoint.as_deref().unwrap_or_default(),
                    key.clone(),
                    Duration::from_secs_f64(cfg.timeout_s),
                );
                (Backend::Client(Box::new(c)), key)
            }
        };
        Ok(Self { cfg, backend, templates, anonymizer: Anonymizer::new(excluded), log: None, secret })
    }

    pub fn with_client(cfg: LlmConfig, client: Box<dyn ChatClient>, excluded: &[String]) -> Result<Self> {
        let mut b = Self::new(LlmConfig { kind: LlmKind::Stub, ..cfg.clone() }, excluded)?;
        b.cfg = cfg;
        b.backend = Backend::Client(client);
        Ok(b)
    }

    /// Appends every request and response to `path` as JSON lines.
    pub fn with_log(mut self, path: &Path) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        self.log = Some(CallLog { file: Mutex::new(f), secret: self.secret.clone() });
        Ok(self)
    }

    pub fn is_stub(&self) -> bool {
        matches!(self.backend, Backend::Stub)
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    pub fn bundle(&self, role: PromptRole, vars: &[(&str, &str)]) -> PromptBundle {
        let (sys, user) = self.templates.get(role);
        let system_text = self.anonymizer.apply(&render(sys, vars));
        let user_text = self.anonymizer.apply(&render(user, vars));
        let token_estimate = (system_text.len() + user_text.len()).div_ceil(4);
        PromptBundle { role, system_text, user_text, token_estimate }
    }

    pub fn weight_prompt(&self, unseen: &PropertyVector, sources: &[&PropertyVector], conf: &ConfidenceTable) -> PromptBundle {
        let u = properties_text(unseen, &conf.selected);
        let s = sources_text(sources, &conf.selected);
        let sel = selected_text(conf);
        self.bundle(
            PromptRole::WeightElicit,
            &[("UNSEEN_PROPERTIES", &u), ("SOURCE_PROPERTIES", &s), ("SELECTED_PROPERTIES", &sel), ("SEARCH_SPACE", &describe_space())],
        )
    }

    pub fn initial_prompt(&self, entry: &PoolEntry, unseen: &PropertyVector, conf: &ConfidenceTable) -> PromptBundle {
        let u = properties_text(unseen, &conf.selected);
        let pool = pool_text(entry);
        self.bundle(
            PromptRole::InitialSuggest,
            &[
                ("UNSEEN_PROPERTIES", &u),
                ("POOL_MODELS", &pool),
                ("SEARCH_SPACE", &describe_space()),
                ("SELECTED_PROPERTIES", &selected_text(conf)),
            ],
        )
    }

    pub fn refine_prompt(
        &self,
        candidate: &Architecture,
        trajectory: &[(Architecture, f64)],
        k1: &PoolEntry,
        unseen: &PropertyVector,
        conf: &ConfidenceTable,
    ) -> PromptBundle {
        let u = properties_text(unseen, &conf.selected);
        self.bundle(
            PromptRole::RefineMutate,
            &[
                ("UNSEEN_PROPERTIES", &u),
                ("POOL_MODELS", &pool_text(k1)),
                ("SEARCH_SPACE", &describe_space()),
                ("TRAJECTORY", &trajectory_text(trajectory)),
                ("CANDIDATE", &arch_line(candidate)),
                ("SELECTED_PROPERTIES", &selected_text(conf)),
            ],
        )
    }

    /// Sends `bundle` up to `1 + max_retries` times until `parse` accepts a response.
    fn ask<T>(
        &self,
        client: &dyn ChatClient,
        bundle: &PromptBundle,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> (Option<(T, String)>, usize) {
        let mut user = bundle.user_text.clone();
        let tries = 1 + self.cfg.max_retries;
        for attempt in 1..=tries {
            let req = ChatRequest {
                model: self.cfg.model_id.clone(),
                temperature: self.cfg.temperature,
                system: bundle.system_text.clone(),
                user: user.clone(),
            };
            let res = client.chat(&req);
            if let Some(log) = &self.log {
                let outcome = match &res {
                    Ok(s) => json!({"response": s}),
                    Err(e) => json!({"error": e.to_string()}),
                };
                log.write(json!({"role": bundle.role, "attempt": attempt, "request": req.body(), "outcome": outcome}));
            }
            match res {
                Ok(text) => match parse(&text) {
                    Ok(v) => return (Some((v, text)), attempt),
                    Err(why) => {
                        warn!(role = bundle.role.stem(), attempt, reason = why, "unusable LLM response");
                        user = format!(
                            "{}\n\nYour previous answer could not be used: {why}. Answer again in the required format.",
                            bundle.user_text
                        );
                    }
                },
                Err(e) => warn!(role = bundle.role.stem(), attempt, error = %e, "LLM call failed"),
            }
        }
        (None, tries)
    }

    /// Per-property importance for the unseen graph. Uniform on the stub or on failure.
    pub fn elicit_weights(
        &self,
        unseen: &PropertyVector,
        sources: &[&PropertyVector],
        conf: &ConfidenceTable,
    ) -> LlmOutcome<WeightVector> {
        let Backend::Client(client) = &self.backend else {
            return LlmOutcome::direct(WeightVector::uniform(conf));
        };
        let bundle = self.weight_prompt(unseen, sources, conf);
        let parse = |text: &str| {
            let w = parse_weights(text);
            let missing: Vec<&str> = conf.selected.iter().filter(|p| !w.contains_key(p)).map(|p| p.name()).collect();
            if !missing.is_empty() {
                return Err(format!("missing weights for {}", missing.join(", ")));
            }
            for (p, v) in &w {
                if conf.selected.contains(p) && !(0.0..=1.0).contains(v) {
                    warn!(property = p.name(), weight = v, "weight outside [0, 1]; clamped");
                }
            }
            WeightVector::from_llm(conf, &w, text.to_string()).map_err(|e| e.to_string())
        };
        match self.ask(client.as_ref(), &bundle, parse) {
            (Some((w, raw)), attempts) => LlmOutcome { value: w, attempts, fallback: false, raw_response: Some(raw) },
            (None, attempts) => {
                warn!("weight elicitation failed; using uniform weights");
                LlmOutcome { value: WeightVector::uniform(conf), attempts, fallback: true, raw_response: None }
            }
        }
    }

    /// An architecture for the unseen graph adapted from one pool entry. The stub returns the
    /// entry's best model.
    pub fn suggest_initial(
        &self,
        entry: &PoolEntry,
        unseen: &PropertyVector,
        conf: &ConfidenceTable,
    ) -> Result<LlmOutcome<Architecture>> {
        let best = entry
            .top_models
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("pool entry {} has no models", entry.source)))?
            .arch;
        let Backend::Client(client) = &self.backend else {
            return Ok(LlmOutcome::direct(best));
        };
        let bundle = self.initial_prompt(entry, unseen, conf);
        Ok(match self.ask(client.as_ref(), &bundle, parse_architecture) {
            (Some((a, raw)), attempts) => LlmOutcome { value: a, attempts, fallback: false, raw_response: Some(raw) },
            (None, attempts) => {
                warn!(source = entry.source, "initial suggestion failed; using the source's best model");
                LlmOutcome { value: best, attempts, fallback: true, raw_response: None }
            }
        })
    }

    /// A mutation of `candidate` not yet in `trajectory`, if one is found. Otherwise the
    /// candidate comes back unchanged with `fallback` set.
    pub fn refine_mutate(
        &self,
        candidate: &Architecture,
        trajectory: &[(Architecture, f64)],
        k1: &PoolEntry,
        unseen: &PropertyVector,
        conf: &ConfidenceTable,
    ) -> LlmOutcome<Architecture> {
        let seen = |a: &Architecture| trajectory.iter().any(|(t, _)| t == a);
        let Backend::Client(client) = &self.backend else {
            let t = trajectory.len() as u64;
            for attempt in 0..=self.cfg.max_retries as u64 {
                let m = mutate_one(candidate, stub_seed(self.cfg.seed, t, attempt));
                if !seen(&m) {
                    return LlmOutcome { value: m, attempts: attempt as usize + 1, fallback: false, raw_response: None };
                }
            }
            return LlmOutcome { value: *candidate, attempts: self.cfg.max_retries + 1, fallback: true, raw_response: None };
        };
        let bundle = self.refine_prompt(candidate, trajectory, k1, unseen, conf);
        let parse = |text: &str| {
            let a = parse_architecture(text)?;
            if seen(&a) {
                return Err(format!("{a} was already evaluated"));
            }
            Ok(a)
        };
        match self.ask(client.as_ref(), &bundle, parse) {
            (Some((a, raw)), attempts) => LlmOutcome { value: a, attempts, fallback: false, raw_response: Some(raw) },
            (None, attempts) => {
                warn!(candidate = %candidate, "refinement failed; keeping the candidate");
                LlmOutcome { value: *candidate, attempts, fallback: true, raw_response: None }
            }
        }
    }
}

fn stub_seed(seed: u64, t: u64, attempt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (t << 16) ^ attempt
}
