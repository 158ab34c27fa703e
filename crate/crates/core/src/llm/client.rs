use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub system: String,
    pub user: String,
}

impl ChatRequest {
    pub fn body(&self) -> Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
        })
    }
}

/// A chat-completion backend. Errors are transport or service failures.
pub trait ChatClient: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<String>;
}

/// OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { endpoint: endpoint.to_string(), api_key, agent }
    }
}

impl ChatClient for HttpChatClient {
    fn chat(&self, req: &ChatRequest) -> Result<String> {
        let mut r = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            r = r.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = r.send_json(req.body()).map_err(|e| Error::Backend(e.to_string()))?;
        let v: Value = resp.body_mut().read_json().map_err(|e| Error::Backend(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Backend(format!("response lacks choices[0].message.content: {v}")))
    }
}

/// Replays canned responses in order and records every request.
#[derive(Default)]
pub struct ScriptedClient {
    responses: Mutex<VecDeque<Result<String, String>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedClient {
    pub fn new(responses: impl IntoIterator<Item = Result<String, String>>) -> Self {
        Self { responses: Mutex::new(responses.into_iter().collect()), requests: Mutex::default() }
    }

    pub fn ok(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self::new(responses.into_iter().map(|s| Ok(s.into())))
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().unwrap().len()
    }
}

impl ChatClient for ScriptedClient {
    fn chat(&self, req: &ChatRequest) -> Result<String> {
        self.requests.lock().unwrap().push(req.clone());
        match self.responses.lock().unwrap().pop_front() {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(Error::Backend(e)),
            None => Err(Error::Backend("scripted responses exhausted".into())),
        }
    }
}

impl<T: ChatClient + ?Sized> ChatClient for std::sync::Arc<T> {
    fn chat(&self, req: &ChatRequest) -> Result<String> {
        (**self).chat(req)
    }
}
