//! Chat-completions and embeddings over HTTP.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::json;

use super::{Embedder, Generator, GeneratorError, GeneratorRequest, Template};

const TIMEOUT: Duration = Duration::from_secs(120);

fn build_client() -> Result<Client, GeneratorError> {
    Client::builder()
        .timeout(TIMEOUT)
        .build()
        .map_err(|e| GeneratorError::Transport(e.to_string()))
}

/// POSTs `body` and decodes the JSON reply, retrying once on connection
/// failures and 5xx responses.
fn post_json<T: for<'de> Deserialize<'de>>(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<T, GeneratorError> {
    let mut last_err = String::new();
    for _ in 0..2 {
        let mut req = client.post(url).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        match req.send() {
            Ok(resp) if resp.status().is_server_error() => {
                last_err = format!("{url}: HTTP {}", resp.status());
            }
            Ok(resp) if !resp.status().is_success() => {
                let status = resp.status();
                let text = resp.text().unwrap_or_default();
                return Err(GeneratorError::Transport(format!("{url}: HTTP {status}: {text}")));
            }
            Ok(resp) => {
                return resp
                    .json::<T>()
                    .map_err(|e| GeneratorError::Transport(format!("{url}: bad response body: {e}")));
            }
            Err(e) => last_err = format!("{url}: {e}"),
        }
    }
    Err(GeneratorError::Transport(last_err))
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

/// Client for an OpenAI-compatible `chat/completions` endpoint. The
/// decomposer model serves `decompose`; everything else goes to the answer model.
pub struct HttpGenerator {
    client: Client,
    endpoint: String,
    decomposer_model: String,
    answer_model: String,
    api_key: Option<String>,
}

impl HttpGenerator {
    pub fn new(
        endpoint: impl Into<String>,
        decomposer_model: impl Into<String>,
        answer_model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, GeneratorError> {
        Ok(Self {
            client: build_client()?,
            endpoint: endpoint.into(),
            decomposer_model: decomposer_model.into(),
            answer_model: answer_model.into(),
            api_key,
        })
    }

    fn model_for(&self, template: Template) -> &str {
        match template {
            Template::Decompose => &self.decomposer_model,
            _ => &self.answer_model,
        }
    }
}

impl Generator for HttpGenerator {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        let body = json!({
            "model": self.model_for(request.template()),
            "messages": [{"role": "user", "content": request.filled_prompt}],
            "temperature": request.temperature,
        });
        let resp: ChatResponse = post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body)?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GeneratorError::Transport("response has no message content".into()))
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Client for an OpenAI-compatible `embeddings` endpoint.
pub struct HttpEmbedder {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, GeneratorError> {
        Ok(Self {
            client: build_client()?,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GeneratorError> {
        let body = json!({"model": self.model, "input": text});
        let resp: EmbeddingResponse = post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body)?;
        resp.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| GeneratorError::Transport("embedding response has no data".into()))
    }
}
