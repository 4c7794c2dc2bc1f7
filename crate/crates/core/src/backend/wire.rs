//! JSON wire contract shared with the model server.
//!
//! Every endpoint takes one request object via `POST /v1/<task>`, or a
//! `{"batch": [...]}` wrapper via `POST /v1/<task>/batch` whose `results`
//! keep request order. `GET /v1/manifest` lists [`BackendManifest`]s.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Qa,
    Convert,
    Decontext,
    Nli,
}

impl Task {
    pub fn path(&self) -> &'static str {
        match self {
            Task::Qa => "/v1/qa",
            Task::Convert => "/v1/convert",
            Task::Decontext => "/v1/decontext",
            Task::Nli => "/v1/nli",
        }
    }

    pub fn batch_path(&self) -> String {
        format!("{}/batch", self.path())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRequest {
    pub question: String,
    pub context: String,
    /// Mock hints: `gold`, `gold_start`, `gold_end`, and `mock_answer=wrong`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResponse {
    pub backend_id: String,
    pub model: String,
    pub version: String,
    pub span_text: String,
    pub char_start: i64,
    pub char_end: i64,
    pub p: f64,
    /// Top five span probabilities, descending, zero-padded to length 5.
    pub top5: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertRequest {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertResponse {
    pub backend_id: String,
    pub model: String,
    pub version: String,
    pub text: String,
}

/// Decontextualizer input: title, every context sentence, and which one to rewrite.
/// The served model sees these as `[CLS] title [S] preceding [S] target [S] following [S]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecontextRequest {
    pub title: String,
    pub sentences: Vec<String>,
    pub target_index: usize,
}

impl DecontextRequest {
    pub fn source_text(&self) -> String {
        let t = self.target_index.min(self.sentences.len());
        let before = self.sentences[..t].join(" ");
        let target = self.sentences.get(t).map(String::as_str).unwrap_or("");
        let after = self
            .sentences
            .get(t + 1..)
            .map(|s| s.join(" "))
            .unwrap_or_default();
        format!("[CLS] {} [S] {before} [S] {target} [S] {after} [S]", self.title)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecontextCategory {
    Done,
    Unnecessary,
    Infeasible,
    None,
}

impl fmt::Display for DecontextCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecontextCategory::Done => "done",
            DecontextCategory::Unnecessary => "unnecessary",
            DecontextCategory::Infeasible => "infeasible",
            DecontextCategory::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecontextResponse {
    pub backend_id: String,
    pub model: String,
    pub version: String,
    pub text: String,
    pub category: DecontextCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub backend_id: String,
    pub model: String,
    pub version: String,
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contradiction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest<T> {
    pub batch: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse<T> {
    pub results: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendManifest {
    pub backend_id: String,
    pub task: Task,
    pub checkpoint: String,
    #[serde(default)]
    pub decoding: BTreeMap<String, serde_json::Value>,
    pub max_input_length: usize,
}

/// Where a backend lives: the built-in mock or an HTTP server.
/// Text form is `mock` or `http:<url>`; a bare `http://` URL is also accepted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BackendSpec {
    Mock,
    Http(String),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mock") {
            return Ok(BackendSpec::Mock);
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(BackendSpec::Http(s.trim_end_matches('/').to_string()));
        }
        if let Some(rest) = s.strip_prefix("http:") {
            let url = if rest.starts_with("http://") || rest.starts_with("https://") {
                rest.to_string()
            } else {
                format!("http://{}", rest.trim_start_matches('/'))
            };
            return Ok(BackendSpec::Http(url.trim_end_matches('/').to_string()));
        }
        Err(Error::Config(format!(
            "backend must be `mock` or `http:<url>`, got `{s}`"
        )))
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Mock => f.write_str("mock"),
            BackendSpec::Http(url) => write!(f, "http:{url}"),
        }
    }
}

impl Serialize for BackendSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BackendSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
