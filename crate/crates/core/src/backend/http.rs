//! Blocking HTTP client for the model server.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

use super::wire::*;
use super::{ConvertBackend, DecontextBackend, NliBackend, QaBackend};

#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    client: reqwest::blocking::Client,
    max_attempts: usize,
}

impl HttpBackend {
    pub fn new(base_url: &str) -> Result<Self> {
        Self::with_timeout(base_url, Duration::from_secs(120))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::backend(base_url, e.to_string(), false))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            max_attempts: 3,
        })
    }

    pub fn max_attempts(mut self, n: usize) -> Self {
        self.max_attempts = n.max(1);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn id(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn post_once<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base_url);
        let resp = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| Error::backend(self.id(), e.to_string(), true))?;
        let status = resp.status();
        if !status.is_success() {
            let retriable = status.is_server_error() || status.as_u16() == 429;
            let body = resp.text().unwrap_or_default();
            return Err(Error::backend(
                self.id(),
                format!("{url} returned {status}: {body}"),
                retriable,
            ));
        }
        resp.json::<T>()
            .map_err(|e| Error::backend(self.id(), format!("bad response from {url}: {e}"), false))
    }

    /// POSTs with up to `max_attempts` tries on retriable failures.
    pub fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let mut attempt = 1;
        loop {
            match self.post_once(path, body) {
                Err(e) if e.is_retriable() && attempt < self.max_attempts => {
                    log::warn!("retrying {path} after attempt {attempt}: {e}");
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_batch<B: Serialize, T: DeserializeOwned>(&self, task: Task, reqs: &[B]) -> Result<Vec<T>> {
        if reqs.is_empty() {
            return Ok(Vec::new());
        }
        let resp: BatchResponse<T> = self.post(&task.batch_path(), &serde_json::json!({ "batch": reqs }))?;
        if resp.results.len() != reqs.len() {
            return Err(Error::backend(
                self.id(),
                format!(
                    "batch returned {} results for {} requests",
                    resp.results.len(),
                    reqs.len()
                ),
                false,
            ));
        }
        Ok(resp.results)
    }

    pub fn manifest(&self) -> Result<Vec<BackendManifest>> {
        let url = format!("{}/v1/manifest", self.base_url);
        let resp = self
            .client
            .get(&url)
            .send()
            .map_err(|e| Error::backend(self.id(), e.to_string(), true))?;
        if !resp.status().is_success() {
            return Err(Error::backend(
                self.id(),
                format!("{url} returned {}", resp.status()),
                resp.status().is_server_error(),
            ));
        }
        resp.json()
            .map_err(|e| Error::backend(self.id(), e.to_string(), false))
    }
}

impl QaBackend for HttpBackend {
    fn backend_id(&self) -> String {
        self.id()
    }
    fn answer(&self, req: &QaRequest) -> Result<QaResponse> {
        self.post(Task::Qa.path(), req)
    }
    fn answer_batch(&self, reqs: &[QaRequest]) -> Result<Vec<QaResponse>> {
        self.post_batch(Task::Qa, reqs)
    }
}

impl ConvertBackend for HttpBackend {
    fn backend_id(&self) -> String {
        self.id()
    }
    fn convert(&self, req: &ConvertRequest) -> Result<ConvertResponse> {
        self.post(Task::Convert.path(), req)
    }
    fn convert_batch(&self, reqs: &[ConvertRequest]) -> Result<Vec<ConvertResponse>> {
        self.post_batch(Task::Convert, reqs)
    }
}

impl DecontextBackend for HttpBackend {
    fn backend_id(&self) -> String {
        self.id()
    }
    fn decontext(&self, req: &DecontextRequest) -> Result<DecontextResponse> {
        self.post(Task::Decontext.path(), req)
    }
    fn decontext_batch(&self, reqs: &[DecontextRequest]) -> Result<Vec<DecontextResponse>> {
        self.post_batch(Task::Decontext, reqs)
    }
}

impl NliBackend for HttpBackend {
    fn backend_id(&self) -> String {
        self.id()
    }
    fn nli(&self, req: &NliRequest) -> Result<NliResponse> {
        self.post(Task::Nli.path(), req)
    }
    fn nli_batch(&self, reqs: &[NliRequest]) -> Result<Vec<NliResponse>> {
        self.post_batch(Task::Nli, reqs)
    }
}
