//! Chat-completion access behind a content-addressed record/replay cache.
//!
//! Every request is canonicalized (sorted keys, prompt verbatim, shortest
//! round-trip floats) and hashed with SHA-256. Entries live on disk at
//! `<cache>/<first two hex chars>/<full hash>.json`. In replay mode a miss is
//! an error and no transport is ever touched.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const API_KEY_ENV: &str = "FACTCURVE_API_KEY";
pub const CACHE_DIR_ENV: &str = "FACTCURVE_CACHE_DIR";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("cache miss for key {key} (replay mode)")]
    CacheMiss { key: String },
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed provider payload: {0}")]
    MalformedPayload(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no provider configured; set {API_KEY_ENV} and an endpoint, or use replay mode")]
    NoProvider,
    #[error("cache I/O at {path}: {message}")]
    CacheIo { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelRequest {
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        ModelRequest {
            model_id: model_id.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Canonical serialization: keys in sorted order, compact, prompt bytes
    /// untouched, floats in shortest round-trip form.
    pub fn canonical_json(&self) -> String {
        // Field order of this struct is alphabetical, which serde preserves.
        #[derive(Serialize)]
        struct Canonical<'a> {
            max_tokens: u32,
            model_id: &'a str,
            prompt: &'a str,
            temperature: f64,
        }
        serde_json::to_string(&Canonical {
            max_tokens: self.max_tokens,
            model_id: &self.model_id,
            prompt: &self.prompt,
            // -0.0 and 0.0 compare equal and must share a key.
            temperature: self.temperature + 0.0,
        })
        .expect("canonical request serializes")
    }

    pub fn cache_key(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    #[serde(default)]
    pub cached: bool,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: ModelRequest,
    pub response: ModelResponse,
    pub created_at: String,
}

/// Failure reported by a transport. Only `Unreachable` and `RateLimited`
/// are retried.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    Unreachable(String),
    RateLimited,
    Malformed(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError>;
}

/// OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpTransport {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            agent,
        }
    }

    /// Reads the key from `FACTCURVE_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, GatewayError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(endpoint, key)),
            _ => Err(GatewayError::NoProvider),
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError> {
        let body = serde_json::json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let result = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(429)) => return Err(TransportError::RateLimited),
            Err(ureq::Error::StatusCode(code)) if code >= 500 => {
                return Err(TransportError::Unreachable(format!("HTTP {code}")))
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(TransportError::Malformed(format!("HTTP {code}")))
            }
            Err(e) => return Err(TransportError::Unreachable(e.to_string())),
        };
        let payload: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        parse_chat_payload(&payload)
    }
}

fn parse_chat_payload(payload: &serde_json::Value) -> Result<ModelResponse, TransportError> {
    let text = payload["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))?;
    let mut meta = BTreeMap::new();
    if let Some(model) = payload["model"].as_str() {
        meta.insert("model".to_string(), model.to_string());
    }
    if let Some(reason) = payload["choices"][0]["finish_reason"].as_str() {
        meta.insert("finish_reason".to_string(), reason.to_string());
    }
    Ok(ModelResponse {
        text: text.to_string(),
        cached: false,
        provider_meta: meta,
    })
}

/// On-disk cache; concurrent readers, exclusive writers.
#[derive(Debug)]
pub struct DiskCache {
    root: PathBuf,
    lock: RwLock<()>,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskCache {
            root: root.into(),
            lock: RwLock::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let path = self.path_for(key);
        let raw = match fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&raw).map_err(|e| GatewayError::CacheIo {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(Some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), GatewayError> {
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        let path = self.path_for(&entry.key);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut doc = serde_json::to_string_pretty(entry).expect("cache entry serializes");
        doc.push('\n');
        let tmp = path.with_extension("json.tmp");
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(doc.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        drop(file);
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> GatewayError {
    GatewayError::CacheIo {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// Serve hits from the cache, call the provider on a miss and persist.
    Record,
    /// Serve only from the cache.
    Replay,
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

pub struct Gateway {
    cache: DiskCache,
    transport: Option<Arc<dyn Transport>>,
    mode: CacheMode,
    retry: RetryPolicy,
    provider_calls: AtomicUsize,
}

impl Gateway {
    pub fn replay(cache_dir: impl Into<PathBuf>) -> Self {
        Gateway {
            cache: DiskCache::new(cache_dir),
            transport: None,
            mode: CacheMode::Replay,
            retry: RetryPolicy::default(),
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn record(cache_dir: impl Into<PathBuf>, transport: Arc<dyn Transport>) -> Self {
        Gateway {
            cache: DiskCache::new(cache_dir),
            transport: Some(transport),
            mode: CacheMode::Record,
            retry: RetryPolicy::default(),
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn cache(&self) -> &DiskCache {
        &self.cache
    }

    /// Number of transport invocations, retries included.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        req.validate()?;
        let key = req.cache_key();
        if let Some(entry) = self.cache.get(&key)? {
            let mut response = entry.response;
            response.cached = true;
            return Ok(response);
        }
        let transport = match (self.mode, &self.transport) {
            (CacheMode::Replay, _) => return Err(GatewayError::CacheMiss { key }),
            (CacheMode::Record, None) => return Err(GatewayError::NoProvider),
            (CacheMode::Record, Some(t)) => t,
        };
        let mut response = self.call_with_retry(transport.as_ref(), req)?;
        response.cached = false;
        let entry = CacheEntry {
            key,
            request: req.clone(),
            response: ModelResponse {
                cached: false,
                ..response.clone()
            },
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.cache.put(&entry)?;
        Ok(response)
    }

    fn call_with_retry(
        &self,
        transport: &dyn Transport,
        req: &ModelRequest,
    ) -> Result<ModelResponse, GatewayError> {
        let attempts = self.retry.attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut last = TransportError::Unreachable("no attempt made".into());
        for attempt in 1..=attempts {
            self.provider_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(req) {
                Ok(resp) => return Ok(resp),
                Err(TransportError::Malformed(m)) => return Err(GatewayError::MalformedPayload(m)),
                Err(e) => {
                    log::warn!("provider attempt {attempt}/{attempts} failed: {e:?}");
                    last = e;
                }
            }
            if attempt < attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(match last {
            TransportError::RateLimited => GatewayError::RateLimited { attempts },
            TransportError::Unreachable(m) => GatewayError::Unreachable(m),
            TransportError::Malformed(m) => GatewayError::MalformedPayload(m),
        })
    }

    /// Completes every request with at most `max_in_flight` outstanding at
    /// once. Results are positional; one failure does not cancel the rest.
    pub fn complete_many(
        &self,
        reqs: &[ModelRequest],
        max_in_flight: usize,
    ) -> Vec<Result<ModelResponse, GatewayError>> {
        let workers = max_in_flight.max(1).min(reqs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<ModelResponse, GatewayError>>>> =
            Mutex::new(vec![None; reqs.len()]);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= reqs.len() {
                        break;
                    }
                    let result = self.complete(&reqs[i]);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    fn no_backoff() -> RetryPolicy {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::ZERO,
        }
    }

    #[test]
    fn second_call_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let transport = Arc::new(ScriptedTransport::new(|r: &ModelRequest| Ok(format!("echo: {}", r.prompt))));
        let gw = Gateway::record(dir.path(), transport.clone()).with_retry(no_backoff());
        let req = ModelRequest::new("m", "hello");
        let first = gw.complete(&req).unwrap();
        let second = gw.complete(&req).unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(first.text, second.text);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn replay_miss_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let req = ModelRequest::new("m", "unseen");
        match gw.complete(&req) {
            Err(GatewayError::CacheMiss { key }) => assert_eq!(key, req.cache_key()),
            other => panic!("expected cache miss, got {other:?}"),
        }
        assert_eq!(gw.provider_calls(), 0);
    }

    #[test]
    fn cache_survives_copy_to_another_root() {
        let recorded = tempfile::tempdir().unwrap();
        let gw = scripted_gateway(recorded.path(), |_| Ok("Paris".to_string()));
        let req = ModelRequest::new("judge", "Capital of France?\n").with_temperature(0.0);
        let original = gw.complete(&req).unwrap();

        let elsewhere = tempfile::tempdir().unwrap();
        let key = req.cache_key();
        let src = recorded.path().join(&key[..2]).join(format!("{key}.json"));
        let raw = fs::read(&src).unwrap();
        assert!(!raw.contains(&b'\r'));
        fs::create_dir_all(elsewhere.path().join(&key[..2])).unwrap();
        fs::write(elsewhere.path().join(&key[..2]).join(format!("{key}.json")), &raw).unwrap();

        let replayed = Gateway::replay(elsewhere.path()).complete(&req).unwrap();
        assert_eq!(replayed.text, original.text);
        assert!(replayed.cached);
    }

    #[test]
    fn canonical_form_is_stable() {
        let req = ModelRequest::new("m", "a  b\n").with_temperature(0.7).with_max_tokens(64);
        assert_eq!(
            req.canonical_json(),
            r#"{"max_tokens":64,"model_id":"m","prompt":"a  b\n","temperature":0.7}"#
        );
    }

    #[test]
    fn invalid_requests_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        assert!(matches!(gw.complete(&ModelRequest::new("m", "")), Err(GatewayError::InvalidRequest(_))));
        let neg = ModelRequest::new("m", "x").with_temperature(-1.0);
        assert!(matches!(gw.complete(&neg), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn retries_transport_errors_then_gives_up() {
        let dir = tempfile::tempdir().unwrap();
        let gw = scripted_gateway(dir.path(), |_| Err(TransportError::RateLimited));
        let err = gw.complete(&ModelRequest::new("m", "x")).unwrap_err();
        assert_eq!(err, GatewayError::RateLimited { attempts: 3 });
        assert_eq!(gw.provider_calls(), 3);
    }

    #[test]
    fn malformed_payload_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let gw = scripted_gateway(dir.path(), |_| Err(TransportError::Malformed("bad".into())));
        assert!(matches!(gw.complete(&ModelRequest::new("m", "x")), Err(GatewayError::MalformedPayload(_))));
        assert_eq!(gw.provider_calls(), 1);
    }

    #[test]
    fn transient_failure_recovers() {
        let dir = tempfile::tempdir().unwrap();
        let attempts = AtomicUsize::new(0);
        let gw = scripted_gateway(dir.path(), move |_| {
            if attempts.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(TransportError::Unreachable("reset".into()))
            } else {
                Ok("ok".into())
            }
        });
        assert_eq!(gw.complete(&ModelRequest::new("m", "x")).unwrap().text, "ok");
        assert_eq!(gw.provider_calls(), 2);
    }

    #[test]
    fn complete_many_preserves_order_and_bounds_parallelism() {
        let dir = tempfile::tempdir().unwrap();
        let mut transport = ScriptedTransport::new(|r: &ModelRequest| Ok(r.prompt.to_uppercase()));
        transport.delay = Duration::from_millis(20);
        let transport = Arc::new(transport);
        let gw = Gateway::record(dir.path(), transport.clone()).with_retry(no_backoff());
        let reqs: Vec<_> = (0..5).map(|i| ModelRequest::new("m", format!("p{i}"))).collect();
        let out = gw.complete_many(&reqs, 2);
        let texts: Vec<_> = out.into_iter().map(|r| r.unwrap().text).collect();
        assert_eq!(texts, vec!["P0", "P1", "P2", "P3", "P4"]);
        assert!(transport.max_in_flight.load(Ordering::SeqCst) <= 2);

        let before = transport.calls.load(Ordering::SeqCst);
        let again = gw.complete_many(&reqs, 4);
        assert!(again.iter().all(|r| r.as_ref().unwrap().cached));
        assert_eq!(transport.calls.load(Ordering::SeqCst), before);
    }

    #[test]
    fn complete_many_reports_errors_positionally() {
        let dir = tempfile::tempdir().unwrap();
        let gw = scripted_gateway(dir.path(), |r| {
            if r.prompt == "p2" {
                Err(TransportError::Malformed("boom".into()))
            } else {
                Ok("fine".into())
            }
        });
        let reqs: Vec<_> = (0..5).map(|i| ModelRequest::new("m", format!("p{i}"))).collect();
        let out = gw.complete_many(&reqs, 3);
        assert_eq!(out.iter().filter(|r| r.is_ok()).count(), 4);
        assert!(out[2].is_err());
    }

    #[test]
    fn parses_chat_payload() {
        let payload = serde_json::json!({
            "model": "gpt-x",
            "choices": [{"message": {"role": "assistant", "content": "(A) True"}, "finish_reason": "stop"}]
        });
        let resp = parse_chat_payload(&payload).unwrap();
        assert_eq!(resp.text, "(A) True");
        assert_eq!(resp.provider_meta["finish_reason"], "stop");
        assert!(parse_chat_payload(&serde_json::json!({"choices": []})).is_err());
    }

    proptest! {
        #[test]
        fn distinct_requests_have_distinct_keys(
            a in ("[a-c]{1,3}", "[ -~\n]{1,12}", 0.0f64..2.0, 1u32..4),
            b in ("[a-c]{1,3}", "[ -~\n]{1,12}", 0.0f64..2.0, 1u32..4),
        ) {
            let ra = ModelRequest { model_id: a.0, prompt: a.1, temperature: a.2, max_tokens: a.3 };
            let rb = ModelRequest { model_id: b.0, prompt: b.1, temperature: b.2, max_tokens: b.3 };
            prop_assert_eq!(ra == rb, ra.cache_key() == rb.cache_key());
            prop_assert_eq!(ra.canonical_json() == rb.canonical_json(), ra.cache_key() == rb.cache_key());
        }

        #[test]
        fn complete_many_order_matches_for_any_width(n in 0usize..12, width in 1usize..6) {
            let dir = tempfile::tempdir().unwrap();
            let gw = scripted_gateway(dir.path(), |r| Ok(r.prompt.clone()));
            let reqs: Vec<_> = (0..n).map(|i| ModelRequest::new("m", format!("q{i}"))).collect();
            let out = gw.complete_many(&reqs, width);
            prop_assert_eq!(out.len(), n);
            for (i, r) in out.into_iter().enumerate() {
                prop_assert_eq!(r.unwrap().text, format!("q{i}"));
            }
            prop_assert_eq!(distinct(reqs.iter().map(|r| r.cache_key())), n);
        }
    }
}
