//! Blocking HTTP clients for chat-completion, translation and embedding
//! endpoints, sharing one transport with retry, rate limiting, an in-flight
//! bound and the optional response cache.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    check_embed_input, check_translate_input, ChatProvider, DimensionGuard, Embedder, EmbeddingVector,
    GenerationParams, ProviderError, ProviderRequest, RequestKind, ResponseCache, Translator,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, failed_attempt: usize) -> Duration {
        let factor = self.multiplier.powi(failed_attempt.saturating_sub(1) as i32);
        self.initial_backoff.mul_f64(factor)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    pub retry: RetryPolicy,
    /// Requests per second; `None` disables the limiter.
    pub rate_limit_per_sec: Option<f64>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    /// Environment variable holding a bearer token.
    pub api_key_env: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            retry: RetryPolicy::default(),
            rate_limit_per_sec: Some(1.0),
            max_in_flight: 4,
            timeout_secs: 60,
            api_key_env: Some("OPENAI_API_KEY".to_string()),
        }
    }
}

/// Token bucket with capacity of one second's worth of tokens (at least one).
#[derive(Debug)]
struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        TokenBucket {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.rate)
            };
            thread::sleep(wait);
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    active: Mutex<usize>,
    cv: Condvar,
}

struct GatePass<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Gate {
            limit: limit.max(1),
            active: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut active = self.active.lock().expect("gate poisoned");
        while *active >= self.limit {
            active = self.cv.wait(active).expect("gate poisoned");
        }
        *active += 1;
        GatePass(self)
    }
}

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().expect("gate poisoned") -= 1;
        self.0.cv.notify_one();
    }
}

/// Shared POST-JSON transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    limiter: Option<TokenBucket>,
    gate: Gate,
    api_key: Option<String>,
    cache: Option<Arc<ResponseCache>>,
    network_calls: AtomicUsize,
}

impl HttpTransport {
    pub fn new(config: &HttpConfig, cache: Option<Arc<ResponseCache>>) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        Ok(HttpTransport {
            client,
            retry: config.retry.clone(),
            limiter: config
                .rate_limit_per_sec
                .filter(|r| *r > 0.0)
                .map(TokenBucket::new),
            gate: Gate::new(config.max_in_flight),
            api_key,
            cache,
            network_calls: AtomicUsize::new(0),
        })
    }

    /// Number of HTTP requests actually sent (retries included).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_deref()
    }

    /// Sends `req`, consulting the cache first. Returns the response body.
    pub fn execute(&self, req: &ProviderRequest) -> Result<String, ProviderError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lookup(req)? {
                return Ok(hit);
            }
        }
        let body = self.send_with_retry(req)?;
        if let Some(cache) = &self.cache {
            cache.store(req, &body)?;
        }
        Ok(body)
    }

    fn send_with_retry(&self, req: &ProviderRequest) -> Result<String, ProviderError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.send_once(req);
            let retryable = match &outcome {
                Ok(_) => return outcome,
                Err(ProviderError::Transport { .. }) | Err(ProviderError::RateLimited { .. }) => true,
                Err(ProviderError::Status { status, .. }) => *status >= 500,
                Err(_) => false,
            };
            if !retryable || attempt >= max {
                return outcome.map_err(|e| match e {
                    ProviderError::Transport { message, .. } => ProviderError::Transport {
                        attempts: attempt,
                        message,
                    },
                    ProviderError::RateLimited { .. } => ProviderError::RateLimited { attempts: attempt },
                    other => other,
                });
            }
            let wait = self.retry.backoff(attempt);
            log::warn!(
                "{} request to {} failed (attempt {attempt}/{max}); retrying in {wait:?}",
                req.kind,
                req.endpoint
            );
            thread::sleep(wait);
        }
    }

    fn send_once(&self, req: &ProviderRequest) -> Result<String, ProviderError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let _pass = self.gate.enter();
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let mut builder = self
            .client
            .post(&req.endpoint)
            .header("content-type", "application/json")
            .body(req.payload.clone());
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited { attempts: 1 });
        }
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body,
            });
        }
        Ok(body)
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ProviderError> {
    serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))
}

/// Chat-completion client (`model`, `messages`, `temperature`, `top_p`,
/// `max_tokens` in; `choices[0].message.content` out).
pub struct HttpChat {
    endpoint: String,
    transport: HttpTransport,
}

impl HttpChat {
    pub fn new(endpoint: impl Into<String>, transport: HttpTransport) -> Self {
        HttpChat {
            endpoint: endpoint.into(),
            transport,
        }
    }

    pub fn transport(&self) -> &HttpTransport {
        &self.transport
    }

    pub fn request_for(&self, prompt: &str, params: &GenerationParams) -> ProviderRequest {
        let payload = json!({
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        });
        ProviderRequest::new(RequestKind::Chat, &self.endpoint, &payload)
    }
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

impl ChatProvider for HttpChat {
    fn chat_generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        if prompt.trim().is_empty() {
            return Err(ProviderError::Precondition("prompt is empty".into()));
        }
        params.validate()?;
        let body = self.transport.execute(&self.request_for(prompt, params))?;
        let resp: ChatResponse = parse_body(&body)?;
        let content = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("response has no choices[0].message.content".into()))?;
        Ok(content.trim().to_string())
    }

    fn fingerprint(&self) -> String {
        format!("http-chat:{}", self.endpoint)
    }
}

/// Translation client (`{text, source, target}` in, `{translation}` out).
pub struct HttpTranslator {
    endpoint: String,
    transport: HttpTransport,
}

impl HttpTranslator {
    pub fn new(endpoint: impl Into<String>, transport: HttpTransport) -> Self {
        HttpTranslator {
            endpoint: endpoint.into(),
            transport,
        }
    }

    pub fn transport(&self) -> &HttpTransport {
        &self.transport
    }
}

#[derive(Deserialize)]
struct TranslateResponse {
    translation: String,
}

impl Translator for HttpTranslator {
    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String, ProviderError> {
        check_translate_input(text, source_lang, target_lang)?;
        let req = ProviderRequest::new(
            RequestKind::Translate,
            &self.endpoint,
            &json!({"text": text, "source": source_lang, "target": target_lang}),
        );
        let body = self.transport.execute(&req)?;
        let resp: TranslateResponse = parse_body(&body)?;
        Ok(resp.translation.trim().to_string())
    }

    fn fingerprint(&self) -> String {
        format!("http-translate:{}", self.endpoint)
    }
}

/// Embedding client (`{texts}` in, `{vectors}` out).
pub struct HttpEmbedder {
    endpoint: String,
    transport: HttpTransport,
    dim: DimensionGuard,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, transport: HttpTransport) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            transport,
            dim: DimensionGuard::default(),
        }
    }

    pub fn transport(&self) -> &HttpTransport {
        &self.transport
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_embed_input(texts)?;
        let req = ProviderRequest::new(RequestKind::Embed, &self.endpoint, &json!({ "texts": texts }));
        let body = self.transport.execute(&req)?;
        let resp: EmbedResponse = parse_body(&body)?;
        if resp.vectors.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        let vectors = resp
            .vectors
            .into_iter()
            .map(EmbeddingVector::new)
            .collect::<Result<Vec<_>, _>>()?;
        self.dim.check(&vectors)?;
        Ok(vectors)
    }

    fn fingerprint(&self) -> String {
        format!("http-embed:{}", self.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_exponential() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(1), Duration::from_secs(1));
        assert_eq!(p.backoff(2), Duration::from_secs(2));
        assert_eq!(p.backoff(3), Duration::from_secs(4));
    }

    #[test]
    fn token_bucket_paces_requests() {
        let b = TokenBucket::new(20.0);
        let start = Instant::now();
        for _ in 0..25 {
            b.acquire();
        }
        // 20 burst tokens, then 5 more at 20/s.
        assert!(start.elapsed() >= Duration::from_millis(200));
    }

    #[test]
    fn gate_bounds_concurrency() {
        let gate = Arc::new(Gate::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let live = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (gate, peak, live) = (gate.clone(), peak.clone(), live.clone());
                thread::spawn(move || {
                    let _p = gate.enter();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
