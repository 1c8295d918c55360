//! Remote machine-translation service support.
//!
//! [`RemoteProvider`] implements the batching, rate limiting, retry and
//! timeout behaviour; the wire protocol lives behind [`BatchTransport`].
//! [`HttpTransport`] speaks the JSON protocol used by LibreTranslate-style
//! services: `POST {"q": [...], "source": "da", "target": "en", "format":
//! "text"}` answered by `{"translatedText": [...]}`.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{ProviderError, TranslationProvider};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    /// Worth retrying: connection failures, 429 and 5xx responses.
    Transient(String),
    /// Retrying cannot help: malformed responses, 4xx other than 429.
    Fatal(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        !matches!(self, TransportError::Fatal(_))
    }
}

/// One request/response exchange with a translation service.
///
/// Returns one entry per input text; `None` marks an item the service could
/// not translate.
pub trait BatchTransport: Send + Sync {
    fn send(&self, texts: &[String], timeout: Duration) -> Result<Vec<Option<String>>, TransportError>;
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub batch_size: usize,
    /// Requests per second; `None` disables rate limiting.
    pub rate_limit: Option<f64>,
    /// Hard limit per request.
    pub timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub backoff_base: Duration,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            batch_size: 64,
            rate_limit: Some(5.0),
            timeout: Duration::from_millis(10_000),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            max_in_flight: 1,
        }
    }
}

/// Spaces request start times at least `1 / rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate must be positive");
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / rate),
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

pub struct RemoteProvider<T> {
    transport: T,
    config: RemoteConfig,
    limiter: Option<RateLimiter>,
}

impl<T: BatchTransport> RemoteProvider<T> {
    pub fn new(transport: T, config: RemoteConfig) -> Self {
        let limiter = config.rate_limit.map(RateLimiter::per_second);
        RemoteProvider {
            transport,
            config,
            limiter,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn send_with_retries(&self, texts: &[String]) -> Result<Vec<Option<String>>, TransportError> {
        let mut attempt = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let result = self
                .transport
                .send(texts, self.config.timeout)
                .and_then(|items| {
                    if items.len() == texts.len() {
                        Ok(items)
                    } else {
                        Err(TransportError::Fatal(format!(
                            "service returned {} items for {} inputs",
                            items.len(),
                            texts.len()
                        )))
                    }
                });
            match result {
                Err(e) if e.retryable() && attempt < self.config.max_retries => {
                    thread::sleep(self.config.backoff_base * 2u32.saturating_pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

impl<T: BatchTransport> TranslationProvider for RemoteProvider<T> {
    fn name(&self) -> &str {
        "remote"
    }

    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, ProviderError>> {
        match self.send_with_retries(texts) {
            Ok(items) => items
                .into_iter()
                .map(|item| match item {
                    Some(t) if !t.trim().is_empty() => Ok(t),
                    _ => Err(ProviderError::Empty),
                })
                .collect(),
            Err(e) => {
                let err = match e {
                    TransportError::Timeout => ProviderError::Timeout,
                    TransportError::Transient(m) | TransportError::Fatal(m) => ProviderError::Service(m),
                };
                texts.iter().map(|_| Err(err.clone())).collect()
            }
        }
    }

    fn batch_size(&self) -> usize {
        self.config.batch_size.max(1)
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    source_lang: String,
    target_lang: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(
        url: impl Into<String>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, reqwest::Error> {
        Ok(HttpTransport {
            client: reqwest::blocking::Client::builder().build()?,
            url: url.into(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            api_key,
        })
    }
}

impl BatchTransport for HttpTransport {
    fn send(&self, texts: &[String], timeout: Duration) -> Result<Vec<Option<String>>, TransportError> {
        let mut body = json!({
            "q": texts,
            "source": self.source_lang,
            "target": self.target_lang,
            "format": "text",
        });
        if let Some(key) = &self.api_key {
            body["api_key"] = Value::String(key.clone());
        }
        let response = self
            .client
            .post(&self.url)
            .timeout(timeout)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Transient(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        let value: Value = response.json().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Fatal(format!("invalid response body: {e}"))
            }
        })?;
        parse_response(&value, texts.len())
    }
}

fn parse_response(value: &Value, expected: usize) -> Result<Vec<Option<String>>, TransportError> {
    let field = value
        .get("translatedText")
        .ok_or_else(|| TransportError::Fatal("response lacks translatedText".into()))?;
    match field {
        Value::Array(items) => Ok(items.iter().map(|v| v.as_str().map(str::to_string)).collect()),
        Value::String(s) if expected == 1 => Ok(vec![Some(s.clone())]),
        _ => Err(TransportError::Fatal("unexpected translatedText shape".into())),
    }
}
