use std::collections::HashMap;
use std::path::Path;
use std::thread;
use std::time::Duration;

use thiserror::Error;
use url::Url;

/// A failed fetch. `status` is set when the server answered with an HTTP
/// error code.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("transport error fetching {url}: {}", describe(.status, .message))]
pub struct TransportError {
    pub url: String,
    pub status: Option<u16>,
    pub message: String,
}

fn describe(status: &Option<u16>, message: &str) -> String {
    match status {
        Some(code) => format!("HTTP {code} {message}").trim_end().to_string(),
        None => message.to_string(),
    }
}

impl TransportError {
    pub fn new(url: impl Into<String>, status: Option<u16>, message: impl Into<String>) -> Self {
        TransportError {
            url: url.into(),
            status,
            message: message.into(),
        }
    }
}

/// Anything that can turn a URL into bytes.
///
/// Implementations must be shareable across the harvest worker threads.
pub trait Transport: Send + Sync {
    fn get(&self, url: &Url) -> Result<Vec<u8>, TransportError>;
}

/// Interprets `source` as a URL when it carries an `http`, `https` or
/// `file` scheme, and as a filesystem path otherwise.
pub fn resolve_source(source: &str) -> Result<Url, TransportError> {
    if let Ok(url) = Url::parse(source) {
        if matches!(url.scheme(), "http" | "https" | "file") {
            return Ok(url);
        }
    }
    let path = Path::new(source);
    let absolute = if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir()
            .map_err(|e| TransportError::new(source, None, e.to_string()))?
            .join(path)
    };
    Url::from_file_path(&absolute)
        .map_err(|_| TransportError::new(source, None, "not a valid URL or path"))
}

fn read_file_url(url: &Url) -> Result<Vec<u8>, TransportError> {
    let path = url
        .to_file_path()
        .map_err(|_| TransportError::new(url.as_str(), None, "invalid file URL"))?;
    std::fs::read(&path).map_err(|e| TransportError::new(url.as_str(), None, e.to_string()))
}

/// Blocking HTTP(S) client with a per-request timeout and bounded retries.
/// `file://` URLs are read from disk.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
    max_body: u64,
}

impl HttpTransport {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);
    pub const DEFAULT_RETRIES: u32 = 2;

    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent(concat!("bikeshare-equity/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        HttpTransport {
            agent,
            retries: Self::DEFAULT_RETRIES,
            backoff: Duration::from_millis(500),
            max_body: 64 * 1024 * 1024,
        }
    }

    /// Number of retries after the first attempt, and the initial backoff
    /// (doubled after every retry).
    pub fn with_retries(mut self, retries: u32, initial_backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = initial_backoff;
        self
    }

    fn attempt(&self, url: &Url) -> Result<Vec<u8>, (TransportError, bool)> {
        let mut response = self
            .agent
            .get(url.as_str())
            .call()
            .map_err(|e| (TransportError::new(url.as_str(), None, e.to_string()), true))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.is_server_error() || status.as_u16() == 429;
            let reason = status.canonical_reason().unwrap_or("");
            return Err((
                TransportError::new(url.as_str(), Some(status.as_u16()), reason),
                retryable,
            ));
        }
        response
            .body_mut()
            .with_config()
            .limit(self.max_body)
            .read_to_vec()
            .map_err(|e| (TransportError::new(url.as_str(), None, e.to_string()), true))
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Self::DEFAULT_TIMEOUT)
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &Url) -> Result<Vec<u8>, TransportError> {
        if url.scheme() == "file" {
            return read_file_url(url);
        }
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(url) {
                Ok(body) => return Ok(body),
                Err((err, retryable)) => {
                    if !retryable || attempt >= self.retries {
                        return Err(err);
                    }
                    log::debug!("retrying {url} after {delay:?}: {err}");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }
}

/// In-memory transport serving fixed bodies, for fixtures and offline runs.
/// Unknown URLs fail as unreachable; `file://` URLs fall through to disk.
#[derive(Debug, Clone, Default)]
pub struct StaticTransport {
    routes: HashMap<String, Result<Vec<u8>, Option<u16>>>,
}

impl StaticTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, url: &str, body: impl Into<Vec<u8>>) -> Self {
        self.insert(url, body);
        self
    }

    pub fn insert(&mut self, url: &str, body: impl Into<Vec<u8>>) {
        self.routes.insert(normalize_key(url), Ok(body.into()));
    }

    /// Makes `url` fail, with an HTTP status or as a connection failure.
    pub fn fail(&mut self, url: &str, status: Option<u16>) {
        self.routes.insert(normalize_key(url), Err(status));
    }
}

fn normalize_key(url: &str) -> String {
    Url::parse(url).map(|u| u.to_string()).unwrap_or_else(|_| url.to_string())
}

impl Transport for StaticTransport {
    fn get(&self, url: &Url) -> Result<Vec<u8>, TransportError> {
        match self.routes.get(url.as_str()) {
            Some(Ok(body)) => Ok(body.clone()),
            Some(Err(status)) => Err(TransportError::new(
                url.as_str(),
                *status,
                if status.is_some() { "" } else { "connection refused" },
            )),
            None if url.scheme() == "file" => read_file_url(url),
            None => Err(TransportError::new(url.as_str(), None, "host unreachable")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_source_paths_and_urls() {
        let u = resolve_source("https://example.com/systems.csv").unwrap();
        assert_eq!(u.scheme(), "https");
        let p = resolve_source("/tmp/systems.csv").unwrap();
        assert_eq!(p.scheme(), "file");
        assert_eq!(p.to_file_path().unwrap(), Path::new("/tmp/systems.csv"));
        let rel = resolve_source("fixtures/systems.csv").unwrap();
        assert!(rel.path().ends_with("/fixtures/systems.csv"));
    }

    #[test]
    fn static_transport_routes() {
        let mut t = StaticTransport::new().with("http://a.test/x", "hi");
        t.fail("http://a.test/down", Some(503));
        assert_eq!(t.get(&Url::parse("http://a.test/x").unwrap()).unwrap(), b"hi");
        let err = t.get(&Url::parse("http://a.test/down").unwrap()).unwrap_err();
        assert_eq!(err.status, Some(503));
        assert!(err.to_string().contains("HTTP 503"));
        let err = t.get(&Url::parse("http://b.test/").unwrap()).unwrap_err();
        assert_eq!(err.status, None);
    }

    #[test]
    fn file_urls_read_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        std::fs::write(&path, b"{}").unwrap();
        let url = Url::from_file_path(&path).unwrap();
        assert_eq!(HttpTransport::default().get(&url).unwrap(), b"{}");
        let missing = Url::from_file_path(dir.path().join("nope")).unwrap();
        assert!(HttpTransport::default().get(&missing).is_err());
    }
}
