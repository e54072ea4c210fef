//! Shared HTTP plumbing for the chat and embedding providers.
//!
//! Every outbound request passes through [`post_json`], which bumps a
//! process-wide counter first. Tests use [`http_requests_attempted`] to prove
//! that mock-mode runs never reach the network.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use crate::{Error, Result};

static HTTP_REQUESTS: AtomicU64 = AtomicU64::new(0);

/// Number of HTTP requests attempted since process start (sent or not —
/// counted before the socket is touched).
pub fn http_requests_attempted() -> u64 {
    HTTP_REQUESTS.load(Ordering::SeqCst)
}

pub(crate) fn build_client(timeout_secs: u64) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| Error::provider(format!("failed to build HTTP client: {e}"), None))
}

/// POSTs `body` as JSON and parses the JSON response. Bearer auth when a key
/// is present.
pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<serde_json::Value> {
    HTTP_REQUESTS.fetch_add(1, Ordering::SeqCst);
    let mut req = client.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req
        .send()
        .map_err(|e| Error::provider(format!("request to {url} failed: {e}"), None))?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| Error::provider(format!("failed reading response body: {e}"), None))?;
    if !status.is_success() {
        return Err(Error::provider(
            format!("{url} returned HTTP {status}"),
            Some(text),
        ));
    }
    serde_json::from_str(&text)
        .map_err(|e| Error::provider(format!("response is not JSON: {e}"), Some(text)))
}
