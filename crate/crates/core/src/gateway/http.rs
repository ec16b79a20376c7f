use std::time::Duration;

use serde_json::Value;

/// Status and body of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. Implementations must not retry; the gateway owns
/// the retry policy. `Err` means no HTTP response was received.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpReply, String> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}
