//! Chat-completion provider backed by an OpenAI-compatible HTTP endpoint.

use serde_json::json;

use super::ChatProvider;
use crate::net;
use crate::{Error, Result};

/// Production provider. Sends `messages = [system, user]` to a
/// chat-completions endpoint and returns the first choice's content. The API
/// key is read from the environment variable named in the config at
/// construction time, so worker threads never touch the environment.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key_env: &str,
        timeout_secs: u64,
    ) -> Result<Self> {
        Ok(HttpProvider {
            client: net::build_client(timeout_secs)?,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(api_key_env).ok(),
        })
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let reply = net::post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body)?;
        parse_chat_reply(&reply)
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
fn parse_chat_reply(reply: &serde_json::Value) -> Result<String> {
    reply["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| {
            Error::provider(
                "chat response has no choices[0].message.content",
                Some(reply.to_string()),
            )
        })
}
