//! OpenAI-compatible `chat/completions` backend.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use super::{BackendError, BackendReply, ChatBackend, ChatRequest, Usage, UserPart};

pub struct OpenAiBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl OpenAiBackend {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')), api_key, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Request body in the chat-completions wire format. Images go inline as
/// base64 data URLs.
pub fn request_body(request: &ChatRequest) -> Value {
    let content: Vec<Value> = request
        .user_parts()
        .iter()
        .map(|p| match p {
            UserPart::Text(t) => json!({"type": "text", "text": t}),
            UserPart::Image(img) => json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{}", BASE64.encode(&img.png))}
            }),
        })
        .collect();
    let mut messages = Vec::new();
    if !request.system_text().is_empty() {
        messages.push(json!({"role": "system", "content": request.system_text()}));
    }
    messages.push(json!({"role": "user", "content": content}));
    json!({
        "model": request.model(),
        "temperature": request.temperature(),
        "max_tokens": request.max_output_tokens(),
        "messages": messages,
    })
}

/// Pulls the assistant text out of a chat-completions response.
pub fn parse_reply(body: &Value) -> Result<BackendReply, BackendError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))?;
    let text = match content {
        Value::String(s) => s.clone(),
        // Some proxies return content as a list of typed parts.
        Value::Array(parts) => parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect(),
        Value::Null => String::new(),
        other => return Err(BackendError::Protocol(format!("unexpected content type: {other}"))),
    };
    let usage = Usage {
        prompt_tokens: body.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        completion_tokens: body.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    };
    Ok(BackendReply { text, usage })
}

impl ChatBackend for OpenAiBackend {
    fn name(&self) -> &str {
        "openai"
    }

    fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(request_body(request)).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: body.chars().take(500).collect() });
        }
        let json: Value = serde_json::from_str(&body).map_err(|e| BackendError::Protocol(e.to_string()))?;
        parse_reply(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ImageAttachment;

    #[test]
    fn body_carries_zero_temperature_and_data_url() {
        let img = ImageAttachment { png: vec![0x89, b'P', b'N', b'G'], width: 1, height: 1 };
        let r = ChatRequest::new("gpt", "sys", vec![UserPart::Image(img), UserPart::Text("hi".into())], 64).unwrap();
        let b = request_body(&r);
        assert_eq!(b["temperature"], 0.0);
        assert_eq!(b["max_tokens"], 64);
        assert_eq!(b["messages"][0]["role"], "system");
        let url = b["messages"][1]["content"][0]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,iVBO"));
    }

    #[test]
    fn parses_string_and_part_content() {
        let r = parse_reply(&json!({"choices":[{"message":{"content":"x"}}],"usage":{"prompt_tokens":3}})).unwrap();
        assert_eq!(r.text, "x");
        assert_eq!(r.usage.prompt_tokens, Some(3));
        let r = parse_reply(&json!({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})).unwrap();
        assert_eq!(r.text, "ab");
        assert!(parse_reply(&json!({"error":"nope"})).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let b = OpenAiBackend::new("http://127.0.0.1:9", None, Duration::from_secs(2));
        let r = ChatRequest::new("m", "s", vec![UserPart::Text("x".into())], 1).unwrap();
        assert!(matches!(b.send(&r), Err(BackendError::Transport(_))));
    }
}
