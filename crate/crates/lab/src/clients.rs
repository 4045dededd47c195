//! External model clients.
//!
//! Credentials come from the environment only. Without them (or without the
//! `live` cargo feature) every caller falls back to fixtures.

use vlreward_core::decompose::LlmClient;
use vlreward_core::label::VisionClient;

pub const API_KEY_VAR: &str = "VLREWARD_API_KEY";
pub const API_BASE_VAR: &str = "VLREWARD_API_BASE";
pub const LLM_MODEL_VAR: &str = "VLREWARD_LLM_MODEL";
pub const VLM_MODEL_VAR: &str = "VLREWARD_VLM_MODEL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub api_key: String,
    pub api_base: String,
    pub llm_model: String,
    pub vlm_model: String,
}

impl Credentials {
    pub fn from_env() -> Option<Self> {
        let api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.trim().is_empty())?;
        let var = |name: &str, default: &str| std::env::var(name).unwrap_or_else(|_| default.to_string());
        Some(Credentials {
            api_key,
            api_base: var(API_BASE_VAR, "https://api.openai.com/v1"),
            llm_model: var(LLM_MODEL_VAR, "gpt-4o"),
            vlm_model: var(VLM_MODEL_VAR, "gpt-4o"),
        })
    }
}

/// Whether this build can talk to external models at all.
pub const LIVE_SUPPORTED: bool = cfg!(feature = "live");

pub fn llm_client(creds: &Credentials) -> Option<Box<dyn LlmClient + Send>> {
    #[cfg(feature = "live")]
    {
        Some(Box::new(http::ChatClient::new(creds.clone(), false)))
    }
    #[cfg(not(feature = "live"))]
    {
        let _ = creds;
        None
    }
}

pub fn vision_client(creds: &Credentials) -> Option<Box<dyn VisionClient + Send>> {
    #[cfg(feature = "live")]
    {
        Some(Box::new(http::ChatClient::new(creds.clone(), true)))
    }
    #[cfg(not(feature = "live"))]
    {
        let _ = creds;
        None
    }
}

#[cfg(feature = "live")]
mod http {
    //! OpenAI-style chat-completions client. The toy environment has no
    //! pixels, so a frame travels as a JSON text block.

    use serde_json::json;
    use vlreward_core::decompose::LlmClient;
    use vlreward_core::label::{VisionClient, VlmMessage};
    use vlreward_core::{Error, Result};

    use super::Credentials;

    pub struct ChatClient {
        creds: Credentials,
        vision: bool,
        agent: ureq::Agent,
    }

    impl ChatClient {
        pub fn new(creds: Credentials, vision: bool) -> Self {
            ChatClient { creds, vision, agent: ureq::Agent::new() }
        }

        fn chat(&self, messages: serde_json::Value) -> Result<String> {
            let model = if self.vision { &self.creds.vlm_model } else { &self.creds.llm_model };
            let url = format!("{}/chat/completions", self.creds.api_base.trim_end_matches('/'));
            let body = json!({ "model": model, "temperature": 0, "messages": messages });
            let resp: serde_json::Value = self
                .agent
                .post(&url)
                .set("Authorization", &format!("Bearer {}", self.creds.api_key))
                .send_json(body)
                .map_err(|e| Error::Transport(e.to_string()))?
                .into_json()
                .map_err(|e| Error::Transport(e.to_string()))?;
            resp["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Parse { raw: resp.to_string() })
        }
    }

    impl LlmClient for ChatClient {
        fn complete(&mut self, prompt: &str) -> Result<String> {
            self.chat(json!([{ "role": "user", "content": prompt }]))
        }
    }

    impl VisionClient for ChatClient {
        fn ask(&mut self, messages: &[VlmMessage]) -> Result<String> {
            let msgs: Vec<_> = messages
                .iter()
                .map(|m| {
                    let mut content = m.text.clone();
                    if let Some(frame) = &m.image {
                        content.push_str("\n[frame] ");
                        content.push_str(&serde_json::to_string(frame).map_err(|e| Error::Transport(e.to_string()))?);
                    }
                    Ok(json!({ "role": "user", "content": content }))
                })
                .collect::<Result<_>>()?;
            self.chat(serde_json::Value::Array(msgs))
        }
    }
}
