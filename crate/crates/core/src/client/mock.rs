//! Offline backend whose replies depend only on the request digest.

use std::path::PathBuf;

use super::{request_digest, BackendError, BackendReply, ChatBackend, ChatRequest};
use crate::html::wrap_in_skeleton;

/// Serves `<dir>/<digest>.txt` when present, otherwise a fixed page that
/// embeds the digest prefix.
pub struct MockBackend {
    dir: Option<PathBuf>,
}

impl MockBackend {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn fallback_reply(digest: &str) -> String {
        let tag = &digest[..12];
        let page = wrap_in_skeleton(&format!(
            "<div class=\"w-full p-0 m-0\" data-mock=\"{tag}\"><h2 class=\"text-lg\">Section {tag}</h2><p>Generated offline.</p></div>"
        ));
        format!("Here is the code.\n```html\n{page}```\n")
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let digest = request_digest(request);
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{digest}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| BackendError::Transport(e.to_string()))?;
                return Ok(BackendReply { text, ..Default::default() });
            }
        }
        Ok(BackendReply { text: Self::fallback_reply(&digest), ..Default::default() })
    }
}
