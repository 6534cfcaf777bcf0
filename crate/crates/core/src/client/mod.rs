//! Chat-completion client for multimodal endpoints.
//!
//! Requests are content-addressed: [`request_digest`] hashes every field,
//! image bytes included, and successful responses are stored under that
//! digest in the cache directory. A warm cache replays a run offline.

mod http;
mod mock;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use http::OpenAiBackend;
pub use mock::MockBackend;

use crate::error::ClientError;
use crate::raster::Raster;

/// A PNG image attached to a user message.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    pub png: Vec<u8>,
    pub width: u32,
    pub height: u32,
}

impl std::fmt::Debug for ImageAttachment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImageAttachment({}x{}, {} bytes)", self.width, self.height, self.png.len())
    }
}

impl ImageAttachment {
    /// Encodes `raster` as PNG, downscaling first if it has more than
    /// `max_pixels` pixels (0 disables the limit).
    pub fn from_raster(raster: &Raster, max_pixels: u64) -> Self {
        let (w, h) = raster.dims();
        let pixels = u64::from(w) * u64::from(h);
        if max_pixels > 0 && pixels > max_pixels {
            let scale = (max_pixels as f64 / pixels as f64).sqrt();
            let nw = ((f64::from(w) * scale).floor() as u32).max(1);
            let nh = ((f64::from(h) * scale).floor() as u32).max(1);
            log::info!("downscaling {w}x{h} attachment to {nw}x{nh} (scale {scale:.4})");
            let small = raster.resize(nw, nh);
            return Self { png: small.to_png_bytes(), width: nw, height: nh };
        }
        Self { png: raster.to_png_bytes(), width: w, height: h }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UserPart {
    Text(String),
    Image(ImageAttachment),
}

/// A single-turn chat request. Pipeline requests always use temperature 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    model: String,
    system_text: String,
    user_parts: Vec<UserPart>,
    temperature: f64,
    max_output_tokens: u32,
}

impl ChatRequest {
    /// Builds a deterministic (temperature 0) request.
    pub fn new(
        model: impl Into<String>,
        system_text: impl Into<String>,
        user_parts: Vec<UserPart>,
        max_output_tokens: u32,
    ) -> Result<Self, ClientError> {
        if user_parts.is_empty() {
            return Err(ClientError::Config("a request needs at least one user part".into()));
        }
        Ok(Self {
            model: model.into(),
            system_text: system_text.into(),
            user_parts,
            temperature: 0.0,
            max_output_tokens,
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }
    pub fn system_text(&self) -> &str {
        &self.system_text
    }
    pub fn user_parts(&self) -> &[UserPart] {
        &self.user_parts
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn max_output_tokens(&self) -> u32 {
        self.max_output_tokens
    }

    /// All text in the request, system text first.
    pub fn text(&self) -> String {
        let mut s = self.system_text.clone();
        for p in &self.user_parts {
            if let UserPart::Text(t) = p {
                s.push('\n');
                s.push_str(t);
            }
        }
        s
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageAttachment> {
        self.user_parts.iter().filter_map(|p| match p {
            UserPart::Image(i) => Some(i),
            UserPart::Text(_) => None,
        })
    }

    /// Rough token count: characters / 4 plus a flat cost per image.
    pub fn estimated_tokens(&self, image_token_cost: u64) -> u64 {
        let chars: usize = self.system_text.chars().count()
            + self
                .user_parts
                .iter()
                .map(|p| match p {
                    UserPart::Text(t) => t.chars().count(),
                    UserPart::Image(_) => 0,
                })
                .sum::<usize>();
        (chars as u64).div_ceil(4) + image_token_cost * self.images().count() as u64
    }
}

fn put_field(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

/// SHA-256 over every request field, as 64 lowercase hex characters.
pub fn request_digest(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    put_field(&mut h, b"chat-request/v1");
    put_field(&mut h, request.model.as_bytes());
    put_field(&mut h, request.system_text.as_bytes());
    h.update((request.user_parts.len() as u64).to_le_bytes());
    for part in &request.user_parts {
        match part {
            UserPart::Text(t) => {
                h.update([b'T']);
                put_field(&mut h, t.as_bytes());
            }
            UserPart::Image(img) => {
                h.update([b'I']);
                put_field(&mut h, &img.png);
            }
        }
    }
    h.update(request.temperature.to_bits().to_le_bytes());
    h.update(request.max_output_tokens.to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    pub from_cache: bool,
    /// Digest of the request that produced this response.
    pub request_digest: String,
}

/// What a backend returns for one call.
#[derive(Clone, Debug, Default)]
pub struct BackendReply {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone)]
pub enum BackendError {
    Transport(String),
    Status { status: u16, body: String },
    Protocol(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Protocol(_) => false,
        }
    }
}

/// One attempt at a chat completion.
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError>;
}

pub(crate) struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub(crate) fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    pub(crate) fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

pub(crate) struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Cached, retrying, concurrency-bounded front for a [`ChatBackend`].
pub struct ChatClient {
    backend: Box<dyn ChatBackend>,
    cache_dir: Option<PathBuf>,
    retries: u32,
    backoff: Duration,
    permits: Semaphore,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ChatClient {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend,
            cache_dir: None,
            retries: 3,
            backoff: Duration::from_millis(500),
            permits: Semaphore::new(4),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    /// `retries` extra attempts after the first, with the delay doubling
    /// from `backoff` each time.
    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.permits = Semaphore::new(n);
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats { hits: self.hits.load(Ordering::Relaxed), misses: self.misses.load(Ordering::Relaxed) }
    }

    fn cache_path(&self, digest: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{digest}.txt")))
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let digest = request_digest(request);
        if let Some(path) = self.cache_path(&digest) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                if !text.is_empty() {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(ChatResponse { text, usage: Usage::default(), from_cache: true, request_digest: digest });
                }
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);

        let reply = {
            let _permit = self.permits.acquire();
            self.send_with_retries(request)?
        };
        if reply.text.trim().is_empty() {
            return Err(ClientError::EmptyResponse);
        }
        if let Some(path) = self.cache_path(&digest) {
            write_atomic(&path, reply.text.as_bytes())?;
        }
        Ok(ChatResponse { text: reply.text, usage: reply.usage, from_cache: false, request_digest: digest })
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<BackendReply, ClientError> {
        let attempts = self.retries + 1;
        let mut delay = self.backoff;
        let mut attempt = 1;
        loop {
            match self.backend.send(request) {
                Ok(reply) => return Ok(reply),
                Err(e) if e.retryable() && attempt < attempts => {
                    log::warn!("{} attempt {attempt}/{attempts} failed: {e:?}; retrying in {delay:?}", self.backend.name());
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(BackendError::Transport(message)) => return Err(ClientError::Transport { attempts: attempt, message }),
                Err(BackendError::Status { status, body }) => {
                    let body: String = body.chars().take(500).collect();
                    return Err(ClientError::Endpoint { status, body });
                }
                Err(BackendError::Protocol(m)) => return Err(ClientError::Protocol(m)),
            }
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ClientError> {
    use std::io::Write;
    let io = |source| ClientError::Cache { path: path.to_path_buf(), source };
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
