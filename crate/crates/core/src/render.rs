//! Screenshots of generated pages through an external command.
//!
//! `CommandRenderer` fills a shell template with the page path, output
//! path and viewport, runs it, and loads the PNG it leaves behind.
//! `StubRenderer` serves pre-made PNGs keyed by the SHA-256 of the HTML.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::client::Semaphore;
use crate::error::RenderError;
use crate::raster::Raster;

pub const PLACEHOLDERS: [&str; 4] = ["{html}", "{out}", "{width}", "{height}"];

/// Chromium-style invocation. Any command honoring the placeholders works.
pub const DEFAULT_COMMAND_TEMPLATE: &str = "chromium --headless --disable-gpu --hide-scrollbars \
     --window-size={width},{height} --screenshot={out} file://{html}";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub trait Renderer: Send + Sync {
    fn name(&self) -> &str;
    fn render(&self, html_path: &Path, viewport: (u32, u32)) -> Result<Raster, RenderError>;
}

pub fn validate_template(template: &str) -> Result<(), RenderError> {
    let missing: Vec<_> = PLACEHOLDERS.iter().filter(|p| !template.contains(*p)).copied().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(RenderError::Config(format!("command template lacks {}", missing.join(", "))))
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

pub struct CommandRenderer {
    template: String,
    timeout: Duration,
    permits: Semaphore,
}

impl CommandRenderer {
    pub fn new(template: impl Into<String>, timeout: Duration) -> Result<Self, RenderError> {
        let template = template.into();
        validate_template(&template)?;
        Ok(Self { template, timeout, permits: Semaphore::new(2) })
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.permits = Semaphore::new(n);
        self
    }

    pub fn command_line(&self, html: &Path, out: &Path, viewport: (u32, u32)) -> String {
        self.template
            .replace("{html}", &shell_quote(&html.to_string_lossy()))
            .replace("{out}", &shell_quote(&out.to_string_lossy()))
            .replace("{width}", &viewport.0.to_string())
            .replace("{height}", &viewport.1.to_string())
    }
}

impl Renderer for CommandRenderer {
    fn name(&self) -> &str {
        "command"
    }

    fn render(&self, html_path: &Path, viewport: (u32, u32)) -> Result<Raster, RenderError> {
        if !html_path.is_file() {
            return Err(RenderError::MissingInput(html_path.to_path_buf()));
        }
        let html = std::path::absolute(html_path)?;
        let scratch = tempfile::tempdir()?;
        let out = scratch.path().join("screenshot.png");
        let line = self.command_line(&html, &out, viewport);

        let _permit = self.permits.acquire();
        log::debug!("render: {line}");
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&line)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
        let stderr_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr_pipe.read_to_string(&mut buf);
            buf
        });

        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RenderError::Timeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        let stderr = stderr_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(RenderError::Command { status: status.to_string(), stderr });
        }
        Raster::load(&out).map_err(|e| RenderError::Output(format!("{e}; stderr: {}", stderr.trim())))
    }
}

pub struct StubRenderer {
    dir: PathBuf,
}

impl StubRenderer {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn html_digest(html: &[u8]) -> String {
        hex::encode(Sha256::digest(html))
    }

    pub fn fixture_path(&self, html: &[u8]) -> PathBuf {
        self.dir.join(format!("{}.png", Self::html_digest(html)))
    }
}

impl Renderer for StubRenderer {
    fn name(&self) -> &str {
        "stub"
    }

    fn render(&self, html_path: &Path, _viewport: (u32, u32)) -> Result<Raster, RenderError> {
        let html = std::fs::read(html_path).map_err(|_| RenderError::MissingInput(html_path.to_path_buf()))?;
        let keyed = self.fixture_path(&html);
        let path = if keyed.is_file() { keyed } else { self.dir.join("default.png") };
        Raster::load(&path).map_err(|e| RenderError::Output(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path) -> PathBuf {
        let p = dir.join("red.png");
        Raster::filled(4, 3, [255, 0, 0]).save_png(&p).unwrap();
        p
    }

    fn page(dir: &Path) -> PathBuf {
        let p = dir.join("page.html");
        std::fs::write(&p, "<html><body></body></html>").unwrap();
        p
    }

    #[test]
    fn template_validation() {
        assert!(validate_template(DEFAULT_COMMAND_TEMPLATE).is_ok());
        let err = CommandRenderer::new("chromium {html} {width} {height}", DEFAULT_TIMEOUT).err().unwrap();
        assert!(err.to_string().contains("{out}"));
    }

    #[test]
    fn command_produces_raster() {
        let dir = tempfile::tempdir().unwrap();
        let png = fixture(dir.path());
        let template = format!("test -f {{html}} && test {{width}} -eq 4 && test {{height}} -eq 3 && cp '{}' {{out}}", png.display());
        let r = CommandRenderer::new(template, DEFAULT_TIMEOUT).unwrap();
        let shot = r.render(&page(dir.path()), (4, 3)).unwrap();
        assert_eq!(shot, Raster::filled(4, 3, [255, 0, 0]));
    }

    #[test]
    fn quoting_survives_awkward_paths() {
        let dir = tempfile::tempdir().unwrap();
        let png = fixture(dir.path());
        let odd = dir.path().join("it's a page.html");
        std::fs::write(&odd, "<p>").unwrap();
        let template = format!("test -f {{html}} && cp '{}' {{out}} # {{width}} {{height}}", png.display());
        let r = CommandRenderer::new(template, DEFAULT_TIMEOUT).unwrap();
        assert!(r.render(&odd, (4, 3)).is_ok());
    }

    #[test]
    fn failures_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let html = page(dir.path());
        let tail = " # {html} {out} {width} {height}";

        let r = CommandRenderer::new(format!("echo boom >&2; exit 3{tail}"), DEFAULT_TIMEOUT).unwrap();
        match r.render(&html, (4, 3)) {
            Err(RenderError::Command { stderr, .. }) => assert_eq!(stderr.trim(), "boom"),
            other => panic!("{other:?}"),
        }

        let r = CommandRenderer::new(format!("true{tail}"), DEFAULT_TIMEOUT).unwrap();
        assert!(matches!(r.render(&html, (4, 3)), Err(RenderError::Output(_))));

        let r = CommandRenderer::new(format!("sleep 5{tail}"), Duration::from_millis(100)).unwrap();
        let t = Instant::now();
        assert!(matches!(r.render(&html, (4, 3)), Err(RenderError::Timeout(_))));
        assert!(t.elapsed() < Duration::from_secs(3));

        assert!(matches!(r.render(&dir.path().join("absent.html"), (4, 3)), Err(RenderError::MissingInput(_))));
    }

    #[test]
    fn stub_lookup_and_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let html = page(dir.path());
        let stub = StubRenderer::new(dir.path());
        assert!(matches!(stub.render(&html, (4, 3)), Err(RenderError::Output(_))));

        Raster::filled(2, 2, [0, 0, 255]).save_png(dir.path().join("default.png")).unwrap();
        assert_eq!(stub.render(&html, (4, 3)).unwrap().pixel(0, 0), [0, 0, 255]);

        let keyed = stub.fixture_path(&std::fs::read(&html).unwrap());
        Raster::filled(2, 2, [0, 255, 0]).save_png(&keyed).unwrap();
        assert_eq!(stub.render(&html, (4, 3)).unwrap().pixel(0, 0), [0, 255, 0]);

        assert!(matches!(stub.render(&dir.path().join("nope.html"), (1, 1)), Err(RenderError::MissingInput(_))));
    }
}
