//! Image embeddings for the semantic half of the verify score.
//!
//! The service contract is `POST /embed` with a PNG body, answered by
//! `{"vector": [f32, ...]}`. The stub backend reads vectors from
//! `<stub_dir>/<raster digest>.json` in the same shape and otherwise falls
//! back to a normalized color histogram so it always answers offline.

use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;

use crate::error::MetricError;
use crate::raster::Raster;

pub trait Embedder: Send + Sync {
    fn embed(&self, image: &Raster) -> Result<Vec<f64>, MetricError>;
}

#[derive(Deserialize)]
struct VectorDoc {
    vector: Vec<f64>,
}

pub struct HttpEmbedder {
    url: String,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    /// `url` is the service root; `/embed` is appended unless present.
    pub fn new(url: &str, timeout: Duration) -> Self {
        let url = url.trim_end_matches('/');
        let url = if url.ends_with("/embed") { url.to_string() } else { format!("{url}/embed") };
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url, agent }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, image: &Raster) -> Result<Vec<f64>, MetricError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "image/png")
            .send(&image.to_png_bytes()[..])
            .map_err(|e| MetricError::Transport(e.to_string()))?;
        let doc: VectorDoc = resp.body_mut().read_json().map_err(|e| MetricError::Protocol(e.to_string()))?;
        Ok(doc.vector)
    }
}

pub struct StubEmbedder {
    dir: Option<PathBuf>,
}

impl StubEmbedder {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// 4×4×4 RGB histogram.
    pub fn histogram(image: &Raster) -> Vec<f64> {
        let mut bins = vec![0f64; 64];
        for px in image.pixels().chunks_exact(3) {
            let idx = (usize::from(px[0]) >> 6) * 16 + (usize::from(px[1]) >> 6) * 4 + (usize::from(px[2]) >> 6);
            bins[idx] += 1.0;
        }
        bins
    }
}

impl Embedder for StubEmbedder {
    fn embed(&self, image: &Raster) -> Result<Vec<f64>, MetricError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.json", image.digest()));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| MetricError::Transport(e.to_string()))?;
                let doc: VectorDoc = serde_json::from_str(&text).map_err(|e| MetricError::Protocol(e.to_string()))?;
                return Ok(doc.vector);
            }
        }
        Ok(Self::histogram(image))
    }
}

/// Cosine similarity of two embeddings, clamped into [0, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Protocol(format!("embedding lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(MetricError::Protocol("empty embedding".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(MetricError::Protocol("embedding has zero or non-finite norm".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

pub fn embedding_similarity(embedder: &dyn Embedder, a: &Raster, b: &Raster) -> Result<f64, MetricError> {
    let ea = embedder.embed(a)?;
    let eb = embedder.embed(b)?;
    cosine_similarity(&ea, &eb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_vec(dir: &std::path::Path, r: &Raster, v: &[f64]) {
        std::fs::write(dir.join(format!("{}.json", r.digest())), serde_json::json!({ "vector": v }).to_string()).unwrap();
    }

    #[test]
    fn self_similarity_is_one() {
        let e = StubEmbedder::new(None);
        let r = Raster::filled(5, 5, [10, 200, 30]);
        assert!((embedding_similarity(&e, &r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stub_vectors_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let a = Raster::filled(2, 2, [0; 3]);
        let b = Raster::filled(2, 2, [1; 3]);
        let c = Raster::filled(2, 2, [2; 3]);
        write_vec(dir.path(), &a, &[1.0, 0.0]);
        write_vec(dir.path(), &b, &[0.0, 3.0]);
        write_vec(dir.path(), &c, &[0.8, 0.6]);
        let e = StubEmbedder::new(Some(dir.path().to_path_buf()));
        assert_eq!(embedding_similarity(&e, &a, &b).unwrap(), 0.0);
        assert!((embedding_similarity(&e, &a, &c).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn negative_cosine_clamps_and_mismatch_errors() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
        assert!(cosine_similarity(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn unreachable_service() {
        let e = HttpEmbedder::new("http://127.0.0.1:9", Duration::from_secs(2));
        assert!(matches!(e.embed(&Raster::filled(1, 1, [0; 3])), Err(MetricError::Transport(_))));
    }
}
