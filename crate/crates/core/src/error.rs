use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("box must have positive size, got {w}x{h}")]
    EmptyBox { w: u32, h: u32 },
    #[error("box coordinates overflow")]
    Overflow,
    #[error("line offset {offset} is not strictly inside {lo}..{hi}")]
    LineOutsideSpan { offset: u32, lo: u32, hi: u32 },
}

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("failed to decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("raster must be non-empty")]
    Empty,
    #[error("box {bbox} lies outside the {width}x{height} raster")]
    OutOfBounds { bbox: BBox, width: u32, height: u32 },
}

#[derive(Debug, Error)]
pub enum TextRegionError {
    #[error("OCR document is not a JSON array: {0}")]
    Document(String),
    #[error("OCR record {index} is malformed: {message}")]
    Record { index: usize, message: String },
    #[error("failed to read OCR file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("endpoint returned an empty response")]
    EmptyResponse,
    #[error("malformed endpoint response: {0}")]
    Protocol(String),
    #[error("cache I/O error at {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
    #[error("client configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HtmlError {
    #[error("no HTML elements could be recovered from the input")]
    NoElements,
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("no HTML found in response: {excerpt:?}")]
    Extraction { excerpt: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("block {index} failed: {source}")]
    Block {
        index: usize,
        #[source]
        source: Box<SynthesisError>,
    },
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no block artifacts to assemble")]
    NoArtifacts,
    #[error("assembly prompt needs ~{estimated} tokens, budget is {budget}")]
    ContextOverflow { estimated: u64, budget: u64 },
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Html(#[from] HtmlError),
    #[error("selection failed: {0}")]
    Selection(String),
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("html file {0} does not exist")]
    MissingInput(PathBuf),
    #[error("renderer configuration: {0}")]
    Config(String),
    #[error("render command failed ({status}): {stderr}")]
    Command { status: String, stderr: String },
    #[error("render command timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("render output unusable: {0}")]
    Output(String),
    #[error("render I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("embedder protocol error: {0}")]
    Protocol(String),
    #[error("embedder transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage { stage, message: err.to_string() }
    }
}
