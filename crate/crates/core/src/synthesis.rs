//! Block-wise code synthesis: crop each block, prompt the model, and pull a
//! clean HTML document out of the reply.

use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::client::{ChatClient, ChatRequest, ImageAttachment, UserPart};
use crate::error::{RasterError, SynthesisError};
use crate::geometry::BBox;
use crate::html::{wrap_in_skeleton, HtmlDocument};
use crate::prompt::PromptVariant;
use crate::raster::Raster;

/// Settings shared by every generation request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisOptions {
    pub model: String,
    pub max_output_tokens: u32,
    pub variant: PromptVariant,
    /// Attachments above this many pixels are downscaled (0 = never).
    pub max_image_pixels: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { model: "gpt-4o".into(), max_output_tokens: 4096, variant: PromptVariant::Full, max_image_pixels: 0 }
    }
}

pub const GENERATION_INSTRUCTION: &str =
    "This is the screenshot of the webpage section. Generate its code following the requirements.";

pub fn crop_block(image: &Raster, bbox: &BBox) -> Result<Raster, RasterError> {
    image.crop(bbox)
}

pub fn build_generation_prompt(block: &Raster, options: &SynthesisOptions) -> ChatRequest {
    let template = options.variant.generation_template();
    let image = ImageAttachment::from_raster(block, options.max_image_pixels);
    ChatRequest::new(
        options.model.clone(),
        template.render(),
        vec![UserPart::Image(image), UserPart::Text(GENERATION_INSTRUCTION.into())],
        options.max_output_tokens,
    )
    .expect("generation request has user parts")
}

fn fence_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[ \t]*([A-Za-z0-9_+.-]*)[^\n]*\n(.*?)```").unwrap())
}

fn starts_as_document(s: &str) -> bool {
    let head = s.trim_start().get(..9).unwrap_or("").to_ascii_lowercase();
    head.starts_with("<!doctype") || head.starts_with("<html")
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.to_ascii_lowercase().find(&needle.to_ascii_lowercase())
}

fn rfind_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.to_ascii_lowercase().rfind(&needle.to_ascii_lowercase())
}

/// Complete document or wrapped fragment, if the text holds any markup.
fn as_document(code: &str) -> Option<String> {
    let code = code.trim();
    if find_ci(code, "<html").is_some() || find_ci(code, "<!doctype").is_some() {
        return Some(code.to_string());
    }
    div_fragment(code).map(wrap_in_skeleton)
}

fn div_fragment(text: &str) -> Option<&str> {
    let start = find_ci(text, "<div")?;
    let end = rfind_ci(text, "</div>")? + "</div>".len();
    (end > start).then(|| &text[start..end])
}

/// Extracts an HTML document from a model reply, trying in order: the first
/// fenced block labelled `html`, any fenced block that starts like a
/// document, the span from the first `<!DOCTYPE`/`<html` to the last
/// `</html>`, and finally a bare `<div>` fragment wrapped in the skeleton.
pub fn extract_html(response_text: &str) -> Result<HtmlDocument, SynthesisError> {
    let fences: Vec<(String, &str)> = fence_regex()
        .captures_iter(response_text)
        .map(|c| (c[1].to_ascii_lowercase(), c.get(2).map_or("", |m| m.as_str())))
        .collect();

    let candidate = fences
        .iter()
        .find(|(label, _)| label == "html")
        .and_then(|(_, body)| as_document(body))
        .or_else(|| fences.iter().find(|(_, body)| starts_as_document(body)).map(|(_, b)| b.trim().to_string()))
        .or_else(|| {
            let start = find_ci(response_text, "<!doctype").or_else(|| find_ci(response_text, "<html"))?;
            let end = rfind_ci(response_text, "</html>")? + "</html>".len();
            (end > start).then(|| response_text[start..end].to_string())
        })
        .or_else(|| div_fragment(response_text).map(wrap_in_skeleton));

    let extraction_error = || SynthesisError::Extraction { excerpt: response_text.chars().take(200).collect() };
    let source = candidate.ok_or_else(extraction_error)?;
    HtmlDocument::parse(source).map_err(|_| extraction_error())
}

#[derive(Clone, Debug)]
pub struct BlockArtifact {
    pub index: usize,
    pub bbox: BBox,
    pub image: Raster,
    pub html: HtmlDocument,
    pub body_fragment: String,
}

impl BlockArtifact {
    fn from_document(index: usize, bbox: BBox, image: Raster, html: HtmlDocument) -> Self {
        let body_fragment = html.body_fragment();
        Self { index, bbox, image, html, body_fragment }
    }

    /// Gray stand-in with the block's aspect ratio.
    pub fn placeholder(index: usize, bbox: BBox, image: Raster) -> Self {
        let fragment = placeholder_fragment(&bbox);
        let html = HtmlDocument::parse(wrap_in_skeleton(&fragment)).expect("placeholder is valid HTML");
        Self::from_document(index, bbox, image, html)
    }
}

pub fn placeholder_fragment(bbox: &BBox) -> String {
    format!(
        "<div class=\"block-placeholder\" style=\"width:100%;aspect-ratio:{} / {};background-color:#d1d5db;\"></div>",
        bbox.w(),
        bbox.h()
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttemptRecord {
    pub variant: PromptVariant,
    pub prompt_version: String,
    pub request_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_digest: Option<String>,
    #[serde(skip)]
    pub from_cache: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Ok,
    /// Succeeded with the simplified prompt after the first attempt failed.
    Retried,
    Placeholder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockRecord {
    pub index: usize,
    pub bbox: BBox,
    pub status: BlockStatus,
    pub attempts: Vec<AttemptRecord>,
}

fn attempt(
    client: &ChatClient,
    block: &Raster,
    options: &SynthesisOptions,
    variant: PromptVariant,
) -> (Result<HtmlDocument, SynthesisError>, AttemptRecord) {
    let opts = SynthesisOptions { variant, ..options.clone() };
    let request = build_generation_prompt(block, &opts);
    let mut record = AttemptRecord {
        variant,
        prompt_version: variant.generation_template().version_id(),
        request_digest: crate::client::request_digest(&request),
        response_digest: None,
        from_cache: false,
        error: None,
    };
    let result = client.complete(&request).map_err(SynthesisError::from).and_then(|resp| {
        record.from_cache = resp.from_cache;
        record.response_digest = Some(hex::encode(Sha256::digest(resp.text.as_bytes())));
        extract_html(&resp.text)
    });
    if let Err(e) = &result {
        record.error = Some(e.to_string());
    }
    (result, record)
}

/// Generates one block. A failed first attempt is retried once with the
/// simplified prompt. The attempt log is returned either way.
pub fn synthesize_block(
    client: &ChatClient,
    design: &Raster,
    index: usize,
    bbox: BBox,
    options: &SynthesisOptions,
) -> (Result<BlockArtifact, SynthesisError>, Vec<AttemptRecord>) {
    let image = match crop_block(design, &bbox) {
        Ok(img) => img,
        Err(e) => {
            let err = SynthesisError::Block { index, source: Box::new(e.into()) };
            return (Err(err), Vec::new());
        }
    };
    let (first, rec1) = attempt(client, &image, options, options.variant);
    match first {
        Ok(doc) => (Ok(BlockArtifact::from_document(index, bbox, image, doc)), vec![rec1]),
        Err(e1) => {
            log::warn!("block {index}: {e1}; retrying with the simplified prompt");
            let (second, rec2) = attempt(client, &image, options, PromptVariant::Simplified);
            let records = vec![rec1, rec2];
            match second {
                Ok(doc) => (Ok(BlockArtifact::from_document(index, bbox, image, doc)), records),
                Err(e2) => (Err(SynthesisError::Block { index, source: Box::new(e2) }), records),
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisRun {
    pub artifacts: Vec<BlockArtifact>,
    pub records: Vec<BlockRecord>,
}

impl SynthesisRun {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == BlockStatus::Placeholder).count()
    }
}

/// Generates every block concurrently (bounded by the client) and keeps
/// input order. Blocks that fail both attempts become placeholders.
pub fn synthesize_blocks(
    client: &ChatClient,
    design: &Raster,
    blocks: &[BBox],
    options: &SynthesisOptions,
) -> Result<SynthesisRun, SynthesisError> {
    let results: Vec<_> = blocks
        .par_iter()
        .enumerate()
        .map(|(i, bbox)| (i, *bbox, synthesize_block(client, design, i, *bbox, options)))
        .collect();

    let mut artifacts = Vec::with_capacity(blocks.len());
    let mut records = Vec::with_capacity(blocks.len());
    for (index, bbox, (result, attempts)) in results {
        let (artifact, status) = match result {
            Ok(a) => {
                let status = if attempts.len() > 1 { BlockStatus::Retried } else { BlockStatus::Ok };
                (a, status)
            }
            Err(SynthesisError::Block { source, .. }) if matches!(*source, SynthesisError::Raster(_)) => {
                return Err(*source);
            }
            Err(e) => {
                log::error!("{e}; substituting a placeholder");
                (BlockArtifact::placeholder(index, bbox, crop_block(design, &bbox)?), BlockStatus::Placeholder)
            }
        };
        artifacts.push(artifact);
        records.push(BlockRecord { index, bbox, status, attempts });
    }
    Ok(SynthesisRun { artifacts, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::MockBackend;
    use crate::html::SKELETON;

    #[test]
    fn rung_one_labelled_fence() {
        let doc = extract_html("Sure:\n```html\n<!DOCTYPE html><html><body><p>x</p></body></html>\n```\nbye").unwrap();
        assert_eq!(doc.source(), "<!DOCTYPE html><html><body><p>x</p></body></html>");
    }

    #[test]
    fn rung_two_unlabelled_fence() {
        let doc = extract_html("```\n<html><body><i>y</i></body></html>\n```").unwrap();
        assert_eq!(doc.dom().to_sexpr(), "html(head, body(i))");
    }

    #[test]
    fn rung_three_raw_document() {
        let doc = extract_html("Here you go <!DOCTYPE html><html><body><b>z</b></body></html> done").unwrap();
        assert_eq!(doc.source(), "<!DOCTYPE html><html><body><b>z</b></body></html>");
    }

    #[test]
    fn rung_four_bare_div() {
        let doc = extract_html("<div class=\"p-0\">hi</div>").unwrap();
        assert!(doc.source().contains("cdn.tailwindcss.com"));
        assert_eq!(doc.body_fragment(), "<div class=\"p-0\">hi</div>");
        assert_eq!(doc.dom().nodes().iter().filter(|n| n.tag == "body").count(), 1);
    }

    #[test]
    fn prose_is_an_extraction_error() {
        let err = extract_html("Sorry, I cannot help.").unwrap_err();
        assert!(matches!(err, SynthesisError::Extraction { ref excerpt } if excerpt == "Sorry, I cannot help."));
        let long = "x".repeat(500);
        let SynthesisError::Extraction { excerpt } = extract_html(&long).unwrap_err() else { panic!() };
        assert_eq!(excerpt.len(), 200);
    }

    #[test]
    fn generation_prompt_variants() {
        let block = Raster::filled(20, 10, [1, 2, 3]);
        let full = build_generation_prompt(&block, &SynthesisOptions::default());
        let simple = build_generation_prompt(
            &block,
            &SynthesisOptions { variant: PromptVariant::Simplified, ..Default::default() },
        );
        assert!(full.text().contains(SKELETON.trim_end()));
        assert!(full.text().contains("cdn.tailwindcss.com"));
        assert!(simple.text().len() < full.text().len());
        assert_ne!(simple.text(), full.text());
        assert_eq!(full.temperature(), 0.0);
        assert_eq!(simple.temperature(), 0.0);
        assert_eq!(full.images().count(), 1);
    }

    #[test]
    fn empty_block_list() {
        let client = ChatClient::new(Box::new(MockBackend::new(None)));
        let run = synthesize_blocks(&client, &Raster::filled(4, 4, [0; 3]), &[], &SynthesisOptions::default()).unwrap();
        assert!(run.artifacts.is_empty());
    }
}
