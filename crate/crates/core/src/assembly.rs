//! Page assembly: absolute positioning (APS), model-based merging (MS), and
//! selection between the two by verify score.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, ChatRequest, ImageAttachment, UserPart};
use crate::embedding::{embedding_similarity, Embedder};
use crate::error::{AssemblyError, HtmlError};
use crate::geometry::BBox;
use crate::html::{HtmlDocument, SKELETON};
use crate::metrics::{mae, normalize_pair, VerifyReport};
use crate::prompt::ASSEMBLY;
use crate::raster::Raster;
use crate::render::Renderer;
use crate::synthesis::{extract_html, BlockArtifact};

/// Wrapper attribute carrying the block index.
pub const BLOCK_ATTR: &str = "data-latcoder-block";
/// Wrapper attribute carrying `x,y,w,h`.
pub const BBOX_ATTR: &str = "data-latcoder-bbox";

pub const DEFAULT_CONTEXT_BUDGET: u64 = 128_000;
pub const DEFAULT_IMAGE_TOKEN_COST: u64 = 1100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    Aps,
    Ms,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Aps => "APS",
            Strategy::Ms => "MS",
        })
    }
}

impl Strategy {
    pub fn file_stem(self) -> &'static str {
        match self {
            Strategy::Aps => "assembled_aps",
            Strategy::Ms => "assembled_ms",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AssemblyCandidate {
    pub strategy: Strategy,
    pub html: HtmlDocument,
    pub screenshot: Option<Raster>,
    pub verify: Option<VerifyReport>,
}

impl AssemblyCandidate {
    pub fn new(strategy: Strategy, html: HtmlDocument) -> Self {
        Self { strategy, html, screenshot: None, verify: None }
    }
}

fn body_open_tag(canvas: (u32, u32)) -> String {
    format!(
        "<body style=\"position:relative;margin:0;width:{}px;height:{}px;background:white;\">",
        canvas.0, canvas.1
    )
}

/// Places each artifact's body fragment in an absolutely positioned,
/// overflow-clipped wrapper at its bounding box, in index order.
pub fn assemble_absolute(artifacts: &[BlockArtifact], canvas: (u32, u32)) -> Result<HtmlDocument, AssemblyError> {
    if artifacts.is_empty() {
        return Err(AssemblyError::NoArtifacts);
    }
    let mut ordered: Vec<&BlockArtifact> = artifacts.iter().collect();
    ordered.sort_by_key(|a| a.index);

    let mut body = String::new();
    for a in ordered {
        let b = a.bbox;
        body.push_str(&format!(
            "\n<div {BLOCK_ATTR}=\"{}\" {BBOX_ATTR}=\"{}\" style=\"position:absolute;left:{}px;top:{}px;width:{}px;height:{}px;overflow:hidden;\">\n{}\n</div>",
            a.index, b, b.x(), b.y(), b.w(), b.h(), a.body_fragment
        ));
    }
    body.push('\n');

    let page = SKELETON
        .replacen("<body>", &body_open_tag(canvas), 1)
        .replacen(crate::html::SKELETON_SLOT, &body, 1);
    Ok(HtmlDocument::parse(page)?)
}

/// One wrapper read back from an assembled page.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub index: usize,
    /// From the bbox attribute.
    pub declared: BBox,
    /// From the inline left/top/width/height.
    pub styled: BBox,
    pub inner_html: String,
}

fn style_px(style: &str, key: &str) -> Option<u32> {
    style.split(';').find_map(|decl| {
        let (k, v) = decl.split_once(':')?;
        if k.trim() != key {
            return None;
        }
        v.trim().strip_suffix("px")?.trim().parse().ok()
    })
}

fn parse_bbox_attr(s: &str) -> Option<BBox> {
    let parts: Vec<u32> = s.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [x, y, w, h] => BBox::new(x, y, w, h).ok(),
        _ => None,
    }
}

/// Reads the wrappers that are direct children of `<body>`, in DOM order.
pub fn read_placements(source: &str) -> Result<Vec<Placement>, HtmlError> {
    let doc = Html::parse_document(source);
    let sel = Selector::parse(&format!("body > div[{BLOCK_ATTR}]")).expect("static selector");
    let mut out = Vec::new();
    for el in doc.select(&sel) {
        let attrs = el.value();
        let index = attrs.attr(BLOCK_ATTR).and_then(|v| v.parse().ok());
        let declared = attrs.attr(BBOX_ATTR).and_then(parse_bbox_attr);
        let style = attrs.attr("style").unwrap_or("");
        let styled = (|| {
            BBox::new(
                style_px(style, "left")?,
                style_px(style, "top")?,
                style_px(style, "width")?,
                style_px(style, "height")?,
            )
            .ok()
        })();
        if let (Some(index), Some(declared), Some(styled)) = (index, declared, styled) {
            out.push(Placement { index, declared, styled, inner_html: el.inner_html().trim().to_string() });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssemblyOptions {
    pub model: String,
    pub max_output_tokens: u32,
    pub max_image_pixels: u64,
    pub context_budget: u64,
    pub image_token_cost: u64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            model: "gpt-4o".into(),
            max_output_tokens: 4096,
            max_image_pixels: 0,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            image_token_cost: DEFAULT_IMAGE_TOKEN_COST,
        }
    }
}

pub const ASSEMBLY_INSTRUCTION: &str =
    "This is the full design. Merge the blocks below into one webpage following the requirements.";

pub fn block_listing(artifact: &BlockArtifact) -> String {
    let b = artifact.bbox;
    format!(
        "Block {} (x={}, y={}, width={}, height={}):\n```html\n{}\n```",
        artifact.index,
        b.x(),
        b.y(),
        b.w(),
        b.h(),
        artifact.body_fragment
    )
}

/// The MS request: template, full design, then each block's box and
/// fragment in index order. Fails when the estimate exceeds the budget.
pub fn build_assembly_prompt(
    design: &Raster,
    artifacts: &[BlockArtifact],
    options: &AssemblyOptions,
) -> Result<ChatRequest, AssemblyError> {
    if artifacts.is_empty() {
        return Err(AssemblyError::NoArtifacts);
    }
    let mut ordered: Vec<&BlockArtifact> = artifacts.iter().collect();
    ordered.sort_by_key(|a| a.index);

    let mut parts = vec![
        UserPart::Image(ImageAttachment::from_raster(design, options.max_image_pixels)),
        UserPart::Text(ASSEMBLY_INSTRUCTION.into()),
    ];
    parts.extend(ordered.into_iter().map(|a| UserPart::Text(block_listing(a))));
    let request = ChatRequest::new(options.model.clone(), ASSEMBLY.render(), parts, options.max_output_tokens)
        .expect("assembly request has user parts");

    let estimated = request.estimated_tokens(options.image_token_cost);
    if estimated > options.context_budget {
        return Err(AssemblyError::ContextOverflow { estimated, budget: options.context_budget });
    }
    Ok(request)
}

pub fn assemble_mllm(
    client: &ChatClient,
    design: &Raster,
    artifacts: &[BlockArtifact],
    options: &AssemblyOptions,
) -> Result<HtmlDocument, AssemblyError> {
    let request = build_assembly_prompt(design, artifacts, options)?;
    let response = client.complete(&request).map_err(crate::error::SynthesisError::from)?;
    Ok(extract_html(&response.text)?)
}

/// Strict preference between two scored candidates: higher verify score,
/// then APS over MS, then the lexicographically smaller source. Unscored
/// candidates rank last.
pub fn candidate_order(a: &AssemblyCandidate, b: &AssemblyCandidate) -> Ordering {
    let score = |c: &AssemblyCandidate| c.verify.map(|v| v.verify_score);
    match (score(a), score(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then(a.strategy.cmp(&b.strategy))
    .then_with(|| a.html.source().cmp(b.html.source()))
}

/// Index of the preferred scored candidate, if any is scored.
pub fn pick_best(candidates: &[AssemblyCandidate]) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.verify.is_some())
        .min_by(|(_, a), (_, b)| candidate_order(a, b))
        .map(|(i, _)| i)
}

#[derive(Clone, Debug)]
pub struct Selection {
    /// Every candidate, scored where rendering succeeded, in input order.
    pub candidates: Vec<AssemblyCandidate>,
    pub winner: usize,
    /// Candidates that could not be scored, with the reason.
    pub failures: Vec<(Strategy, String)>,
}

impl Selection {
    pub fn best(&self) -> &AssemblyCandidate {
        &self.candidates[self.winner]
    }
}

/// Screenshot and score one page against the design.
pub fn score_page(
    html: &HtmlDocument,
    design: &Raster,
    renderer: &dyn Renderer,
    embedder: &dyn Embedder,
) -> Result<(Raster, VerifyReport), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("page.html");
    std::fs::write(&path, html.source()).map_err(|e| e.to_string())?;
    let shot = renderer.render(&path, design.dims()).map_err(|e| e.to_string())?;
    let (design_n, shot_n) = normalize_pair(design, &shot);
    let m = mae(&design_n, &shot_n).map_err(|e| e.to_string())?;
    let sim = embedding_similarity(embedder, &design_n, &shot_n).map_err(|e| e.to_string())?;
    let report = VerifyReport::new(m, sim).map_err(|e| e.to_string())?;
    Ok((shot, report))
}

/// Renders and scores every candidate concurrently, then picks the best.
pub fn select_best(
    candidates: Vec<AssemblyCandidate>,
    design: &Raster,
    renderer: &dyn Renderer,
    embedder: &dyn Embedder,
) -> Result<Selection, AssemblyError> {
    if candidates.is_empty() {
        return Err(AssemblyError::Selection("no candidates".into()));
    }
    let scored: Vec<(AssemblyCandidate, Option<String>)> = candidates
        .into_par_iter()
        .map(|mut c| match score_page(&c.html, design, renderer, embedder) {
            Ok((shot, report)) => {
                c.screenshot = Some(shot);
                c.verify = Some(report);
                (c, None)
            }
            Err(e) => {
                log::warn!("{} candidate could not be scored: {e}", c.strategy);
                (c, Some(e))
            }
        })
        .collect();

    let failures: Vec<_> = scored.iter().filter_map(|(c, e)| e.clone().map(|e| (c.strategy, e))).collect();
    let candidates: Vec<_> = scored.into_iter().map(|(c, _)| c).collect();
    let winner = pick_best(&candidates).ok_or_else(|| {
        let reasons: Vec<_> = failures.iter().map(|(s, e)| format!("{s}: {e}")).collect();
        AssemblyError::Selection(format!("no candidate could be rendered and scored ({})", reasons.join("; ")))
    })?;
    Ok(Selection { candidates, winner, failures })
}
