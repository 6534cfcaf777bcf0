//! Stage orchestration. Every stage reads its inputs from and writes its
//! outputs to a run directory, so running the stages one by one produces
//! the same files as a full run.
//!
//! Run directory layout:
//!
//! ```text
//! blocks.json  split_tree.json  overlay.png  text_regions.json
//! blocks/<i>.png  blocks/<i>.html  blocks/<i>.fragment.html  synthesis.json
//! assembled_aps.html  assembled_ms.html
//! screenshots/<strategy>.png  selected.html  verify_report.json
//! report.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{
    assemble_absolute, assemble_mllm, select_best, AssemblyCandidate, Selection, Strategy,
};
use crate::client::{CacheStats, ChatClient};
use crate::config::PipelineConfig;
use crate::divider::{divide, render_debug_overlay, BlocksFile, DivisionResult};
use crate::embedding::{embedding_similarity, Embedder};
use crate::error::{AssemblyError, PipelineError};
use crate::html::{parse_dom, HtmlDocument};
use crate::metrics::{mae, normalize_pair, verify_score, VerifyReport, VERIFY_MAE_WEIGHT, VERIFY_SIM_WEIGHT};
use crate::prompt::{ASSEMBLY, BLOCK_GENERATION, BLOCK_GENERATION_SIMPLIFIED};
use crate::raster::Raster;
use crate::render::Renderer;
use crate::synthesis::{synthesize_blocks, BlockArtifact, BlockRecord, BlockStatus, SynthesisRun};
use crate::text_regions::{load_text_regions, merge_adjacent_regions, TextRegion};
use crate::tree_bleu::tree_bleu;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

/// File names inside a run directory.
#[derive(Clone, Debug)]
pub struct RunDir(PathBuf);

impl RunDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self(path.into())
    }
    pub fn path(&self) -> &Path {
        &self.0
    }
    pub fn blocks_json(&self) -> PathBuf {
        self.0.join("blocks.json")
    }
    pub fn split_tree_json(&self) -> PathBuf {
        self.0.join("split_tree.json")
    }
    pub fn overlay_png(&self) -> PathBuf {
        self.0.join("overlay.png")
    }
    pub fn text_regions_json(&self) -> PathBuf {
        self.0.join("text_regions.json")
    }
    pub fn block_png(&self, i: usize) -> PathBuf {
        self.0.join("blocks").join(format!("{i}.png"))
    }
    pub fn block_html(&self, i: usize) -> PathBuf {
        self.0.join("blocks").join(format!("{i}.html"))
    }
    pub fn block_fragment(&self, i: usize) -> PathBuf {
        self.0.join("blocks").join(format!("{i}.fragment.html"))
    }
    pub fn synthesis_json(&self) -> PathBuf {
        self.0.join("synthesis.json")
    }
    pub fn assembled(&self, s: Strategy) -> PathBuf {
        self.0.join(format!("{}.html", s.file_stem()))
    }
    pub fn screenshot(&self, s: Strategy) -> PathBuf {
        self.0.join("screenshots").join(format!("{}.png", s.file_stem()))
    }
    pub fn selected_html(&self) -> PathBuf {
        self.0.join("selected.html")
    }
    pub fn verify_report_json(&self) -> PathBuf {
        self.0.join("verify_report.json")
    }
    pub fn report_json(&self) -> PathBuf {
        self.0.join("report.json")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), std::io::Error> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_text(path: &Path, hint: &str) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Usage(format!("cannot read {}: {e}; {hint}", path.display())))
}

pub fn load_design(path: &Path) -> Result<Raster, PipelineError> {
    Raster::load(path).map_err(|e| PipelineError::stage("load", e))
}

/// OCR regions from `ocr.regions_path`, merged, plus the digest of the
/// source file.
pub fn load_ocr_regions(
    cfg: &PipelineConfig,
    canvas: (u32, u32),
) -> Result<(Vec<TextRegion>, Option<String>), PipelineError> {
    let Some(path) = &cfg.ocr.regions_path else {
        log::warn!("ocr.regions_path is not set; dividing without text regions");
        return Ok((Vec::new(), None));
    };
    let bytes = std::fs::read(path).map_err(|e| PipelineError::stage("divide", format!("{}: {e}", path.display())))?;
    let text = String::from_utf8_lossy(&bytes);
    let regions = load_text_regions(&text, canvas).map_err(|e| PipelineError::stage("divide", e))?;
    Ok((merge_adjacent_regions(&regions, cfg.ocr.merge_gap), Some(sha256_hex(&bytes))))
}

pub struct DivideOutcome {
    pub division: DivisionResult,
    pub text_regions: Vec<TextRegion>,
    pub text_regions_digest: Option<String>,
}

pub fn divide_stage(cfg: &PipelineConfig, design: &Raster, dir: &RunDir) -> Result<DivideOutcome, PipelineError> {
    let io = |e: std::io::Error| PipelineError::stage("divide", e);
    let (text_regions, text_regions_digest) = load_ocr_regions(cfg, design.dims())?;
    let division = divide(design, &text_regions, &cfg.divider);

    let mut blocks = serde_json::to_string(&BlocksFile::from(&division)).expect("serializable");
    blocks.push('\n');
    write_file(&dir.blocks_json(), blocks.as_bytes()).map_err(io)?;
    write_json(&dir.split_tree_json(), &division.split_tree).map_err(io)?;
    write_json(&dir.text_regions_json(), &text_regions).map_err(io)?;
    write_file(&dir.overlay_png(), &render_debug_overlay(design, &division).to_png_bytes()).map_err(io)?;
    Ok(DivideOutcome { division, text_regions, text_regions_digest })
}

pub fn load_blocks(dir: &RunDir) -> Result<BlocksFile, PipelineError> {
    let text = read_text(&dir.blocks_json(), "run the divide stage first")?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Usage(format!("{}: {e}", dir.blocks_json().display())))
}

pub fn synthesize_stage(
    cfg: &PipelineConfig,
    client: &ChatClient,
    design: &Raster,
    blocks: &BlocksFile,
    dir: &RunDir,
) -> Result<SynthesisRun, PipelineError> {
    if blocks.canvas != [design.width(), design.height()] {
        return Err(PipelineError::Usage(format!(
            "blocks.json canvas {:?} does not match the design {:?}",
            blocks.canvas,
            design.dims()
        )));
    }
    let run = synthesize_blocks(client, design, &blocks.blocks, &cfg.synthesis_options())
        .map_err(|e| PipelineError::stage("synthesize", e))?;
    let io = |e: std::io::Error| PipelineError::stage("synthesize", e);
    for a in &run.artifacts {
        write_file(&dir.block_png(a.index), &a.image.to_png_bytes()).map_err(io)?;
        write_file(&dir.block_html(a.index), a.html.source().as_bytes()).map_err(io)?;
        write_file(&dir.block_fragment(a.index), a.body_fragment.as_bytes()).map_err(io)?;
    }
    write_json(&dir.synthesis_json(), &run.records).map_err(io)?;
    Ok(run)
}

/// Rebuilds block artifacts from a run directory.
pub fn load_artifacts(dir: &RunDir, design: &Raster) -> Result<Vec<BlockArtifact>, PipelineError> {
    let blocks = load_blocks(dir)?;
    if blocks.blocks.is_empty() {
        return Err(PipelineError::Usage("blocks.json lists no blocks".into()));
    }
    blocks
        .blocks
        .iter()
        .enumerate()
        .map(|(index, &bbox)| {
            let hint = "run the synthesize stage first";
            let body_fragment = read_text(&dir.block_fragment(index), hint)?;
            let html = HtmlDocument::parse(read_text(&dir.block_html(index), hint)?)
                .map_err(|e| PipelineError::Usage(format!("{}: {e}", dir.block_html(index).display())))?;
            let image = design.crop(&bbox).map_err(|e| PipelineError::Usage(e.to_string()))?;
            Ok(BlockArtifact { index, bbox, image, html, body_fragment })
        })
        .collect()
}

pub struct AssembleOutcome {
    pub aps: HtmlDocument,
    pub ms: Option<HtmlDocument>,
    pub ms_skip_reason: Option<String>,
}

impl AssembleOutcome {
    pub fn candidates(&self) -> Vec<AssemblyCandidate> {
        let mut out = vec![AssemblyCandidate::new(Strategy::Aps, self.aps.clone())];
        out.extend(self.ms.clone().map(|ms| AssemblyCandidate::new(Strategy::Ms, ms)));
        out
    }
}

/// APS always; MS only when its prompt fits the context budget. An MS
/// failure is recorded and does not fail the stage.
pub fn assemble_stage(
    cfg: &PipelineConfig,
    client: &ChatClient,
    design: &Raster,
    artifacts: &[BlockArtifact],
    dir: &RunDir,
) -> Result<AssembleOutcome, PipelineError> {
    if artifacts.is_empty() {
        return Err(PipelineError::Usage("no block fragments to assemble".into()));
    }
    let io = |e: std::io::Error| PipelineError::stage("assemble", e);
    let aps = assemble_absolute(artifacts, design.dims()).map_err(|e| PipelineError::stage("assemble", e))?;
    write_file(&dir.assembled(Strategy::Aps), aps.source().as_bytes()).map_err(io)?;

    let (ms, ms_skip_reason) = match assemble_mllm(client, design, artifacts, &cfg.assembly_options()) {
        Ok(doc) => (Some(doc), None),
        Err(e @ AssemblyError::ContextOverflow { .. }) => {
            log::info!("skipping model-based assembly: {e}");
            (None, Some(format!("context budget: {e}")))
        }
        Err(e) => {
            log::warn!("model-based assembly failed: {e}");
            (None, Some(format!("model-based assembly failed: {e}")))
        }
    };
    let ms_path = dir.assembled(Strategy::Ms);
    match &ms {
        Some(doc) => write_file(&ms_path, doc.source().as_bytes()).map_err(io)?,
        None if ms_path.exists() => std::fs::remove_file(&ms_path).map_err(io)?,
        None => {}
    }
    Ok(AssembleOutcome { aps, ms, ms_skip_reason })
}

pub fn load_candidates(dir: &RunDir) -> Result<Vec<AssemblyCandidate>, PipelineError> {
    let mut out = Vec::new();
    for strategy in [Strategy::Aps, Strategy::Ms] {
        let path = dir.assembled(strategy);
        if strategy == Strategy::Ms && !path.exists() {
            continue;
        }
        let doc = HtmlDocument::parse(read_text(&path, "run the assemble stage first")?)
            .map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?;
        out.push(AssemblyCandidate::new(strategy, doc));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyWeights {
    pub mae: f64,
    pub clip_sim: f64,
}

impl Default for VerifyWeights {
    fn default() -> Self {
        Self { mae: VERIFY_MAE_WEIGHT, clip_sim: VERIFY_SIM_WEIGHT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub strategy: Strategy,
    pub html_digest: String,
    pub verify: Option<VerifyReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReportFile {
    pub weights: VerifyWeights,
    pub candidates: Vec<CandidateScore>,
    pub winner: Strategy,
}

impl VerifyReportFile {
    pub fn from_selection(sel: &Selection) -> Self {
        let candidates = sel
            .candidates
            .iter()
            .map(|c| CandidateScore {
                strategy: c.strategy,
                html_digest: sha256_hex(c.html.source().as_bytes()),
                verify: c.verify,
                error: sel.failures.iter().find(|(s, _)| *s == c.strategy).map(|(_, e)| e.clone()),
            })
            .collect();
        Self { weights: VerifyWeights::default(), candidates, winner: sel.best().strategy }
    }
}

pub fn verify_stage(
    renderer: &dyn Renderer,
    embedder: &dyn Embedder,
    design: &Raster,
    candidates: Vec<AssemblyCandidate>,
    dir: &RunDir,
) -> Result<Selection, PipelineError> {
    let selection = select_best(candidates, design, renderer, embedder).map_err(|e| PipelineError::stage("verify", e))?;
    let io = |e: std::io::Error| PipelineError::stage("verify", e);
    for c in &selection.candidates {
        if let Some(shot) = &c.screenshot {
            write_file(&dir.screenshot(c.strategy), &shot.to_png_bytes()).map_err(io)?;
        }
    }
    write_file(&dir.selected_html(), selection.best().html.source().as_bytes()).map_err(io)?;
    write_json(&dir.verify_report_json(), &VerifyReportFile::from_selection(&selection)).map_err(io)?;
    Ok(selection)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    /// Finished, but some blocks are placeholders.
    Partial,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => EXIT_OK,
            RunStatus::Partial => EXIT_PARTIAL,
            RunStatus::Failed => EXIT_STAGE,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InputDigests {
    /// Digest of the decoded design pixels.
    pub design: String,
    pub design_size: [u32; 2],
    pub text_regions: Option<String>,
    pub prompts: BTreeMap<String, String>,
}

/// Values that legitimately change between identical runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Runtime {
    pub started_unix_ms: u128,
    pub stage_ms: BTreeMap<String, u128>,
    pub cache: CacheStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: InputDigests,
    pub block_count: usize,
    pub blocks: Vec<BlockRecord>,
    pub ms_skip_reason: Option<String>,
    pub verify: Option<VerifyReportFile>,
    pub selected: Option<Strategy>,
    pub runtime: Runtime,
}

impl RunReport {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            status: RunStatus::Failed,
            failed_stage: None,
            error: None,
            seed: cfg.seed,
            config: cfg.clone(),
            inputs: InputDigests::default(),
            block_count: 0,
            blocks: Vec::new(),
            ms_skip_reason: None,
            verify: None,
            selected: None,
            runtime: Runtime::default(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    /// The report without its `runtime` section.
    pub fn stable_json(&self) -> serde_json::Value {
        strip_runtime(self.to_json())
    }
}

pub fn strip_runtime(mut report: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = report.as_object_mut() {
        obj.remove("runtime");
    }
    report
}

pub fn prompt_versions() -> BTreeMap<String, String> {
    [BLOCK_GENERATION, BLOCK_GENERATION_SIMPLIFIED, ASSEMBLY]
        .into_iter()
        .map(|t| (t.name.to_string(), t.version_id()))
        .collect()
}

/// 16 hex characters identifying (design pixels, config minus output_dir).
pub fn run_id(cfg: &PipelineConfig, design: &Raster) -> String {
    let mut keyed = cfg.clone();
    keyed.output_dir = PathBuf::new();
    let mut h = Sha256::new();
    h.update(design.digest().as_bytes());
    h.update(serde_json::to_vec(&keyed).expect("serializable"));
    hex::encode(h.finalize())[..16].to_string()
}

pub struct RunOutcome {
    pub run_dir: RunDir,
    pub report: RunReport,
}

fn timed<T>(rt: &mut Runtime, stage: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    rt.stage_ms.insert(stage.to_string(), t.elapsed().as_millis());
    out
}

/// Divide, synthesize, assemble and select into
/// `<output_dir>/<run_id>/`. A stage failure still writes `report.json`
/// naming the stage before the error is returned.
pub fn run_pipeline(cfg: &PipelineConfig, design_path: &Path) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let design = load_design(design_path)?;
    let client = cfg.build_client()?;
    let renderer = cfg.build_renderer()?;
    let embedder = cfg.build_embedder()?;

    let dir = RunDir::new(cfg.output_dir.join(run_id(cfg, &design)));
    std::fs::create_dir_all(dir.path()).map_err(|e| PipelineError::stage("load", e))?;

    let mut report = RunReport::new(cfg);
    report.runtime.started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    report.inputs.design = design.digest();
    report.inputs.design_size = [design.width(), design.height()];
    report.inputs.prompts = prompt_versions();

    let result = run_stages(cfg, &client, renderer.as_ref(), embedder.as_ref(), &design, &dir, &mut report);
    report.runtime.cache = client.cache_stats();
    if let Err(PipelineError::Stage { stage, message }) = &result {
        report.status = RunStatus::Failed;
        report.failed_stage = Some(stage.to_string());
        report.error = Some(message.clone());
    }
    write_json(&dir.report_json(), &report).map_err(|e| PipelineError::stage("report", e))?;
    result.map(|()| RunOutcome { run_dir: dir, report })
}

fn run_stages(
    cfg: &PipelineConfig,
    client: &ChatClient,
    renderer: &dyn Renderer,
    embedder: &dyn Embedder,
    design: &Raster,
    dir: &RunDir,
    report: &mut RunReport,
) -> Result<(), PipelineError> {
    let divided = timed(&mut report.runtime, "divide", || divide_stage(cfg, design, dir))?;
    report.inputs.text_regions = divided.text_regions_digest.clone();
    report.block_count = divided.division.blocks.len();

    let blocks = BlocksFile::from(&divided.division);
    let synthesized = timed(&mut report.runtime, "synthesize", || synthesize_stage(cfg, client, design, &blocks, dir))?;
    report.blocks = synthesized.records.clone();

    let assembled =
        timed(&mut report.runtime, "assemble", || assemble_stage(cfg, client, design, &synthesized.artifacts, dir))?;
    report.ms_skip_reason = assembled.ms_skip_reason.clone();

    let selection =
        timed(&mut report.runtime, "verify", || verify_stage(renderer, embedder, design, assembled.candidates(), dir))?;
    report.verify = Some(VerifyReportFile::from_selection(&selection));
    report.selected = Some(selection.best().strategy);

    let partial = synthesized.records.iter().any(|r| r.status == BlockStatus::Placeholder);
    report.status = if partial { RunStatus::Partial } else { RunStatus::Success };
    Ok(())
}

/// One (candidate page, reference page, design image) triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSample {
    pub candidate: PathBuf,
    pub reference: PathBuf,
    pub design: PathBuf,
}

/// Per-sample metrics; a metric that could not be computed is null and
/// the reason is listed in `errors`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub candidate: PathBuf,
    pub reference: PathBuf,
    pub design: PathBuf,
    pub tree_bleu: Option<f64>,
    pub mae: Option<f64>,
    pub clip_sim: Option<f64>,
    pub verify_score: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { n: values.len(), mean, std: var.sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub samples: Vec<SampleMetrics>,
    pub aggregate: BTreeMap<String, Option<Summary>>,
}

pub fn eval_sample(sample: &EvalSample, renderer: &dyn Renderer, embedder: &dyn Embedder) -> SampleMetrics {
    let mut m = SampleMetrics {
        candidate: sample.candidate.clone(),
        reference: sample.reference.clone(),
        design: sample.design.clone(),
        tree_bleu: None,
        mae: None,
        clip_sim: None,
        verify_score: None,
        errors: Vec::new(),
    };
    let dom = |p: &Path| -> Result<_, String> {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        parse_dom(&text).map_err(|e| format!("{}: {e}", p.display()))
    };
    match (dom(&sample.candidate), dom(&sample.reference)) {
        (Ok(c), Ok(r)) => m.tree_bleu = Some(tree_bleu(&c, &r)),
        (c, r) => m.errors.extend([c.err(), r.err()].into_iter().flatten().map(|e| format!("tree_bleu: {e}"))),
    }

    let pair = Raster::load(&sample.design).map_err(|e| format!("design: {e}")).and_then(|design| {
        let shot = renderer.render(&sample.candidate, design.dims()).map_err(|e| format!("render: {e}"))?;
        Ok(normalize_pair(&design, &shot))
    });
    match pair {
        Ok((design, shot)) => {
            match mae(&design, &shot) {
                Ok(v) => m.mae = Some(v),
                Err(e) => m.errors.push(format!("mae: {e}")),
            }
            match embedding_similarity(embedder, &design, &shot) {
                Ok(v) => m.clip_sim = Some(v),
                Err(e) => m.errors.push(format!("clip_sim: {e}")),
            }
        }
        Err(e) => m.errors.push(e),
    }
    if let (Some(a), Some(s)) = (m.mae, m.clip_sim) {
        m.verify_score = verify_score(a, s).ok();
    }
    m
}

pub fn eval_samples(samples: &[EvalSample], renderer: &dyn Renderer, embedder: &dyn Embedder) -> MetricsDocument {
    let samples: Vec<SampleMetrics> = samples.iter().map(|s| eval_sample(s, renderer, embedder)).collect();
    let column = |f: fn(&SampleMetrics) -> Option<f64>| -> Vec<f64> { samples.iter().filter_map(f).collect() };
    let aggregate = [
        ("tree_bleu", Summary::of(&column(|s| s.tree_bleu))),
        ("mae", Summary::of(&column(|s| s.mae))),
        ("clip_sim", Summary::of(&column(|s| s.clip_sim))),
        ("verify_score", Summary::of(&column(|s| s.verify_score))),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    MetricsDocument { samples, aggregate }
}

/// Evaluates the samples and writes `metrics.json` to `out`.
pub fn eval_command(cfg: &PipelineConfig, samples: &[EvalSample], out: &Path) -> Result<MetricsDocument, PipelineError> {
    let renderer = cfg.build_renderer()?;
    let embedder = cfg.build_embedder()?;
    let doc = eval_samples(samples, renderer.as_ref(), embedder.as_ref());
    write_json(out, &doc).map_err(|e| PipelineError::stage("eval", e))?;
    Ok(doc)
}

pub fn divide_command(cfg: &PipelineConfig, design_path: &Path, dir: &RunDir) -> Result<DivideOutcome, PipelineError> {
    let design = load_design(design_path)?;
    divide_stage(cfg, &design, dir)
}

pub fn synthesize_command(cfg: &PipelineConfig, design_path: &Path, dir: &RunDir) -> Result<SynthesisRun, PipelineError> {
    let design = load_design(design_path)?;
    let blocks = load_blocks(dir)?;
    let client = cfg.build_client()?;
    synthesize_stage(cfg, &client, &design, &blocks, dir)
}

pub fn assemble_command(cfg: &PipelineConfig, design_path: &Path, dir: &RunDir) -> Result<AssembleOutcome, PipelineError> {
    let design = load_design(design_path)?;
    let artifacts = load_artifacts(dir, &design)?;
    let client = cfg.build_client()?;
    assemble_stage(cfg, &client, &design, &artifacts, dir)
}

pub fn verify_command(cfg: &PipelineConfig, design_path: &Path, dir: &RunDir) -> Result<Selection, PipelineError> {
    let design = load_design(design_path)?;
    let candidates = load_candidates(dir)?;
    let renderer = cfg.build_renderer()?;
    let embedder = cfg.build_embedder()?;
    verify_stage(renderer.as_ref(), embedder.as_ref(), &design, candidates, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn summary_statistics() {
        assert_eq!(Summary::of(&[]), None);
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.n, s.mean, s.std), (2, 2.0, 1.0));
    }

    #[test]
    fn run_id_ignores_output_dir() {
        let design = Raster::filled(4, 4, [255; 3]);
        let mut a = PipelineConfig::default();
        let id = run_id(&a, &design);
        assert_eq!(id.len(), 16);
        a.output_dir = "elsewhere".into();
        assert_eq!(run_id(&a, &design), id);
        a.divider.min_line_distance = 10;
        assert_ne!(run_id(&a, &design), id);
    }

    #[test]
    fn assemble_without_fragments_is_a_usage_error() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::new(tmp.path());
        let design = Raster::filled(10, 10, [255; 3]);
        assert!(matches!(load_artifacts(&dir, &design), Err(PipelineError::Usage(_))));

        let blocks = BlocksFile { canvas: [10, 10], blocks: vec![BBox::canvas(10, 10).unwrap()] };
        std::fs::write(dir.blocks_json(), serde_json::to_string(&blocks).unwrap()).unwrap();
        assert!(matches!(load_artifacts(&dir, &design), Err(PipelineError::Usage(_))));

        let client = ChatClient::new(Box::new(crate::client::MockBackend::new(None)));
        let cfg = PipelineConfig::default();
        assert!(matches!(assemble_stage(&cfg, &client, &design, &[], &dir), Err(PipelineError::Usage(_))));
    }

    #[test]
    fn missing_design_fails_before_any_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.output_dir = tmp.path().join("runs");
        let err = run_pipeline(&cfg, &tmp.path().join("absent.png")).err().unwrap();
        assert!(matches!(err, PipelineError::Stage { stage: "load", .. }));
        assert!(!cfg.output_dir.exists());
    }
}
