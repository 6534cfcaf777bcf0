use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use blockwise::config::{ChatBackendKind, PipelineConfig};
use blockwise::error::PipelineError;
use blockwise::pipeline::{self, EvalSample, RunDir, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, EXIT_STAGE};
use blockwise::prompt::PromptVariant;
use blockwise::synthesis::BlockStatus;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Design image to HTML: divide, synthesize, assemble, verify, evaluate")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides client.backend.
    #[arg(long, global = true)]
    backend: Option<ChatBackendKind>,
    /// Overrides prompt.variant.
    #[arg(long, global = true)]
    prompt_variant: Option<PromptVariant>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    design: PathBuf,
    /// Run directory shared by the stage commands.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// All stages into <out or output_dir>/<run id>/.
    Run {
        #[arg(long)]
        design: PathBuf,
        /// Overrides output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blocks JSON, split tree and overlay.
    Divide(StageArgs),
    /// Per-block HTML from an existing blocks.json.
    Synthesize(StageArgs),
    /// APS and MS pages from existing block fragments.
    Assemble(StageArgs),
    /// Render, score and select among the assembled pages.
    Verify(StageArgs),
    /// TreeBLEU, MAE, similarity and verify score into metrics.json.
    Eval {
        #[arg(long, requires_all = ["reference", "design"], conflicts_with = "manifest")]
        candidate: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        design: Option<PathBuf>,
        /// JSON array of {"candidate", "reference", "design"} records.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(b) = cli.backend {
        cfg.client.backend = b;
    }
    if let Some(v) = cli.prompt_variant {
        cfg.prompt.variant = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Config(_) | PipelineError::Usage(_) => EXIT_CONFIG,
        PipelineError::Stage { .. } => EXIT_STAGE,
    }
}

fn read_manifest(path: &Path) -> anyhow::Result<Vec<EvalSample>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn execute(cli: &Cli, cfg: PipelineConfig) -> Result<i32, PipelineError> {
    match &cli.command {
        Command::Run { design, out } => {
            let mut cfg = cfg;
            if let Some(out) = out {
                cfg.output_dir = out.clone();
            }
            let outcome = pipeline::run_pipeline(&cfg, design)?;
            let r = &outcome.report;
            println!("run directory: {}", outcome.run_dir.path().display());
            println!("blocks: {}", r.block_count);
            if let Some(s) = r.selected {
                println!("selected: {s}");
            }
            if let Some(reason) = &r.ms_skip_reason {
                println!("MS skipped: {reason}");
            }
            Ok(r.status.exit_code())
        }
        Command::Divide(a) => {
            let out = pipeline::divide_command(&cfg, &a.design, &RunDir::new(&a.out))?;
            println!("{} blocks -> {}", out.division.blocks.len(), a.out.join("blocks.json").display());
            Ok(EXIT_OK)
        }
        Command::Synthesize(a) => {
            let run = pipeline::synthesize_command(&cfg, &a.design, &RunDir::new(&a.out))?;
            let failed = run.records.iter().filter(|r| r.status == BlockStatus::Placeholder).count();
            println!("{} blocks synthesized, {failed} placeholders", run.records.len());
            Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Assemble(a) => {
            let out = pipeline::assemble_command(&cfg, &a.design, &RunDir::new(&a.out))?;
            println!("APS written");
            match (&out.ms, &out.ms_skip_reason) {
                (Some(_), _) => println!("MS written"),
                (None, Some(reason)) => println!("MS skipped: {reason}"),
                (None, None) => {}
            }
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            let sel = pipeline::verify_command(&cfg, &a.design, &RunDir::new(&a.out))?;
            for c in &sel.candidates {
                match c.verify {
                    Some(v) => println!("{}: mae={:.3} sim={:.4} verify={:.4}", c.strategy, v.mae, v.clip_sim, v.verify_score),
                    None => println!("{}: not scored", c.strategy),
                }
            }
            println!("selected: {}", sel.best().strategy);
            Ok(EXIT_OK)
        }
        Command::Eval { candidate, reference, design, manifest, out } => {
            let samples = match (manifest, candidate, reference, design) {
                (Some(m), ..) => read_manifest(m).map_err(|e| PipelineError::Usage(format!("{e:#}")))?,
                (None, Some(c), Some(r), Some(d)) => {
                    vec![EvalSample { candidate: c.clone(), reference: r.clone(), design: d.clone() }]
                }
                _ => {
                    return Err(PipelineError::Usage(
                        "eval needs --manifest or all of --candidate, --reference, --design".into(),
                    ))
                }
            };
            let doc = pipeline::eval_command(&cfg, &samples, out)?;
            println!("{}", serde_json::to_string_pretty(&doc.aggregate).expect("serializable"));
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match load_config(&cli).and_then(|cfg| execute(&cli, cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
