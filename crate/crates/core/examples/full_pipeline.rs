//! Runs every stage offline and prints where the artifacts went.
//!
//!     cargo run --example full_pipeline -- [design.png]

use blockwise::config::{PipelineConfig, RendererKind};
use blockwise::geometry::BBox;
use blockwise::pipeline::run_pipeline;
use blockwise::raster::{Raster, WHITE};

fn main() -> anyhow::Result<()> {
    let work = tempfile::tempdir()?;
    let design_path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let mut img = Raster::filled(1000, 1000, WHITE);
            img.fill_rect(&BBox::new(0, 500, 1000, 3)?, [128, 128, 128]);
            let path = work.path().join("design.png");
            img.save_png(&path)?;
            path
        }
    };
    let shots = work.path().join("shots");
    std::fs::create_dir_all(&shots)?;
    Raster::load(&design_path)?.save_png(shots.join("default.png"))?;

    let mut cfg = PipelineConfig::default();
    cfg.output_dir = work.path().join("runs");
    cfg.renderer.backend = RendererKind::Stub;
    cfg.renderer.stub_dir = Some(shots);
    cfg.validate()?;

    let out = run_pipeline(&cfg, &design_path)?;
    println!("status {:?}, {} blocks, selected {:?}", out.report.status, out.report.block_count, out.report.selected);
    for entry in std::fs::read_dir(out.run_dir.path())? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    Ok(())
}
