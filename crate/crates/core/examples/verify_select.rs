//! Scores two candidate pages against a design and picks the better one,
//! using fixture screenshots and histogram embeddings.

use blockwise::assembly::{select_best, AssemblyCandidate, Strategy};
use blockwise::embedding::StubEmbedder;
use blockwise::html::HtmlDocument;
use blockwise::raster::Raster;
use blockwise::render::StubRenderer;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let renderer = StubRenderer::new(dir.path());
    let design = Raster::filled(200, 200, [30, 30, 30]);

    let mut candidates = Vec::new();
    for (strategy, shade) in [(Strategy::Aps, 40u8), (Strategy::Ms, 120)] {
        let html = HtmlDocument::parse(format!("<html><body><p>{strategy}</p></body></html>"))?;
        Raster::filled(200, 200, [shade; 3]).save_png(renderer.fixture_path(html.source().as_bytes()))?;
        candidates.push(AssemblyCandidate::new(strategy, html));
    }

    let selection = select_best(candidates, &design, &renderer, &StubEmbedder::new(None))?;
    for c in &selection.candidates {
        if let Some(v) = c.verify {
            println!("{}: mae={:.2} sim={:.4} verify={:.4}", c.strategy, v.mae, v.clip_sim, v.verify_score);
        }
    }
    println!("selected {}", selection.best().strategy);
    Ok(())
}
