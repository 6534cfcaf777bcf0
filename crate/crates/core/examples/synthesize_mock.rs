//! Generates HTML for every block with the offline mock backend.

use blockwise::client::{ChatClient, MockBackend};
use blockwise::divider::{divide, DividerParams};
use blockwise::geometry::BBox;
use blockwise::raster::{Raster, WHITE};
use blockwise::synthesis::{synthesize_blocks, SynthesisOptions};

fn main() -> anyhow::Result<()> {
    let mut design = Raster::filled(800, 800, WHITE);
    design.fill_rect(&BBox::new(0, 400, 800, 4)?, [40, 40, 40]);
    let blocks = divide(&design, &[], &DividerParams::default()).blocks;

    let client = ChatClient::new(Box::new(MockBackend::new(None)));
    let run = synthesize_blocks(&client, &design, &blocks, &SynthesisOptions::default())?;
    for (artifact, record) in run.artifacts.iter().zip(&run.records) {
        println!("block {} {} {:?}", artifact.index, artifact.bbox, record.status);
        println!("  {}", artifact.body_fragment.lines().next().unwrap_or_default());
    }
    Ok(())
}
