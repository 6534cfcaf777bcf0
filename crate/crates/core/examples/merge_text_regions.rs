//! Merges nearby OCR boxes and shows how they keep divider lines out of text.

use blockwise::divider::{divide, DividerParams};
use blockwise::geometry::BBox;
use blockwise::raster::{Raster, WHITE};
use blockwise::text_regions::{merge_adjacent_regions, TextRegion, DEFAULT_MERGE_GAP};

fn main() -> anyhow::Result<()> {
    let words = [(100, 470, 120, 20), (230, 470, 90, 20), (100, 505, 200, 20)];
    let regions: Vec<TextRegion> =
        words.iter().map(|&(x, y, w, h)| TextRegion::new(BBox::new(x, y, w, h).unwrap())).collect();
    let merged = merge_adjacent_regions(&regions, DEFAULT_MERGE_GAP);
    for r in &merged {
        println!("merged region {}", r.bbox);
    }

    let mut design = Raster::filled(1000, 1000, WHITE);
    design.fill_rect(&BBox::new(0, 498, 1000, 3)?, [128, 128, 128]);
    let params = DividerParams::default();
    println!("without text: {} blocks", divide(&design, &[], &params).blocks.len());
    println!("with text:    {} blocks", divide(&design, &merged, &params).blocks.len());
    Ok(())
}
