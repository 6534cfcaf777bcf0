//! Places block fragments absolutely and reads the geometry back.

use blockwise::assembly::{assemble_absolute, read_placements};
use blockwise::geometry::BBox;
use blockwise::raster::{Raster, WHITE};
use blockwise::synthesis::BlockArtifact;

fn main() -> anyhow::Result<()> {
    let boxes = [(0, 0, 600, 200), (0, 200, 300, 400), (300, 200, 300, 400)];
    let artifacts: Vec<BlockArtifact> = boxes
        .iter()
        .enumerate()
        .map(|(i, &(x, y, w, h))| BlockArtifact::placeholder(i, BBox::new(x, y, w, h).unwrap(), Raster::filled(1, 1, WHITE)))
        .collect();
    let page = assemble_absolute(&artifacts, (600, 600))?;
    println!("{}", page.source());
    for p in read_placements(page.source())? {
        println!("block {} declared {} styled {}", p.index, p.declared, p.styled);
    }
    Ok(())
}
