//! Writes a debug overlay with each block outlined in its own color.
//!
//!     cargo run --example overlay -- design.png overlay.png

use blockwise::divider::{divide, render_debug_overlay, DividerParams};
use blockwise::raster::Raster;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(input), Some(output)) = (args.next(), args.next()) else {
        anyhow::bail!("usage: overlay <design.png> <overlay.png>");
    };
    let design = Raster::load(&input)?;
    let result = divide(&design, &[], &DividerParams::default());
    render_debug_overlay(&design, &result).save_png(&output)?;
    println!("{} blocks outlined in {output}", result.blocks.len());
    Ok(())
}
