//! Divides a design image into blocks and prints the split tree.
//!
//!     cargo run --example divide_design -- [design.png]

use blockwise::divider::{divide, DividerParams, SplitNode};
use blockwise::geometry::BBox;
use blockwise::raster::{Raster, WHITE};

fn sample_design() -> Raster {
    let mut img = Raster::filled(1000, 1000, WHITE);
    img.fill_rect(&BBox::new(0, 500, 1000, 3).unwrap(), [128, 128, 128]);
    img.fill_rect(&BBox::new(500, 503, 3, 497).unwrap(), [128, 128, 128]);
    img
}

fn print_tree(node: &SplitNode) {
    let indent = "  ".repeat(node.depth as usize);
    match node.direction {
        Some(d) => println!("{indent}{} split {:?} at {:?}", node.region, d, node.lines),
        None => println!("{indent}{} leaf", node.region),
    }
    node.children.iter().for_each(print_tree);
}

fn main() -> anyhow::Result<()> {
    let design = match std::env::args().nth(1) {
        Some(path) => Raster::load(path)?,
        None => sample_design(),
    };
    let result = divide(&design, &[], &DividerParams::default());
    print_tree(&result.split_tree);
    for (i, b) in result.blocks.iter().enumerate() {
        println!("block {i}: {b}");
    }
    Ok(())
}
