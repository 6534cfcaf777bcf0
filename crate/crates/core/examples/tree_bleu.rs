//! Structural similarity between two HTML documents.
//!
//!     cargo run --example tree_bleu -- [candidate.html reference.html]

use blockwise::html::parse_dom;
use blockwise::tree_bleu::{one_height_subtrees, tree_bleu};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (cand, reference) = match args.as_slice() {
        [c, r] => (std::fs::read_to_string(c)?, std::fs::read_to_string(r)?),
        _ => (
            "<html><body><div><p>a</p><p>b</p></div></body></html>".to_string(),
            "<html><body><div><p>a</p></div><ul><li>x</li></ul></body></html>".to_string(),
        ),
    };
    let (c, r) = (parse_dom(&cand)?, parse_dom(&reference)?);
    for s in one_height_subtrees(&r) {
        println!("reference subtree {} > {:?}", s.parent_tag, s.child_tags);
    }
    println!("TreeBLEU = {:.4}", tree_bleu(&c, &r));
    Ok(())
}
