//! TreeBLEU: recall of the reference's 1-height subtrees in the candidate.
//!
//! A 1-height subtree is a node plus the ordered tags of its element
//! children. Signatures are compared as sets.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::html::DomTree;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SubtreeSignature {
    pub parent_tag: String,
    pub child_tags: Vec<String>,
}

impl SubtreeSignature {
    pub fn new(parent: &str, children: &[&str]) -> Self {
        Self { parent_tag: parent.to_string(), child_tags: children.iter().map(|c| c.to_string()).collect() }
    }
}

pub fn one_height_subtrees(tree: &DomTree) -> BTreeSet<SubtreeSignature> {
    tree.nodes()
        .iter()
        .filter(|n| !n.children.is_empty())
        .map(|n| SubtreeSignature {
            parent_tag: n.tag.clone(),
            child_tags: n.children.iter().map(|&c| tree.node(c).tag.clone()).collect(),
        })
        .collect()
}

/// `|S(candidate) ∩ S(reference)| / |S(reference)|`. An empty reference set
/// scores 1 against an empty candidate set and 0 otherwise.
pub fn tree_bleu(candidate: &DomTree, reference: &DomTree) -> f64 {
    let cand = one_height_subtrees(candidate);
    let reference = one_height_subtrees(reference);
    if reference.is_empty() {
        return if cand.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = reference.intersection(&cand).count();
    hits as f64 / reference.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::parse_dom;

    #[test]
    fn enumerates_head_and_body() {
        let t = parse_dom("<html><body><p>x</p></body></html>").unwrap();
        let s = one_height_subtrees(&t);
        let expected: BTreeSet<_> =
            [SubtreeSignature::new("html", &["head", "body"]), SubtreeSignature::new("body", &["p"])].into();
        assert_eq!(s, expected);
    }

    #[test]
    fn single_node_has_no_signatures() {
        assert!(one_height_subtrees(&DomTree::new("html")).is_empty());
    }

    #[test]
    fn duplicate_children_kept_in_order() {
        let mut t = DomTree::new("html");
        let body = t.add_child(0, "body");
        let div = t.add_child(body, "div");
        t.add_child(div, "p");
        t.add_child(div, "p");
        let expected: BTreeSet<_> = [
            SubtreeSignature::new("html", &["body"]),
            SubtreeSignature::new("body", &["div"]),
            SubtreeSignature::new("div", &["p", "p"]),
        ]
        .into();
        assert_eq!(one_height_subtrees(&t), expected);
    }

    #[test]
    fn worked_example_is_one_third() {
        let mut cand = DomTree::new("html");
        let b = cand.add_child(0, "body");
        let d = cand.add_child(b, "div");
        cand.add_child(d, "p");
        cand.add_child(d, "p");

        let mut reference = DomTree::new("html");
        reference.add_child(0, "head");
        let b = reference.add_child(0, "body");
        let d = reference.add_child(b, "div");
        reference.add_child(d, "p");

        assert_eq!(tree_bleu(&cand, &reference), 1.0 / 3.0);
        assert_eq!(tree_bleu(&reference, &reference), 1.0);
    }

    #[test]
    fn disjoint_and_empty_cases() {
        let a = parse_dom("<html><body><table><tr><td>1</td></tr></table></body></html>").unwrap();
        let mut b = DomTree::new("svg");
        b.add_child(0, "g");
        assert_eq!(tree_bleu(&b, &a), 0.0);
        let leaf = DomTree::new("html");
        assert_eq!(tree_bleu(&leaf, &leaf), 1.0);
        assert_eq!(tree_bleu(&a, &leaf), 0.0);
    }

    #[test]
    fn child_order_matters() {
        let a = parse_dom("<div><p></p><span></span></div>").unwrap();
        let b = parse_dom("<div><span></span><p></p></div>").unwrap();
        assert!(tree_bleu(&a, &b) < 1.0);
    }
}
