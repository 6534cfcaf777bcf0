//! HTML documents and their tag-only DOM trees.

use std::sync::OnceLock;

use regex::Regex;
use scraper::{ElementRef, Html, Node, Selector};
use serde::Serialize;

use crate::error::HtmlError;

/// The fixed page every block is generated into.
pub const SKELETON: &str = include_str!("../prompts/skeleton.html");

/// Placeholder in [`SKELETON`] that generated content replaces.
pub const SKELETON_SLOT: &str = "<!-- Your task is to fill this area -->";

/// Puts a body fragment into the fixed page skeleton.
pub fn wrap_in_skeleton(fragment: &str) -> String {
    SKELETON.replacen(SKELETON_SLOT, fragment, 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DomNode {
    pub tag: String,
    pub children: Vec<usize>,
}

/// Ordered tree of lowercase tag names. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DomTree {
    nodes: Vec<DomNode>,
}

impl DomTree {
    pub fn new(root_tag: &str) -> Self {
        Self { nodes: vec![DomNode { tag: root_tag.to_ascii_lowercase(), children: Vec::new() }] }
    }

    /// Appends a child and returns its id.
    pub fn add_child(&mut self, parent: usize, tag: &str) -> usize {
        let id = self.nodes.len();
        self.nodes.push(DomNode { tag: tag.to_ascii_lowercase(), children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }

    pub const ROOT: usize = 0;

    pub fn node(&self, id: usize) -> &DomNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[DomNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_tag(&self) -> &str {
        &self.nodes[0].tag
    }

    /// Compact `tag(child, child(...))` rendering, handy in tests and logs.
    pub fn to_sexpr(&self) -> String {
        fn go(t: &DomTree, id: usize, out: &mut String) {
            let n = t.node(id);
            out.push_str(&n.tag);
            if !n.children.is_empty() {
                out.push('(');
                for (i, &c) in n.children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    go(t, c, out);
                }
                out.push(')');
            }
        }
        let mut s = String::new();
        go(self, 0, &mut s);
        s
    }
}

fn has_start_tag(source: &str) -> bool {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"<[A-Za-z]").unwrap()).is_match(source)
}

fn build_tree(el: ElementRef<'_>, tree: &mut DomTree, parent: usize) {
    for child in el.children() {
        if let Node::Element(e) = child.value() {
            let id = tree.add_child(parent, e.name());
            let child_el = ElementRef::wrap(child).expect("element node");
            build_tree(child_el, tree, id);
        }
    }
}

fn tree_of(doc: &Html) -> DomTree {
    let root = doc.root_element();
    let mut tree = DomTree::new(root.value().name());
    build_tree(root, &mut tree, DomTree::ROOT);
    tree
}

/// Lenient HTML5 parse into a tag tree. Text, comments and attributes are
/// dropped; `script` and `style` stay as childless nodes.
pub fn parse_dom(html: &str) -> Result<DomTree, HtmlError> {
    if !has_start_tag(html) {
        return Err(HtmlError::NoElements);
    }
    Ok(tree_of(&Html::parse_document(html)))
}

/// An HTML source string together with its parsed tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtmlDocument {
    source: String,
    dom: DomTree,
}

impl HtmlDocument {
    pub fn parse(source: impl Into<String>) -> Result<Self, HtmlError> {
        let source = source.into();
        let dom = parse_dom(&source)?;
        Ok(Self { source, dom })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dom(&self) -> &DomTree {
        &self.dom
    }

    /// Serialized children of the `body` element.
    pub fn body_fragment(&self) -> String {
        let doc = Html::parse_document(&self.source);
        let body = Selector::parse("body").expect("static selector");
        doc.select(&body).next().map(|b| b.inner_html().trim().to_string()).unwrap_or_default()
    }

    pub fn into_source(self) -> String {
        self.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_is_inserted() {
        let t = parse_dom("<html><body><p>x</p></body></html>").unwrap();
        assert_eq!(t.to_sexpr(), "html(head, body(p))");
    }

    #[test]
    fn bare_div_recovers() {
        assert_eq!(parse_dom("<div>").unwrap().to_sexpr(), "html(head, body(div))");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_dom(""), Err(HtmlError::NoElements));
        assert_eq!(parse_dom("Sorry, I cannot help."), Err(HtmlError::NoElements));
    }

    #[test]
    fn drops_text_comments_attributes_keeps_script() {
        let t = parse_dom("<HTML><head><script>var a = '<p>';</script><style>p{}</style></head><body class=x><!-- c --><DIV id=1>t<Span>s</Span></DIV></body></html>").unwrap();
        assert_eq!(t.to_sexpr(), "html(head(script, style), body(div(span)))");
    }

    #[test]
    fn skeleton_has_one_body() {
        let doc = HtmlDocument::parse(wrap_in_skeleton("<div class=\"p-0\">hi</div>")).unwrap();
        assert_eq!(doc.dom().to_sexpr(), "html(head(meta, meta, script, link), body(div))");
        assert_eq!(doc.body_fragment(), "<div class=\"p-0\">hi</div>");
    }

    #[test]
    fn fragment_rewrap_is_stable() {
        let src = wrap_in_skeleton("<div><p>a<b>b</p><ul><li>1<li>2</ul>");
        let doc = HtmlDocument::parse(src).unwrap();
        let again = HtmlDocument::parse(wrap_in_skeleton(&doc.body_fragment())).unwrap();
        assert_eq!(again.dom(), doc.dom());
        assert_eq!(again.body_fragment(), doc.body_fragment());
    }
}
