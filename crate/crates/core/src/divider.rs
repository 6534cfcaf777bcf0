//! Layout-aware division of a design raster into grid-aligned blocks.
//!
//! A region is scanned row by row for solid-colored horizontal lines. Only
//! when none qualifies is it scanned column by column. Accepted lines split
//! the region, and the pieces are divided again up to `max_depth` levels.
//! Leaves smaller than `min_block_area` are then merged into neighbors.
//!
//! Scanning details:
//!
//! * candidate lines are visited every `grid_interval` pixels, and pixels
//!   along a candidate are sampled at the same stride;
//! * the first and last `edge_ignore` pixels of a line are not sampled;
//! * a line that cuts through any text region is never accepted;
//! * consecutive solid candidates of one color form a run, and only the
//!   first candidate of a run may become a dividing line;
//! * accepted lines are at least `min_line_distance` apart, and at least
//!   that far from both edges of the region.
//!
//! Split rows and columns belong to the following (lower or right) block.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{BBox, Line, Orientation};
use crate::raster::{Raster, Rgb};
use crate::text_regions::TextRegion;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DividerParams {
    /// Stride in pixels between candidate lines and between samples on a line.
    pub grid_interval: u32,
    /// Minimum distance between accepted lines (and from region edges).
    pub min_line_distance: u32,
    /// Pixels skipped at both ends of a line when testing it.
    pub edge_ignore: u32,
    /// Maximum number of recursive split levels.
    pub max_depth: u32,
    /// Blocks below this area (px²) are merged into a neighbor.
    pub min_block_area: u64,
    /// Per-channel tolerance for "same color".
    pub color_tolerance: u8,
}

impl Default for DividerParams {
    fn default() -> Self {
        Self {
            grid_interval: 5,
            min_line_distance: 50,
            edge_ignore: 10,
            max_depth: 3,
            min_block_area: 300 * 300,
            color_tolerance: 2,
        }
    }
}

impl DividerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(format!("divider.{m}")));
        if self.grid_interval < 1 {
            return bad("grid_interval must be >= 1");
        }
        if self.min_line_distance < 1 {
            return bad("min_line_distance must be >= 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        Ok(())
    }

    fn same_color(&self, a: Rgb, b: Rgb) -> bool {
        a.iter().zip(b).all(|(x, y)| x.abs_diff(y) <= self.color_tolerance)
    }
}

/// One node of the recursive split, kept for debugging and overlays.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitNode {
    pub region: BBox,
    pub depth: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Orientation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SplitNode>,
}

impl SplitNode {
    fn collect_leaves(&self, out: &mut Vec<BBox>) {
        if self.children.is_empty() {
            out.push(self.region);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Every accepted line in the tree, depth-first.
    pub fn all_lines(&self) -> Vec<Line> {
        let mut out = Vec::new();
        self.walk_lines(&mut out);
        out
    }

    fn walk_lines(&self, out: &mut Vec<Line>) {
        if let Some(dir) = self.direction {
            for &off in &self.lines {
                out.push(Line::new(dir, off, self.region).expect("accepted lines lie inside their region"));
            }
        }
        for c in &self.children {
            c.walk_lines(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DivisionResult {
    pub canvas: (u32, u32),
    /// Blocks in reading order.
    pub blocks: Vec<BBox>,
    pub split_tree: SplitNode,
}

/// On-disk form of a division: `{"canvas": [w, h], "blocks": [[x, y, w, h], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksFile {
    pub canvas: [u32; 2],
    pub blocks: Vec<BBox>,
}

impl From<&DivisionResult> for BlocksFile {
    fn from(r: &DivisionResult) -> Self {
        Self { canvas: [r.canvas.0, r.canvas.1], blocks: r.blocks.clone() }
    }
}

/// Sample positions in `lo..hi` at `stride`, skipping `edge` pixels at each end.
fn samples(lo: u32, hi: u32, edge: u32, stride: u32) -> impl Iterator<Item = u32> {
    let start = lo.saturating_add(edge);
    let end = hi.saturating_sub(edge);
    (start..end).step_by(stride as usize)
}

/// Color of the line at `offset` across `span` if it is solid, else `None`.
fn solid_color(image: &Raster, orientation: Orientation, offset: u32, span: &BBox, params: &DividerParams) -> Option<Rgb> {
    let mut first: Option<Rgb> = None;
    let mut count = 0usize;
    let (lo, hi) = match orientation {
        Orientation::Horizontal => (span.x(), span.right()),
        Orientation::Vertical => (span.y(), span.bottom()),
    };
    for p in samples(lo, hi, params.edge_ignore, params.grid_interval) {
        let px = match orientation {
            Orientation::Horizontal => image.pixel(p, offset),
            Orientation::Vertical => image.pixel(offset, p),
        };
        match first {
            None => first = Some(px),
            Some(f) if !params.same_color(f, px) => return None,
            Some(_) => {}
        }
        count += 1;
    }
    if count >= 2 {
        first
    } else {
        None
    }
}

/// True iff every grid-sampled pixel along the line (edges skipped) matches
/// the first sample within `color_tolerance`. Lines too short to yield two
/// samples are never solid.
pub fn is_solid_line(image: &Raster, line: &Line, params: &DividerParams) -> bool {
    solid_color(image, line.orientation, line.offset, &line.span, params).is_some()
}

/// True when every grid sample inside the region (edges skipped) has one
/// color, or the region is too small to sample.
fn is_uniform(image: &Raster, region: &BBox, params: &DividerParams) -> bool {
    let mut first: Option<Rgb> = None;
    for y in samples(region.y(), region.bottom(), params.edge_ignore, params.grid_interval) {
        for x in samples(region.x(), region.right(), params.edge_ignore, params.grid_interval) {
            let px = image.pixel(x, y);
            match first {
                None => first = Some(px),
                Some(f) if !params.same_color(f, px) => return false,
                Some(_) => {}
            }
        }
    }
    true
}

fn scan(
    image: &Raster,
    region: &BBox,
    texts: &[&TextRegion],
    orientation: Orientation,
    params: &DividerParams,
) -> Vec<Line> {
    let (start, end) = match orientation {
        Orientation::Horizontal => (region.y(), region.bottom()),
        Orientation::Vertical => (region.x(), region.right()),
    };
    let tau = params.min_line_distance;
    let mut accepted: Vec<Line> = Vec::new();
    let mut previous = start;
    let mut run_color: Option<Rgb> = None;

    for offset in (start..end).step_by(params.grid_interval as usize) {
        let Some(color) = solid_color(image, orientation, offset, region, params) else {
            run_color = None;
            continue;
        };
        let starts_run = !matches!(run_color, Some(c) if params.same_color(c, color));
        if starts_run {
            run_color = Some(color);
        } else {
            continue;
        }
        if offset - previous < tau {
            continue;
        }
        let Ok(line) = Line::new(orientation, offset, *region) else { continue };
        if texts.iter().any(|t| line.crosses(&t.bbox)) {
            continue;
        }
        accepted.push(line);
        previous = offset;
    }

    if accepted.last().is_some_and(|l| end - l.offset < tau) {
        accepted.pop();
    }
    accepted
}

/// Dividing lines of one region: horizontal lines if any qualify, otherwise
/// vertical lines, possibly none. A uniformly colored region has none.
pub fn find_dividing_lines(image: &Raster, region: &BBox, text_regions: &[TextRegion], params: &DividerParams) -> Vec<Line> {
    if is_uniform(image, region, params) {
        return Vec::new();
    }
    let texts: Vec<&TextRegion> = text_regions.iter().filter(|t| t.bbox.intersects(region)).collect();
    let horizontal = scan(image, region, &texts, Orientation::Horizontal, params);
    if !horizontal.is_empty() {
        return horizontal;
    }
    scan(image, region, &texts, Orientation::Vertical, params)
}

/// Splits `region` at the given offsets, in order. Each split row or column
/// starts the following piece.
fn split_region(region: &BBox, orientation: Orientation, offsets: &[u32]) -> Vec<BBox> {
    let mut pieces = Vec::with_capacity(offsets.len() + 1);
    let (start, end) = match orientation {
        Orientation::Horizontal => (region.y(), region.bottom()),
        Orientation::Vertical => (region.x(), region.right()),
    };
    let mut cuts = vec![start];
    cuts.extend_from_slice(offsets);
    cuts.push(end);
    for w in cuts.windows(2) {
        let piece = match orientation {
            Orientation::Horizontal => BBox::new(region.x(), w[0], region.w(), w[1] - w[0]),
            Orientation::Vertical => BBox::new(w[0], region.y(), w[1] - w[0], region.h()),
        };
        pieces.push(piece.expect("cuts are strictly increasing"));
    }
    pieces
}

fn divide_region(image: &Raster, region: BBox, depth: u32, texts: &[TextRegion], params: &DividerParams) -> SplitNode {
    let lines = find_dividing_lines(image, &region, texts, params);
    let Some(direction) = lines.first().map(|l| l.orientation) else {
        return SplitNode { region, depth, direction: None, lines: Vec::new(), children: Vec::new() };
    };
    let offsets: Vec<u32> = lines.iter().map(|l| l.offset).collect();
    let pieces = split_region(&region, direction, &offsets);
    let children = if depth < params.max_depth {
        pieces.into_par_iter().map(|p| divide_region(image, p, depth + 1, texts, params)).collect()
    } else {
        pieces
            .into_iter()
            .map(|p| SplitNode { region: p, depth: depth + 1, direction: None, lines: Vec::new(), children: Vec::new() })
            .collect()
    };
    SplitNode { region, depth, direction: Some(direction), lines: offsets, children }
}

/// Divides the whole canvas. `text_regions` should already be merged.
pub fn divide(image: &Raster, text_regions: &[TextRegion], params: &DividerParams) -> DivisionResult {
    let canvas = image.bounds();
    let split_tree = divide_region(image, canvas, 1, text_regions, params);
    let mut leaves = Vec::new();
    split_tree.collect_leaves(&mut leaves);
    let blocks = merge_small_blocks(&leaves, params, image.dims());
    DivisionResult { canvas: image.dims(), blocks, split_tree }
}

/// Merges blocks smaller than `min_block_area` into edge-adjacent
/// neighbors until every block is large enough or one block remains.
///
/// The smallest undersized block goes first. Among its neighbors, those
/// whose union with it is exactly a rectangle are preferred, and among
/// those the one sharing the longest boundary. Without such a neighbor the
/// longest-boundary neighbor is used, and the union grows to swallow any
/// block it touches so the result still tiles the canvas.
pub fn merge_small_blocks(blocks: &[BBox], params: &DividerParams, canvas: (u32, u32)) -> Vec<BBox> {
    let mut blocks: Vec<BBox> = blocks.to_vec();
    blocks.sort_by_key(|b| b.reading_key());

    while blocks.len() > 1 {
        let Some(small) = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.area() < params.min_block_area)
            .min_by_key(|(_, b)| (b.area(), b.reading_key()))
            .map(|(i, _)| i)
        else {
            break;
        };
        let target = blocks[small];

        // (exact rectangle, shared edge, reverse reading order) is maximised.
        let neighbor = blocks
            .iter()
            .enumerate()
            .filter(|&(i, b)| i != small && target.shared_edge(b) > 0)
            .max_by_key(|(_, b)| {
                let exact = target.union(b).area() == target.area() + b.area();
                (exact, target.shared_edge(b), std::cmp::Reverse(b.reading_key()))
            })
            .map(|(i, _)| i);
        let Some(neighbor) = neighbor else {
            // Not reachable for a tiling with more than one block.
            break;
        };

        let mut merged = target.union(&blocks[neighbor]);
        let mut absorbed: Vec<bool> = vec![false; blocks.len()];
        absorbed[small] = true;
        absorbed[neighbor] = true;
        loop {
            let mut grew = false;
            for (i, b) in blocks.iter().enumerate() {
                if !absorbed[i] && b.intersects(&merged) {
                    merged = merged.union(b);
                    absorbed[i] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let mut next: Vec<BBox> = blocks.iter().zip(&absorbed).filter(|(_, &a)| !a).map(|(b, _)| *b).collect();
        next.push(merged);
        next.sort_by_key(|b| b.reading_key());
        blocks = next;
    }
    debug_assert!(
        blocks.iter().map(BBox::area).sum::<u64>() == u64::from(canvas.0) * u64::from(canvas.1),
        "merged blocks must still tile the canvas"
    );
    blocks
}

const PALETTE: [Rgb; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [128, 128, 0],
];

// 3x5 digit glyphs, one row per entry, bit 2 is the leftmost column.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

pub const OVERLAY_BORDER: u32 = 2;

pub fn overlay_color(index: usize) -> Rgb {
    PALETTE[index % PALETTE.len()]
}

/// Copy of `image` with every block outlined by a 2px border drawn just
/// inside the block and its index printed in the top-left corner.
pub fn render_debug_overlay(image: &Raster, result: &DivisionResult) -> Raster {
    let mut out = image.clone();
    for (i, b) in result.blocks.iter().enumerate() {
        let color = overlay_color(i);
        let t = OVERLAY_BORDER.min(b.w()).min(b.h());
        let edges = [
            BBox::new(b.x(), b.y(), b.w(), t),
            BBox::new(b.x(), b.bottom() - t, b.w(), t),
            BBox::new(b.x(), b.y(), t, b.h()),
            BBox::new(b.right() - t, b.y(), t, b.h()),
        ];
        for e in edges.into_iter().flatten() {
            out.fill_rect(&e, color);
        }
        draw_label(&mut out, b, &i.to_string(), color);
    }
    out
}

fn draw_label(out: &mut Raster, b: &BBox, text: &str, color: Rgb) {
    const SCALE: u32 = 3;
    let pad = OVERLAY_BORDER + 2;
    let w = text.len() as u32 * 4 * SCALE + SCALE;
    let h = 5 * SCALE + 2 * SCALE;
    let Ok(plate) = BBox::new(b.x() + OVERLAY_BORDER, b.y() + OVERLAY_BORDER, w, h) else { return };
    // Clip the label to the block.
    let Some(plate) = plate.intersection(b) else { return };
    out.fill_rect(&plate, color);
    for (k, ch) in text.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        let gx = b.x() + pad + k as u32 * 4 * SCALE;
        let gy = b.y() + pad;
        for (row, bits) in DIGITS[d as usize].iter().enumerate() {
            for col in 0..3u32 {
                if bits & (0b100 >> col) != 0 {
                    if let Ok(px) = BBox::new(gx + col * SCALE, gy + row as u32 * SCALE, SCALE, SCALE) {
                        if let Some(px) = px.intersection(&plate) {
                            out.fill_rect(&px, [255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::WHITE;

    const GRAY: Rgb = [128, 128, 128];

    fn b(x: u32, y: u32, w: u32, h: u32) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn solid_line_cases() {
        let p = DividerParams::default();
        let mut img = Raster::filled(200, 20, WHITE);
        let span = img.bounds();
        assert!(is_solid_line(&img, &Line::horizontal(5, span).unwrap(), &p));

        img.fill_rect(&b(85, 10, 30, 1), [0, 0, 0]);
        assert!(!is_solid_line(&img, &Line::horizontal(10, span).unwrap(), &p));

        let mut img = Raster::filled(200, 20, WHITE);
        img.fill_rect(&b(0, 10, 8, 1), [0, 0, 0]);
        assert!(is_solid_line(&img, &Line::horizontal(10, span).unwrap(), &p));
    }

    #[test]
    fn short_span_is_not_solid() {
        let p = DividerParams::default();
        let img = Raster::filled(24, 24, WHITE);
        // 24 - 2*10 = 4 pixels left: a single sample at stride 5.
        assert!(!is_solid_line(&img, &Line::horizontal(5, img.bounds()).unwrap(), &p));
    }

    #[test]
    fn tolerance_absorbs_noise() {
        let p = DividerParams::default();
        let mut img = Raster::filled(200, 20, WHITE);
        img.fill_rect(&b(50, 10, 5, 1), [253, 254, 255]);
        let line = Line::horizontal(10, img.bounds()).unwrap();
        assert!(is_solid_line(&img, &line, &p));
        img.fill_rect(&b(50, 10, 5, 1), [252, 255, 255]);
        assert!(!is_solid_line(&img, &line, &p));
    }

    #[test]
    fn horizontal_bar_yields_one_line() {
        let p = DividerParams::default();
        let mut img = Raster::filled(1000, 1000, WHITE);
        img.fill_rect(&b(0, 498, 1000, 3), GRAY);
        let lines = find_dividing_lines(&img, &img.bounds(), &[], &p);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].orientation, Orientation::Horizontal);
        assert!((498..=500).contains(&lines[0].offset), "{}", lines[0].offset);
    }

    #[test]
    fn text_region_over_bar_blocks_it() {
        let p = DividerParams::default();
        let mut img = Raster::filled(1000, 1000, WHITE);
        img.fill_rect(&b(0, 498, 1000, 3), GRAY);
        let text = [TextRegion::new(b(0, 480, 1000, 40))];
        assert!(find_dividing_lines(&img, &img.bounds(), &text, &p).is_empty());
    }

    #[test]
    fn min_distance_between_vertical_bars() {
        let p = DividerParams::default();
        let mut img = Raster::filled(1000, 200, WHITE);
        img.fill_rect(&b(300, 0, 3, 200), GRAY);
        img.fill_rect(&b(330, 0, 3, 200), GRAY);
        let lines = find_dividing_lines(&img, &img.bounds(), &[], &p);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].orientation, Orientation::Vertical);
        assert_eq!(lines[0].offset, 300);
    }

    #[test]
    fn trailing_line_too_close_to_edge_is_dropped() {
        let p = DividerParams::default();
        let mut img = Raster::filled(400, 400, WHITE);
        img.fill_rect(&b(0, 200, 400, 3), GRAY);
        img.fill_rect(&b(0, 370, 400, 3), GRAY);
        let lines = find_dividing_lines(&img, &img.bounds(), &[], &p);
        assert_eq!(lines.iter().map(|l| l.offset).collect::<Vec<_>>(), vec![200]);
    }

    #[test]
    fn uniform_region_has_no_lines() {
        let p = DividerParams::default();
        let img = Raster::filled(600, 600, WHITE);
        assert!(find_dividing_lines(&img, &img.bounds(), &[], &p).is_empty());
        let r = divide(&img, &[], &p);
        assert_eq!(r.blocks, vec![img.bounds()]);
    }

    fn two_level() -> Raster {
        let mut img = Raster::filled(1000, 1000, WHITE);
        img.fill_rect(&b(0, 500, 1000, 3), GRAY);
        img.fill_rect(&b(500, 503, 3, 497), GRAY);
        img
    }

    #[test]
    fn two_level_canvas() {
        let p = DividerParams::default();
        let r = divide(&two_level(), &[], &p);
        assert_eq!(r.blocks, vec![b(0, 0, 1000, 500), b(0, 500, 500, 500), b(500, 500, 500, 500)]);
        let shallow = divide(&two_level(), &[], &DividerParams { max_depth: 1, ..p });
        assert_eq!(shallow.blocks, vec![b(0, 0, 1000, 500), b(0, 500, 1000, 500)]);
    }

    #[test]
    fn merge_small_examples() {
        let p = DividerParams::default();
        let blocks = [b(0, 0, 1000, 100), b(0, 100, 1000, 900)];
        assert_eq!(merge_small_blocks(&blocks, &p, (1000, 1000)), blocks.to_vec());
        let strict = DividerParams { min_block_area: 120_000, ..p.clone() };
        assert_eq!(merge_small_blocks(&blocks, &strict, (1000, 1000)), vec![b(0, 0, 1000, 1000)]);
        let single = [b(0, 0, 10, 10)];
        assert_eq!(merge_small_blocks(&single, &p, (10, 10)), single.to_vec());
    }

    #[test]
    fn merge_prefers_rectangle_preserving_neighbor() {
        // Small block at top-left. Right neighbour shares 100px but is taller;
        // the block below shares 100px along a full edge.
        let p = DividerParams { min_block_area: 20_000, ..DividerParams::default() };
        let blocks = [b(0, 0, 100, 100), b(100, 0, 300, 400), b(0, 100, 100, 300)];
        let out = merge_small_blocks(&blocks, &p, (400, 400));
        assert_eq!(out, vec![b(0, 0, 100, 400), b(100, 0, 300, 400)]);
    }

    #[test]
    fn merge_absorbs_overlapped_blocks() {
        // Pinwheel: no neighbour of the centre block forms a rectangle with it.
        let p = DividerParams { min_block_area: 15_000, ..DividerParams::default() };
        let blocks = [b(0, 0, 200, 100), b(200, 0, 100, 200), b(0, 100, 100, 200), b(100, 100, 100, 100), b(100, 200, 200, 100)];
        let out = merge_small_blocks(&blocks, &p, (300, 300));
        assert_eq!(out, vec![b(0, 0, 300, 300)]);
    }

    #[test]
    fn overlay_marks_each_block() {
        let img = two_level();
        let r = divide(&img, &[], &DividerParams::default());
        let o = render_debug_overlay(&img, &r);
        for (i, blk) in r.blocks.iter().enumerate() {
            assert_eq!(o.pixel(blk.right() - 1, blk.bottom() - 1), overlay_color(i));
        }
        let again = render_debug_overlay(&o, &r);
        assert_eq!(again, o);
    }

    #[test]
    fn blocks_json_shape() {
        let r = divide(&two_level(), &[], &DividerParams::default());
        let json = serde_json::to_string(&BlocksFile::from(&r)).unwrap();
        assert_eq!(json, r#"{"canvas":[1000,1000],"blocks":[[0,0,1000,500],[0,500,500,500],[500,500,500,500]]}"#);
    }
}
