//! OCR text regions: loading from the JSON interchange format and merging
//! nearby boxes so a paragraph is never split by a dividing line.
//!
//! The interchange format is a JSON array of records
//! `{"bbox": [x, y, w, h], "text": "..."}` in design-pixel coordinates.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::TextRegionError;
use crate::geometry::BBox;

/// Default merge distance in pixels.
pub const DEFAULT_MERGE_GAP: u32 = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TextRegion {
    pub bbox: BBox,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl TextRegion {
    pub fn new(bbox: BBox) -> Self {
        Self { bbox, text: None }
    }

    pub fn with_text(bbox: BBox, text: impl Into<String>) -> Self {
        Self { bbox, text: Some(text.into()) }
    }
}

/// Parses an OCR document and clamps every region to the canvas. Regions
/// with no area left after clamping are dropped with a warning.
pub fn load_text_regions(document: &str, canvas: (u32, u32)) -> Result<Vec<TextRegion>, TextRegionError> {
    let value: Value = serde_json::from_str(document).map_err(|e| TextRegionError::Document(e.to_string()))?;
    let records = value
        .as_array()
        .ok_or_else(|| TextRegionError::Document("top-level value must be an array".into()))?;

    let mut regions = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        let bad = |message: &str| TextRegionError::Record { index, message: message.to_string() };
        let coords = record
            .get("bbox")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing \"bbox\" array"))?;
        if coords.len() != 4 {
            return Err(bad("\"bbox\" must have four numbers [x, y, w, h]"));
        }
        let mut v = [0f64; 4];
        for (slot, c) in v.iter_mut().zip(coords) {
            *slot = c.as_f64().filter(|f| f.is_finite()).ok_or_else(|| bad("\"bbox\" entries must be numbers"))?;
        }
        if v[2] < 0.0 || v[3] < 0.0 {
            return Err(bad("\"bbox\" width and height must be non-negative"));
        }
        let text = match record.get("text") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(bad("\"text\" must be a string")),
        };

        match clamp_to_canvas(v, canvas) {
            Some(bbox) => regions.push(TextRegion { bbox, text }),
            None => log::warn!("OCR record {index} lies outside the {}x{} canvas, dropped", canvas.0, canvas.1),
        }
    }
    Ok(regions)
}

pub fn load_text_regions_file(path: impl AsRef<Path>, canvas: (u32, u32)) -> Result<Vec<TextRegion>, TextRegionError> {
    let path = path.as_ref();
    let doc = std::fs::read_to_string(path).map_err(|source| TextRegionError::Io { path: path.to_path_buf(), source })?;
    load_text_regions(&doc, canvas)
}

fn clamp_to_canvas([x, y, w, h]: [f64; 4], (cw, ch): (u32, u32)) -> Option<BBox> {
    let x0 = x.floor().max(0.0);
    let y0 = y.floor().max(0.0);
    let x1 = (x + w).ceil().min(f64::from(cw));
    let y1 = (y + h).ceil().min(f64::from(ch));
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    BBox::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32).ok()
}

/// Two boxes are mergeable when, each grown by `gap / 2` on every side,
/// they touch or overlap. Equivalently their separation on both axes is at
/// most `gap`.
fn mergeable(a: &BBox, b: &BBox, gap: u32) -> bool {
    let half = f64::from(gap) / 2.0;
    let [al, at, ar, ab] = a.inflated(half);
    let [bl, bt, br, bb] = b.inflated(half);
    al <= br && bl <= ar && at <= bb && bt <= ab
}

/// Merges regions into pairwise non-mergeable groups, iterating to a
/// fixpoint so chains of nearby boxes collapse together. Merged text is
/// joined in reading order.
pub fn merge_adjacent_regions(regions: &[TextRegion], gap: u32) -> Vec<TextRegion> {
    // Each group: union box plus its member regions.
    let mut groups: Vec<(BBox, Vec<&TextRegion>)> = regions.iter().map(|r| (r.bbox, vec![r])).collect();

    loop {
        let mut merged_any = false;
        let mut i = 0;
        while i < groups.len() {
            let mut j = i + 1;
            while j < groups.len() {
                if mergeable(&groups[i].0, &groups[j].0, gap) {
                    let (bbox, members) = groups.swap_remove(j);
                    groups[i].0 = groups[i].0.union(&bbox);
                    groups[i].1.extend(members);
                    merged_any = true;
                    // The grown box may now reach groups already scanned.
                    j = i + 1;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged_any {
            break;
        }
    }

    let mut out: Vec<TextRegion> = groups
        .into_iter()
        .map(|(bbox, mut members)| {
            members.sort_by_key(|r| r.bbox.reading_key());
            let texts: Vec<&str> = members.iter().filter_map(|r| r.text.as_deref()).collect();
            let text = (!texts.is_empty()).then(|| texts.join(" "));
            TextRegion { bbox, text }
        })
        .collect();
    out.sort_by_key(|r| (r.bbox.reading_key(), r.bbox.to_array()));
    out
}
