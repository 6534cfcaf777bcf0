//! Pixel geometry shared by division, cropping and assembly.
//!
//! Origin is top-left and y grows downward. Every [`BBox`] is half-open:
//! it covers columns `x..x+w` and rows `y..y+h`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Axis-aligned pixel rectangle, half-open on the right and bottom edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, GeometryError> {
        if w == 0 || h == 0 {
            return Err(GeometryError::EmptyBox { w, h });
        }
        if x.checked_add(w).is_none() || y.checked_add(h).is_none() {
            return Err(GeometryError::Overflow);
        }
        Ok(Self { x, y, w, h })
    }

    /// The box covering a whole `width`×`height` canvas.
    pub fn canvas(width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(0, 0, width, height)
    }

    pub fn x(&self) -> u32 {
        self.x
    }
    pub fn y(&self) -> u32 {
        self.y
    }
    pub fn w(&self) -> u32 {
        self.w
    }
    pub fn h(&self) -> u32 {
        self.h
    }
    /// Exclusive right edge.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }
    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BBox) -> BBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let r = self.right().max(other.right());
        let b = self.bottom().max(other.bottom());
        BBox { x, y, w: r - x, h: b - y }
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x = self.x.max(other.x);
        let y = self.y.max(other.y);
        let r = self.right().min(other.right());
        let b = self.bottom().min(other.bottom());
        (r > x && b > y).then(|| BBox { x, y, w: r - x, h: b - y })
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// True when the box fits inside a `width`×`height` canvas.
    pub fn fits_canvas(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    /// Grows the box by `margin` on every side. The result may extend past
    /// the origin, so it is returned as signed edges `(left, top, right, bottom)`.
    pub fn inflated(&self, margin: f64) -> [f64; 4] {
        [
            f64::from(self.x) - margin,
            f64::from(self.y) - margin,
            f64::from(self.right()) + margin,
            f64::from(self.bottom()) + margin,
        ]
    }

    /// Translates a box expressed relative to `self` into the outer frame.
    pub fn offset_by(&self, origin: &BBox) -> BBox {
        BBox { x: self.x + origin.x, y: self.y + origin.y, w: self.w, h: self.h }
    }

    /// Length of the boundary segment shared with an edge-adjacent box, 0 if
    /// the boxes do not touch along an edge.
    pub fn shared_edge(&self, other: &BBox) -> u32 {
        let overlap = |a0: u32, a1: u32, b0: u32, b1: u32| a1.min(b1).saturating_sub(a0.max(b0));
        if self.right() == other.x || other.right() == self.x {
            overlap(self.y, self.bottom(), other.y, other.bottom())
        } else if self.bottom() == other.y || other.bottom() == self.y {
            overlap(self.x, self.right(), other.x, other.right())
        } else {
            0
        }
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Reading order key: top-to-bottom, then left-to-right.
    pub fn reading_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [u32; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

pub fn bbox_intersects(a: &BBox, b: &BBox) -> bool {
    a.intersects(b)
}

pub fn bbox_union(a: &BBox, b: &BBox) -> BBox {
    a.union(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A full-span cut through a region. For a horizontal line `offset` is a row
/// index, for a vertical line a column index, both in canvas coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Line {
    pub orientation: Orientation,
    pub offset: u32,
    pub span: BBox,
}

impl Line {
    pub fn new(orientation: Orientation, offset: u32, span: BBox) -> Result<Self, GeometryError> {
        let (lo, hi) = match orientation {
            Orientation::Horizontal => (span.y(), span.bottom()),
            Orientation::Vertical => (span.x(), span.right()),
        };
        if offset <= lo || offset >= hi {
            return Err(GeometryError::LineOutsideSpan { offset, lo, hi });
        }
        Ok(Self { orientation, offset, span })
    }

    pub fn horizontal(offset: u32, span: BBox) -> Result<Self, GeometryError> {
        Self::new(Orientation::Horizontal, offset, span)
    }

    pub fn vertical(offset: u32, span: BBox) -> Result<Self, GeometryError> {
        Self::new(Orientation::Vertical, offset, span)
    }

    /// True iff the line cuts through the interior of `bbox`: its offset lies
    /// strictly between the box's edges along the cut axis and its span
    /// overlaps the box along the other axis. Grazing an edge is not a cut.
    pub fn crosses(&self, bbox: &BBox) -> bool {
        match self.orientation {
            Orientation::Horizontal => {
                self.offset > bbox.y()
                    && self.offset < bbox.bottom()
                    && self.span.x() < bbox.right()
                    && bbox.x() < self.span.right()
            }
            Orientation::Vertical => {
                self.offset > bbox.x()
                    && self.offset < bbox.right()
                    && self.span.y() < bbox.bottom()
                    && bbox.y() < self.span.bottom()
            }
        }
    }
}

pub fn line_crosses_bbox(line: &Line, bbox: &BBox) -> bool {
    line.crosses(bbox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: u32, y: u32, w: u32, h: u32) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn intersects_cases() {
        assert!(bbox_intersects(&b(0, 0, 10, 10), &b(5, 5, 10, 10)));
        assert!(!bbox_intersects(&b(0, 0, 10, 10), &b(10, 0, 5, 5)));
        assert!(bbox_intersects(&b(0, 0, 10, 10), &b(0, 0, 10, 10)));
    }

    #[test]
    fn union_cases() {
        assert_eq!(bbox_union(&b(0, 0, 10, 10), &b(20, 0, 10, 10)), b(0, 0, 30, 10));
        let a = b(3, 4, 5, 6);
        assert_eq!(bbox_union(&a, &a), a);
        assert_eq!(bbox_union(&b(0, 0, 5, 5), &b(3, 3, 5, 5)), b(0, 0, 8, 8));
    }

    #[test]
    fn line_cases() {
        let boxed = b(0, 40, 100, 20);
        let span = b(0, 0, 100, 100);
        assert!(Line::horizontal(50, span).unwrap().crosses(&boxed));
        assert!(!Line::horizontal(40, span).unwrap().crosses(&boxed));
        let vspan = b(0, 0, 400, 100);
        let v = Line::vertical(200, vspan).unwrap();
        assert!(!v.crosses(&b(150, 200, 100, 50)));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(BBox::new(0, 0, 0, 5).is_err());
        assert!(Line::horizontal(0, b(0, 0, 10, 10)).is_err());
        assert!(Line::horizontal(10, b(0, 0, 10, 10)).is_err());
    }

    #[test]
    fn shared_edge_lengths() {
        assert_eq!(b(0, 0, 10, 10).shared_edge(&b(10, 5, 10, 10)), 5);
        assert_eq!(b(0, 0, 10, 10).shared_edge(&b(0, 10, 4, 4)), 4);
        assert_eq!(b(0, 0, 10, 10).shared_edge(&b(10, 10, 4, 4)), 0);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0u32..200, 0u32..200, 1u32..100, 1u32..100).prop_map(|(x, y, w, h)| b(x, y, w, h))
    }

    proptest! {
        #[test]
        fn union_laws(a in arb_box(), c in arb_box(), d in arb_box()) {
            prop_assert_eq!(a.union(&c), c.union(&a));
            prop_assert_eq!(a.union(&c).union(&d), a.union(&c.union(&d)));
            prop_assert_eq!(a.union(&a), a);
            prop_assert!(a.union(&c).contains(&a));
        }

        #[test]
        fn intersects_symmetric(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(a.intersects(&c), c.intersects(&a));
            prop_assert_eq!(a.intersects(&c), a.intersection(&c).is_some());
        }

        #[test]
        fn boundary_offsets_never_cross(a in arb_box()) {
            let span = b(0, 0, 400, 400);
            for off in [a.y(), a.bottom()] {
                if let Ok(l) = Line::horizontal(off, span) {
                    prop_assert!(!l.crosses(&a));
                }
            }
            for off in [a.x(), a.right()] {
                if let Ok(l) = Line::vertical(off, span) {
                    prop_assert!(!l.crosses(&a));
                }
            }
        }
    }
}
