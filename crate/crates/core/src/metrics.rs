//! Pixel metrics and the reference-free verify score.

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::raster::{Raster, WHITE};

/// Weight of the MAE term in the verify score.
pub const VERIFY_MAE_WEIGHT: f64 = 0.5;
/// Weight of the embedding-similarity term in the verify score.
pub const VERIFY_SIM_WEIGHT: f64 = 0.5;

/// Brings a screenshot to the design's shape: scale to the design width
/// (bilinear, aspect kept), then pad the bottom with white or crop it to
/// the design height. The design is returned unchanged.
pub fn normalize_pair(design: &Raster, screenshot: &Raster) -> (Raster, Raster) {
    let (dw, dh) = design.dims();
    let (sw, sh) = screenshot.dims();
    if (sw, sh) == (dw, dh) {
        return (design.clone(), screenshot.clone());
    }
    let scaled_h = ((f64::from(sh) * f64::from(dw) / f64::from(sw)).round() as u32).max(1);
    let scaled = screenshot.resize(dw, scaled_h);
    let mut out = Raster::filled(dw, dh, WHITE);
    let rows = scaled_h.min(dh) as usize;
    let row_bytes = dw as usize * 3;
    let mut pixels = out.pixels().to_vec();
    pixels[..rows * row_bytes].copy_from_slice(&scaled.pixels()[..rows * row_bytes]);
    out = Raster::from_pixels(dw, dh, pixels).expect("same dimensions");
    (design.clone(), out)
}

/// Mean absolute difference over all pixels and channels, in [0, 255].
pub fn mae(a: &Raster, b: &Raster) -> Result<f64, MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch { a: a.dims(), b: b.dims() });
    }
    let total: u64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| u64::from(x.abs_diff(*y))).sum();
    Ok(total as f64 / a.pixels().len() as f64)
}

/// `0.5 × (1 − mae/255) + 0.5 × sim`.
pub fn verify_score(mae_value: f64, sim: f64) -> Result<f64, MetricError> {
    check_range("mae", mae_value, 0.0, 255.0)?;
    check_range("sim", sim, 0.0, 1.0)?;
    Ok(VERIFY_MAE_WEIGHT * (1.0 - mae_value / 255.0) + VERIFY_SIM_WEIGHT * sim)
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), MetricError> {
    if value.is_nan() || value < lo || value > hi {
        return Err(MetricError::OutOfRange { name, value, lo, hi });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mae: f64,
    pub clip_sim: f64,
    pub verify_score: f64,
}

impl VerifyReport {
    pub fn new(mae: f64, clip_sim: f64) -> Result<Self, MetricError> {
        Ok(Self { mae, clip_sim, verify_score: verify_score(mae, clip_sim)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_endpoints() {
        let black = Raster::filled(3, 3, [0, 0, 0]);
        let white = Raster::filled(3, 3, WHITE);
        assert_eq!(mae(&black, &black).unwrap(), 0.0);
        assert_eq!(mae(&black, &white).unwrap(), 255.0);
        let c = Raster::filled(2, 2, [10, 20, 30]);
        assert_eq!(mae(&Raster::filled(2, 2, [0, 0, 0]), &c).unwrap(), 20.0);
        assert!(mae(&black, &c).is_err());
    }

    #[test]
    fn verify_examples() {
        assert_eq!(verify_score(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(verify_score(255.0, 0.0).unwrap(), 0.0);
        assert!((verify_score(51.0, 0.8).unwrap() - 0.8).abs() < 1e-9);
        assert!((verify_score(25.5, 0.6).unwrap() - 0.75).abs() < 1e-9);
        assert!(verify_score(-1.0, 0.5).is_err());
        assert!(verify_score(10.0, 1.5).is_err());
        assert!(verify_score(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn normalize_shapes() {
        let design = Raster::filled(1000, 800, [1, 1, 1]);
        let same = Raster::filled(1000, 800, [9, 9, 9]);
        assert_eq!(normalize_pair(&design, &same).1, same);

        let wide = Raster::filled(2000, 1000, [0, 0, 0]);
        let (d, s) = normalize_pair(&design, &wide);
        assert_eq!(d, design);
        assert_eq!(s.dims(), (1000, 800));
        assert_eq!(s.pixel(500, 499), [0, 0, 0]);
        assert_eq!(s.pixel(500, 500), WHITE);

        let mut tall = Raster::filled(1000, 900, [0, 0, 0]);
        tall.fill_rect(&crate::geometry::BBox::new(0, 0, 1000, 1).unwrap(), [7, 7, 7]);
        let (_, s) = normalize_pair(&design, &tall);
        assert_eq!(s, tall.crop(&design.bounds()).unwrap());
    }

    fn arb_raster() -> impl Strategy<Value = (Raster, Raster)> {
        (1u32..8, 1u32..8).prop_flat_map(|(w, h)| {
            let n = (w * h * 3) as usize;
            (prop::collection::vec(any::<u8>(), n), prop::collection::vec(any::<u8>(), n)).prop_map(move |(a, b)| {
                (Raster::from_pixels(w, h, a).unwrap(), Raster::from_pixels(w, h, b).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn mae_properties((a, b) in arb_raster()) {
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
            prop_assert_eq!(mae(&a, &a).unwrap(), 0.0);
            let m = mae(&a, &b).unwrap();
            prop_assert!((0.0..=255.0).contains(&m));
        }

        #[test]
        fn mae_invariant_under_shared_shift((a, _) in arb_raster(), c in 0u8..50) {
            // Shift two clamped copies by the same amount; differences are preserved.
            let clamp = |r: &Raster| Raster::from_pixels(r.width(), r.height(), r.pixels().iter().map(|p| p / 2).collect()).unwrap();
            let shift = |r: &Raster| Raster::from_pixels(r.width(), r.height(), r.pixels().iter().map(|p| p + c).collect()).unwrap();
            let base = clamp(&a);
            let other = Raster::from_pixels(base.width(), base.height(), base.pixels().iter().rev().copied().collect()).unwrap();
            prop_assert_eq!(mae(&base, &other).unwrap(), mae(&shift(&base), &shift(&other)).unwrap());
        }

        #[test]
        fn normalize_matches_design_dims(dw in 1u32..60, dh in 1u32..60, sw in 1u32..90, sh in 1u32..90) {
            let (d, s) = normalize_pair(&Raster::filled(dw, dh, [0; 3]), &Raster::filled(sw, sh, [9; 3]));
            prop_assert_eq!(d.dims(), (dw, dh));
            prop_assert_eq!(s.dims(), (dw, dh));
        }
    }
}
