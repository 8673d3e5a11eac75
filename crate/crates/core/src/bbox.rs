//! Normalized boxes in YOLO centre/size convention.

use crate::raster::PixelBox;
use crate::{Error, Result};

/// Tolerance for a box poking past the image edge.
///
/// Labels carry six decimals, so an edge-touching box read back from text can
/// sit up to 7.5e-7 outside the unit square. The tolerance covers that.
pub const EDGE_EPSILON: f64 = 1e-6;

/// Axis-aligned box with centre `(cx, cy)` and size `(w, h)`, all relative to
/// the image size.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox("coordinates must be finite"));
        }
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
            return Err(Error::InvalidBox("centre must lie in [0, 1]"));
        }
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidBox("width and height must lie in (0, 1]"));
        }
        if cx - w / 2.0 < -EDGE_EPSILON
            || cx + w / 2.0 > 1.0 + EDGE_EPSILON
            || cy - h / 2.0 < -EDGE_EPSILON
            || cy + h / 2.0 > 1.0 + EDGE_EPSILON
        {
            return Err(Error::InvalidBox("box extends past the image edge"));
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Box from corner form `(x_min, y_min, x_max, y_max)`.
    pub fn from_corners(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(
            (x_min + x_max) / 2.0,
            (y_min + y_max) / 2.0,
            x_max - x_min,
            y_max - y_min,
        )
    }

    /// Normalized box covering the pixel rectangle `b` of a `width x height` image.
    pub fn from_pixel_box(b: &PixelBox, width: u32, height: u32) -> Result<Self> {
        let (iw, ih) = (width as f64, height as f64);
        Self::from_corners(
            b.x0 as f64 / iw,
            b.y0 as f64 / ih,
            b.x1() as f64 / iw,
            b.y1() as f64 / ih,
        )
    }

    /// Rounds the box onto the six-decimal label grid.
    ///
    /// Width and height shrink by at most one grid step where needed so the
    /// box still lies inside the unit square once written and read back.
    pub fn snapped(&self) -> Self {
        const GRID: f64 = 1e6;
        let snap = |c: f64, s: f64| {
            let c = libm::round(c * GRID);
            let mut s = libm::round(s * GRID).max(1.0);
            s = s.min(2.0 * c).min(2.0 * (GRID - c));
            (c / GRID, s / GRID)
        };
        let (cx, w) = snap(self.cx, self.w);
        let (cy, h) = snap(self.cy, self.h);
        Self { cx, cy, w, h }
    }

    #[inline]
    pub fn cx(&self) -> f64 {
        self.cx
    }

    #[inline]
    pub fn cy(&self) -> f64 {
        self.cy
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `(x_min, y_min, x_max, y_max)`.
    #[inline]
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        iw * ih
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_ranges() {
        assert!(BBox::new(0.5, 0.5, 0.1, 0.2).is_ok());
        assert!(BBox::new(0.5, 0.5, 0.0, 0.2).is_err());
        assert!(BBox::new(0.5, 0.5, 1.1, 0.2).is_err());
        assert!(BBox::new(1.2, 0.5, 0.1, 0.2).is_err());
        assert!(BBox::new(0.02, 0.5, 0.1, 0.2).is_err());
        assert!(BBox::new(0.05, 0.5, 0.1, 0.2).is_ok());
        assert!(BBox::new(f64::NAN, 0.5, 0.1, 0.2).is_err());
    }

    #[test]
    fn corner_round_trip() {
        let b = BBox::from_corners(0.1, 0.2, 0.4, 0.9).unwrap();
        let (x0, y0, x1, y1) = b.corners();
        assert!((x0 - 0.1).abs() < 1e-15 && (y0 - 0.2).abs() < 1e-15);
        assert!((x1 - 0.4).abs() < 1e-15 && (y1 - 0.9).abs() < 1e-15);
    }

    #[test]
    fn pixel_box_conversion() {
        let pb = PixelBox::new(0, 0, 1280, 720).unwrap();
        let b = BBox::from_pixel_box(&pb, 1280, 720).unwrap();
        assert_eq!((b.cx(), b.cy(), b.w(), b.h()), (0.5, 0.5, 1.0, 1.0));
    }

    #[test]
    fn snapped_boxes_stay_inside() {
        for x in 0..1200u32 {
            let pb = PixelBox::new(x, 0, 1280 - x, 7).unwrap();
            let b = BBox::from_pixel_box(&pb, 1280, 720).unwrap().snapped();
            let (x0, y0, x1, _) = b.corners();
            assert!(x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0, "{x}: {b:?}");
            assert!((b.w() - (1280 - x) as f64 / 1280.0).abs() <= 1.5e-6);
        }
    }
}
