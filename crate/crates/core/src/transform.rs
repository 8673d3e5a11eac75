//! Sprite transforms: bilinear scale, flips and rotation about the centre.
//!
//! Steps always run in the order scale, flip, rotate, and the result is
//! trimmed to the tight extent of pixels with alpha > 0. Resampling blends
//! in premultiplied space so transparent neighbours never bleed their colour.

use alloc::vec;

use crate::raster::{raster_opaque_extent, Raster, Sprite};
use crate::{Error, Result};

/// Largest supported scale factor.
pub const MAX_SCALE: f64 = 8.0;

/// Slack subtracted before taking the ceiling of rotated extents, so that
/// e.g. `100 * cos(90°)` (about 6e-15) does not add a spurious pixel.
const EXTENT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transform {
    angle: f64,
    scale: f64,
    pub flip_h: bool,
    pub flip_v: bool,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        angle: 0.0,
        scale: 1.0,
        flip_h: false,
        flip_v: false,
    };

    /// `angle` in degrees (any finite value, normalized to [0, 360));
    /// `scale` must lie in (0, 8].
    pub fn new(angle: f64, scale: f64, flip_h: bool, flip_v: bool) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::InvalidTransform("angle must be finite"));
        }
        if !(scale > 0.0 && scale <= MAX_SCALE) {
            return Err(Error::InvalidTransform("scale must lie in (0, 8]"));
        }
        let mut angle = angle % 360.0;
        if angle < 0.0 {
            angle += 360.0;
        }
        if angle >= 360.0 {
            angle = 0.0;
        }
        Ok(Self {
            angle,
            scale,
            flip_h,
            flip_v,
        })
    }

    /// Rotation in degrees, in [0, 360).
    #[inline]
    pub fn angle(&self) -> f64 {
        self.angle
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Applies `t` to `sprite`, returning a new sprite trimmed to its opaque extent.
///
/// Positive angles rotate counter-clockwise as displayed (y axis pointing down).
/// For a sprite that is already tight, the identity transform returns
/// identical pixels.
pub fn apply_transform(sprite: &Sprite, t: &Transform) -> Result<Sprite> {
    let mut r = sprite.raster().clone();
    if t.scale != 1.0 {
        r = scale_bilinear(&r, t.scale)?;
    }
    if t.flip_h {
        r = flip_horizontal(&r);
    }
    if t.flip_v {
        r = flip_vertical(&r);
    }
    if t.angle != 0.0 {
        r = rotate_bilinear(&r, t.angle)?;
    }
    let extent = raster_opaque_extent(&r)?;
    if extent.x0 != 0 || extent.y0 != 0 || extent.w != r.width() || extent.h != r.height() {
        r = r.crop(extent)?;
    }
    sprite.with_raster(r)
}

/// Output size of a `width x height` rectangle rotated by `angle` degrees.
pub fn rotated_size(width: u32, height: u32, angle: f64) -> (u32, u32) {
    let rad = angle.to_radians();
    let (c, s) = (libm::fabs(libm::cos(rad)), libm::fabs(libm::sin(rad)));
    let (w, h) = (width as f64, height as f64);
    let rw = libm::ceil(w * c + h * s - EXTENT_SLACK).max(1.0);
    let rh = libm::ceil(w * s + h * c - EXTENT_SLACK).max(1.0);
    (rw as u32, rh as u32)
}

pub fn flip_horizontal(r: &Raster) -> Raster {
    let mut out = r.clone();
    let (w, h) = (r.width(), r.height());
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(w - 1 - x, y, r.pixel(x, y));
        }
    }
    out
}

pub fn flip_vertical(r: &Raster) -> Raster {
    let mut out = r.clone();
    let (w, h) = (r.width(), r.height());
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, h - 1 - y, r.pixel(x, y));
        }
    }
    out
}

/// Premultiplied accumulator for one output sample.
#[derive(Default)]
struct Accum {
    a: f64,
    rgb: [f64; 3],
}

impl Accum {
    #[inline]
    fn add(&mut self, px: [u8; 4], weight: f64) {
        if weight == 0.0 || px[3] == 0 {
            return;
        }
        let wa = weight * px[3] as f64;
        self.a += wa;
        for c in 0..3 {
            self.rgb[c] += wa * px[c] as f64;
        }
    }

    #[inline]
    fn finish(&self) -> [u8; 4] {
        let a = round_u8(self.a);
        if a == 0 {
            return [0; 4];
        }
        let mut out = [0u8; 4];
        for c in 0..3 {
            out[c] = round_u8(self.rgb[c] / self.a);
        }
        out[3] = a;
        out
    }
}

#[inline]
fn round_u8(v: f64) -> u8 {
    libm::floor(v + 0.5).clamp(0.0, 255.0) as u8
}

fn scale_bilinear(r: &Raster, scale: f64) -> Result<Raster> {
    let nw = libm::round(r.width() as f64 * scale);
    let nh = libm::round(r.height() as f64 * scale);
    if nw < 1.0 || nh < 1.0 {
        return Err(Error::DegenerateTransform {
            width: r.width(),
            height: r.height(),
            scale,
        });
    }
    let (nw, nh) = (nw as u32, nh as u32);
    let fx = r.width() as f64 / nw as f64;
    let fy = r.height() as f64 / nh as f64;
    let max_x = (r.width() - 1) as f64;
    let max_y = (r.height() - 1) as f64;
    let mut out = Raster::new(nw, nh, vec![0; nw as usize * nh as usize * 4])?;
    for y in 0..nh {
        let sy = ((y as f64 + 0.5) * fy - 0.5).clamp(0.0, max_y);
        for x in 0..nw {
            let sx = ((x as f64 + 0.5) * fx - 0.5).clamp(0.0, max_x);
            out.set_pixel(x, y, sample_clamped(r, sx, sy));
        }
    }
    Ok(out)
}

/// Bilinear sample at a coordinate already clamped into the pixel-centre grid.
fn sample_clamped(r: &Raster, sx: f64, sy: f64) -> [u8; 4] {
    let x0 = libm::floor(sx) as u32;
    let y0 = libm::floor(sy) as u32;
    let x1 = (x0 + 1).min(r.width() - 1);
    let y1 = (y0 + 1).min(r.height() - 1);
    let tx = sx - x0 as f64;
    let ty = sy - y0 as f64;
    let mut acc = Accum::default();
    acc.add(r.pixel(x0, y0), (1.0 - tx) * (1.0 - ty));
    acc.add(r.pixel(x1, y0), tx * (1.0 - ty));
    acc.add(r.pixel(x0, y1), (1.0 - tx) * ty);
    acc.add(r.pixel(x1, y1), tx * ty);
    acc.finish()
}

/// Bilinear sample where everything outside the raster is fully transparent.
fn sample_transparent(r: &Raster, sx: f64, sy: f64) -> [u8; 4] {
    let fx = libm::floor(sx);
    let fy = libm::floor(sy);
    let tx = sx - fx;
    let ty = sy - fy;
    let (x0, y0) = (fx as i64, fy as i64);
    let (w, h) = (r.width() as i64, r.height() as i64);
    let fetch = |x: i64, y: i64| -> [u8; 4] {
        if x < 0 || y < 0 || x >= w || y >= h {
            [0; 4]
        } else {
            r.pixel(x as u32, y as u32)
        }
    };
    let mut acc = Accum::default();
    acc.add(fetch(x0, y0), (1.0 - tx) * (1.0 - ty));
    acc.add(fetch(x0 + 1, y0), tx * (1.0 - ty));
    acc.add(fetch(x0, y0 + 1), (1.0 - tx) * ty);
    acc.add(fetch(x0 + 1, y0 + 1), tx * ty);
    acc.finish()
}

fn rotate_bilinear(r: &Raster, angle: f64) -> Result<Raster> {
    let (ow, oh) = rotated_size(r.width(), r.height(), angle);
    let rad = angle.to_radians();
    let (c, s) = (libm::cos(rad), libm::sin(rad));
    let (icx, icy) = (r.width() as f64 / 2.0, r.height() as f64 / 2.0);
    let (ocx, ocy) = (ow as f64 / 2.0, oh as f64 / 2.0);
    let mut out = Raster::transparent(ow, oh)?;
    for y in 0..oh {
        let dy = y as f64 + 0.5 - ocy;
        for x in 0..ow {
            let dx = x as f64 + 0.5 - ocx;
            // inverse of the counter-clockwise (y-down) rotation
            let sx = c * dx - s * dy + icx - 0.5;
            let sy = s * dx + c * dy + icy - 0.5;
            if sx <= -1.0 || sy <= -1.0 || sx >= r.width() as f64 || sy >= r.height() as f64 {
                continue;
            }
            out.set_pixel(x, y, sample_transparent(r, sx, sy));
        }
    }
    Ok(out)
}
