//! RGBA rasters, sprites, opaque-extent computation and source-over compositing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major RGBA image with 8 bits per channel and straight (non-premultiplied) alpha.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = (width as usize) * (height as usize) * 4;
        if width == 0 || height == 0 || pixels.len() != expected {
            return Err(Error::RasterSize {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Raster with every pixel set to `rgba`.
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        let mut pixels = Vec::with_capacity(n * 4);
        for _ in 0..n {
            pixels.extend_from_slice(&rgba);
        }
        Self::new(width, height, pixels)
    }

    /// Fully transparent raster.
    pub fn transparent(width: u32, height: u32) -> Result<Self> {
        let n = (width as usize) * (height as usize) * 4;
        Self::new(width, height, vec![0; n])
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        ((y as usize) * (self.width as usize) + x as usize) * 4
    }

    /// Pixel at `(x, y)`. Panics when out of range.
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let o = self.offset(x, y);
        [
            self.pixels[o],
            self.pixels[o + 1],
            self.pixels[o + 2],
            self.pixels[o + 3],
        ]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&rgba);
    }

    #[inline]
    pub fn alpha(&self, x: u32, y: u32) -> u8 {
        self.pixels[self.offset(x, y) + 3]
    }

    /// Copy of the sub-rectangle `b`. The box must lie inside the raster.
    pub fn crop(&self, b: PixelBox) -> Result<Raster> {
        if !b.fits_within(self.width, self.height) {
            return Err(Error::OutOfBounds {
                x0: b.x0,
                y0: b.y0,
                width: b.w,
                height: b.h,
                bg_width: self.width,
                bg_height: self.height,
            });
        }
        let mut pixels = Vec::with_capacity(b.area() as usize * 4);
        for y in b.y0..b.y0 + b.h {
            let start = self.offset(b.x0, y);
            pixels.extend_from_slice(&self.pixels[start..start + b.w as usize * 4]);
        }
        Raster::new(b.w, b.h, pixels)
    }
}

/// Axis-aligned pixel rectangle: `x0, y0` inclusive top-left, `w, h` extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelBox {
    pub fn new(x0: u32, y0: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidBox("pixel box must be at least 1x1"));
        }
        Ok(Self { x0, y0, w, h })
    }

    /// Exclusive right edge.
    #[inline]
    pub fn x1(&self) -> u32 {
        self.x0 + self.w
    }

    /// Exclusive bottom edge.
    #[inline]
    pub fn y1(&self) -> u32 {
        self.y0 + self.h
    }

    #[inline]
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        (self.x0 as u64 + self.w as u64) <= width as u64
            && (self.y0 as u64 + self.h as u64) <= height as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    /// Number of shared pixels.
    pub fn intersection_area(&self, other: &PixelBox) -> u64 {
        let w = self.x1().min(other.x1()).saturating_sub(self.x0.max(other.x0));
        let h = self.y1().min(other.y1()).saturating_sub(self.y0.max(other.y0));
        w as u64 * h as u64
    }
}

/// An alpha-channel cut-out of a single object together with its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sprite {
    raster: Raster,
    pub class_name: String,
    pub source_id: String,
}

impl Sprite {
    /// Fails with [`Error::EmptySprite`] when no pixel has alpha > 0.
    pub fn new(raster: Raster, class_name: impl Into<String>, source_id: impl Into<String>) -> Result<Self> {
        if !raster.pixels().chunks_exact(4).any(|p| p[3] > 0) {
            return Err(Error::EmptySprite);
        }
        Ok(Self {
            raster,
            class_name: class_name.into(),
            source_id: source_id.into(),
        })
    }

    #[inline]
    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.raster.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.raster.height
    }

    /// Same class and source, different pixels. Used by transforms.
    pub(crate) fn with_raster(&self, raster: Raster) -> Result<Sprite> {
        Sprite::new(raster, self.class_name.clone(), self.source_id.clone())
    }
}

/// Smallest box containing every pixel with alpha > 0.
pub fn opaque_extent(sprite: &Sprite) -> Result<PixelBox> {
    raster_opaque_extent(sprite.raster())
}

pub(crate) fn raster_opaque_extent(r: &Raster) -> Result<PixelBox> {
    let (mut x_min, mut y_min) = (u32::MAX, u32::MAX);
    let (mut x_max, mut y_max) = (0u32, 0u32);
    let mut any = false;
    for (i, px) in r.pixels.chunks_exact(4).enumerate() {
        if px[3] == 0 {
            continue;
        }
        let x = (i % r.width as usize) as u32;
        let y = (i / r.width as usize) as u32;
        any = true;
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !any {
        return Err(Error::EmptySprite);
    }
    PixelBox::new(x_min, y_min, x_max - x_min + 1, y_max - y_min + 1)
}

/// Source-over blend of one straight-alpha pixel onto another.
///
/// Exact integer arithmetic: alpha and colour are computed as rationals over
/// 255² and rounded half up to 8 bits.
#[inline]
pub fn blend_over(dst: [u8; 4], src: [u8; 4]) -> [u8; 4] {
    let sa = src[3] as u32;
    if sa == 0 {
        return dst;
    }
    if sa == 255 {
        return src;
    }
    let da = dst[3] as u32;
    // out alpha scaled by 255^2
    let a_num = sa * 255 + da * (255 - sa);
    if a_num == 0 {
        return [0; 4];
    }
    let out_a = (2 * a_num + 255) / (2 * 255);
    let mut out = [0u8; 4];
    for c in 0..3 {
        let num = src[c] as u32 * sa * 255 + dst[c] as u32 * da * (255 - sa);
        out[c] = ((2 * num as u64 + a_num as u64) / (2 * a_num as u64)) as u8;
    }
    out[3] = out_a as u8;
    out
}

/// Blends `sprite` onto a copy of `bg` with its top-left corner at `(x0, y0)`.
///
/// Pixels outside the sprite's rectangle are bit-identical to `bg`.
pub fn composite(bg: &Raster, sprite: &Sprite, x0: u32, y0: u32) -> Result<Raster> {
    let mut out = bg.clone();
    composite_in_place(&mut out, sprite.raster(), x0, y0)?;
    Ok(out)
}

/// In-place variant of [`composite`] used when many sprites go onto one canvas.
pub fn composite_in_place(canvas: &mut Raster, src: &Raster, x0: u32, y0: u32) -> Result<()> {
    let placed = PixelBox {
        x0,
        y0,
        w: src.width,
        h: src.height,
    };
    if !placed.fits_within(canvas.width, canvas.height) {
        return Err(Error::OutOfBounds {
            x0,
            y0,
            width: src.width,
            height: src.height,
            bg_width: canvas.width,
            bg_height: canvas.height,
        });
    }
    for sy in 0..src.height {
        for sx in 0..src.width {
            let s = src.pixel(sx, sy);
            if s[3] == 0 {
                continue;
            }
            let (dx, dy) = (x0 + sx, y0 + sy);
            let d = canvas.pixel(dx, dy);
            canvas.set_pixel(dx, dy, blend_over(d, s));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sprite_from(r: Raster) -> Sprite {
        Sprite::new(r, "palm", "test").unwrap()
    }

    #[test]
    fn raster_rejects_bad_buffers() {
        assert!(Raster::new(0, 1, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0; 15]).is_err());
        assert!(Raster::new(2, 2, vec![0; 16]).is_ok());
    }

    #[test]
    fn extent_of_opaque_raster() {
        let s = sprite_from(Raster::filled(10, 20, [1, 2, 3, 255]).unwrap());
        assert_eq!(opaque_extent(&s).unwrap(), PixelBox::new(0, 0, 10, 20).unwrap());
    }

    #[test]
    fn extent_of_single_pixel() {
        let mut r = Raster::transparent(10, 10).unwrap();
        r.set_pixel(3, 7, [0, 0, 0, 1]);
        let s = sprite_from(r);
        assert_eq!(opaque_extent(&s).unwrap(), PixelBox::new(3, 7, 1, 1).unwrap());
    }

    #[test]
    fn extent_of_disk_matches_brute_force() {
        // Disk of radius 4 centred on pixel (5, 5): pixel (x, y) is inside when
        // (x-5)^2 + (y-5)^2 <= 16.
        let mut r = Raster::transparent(12, 12).unwrap();
        for y in 0..12u32 {
            for x in 0..12u32 {
                let (dx, dy) = (x as i32 - 5, y as i32 - 5);
                if dx * dx + dy * dy <= 16 {
                    r.set_pixel(x, y, [0, 200, 0, 255]);
                }
            }
        }
        // Brute-force scan, independent of raster_opaque_extent.
        let mut xs = alloc::vec::Vec::new();
        let mut ys = alloc::vec::Vec::new();
        for y in 0..12 {
            for x in 0..12 {
                if r.alpha(x, y) > 0 {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
        let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
        assert_eq!((x0, y0, x1 - x0 + 1, y1 - y0 + 1), (1, 1, 9, 9));

        let s = sprite_from(r);
        assert_eq!(opaque_extent(&s).unwrap(), PixelBox::new(1, 1, 9, 9).unwrap());
    }

    #[test]
    fn empty_sprite_is_rejected() {
        let r = Raster::transparent(4, 4).unwrap();
        assert_eq!(Sprite::new(r.clone(), "palm", "x"), Err(Error::EmptySprite));
        assert_eq!(raster_opaque_extent(&r), Err(Error::EmptySprite));
    }

    #[test]
    fn transparent_sprite_leaves_background_untouched() {
        let bg = Raster::filled(8, 8, [10, 20, 30, 255]).unwrap();
        let mut r = Raster::transparent(4, 4).unwrap();
        // one nearly-invisible pixel keeps the sprite valid but the rest is clear
        r.set_pixel(0, 0, [255, 255, 255, 0]);
        r.set_pixel(3, 3, [0, 0, 0, 0]);
        r.set_pixel(1, 1, [9, 9, 9, 1]);
        let s = sprite_from(r);
        let out = composite(&bg, &s, 2, 2).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if (x, y) != (3, 3) {
                    assert_eq!(out.pixel(x, y), bg.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn opaque_sprite_replaces_pixels_inside_extent() {
        let bg = Raster::filled(8, 6, [10, 20, 30, 255]).unwrap();
        let s = sprite_from(Raster::filled(3, 2, [200, 100, 50, 255]).unwrap());
        let out = composite(&bg, &s, 4, 3).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let inside = (4..7).contains(&x) && (3..5).contains(&y);
                let want = if inside { [200, 100, 50, 255] } else { [10, 20, 30, 255] };
                assert_eq!(out.pixel(x, y), want, "({x},{y})");
            }
        }
    }

    /// Scalar float source-over, written out longhand.
    fn reference_over(dst: [u8; 4], src: [u8; 4]) -> [u8; 4] {
        let sa = src[3] as f64 / 255.0;
        let da = dst[3] as f64 / 255.0;
        let oa = sa + da * (1.0 - sa);
        let mut out = [0u8; 4];
        for c in 0..3 {
            let v = if oa > 0.0 {
                (src[c] as f64 * sa + dst[c] as f64 * da * (1.0 - sa)) / oa
            } else {
                0.0
            };
            out[c] = libm::floor(v + 0.5) as u8;
        }
        out[3] = libm::floor(oa * 255.0 + 0.5) as u8;
        out
    }

    #[test]
    fn half_alpha_gray_on_black() {
        let bg = Raster::filled(4, 4, [0, 0, 0, 255]).unwrap();
        for gray in [0u8, 1, 17, 64, 100, 128, 200, 254, 255] {
            let s = sprite_from(Raster::filled(2, 2, [gray, gray, gray, 128]).unwrap());
            let out = composite(&bg, &s, 1, 1).unwrap();
            let px = out.pixel(1, 1);
            assert_eq!(px, reference_over([0, 0, 0, 255], [gray, gray, gray, 128]));
            // 128/255 is the closest 8-bit alpha to one half
            let half = libm::floor(0.5 * gray as f64 + 0.5) as i32;
            assert!((px[0] as i32 - half).abs() <= 1, "gray {gray}: {px:?}");
            assert_eq!(px[3], 255);
        }
    }

    #[test]
    fn blend_matches_reference_exhaustively_on_a_grid() {
        let vals = [0u8, 1, 2, 63, 127, 128, 129, 200, 254, 255];
        for &sa in &vals {
            for &da in &vals {
                for &sc in &vals {
                    for &dc in &[0u8, 77, 255] {
                        let a = blend_over([dc, dc, dc, da], [sc, sc, sc, sa]);
                        let b = reference_over([dc, dc, dc, da], [sc, sc, sc, sa]);
                        if sa == 0 {
                            assert_eq!(a, [dc, dc, dc, da]);
                            continue;
                        }
                        for c in 0..4 {
                            // float ties may round the other way
                            assert!((a[c] as i32 - b[c] as i32).abs() <= 1, "{a:?} vs {b:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn composite_rejects_out_of_bounds() {
        let bg = Raster::filled(8, 8, [0, 0, 0, 255]).unwrap();
        let s = sprite_from(Raster::filled(3, 3, [1, 1, 1, 255]).unwrap());
        assert!(matches!(composite(&bg, &s, 6, 0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(composite(&bg, &s, 0, 6), Err(Error::OutOfBounds { .. })));
        assert!(composite(&bg, &s, 5, 5).is_ok());
    }

    #[test]
    fn crop_extracts_rectangle() {
        let mut r = Raster::transparent(5, 5).unwrap();
        r.set_pixel(2, 3, [1, 2, 3, 4]);
        let c = r.crop(PixelBox::new(1, 2, 3, 2).unwrap()).unwrap();
        assert_eq!((c.width(), c.height()), (3, 2));
        assert_eq!(c.pixel(1, 1), [1, 2, 3, 4]);
    }
}
