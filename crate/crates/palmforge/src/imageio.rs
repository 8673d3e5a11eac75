//! PNG/JPEG decoding into [`Raster`]s and deterministic PNG encoding.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::imageops;
use image::{ImageEncoder, ImageReader, RgbaImage};
use palmforge_core::Raster;

use crate::error::{Error, IoContext, Result};

fn decode(path: &Path) -> Result<image::DynamicImage> {
    let reader = ImageReader::open(path).at(path)?;
    let reader = reader.with_guessed_format().at(path)?;
    reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads any PNG or JPEG as RGBA.
pub fn load_rgba(path: &Path) -> Result<Raster> {
    let rgba = decode(path)?.to_rgba8();
    let (w, h) = rgba.dimensions();
    Ok(Raster::new(w, h, rgba.into_raw())?)
}

/// Loads an image that must carry an alpha channel.
pub fn load_rgba_with_alpha(path: &Path) -> Result<Raster> {
    let img = decode(path)?;
    if !img.color().has_alpha() {
        return Err(Error::Config(format!("{}: sprite has no alpha channel", path.display())));
    }
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    Ok(Raster::new(w, h, rgba.into_raw())?)
}

/// Triangle-filter resize; returns the input unchanged when sizes already match.
pub fn resize(r: Raster, width: u32, height: u32) -> Raster {
    if r.width() == width && r.height() == height {
        return r;
    }
    let (w, h) = (r.width(), r.height());
    let img = RgbaImage::from_raw(w, h, r.into_pixels()).expect("raster buffer matches its size");
    let out = imageops::resize(&img, width, height, imageops::FilterType::Triangle);
    Raster::new(width, height, out.into_raw()).expect("resize output matches its size")
}

pub fn encode_png(r: &Raster, out: impl Write) -> image::ImageResult<()> {
    PngEncoder::new_with_quality(out, CompressionType::Fast, FilterType::Adaptive).write_image(
        r.pixels(),
        r.width(),
        r.height(),
        image::ExtendedColorType::Rgba8,
    )
}

pub fn save_png(r: &Raster, path: &Path) -> Result<()> {
    let file = File::create(path).at(path)?;
    let mut w = BufWriter::new(file);
    encode_png(r, &mut w).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    w.flush().at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_keeps_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let mut r = Raster::transparent(3, 2).unwrap();
        r.set_pixel(1, 1, [10, 20, 30, 40]);
        save_png(&r, &path).unwrap();
        assert_eq!(load_rgba_with_alpha(&path).unwrap(), r);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_rgba(Path::new("/nonexistent/x.png")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn opaque_rgb_sprite_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        image::RgbImage::new(2, 2).save(&path).unwrap();
        assert!(matches!(load_rgba_with_alpha(&path), Err(Error::Config(_))));
        assert_eq!(load_rgba(&path).unwrap().pixel(0, 0), [0, 0, 0, 255]);
    }
}
