//! PNG/PGM image I/O, saliency overlays and run-length mask encoding.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{BinaryMask, Image, LabelMap, SaliencyMap};
use crate::error::{Error, Result};

/// Loads an 8-bit (or 16-bit) grayscale PNG or PGM; colour inputs are
/// converted by luminance. Intensities are scaled to `[0, 1]` by `/255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)?;
    let gray = decoded.to_luma8();
    let (w, h) = gray.dimensions();
    let pixels = gray.pixels().map(|p| f32::from(p.0[0]) / 255.0).collect();
    Image::new(w as usize, h as usize, pixels)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Saves as PNG, or binary PGM (P5) when the extension is `.pgm`.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = image.pixels().iter().map(|&v| to_u8(v)).collect();
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write!(f, "P5\n{} {}\n255\n", image.width(), image.height())
            .and_then(|_| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))?;
        return Ok(());
    }
    let gray = GrayImage::from_raw(image.width() as u32, image.height() as u32, bytes)
        .expect("buffer sized from image");
    gray.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Red for positive scores, blue for negative, blended over `base` with
/// opacity proportional to `|score| / max|score|`.
pub fn saliency_overlay(base: Option<&Image>, saliency: &SaliencyMap) -> RgbImage {
    let (w, h) = saliency.dims();
    let scale = saliency.max_abs();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let g = base.map_or(0.0, |b| b.get(x, y));
        let s = saliency.get(x, y);
        let alpha = if scale > 0.0 { (s.abs() / scale) as f32 } else { 0.0 };
        let (r, gg, b) = if s > 0.0 {
            (1.0, 0.0, 0.0)
        } else {
            (0.0, 0.0, 1.0)
        };
        let mix = |c: f32| to_u8(g * (1.0 - alpha) + c * alpha);
        Rgb([mix(r), mix(gg), mix(b)])
    })
}

pub fn save_saliency_png(
    base: Option<&Image>,
    saliency: &SaliencyMap,
    path: impl AsRef<Path>,
) -> Result<()> {
    saliency_overlay(base, saliency).save_with_format(path.as_ref(), ImageFormat::Png)?;
    Ok(())
}

pub fn save_saliency_json(saliency: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    write_json(saliency, path)
}

/// Reads a saliency map from raw JSON or from a grayscale PNG/PGM (values in
/// `[0, 1]`).
pub fn load_saliency(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let map: SaliencyMap = read_json(path)?;
        return SaliencyMap::new(map.width, map.height, map.values);
    }
    let img = load_image(path)?;
    SaliencyMap::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| f64::from(v)).collect(),
    )
}

/// Colour-coded label visualisation; background is black.
pub fn label_visualization(labels: &LabelMap) -> RgbImage {
    RgbImage::from_fn(labels.width() as u32, labels.height() as u32, |x, y| {
        let l = labels.get(x as usize, y as usize);
        if l == 0 {
            return Rgb([0, 0, 0]);
        }
        // golden-ratio hue walk keeps neighbouring ids apart
        let hue = (f64::from(l) * 0.618_033_988_75).fract();
        let (r, g, b) = hsv_to_rgb(hue, 0.65, 0.95);
        Rgb([r, g, b])
    })
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let c = |u: f64| (u * 255.0).round() as u8;
    (c(r), c(g), c(b))
}

pub fn save_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let img = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save_with_format(path.as_ref(), ImageFormat::Png)?;
    Ok(())
}

/// Uncompressed run-length encoding of a mask: alternating run lengths in
/// row-major order, starting with a (possibly empty) run of `false`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLength {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<usize>,
}

impl RunLength {
    pub fn encode(mask: &BinaryMask) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0usize;
        for &b in mask.bits() {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        counts.push(run);
        Self {
            width: mask.width(),
            height: mask.height(),
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let mut bits = Vec::with_capacity(self.width * self.height);
        let mut value = false;
        for &c in &self.counts {
            bits.extend(std::iter::repeat(value).take(c));
            value = !value;
        }
        BinaryMask::new(self.width, self.height, bits)
    }
}

pub(crate) fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn png_and_pgm_round_trip_on_8bit_grid() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(7, 5, |x, y| ((x * 5 + y) * 7 % 256) as f32 / 255.0);
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn overlay_colours_by_sign() {
        let s = SaliencyMap::new(2, 1, vec![2.0, -1.0]).unwrap();
        let img = saliency_overlay(None, &s);
        assert_eq!(img.get_pixel(0, 0).0, [255, 0, 0]);
        assert_eq!(img.get_pixel(1, 0).0, [0, 0, 128]);
    }

    proptest! {
        #[test]
        fn run_length_round_trips(bits in proptest::collection::vec(any::<bool>(), 12)) {
            let mask = BinaryMask::new(4, 3, bits).unwrap();
            prop_assert_eq!(RunLength::encode(&mask).decode().unwrap(), mask);
        }
    }
}
