//! Directories of 8-bit PNG images, one file per image named `<id>.png`.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

use super::{write_atomic, Dataset};

/// Maps `[0, 1]` to `0..=255`, rounding half to even and clipping.
pub fn quantize_u8(v: f32) -> u8 {
    round_scaled(f64::from(v) * 255.0)
}

fn round_scaled(x: f64) -> u8 {
    x.round_ties_even().clamp(0.0, 255.0) as u8
}

pub fn dequantize_u8(v: u8) -> f32 {
    (f64::from(v) / 255.0) as f32
}

/// The image as it reads back after an 8-bit round trip.
pub fn quantized(img: &ImageTensor) -> ImageTensor {
    let data = img.data().iter().map(|&v| dequantize_u8(quantize_u8(v))).collect();
    ImageTensor::new(img.shape(), data).expect("same shape")
}

fn to_interleaved(img: &ImageTensor) -> Vec<u8> {
    let [c, h, w] = img.shape();
    let data = img.data();
    let mut out = Vec::with_capacity(c * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push(quantize_u8(data[ch * h * w + y * w + x]));
            }
        }
    }
    out
}

pub fn encode_png(img: &ImageTensor) -> Result<Vec<u8>> {
    let [c, h, w] = img.shape();
    let (w32, h32) = (w as u32, h as u32);
    let buf = to_interleaved(img);
    let dynamic = match c {
        1 => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, buf).expect("size")),
        3 => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, buf).expect("size")),
        4 => DynamicImage::ImageRgba8(ImageBuffer::<Rgba<u8>, _>::from_raw(w32, h32, buf).expect("size")),
        _ => {
            return Err(Error::Format(format!(
                "PNG export needs 1, 3 or 4 channels, got {c}"
            )))
        }
    };
    let mut out = Vec::new();
    dynamic
        .write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG encoding failed: {e}")))?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageTensor> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG decoding failed: {e}")))?;
    let (c, raw, w, h) = match img.color().channel_count() {
        1 | 2 => {
            let b = img.to_luma8();
            (1, b.as_raw().clone(), b.width(), b.height())
        }
        3 => {
            let b = img.to_rgb8();
            (3, b.as_raw().clone(), b.width(), b.height())
        }
        _ => {
            let b = img.to_rgba8();
            (4, b.as_raw().clone(), b.width(), b.height())
        }
    };
    let (h, w) = (h as usize, w as usize);
    let mut data = vec![0.0f32; c * h * w];
    for (i, v) in raw.into_iter().enumerate() {
        let (pixel, ch) = (i / c, i % c);
        data[ch * h * w + pixel] = dequantize_u8(v);
    }
    ImageTensor::new([c, h, w], data)
}

pub fn write_png_dir(dir: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (id, img) in dataset.iter() {
        write_atomic(&dir.join(format!("{id}.png")), &encode_png(img)?)?;
    }
    Ok(())
}

/// Reads every `*.png` in `dir`, ordered by file name.
pub fn read_png_dir(dir: &Path) -> Result<Dataset> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let mut ids = Vec::with_capacity(paths.len());
    let mut images = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        images.push(decode_png(&bytes)?);
        ids.push(
            path.file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Format(format!("non-UTF-8 file name {}", path.display())))?
                .to_string(),
        );
    }
    Dataset::new(ids, images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_to_even() {
        assert_eq!(round_scaled(0.5), 0);
        assert_eq!(round_scaled(1.5), 2);
        assert_eq!(round_scaled(2.5), 2);
        assert_eq!(quantize_u8(-0.2), 0);
        assert_eq!(quantize_u8(1.2), 255);
        for v in 0..=255u8 {
            assert_eq!(quantize_u8(dequantize_u8(v)), v);
        }
    }

    #[test]
    fn png_roundtrip_is_quantization() {
        let data: Vec<f32> = (0..3 * 4 * 5).map(|i| i as f32 / 59.0).collect();
        let img = ImageTensor::new([3, 4, 5], data).unwrap();
        let back = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, quantized(&img));
        let gray = ImageTensor::filled([1, 2, 3], 0.2);
        assert_eq!(decode_png(&encode_png(&gray).unwrap()).unwrap(), quantized(&gray));
    }

    #[test]
    fn directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = quantized(&ImageTensor::filled([3, 2, 2], 0.3));
        let ds = Dataset::new(vec!["b".into(), "a".into()], vec![img.clone(), img]).unwrap();
        write_png_dir(dir.path(), &ds).unwrap();
        let back = read_png_dir(dir.path()).unwrap();
        assert_eq!(back.ids(), ["a", "b"]);
    }
}
