//! Image decode + resize into the fixed (H, W, 3) tensor shape.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Model input spatial size.
pub const INPUT_SIZE: (usize, usize) = (224, 224);

/// A decoded image: (height, width, 3) with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<S: Real> {
    pub pixels: Array3<S>,
    pub source_path: PathBuf,
}

impl<S: Real> ImageTensor<S> {
    pub fn from_pixels(pixels: Array3<S>, source_path: impl Into<PathBuf>) -> Self {
        ImageTensor {
            pixels,
            source_path: source_path.into(),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    /// Check the [0, 1] range invariant.
    pub fn values_in_unit_range(&self) -> bool {
        self.pixels
            .iter()
            .all(|&v| v >= S::zero() && v <= S::one())
    }

    /// Encode back to 8-bit RGB (for previews and reports).
    pub fn to_rgb8(&self) -> image::RgbImage {
        let (h, w) = (self.height(), self.width());
        let mut out = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let px = [
                    (self.pixels[[y, x, 0]].to_f64_c() * 255.0).round() as u8,
                    (self.pixels[[y, x, 1]].to_f64_c() * 255.0).round() as u8,
                    (self.pixels[[y, x, 2]].to_f64_c() * 255.0).round() as u8,
                ];
                out.put_pixel(x as u32, y as u32, image::Rgb(px));
            }
        }
        out
    }
}

/// Decode an image, force 3-channel RGB, resize with bilinear interpolation
/// and scale to [0, 1]. Grayscale sources are replicated across channels by
/// the RGB conversion. A source already at the target size is passed through
/// untouched (no resampling).
pub fn load_image<S: Real>(path: &Path, target_size: (usize, usize)) -> Result<ImageTensor<S>> {
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = decoded.into_rgb8();
    let (th, tw) = target_size;
    let rgb = if (rgb.height() as usize, rgb.width() as usize) == (th, tw) {
        rgb
    } else {
        image::imageops::resize(&rgb, tw as u32, th as u32, FilterType::Triangle)
    };
    let scale = S::from_f64_c(1.0 / 255.0);
    let pixels = Array3::from_shape_fn((th, tw, 3), |(y, x, c)| {
        S::from_f64_c(rgb.get_pixel(x as u32, y as u32)[c] as f64) * scale
    });
    Ok(ImageTensor {
        pixels,
        source_path: path.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
        let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(x, y)));
        img.save(path).unwrap();
    }

    #[test]
    fn resize_to_target_shape_and_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.png");
        write_png(&path, 1024, 768, |x, y| {
            [(x % 256) as u8, (y % 256) as u8, ((x + y) % 256) as u8]
        });
        let img: ImageTensor<f32> = load_image(&path, INPUT_SIZE).unwrap();
        assert_eq!(img.pixels.shape(), &[224, 224, 3]);
        assert!(img.values_in_unit_range());
    }

    #[test]
    fn already_target_size_is_passed_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exact.png");
        write_png(&path, 224, 224, |x, y| {
            [(x % 251) as u8, (y % 241) as u8, 13]
        });
        let img: ImageTensor<f64> = load_image(&path, INPUT_SIZE).unwrap();
        // values equal source / 255 exactly
        assert_eq!(img.pixels[[5, 7, 0]], 7.0 / 255.0);
        assert_eq!(img.pixels[[9, 3, 1]], 9.0 / 255.0);
        assert_eq!(img.pixels[[0, 0, 2]], 13.0 / 255.0);
    }

    #[test]
    fn constant_gray_is_resize_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        write_png(&path, 300, 170, |_, _| [128, 128, 128]);
        let img: ImageTensor<f32> = load_image(&path, INPUT_SIZE).unwrap();
        for &v in img.pixels.iter() {
            assert!((v - 0.5).abs() <= 1.0 / 255.0, "value {v} too far from 0.5");
        }
    }

    #[test]
    fn grayscale_source_replicates_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray8.png");
        let img = image::GrayImage::from_fn(64, 64, |x, y| image::Luma([(x + y) as u8]));
        img.save(&path).unwrap();
        let loaded: ImageTensor<f32> = load_image(&path, INPUT_SIZE).unwrap();
        assert_eq!(loaded.pixels.shape(), &[224, 224, 3]);
        for y in [0usize, 100, 223] {
            for x in [0usize, 50, 223] {
                let r = loaded.pixels[[y, x, 0]];
                assert_eq!(r, loaded.pixels[[y, x, 1]]);
                assert_eq!(r, loaded.pixels[[y, x, 2]]);
            }
        }
    }

    #[test]
    fn corrupt_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.jpg");
        std::fs::write(&path, b"not an image at all").unwrap();
        let err = load_image::<f32>(&path, INPUT_SIZE).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }));
        assert!(err.to_string().contains("broken.jpg"));
    }
}
