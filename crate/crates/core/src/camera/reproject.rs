use image::{GrayImage, Luma};
use nalgebra::Vector2;

use super::{CameraModel, PalCamera, PinholeCamera, VirtualPinhole};

/// A resampled perspective image with a per-pixel validity mask (row-major).
#[derive(Debug, Clone)]
pub struct PinholeImage {
    pub image: GrayImage,
    pub valid: Vec<bool>,
}

impl PinholeImage {
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[(y * self.image.width() + x) as usize]
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len().max(1) as f64
    }
}

fn bilinear(img: &GrayImage, p: &Vector2<f64>) -> Option<f64> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 || p.y > h - 1.0 {
        return None;
    }
    let x0 = p.x.floor();
    let y0 = p.y.floor();
    let fx = p.x - x0;
    let fy = p.y - y0;
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let g = |x: u32, y: u32| img.get_pixel(x, y)[0] as f64;
    let top = g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx;
    let bottom = g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Resamples a panoramic image into the perspective view of `pin`. Each output
/// pixel is back-projected through the pinhole, rotated into the panoramic
/// frame, projected onto the annulus and read with bilinear interpolation.
/// Pixels whose ray misses the annulus are black and flagged invalid.
pub fn reproject_to_pinhole(cam: &PalCamera, pin: &PinholeCamera, image: &GrayImage) -> PinholeImage {
    let view = VirtualPinhole {
        pal: cam.clone(),
        pinhole: pin.clone(),
    };
    let (w, h) = (pin.width(), pin.height());
    let mut out = GrayImage::new(w, h);
    let mut valid = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let px = Vector2::new(x as f64, y as f64);
            let Ok(bearing) = view.back_project(&px) else {
                continue;
            };
            let Ok(proj) = cam.project(&bearing) else {
                continue;
            };
            if !proj.valid {
                continue;
            }
            if let Some(v) = bilinear(image, &proj.pixel) {
                out.put_pixel(x, y, Luma([v.round().clamp(0.0, 255.0) as u8]));
                valid[(y * w + x) as usize] = true;
            }
        }
    }
    PinholeImage { image: out, valid }
}
