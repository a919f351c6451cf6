//! Rubber-sheet unwrapping of the iris annulus into a fixed-size
//! radial-by-angular grid, referenced to the pupil center.
//!
//! Column `j` samples the ray at angle `2*pi*j/A` measured from the positive
//! x axis towards positive y. Row 0 sits half a pixel outside the pupil
//! boundary, row `R-1` half a pixel inside the iris boundary.

use thiserror::Error;

use crate::imagecore::GrayImage;
use crate::segmentation::{Circle, SegmentationResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizationError {
    #[error("degenerate geometry: the pupil center is not inside the iris circle")]
    DegenerateGeometry,
    #[error("invalid resolution {radial}x{angular} (need radial >= 2, angular >= 8)")]
    InvalidResolution { radial: usize, angular: usize },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalizedPattern {
    radial_res: usize,
    angular_res: usize,
    samples: Vec<f32>,
    /// `true` marks an invalid (occluded or out-of-frame) sample.
    mask: Vec<bool>,
}

impl NormalizedPattern {
    pub fn new(
        radial_res: usize,
        angular_res: usize,
        samples: Vec<f32>,
        mask: Vec<bool>,
    ) -> Result<Self, NormalizationError> {
        if radial_res < 1 || angular_res < 1 || samples.len() != radial_res * angular_res || mask.len() != samples.len() {
            return Err(NormalizationError::InvalidResolution { radial: radial_res, angular: angular_res });
        }
        Ok(Self { radial_res, angular_res, samples, mask })
    }

    pub fn radial_res(&self) -> usize {
        self.radial_res
    }

    pub fn angular_res(&self) -> usize {
        self.angular_res
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.samples[r * self.angular_res..(r + 1) * self.angular_res]
    }

    pub fn row_mask(&self, r: usize) -> &[bool] {
        &self.mask[r * self.angular_res..(r + 1) * self.angular_res]
    }

    pub fn sample(&self, r: usize, a: usize) -> f32 {
        self.samples[r * self.angular_res + a]
    }

    pub fn is_masked(&self, r: usize, a: usize) -> bool {
        self.mask[r * self.angular_res + a]
    }

    pub fn set_masked(&mut self, r: usize, a: usize, masked: bool) {
        self.mask[r * self.angular_res + a] = masked;
    }

    /// Pattern as an `A x R` image (masked samples drawn black).
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.angular_res, self.radial_res, |x, y| {
            if self.is_masked(y, x) {
                0
            } else {
                self.sample(y, x).round().clamp(0.0, 255.0) as u8
            }
        })
    }

    /// Validity mask as an image: 255 for masked samples, 0 otherwise.
    pub fn mask_image(&self) -> GrayImage {
        GrayImage::from_fn(self.angular_res, self.radial_res, |x, y| {
            if self.is_masked(y, x) {
                255
            } else {
                0
            }
        })
    }
}

/// Distance from the pupil center to the iris boundary along angle `theta`.
pub fn iris_boundary_distance(pupil: &Circle, iris: &Circle, theta: f64) -> Option<f64> {
    let (ox, oy) = (iris.cx - pupil.cx, iris.cy - pupil.cy);
    let (s, c) = theta.sin_cos();
    let proj = ox * c + oy * s;
    let disc = proj * proj - (ox * ox + oy * oy) + iris.r * iris.r;
    if disc < 0.0 {
        return None;
    }
    let d = proj + disc.sqrt();
    (d > 0.0).then_some(d)
}

/// Bilinear sample; `None` outside `[0, w-1] x [0, h-1]`.
pub fn bilinear(img: &GrayImage, x: f64, y: f64) -> Option<f64> {
    let (w, h) = (img.width(), img.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let p = |xx, yy| img.get(xx, yy) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Image coordinates of sample `(row, col)` for the given geometry.
pub fn sample_position(
    seg: &SegmentationResult,
    radial_res: usize,
    angular_res: usize,
    row: usize,
    col: usize,
) -> Option<(f64, f64)> {
    let theta = 2.0 * std::f64::consts::PI * col as f64 / angular_res as f64;
    let outer = iris_boundary_distance(&seg.pupil, &seg.iris, theta)? - 0.5;
    let inner = seg.pupil.r + 0.5;
    let t = row as f64 / (radial_res - 1) as f64;
    let dist = inner + t * (outer - inner);
    let (s, c) = theta.sin_cos();
    Some((seg.pupil.cx + dist * c, seg.pupil.cy + dist * s))
}

pub fn normalize(
    img: &GrayImage,
    seg: &SegmentationResult,
    radial_res: usize,
    angular_res: usize,
) -> Result<NormalizedPattern, NormalizationError> {
    if radial_res < 2 || angular_res < 8 {
        return Err(NormalizationError::InvalidResolution { radial: radial_res, angular: angular_res });
    }
    let mut samples = vec![0f32; radial_res * angular_res];
    let mut mask = vec![false; radial_res * angular_res];
    let eyelids: Vec<_> = [seg.upper_eyelid, seg.lower_eyelid].into_iter().flatten().collect();
    for col in 0..angular_res {
        for row in 0..radial_res {
            let (x, y) = sample_position(seg, radial_res, angular_res, row, col)
                .ok_or(NormalizationError::DegenerateGeometry)?;
            let i = row * angular_res + col;
            match bilinear(img, x, y) {
                Some(v) if !eyelids.iter().any(|l| l.occludes(x, y)) => samples[i] = v as f32,
                _ => mask[i] = true,
            }
        }
    }
    Ok(NormalizedPattern { radial_res, angular_res, samples, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{EyelidLine, OccludedSide};
    use std::f64::consts::PI;

    fn concentric(cx: f64, cy: f64, rp: f64, ri: f64) -> SegmentationResult {
        SegmentationResult {
            pupil: Circle::new(cx, cy, rp),
            iris: Circle::new(cx, cy, ri),
            upper_eyelid: None,
            lower_eyelid: None,
            pupil_score: 1.0,
            iris_score: 1.0,
        }
    }

    #[test]
    fn offset_boundary_distances() {
        let pupil = Circle::new(0.0, 0.0, 20.0);
        let iris = Circle::new(5.0, 0.0, 60.0);
        assert!((iris_boundary_distance(&pupil, &iris, 0.0).unwrap() - 65.0).abs() < 1e-12);
        assert!((iris_boundary_distance(&pupil, &iris, PI).unwrap() - 55.0).abs() < 1e-12);
        let outside = Circle::new(100.0, 0.0, 60.0);
        assert!(iris_boundary_distance(&pupil, &outside, PI).is_none());
        assert!(iris_boundary_distance(&pupil, &outside, PI / 2.0).is_none());
    }

    #[test]
    fn radial_gradient_gives_constant_rows() {
        let (cx, cy) = (80.0, 70.0);
        let img = GrayImage::from_fn(160, 140, |x, y| {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            (d * 3.0).min(255.0) as u8
        });
        let p = normalize(&img, &concentric(cx, cy, 15.0, 60.0), 20, 64).unwrap();
        for r in 0..20 {
            let row = p.row(r);
            let min = row.iter().cloned().fold(f32::MAX, f32::min);
            let max = row.iter().cloned().fold(f32::MIN, f32::max);
            assert!(max - min <= 2.0, "row {r}: {min}..{max}");
        }
        assert!(p.mask().iter().all(|&m| !m));
    }

    #[test]
    fn zero_angle_column_follows_horizontal_ray() {
        let img = GrayImage::from_fn(200, 100, |x, _| x as u8);
        let seg = concentric(50.0, 50.0, 10.0, 40.0);
        let p = normalize(&img, &seg, 20, 32).unwrap();
        assert!((p.sample(0, 0) - 60.5).abs() < 1e-4);
        assert!((p.sample(19, 0) - 89.5).abs() < 1e-4);
        for r in 1..20 {
            assert!(p.sample(r, 0) > p.sample(r - 1, 0));
        }
    }

    #[test]
    fn eyelid_masks_upper_half_plane() {
        let img = GrayImage::filled(200, 200, 120);
        let mut seg = concentric(100.0, 100.0, 20.0, 60.0);
        seg.upper_eyelid = EyelidLine::new(0.0, 1.0, 70.0, OccludedSide::Above);
        let (rr, aa) = (16, 96);
        let p = normalize(&img, &seg, rr, aa).unwrap();
        for r in 0..rr {
            for a in 0..aa {
                let (_, y) = sample_position(&seg, rr, aa, r, a).unwrap();
                assert_eq!(p.is_masked(r, a), y < 70.0);
            }
        }
        assert!(p.mask().iter().any(|&m| m));
    }

    #[test]
    fn never_reads_outside_the_frame() {
        let img = GrayImage::filled(100, 90, 200);
        // iris spills over the left and top borders
        let seg = concentric(30.0, 25.0, 12.0, 45.0);
        let (rr, aa) = (20, 120);
        let p = normalize(&img, &seg, rr, aa).unwrap();
        let mut masked = 0;
        for r in 0..rr {
            for a in 0..aa {
                let (x, y) = sample_position(&seg, rr, aa, r, a).unwrap();
                let inside = x >= 0.0 && y >= 0.0 && x <= 99.0 && y <= 89.0;
                assert_eq!(!p.is_masked(r, a), inside);
                masked += p.is_masked(r, a) as usize;
            }
        }
        assert!(masked > 0);
        assert_eq!(p.samples().len(), rr * aa);
    }

    #[test]
    fn rotation_shifts_columns() {
        let a_res = 120;
        let delta = 2.0 * PI / a_res as f64;
        let (cx, cy) = (100.0, 100.0);
        let texture = |x: f64, y: f64, rot: f64| -> u8 {
            let (dx, dy) = (x - cx, y - cy);
            let phi = dy.atan2(dx) - rot;
            let rho = dx.hypot(dy);
            (128.0 + 60.0 * (5.0 * phi).sin() * (rho / 9.0).cos() + 30.0 * (3.0 * phi + 1.0).cos()).round() as u8
        };
        let base = GrayImage::from_fn(200, 200, |x, y| texture(x as f64, y as f64, 0.0));
        let rotated = GrayImage::from_fn(200, 200, |x, y| texture(x as f64, y as f64, delta));
        let seg = concentric(cx, cy, 20.0, 70.0);
        let p0 = normalize(&base, &seg, 20, a_res).unwrap();
        let p1 = normalize(&rotated, &seg, 20, a_res).unwrap();
        let mut total = 0.0;
        for r in 0..20 {
            for a in 0..a_res {
                total += (p1.sample(r, (a + 1) % a_res) - p0.sample(r, a)).abs() as f64;
            }
        }
        let mad = total / (20 * a_res) as f64;
        assert!(mad <= 2.0, "mean abs diff {mad}");
    }

    #[test]
    fn rejects_tiny_resolution() {
        let img = GrayImage::filled(50, 50, 0);
        let seg = concentric(25.0, 25.0, 5.0, 20.0);
        assert!(normalize(&img, &seg, 1, 32).is_err());
        assert!(normalize(&img, &seg, 4, 7).is_err());
    }

    #[test]
    fn pattern_images_have_grid_shape() {
        let img = GrayImage::filled(120, 120, 90);
        let mut seg = concentric(60.0, 60.0, 10.0, 40.0);
        seg.lower_eyelid = EyelidLine::new(0.0, 1.0, 80.0, OccludedSide::Below);
        let p = normalize(&img, &seg, 8, 40).unwrap();
        let (pi, mi) = (p.to_image(), p.mask_image());
        assert_eq!((pi.width(), pi.height()), (40, 8));
        assert!(mi.pixels().iter().all(|&v| v == 0 || v == 255));
        assert!(mi.pixels().contains(&255));
    }
}
