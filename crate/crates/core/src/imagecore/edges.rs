//! Canny edge detection: Gaussian prefilter, Sobel gradients, non-maximum
//! suppression and hysteresis thresholding.

use super::{gaussian_blur_f32, GrayImage};

/// Thresholds are fractions of the maximum gradient magnitude in the image.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CannyParams {
    pub sigma: f32,
    pub low: f32,
    pub high: f32,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self { sigma: 2.0, low: 0.2, high: 0.5 }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma > 0.0) {
            return Err(format!("canny sigma must be positive, got {}", self.sigma));
        }
        if !(0.0 < self.low && self.low < self.high && self.high <= 1.0) {
            return Err(format!(
                "canny thresholds need 0 < low < high <= 1, got low={} high={}",
                self.low, self.high
            ));
        }
        Ok(())
    }
}

/// Binary edge map (0 or 255).
pub fn canny_edges(img: &GrayImage, params: &CannyParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let data: Vec<f32> = img.pixels().iter().map(|&p| p as f32).collect();
    let smooth = gaussian_blur_f32(&data, w, h, params.sigma);

    let at = |x: isize, y: isize| -> f32 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        smooth[cy * w + cx]
    };
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    let mut mag = vec![0f32; w * h];
    let mut max_mag = 0f32;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            let m = dx.hypot(dy);
            mag[i] = m;
            max_mag = max_mag.max(m);
        }
    }
    let mut out = vec![0u8; w * h];
    if max_mag <= f32::EPSILON {
        return GrayImage { width: w, height: h, pixels: out };
    }

    // suppression: keep a pixel that strictly beats its predecessor along the
    // gradient and is not beaten by its successor, so plateaus of two equal
    // responses thin to a single pixel
    let mag_at = |x: isize, y: isize| -> f32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees();
            let a = if angle < 0.0 { angle + 180.0 } else { angle };
            let (ox, oy) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let prev = mag_at(x - ox, y - oy);
            let next = mag_at(x + ox, y + oy);
            if m > prev && m >= next {
                thin[i] = m;
            }
        }
    }

    let high = params.high * max_mag;
    let low = params.low * max_mag;
    let mut stack = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high && out[i] == 0 {
            out[i] = 255;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % w) as isize, (j / w) as isize);
                for ny in jy - 1..=jy + 1 {
                    for nx in jx - 1..=jx + 1 {
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if out[k] == 0 && thin[k] >= low {
                            out[k] = 255;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    GrayImage { width: w, height: h, pixels: out }
}
