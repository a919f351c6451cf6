use super::GrayImage;

/// Global histogram equalization via CDF remapping.
///
/// A single-level image has no spread to redistribute and is returned as is.
pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let mut hist = [0usize; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len();
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (level, &count) in hist.iter().enumerate() {
        acc += count;
        cdf[level] = acc;
    }
    let cdf_min = hist
        .iter()
        .position(|&c| c > 0)
        .map(|level| cdf[level])
        .unwrap_or(0);
    if cdf_min == total {
        return img.clone();
    }
    let denom = (total - cdf_min) as f64;
    let mut lut = [0u8; 256];
    for level in 0..256 {
        let num = cdf[level].saturating_sub(cdf_min) as f64;
        lut[level] = (255.0 * num / denom).round().clamp(0.0, 255.0) as u8;
    }
    img.map(|p| lut[p as usize])
}

/// Median over the `(2r+1)^2` window around each pixel.
pub fn median_filter(img: &GrayImage, radius: usize) -> GrayImage {
    assert!(radius >= 1, "median radius must be at least 1");
    let r = radius as isize;
    let (w, h) = (img.width(), img.height());
    let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
    let mut out = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    window.push(img.get_clamped(x + dx, y + dy));
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable(mid);
            out[y as usize * w + x as usize] = *m;
        }
    }
    GrayImage { width: w, height: h, pixels: out }
}

/// Normalized 1-D Gaussian kernel truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    assert!(sigma > 0.0, "gaussian sigma must be positive");
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f32> = (-radius..=radius)
        .map(|i| (-((i * i) as f32) / denom).exp())
        .collect();
    let sum: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    kernel
}

/// Separable Gaussian smoothing of a float raster with clamped borders.
pub fn gaussian_blur_f32(data: &[f32], width: usize, height: usize, sigma: f32) -> Vec<f32> {
    assert_eq!(data.len(), width * height);
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![0f32; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &wk) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, width as isize - 1) as usize;
                acc += wk * row[sx];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0f32; data.len()];
    for y in 0..height {
        for (k, &wk) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - radius).clamp(0, height as isize - 1) as usize;
            let src = &tmp[sy * width..(sy + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    out
}

pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> GrayImage {
    let data: Vec<f32> = img.pixels().iter().map(|&p| p as f32).collect();
    let blurred = gaussian_blur_f32(&data, img.width(), img.height(), sigma);
    GrayImage {
        width: img.width(),
        height: img.height(),
        pixels: blurred.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}
