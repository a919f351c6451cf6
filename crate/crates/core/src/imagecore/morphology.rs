use super::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeShape {
    Disk,
    Square,
}

/// Flat structuring element centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct StructuringElement {
    pub shape: SeShape,
    pub radius: usize,
}

impl StructuringElement {
    pub fn disk(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be at least 1");
        Self { shape: SeShape::Disk, radius }
    }

    pub fn square(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be at least 1");
        Self { shape: SeShape::Square, radius }
    }

    /// Half-width of the footprint on the row at vertical offset `dy`.
    pub fn half_width(&self, dy: isize) -> usize {
        let r = self.radius as isize;
        debug_assert!(dy.abs() <= r);
        match self.shape {
            SeShape::Square => self.radius,
            SeShape::Disk => {
                let rem = r * r - dy * dy;
                (rem as f64).sqrt().floor() as usize
            }
        }
    }

    pub fn contains(&self, dx: isize, dy: isize) -> bool {
        let r = self.radius as isize;
        match self.shape {
            SeShape::Square => dx.abs() <= r && dy.abs() <= r,
            SeShape::Disk => dx * dx + dy * dy <= r * r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

pub fn morph(img: &GrayImage, se: &StructuringElement, op: MorphOp) -> GrayImage {
    match op {
        MorphOp::Erode => rank_filter(img, se, u8::min, u8::MAX),
        MorphOp::Dilate => rank_filter(img, se, u8::max, u8::MIN),
        MorphOp::Open => {
            let eroded = rank_filter(img, se, u8::min, u8::MAX);
            rank_filter(&eroded, se, u8::max, u8::MIN)
        }
        MorphOp::Close => {
            let dilated = rank_filter(img, se, u8::max, u8::MIN);
            rank_filter(&dilated, se, u8::min, u8::MAX)
        }
    }
}

/// White top-hat: `img - open(img)`, saturating at zero.
pub fn top_hat(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let opened = morph(img, se, MorphOp::Open);
    saturating_diff(img, &opened)
}

/// Black top-hat: `close(img) - img`, saturating at zero.
pub fn black_top_hat(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let closed = morph(img, se, MorphOp::Close);
    saturating_diff(&closed, img)
}

fn saturating_diff(a: &GrayImage, b: &GrayImage) -> GrayImage {
    debug_assert!(a.same_shape(b));
    GrayImage {
        width: a.width,
        height: a.height,
        pixels: a.pixels.iter().zip(&b.pixels).map(|(&x, &y)| x.saturating_sub(y)).collect(),
    }
}

// Footprint decomposed into horizontal runs: one 1-D pass per distinct
// half-width, then a vertical combination over the rows of the footprint.
fn rank_filter(
    img: &GrayImage,
    se: &StructuringElement,
    pick: fn(u8, u8) -> u8,
    identity: u8,
) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = se.radius as isize;
    let mut widths: Vec<usize> = (-r..=r).map(|dy| se.half_width(dy)).collect();
    widths.sort_unstable();
    widths.dedup();

    let horizontal: Vec<(usize, Vec<u8>)> = widths
        .iter()
        .map(|&hw| {
            let mut buf = vec![identity; w * h];
            let hw = hw as isize;
            for y in 0..h {
                let row = &img.pixels[y * w..(y + 1) * w];
                let dst = &mut buf[y * w..(y + 1) * w];
                for (x, d) in dst.iter_mut().enumerate() {
                    let lo = (x as isize - hw).max(0) as usize;
                    let hi = (x as isize + hw).min(w as isize - 1) as usize;
                    *d = row[lo..=hi].iter().copied().fold(identity, pick);
                }
            }
            (hw as usize, buf)
        })
        .collect();

    let mut out = vec![identity; w * h];
    for dy in -r..=r {
        let hw = se.half_width(dy);
        let src = &horizontal.iter().find(|(w0, _)| *w0 == hw).expect("width present").1;
        for y in 0..h {
            let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
            let s = &src[sy * w..(sy + 1) * w];
            let d = &mut out[y * w..(y + 1) * w];
            for (o, &v) in d.iter_mut().zip(s) {
                *o = pick(*o, v);
            }
        }
    }
    GrayImage { width: w, height: h, pixels: out }
}
