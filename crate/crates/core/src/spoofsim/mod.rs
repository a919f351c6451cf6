//! Synthetic eyes and a digital stand-in for the print-and-recapture fake
//! fabrication chain: preprocess the real capture, halftone it, then degrade
//! it the way paper and a second trip through the camera would.

mod dataset;
mod texture;

pub use dataset::{build_dataset, render_capture, EyeDistribution, SessionJitter, IMAGES_PER_SESSION, SESSIONS};
pub use texture::{derive_seed, mix64, AnnulusNoise};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::imagecore::{
    black_top_hat, gaussian_blur_f32, histogram_equalize, median_filter, morph, top_hat, GrayImage, MorphOp,
    SeShape, StructuringElement,
};
use crate::manifest::ManifestError;
use crate::normalization::iris_boundary_distance;
use crate::segmentation::Circle;

#[derive(Debug, Error)]
pub enum SpoofError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// Upper and lower lids are arcs of circles this many iris radii wide, which
/// keeps them close to straight across the iris.
pub const EYELID_ARC_FACTOR: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EyeParams {
    pub width: usize,
    pub height: usize,
    pub iris: Circle,
    pub pupil: Circle,
    pub texture_seed: u64,
    pub octave_weights: Vec<f64>,
    /// Peak texture swing around `iris_level`, in gray levels.
    pub texture_contrast: f64,
    pub texture_rotation_deg: f64,
    /// Fraction of the iris diameter hidden by the upper lid; the lower lid
    /// hides half as much. Zero draws no lids.
    pub eyelid_coverage: f64,
    pub pupil_level: f64,
    pub iris_level: f64,
    pub sclera_level: f64,
    pub skin_level: f64,
    pub illumination_offset: f64,
    pub optics_blur: f64,
    pub sensor_noise: f64,
    pub capture_seed: u64,
}

impl EyeParams {
    pub fn validate(&self) -> Result<(), SpoofError> {
        let bad = |m: String| Err(SpoofError::InvalidParams(m));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero".into());
        }
        if !(self.pupil.r > 0.0 && self.pupil.r < self.iris.r) {
            return bad(format!("pupil radius {} must be in (0, iris radius {})", self.pupil.r, self.iris.r));
        }
        let offset = (self.pupil.cx - self.iris.cx).hypot(self.pupil.cy - self.iris.cy);
        if offset + self.pupil.r >= self.iris.r {
            return bad("pupil must lie strictly inside the iris".into());
        }
        if !(self.pupil_level < self.iris_level && self.iris_level < self.sclera_level) {
            return bad("intensities must satisfy pupil < iris < sclera".into());
        }
        if !(0.0..=1.0).contains(&self.eyelid_coverage) {
            return bad(format!("eyelid coverage {} outside [0, 1]", self.eyelid_coverage));
        }
        if self.optics_blur < 0.0 || self.sensor_noise < 0.0 || self.texture_contrast < 0.0 {
            return bad("blur, noise and contrast must be non-negative".into());
        }
        Ok(())
    }

    /// Whether `(x, y)` is covered by an eyelid.
    pub fn in_eyelid(&self, x: f64, y: f64) -> bool {
        if self.eyelid_coverage <= 0.0 {
            return false;
        }
        let ic = &self.iris;
        let arc = EYELID_ARC_FACTOR * ic.r;
        let dx = x - ic.cx;
        let sag = arc - (arc * arc - dx * dx).max(0.0).sqrt();
        let upper_apex = ic.cy - ic.r + self.eyelid_coverage * 2.0 * ic.r;
        let lower_apex = ic.cy + ic.r - self.eyelid_coverage * ic.r;
        y < upper_apex + sag || y > lower_apex - sag
    }
}

/// Renders a synthetic eye. Deterministic in `p` (including its seeds).
///
/// Panics if `p` fails [`EyeParams::validate`].
pub fn render_synthetic_eye(p: &EyeParams) -> GrayImage {
    if let Err(e) = p.validate() {
        panic!("invalid eye parameters: {e}");
    }
    let noise = AnnulusNoise::new(p.texture_seed, &p.octave_weights, 12, 3);
    let rot = p.texture_rotation_deg.to_radians();
    let (w, h) = (p.width, p.height);
    let mut plane = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let v = if p.in_eyelid(fx, fy) {
                p.skin_level
            } else if p.pupil.contains_point(fx, fy) {
                p.pupil_level
            } else if p.iris.contains_point(fx, fy) {
                let (dx, dy) = (fx - p.pupil.cx, fy - p.pupil.cy);
                let theta = dy.atan2(dx);
                let outer = iris_boundary_distance(&p.pupil, &p.iris, theta).unwrap_or(p.iris.r);
                let rho = (dx.hypot(dy) - p.pupil.r) / (outer - p.pupil.r);
                p.iris_level + p.texture_contrast * noise.sample(rho, theta - rot)
            } else {
                p.sclera_level
            };
            plane[y * w + x] = v as f32;
        }
    }
    if p.optics_blur > 0.0 {
        plane = gaussian_blur_f32(&plane, w, h, p.optics_blur as f32);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[p.capture_seed, 0x5e45]));
    let sensor = Normal::new(0.0, p.sensor_noise.max(0.0)).expect("finite sigma");
    let pixels = plane
        .iter()
        .map(|&v| {
            let n = if p.sensor_noise > 0.0 { sensor.sample(&mut rng) } else { 0.0 };
            (v as f64 + p.illumination_offset + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::from_raw(w, h, pixels).expect("dimensions checked")
}

/// One enhancement applied before "printing".
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum PreprocessStep {
    HistEq,
    Median { radius: usize },
    Open { se: StructuringElement },
    Close { se: StructuringElement },
    /// Top-hat contrast enhancement: `img + white_top_hat - black_top_hat`.
    TopHat { se: StructuringElement },
}

impl PreprocessStep {
    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        match *self {
            PreprocessStep::HistEq => histogram_equalize(img),
            PreprocessStep::Median { radius } => median_filter(img, radius),
            PreprocessStep::Open { se } => morph(img, &se, MorphOp::Open),
            PreprocessStep::Close { se } => morph(img, &se, MorphOp::Close),
            PreprocessStep::TopHat { se } => top_hat_enhance(img, &se),
        }
    }
}

/// Adds the bright residue of an opening and removes the dark residue of a
/// closing.
pub fn top_hat_enhance(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let white = top_hat(img, se);
    let black = black_top_hat(img, se);
    let pixels = img
        .pixels()
        .iter()
        .zip(white.pixels())
        .zip(black.pixels())
        .map(|((&v, &wt), &bt)| (v as i16 + wt as i16 - bt as i16).clamp(0, 255) as u8)
        .collect();
    GrayImage::from_raw(img.width(), img.height(), pixels).expect("same shape")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PreprocessChain(pub Vec<PreprocessStep>);

impl PreprocessChain {
    pub fn steps(&self) -> &[PreprocessStep] {
        &self.0
    }

    /// Open then top-hat enhancement with a radius-3 disk.
    pub fn open_tophat() -> Self {
        let se = StructuringElement::disk(3);
        Self(vec![PreprocessStep::Open { se }, PreprocessStep::TopHat { se }])
    }

    /// Named chains: the default pipeline and every single-step option.
    pub fn presets() -> Vec<(&'static str, PreprocessChain)> {
        let se = StructuringElement::disk(3);
        vec![
            ("open-tophat", Self::open_tophat()),
            ("none", Self(vec![])),
            ("histeq", Self(vec![PreprocessStep::HistEq])),
            ("median", Self(vec![PreprocessStep::Median { radius: 1 }])),
            ("open", Self(vec![PreprocessStep::Open { se }])),
            ("close", Self(vec![PreprocessStep::Close { se }])),
            ("tophat", Self(vec![PreprocessStep::TopHat { se }])),
        ]
    }

    pub fn preset(name: &str) -> Option<Self> {
        Self::presets().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
    }
}

pub fn apply_chain(img: &GrayImage, chain: &PreprocessChain) -> GrayImage {
    chain.steps().iter().fold(img.clone(), |acc, step| step.apply(&acc))
}

fn fmt_se(se: &StructuringElement) -> String {
    match se.shape {
        SeShape::Disk => format!("disk{}", se.radius),
        SeShape::Square => format!("square{}", se.radius),
    }
}

impl fmt::Display for PreprocessChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "none");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|s| match s {
                PreprocessStep::HistEq => "histeq".to_string(),
                PreprocessStep::Median { radius } => format!("median:{radius}"),
                PreprocessStep::Open { se } => format!("open:{}", fmt_se(se)),
                PreprocessStep::Close { se } => format!("close:{}", fmt_se(se)),
                PreprocessStep::TopHat { se } => format!("tophat:{}", fmt_se(se)),
            })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

fn parse_se(s: &str) -> Result<StructuringElement, String> {
    let (shape, digits) = if let Some(d) = s.strip_prefix("disk") {
        (SeShape::Disk, d)
    } else if let Some(d) = s.strip_prefix("square") {
        (SeShape::Square, d)
    } else {
        return Err(format!("unknown structuring element '{s}'"));
    };
    let radius: usize = digits.parse().map_err(|_| format!("bad radius in '{s}'"))?;
    if radius == 0 {
        return Err("structuring element radius must be at least 1".into());
    }
    Ok(StructuringElement { shape, radius })
}

/// Parses `step[,step...]` where a step is `histeq`, `median:<r>`, or
/// `open|close|tophat:<disk|square><r>`; `none` is the empty chain. A bare
/// preset name is also accepted.
impl FromStr for PreprocessChain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self(vec![]));
        }
        if let Some(chain) = Self::preset(s) {
            return Ok(chain);
        }
        let mut steps = Vec::new();
        for part in s.split(',').map(str::trim) {
            let (op, arg) = part.split_once(':').map_or((part, None), |(a, b)| (a, Some(b)));
            let step = match (op, arg) {
                ("histeq", None) => PreprocessStep::HistEq,
                ("median", Some(r)) => {
                    let radius: usize = r.parse().map_err(|_| format!("bad median radius '{r}'"))?;
                    if radius == 0 {
                        return Err("median radius must be at least 1".into());
                    }
                    PreprocessStep::Median { radius }
                }
                ("open", Some(se)) => PreprocessStep::Open { se: parse_se(se)? },
                ("close", Some(se)) => PreprocessStep::Close { se: parse_se(se)? },
                ("tophat", Some(se)) => PreprocessStep::TopHat { se: parse_se(se)? },
                _ => return Err(format!("unknown preprocessing step '{part}'")),
            };
            steps.push(step);
        }
        Ok(Self(steps))
    }
}

/// Specular reflection off the printout, placed relative to the image center.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Highlight {
    pub dx: f64,
    pub dy: f64,
    pub radius: f64,
    /// Half-width of the smooth rim around `radius`.
    pub softness: f64,
    pub intensity: f64,
    /// Blend weight at the center, in (0, 1].
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RecaptureParams {
    /// Halftone cell size in pixels; 0 disables halftoning.
    pub dot_pitch: usize,
    /// Gaussian blur sigma; 0 disables blurring.
    pub blur_sigma: f64,
    /// Fraction of contrast around mid-gray that survives, in (0, 1].
    pub contrast: f64,
    pub noise_sigma: f64,
    pub highlight: Option<Highlight>,
    /// Halftone screen of the printer; shared by every print it makes.
    pub screen_seed: u64,
    /// Per-print randomness.
    pub seed: u64,
}

impl RecaptureParams {
    /// Parameters that leave the image untouched.
    pub fn identity() -> Self {
        Self { dot_pitch: 0, blur_sigma: 0.0, contrast: 1.0, noise_sigma: 0.0, highlight: None, screen_seed: 0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), SpoofError> {
        if !(self.blur_sigma >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(SpoofError::InvalidParams("blur and noise sigma must be non-negative".into()));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(SpoofError::InvalidParams(format!("contrast {} outside (0, 1]", self.contrast)));
        }
        if let Some(h) = self.highlight {
            if !(h.radius > 0.0 && (0.0..=255.0).contains(&h.intensity)) {
                return Err(SpoofError::InvalidParams("highlight needs radius > 0 and intensity in [0, 255]".into()));
            }
        }
        Ok(())
    }

    /// Named print/paper combinations.
    pub fn presets() -> Vec<(&'static str, RecaptureParams)> {
        let glare = Some(Highlight { dx: 42.0, dy: -34.0, radius: 30.0, softness: 15.0, intensity: 230.0, opacity: 0.8 });
        vec![
            (
                "inkjet-highres",
                Self { dot_pitch: 4, blur_sigma: 2.0, contrast: 0.7, noise_sigma: 5.0, highlight: glare, screen_seed: 0, seed: 0 },
            ),
            (
                "inkjet-plain",
                Self { dot_pitch: 5, blur_sigma: 2.5, contrast: 0.6, noise_sigma: 7.0, highlight: glare, screen_seed: 0, seed: 0 },
            ),
            (
                "laser-plain",
                Self { dot_pitch: 6, blur_sigma: 2.0, contrast: 0.55, noise_sigma: 8.0, highlight: glare, screen_seed: 0, seed: 0 },
            ),
            ("ideal", Self::identity()),
        ]
    }

    pub fn preset(name: &str) -> Option<Self> {
        Self::presets().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
    }
}

impl Default for RecaptureParams {
    fn default() -> Self {
        Self::preset("inkjet-highres").expect("default preset exists")
    }
}

/// Print-then-capture degradation: halftone, blur, contrast loss, sensor
/// noise and an optional specular highlight, in that order.
pub fn simulate_print_recapture(img: &GrayImage, rp: &RecaptureParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut plane: Vec<f32> = img.pixels().iter().map(|&v| v as f32).collect();

    if rp.dot_pitch > 0 {
        let p = rp.dot_pitch;
        let levels = (p * p) as f32;
        let mut perm: Vec<usize> = (0..p * p).collect();
        for cy in 0..h.div_ceil(p) {
            for cx in 0..w.div_ceil(p) {
                let mut state = derive_seed(&[rp.screen_seed, 0xd17e, cx as u64, cy as u64]);
                for k in (1..perm.len()).rev() {
                    state = mix64(state);
                    perm.swap(k, (state % (k as u64 + 1)) as usize);
                }
                for dy in 0..p {
                    for dx in 0..p {
                        let (x, y) = (cx * p + dx, cy * p + dy);
                        if x < w && y < h {
                            let threshold = (perm[dy * p + dx] as f32 + 0.5) / levels * 255.0;
                            let i = y * w + x;
                            plane[i] = if plane[i] > threshold { 255.0 } else { 0.0 };
                        }
                    }
                }
                perm.sort_unstable();
            }
        }
    }
    if rp.blur_sigma > 0.0 {
        plane = gaussian_blur_f32(&plane, w, h, rp.blur_sigma as f32);
    }
    if rp.contrast != 1.0 {
        let c = rp.contrast as f32;
        plane.iter_mut().for_each(|v| *v = 128.0 + c * (*v - 128.0));
    }
    if rp.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[rp.seed, 0x9015e]));
        let normal = Normal::new(0.0, rp.noise_sigma as f32).expect("finite sigma");
        plane.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    if let Some(hl) = rp.highlight {
        let (hx, hy) = (w as f64 / 2.0 + hl.dx, h as f64 / 2.0 + hl.dy);
        for y in 0..h {
            for x in 0..w {
                let d = (x as f64 - hx).hypot(y as f64 - hy);
                let t = ((hl.radius + hl.softness - d) / (2.0 * hl.softness).max(1e-9)).clamp(0.0, 1.0);
                let weight = (t * t * (3.0 - 2.0 * t) * hl.opacity) as f32;
                if weight > 0.0 {
                    let i = y * w + x;
                    plane[i] = plane[i] * (1.0 - weight) + hl.intensity as f32 * weight;
                }
            }
        }
    }
    let pixels = plane.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::from_raw(w, h, pixels).expect("same shape")
}

/// Random jitter helper shared by the dataset builder.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

#[cfg(test)]
mod tests;
