use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    apply_chain, derive_seed, render_synthetic_eye, simulate_print_recapture, uniform, EyeParams, PreprocessChain,
    RecaptureParams, SpoofError,
};
use crate::imagecore::{save_pgm, GrayImage};
use crate::manifest::{DatasetManifest, Eye, ImageKind, ManifestEntry, Subject, MANIFEST_FILE};
use crate::segmentation::Circle;

pub const SESSIONS: u8 = 2;
pub const IMAGES_PER_SESSION: u32 = 4;

/// Capture-to-capture variation of one identity.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SessionJitter {
    /// Max center shift in pixels along each axis.
    pub translation: f64,
    /// Max relative change of both radii.
    pub radius_scale: f64,
    pub rotation_deg: f64,
    pub illumination: f64,
    pub eyelid_coverage: f64,
}

impl Default for SessionJitter {
    fn default() -> Self {
        Self { translation: 3.0, radius_scale: 0.02, rotation_deg: 3.0, illumination: 5.0, eyelid_coverage: 0.02 }
    }
}

/// Ranges identities are drawn from. Each `(lo, hi)` is sampled uniformly.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EyeDistribution {
    pub width: usize,
    pub height: usize,
    pub iris_radius: (f64, f64),
    /// Max offset of the iris center from the image center.
    pub center_jitter: f64,
    pub pupil_ratio: (f64, f64),
    /// Max pupil offset from the iris center, per axis.
    pub pupil_offset: (f64, f64),
    pub eyelid_coverage: (f64, f64),
    pub pupil_level: (f64, f64),
    pub iris_level: (f64, f64),
    pub sclera_level: (f64, f64),
    pub skin_level: (f64, f64),
    pub texture_contrast: (f64, f64),
    pub octave_weights: Vec<f64>,
    pub optics_blur: f64,
    pub sensor_noise: f64,
    pub jitter: SessionJitter,
}

impl Default for EyeDistribution {
    fn default() -> Self {
        Self {
            width: 320,
            height: 280,
            iris_radius: (80.0, 100.0),
            center_jitter: 10.0,
            pupil_ratio: (0.3, 0.45),
            pupil_offset: (4.0, 3.0),
            eyelid_coverage: (0.0, 0.15),
            pupil_level: (20.0, 35.0),
            iris_level: (90.0, 120.0),
            sclera_level: (185.0, 210.0),
            skin_level: (55.0, 75.0),
            texture_contrast: (40.0, 55.0),
            octave_weights: vec![1.0, 0.8, 0.6, 0.4],
            optics_blur: 0.8,
            sensor_noise: 2.0,
            jitter: SessionJitter::default(),
        }
    }
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

fn symmetric(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    uniform(rng, (-half, half))
}

impl EyeDistribution {
    /// The un-jittered eye of `subject`.
    pub fn identity(&self, seed: u64, subject: Subject) -> EyeParams {
        let mut rng = rng_for(&[seed, 0x1d, subject.user as u64, subject.eye.index()]);
        let (w, h) = (self.width as f64, self.height as f64);
        let iris_r = uniform(&mut rng, self.iris_radius);
        let icx = w / 2.0 + symmetric(&mut rng, self.center_jitter);
        let icy = h / 2.0 + symmetric(&mut rng, self.center_jitter);
        let pupil_r = iris_r * uniform(&mut rng, self.pupil_ratio);
        let pcx = icx + symmetric(&mut rng, self.pupil_offset.0);
        let pcy = icy + symmetric(&mut rng, self.pupil_offset.1);
        EyeParams {
            width: self.width,
            height: self.height,
            iris: Circle::new(icx, icy, iris_r),
            pupil: Circle::new(pcx, pcy, pupil_r),
            texture_seed: derive_seed(&[seed, 0x7e, subject.user as u64, subject.eye.index()]),
            octave_weights: self.octave_weights.clone(),
            texture_contrast: uniform(&mut rng, self.texture_contrast),
            texture_rotation_deg: 0.0,
            eyelid_coverage: uniform(&mut rng, self.eyelid_coverage),
            pupil_level: uniform(&mut rng, self.pupil_level),
            iris_level: uniform(&mut rng, self.iris_level),
            sclera_level: uniform(&mut rng, self.sclera_level),
            skin_level: uniform(&mut rng, self.skin_level),
            illumination_offset: 0.0,
            optics_blur: self.optics_blur,
            sensor_noise: self.sensor_noise,
            capture_seed: 0,
        }
    }

    /// One jittered capture of `subject`.
    pub fn capture(&self, seed: u64, subject: Subject, session: u8, idx: u32) -> EyeParams {
        let base = self.identity(seed, subject);
        let j = &self.jitter;
        let mut rng = rng_for(&[seed, 0xca, subject.user as u64, subject.eye.index(), session as u64, idx as u64]);
        let (tx, ty) = (symmetric(&mut rng, j.translation), symmetric(&mut rng, j.translation));
        let scale = 1.0 + symmetric(&mut rng, j.radius_scale);
        let mut p = base.clone();
        // scale about the iris center so the pupil stays inside
        let (icx, icy) = (base.iris.cx + tx, base.iris.cy + ty);
        p.iris = Circle::new(icx, icy, base.iris.r * scale);
        p.pupil = Circle::new(
            icx + (base.pupil.cx - base.iris.cx) * scale,
            icy + (base.pupil.cy - base.iris.cy) * scale,
            base.pupil.r * scale,
        );
        p.texture_rotation_deg = symmetric(&mut rng, j.rotation_deg);
        p.illumination_offset = symmetric(&mut rng, j.illumination);
        if base.eyelid_coverage > 0.0 {
            p.eyelid_coverage = (base.eyelid_coverage + symmetric(&mut rng, j.eyelid_coverage)).clamp(0.0, 1.0);
        }
        p.capture_seed = derive_seed(&[seed, 0xc5, subject.user as u64, subject.eye.index(), session as u64, idx as u64]);
        p
    }
}

/// Renders one dataset image. A fake is the real capture passed through
/// `chain` and the print-recapture simulator.
#[allow(clippy::too_many_arguments)]
pub fn render_capture(
    dist: &EyeDistribution,
    rp: &RecaptureParams,
    chain: &PreprocessChain,
    seed: u64,
    subject: Subject,
    session: u8,
    idx: u32,
    kind: ImageKind,
) -> GrayImage {
    let real = render_synthetic_eye(&dist.capture(seed, subject, session, idx));
    match kind {
        ImageKind::Real => real,
        ImageKind::Fake => {
            let mut rp = rp.clone();
            rp.seed = derive_seed(&[seed, rp.seed, 0xfa, subject.user as u64, subject.eye.index(), session as u64, idx as u64]);
            simulate_print_recapture(&apply_chain(&real, chain), &rp)
        }
    }
}

/// Writes `n_users × 2 eyes × 2 sessions × 4 images` real captures and
/// their fakes under `out_dir`, plus `manifest.csv`.
pub fn build_dataset(
    n_users: u32,
    out_dir: &Path,
    dist: &EyeDistribution,
    rp: &RecaptureParams,
    chain: &PreprocessChain,
    seed: u64,
) -> Result<DatasetManifest, SpoofError> {
    if n_users == 0 {
        return Err(SpoofError::InvalidParams("need at least one user".into()));
    }
    rp.validate()?;
    let mut entries = Vec::new();
    for user_id in 1..=n_users {
        for eye in Eye::BOTH {
            for kind in [ImageKind::Real, ImageKind::Fake] {
                for session in 1..=SESSIONS {
                    for idx in 1..=IMAGES_PER_SESSION {
                        let path = ManifestEntry::layout_path(user_id, eye, kind, session, idx);
                        entries.push(ManifestEntry { user_id, eye, session, idx, kind, path });
                    }
                }
                let dir = out_dir.join(format!("u{user_id}/{eye}/{kind}"));
                std::fs::create_dir_all(&dir).map_err(|source| SpoofError::Io { path: dir, source })?;
            }
        }
    }
    entries.par_iter().try_for_each(|e| {
        let img = render_capture(dist, rp, chain, seed, e.subject(), e.session, e.idx, e.kind);
        let path = out_dir.join(&e.path);
        std::fs::write(&path, save_pgm(&img)).map_err(|source| SpoofError::Io { path, source })
    })?;
    let manifest = DatasetManifest { root: out_dir.to_path_buf(), entries };
    let path = out_dir.join(MANIFEST_FILE);
    manifest.save(&path).map_err(|source| SpoofError::Io { path, source })?;
    Ok(manifest)
}
