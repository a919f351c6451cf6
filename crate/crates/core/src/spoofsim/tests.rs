use super::*;
use crate::imagecore::{morph, top_hat};
use crate::manifest::{Eye, Subject};
use crate::segmentation::{segment_eye, SegmentationConfig};

fn eye() -> EyeParams {
    let mut p = EyeDistribution::default().identity(3, Subject { user: 1, eye: Eye::L });
    p.eyelid_coverage = 0.0;
    p
}

fn region_mean(img: &GrayImage, keep: impl Fn(f64, f64) -> bool) -> f64 {
    let (mut sum, mut n) = (0.0, 0.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if keep(x as f64, y as f64) {
                sum += img.get(x, y) as f64;
                n += 1.0;
            }
        }
    }
    sum / n
}

#[test]
fn region_intensities_are_ordered() {
    let p = eye();
    let img = render_synthetic_eye(&p);
    let pupil = region_mean(&img, |x, y| p.pupil.contains_point(x, y));
    let iris = region_mean(&img, |x, y| p.iris.contains_point(x, y) && !p.pupil.contains_point(x, y));
    let sclera = region_mean(&img, |x, y| !p.iris.contains_point(x, y));
    assert!(pupil < iris && iris < sclera, "{pupil} {iris} {sclera}");
}

#[test]
fn rendering_is_deterministic() {
    let p = eye();
    assert_eq!(render_synthetic_eye(&p), render_synthetic_eye(&p));
    let mut q = p.clone();
    q.texture_seed ^= 1;
    assert_ne!(render_synthetic_eye(&p), render_synthetic_eye(&q));
}

#[test]
fn invalid_eyes_are_rejected() {
    let good = eye();
    assert!(good.validate().is_ok());
    let mut p = good.clone();
    p.pupil.cx = p.iris.cx + p.iris.r;
    assert!(p.validate().is_err());
    let mut p = good.clone();
    p.pupil.r = p.iris.r + 1.0;
    assert!(p.validate().is_err());
    let mut p = good.clone();
    p.iris_level = p.sclera_level + 1.0;
    assert!(p.validate().is_err());
    let mut p = good;
    p.eyelid_coverage = 1.5;
    assert!(p.validate().is_err());
}

#[test]
fn eyelids_cover_the_stated_fraction() {
    let mut p = eye();
    p.eyelid_coverage = 0.2;
    let top = p.iris.cy - p.iris.r;
    let (cx, d) = (p.iris.cx, 2.0 * p.iris.r);
    assert!(p.in_eyelid(cx, top + 0.19 * d));
    assert!(!p.in_eyelid(cx, top + 0.21 * d));
    let bottom = p.iris.cy + p.iris.r;
    assert!(p.in_eyelid(cx, bottom - 0.09 * d));
    assert!(!p.in_eyelid(cx, bottom - 0.11 * d));
    p.eyelid_coverage = 0.0;
    assert!(!p.in_eyelid(cx, 0.0));
}

#[test]
fn rendered_eyes_segment_accurately() {
    let dist = EyeDistribution::default();
    let cfg = SegmentationConfig::default();
    for user in 1..=4 {
        let p = dist.capture(21, Subject { user, eye: Eye::R }, 1, 1);
        let seg = segment_eye(&render_synthetic_eye(&p), &cfg).unwrap();
        for (got, want) in [(seg.pupil, p.pupil), (seg.iris, p.iris)] {
            assert!((got.r - want.r).abs() <= 2.0, "user {user}: {got:?} vs {want:?}");
            assert!((got.cx - want.cx).abs() <= 2.0 && (got.cy - want.cy).abs() <= 2.0);
        }
    }
}

fn ramp() -> GrayImage {
    GrayImage::from_fn(64, 48, |x, y| (100 + (x + y) % 50) as u8)
}

#[test]
fn chains_apply_in_order() {
    let img = render_synthetic_eye(&eye());
    assert_eq!(apply_chain(&img, &PreprocessChain::default()), img);

    let se = StructuringElement::disk(3);
    let opened = morph(&img, &se, MorphOp::Open);
    assert_eq!(apply_chain(&img, &PreprocessChain::open_tophat()), top_hat_enhance(&opened, &se));

    let r = ramp();
    assert_ne!(apply_chain(&r, &PreprocessChain(vec![PreprocessStep::HistEq])), r);
}

#[test]
fn top_hat_enhancement_adds_residues() {
    let flat = GrayImage::filled(20, 20, 80);
    let se = StructuringElement::disk(2);
    assert_eq!(top_hat_enhance(&flat, &se), flat);
    let mut speck = flat.clone();
    speck.set(10, 10, 120);
    speck.set(4, 4, 40);
    let out = top_hat_enhance(&speck, &se);
    assert_eq!(out.get(10, 10), 160);
    assert_eq!(out.get(4, 4), 0);
    assert_eq!(out.get(15, 15), 80);
    assert_eq!(top_hat(&speck, &se).get(10, 10), 40);
}

#[test]
fn chain_text_round_trips() {
    for (name, chain) in PreprocessChain::presets() {
        assert_eq!(name.parse::<PreprocessChain>().unwrap(), chain);
        assert_eq!(chain.to_string().parse::<PreprocessChain>().unwrap(), chain);
    }
    let c: PreprocessChain = "median:2, close:square1,histeq".parse().unwrap();
    assert_eq!(
        c.0,
        vec![
            PreprocessStep::Median { radius: 2 },
            PreprocessStep::Close { se: StructuringElement::square(1) },
            PreprocessStep::HistEq
        ]
    );
    assert_eq!(PreprocessChain::open_tophat().to_string(), "open:disk3,tophat:disk3");
    for bad in ["blur:3", "open:", "open:disk0", "median:x", "tophat:hex3"] {
        assert!(bad.parse::<PreprocessChain>().is_err(), "{bad}");
    }
}

#[test]
fn identity_recapture_is_a_no_op() {
    let img = render_synthetic_eye(&eye());
    assert_eq!(simulate_print_recapture(&img, &RecaptureParams::identity()), img);
}

#[test]
fn recapture_is_seeded() {
    let img = render_synthetic_eye(&eye());
    let rp = RecaptureParams::default();
    let a = simulate_print_recapture(&img, &rp);
    assert_eq!(a, simulate_print_recapture(&img, &rp));
    let other = RecaptureParams { seed: rp.seed + 1, ..rp.clone() };
    assert_ne!(a, simulate_print_recapture(&img, &other));
    let screen = RecaptureParams { noise_sigma: 0.0, ..rp.clone() };
    let screen2 = RecaptureParams { screen_seed: 9, ..screen.clone() };
    assert_ne!(simulate_print_recapture(&img, &screen), simulate_print_recapture(&img, &screen2));
}

#[test]
fn halftone_preserves_mean_tone() {
    let gray = GrayImage::filled(64, 64, 100);
    let rp = RecaptureParams { dot_pitch: 4, ..RecaptureParams::identity() };
    let out = simulate_print_recapture(&gray, &rp);
    assert!(out.pixels().iter().all(|&v| v == 0 || v == 255));
    // 100/255 of each 16-cell is on: 6 of 16 thresholds lie below 100
    assert!((out.mean() - 255.0 * 6.0 / 16.0).abs() < 1e-9, "{}", out.mean());
}

#[test]
fn contrast_compresses_toward_mid_gray() {
    let img = GrayImage::from_fn(4, 1, |x, _| [0, 64, 192, 255][x]);
    let rp = RecaptureParams { contrast: 0.5, ..RecaptureParams::identity() };
    assert_eq!(simulate_print_recapture(&img, &rp).pixels(), &[64, 96, 160, 192]);
}

#[test]
fn highlight_saturates_its_center() {
    let img = GrayImage::filled(80, 60, 50);
    let hl = Highlight { dx: 10.0, dy: -5.0, radius: 6.0, softness: 2.0, intensity: 250.0, opacity: 1.0 };
    let rp = RecaptureParams { highlight: Some(hl), ..RecaptureParams::identity() };
    let out = simulate_print_recapture(&img, &rp);
    assert_eq!(out.get(50, 25), 250);
    assert_eq!(out.get(5, 5), 50);
    assert!(out.get(56, 25) > 50 && out.get(56, 25) < 250);
}

#[test]
fn recapture_params_are_validated() {
    assert!(RecaptureParams::default().validate().is_ok());
    assert!(RecaptureParams { contrast: 0.0, ..RecaptureParams::identity() }.validate().is_err());
    assert!(RecaptureParams { contrast: 1.2, ..RecaptureParams::identity() }.validate().is_err());
    assert!(RecaptureParams { blur_sigma: -1.0, ..RecaptureParams::identity() }.validate().is_err());
    for (_, p) in RecaptureParams::presets() {
        assert!(p.validate().is_ok());
    }
}

#[test]
fn dataset_layout_and_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dist = EyeDistribution::default();
    let rp = RecaptureParams::default();
    let chain = PreprocessChain::open_tophat();
    let m = build_dataset(1, a.path(), &dist, &rp, &chain, 5).unwrap();
    assert_eq!(m.count(crate::manifest::ImageKind::Real), 16);
    assert_eq!(m.count(crate::manifest::ImageKind::Fake), 16);
    assert!(m.entries.iter().any(|e| e.path == "u1/R/fake/s2_4.pgm"));
    build_dataset(1, b.path(), &dist, &rp, &chain, 5).unwrap();
    for e in &m.entries {
        let (x, y) = (std::fs::read(a.path().join(&e.path)).unwrap(), std::fs::read(b.path().join(&e.path)).unwrap());
        assert_eq!(x, y, "{}", e.path);
    }
    let manifest_a = std::fs::read(a.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest_a, std::fs::read(b.path().join("manifest.csv")).unwrap());
    let loaded = crate::manifest::DatasetManifest::load(&a.path().join("manifest.csv")).unwrap();
    assert_eq!(loaded.entries, m.entries);
    assert!(build_dataset(0, a.path(), &dist, &rp, &chain, 5).is_err());
}

#[test]
fn captures_vary_within_the_jitter_bounds() {
    let dist = EyeDistribution::default();
    let s = Subject { user: 4, eye: Eye::L };
    let base = dist.identity(8, s);
    let j = &dist.jitter;
    for session in 1..=2 {
        for idx in 1..=4 {
            let c = dist.capture(8, s, session, idx);
            assert!(c.validate().is_ok());
            assert_eq!(c.texture_seed, base.texture_seed);
            assert!((c.iris.cx - base.iris.cx).abs() <= j.translation);
            assert!((c.iris.r / base.iris.r - 1.0).abs() <= j.radius_scale + 1e-12);
            assert!(c.texture_rotation_deg.abs() <= j.rotation_deg);
            assert!(c.illumination_offset.abs() <= j.illumination);
        }
    }
    assert_ne!(dist.capture(8, s, 1, 1), dist.capture(8, s, 2, 1));
}
