use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::imagecore::{save_pgm, GrayImage};
use crate::manifest::{Eye, ManifestEntry};
use crate::spoofsim::{render_capture, EyeDistribution, PreprocessChain, RecaptureParams};

fn set(genuine: &[f64], impostor: &[f64]) -> ScoreSet {
    ScoreSet::from_distances(genuine, impostor, &[], &[])
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn far_frr_hand_cases() {
    let s = set(&[0.20, 0.30], &[0.45, 0.55]);
    assert_eq!(far_frr_at(&s, 0.40).unwrap(), (0.0, 0.0));
    assert_eq!(far_frr_at(&s, 0.50).unwrap(), (50.0, 0.0));
    assert_eq!(far_frr_at(&s, 0.10).unwrap(), (0.0, 100.0));
    // acceptance is inclusive
    assert_eq!(far_frr_at(&s, 0.45).unwrap(), (50.0, 0.0));
}

#[test]
fn empty_sets_are_errors() {
    assert!(matches!(far_frr_at(&set(&[], &[0.5]), 0.4), Err(EvalError::EmptyScores("genuine"))));
    assert!(matches!(far_frr_at(&set(&[0.1], &[]), 0.4), Err(EvalError::EmptyScores("impostor"))));
    assert!(matches!(threshold_at_far(&set(&[0.1], &[]), 1.0), Err(EvalError::EmptyScores(_))));
    assert!(matches!(success_rates(&set(&[0.1], &[0.5]), 0.4), Err(EvalError::EmptyScores(_))));
}

#[test]
fn threshold_grid_example() {
    let s = set(&[0.1], &[0.30, 0.35, 0.40, 0.45, 0.50]);
    let op = threshold_at_far(&s, 20.0).unwrap();
    assert!(close(op.threshold, 0.325), "{}", op.threshold);
    assert!(close(op.far, 20.0));

    let op = threshold_at_far(&s, 0.0).unwrap();
    assert!(op.threshold < 0.30);
    assert_eq!(op.far, 0.0);

    let op = threshold_at_far(&s, 100.0).unwrap();
    assert!(op.threshold >= 0.50);
    assert_eq!(op.far, 100.0);
}

#[test]
fn success_rate_examples() {
    // 28 of 108 fake-genuine comparisons rejected: FRR 25.93%
    let attack1: Vec<f64> = (0..108).map(|i| if i < 80 { 0.2 } else { 0.45 }).collect();
    let attack2: Vec<f64> = (0..221).map(|i| if i < 146 { 0.25 } else { 0.48 }).collect();
    let s = ScoreSet::from_distances(&[0.1], &[0.5], &attack1, &attack2);
    let (sr1, sr2) = success_rates(&s, 0.3).unwrap();
    assert_eq!(format!("{:.2}", 100.0 - sr1), "25.93");
    assert_eq!(format!("{sr1:.2}"), "74.07");
    assert_eq!(format!("{sr2:.2}"), "66.06");
    assert_eq!(success_rates(&s, 0.1).unwrap(), (0.0, 0.0));
    assert_eq!(success_rates(&s, 1.0).unwrap(), (100.0, 100.0));
}

#[test]
fn eer_of_separated_and_overlapping_sets() {
    assert_eq!(equal_error_rate(&set(&[0.1, 0.2], &[0.4, 0.5])).unwrap(), 0.0);
    let eer = equal_error_rate(&set(&[0.1, 0.3, 0.45], &[0.25, 0.5, 0.6])).unwrap();
    assert!(close(eer, 100.0 / 3.0), "{eer}");
}

fn scores_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let hd = (0u32..=1000).prop_map(|v| v as f64 / 1000.0);
    (prop::collection::vec(hd.clone(), 1..40), prop::collection::vec(hd, 1..60))
}

proptest! {
    #[test]
    fn far_frr_monotone((g, i) in scores_strategy()) {
        let s = set(&g, &i);
        let mut last = (-1.0, 101.0);
        for k in 0..=110 {
            let t = k as f64 / 100.0 - 0.05;
            let (far, frr) = far_frr_at(&s, t).unwrap();
            prop_assert!(far >= last.0 && frr <= last.1);
            prop_assert!((0.0..=100.0).contains(&far) && (0.0..=100.0).contains(&frr));
            last = (far, frr);
        }
    }

    #[test]
    fn threshold_meets_its_contract((g, i) in scores_strategy(), target in 0.0f64..100.0) {
        let s = set(&g, &i);
        let op = threshold_at_far(&s, target).unwrap();
        prop_assert!(op.far <= target + 1e-9);
        let mut sorted_i = i.clone();
        sorted_i.sort_by(f64::total_cmp);
        let grid = candidate_thresholds(&sorted_i);
        let pos = grid.iter().position(|&t| t == op.threshold).unwrap();
        if let Some(&next) = grid.get(pos + 1) {
            prop_assert!(far_frr_at(&s, next).unwrap().0 > target + 1e-9);
        } else {
            prop_assert_eq!(op.far, 100.0);
        }
    }

    #[test]
    fn success_rates_at_extremes(a1 in prop::collection::vec(0.0f64..=1.0, 1..20), a2 in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let s = ScoreSet::from_distances(&[0.1], &[0.5], &a1, &a2);
        prop_assert_eq!(success_rates(&s, 1.0).unwrap(), (100.0, 100.0));
        prop_assert_eq!(success_rates(&s, -0.001).unwrap(), (0.0, 0.0));
    }
}

#[test]
fn report_operating_points_and_rates() {
    let impostor: Vec<f64> = (0..1000).map(|i| 0.30 + i as f64 * 2e-4).collect();
    let mut s = ScoreSet::from_distances(&[0.1, 0.2, 0.3005], &impostor, &[0.2, 0.5], &[0.3, 0.6]);
    s.failures.fake = ImageTally { total: 432, segmented: 166, template_failures: 0 };
    s.failures.real = ImageTally { total: 432, segmented: 348, template_failures: 0 };
    let r = build_report(&s, &[5.0, 0.1, 2.0, 1.0]).unwrap();
    assert_eq!(r.operating_points.len(), 4);
    assert!(r.operating_points.windows(2).all(|w| w[0].threshold < w[1].threshold));
    let targets: Vec<f64> = r.operating_points.iter().map(|o| o.target_far).collect();
    assert_eq!(targets, [0.1, 1.0, 2.0, 5.0]);
    assert_eq!(format!("{:.2}", r.segmentation_fake.rate), "38.43");
    assert_eq!(format!("{:.2}", r.segmentation_real.rate), "80.56");
    assert!(r.det.windows(2).all(|w| w[0].threshold < w[1].threshold));
    assert_eq!(r.det.len(), 1001);

    let table = r.to_table();
    assert!(table.contains("FAR - FRR (%)"), "{table}");
    assert!(table.contains("0.1 - 33.33"), "{table}");
    let back = EvaluationReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);

    let bare = build_report(&s, &[]).unwrap();
    assert!(bare.operating_points.is_empty());
    assert_eq!(bare.det.len(), 1001);
}

#[test]
fn score_csv_layout() {
    let a = Subject { user: 1, eye: Eye::L };
    let b = Subject { user: 2, eye: Eye::R };
    let mut s = ScoreSet::default();
    s.genuine.push(Comparison { subject_a: a, subject_b: a, hd: 0.125, shift: -2 });
    s.impostor.push(Comparison { subject_a: a, subject_b: b, hd: 0.5, shift: 3 });
    let text = String::from_utf8(s.to_csv()).unwrap();
    assert_eq!(text, "kind,subject_a,subject_b,hd,shift\ngenuine,u1L,u1L,0.125000,-2\nimpostor,u1L,u2R,0.500000,3\n");
}

fn subjects(n: u32) -> BTreeSet<Subject> {
    (1..=n).flat_map(|user| Eye::BOTH.map(|eye| Subject { user, eye })).collect()
}

fn count(pairs: &[(ScoreKind, Subject, Subject, &(), &())], kind: ScoreKind) -> usize {
    pairs.iter().filter(|p| p.0 == kind).count()
}

#[test]
fn pairing_arithmetic_for_54_subjects() {
    let four: Vec<(u32, ())> = (1..=4).map(|i| (i, ())).collect();
    let subs = subjects(27);
    assert_eq!(subs.len(), 54);
    let pairs = plan_comparisons(&subs, |_, _, _| four.as_slice(), 3);
    assert_eq!(count(&pairs, ScoreKind::Genuine), 54 * 16);
    assert_eq!(count(&pairs, ScoreKind::Impostor), 54 * 53);
    assert_eq!(count(&pairs, ScoreKind::Attack1), 54 * 16);
    assert_eq!(count(&pairs, ScoreKind::Attack2), 54 * 16);
    assert!(pairs.iter().filter(|p| p.0 == ScoreKind::Impostor).all(|p| p.1 != p.2));
}

#[test]
fn pairing_skips_missing_groups() {
    let two: Vec<(u32, ())> = vec![(1, ()), (2, ())];
    let subs = subjects(2);
    let first = *subs.iter().next().unwrap();
    // the first subject has no usable real session-2 image
    let pairs = plan_comparisons(
        &subs,
        |s, kind, session| if s == first && kind == ImageKind::Real && session == 2 { &[][..] } else { two.as_slice() },
        0,
    );
    assert_eq!(count(&pairs, ScoreKind::Genuine), 3 * 4);
    assert_eq!(count(&pairs, ScoreKind::Impostor), 4 * 3 - 3);
    assert_eq!(count(&pairs, ScoreKind::Attack1), 4 * 4);
}

fn write_toy_dataset(dir: &std::path::Path, users: u32, per_session: u32, blank: Option<(u32, Eye, u8, u32)>) -> DatasetManifest {
    let mut dist = EyeDistribution::default();
    dist.eyelid_coverage = (0.0, 0.0);
    let chain = PreprocessChain::default();
    let rp = RecaptureParams::identity();
    let mut entries = Vec::new();
    for user_id in 1..=users {
        for eye in [Eye::L] {
            for kind in [ImageKind::Real, ImageKind::Fake] {
                for session in 1..=2u8 {
                    for idx in 1..=per_session {
                        let path = ManifestEntry::layout_path(user_id, eye, kind, session, idx);
                        let subject = Subject { user: user_id, eye };
                        let img = if blank == Some((user_id, eye, session, idx)) && kind == ImageKind::Real {
                            GrayImage::filled(320, 280, 128)
                        } else {
                            render_capture(&dist, &rp, &chain, 11, subject, session, idx, kind)
                        };
                        let full = dir.join(&path);
                        std::fs::create_dir_all(full.parent().unwrap()).unwrap();
                        std::fs::write(full, save_pgm(&img)).unwrap();
                        entries.push(ManifestEntry { user_id, eye, session, idx, kind, path });
                    }
                }
            }
        }
    }
    DatasetManifest { root: dir.to_path_buf(), entries }
}

#[test]
fn toy_protocol_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_toy_dataset(dir.path(), 2, 2, None);
    let config = ProtocolConfig::default();
    let scores = run_protocol(&manifest, &config).unwrap();
    assert_eq!(scores.genuine.len(), 8);
    assert_eq!(scores.impostor.len(), 2);
    assert_eq!(scores.attack1.len(), 8);
    assert_eq!(scores.attack2.len(), 8);
    assert_eq!(scores.failures.real, ImageTally { total: 8, segmented: 8, template_failures: 0 });
    assert!(ScoreKind::ALL.iter().flat_map(|&k| scores.get(k)).all(|c| (0.0..=1.0).contains(&c.hd)));
    assert!(scores.genuine.iter().all(|c| c.hd < 0.3));
    assert!(scores.impostor.iter().all(|c| c.hd > 0.4));

    let again = run_protocol(&manifest, &config).unwrap();
    assert_eq!(again, scores);
    assert_eq!(again.to_csv(), scores.to_csv());
}

#[test]
fn failures_are_excluded_and_accounted() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_toy_dataset(dir.path(), 2, 2, Some((1, Eye::L, 2, 1)));
    let scores = run_protocol(&manifest, &ProtocolConfig::default()).unwrap();
    let f = &scores.failures;
    assert_eq!(f.real, ImageTally { total: 8, segmented: 7, template_failures: 0 });
    // subject 1 has one usable real session-2 image left
    let expected = KindCounts { genuine: 2 + 4, impostor: 2, attack1: 8, attack2: 8 };
    assert_eq!(f.attempted, expected);
    for kind in ScoreKind::ALL {
        assert_eq!(scores.get(kind).len() + f.matching.get(kind), f.attempted.get(kind));
    }
}

#[test]
fn duplicate_or_missing_entries_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = write_toy_dataset(dir.path(), 1, 1, None);
    manifest.entries.push(manifest.entries[0].clone());
    assert!(matches!(run_protocol(&manifest, &ProtocolConfig::default()), Err(EvalError::Manifest(_))));
    manifest.entries.pop();
    manifest.entries[0].path = "missing.pgm".into();
    assert!(matches!(run_protocol(&manifest, &ProtocolConfig::default()), Err(EvalError::Image { .. })));
}

#[test]
fn all_blank_dataset_is_empty_after_segmentation() {
    let dir = tempfile::tempdir().unwrap();
    let path = "blank.pgm".to_string();
    std::fs::write(dir.path().join(&path), save_pgm(&GrayImage::filled(320, 280, 90))).unwrap();
    let entries = (1..=2u8)
        .map(|session| ManifestEntry { user_id: 1, eye: Eye::L, session, idx: 1, kind: ImageKind::Real, path: path.clone() })
        .collect();
    let manifest = DatasetManifest { root: dir.path().to_path_buf(), entries };
    assert!(matches!(run_protocol(&manifest, &ProtocolConfig::default()), Err(EvalError::EmptyAfterSegmentation)));
}
