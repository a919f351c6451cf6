//! Verification protocol over a dataset manifest: normal operation, attack 1
//! (fake enrolment, fake probe) and attack 2 (real enrolment, fake probe),
//! with FAR/FRR sweeps and success rates at fixed operating points.

mod report;

pub use report::{
    build_report, DatasetSummary, DetSample, DistributionStats, EvaluationReport, ImageRate, ScoreSummary,
    REPORT_SCHEMA_VERSION,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::IrisTemplate;
use crate::imagecore::load_pgm;
use crate::manifest::{DatasetManifest, ImageKind, ManifestError, Subject};
use crate::matching::match_templates;
use crate::pipeline::{extract_template, PipelineConfig, PipelineError};
use crate::spoofsim::derive_seed;

pub const DEFAULT_FAR_TARGETS: [f64; 4] = [0.1, 1.0, 2.0, 5.0];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot use image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("no subject yields a usable comparison after segmentation")]
    EmptyAfterSegmentation,
    #[error("no {0} scores")]
    EmptyScores(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub pipeline: PipelineConfig,
    pub protocol_seed: u64,
    pub far_targets: Vec<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { pipeline: PipelineConfig::default(), protocol_seed: 1, far_targets: DEFAULT_FAR_TARGETS.to_vec() }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.pipeline.validate()?;
        if let Some(t) = self.far_targets.iter().find(|t| !(0.0..=100.0).contains(*t)) {
            return Err(format!("FAR target {t} outside [0, 100]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Genuine,
    Impostor,
    Attack1,
    Attack2,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [ScoreKind::Genuine, ScoreKind::Impostor, ScoreKind::Attack1, ScoreKind::Attack2];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Genuine => "genuine",
            ScoreKind::Impostor => "impostor",
            ScoreKind::Attack1 => "attack1",
            ScoreKind::Attack2 => "attack2",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One comparison: `subject_a`'s enrolment template against `subject_b`'s
/// probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub subject_a: Subject,
    pub subject_b: Subject,
    pub hd: f64,
    pub shift: isize,
}

impl Comparison {
    pub fn new(subject_a: Subject, subject_b: Subject, hd: f64) -> Self {
        Self { subject_a, subject_b, hd, shift: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageTally {
    pub total: usize,
    pub segmented: usize,
    /// Segmented, but normalization or encoding then failed.
    pub template_failures: usize,
}

impl ImageTally {
    pub fn usable(&self) -> usize {
        self.segmented - self.template_failures
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub genuine: usize,
    pub impostor: usize,
    pub attack1: usize,
    pub attack2: usize,
}

impl KindCounts {
    pub fn get(&self, kind: ScoreKind) -> usize {
        match kind {
            ScoreKind::Genuine => self.genuine,
            ScoreKind::Impostor => self.impostor,
            ScoreKind::Attack1 => self.attack1,
            ScoreKind::Attack2 => self.attack2,
        }
    }

    fn bump(&mut self, kind: ScoreKind) {
        match kind {
            ScoreKind::Genuine => self.genuine += 1,
            ScoreKind::Impostor => self.impostor += 1,
            ScoreKind::Attack1 => self.attack1 += 1,
            ScoreKind::Attack2 => self.attack2 += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.genuine + self.impostor + self.attack1 + self.attack2
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub real: ImageTally,
    pub fake: ImageTally,
    pub subjects: usize,
    /// Comparisons between usable templates that were run.
    pub attempted: KindCounts,
    /// Attempted comparisons with no valid bits in common.
    pub matching: KindCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<Comparison>,
    pub impostor: Vec<Comparison>,
    pub attack1: Vec<Comparison>,
    pub attack2: Vec<Comparison>,
    pub failures: FailureCounts,
}

impl ScoreSet {
    pub fn get(&self, kind: ScoreKind) -> &[Comparison] {
        match kind {
            ScoreKind::Genuine => &self.genuine,
            ScoreKind::Impostor => &self.impostor,
            ScoreKind::Attack1 => &self.attack1,
            ScoreKind::Attack2 => &self.attack2,
        }
    }

    fn get_mut(&mut self, kind: ScoreKind) -> &mut Vec<Comparison> {
        match kind {
            ScoreKind::Genuine => &mut self.genuine,
            ScoreKind::Impostor => &mut self.impostor,
            ScoreKind::Attack1 => &mut self.attack1,
            ScoreKind::Attack2 => &mut self.attack2,
        }
    }

    /// Builds a set from bare distance lists; subjects are placeholders.
    pub fn from_distances(genuine: &[f64], impostor: &[f64], attack1: &[f64], attack2: &[f64]) -> Self {
        let s = Subject { user: 0, eye: crate::manifest::Eye::L };
        let wrap = |v: &[f64]| v.iter().map(|&hd| Comparison::new(s, s, hd)).collect();
        Self {
            genuine: wrap(genuine),
            impostor: wrap(impostor),
            attack1: wrap(attack1),
            attack2: wrap(attack2),
            failures: FailureCounts::default(),
        }
    }

    pub fn distances(&self, kind: ScoreKind) -> Vec<f64> {
        self.get(kind).iter().map(|c| c.hd).collect()
    }

    /// `kind,subject_a,subject_b,hd,shift`
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["kind", "subject_a", "subject_b", "hd", "shift"]).expect("in-memory write");
        for kind in ScoreKind::ALL {
            for c in self.get(kind) {
                w.write_record([
                    kind.as_str().to_string(),
                    c.subject_a.to_string(),
                    c.subject_b.to_string(),
                    format!("{:.6}", c.hd),
                    c.shift.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        w.into_inner().expect("in-memory flush")
    }
}

fn pct(k: usize, n: usize) -> f64 {
    100.0 * k as f64 / n as f64
}

fn sorted(v: &[Comparison]) -> Vec<f64> {
    let mut d: Vec<f64> = v.iter().map(|c| c.hd).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Fraction (in percent) of sorted `d` at or below `t`.
fn accepted_pct(d: &[f64], t: f64) -> f64 {
    pct(d.partition_point(|&x| x <= t), d.len())
}

/// Accept iff `hd <= threshold`. Returns `(far, frr)` in percent.
pub fn far_frr_at(scores: &ScoreSet, threshold: f64) -> Result<(f64, f64), EvalError> {
    if scores.genuine.is_empty() {
        return Err(EvalError::EmptyScores("genuine"));
    }
    if scores.impostor.is_empty() {
        return Err(EvalError::EmptyScores("impostor"));
    }
    Ok((accepted_pct(&sorted(&scores.impostor), threshold), 100.0 - accepted_pct(&sorted(&scores.genuine), threshold)))
}

/// Percent of attack 1 and attack 2 comparisons accepted at `threshold`.
pub fn success_rates(scores: &ScoreSet, threshold: f64) -> Result<(f64, f64), EvalError> {
    if scores.attack1.is_empty() {
        return Err(EvalError::EmptyScores("attack1"));
    }
    if scores.attack2.is_empty() {
        return Err(EvalError::EmptyScores("attack2"));
    }
    Ok((accepted_pct(&sorted(&scores.attack1), threshold), accepted_pct(&sorted(&scores.attack2), threshold)))
}

/// Candidate thresholds: just below the smallest impostor score, every
/// midpoint between consecutive distinct impostor scores, and 1.
pub fn candidate_thresholds(impostor_sorted: &[f64]) -> Vec<f64> {
    let mut distinct = impostor_sorted.to_vec();
    distinct.dedup();
    let Some(&lowest) = distinct.first() else {
        return Vec::new();
    };
    let mut grid = Vec::with_capacity(distinct.len() + 1);
    grid.push(lowest - 1e-3);
    grid.extend(distinct.windows(2).map(|p| (p[0] + p[1]) / 2.0));
    grid.push(1.0);
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_far: f64,
    pub threshold: f64,
    pub far: f64,
    /// `None` when there are no genuine scores.
    pub frr: Option<f64>,
    pub sr_attack1: Option<f64>,
    pub sr_attack2: Option<f64>,
}

const FAR_SLACK: f64 = 1e-9;

/// The largest candidate threshold whose FAR does not exceed `target_far`.
pub fn threshold_at_far(scores: &ScoreSet, target_far: f64) -> Result<OperatingPoint, EvalError> {
    let impostor = sorted(&scores.impostor);
    if impostor.is_empty() {
        return Err(EvalError::EmptyScores("impostor"));
    }
    let grid = candidate_thresholds(&impostor);
    let threshold = grid
        .iter()
        .copied()
        .take_while(|&t| accepted_pct(&impostor, t) <= target_far + FAR_SLACK)
        .last()
        .unwrap_or(grid[0]);
    let rate = |kind: ScoreKind| {
        let d = sorted(scores.get(kind));
        (!d.is_empty()).then(|| accepted_pct(&d, threshold))
    };
    Ok(OperatingPoint {
        target_far,
        threshold,
        far: accepted_pct(&impostor, threshold),
        frr: rate(ScoreKind::Genuine).map(|a| 100.0 - a),
        sr_attack1: rate(ScoreKind::Attack1),
        sr_attack2: rate(ScoreKind::Attack2),
    })
}

/// Equal error rate, taken as the smallest `max(far, frr)` over thresholds
/// at every observed score.
pub fn equal_error_rate(scores: &ScoreSet) -> Result<f64, EvalError> {
    let (genuine, impostor) = (sorted(&scores.genuine), sorted(&scores.impostor));
    if genuine.is_empty() {
        return Err(EvalError::EmptyScores("genuine"));
    }
    if impostor.is_empty() {
        return Err(EvalError::EmptyScores("impostor"));
    }
    let mut thresholds: Vec<f64> = genuine.iter().chain(&impostor).copied().collect();
    thresholds.push(-1.0);
    Ok(thresholds
        .iter()
        .map(|&t| accepted_pct(&impostor, t).max(100.0 - accepted_pct(&genuine, t)))
        .fold(100.0, f64::min))
}

type Bucket = BTreeMap<(Subject, ImageKind, u8), Vec<(u32, IrisTemplate)>>;

/// Pairs `(kind, enrolled subject, probe subject, enrolment, probe)` called
/// for by the protocol. `group(subject, kind, session)` lists the usable
/// items of one subject, session and image kind, sorted by index.
pub fn plan_comparisons<'a, T, G>(subjects: &BTreeSet<Subject>, group: G, protocol_seed: u64) -> Vec<(ScoreKind, Subject, Subject, &'a T, &'a T)>
where
    G: Fn(Subject, ImageKind, u8) -> &'a [(u32, T)],
{
    let mut pairs = Vec::new();
    let same_subject = [
        (ScoreKind::Genuine, ImageKind::Real, ImageKind::Real),
        (ScoreKind::Attack1, ImageKind::Fake, ImageKind::Fake),
        (ScoreKind::Attack2, ImageKind::Real, ImageKind::Fake),
    ];
    for &s in subjects {
        for (kind, enrol, probe) in same_subject {
            for (_, a) in group(s, enrol, 1) {
                for (_, b) in group(s, probe, 2) {
                    pairs.push((kind, s, s, a, b));
                }
            }
        }
    }
    for &a in subjects {
        for &b in subjects {
            if a == b {
                continue;
            }
            let (enrol, probe) = (group(a, ImageKind::Real, 1), group(b, ImageKind::Real, 2));
            if enrol.is_empty() || probe.is_empty() {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                protocol_seed,
                0x1a90,
                a.user as u64,
                a.eye.index(),
                b.user as u64,
                b.eye.index(),
            ]));
            let i = rng.random_range(0..enrol.len());
            let j = rng.random_range(0..probe.len());
            pairs.push((ScoreKind::Impostor, a, b, &enrol[i].1, &probe[j].1));
        }
    }
    pairs
}

enum Outcome {
    Template(IrisTemplate),
    SegmentationFailed,
    TemplateFailed,
}

fn process_images(manifest: &DatasetManifest, config: &PipelineConfig) -> Result<Vec<Outcome>, EvalError> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = manifest.resolve(e);
            let bytes = std::fs::read(&path).map_err(|err| EvalError::Image { path: path.clone(), reason: err.to_string() })?;
            let img = load_pgm(&bytes).map_err(|err| EvalError::Image { path, reason: err.to_string() })?;
            Ok(match extract_template(&img, config) {
                Ok((_, t)) => Outcome::Template(t),
                Err(PipelineError::Segmentation(_)) => Outcome::SegmentationFailed,
                Err(_) => Outcome::TemplateFailed,
            })
        })
        .collect()
}

fn check_manifest(manifest: &DatasetManifest) -> Result<(), ManifestError> {
    let mut seen = BTreeSet::new();
    for e in &manifest.entries {
        if !seen.insert((e.subject(), e.kind, e.session, e.idx)) {
            return Err(ManifestError::Invalid(format!(
                "duplicate entry for {} {} session {} image {}",
                e.subject(),
                e.kind,
                e.session,
                e.idx
            )));
        }
    }
    Ok(())
}

/// Runs every comparison the protocol calls for. Images that fail to
/// segment or encode are left out and tallied.
pub fn run_protocol(manifest: &DatasetManifest, config: &ProtocolConfig) -> Result<ScoreSet, EvalError> {
    config.validate().map_err(EvalError::InvalidConfig)?;
    check_manifest(manifest)?;
    let outcomes = process_images(manifest, &config.pipeline)?;

    let mut failures = FailureCounts::default();
    let mut bucket: Bucket = BTreeMap::new();
    let mut subjects = BTreeSet::new();
    for (e, outcome) in manifest.entries.iter().zip(outcomes) {
        subjects.insert(e.subject());
        let tally = match e.kind {
            ImageKind::Real => &mut failures.real,
            ImageKind::Fake => &mut failures.fake,
        };
        tally.total += 1;
        match outcome {
            Outcome::Template(t) => {
                tally.segmented += 1;
                bucket.entry((e.subject(), e.kind, e.session)).or_default().push((e.idx, t));
            }
            Outcome::TemplateFailed => {
                tally.segmented += 1;
                tally.template_failures += 1;
            }
            Outcome::SegmentationFailed => {}
        }
    }
    failures.subjects = subjects.len();
    bucket.values_mut().for_each(|v| v.sort_by_key(|(idx, _)| *idx));

    let pairs = plan_comparisons(
        &subjects,
        |s, kind, session| bucket.get(&(s, kind, session)).map_or(&[][..], Vec::as_slice),
        config.protocol_seed,
    );
    if pairs.is_empty() {
        return Err(EvalError::EmptyAfterSegmentation);
    }

    let budget = config.pipeline.shift_budget;
    let results: Vec<_> = pairs.par_iter().map(|&(kind, a, b, x, y)| (kind, a, b, match_templates(x, y, budget))).collect();
    let mut scores = ScoreSet::default();
    for (kind, a, b, result) in results {
        failures.attempted.bump(kind);
        match result {
            Ok(m) => scores.get_mut(kind).push(Comparison { subject_a: a, subject_b: b, hd: m.hd, shift: m.best_shift }),
            Err(_) => failures.matching.bump(kind),
        }
    }
    scores.failures = failures;
    Ok(scores)
}

#[cfg(test)]
mod tests;
