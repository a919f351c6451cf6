use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    candidate_thresholds, equal_error_rate, far_frr_at, sorted, threshold_at_far, EvalError, FailureCounts,
    ImageTally, OperatingPoint, ScoreKind, ScoreSet,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub subjects: usize,
    pub real_images: usize,
    pub fake_images: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageRate {
    pub segmented: usize,
    pub total: usize,
    /// Percent; zero when there are no images.
    pub rate: f64,
}

impl From<ImageTally> for ImageRate {
    fn from(t: ImageTally) -> Self {
        let rate = if t.total == 0 { 0.0 } else { 100.0 * t.segmented as f64 / t.total as f64 };
        Self { segmented: t.segmented, total: t.total, rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl DistributionStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { count: 0, mean: None, std_dev: None, min: None, max: None };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            count: values.len(),
            mean: Some(mean),
            std_dev: Some(var.sqrt()),
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub genuine: DistributionStats,
    pub impostor: DistributionStats,
    pub attack1: DistributionStats,
    pub attack2: DistributionStats,
    pub eer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetSample {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub segmentation_real: ImageRate,
    pub segmentation_fake: ImageRate,
    pub scores: ScoreSummary,
    pub failures: FailureCounts,
    /// Sorted by threshold.
    pub operating_points: Vec<OperatingPoint>,
    /// One sample per candidate threshold, sorted by threshold.
    pub det: Vec<DetSample>,
}

pub fn build_report(scores: &ScoreSet, targets: &[f64]) -> Result<EvaluationReport, EvalError> {
    let f = &scores.failures;
    let mut operating_points = targets.iter().map(|&t| threshold_at_far(scores, t)).collect::<Result<Vec<_>, _>>()?;
    operating_points.sort_by(|a, b| a.threshold.total_cmp(&b.threshold).then(a.target_far.total_cmp(&b.target_far)));
    let det = candidate_thresholds(&sorted(&scores.impostor))
        .into_iter()
        .map(|threshold| far_frr_at(scores, threshold).map(|(far, frr)| DetSample { threshold, far, frr }))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = |kind| DistributionStats::of(&scores.distances(kind));
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: DatasetSummary { subjects: f.subjects, real_images: f.real.total, fake_images: f.fake.total },
        segmentation_real: f.real.into(),
        segmentation_fake: f.fake.into(),
        scores: ScoreSummary {
            genuine: stats(ScoreKind::Genuine),
            impostor: stats(ScoreKind::Impostor),
            attack1: stats(ScoreKind::Attack1),
            attack2: stats(ScoreKind::Attack2),
            eer: equal_error_rate(scores)?,
        },
        failures: f.clone(),
        operating_points,
        det,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Plain-text table: NOM (target FAR - FRR), attack 1 SR, attack 2 SR,
    /// then the threshold used.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let d = &self.dataset;
        let _ = writeln!(out, "subjects: {}  real images: {}  fake images: {}", d.subjects, d.real_images, d.fake_images);
        for (name, r) in [("real", self.segmentation_real), ("fake", self.segmentation_fake)] {
            let _ = writeln!(out, "segmented {name}: {}/{} ({:.2}%)", r.segmented, r.total, r.rate);
        }
        let _ = writeln!(out, "EER: {:.2}%", self.scores.eer);
        out.push('\n');
        let rows: Vec<[String; 4]> = self
            .operating_points
            .iter()
            .map(|op| {
                [format!("{} - {}", op.target_far, cell(op.frr)), cell(op.sr_attack1), cell(op.sr_attack2), format!("{:.4}", op.threshold)]
            })
            .collect();
        let header = [
            ["NOM".to_string(), "Attack 1".into(), "Attack 2".into(), "".into()],
            ["FAR - FRR (%)".to_string(), "SR (%)".into(), "SR (%)".into(), "threshold".into()],
        ];
        let mut widths = [0usize; 4];
        for row in header.iter().chain(&rows) {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let rule: String = widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("+");
        let line = |row: &[String; 4]| {
            row.iter().zip(widths).map(|(c, w)| format!(" {c:<w$} ")).collect::<Vec<_>>().join("|").trim_end().to_string()
        };
        let _ = writeln!(out, "{}", line(&header[0]));
        let _ = writeln!(out, "{}", line(&header[1]));
        let _ = writeln!(out, "{rule}");
        for row in &rows {
            let _ = writeln!(out, "{}", line(row));
        }
        out
    }
}
