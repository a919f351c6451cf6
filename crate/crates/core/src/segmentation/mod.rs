//! Pupil and iris boundary localisation (circular Hough transform) and eyelid
//! detection (linear Hough transform).

mod hough;

pub use hough::{hough_circle, hough_line, ring_offsets, CirclePeak, LinePeak, Rect};

use hough::{circle_search, edge_points, line_search};
use thiserror::Error;

use crate::imagecore::{canny_edges, CannyParams, GrayImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("no circle found (peak score {peak_score:.3})")]
    NoCircleFound { peak_score: f64 },
    #[error("no line found")]
    NoLineFound,
    #[error("segmentation failure: {0}")]
    SegmentationFailure(String),
    #[error("invalid segmentation parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        (x - self.cx).hypot(y - self.cy) < self.r
    }
}

/// Which half-plane of an [`EyelidLine`] is hidden by the lid. "Above" means
/// towards smaller image rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccludedSide {
    Above,
    Below,
}

/// Line `a*x + b*y = c` with `a^2 + b^2 = 1` and `b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EyelidLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub side: OccludedSide,
}

impl EyelidLine {
    /// Builds a normalized line; returns `None` for a degenerate normal.
    pub fn new(a: f64, b: f64, c: f64, side: OccludedSide) -> Option<Self> {
        let n = a.hypot(b);
        if n <= f64::EPSILON || !n.is_finite() {
            return None;
        }
        let (mut a, mut b, mut c) = (a / n, b / n, c / n);
        if b < 0.0 || (b == 0.0 && a < 0.0) {
            a = -a;
            b = -b;
            c = -c;
        }
        Some(Self { a, b, c, side })
    }

    pub fn occludes(&self, x: f64, y: f64) -> bool {
        let s = self.a * x + self.b * y - self.c;
        match self.side {
            OccludedSide::Above => s < 0.0,
            OccludedSide::Below => s > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentationResult {
    pub pupil: Circle,
    pub iris: Circle,
    pub upper_eyelid: Option<EyelidLine>,
    pub lower_eyelid: Option<EyelidLine>,
    pub pupil_score: f64,
    pub iris_score: f64,
}

impl SegmentationResult {
    /// Checks the nesting invariant: the pupil center lies strictly inside the
    /// iris and the pupil is the smaller circle.
    pub fn is_consistent(&self) -> bool {
        self.pupil.r > 0.0
            && self.pupil.r < self.iris.r
            && self.iris.contains_point(self.pupil.cx, self.pupil.cy)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentationConfig {
    pub pupil_r_min: usize,
    pub pupil_r_max: usize,
    pub iris_r_min: usize,
    pub iris_r_max: usize,
    pub canny: CannyParams,
    pub min_peak: f64,
    /// Minimum eyelid line votes as a fraction of the search region width.
    pub min_line_votes: f64,
    pub detect_eyelids: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            pupil_r_min: 20,
            pupil_r_max: 70,
            iris_r_min: 60,
            iris_r_max: 150,
            canny: CannyParams::default(),
            min_peak: 0.35,
            min_line_votes: 0.5,
            detect_eyelids: true,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.pupil_r_min < 3 || self.pupil_r_max <= self.pupil_r_min {
            return Err("pupil radius range needs 3 <= min < max".into());
        }
        if self.iris_r_min < 3 || self.iris_r_max <= self.iris_r_min {
            return Err("iris radius range needs 3 <= min < max".into());
        }
        if !(0.0..=1.0).contains(&self.min_peak) {
            return Err(format!("min_peak must lie in [0, 1], got {}", self.min_peak));
        }
        if !(self.min_line_votes >= 0.0) {
            return Err(format!("min_line_votes must be non-negative, got {}", self.min_line_votes));
        }
        self.canny.validate()
    }
}

// Edge pixels this close to a fitted boundary are not eyelid evidence.
const BOUNDARY_BAND: f64 = 2.5;

/// Full segmentation: Canny edges, iris circle, pupil circle nested in the
/// iris, then optional upper and lower eyelid lines.
///
/// The iris radius search is capped at half the smaller image side so the
/// search never asks for circles that cannot fit.
pub fn segment_eye(
    img: &GrayImage,
    config: &SegmentationConfig,
) -> Result<SegmentationResult, SegmentationError> {
    config.validate().map_err(SegmentationError::InvalidParameters)?;
    let edges = canny_edges(img, &config.canny);
    segment_impl(&edges, config, Some(img))
}

/// Segmentation on a precomputed edge map. Unlike [`segment_eye`] the pupil
/// is searched on the same map, so a faint pupil boundary can be lost to
/// the global hysteresis thresholds.
pub fn segment_edges(
    edges: &GrayImage,
    config: &SegmentationConfig,
) -> Result<SegmentationResult, SegmentationError> {
    segment_impl(edges, config, None)
}

/// Edges of the iris interior alone: everything outside `radius` is flattened
/// to the interior mean first, so the sclera and lid contrast no longer sets
/// the hysteresis thresholds.
fn interior_edges(img: &GrayImage, window: Rect, cx: f64, cy: f64, radius: f64, config: &SegmentationConfig) -> Vec<(i32, i32)> {
    let inside = |x: usize, y: usize| (x as f64 - cx).hypot(y as f64 - cy) < radius;
    let (mut sum, mut n) = (0u64, 0u64);
    for y in window.y0..window.y1 {
        for x in window.x0..window.x1 {
            if inside(x, y) {
                sum += img.get(x, y) as u64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Vec::new();
    }
    let fill = (sum / n) as u8;
    let crop = GrayImage::from_fn(window.width(), window.height(), |x, y| {
        let (gx, gy) = (x + window.x0, y + window.y0);
        if inside(gx, gy) {
            img.get(gx, gy)
        } else {
            fill
        }
    });
    let edges = canny_edges(&crop, &config.canny);
    edge_points(&edges)
        .into_iter()
        .map(|(x, y)| (x + window.x0 as i32, y + window.y0 as i32))
        .collect()
}

fn segment_impl(
    edges: &GrayImage,
    config: &SegmentationConfig,
    img: Option<&GrayImage>,
) -> Result<SegmentationResult, SegmentationError> {
    let (w, h) = (edges.width(), edges.height());
    let fail = |msg: String| SegmentationError::SegmentationFailure(msg);
    let points = edge_points(edges);
    if points.is_empty() {
        return Err(fail("no edges".into()));
    }

    let iris_r_max = config.iris_r_max.min(w.min(h) / 2);
    if iris_r_max < config.iris_r_min {
        return Err(fail(format!("image {w}x{h} too small for iris radius {}", config.iris_r_min)));
    }
    let full = Rect { x0: 0, y0: 0, x1: w, y1: h };
    let iris = circle_search(&points, full, config.iris_r_min, iris_r_max, |_, _| true)
        .filter(|p| p.score >= config.min_peak)
        .ok_or_else(|| fail("iris boundary not found".into()))?;
    let ic = iris.circle;

    // pupil: centers inside the iris, evidence strictly inside the iris boundary
    let pupil_r_max = config.pupil_r_max.min(ic.r as usize - 1);
    if pupil_r_max < config.pupil_r_min {
        return Err(fail("iris too small for pupil radius range".into()));
    }
    let window = Rect {
        x0: (ic.cx - ic.r).max(0.0) as usize,
        y0: (ic.cy - ic.r).max(0.0) as usize,
        x1: ((ic.cx + ic.r + 1.0) as usize).min(w),
        y1: ((ic.cy + ic.r + 1.0) as usize).min(h),
    };
    let interior_r = ic.r - BOUNDARY_BAND;
    let (candidates, limit) = match img {
        // the flattened rim leaves a ring of artificial edges just inside interior_r
        Some(img) => (interior_edges(img, window, ic.cx, ic.cy, interior_r, config), interior_r - 2.0),
        None => (points.clone(), ic.r - BOUNDARY_BAND),
    };
    let inner: Vec<(i32, i32)> = candidates
        .iter()
        .copied()
        .filter(|&(x, y)| (x as f64 - ic.cx).hypot(y as f64 - ic.cy) < limit)
        .collect();
    let pupil = circle_search(&inner, window, config.pupil_r_min, pupil_r_max, |x, y| {
        ic.contains_point(x as f64, y as f64)
    })
    .filter(|p| p.score >= config.min_peak)
    .ok_or_else(|| fail("pupil boundary not found".into()))?;

    let mut result = SegmentationResult {
        pupil: pupil.circle,
        iris: ic,
        upper_eyelid: None,
        lower_eyelid: None,
        pupil_score: pupil.score,
        iris_score: iris.score,
    };
    if !result.is_consistent() {
        return Err(fail("pupil not nested inside iris".into()));
    }
    if config.detect_eyelids {
        let mut evidence = points;
        if img.is_some() {
            evidence.extend(inner);
            evidence.sort_unstable();
            evidence.dedup();
        }
        let (upper, lower) = find_eyelids(&evidence, &result, w, h, config.min_line_votes);
        result.upper_eyelid = upper;
        result.lower_eyelid = lower;
    }
    Ok(result)
}

fn find_eyelids(
    points: &[(i32, i32)],
    seg: &SegmentationResult,
    w: usize,
    h: usize,
    min_votes_frac: f64,
) -> (Option<EyelidLine>, Option<EyelidLine>) {
    let (ic, pc) = (seg.iris, seg.pupil);
    let x0 = (ic.cx - ic.r).max(0.0) as usize;
    let x1 = ((ic.cx + ic.r + 1.0) as usize).min(w);
    let off_boundary = |x: i32, y: i32| {
        let di = (x as f64 - ic.cx).hypot(y as f64 - ic.cy);
        let dp = (x as f64 - pc.cx).hypot(y as f64 - pc.cy);
        (di - ic.r).abs() > BOUNDARY_BAND && (dp - pc.r).abs() > BOUNDARY_BAND
    };
    let regions = [
        (
            Rect {
                x0,
                x1,
                y0: (ic.cy - ic.r).max(0.0) as usize,
                y1: ((pc.cy - pc.r).max(0.0) as usize).min(h),
            },
            OccludedSide::Above,
        ),
        (
            Rect {
                x0,
                x1,
                y0: ((pc.cy + pc.r + 1.0) as usize).min(h),
                y1: ((ic.cy + ic.r + 1.0) as usize).min(h),
            },
            OccludedSide::Below,
        ),
    ];
    let max_rho = (w + h) as i64;
    let mut found = [None, None];
    for (slot, (region, side)) in found.iter_mut().zip(regions) {
        if region.width() == 0 || region.height() == 0 {
            continue;
        }
        let pts: Vec<(i32, i32)> = points
            .iter()
            .copied()
            .filter(|&(x, y)| region.contains(x as usize, y as usize) && off_boundary(x, y))
            .collect();
        if let Some(peak) = line_search(&pts, max_rho) {
            if peak.votes as f64 >= min_votes_frac * region.width() as f64 {
                *slot = Some(peak.to_line(side));
            }
        }
    }
    (found[0], found[1])
}

/// Copy of `img` with the fitted circles and eyelid lines drawn in white.
pub fn draw_overlay(img: &GrayImage, seg: &SegmentationResult) -> GrayImage {
    let mut out = img.clone();
    let (w, h) = (img.width() as i64, img.height() as i64);
    for c in [seg.pupil, seg.iris] {
        for (dx, dy) in ring_offsets(c.r.round() as usize) {
            let (x, y) = (c.cx.round() as i64 + dx as i64, c.cy.round() as i64 + dy as i64);
            if (0..w).contains(&x) && (0..h).contains(&y) {
                out.set(x as usize, y as usize, 255);
            }
        }
    }
    for line in [seg.upper_eyelid, seg.lower_eyelid].into_iter().flatten() {
        // walk along the dominant axis so the drawn line has no gaps
        if line.b.abs() >= line.a.abs() {
            for x in 0..w {
                let y = ((line.c - line.a * x as f64) / line.b).round() as i64;
                if (0..h).contains(&y) {
                    out.set(x as usize, y as usize, 255);
                }
            }
        } else {
            for y in 0..h {
                let x = ((line.c - line.b * y as f64) / line.a).round() as i64;
                if (0..w).contains(&x) {
                    out.set(x as usize, y as usize, 255);
                }
            }
        }
    }
    out
}
