//! Circular and linear Hough transforms over binary edge maps.

use super::{Circle, EyelidLine, OccludedSide, SegmentationError};
use crate::imagecore::GrayImage;

/// Axis-aligned pixel rectangle, `x0..x1` by `y0..y1` (exclusive ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }
}

/// Offsets `(dx, dy)` of the digital circle of radius `r`: every lattice point
/// whose Euclidean distance from the origin rounds to `r`.
pub fn ring_offsets(r: usize) -> Vec<(i32, i32)> {
    let r = r as i64;
    let lo = r * r - r + 1;
    let hi = r * r + r;
    let mut out = Vec::with_capacity((7 * r) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = dx * dx + dy * dy;
            if (lo..=hi).contains(&d2) {
                out.push((dx as i32, dy as i32));
            }
        }
    }
    out
}

pub(crate) fn edge_points(edges: &GrayImage) -> Vec<(i32, i32)> {
    let w = edges.width();
    edges
        .pixels()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0)
        .map(|(i, _)| ((i % w) as i32, (i / w) as i32))
        .collect()
}

/// Best circle found by [`circle_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePeak {
    pub circle: Circle,
    pub votes: u32,
    /// Votes divided by the size of the digital circle, in `[0, 1]`.
    pub score: f64,
}

/// Exhaustive accumulator search over centers in `centers` and radii
/// `r_min..=r_max`. `accept` can veto individual centers. Ties go to the
/// smallest radius, then the smallest `cy`, then the smallest `cx`.
pub(crate) fn circle_search(
    points: &[(i32, i32)],
    centers: Rect,
    r_min: usize,
    r_max: usize,
    accept: impl Fn(i32, i32) -> bool,
) -> Option<CirclePeak> {
    let cw = centers.width();
    let ch = centers.height();
    if cw == 0 || ch == 0 || points.is_empty() || r_min > r_max {
        return None;
    }
    let (ox, oy) = (centers.x0 as i32, centers.y0 as i32);
    let allowed: Vec<bool> = (0..ch)
        .flat_map(|y| (0..cw).map(move |x| (x, y)))
        .map(|(x, y)| accept(x as i32 + ox, y as i32 + oy))
        .collect();

    let mut acc = vec![0u16; cw * ch];
    let mut best: Option<CirclePeak> = None;
    for r in r_min..=r_max {
        let ring = ring_offsets(r);
        acc.iter_mut().for_each(|a| *a = 0);
        for &(px, py) in points {
            // only offsets whose center row lands in the window
            let bx = px - ox;
            let by = py - oy;
            for &(dx, dy) in &ring {
                let cx = bx + dx;
                let cy = by + dy;
                if cx >= 0 && cy >= 0 && (cx as usize) < cw && (cy as usize) < ch {
                    acc[cy as usize * cw + cx as usize] += 1;
                }
            }
        }
        let mut local_best = 0u16;
        let mut local_idx = usize::MAX;
        for (i, (&v, &ok)) in acc.iter().zip(&allowed).enumerate() {
            if ok && v > local_best {
                local_best = v;
                local_idx = i;
            }
        }
        if local_idx == usize::MAX {
            continue;
        }
        let votes = local_best as u32;
        if best.is_none_or(|b| votes > b.votes) {
            let cx = (local_idx % cw) as i32 + ox;
            let cy = (local_idx / cw) as i32 + oy;
            best = Some(CirclePeak {
                circle: Circle { cx: cx as f64, cy: cy as f64, r: r as f64 },
                votes,
                score: votes as f64 / ring.len() as f64,
            });
        }
    }
    best
}

/// Strongest circle in an edge map. Centers range over the whole image.
pub fn hough_circle(
    edges: &GrayImage,
    r_min: usize,
    r_max: usize,
    min_peak: f64,
) -> Result<(Circle, f64), SegmentationError> {
    if r_min < 3 || r_max <= r_min {
        return Err(SegmentationError::InvalidParameters(format!(
            "radius range [{r_min}, {r_max}] needs r_min >= 3 and r_max > r_min"
        )));
    }
    let points = edge_points(edges);
    let window = Rect { x0: 0, y0: 0, x1: edges.width(), y1: edges.height() };
    match circle_search(&points, window, r_min, r_max, |_, _| true) {
        Some(peak) if peak.score >= min_peak => Ok((peak.circle, peak.score)),
        Some(peak) => Err(SegmentationError::NoCircleFound { peak_score: peak.score }),
        None => Err(SegmentationError::NoCircleFound { peak_score: 0.0 }),
    }
}

/// Best line in `(rho, theta)` space, 1 degree by 1 pixel bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePeak {
    pub theta_deg: usize,
    pub rho: i64,
    pub votes: u32,
}

pub(crate) fn line_search(points: &[(i32, i32)], max_rho: i64) -> Option<LinePeak> {
    if points.is_empty() {
        return None;
    }
    let bins = (2 * max_rho + 1) as usize;
    let mut acc = vec![0u32; bins];
    let mut best: Option<LinePeak> = None;
    for theta_deg in 0..180usize {
        let theta = (theta_deg as f64).to_radians();
        let (s, c) = theta.sin_cos();
        acc.iter_mut().for_each(|a| *a = 0);
        for &(x, y) in points {
            let rho = (x as f64 * c + y as f64 * s).round() as i64;
            acc[(rho + max_rho) as usize] += 1;
        }
        for (i, &v) in acc.iter().enumerate() {
            if v > 0 && best.is_none_or(|b| v > b.votes) {
                best = Some(LinePeak { theta_deg, rho: i as i64 - max_rho, votes: v });
            }
        }
    }
    best
}

impl LinePeak {
    pub fn to_line(self, side: OccludedSide) -> EyelidLine {
        let theta = (self.theta_deg as f64).to_radians();
        EyelidLine { a: theta.cos(), b: theta.sin(), c: self.rho as f64, side }
    }
}

/// Strongest line among the edge pixels inside `region`.
///
/// `min_votes_frac` is the minimum peak expressed as a fraction of the region
/// width. The returned line carries [`OccludedSide::Above`]; callers pick the
/// side that fits their use.
pub fn hough_line(
    edges: &GrayImage,
    region: Rect,
    min_votes_frac: f64,
) -> Result<(EyelidLine, f64), SegmentationError> {
    if region.x1 > edges.width() || region.y1 > edges.height() {
        return Err(SegmentationError::InvalidParameters(format!(
            "region {region:?} exceeds {}x{} image",
            edges.width(),
            edges.height()
        )));
    }
    let points: Vec<(i32, i32)> = edge_points(edges)
        .into_iter()
        .filter(|&(x, y)| region.contains(x as usize, y as usize))
        .collect();
    let max_rho = (edges.width() + edges.height()) as i64;
    let min_votes = min_votes_frac * region.width() as f64;
    match line_search(&points, max_rho) {
        Some(peak) if peak.votes as f64 >= min_votes && peak.votes > 0 => {
            let score = peak.votes as f64 / region.width().max(1) as f64;
            Ok((peak.to_line(OccludedSide::Above), score))
        }
        _ => Err(SegmentationError::NoLineFound),
    }
}
