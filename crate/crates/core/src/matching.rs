//! Noise-masked Hamming distance between iris templates, minimized over
//! circular shifts of the probe.
//!
//! Rows are packed into `u64` words. A shifted probe row is read out of a
//! doubled copy of the row, so every shift costs a handful of word loads,
//! XOR/AND and population counts per row.

use thiserror::Error;

use crate::encoding::IrisTemplate;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("template shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("no bits left to compare after masking")]
    AllBitsMasked,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatchScore {
    pub hd: f64,
    /// Angular positions the probe was shifted by (see [`shifted`]).
    pub best_shift: isize,
    pub effective_bits: usize,
    pub differing_bits: usize,
}

pub const DEFAULT_SHIFT_BUDGET: usize = 8;

/// Probe shifted by `s` angular positions: sample `j` of the result is sample
/// `j + s` of `y`. Equivalent to `y.rotate(-s)`.
pub fn shifted(y: &IrisTemplate, s: isize) -> IrisTemplate {
    y.rotate(-s)
}

fn check_shapes(x: &IrisTemplate, y: &IrisTemplate) -> Result<(), MatchError> {
    if x.rows() != y.rows() || x.angular() != y.angular() {
        return Err(MatchError::ShapeMismatch(x.rows(), x.bits_per_row(), y.rows(), y.bits_per_row()));
    }
    Ok(())
}

/// Masked Hamming distance at zero shift: differing unmasked bits divided by
/// the number of bits masked in neither template.
pub fn hamming_distance(x: &IrisTemplate, y: &IrisTemplate) -> Result<(f64, usize), MatchError> {
    check_shapes(x, y)?;
    let mut diff = 0usize;
    let mut masked = 0usize;
    for r in 0..x.rows() {
        let (xb, xn) = (x.row_bits(r), x.row_noise(r));
        let (yb, yn) = (y.row_bits(r), y.row_noise(r));
        for w in 0..x.words_per_row() {
            let noise = xn[w] | yn[w];
            diff += ((xb[w] ^ yb[w]) & !noise).count_ones() as usize;
            masked += noise.count_ones() as usize;
        }
    }
    let effective = x.len_bits() - masked;
    if effective == 0 {
        return Err(MatchError::AllBitsMasked);
    }
    Ok((diff as f64 / effective as f64, effective))
}

/// Row contents written twice back to back, so any circular window of
/// `nbits` can be read with plain shifts.
struct DoubledRows {
    words_per_row: usize,
    data: Vec<u64>,
}

impl DoubledRows {
    fn new<'a>(rows: usize, nbits: usize, row_words: impl Fn(usize) -> &'a [u64]) -> Self {
        // 2 * nbits plus one spare word so reads never run off the end
        let words_per_row = (2 * nbits).div_ceil(64) + 1;
        let mut data = vec![0u64; rows * words_per_row];
        for r in 0..rows {
            let src = row_words(r);
            let dst = &mut data[r * words_per_row..(r + 1) * words_per_row];
            for base in [0, nbits] {
                let (q, s) = (base / 64, base % 64);
                for (i, &word) in src.iter().enumerate() {
                    dst[q + i] |= word << s;
                    if s != 0 {
                        dst[q + i + 1] |= word >> (64 - s);
                    }
                }
            }
        }
        Self { words_per_row, data }
    }

    #[inline]
    fn window_word(&self, r: usize, offset: usize, w: usize) -> u64 {
        let row = &self.data[r * self.words_per_row..(r + 1) * self.words_per_row];
        let start = offset + 64 * w;
        let (q, s) = (start / 64, start % 64);
        if s == 0 {
            row[q]
        } else {
            (row[q] >> s) | (row[q + 1] << (64 - s))
        }
    }
}

/// Minimum masked Hamming distance over shifts `-budget..=budget` (in angular
/// positions, two bits each). Ties prefer the smallest `|s|`, then negative
/// `s`.
pub fn match_templates(x: &IrisTemplate, y: &IrisTemplate, shift_budget: usize) -> Result<MatchScore, MatchError> {
    check_shapes(x, y)?;
    let rows = x.rows();
    let nbits = x.bits_per_row();
    let wpr = x.words_per_row();
    let tail_bits = nbits % 64;
    let tail_mask = if tail_bits == 0 { u64::MAX } else { (1u64 << tail_bits) - 1 };

    let yb = DoubledRows::new(rows, nbits, |r| y.row_bits(r));
    let yn = DoubledRows::new(rows, nbits, |r| y.row_noise(r));

    let mut best: Option<MatchScore> = None;
    let budget = shift_budget as isize;
    let order = std::iter::once(0).chain((1..=budget).flat_map(|s| [-s, s]));
    for s in order {
        let offset = (2 * s).rem_euclid(nbits as isize) as usize;
        let mut diff = 0usize;
        let mut masked = 0usize;
        for r in 0..rows {
            let (xb, xn) = (x.row_bits(r), x.row_noise(r));
            for w in 0..wpr {
                let valid = if w + 1 == wpr { tail_mask } else { u64::MAX };
                let noise = (xn[w] | yn.window_word(r, offset, w)) & valid;
                diff += ((xb[w] ^ yb.window_word(r, offset, w)) & !noise & valid).count_ones() as usize;
                masked += noise.count_ones() as usize;
            }
        }
        let effective = rows * nbits - masked;
        if effective == 0 {
            continue;
        }
        // exact rational comparison: diff/effective < best.diff/best.effective
        let better = best.is_none_or(|b| diff * b.effective_bits < b.differing_bits * effective);
        if better {
            best = Some(MatchScore {
                hd: diff as f64 / effective as f64,
                best_shift: s,
                effective_bits: effective,
                differing_bits: diff,
            });
        }
    }
    best.ok_or(MatchError::AllBitsMasked)
}
