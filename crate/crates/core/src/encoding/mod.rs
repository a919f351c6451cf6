//! Phase encoding of normalized iris patterns.
//!
//! Every row of the pattern is a closed ring, so it is filtered circularly in
//! the frequency domain with a one-sided Log-Gabor transfer function. The
//! phase of each complex response is quantized to a 2-bit Gray code.

mod template;

pub use template::{IrisTemplate, TemplateFormatError};

use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::normalization::NormalizedPattern;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("every sample of the pattern is masked")]
    AllMasked,
    #[error("invalid Log-Gabor parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogGaborParams {
    /// Center wavelength in samples.
    pub wavelength: f64,
    /// Bandwidth ratio sigma/f0.
    pub sigma_over_f: f64,
    /// Responses weaker than this (input scaled to [0, 1]) are marked noise.
    pub min_amplitude: f64,
}

impl Default for LogGaborParams {
    fn default() -> Self {
        Self { wavelength: 18.0, sigma_over_f: 0.5, min_amplitude: 1e-4 }
    }
}

impl LogGaborParams {
    pub fn validate(&self) -> Result<(), EncodingError> {
        if !(self.wavelength >= 3.0) {
            return Err(EncodingError::InvalidParameters(format!(
                "wavelength must be >= 3, got {}",
                self.wavelength
            )));
        }
        if !(self.sigma_over_f > 0.0 && self.sigma_over_f < 1.0) {
            return Err(EncodingError::InvalidParameters(format!(
                "sigma_over_f must lie in (0, 1), got {}",
                self.sigma_over_f
            )));
        }
        if !(self.min_amplitude >= 0.0) {
            return Err(EncodingError::InvalidParameters(format!(
                "min_amplitude must be non-negative, got {}",
                self.min_amplitude
            )));
        }
        Ok(())
    }

    /// Transfer function at normalized frequency `f` (cycles per sample).
    pub fn gain(&self, f: f64) -> f64 {
        if f <= 0.0 {
            return 0.0;
        }
        let f0 = 1.0 / self.wavelength;
        let num = (f / f0).ln();
        let den = self.sigma_over_f.ln();
        (-(num * num) / (2.0 * den * den)).exp()
    }
}

/// Log-Gabor filter for rows of a fixed length, with FFT plans cached.
pub struct LogGaborFilter {
    len: usize,
    transfer: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LogGaborFilter {
    pub fn new(len: usize, params: &LogGaborParams) -> Result<Self, EncodingError> {
        params.validate()?;
        if len < 8 || !len.is_multiple_of(2) {
            return Err(EncodingError::InvalidParameters(format!(
                "row length must be even and >= 8, got {len}"
            )));
        }
        // only non-negative frequencies pass, so the output is analytic
        let transfer = (0..len)
            .map(|k| if k <= len / 2 { params.gain(k as f64 / len as f64) } else { 0.0 })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            transfer,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn transfer(&self) -> &[f64] {
        &self.transfer
    }

    pub fn apply(&self, signal: &[f64]) -> Vec<Complex64> {
        assert_eq!(signal.len(), self.len, "row length mismatch");
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        for (b, &g) in buf.iter_mut().zip(&self.transfer) {
            *b *= g * scale;
        }
        self.inverse.process(&mut buf);
        buf
    }
}

/// Circular Log-Gabor filtering of a single row.
pub fn log_gabor_row(signal: &[f64], params: &LogGaborParams) -> Result<Vec<Complex64>, EncodingError> {
    Ok(LogGaborFilter::new(signal.len(), params)?.apply(signal))
}

/// Gray-coded phase quadrant: (real >= 0, imaginary >= 0).
#[inline]
pub fn quantize_phase(z: Complex64) -> (bool, bool) {
    (z.re >= 0.0, z.im >= 0.0)
}

pub fn encode(pattern: &NormalizedPattern, params: &LogGaborParams) -> Result<IrisTemplate, EncodingError> {
    let (rows, cols) = (pattern.radial_res(), pattern.angular_res());
    if pattern.mask().iter().all(|&m| m) {
        return Err(EncodingError::AllMasked);
    }
    let filter = LogGaborFilter::new(cols, params)?;
    let mut template = IrisTemplate::zeros(rows, cols);
    let mut signal = vec![0f64; cols];
    for r in 0..rows {
        let samples = pattern.row(r);
        let mask = pattern.row_mask(r);
        let (sum, count) = samples
            .iter()
            .zip(mask)
            .filter(|(_, &m)| !m)
            .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v as f64 / 255.0, n + 1));
        let fill = if count > 0 { sum / count as f64 } else { 0.0 };
        for ((dst, &v), &m) in signal.iter_mut().zip(samples).zip(mask) {
            *dst = if m { fill } else { v as f64 / 255.0 };
        }
        let response = filter.apply(&signal);
        for (a, z) in response.iter().enumerate() {
            let (re, im) = quantize_phase(*z);
            template.set_bit(r, 2 * a, re);
            template.set_bit(r, 2 * a + 1, im);
            if mask[a] || z.norm() < params.min_amplitude {
                template.set_sample_noise(r, a, true);
            }
        }
    }
    Ok(template)
}
