//! Image to template in one call, with the stage that failed kept apart.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode, EncodingError, IrisTemplate, LogGaborParams};
use crate::imagecore::GrayImage;
use crate::matching::DEFAULT_SHIFT_BUDGET;
use crate::normalization::{normalize, NormalizationError};
use crate::segmentation::{segment_eye, SegmentationConfig, SegmentationError, SegmentationResult};

pub const DEFAULT_RADIAL_RES: usize = 20;
pub const DEFAULT_ANGULAR_RES: usize = 240;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Normalization(#[from] NormalizationError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub segmentation: SegmentationConfig,
    pub radial_res: usize,
    pub angular_res: usize,
    pub log_gabor: LogGaborParams,
    pub shift_budget: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationConfig::default(),
            radial_res: DEFAULT_RADIAL_RES,
            angular_res: DEFAULT_ANGULAR_RES,
            log_gabor: LogGaborParams::default(),
            shift_budget: DEFAULT_SHIFT_BUDGET,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.segmentation.validate()?;
        self.log_gabor.validate().map_err(|e| e.to_string())?;
        if self.radial_res < 2 {
            return Err(format!("radial resolution {} must be at least 2", self.radial_res));
        }
        if self.angular_res < 8 || !self.angular_res.is_multiple_of(2) {
            return Err(format!("angular resolution {} must be even and at least 8", self.angular_res));
        }
        if self.shift_budget >= self.angular_res {
            return Err(format!("shift budget {} must be below the angular resolution", self.shift_budget));
        }
        Ok(())
    }
}

pub fn extract_template(
    img: &GrayImage,
    config: &PipelineConfig,
) -> Result<(SegmentationResult, IrisTemplate), PipelineError> {
    let seg = segment_eye(img, &config.segmentation)?;
    let pattern = normalize(img, &seg, config.radial_res, config.angular_res)?;
    let template = encode(&pattern, &config.log_gabor)?;
    Ok((seg, template))
}
