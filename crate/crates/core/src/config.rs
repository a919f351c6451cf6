//! Layered run configuration: built-in defaults, then a flat
//! `section.key = value` file, then individual overrides.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

use crate::evaluation::ProtocolConfig;
use crate::spoofsim::{EyeDistribution, PreprocessChain, RecaptureParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Every documented key with its default, in the order `iriskit` prints them.
pub const KEYS: &[(&str, &str)] = &[
    ("segmentation.pupil_r_min", "20"),
    ("segmentation.pupil_r_max", "70"),
    ("segmentation.iris_r_min", "60"),
    ("segmentation.iris_r_max", "150"),
    ("segmentation.min_peak", "0.35"),
    ("segmentation.min_line_votes", "0.5"),
    ("segmentation.detect_eyelids", "true"),
    ("canny.sigma", "2"),
    ("canny.low", "0.2"),
    ("canny.high", "0.5"),
    ("normalization.radial_res", "20"),
    ("normalization.angular_res", "240"),
    ("encoding.wavelength", "18"),
    ("encoding.sigma_over_f", "0.5"),
    ("encoding.min_amplitude", "0.0001"),
    ("matching.shift_budget", "8"),
    ("recapture.preset", "inkjet-highres"),
    ("recapture.dot_pitch", "4"),
    ("recapture.blur_sigma", "2"),
    ("recapture.contrast", "0.7"),
    ("recapture.noise_sigma", "5"),
    ("recapture.highlight", "true"),
    ("recapture.screen_seed", "0"),
    ("synth.chain", "open-tophat"),
    ("evaluation.protocol_seed", "1"),
    ("evaluation.far_targets", "0.1,1,2,5"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub protocol: ProtocolConfig,
    pub recapture: RecaptureParams,
    pub chain: PreprocessChain,
    pub distribution: EyeDistribution,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            protocol: ProtocolConfig::default(),
            recapture: RecaptureParams::default(),
            chain: PreprocessChain::open_tophat(),
            distribution: EyeDistribution::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue { key: key.into(), reason: e.to_string() })
}

/// Splits config text into `(line, key, value)` triples, skipping blanks
/// and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl Config {
    /// Applies one override. A `recapture.preset` replaces every recapture
    /// field except the screen seed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.protocol.pipeline;
        let seg = &mut p.segmentation;
        let rp = &mut self.recapture;
        match key {
            "segmentation.pupil_r_min" => seg.pupil_r_min = parse(key, value)?,
            "segmentation.pupil_r_max" => seg.pupil_r_max = parse(key, value)?,
            "segmentation.iris_r_min" => seg.iris_r_min = parse(key, value)?,
            "segmentation.iris_r_max" => seg.iris_r_max = parse(key, value)?,
            "segmentation.min_peak" => seg.min_peak = parse(key, value)?,
            "segmentation.min_line_votes" => seg.min_line_votes = parse(key, value)?,
            "segmentation.detect_eyelids" => seg.detect_eyelids = parse(key, value)?,
            "canny.sigma" => seg.canny.sigma = parse(key, value)?,
            "canny.low" => seg.canny.low = parse(key, value)?,
            "canny.high" => seg.canny.high = parse(key, value)?,
            "normalization.radial_res" => p.radial_res = parse(key, value)?,
            "normalization.angular_res" => p.angular_res = parse(key, value)?,
            "encoding.wavelength" => p.log_gabor.wavelength = parse(key, value)?,
            "encoding.sigma_over_f" => p.log_gabor.sigma_over_f = parse(key, value)?,
            "encoding.min_amplitude" => p.log_gabor.min_amplitude = parse(key, value)?,
            "matching.shift_budget" => p.shift_budget = parse(key, value)?,
            "recapture.preset" => {
                let preset = RecaptureParams::preset(value).ok_or_else(|| ConfigError::InvalidValue {
                    key: key.into(),
                    reason: format!("unknown recapture preset '{value}'"),
                })?;
                *rp = RecaptureParams { screen_seed: rp.screen_seed, ..preset };
            }
            "recapture.dot_pitch" => rp.dot_pitch = parse(key, value)?,
            "recapture.blur_sigma" => rp.blur_sigma = parse(key, value)?,
            "recapture.contrast" => rp.contrast = parse(key, value)?,
            "recapture.noise_sigma" => rp.noise_sigma = parse(key, value)?,
            "recapture.highlight" => {
                let on: bool = parse(key, value)?;
                rp.highlight = match (on, rp.highlight) {
                    (false, _) => None,
                    (true, Some(h)) => Some(h),
                    (true, None) => RecaptureParams::default().highlight,
                };
            }
            "recapture.screen_seed" => rp.screen_seed = parse(key, value)?,
            "synth.chain" => {
                self.chain = value
                    .parse()
                    .map_err(|reason| ConfigError::InvalidValue { key: key.into(), reason })?
            }
            "evaluation.protocol_seed" => self.protocol.protocol_seed = parse(key, value)?,
            "evaluation.far_targets" => {
                self.protocol.far_targets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse::<f64>(key, s))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies pairs in order, presets first so explicit fields win.
    pub fn apply_pairs<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), ConfigError> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        for (k, v) in pairs.iter().filter(|(k, _)| *k == "recapture.preset") {
            self.set(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| *k != "recapture.preset") {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let pairs = parse_pairs(text)?;
        config.apply_pairs(pairs.iter().map(|(_, k, v)| (k.as_str(), v.as_str())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.protocol.validate().map_err(ConfigError::Invalid)?;
        self.recapture.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The effective configuration as config text.
    pub fn to_text(&self) -> String {
        let p = &self.protocol.pipeline;
        let s = &p.segmentation;
        let rp = &self.recapture;
        let targets: Vec<String> = self.protocol.far_targets.iter().map(f64::to_string).collect();
        let preset = RecaptureParams::presets()
            .into_iter()
            .find(|(_, q)| RecaptureParams { screen_seed: rp.screen_seed, ..q.clone() } == *rp)
            .map(|(n, _)| n);
        let mut lines = vec![
            format!("segmentation.pupil_r_min = {}", s.pupil_r_min),
            format!("segmentation.pupil_r_max = {}", s.pupil_r_max),
            format!("segmentation.iris_r_min = {}", s.iris_r_min),
            format!("segmentation.iris_r_max = {}", s.iris_r_max),
            format!("segmentation.min_peak = {}", s.min_peak),
            format!("segmentation.min_line_votes = {}", s.min_line_votes),
            format!("segmentation.detect_eyelids = {}", s.detect_eyelids),
            format!("canny.sigma = {}", s.canny.sigma),
            format!("canny.low = {}", s.canny.low),
            format!("canny.high = {}", s.canny.high),
            format!("normalization.radial_res = {}", p.radial_res),
            format!("normalization.angular_res = {}", p.angular_res),
            format!("encoding.wavelength = {}", p.log_gabor.wavelength),
            format!("encoding.sigma_over_f = {}", p.log_gabor.sigma_over_f),
            format!("encoding.min_amplitude = {}", p.log_gabor.min_amplitude),
            format!("matching.shift_budget = {}", p.shift_budget),
        ];
        if let Some(name) = preset {
            lines.push(format!("recapture.preset = {name}"));
        }
        lines.extend([
            format!("recapture.dot_pitch = {}", rp.dot_pitch),
            format!("recapture.blur_sigma = {}", rp.blur_sigma),
            format!("recapture.contrast = {}", rp.contrast),
            format!("recapture.noise_sigma = {}", rp.noise_sigma),
            format!("recapture.highlight = {}", rp.highlight.is_some()),
            format!("recapture.screen_seed = {}", rp.screen_seed),
            format!("synth.chain = {}", self.chain),
            format!("evaluation.protocol_seed = {}", self.protocol.protocol_seed),
            format!("evaluation.far_targets = {}", targets.join(",")),
        ]);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
