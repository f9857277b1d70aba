//! Pipeline configuration with defaults matching the recording protocol.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::FrechetOptions;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::session::EpochLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub bandpass_hz: (f64, f64),
    pub bandpass_order: usize,
    pub eog_regression: bool,
    pub common_average: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            bandpass_hz: (0.1, 45.0),
            bandpass_order: 4,
            eog_regression: true,
            common_average: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DldaConfig {
    /// Number of Fisher-ranked features kept.
    pub n_features: usize,
}

impl Default for DldaConfig {
    fn default() -> Self {
        Self { n_features: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdmConfig {
    pub bandpass_hz: (f64, f64),
    pub bandpass_order: usize,
    pub shrinkage: f64,
    pub frechet: FrechetOptions,
    /// Covariance window length.
    pub window_s: f64,
    /// Stride of the replayed sliding window.
    pub step_s: f64,
    pub recenter: bool,
    pub eog_regression: bool,
}

impl Default for MdmConfig {
    fn default() -> Self {
        Self {
            bandpass_hz: (8.0, 30.0),
            bandpass_order: 2,
            shrinkage: 0.05,
            frechet: FrechetOptions::default(),
            window_s: 1.0,
            step_s: 1.0 / 16.0,
            recenter: true,
            eog_regression: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Significance level for chance level and condition contrasts.
    pub alpha: f64,
    /// Channel analysed by the spectrogram and contrast reports.
    pub channel: String,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { alpha: 0.05, channel: "C3".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub epochs: EpochLayout,
    pub features: FeatureConfig,
    pub dlda: DldaConfig,
    pub mdm: MdmConfig,
    pub evaluation: EvaluationConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.dlda.n_features == 0 {
            return bad("dlda.n_features must be positive");
        }
        if !(0.0..=1.0).contains(&self.mdm.shrinkage) {
            return bad("mdm.shrinkage must lie in [0, 1]");
        }
        if !(self.evaluation.alpha > 0.0 && self.evaluation.alpha < 1.0) {
            return bad("evaluation.alpha must lie in (0, 1)");
        }
        if self.mdm.window_s <= 0.0 || self.mdm.step_s <= 0.0 {
            return bad("mdm window and step must be positive");
        }
        if self.features.band_hz.0 >= self.features.band_hz.1 {
            return bad("features.band_hz must be increasing");
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        json_sha256(self)
    }
}

/// Hex SHA-256 of a value's compact JSON serialization.
pub fn json_sha256<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("value serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = PipelineConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut other = cfg.clone();
        other.dlda.n_features = 11;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"seed": 7, "mdm": {"shrinkage": 0.1}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mdm.shrinkage, 0.1);
        assert_eq!(cfg.mdm.bandpass_order, 2);
        assert_eq!(cfg.features.band_hz, (8.0, 30.0));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"sed": 7}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"mdm": {"shrinkage": 2.0}}"#).is_err());
    }
}
