//! Sliding-window spectral features, ERD/ERS and labeled feature matrices.

mod export;
mod matrix;
mod spectrogram;

use serde::{Deserialize, Serialize};

pub use export::{read_feature_binary, write_feature_binary, write_feature_csv, write_spectrogram_csv};
pub use matrix::{build_feature_matrix, build_session_features, FeatureMatrix, Task};
pub use spectrogram::{
    erd_transform, mean_over_windows, sliding_spectrogram, sliding_spectrogram_of, trial_average_spectrogram, Spectrogram,
    SpectrogramKind,
};

/// Analysis window, stride and band of the spectral features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub window_s: f64,
    pub step_s: f64,
    pub band_hz: (f64, f64),
    pub resolution_hz: f64,
    /// Use log10 power instead of raw power as classifier features.
    pub log_power: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_s: 0.5,
            step_s: 1.0 / 16.0,
            band_hz: (8.0, 30.0),
            resolution_hz: 1.0,
            log_power: false,
        }
    }
}
