use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::spectrogram::sliding_spectrogram_of;
use super::FeatureConfig;
use crate::error::{Error, Result};
use crate::par;
use crate::session::{extract_epochs, ChannelKind, Condition, Epoch, Recording, TrialTimeline};

/// The two binary decoding problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// RS (class 0) vs. bMI (class 1).
    Onset,
    /// dMI (class 0) vs. eMI (class 1).
    Offset,
}

impl Task {
    pub fn conditions(self) -> [Condition; 2] {
        match self {
            Task::Onset => [Condition::Rs, Condition::Bmi],
            Task::Offset => [Condition::Dmi, Condition::Emi],
        }
    }

    pub fn label_of(self, c: Condition) -> Option<u8> {
        self.conditions().iter().position(|&x| x == c).map(|i| i as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Onset => "onset",
            Task::Offset => "offset",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "onset" => Ok(Task::Onset),
            "offset" => Ok(Task::Offset),
            _ => Err(format!("unknown task `{s}` (expected onset|offset)")),
        }
    }
}

/// Samples × features, one row per analysis window.
///
/// Columns are channel-major with ascending frequency:
/// `feature = channel * n_freqs + freq_bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub feature_index: Vec<(String, f64)>,
    pub labels: Vec<u8>,
    pub run_ids: Vec<u32>,
    pub trial_indices: Vec<usize>,
    pub window_indices: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn class_count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Rows for which `keep(row)` holds, in original order.
    pub fn subset(&self, keep: impl Fn(usize) -> bool) -> FeatureMatrix {
        let rows: Vec<usize> = (0..self.n_samples()).filter(|&i| keep(i)).collect();
        let pick = |v: &[u32]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        FeatureMatrix {
            x: self.x.select(Axis(0), &rows),
            feature_index: self.feature_index.clone(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            run_ids: pick(&self.run_ids),
            trial_indices: rows.iter().map(|&i| self.trial_indices[i]).collect(),
            window_indices: rows.iter().map(|&i| self.window_indices[i]).collect(),
        }
    }

    pub fn columns(&self, features: &[usize]) -> Array2<f64> {
        self.x.select(Axis(1), features)
    }

    pub fn concat(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("no feature matrices to concatenate".into()))?;
        if parts.iter().any(|p| p.feature_index != first.feature_index) {
            return Err(Error::Dimension("feature layouts differ".into()));
        }
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.x.view()).collect();
        Ok(FeatureMatrix {
            x: concatenate(Axis(0), &views).map_err(|e| Error::Dimension(e.to_string()))?,
            feature_index: first.feature_index.clone(),
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            run_ids: parts.iter().flat_map(|p| p.run_ids.iter().copied()).collect(),
            trial_indices: parts.iter().flat_map(|p| p.trial_indices.iter().copied()).collect(),
            window_indices: parts.iter().flat_map(|p| p.window_indices.iter().copied()).collect(),
        })
    }

    pub fn run_set(&self) -> Vec<u32> {
        let mut r = self.run_ids.clone();
        r.sort_unstable();
        r.dedup();
        r
    }
}

/// Raw band-power features of the task's two epoch types in one recording.
///
/// Each epoch contributes one sample per analysis window; the sample order
/// follows the epoch order.
pub fn build_feature_matrix(epochs: &[Epoch], rec: &Recording, task: Task, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let [c0, c1] = task.conditions();
    for c in [c0, c1] {
        if !epochs.iter().any(|e| e.condition == c) {
            return Err(Error::MissingCondition(c.name().to_string()));
        }
    }
    let selected: Vec<&Epoch> = epochs.iter().filter(|e| task.label_of(e.condition).is_some()).collect();
    let eeg = rec.select(ChannelKind::Eeg);
    let labels = rec.labels_of(ChannelKind::Eeg);
    let fs = rec.sample_rate() as f64;

    let blocks = par::map_slice(&selected, |e| {
        if e.end_sample() > eeg.ncols() {
            return Err(Error::InvalidArgument(format!(
                "epoch [{}, {}) beyond recording length {}",
                e.start_sample,
                e.end_sample(),
                eeg.ncols()
            )));
        }
        let view = eeg.slice(ndarray::s![.., e.start_sample..e.end_sample()]);
        sliding_spectrogram_of(view, &labels, fs, cfg)
    });

    let mut rows = Vec::new();
    let mut meta = Vec::new();
    let mut feature_index = Vec::new();
    for (e, spec) in selected.iter().zip(blocks) {
        let spec = spec?;
        let (n_ch, n_f, n_w) = spec.values.dim();
        if feature_index.is_empty() {
            for c in &spec.channels {
                for f in &spec.freqs_hz {
                    feature_index.push((c.clone(), *f));
                }
            }
        }
        let label = task.label_of(e.condition).expect("filtered");
        for w in 0..n_w {
            let mut row = Vec::with_capacity(n_ch * n_f);
            for c in 0..n_ch {
                for f in 0..n_f {
                    let v = spec.values[[c, f, w]];
                    row.push(if cfg.log_power { v.max(f64::MIN_POSITIVE).log10() } else { v });
                }
            }
            rows.push(row);
            meta.push((label, e.run_id, e.trial_index, w));
        }
    }
    let n_feat = feature_index.len();
    let x = Array2::from_shape_vec((rows.len(), n_feat), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(FeatureMatrix {
        x,
        feature_index,
        labels: meta.iter().map(|m| m.0).collect(),
        run_ids: meta.iter().map(|m| m.1).collect(),
        trial_indices: meta.iter().map(|m| m.2).collect(),
        window_indices: meta.iter().map(|m| m.3).collect(),
    })
}

/// Feature matrix over every run of a session.
pub fn build_session_features(
    runs: &[Recording],
    timeline: &TrialTimeline,
    task: Task,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let parts = runs
        .iter()
        .map(|r| {
            let set = extract_epochs(r, timeline);
            build_feature_matrix(&set.epochs, r, task, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::concat(&parts)
}
