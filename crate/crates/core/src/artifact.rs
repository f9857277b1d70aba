//! Least-squares EOG regression.
//!
//! Coefficients are fitted on a calibration block as
//! `b = (UᵀU)⁻¹ UᵀY` with `U` the mean-removed EOG channels and `Y` the
//! mean-removed EEG channels, and applied as `Y - U b`. Application is
//! memoryless, so streaming one sample at a time gives the same result as
//! processing a whole run.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dsp::{filter_zero_phase, IirFilter};
use crate::error::{Error, Result};
use crate::session::{ChannelKind, Recording};

/// Smallest accepted ratio between the extreme eigenvalues of `UᵀU`.
const MIN_RECIPROCAL_CONDITION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInfo {
    pub n_samples: usize,
    pub sample_rate_hz: u32,
    /// Band edges of the zero-phase prefilter, if one was applied.
    pub bandpass_hz: Option<Vec<f64>>,
}

/// EOG-channel × EEG-channel regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EogFilterFile", try_from = "EogFilterFile")]
pub struct EogFilterMatrix {
    pub b: Array2<f64>,
    pub eog_labels: Vec<String>,
    pub eeg_labels: Vec<String>,
    pub fitted_on: Option<CalibrationInfo>,
}

#[derive(Serialize, Deserialize)]
struct EogFilterFile {
    eog_labels: Vec<String>,
    eeg_labels: Vec<String>,
    /// Row-major, one row per EOG channel.
    coefficients: Vec<f64>,
    fitted_on: Option<CalibrationInfo>,
}

impl From<EogFilterMatrix> for EogFilterFile {
    fn from(m: EogFilterMatrix) -> Self {
        Self {
            coefficients: m.b.iter().copied().collect(),
            eog_labels: m.eog_labels,
            eeg_labels: m.eeg_labels,
            fitted_on: m.fitted_on,
        }
    }
}

impl TryFrom<EogFilterFile> for EogFilterMatrix {
    type Error = String;

    fn try_from(f: EogFilterFile) -> std::result::Result<Self, String> {
        let shape = (f.eog_labels.len(), f.eeg_labels.len());
        let b = Array2::from_shape_vec(shape, f.coefficients).map_err(|e| e.to_string())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err("non-finite coefficient".into());
        }
        Ok(Self {
            b,
            eog_labels: f.eog_labels,
            eeg_labels: f.eeg_labels,
            fitted_on: f.fitted_on,
        })
    }
}

impl EogFilterMatrix {
    /// Identity filter (all coefficients zero).
    pub fn zeros(eog_labels: Vec<String>, eeg_labels: Vec<String>) -> Self {
        Self {
            b: Array2::zeros((eog_labels.len(), eeg_labels.len())),
            eog_labels,
            eeg_labels,
            fitted_on: None,
        }
    }

    /// Least-squares fit of `eeg` (channels × samples) on `eog`.
    pub fn fit(eeg: ArrayView2<f64>, eog: ArrayView2<f64>) -> Result<Array2<f64>> {
        if eeg.ncols() != eog.ncols() {
            return Err(Error::Dimension(format!(
                "EEG has {} samples, EOG has {}",
                eeg.ncols(),
                eog.ncols()
            )));
        }
        if eog.nrows() == 0 || eog.ncols() <= eog.nrows() {
            return Err(Error::InvalidArgument("not enough EOG calibration data".into()));
        }
        let centre = |m: ArrayView2<f64>| {
            let mean = m.mean_axis(Axis(1)).expect("non-empty");
            &m - &mean.insert_axis(Axis(1))
        };
        let u = centre(eog);
        let y = centre(eeg);
        let k = u.nrows();
        let uu = u.dot(&u.t());
        let uy = u.dot(&y.t());

        let gram = DMatrix::from_fn(k, k, |i, j| uu[[i, j]]);
        let eig = SymmetricEigen::new(gram.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min <= MIN_RECIPROCAL_CONDITION * max {
            return Err(Error::RankDeficient {
                condition: if min > 0.0 { max / min } else { f64::INFINITY },
            });
        }
        let chol = gram.cholesky().ok_or(Error::RankDeficient { condition: max / min })?;
        let rhs = DMatrix::from_fn(k, uy.ncols(), |i, j| uy[[i, j]]);
        let b = chol.solve(&rhs);
        Ok(Array2::from_shape_fn((k, uy.ncols()), |(i, j)| b[(i, j)]))
    }

    /// Subtract the EOG contribution: `eeg - bᵀ eog`, sample by sample.
    pub fn apply(&self, eeg: ArrayView2<f64>, eog: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (k, m) = self.b.dim();
        if eog.nrows() != k || eeg.nrows() != m || eeg.ncols() != eog.ncols() {
            return Err(Error::Dimension(format!(
                "filter is {k}x{m}, got EOG {:?} and EEG {:?}",
                eog.dim(),
                eeg.dim()
            )));
        }
        let mut out = eeg.to_owned();
        for j in 0..m {
            let mut row = out.row_mut(j);
            for t in 0..eeg.ncols() {
                let mut acc = 0.0;
                for i in 0..k {
                    acc += self.b[[i, j]] * eog[[i, t]];
                }
                row[t] -= acc;
            }
        }
        Ok(out)
    }

    /// Apply to the EEG rows of a recording, leaving EOG rows as they are.
    pub fn apply_to(&self, rec: &Recording) -> Result<Recording> {
        if rec.labels_of(ChannelKind::Eeg) != self.eeg_labels || rec.labels_of(ChannelKind::Eog) != self.eog_labels {
            return Err(Error::Dimension("recording channels do not match EOG filter labels".into()));
        }
        let cleaned = self.apply(
            rec.select(ChannelKind::Eeg).view(),
            rec.select(ChannelKind::Eog).view(),
        )?;
        let mut data = rec.data().to_owned();
        for (row, i) in cleaned.rows().into_iter().zip(rec.indices_of(ChannelKind::Eeg)) {
            data.row_mut(i).assign(&row);
        }
        rec.with_data(data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::session::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Fit the EOG filter on a calibration recording, optionally after a
/// zero-phase band-pass.
pub fn fit_eog_filter(calibration: &Recording, bandpass: Option<&IirFilter>) -> Result<EogFilterMatrix> {
    let eog_idx = calibration.indices_of(ChannelKind::Eog);
    let eeg_idx = calibration.indices_of(ChannelKind::Eeg);
    if eog_idx.is_empty() || eeg_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration needs both EEG and EOG channels".into(),
        ));
    }
    let data = match bandpass {
        Some(f) => filter_zero_phase(f, calibration.data())?,
        None => calibration.data().to_owned(),
    };
    let b = EogFilterMatrix::fit(
        data.select(Axis(0), &eeg_idx).view(),
        data.select(Axis(0), &eog_idx).view(),
    )?;
    Ok(EogFilterMatrix {
        b,
        eog_labels: calibration.labels_of(ChannelKind::Eog),
        eeg_labels: calibration.labels_of(ChannelKind::Eeg),
        fitted_on: Some(CalibrationInfo {
            n_samples: calibration.n_samples(),
            sample_rate_hz: calibration.sample_rate(),
            bandpass_hz: bandpass.map(|f| f.design.cutoffs_hz.clone()),
        }),
    })
}
