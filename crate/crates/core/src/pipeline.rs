//! Offline preprocessing chain: zero-phase band-pass, EOG regression and
//! common average reference.

use crate::artifact::{fit_eog_filter, EogFilterMatrix};
use crate::config::{PipelineConfig, PreprocessConfig};
use crate::dsp::{design_butterworth, filter_zero_phase, reference_eeg, FilterKind, IirFilter};
use crate::error::Result;
use crate::features::{build_feature_matrix, FeatureMatrix, Task};
use crate::par;
use crate::session::{extract_epochs_with, Recording, Session};

pub fn offline_bandpass(cfg: &PreprocessConfig, sample_rate: u32) -> Result<IirFilter> {
    design_butterworth(
        cfg.bandpass_order,
        FilterKind::Bandpass,
        &[cfg.bandpass_hz.0, cfg.bandpass_hz.1],
        sample_rate as f64,
    )
}

/// EOG coefficients from the session's calibration block, if it has one
/// and regression is enabled.
pub fn session_eog_filter(session: &Session, cfg: &PreprocessConfig) -> Result<Option<EogFilterMatrix>> {
    match (&session.calibration, cfg.eog_regression) {
        (Some(cal), true) => {
            let bp = offline_bandpass(cfg, cal.sample_rate())?;
            Ok(Some(fit_eog_filter(cal, Some(&bp))?))
        }
        (None, true) => {
            log::warn!("session has no calibration block; skipping EOG regression");
            Ok(None)
        }
        _ => Ok(None),
    }
}

/// Band-pass, EOG-clean and re-reference one run.
pub fn preprocess_run(
    rec: &Recording,
    filter: &IirFilter,
    eog: Option<&EogFilterMatrix>,
    cfg: &PreprocessConfig,
) -> Result<Recording> {
    let mut out = rec.with_data(filter_zero_phase(filter, rec.data())?)?;
    if let Some(m) = eog {
        out = m.apply_to(&out)?;
    }
    if cfg.common_average {
        out = reference_eeg(&out)?;
    }
    Ok(out)
}

/// Preprocessed runs and the EOG filter used on them.
pub fn preprocess_session(
    session: &Session,
    cfg: &PipelineConfig,
) -> Result<(Vec<Recording>, Option<EogFilterMatrix>)> {
    let filter = offline_bandpass(&cfg.preprocess, session.sample_rate())?;
    let eog = session_eog_filter(session, &cfg.preprocess)?;
    let runs = par::map_slice(&session.runs, |r| preprocess_run(r, &filter, eog.as_ref(), &cfg.preprocess))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok((runs, eog))
}

/// Offline feature matrix of a session for one task.
pub fn offline_features(session: &Session, task: Task, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    let (runs, _) = preprocess_session(session, cfg)?;
    runs_features(&runs, session, task, cfg)
}

/// Feature matrix of already preprocessed runs.
pub fn runs_features(runs: &[Recording], session: &Session, task: Task, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    let parts = runs
        .iter()
        .map(|r| {
            let set = extract_epochs_with(r, &session.timeline, &cfg.epochs);
            build_feature_matrix(&set.epochs, r, task, &cfg.features)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::concat(&parts)
}
