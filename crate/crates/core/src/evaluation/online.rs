use std::io::Write;

use nalgebra::DMatrix;
use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::report::{time_resolved_accuracy, EvalReport, FoldResult, Pipeline, SkippedFold};
use crate::artifact::EogFilterMatrix;
use crate::classifiers::spd::{congruence, invsqrtm};
use crate::classifiers::{epoch_covariance, frechet_mean, mdm_fit, MdmModel, Recenter, RecenterState, SpdSample};
use crate::config::{MdmConfig, PipelineConfig};
use crate::dsp::{design_butterworth, filter_causal, filter_zero_phase, FilterKind, FilterState, IirFilter};
use crate::error::{Error, Result};
use crate::features::Task;
use crate::par;
use crate::pipeline::session_eog_filter;
use crate::session::{extract_epochs_with, ChannelKind, Condition, Epoch, EventKind, Recording, Session};

/// How the replay band-pass is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Streaming IIR filter, no look-ahead.
    Causal,
    /// Forward-backward filter over the whole run (reference only).
    ZeroPhase,
}

fn replay_filter(cfg: &MdmConfig, sample_rate: u32) -> Result<IirFilter> {
    design_butterworth(
        cfg.bandpass_order,
        FilterKind::Bandpass,
        &[cfg.bandpass_hz.0, cfg.bandpass_hz.1],
        sample_rate as f64,
    )
}

fn window_geometry(cfg: &MdmConfig, sample_rate: u32) -> Result<(usize, usize)> {
    let fs = sample_rate as f64;
    let win = (cfg.window_s * fs).round() as usize;
    let step = (cfg.step_s * fs).round() as usize;
    if win < 2 || step == 0 {
        return Err(Error::InvalidArgument(format!("window {win} / step {step} samples")));
    }
    Ok((win, step))
}

/// EEG rows after EOG regression of an (already filtered) block.
fn clean_block(block: ArrayView2<f64>, rec: &Recording, eog: Option<&EogFilterMatrix>) -> Result<Array2<f64>> {
    let eeg = block.select(Axis(0), &rec.indices_of(ChannelKind::Eeg));
    match eog {
        Some(m) => m.apply(eeg.view(), block.select(Axis(0), &rec.indices_of(ChannelKind::Eog)).view()),
        None => Ok(eeg),
    }
}

/// Band-passed, EOG-cleaned EEG of a whole run.
pub fn filtered_eeg(rec: &Recording, eog: Option<&EogFilterMatrix>, cfg: &MdmConfig, mode: FilterMode) -> Result<Array2<f64>> {
    let filter = replay_filter(cfg, rec.sample_rate())?;
    let data = match mode {
        FilterMode::Causal => {
            let mut state = FilterState::new(&filter, rec.channels().len());
            filter_causal(&filter, &mut state, rec.data())?
        }
        FilterMode::ZeroPhase => filter_zero_phase(&filter, rec.data())?,
    };
    clean_block(data.view(), rec, eog)
}

/// Calls `f(end_sample, covariance)` for every sliding window of the run
/// in arrival order. In causal mode the run is consumed block by block and
/// each window only sees samples before `end_sample`.
fn for_each_window(
    rec: &Recording,
    eog: Option<&EogFilterMatrix>,
    cfg: &MdmConfig,
    mode: FilterMode,
    mut f: impl FnMut(usize, DMatrix<f64>) -> Result<()>,
) -> Result<()> {
    let (win, step) = window_geometry(cfg, rec.sample_rate())?;
    let n = rec.n_samples();
    let n_eeg = rec.indices_of(ChannelKind::Eeg).len();
    match mode {
        FilterMode::ZeroPhase => {
            let eeg = filtered_eeg(rec, eog, cfg, mode)?;
            let mut end = win.div_ceil(step) * step;
            while end <= n {
                f(end, epoch_covariance(eeg.slice(s![.., end - win..end]), cfg.shrinkage)?)?;
                end += step;
            }
        }
        FilterMode::Causal => {
            let filter = replay_filter(cfg, rec.sample_rate())?;
            let mut state = FilterState::new(&filter, rec.channels().len());
            let mut buffer = Array2::zeros((n_eeg, n));
            let data = rec.data();
            let mut filled = 0;
            while filled + step <= n {
                let raw = data.slice(s![.., filled..filled + step]);
                let block = filter_causal(&filter, &mut state, raw)?;
                let cleaned = clean_block(block.view(), rec, eog)?;
                buffer.slice_mut(s![.., filled..filled + step]).assign(&cleaned);
                filled += step;
                if filled >= win {
                    f(filled, epoch_covariance(buffer.slice(s![.., filled - win..filled]), cfg.shrinkage)?)?;
                }
            }
        }
    }
    Ok(())
}

/// Window end samples and raw (not re-centred) covariances of a run.
pub fn stream_covariances(
    rec: &Recording,
    eog: Option<&EogFilterMatrix>,
    cfg: &MdmConfig,
    mode: FilterMode,
) -> Result<(Vec<usize>, Vec<DMatrix<f64>>)> {
    let mut ends = Vec::new();
    let mut covs = Vec::new();
    for_each_window(rec, eog, cfg, mode, |e, c| {
        ends.push(e);
        covs.push(c);
        Ok(())
    })?;
    Ok((ends, covs))
}

/// Riemannian mean of the run's non-overlapping covariance windows.
pub fn run_reference(eeg: ArrayView2<f64>, win: usize, cfg: &MdmConfig) -> Result<DMatrix<f64>> {
    let covs = (0..eeg.ncols() / win)
        .map(|i| epoch_covariance(eeg.slice(s![.., i * win..(i + 1) * win]), cfg.shrinkage))
        .collect::<Result<Vec<_>>>()?;
    match frechet_mean(&covs, cfg.frechet) {
        Ok(m) => Ok(m),
        Err(Error::NoConvergence { iterations, residual, last }) => {
            log::warn!("run reference did not converge after {iterations} iterations (residual {residual:e})");
            Ok(last)
        }
        Err(e) => Err(e),
    }
}

/// Covariances of the task's epochs, re-centred on the run reference when
/// enabled.
pub fn training_covariances(
    rec: &Recording,
    epochs: &[Epoch],
    task: Task,
    eog: Option<&EogFilterMatrix>,
    cfg: &MdmConfig,
    mode: FilterMode,
) -> Result<Vec<SpdSample>> {
    let eeg = filtered_eeg(rec, eog, cfg, mode)?;
    let (win, _) = window_geometry(cfg, rec.sample_rate())?;
    let whitener = if cfg.recenter { Some(invsqrtm(&run_reference(eeg.view(), win, cfg)?)) } else { None };
    epochs
        .iter()
        .filter_map(|e| task.label_of(e.condition).map(|l| (e, l)))
        .map(|(e, label)| {
            let c = epoch_covariance(eeg.slice(s![.., e.start_sample..e.end_sample()]), cfg.shrinkage)?;
            Ok(SpdSample {
                c: match &whitener {
                    Some(w) => congruence(w, &c),
                    None => c,
                },
                label,
                run_id: e.run_id,
                trial_index: e.trial_index,
            })
        })
        .collect()
}

/// Prediction of one replayed window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub run_id: u32,
    /// Exclusive end of the window; the prediction is available here.
    pub end_sample: usize,
    pub predicted: u8,
    /// Task epoch containing the window centre, if any.
    pub condition: Option<Condition>,
    pub truth: Option<u8>,
    pub trial_index: Option<usize>,
    /// Position of the window centre within that epoch, in steps.
    pub window_in_epoch: Option<usize>,
}

/// Stream a held-out run through the decoder.
pub fn replay_run(
    rec: &Recording,
    epochs: &[Epoch],
    task: Task,
    model: &MdmModel,
    eog: Option<&EogFilterMatrix>,
    cfg: &MdmConfig,
    mode: FilterMode,
) -> Result<Vec<WindowPrediction>> {
    let (win, step) = window_geometry(cfg, rec.sample_rate())?;
    let mut spans: Vec<&Epoch> = epochs.iter().filter(|e| task.label_of(e.condition).is_some()).collect();
    spans.sort_by_key(|e| e.start_sample);
    let mut next = 0;
    let mut recenter = RecenterState::new(model.dimension());
    let mut out = Vec::new();
    for_each_window(rec, eog, cfg, mode, |end, c| {
        let c = if cfg.recenter { recenter.transform_and_update(&c)? } else { c };
        // A window belongs to the epoch holding most of its samples.
        let centre = end - win / 2;
        while next < spans.len() && spans[next].end_sample() <= centre {
            next += 1;
        }
        let epoch = spans.get(next).filter(|e| e.start_sample <= centre && centre < e.end_sample());
        out.push(WindowPrediction {
            run_id: rec.run_id(),
            end_sample: end,
            predicted: model.predict(&c),
            condition: epoch.map(|e| e.condition),
            truth: epoch.and_then(|e| task.label_of(e.condition)),
            trial_index: epoch.map(|e| e.trial_index),
            window_in_epoch: epoch.map(|e| (centre - e.start_sample) / step),
        });
        Ok(())
    })?;
    Ok(out)
}

/// Grand average of predicted labels over time around the task's cue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub task: Task,
    pub align_to: EventKind,
    pub times_s: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_trials: Vec<usize>,
}

impl PredictionTrace {
    /// Span of the trace around the cue, in seconds.
    pub fn span(task: Task) -> (EventKind, f64, f64) {
        match task {
            Task::Onset => (EventKind::GoCue, -4.0, 3.0),
            Task::Offset => (EventKind::StopCue, -3.0, 3.0),
        }
    }

    fn build(task: Task, runs: &[&Recording], windows: &[Vec<WindowPrediction>], step_s: f64) -> Self {
        let (cue, lo, hi) = Self::span(task);
        let lo_i = (lo / step_s).round() as i64;
        let hi_i = (hi / step_s).round() as i64;
        let n_bins = (hi_i - lo_i + 1) as usize;
        let mut sum = vec![0.0; n_bins];
        let mut sum_sq = vec![0.0; n_bins];
        let mut count = vec![0usize; n_bins];
        for (rec, wins) in runs.iter().zip(windows) {
            let fs = rec.sample_rate() as f64;
            for m in rec.events().iter().filter(|m| m.kind == cue) {
                for w in wins {
                    let rel = (w.end_sample as f64 - m.sample_index as f64) / fs;
                    let bin = (rel / step_s).round() as i64;
                    if bin < lo_i || bin > hi_i {
                        continue;
                    }
                    let b = (bin - lo_i) as usize;
                    let v = w.predicted as f64;
                    sum[b] += v;
                    sum_sq[b] += v * v;
                    count[b] += 1;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN }).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .zip(&count)
            .map(|((sq, m), &n)| if n > 0 { (sq / n as f64 - m * m).max(0.0).sqrt() } else { f64::NAN })
            .collect();
        PredictionTrace {
            task,
            align_to: cue,
            times_s: (lo_i..=hi_i).map(|i| i as f64 * step_s).collect(),
            mean,
            std,
            n_trials: count,
        }
    }

    pub fn write_csv(&self, w: &mut impl Write, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# task={} align_to={}", self.task.name(), self.align_to.name())?;
        writeln!(w, "time_s,mean_predicted_label,std,n")?;
        for i in 0..self.times_s.len() {
            writeln!(w, "{},{},{},{}", self.times_s[i], self.mean[i], self.std[i], self.n_trials[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub report: EvalReport,
    pub trace: PredictionTrace,
    pub windows: Vec<WindowPrediction>,
}

impl ReplayOutput {
    /// Fraction of windows ending inside `condition` epochs predicted as class 0.
    pub fn class0_fraction(&self, condition: Condition) -> Option<f64> {
        let sel: Vec<_> = self.windows.iter().filter(|w| w.condition == Some(condition)).collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|w| w.predicted == 0).count() as f64 / sel.len() as f64)
    }
}

/// MDM model trained on the task epochs of every run.
pub fn train_mdm(session: &Session, task: Task, cfg: &PipelineConfig, mode: FilterMode) -> Result<MdmModel> {
    let eog = if cfg.mdm.eog_regression { session_eog_filter(session, &cfg.preprocess)? } else { None };
    let samples = par::map_slice(&session.runs, |r| {
        let epochs = extract_epochs_with(r, &session.timeline, &cfg.epochs).epochs;
        training_covariances(r, &epochs, task, eog.as_ref(), &cfg.mdm, mode)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();
    mdm_fit(&samples, cfg.mdm.frechet)
}

/// Leave-one-run-out MDM evaluation where each held-out run is replayed
/// causally window by window.
pub fn pseudo_online_replay(session: &Session, task: Task, cfg: &PipelineConfig, mode: FilterMode) -> Result<ReplayOutput> {
    if session.runs.len() < 2 {
        return Err(Error::InvalidArgument("pseudo-online replay needs at least 2 runs".into()));
    }
    let eog = if cfg.mdm.eog_regression { session_eog_filter(session, &cfg.preprocess)? } else { None };
    let epochs: Vec<Vec<Epoch>> = session
        .runs
        .iter()
        .map(|r| extract_epochs_with(r, &session.timeline, &cfg.epochs).epochs)
        .collect();
    let idx: Vec<usize> = (0..session.runs.len()).collect();
    let samples = par::map_slice(&idx, |&i| {
        training_covariances(&session.runs[i], &epochs[i], task, eog.as_ref(), &cfg.mdm, mode)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let folds = par::map_slice(&idx, |&i| -> Result<Option<(FoldResult, Vec<WindowPrediction>)>> {
        let train: Vec<SpdSample> = samples
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect();
        if samples[i].is_empty() {
            return Ok(None);
        }
        let model = mdm_fit(&train, cfg.mdm.frechet)?;
        let train_hits = train.iter().filter(|s| model.predict(&s.c) == s.label).count();
        let windows = replay_run(&session.runs[i], &epochs[i], task, &model, eog.as_ref(), &cfg.mdm, mode)?;
        let labeled: Vec<_> = windows.iter().filter(|w| w.truth.is_some()).collect();
        let hits = labeled.iter().filter(|w| Some(w.predicted) == w.truth).count();
        Ok(Some((
            FoldResult {
                run_id: session.runs[i].run_id(),
                train_accuracy: train_hits as f64 / train.len() as f64,
                test_accuracy: hits as f64 / labeled.len().max(1) as f64,
                n_train: train.len(),
                n_test: labeled.len(),
                selected_features: vec![],
            },
            windows,
        )))
    });

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let mut runs = Vec::new();
    let mut all_windows = Vec::new();
    for (i, f) in folds.into_iter().enumerate() {
        match f? {
            Some((fold, w)) => {
                results.push(fold);
                runs.push(&session.runs[i]);
                all_windows.push(w);
            }
            None => skipped.push(SkippedFold { run_id: session.runs[i].run_id(), reason: "no valid trials".into() }),
        }
    }
    if results.is_empty() {
        return Err(Error::InvalidArgument("every fold was skipped".into()));
    }
    let per_fold: Vec<Vec<(usize, bool)>> = all_windows
        .iter()
        .map(|ws| {
            ws.iter()
                .filter_map(|w| Some((w.window_in_epoch?, Some(w.predicted) == w.truth)))
                .collect()
        })
        .collect();
    let curve = time_resolved_accuracy(&per_fold).ok();
    let trace = PredictionTrace::build(task, &runs, &all_windows, cfg.mdm.step_s);
    let report = EvalReport::new(task, Pipeline::MdmPseudoOnline, results, skipped, curve, cfg.evaluation.alpha)?;
    Ok(ReplayOutput { report, trace, windows: all_windows.into_iter().flatten().collect() })
}
