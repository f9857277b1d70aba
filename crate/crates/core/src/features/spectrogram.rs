use std::collections::BTreeMap;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureConfig;
use crate::dsp::{Psd, WelchEstimator};
use crate::error::{Error, Result};
use crate::par;
use crate::session::{extract_epochs_with, ChannelKind, Condition, EpochLayout, EventKind, Recording, TrialTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrogramKind {
    /// Welch power, units²/Hz.
    Power,
    /// `log10(A(f, t) / B(f))` against a baseline spectrum.
    ErdLog10,
}

/// Channel × frequency × window values on a regular window grid.
///
/// `times_s[w]` is the centre of window `w` relative to the first sample
/// of the analysed span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub channels: Vec<String>,
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    pub values: Array3<f64>,
    pub kind: SpectrogramKind,
}

impl Spectrogram {
    pub fn n_windows(&self) -> usize {
        self.times_s.len()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }
}

/// Windowed Welch power of every row of `signal`, restricted to `band_hz`.
pub fn sliding_spectrogram_of(
    signal: ArrayView2<f64>,
    channels: &[String],
    sample_rate_hz: f64,
    cfg: &FeatureConfig,
) -> Result<Spectrogram> {
    let est = WelchEstimator::new(cfg.window_s, sample_rate_hz, cfg.resolution_hz)?;
    let bins = est.band_bins(cfg.band_hz.0, cfg.band_hz.1);
    if bins.is_empty() {
        return Err(Error::InvalidArgument(format!("band {:?} Hz contains no bins", cfg.band_hz)));
    }
    let seg = est.segment_len();
    let step = (cfg.step_s * sample_rate_hz).round() as usize;
    if step == 0 {
        return Err(Error::InvalidArgument("window step rounds to zero samples".into()));
    }
    let n = signal.ncols();
    if n < seg {
        return Err(Error::SignalTooShort { needed: seg - 1, got: n });
    }
    let n_win = (n - seg) / step + 1;
    let freqs: Vec<f64> = bins.iter().map(|&k| est.freqs()[k]).collect();

    let per_channel = par::map_range(signal.nrows(), |c| {
        let row = signal.row(c);
        let x: Vec<f64> = row.iter().copied().collect();
        let mut buf = Vec::new();
        let mut out = Array2::zeros((bins.len(), n_win));
        let mut tmp = vec![0.0; bins.len()];
        for w in 0..n_win {
            est.segment_into(&x[w * step..w * step + seg], &bins, &mut buf, &mut tmp);
            out.column_mut(w).assign(&ndarray::ArrayView1::from(&tmp));
        }
        out
    });
    let mut values = Array3::zeros((signal.nrows(), bins.len(), n_win));
    for (mut dst, src) in values.outer_iter_mut().zip(per_channel) {
        dst.assign(&src);
    }
    let times_s = (0..n_win)
        .map(|w| (w * step) as f64 / sample_rate_hz + cfg.window_s / 2.0)
        .collect();
    Ok(Spectrogram {
        channels: channels.to_vec(),
        freqs_hz: freqs,
        times_s,
        values,
        kind: SpectrogramKind::Power,
    })
}

/// Spectrogram of the EEG channels of a whole recording.
pub fn sliding_spectrogram(rec: &Recording, band_hz: (f64, f64), resolution_hz: f64) -> Result<Spectrogram> {
    let cfg = FeatureConfig {
        band_hz,
        resolution_hz,
        ..FeatureConfig::default()
    };
    sliding_spectrogram_of(
        rec.select(ChannelKind::Eeg).view(),
        &rec.labels_of(ChannelKind::Eeg),
        rec.sample_rate() as f64,
        &cfg,
    )
}

/// Mean power over all windows, as a per-channel spectrum.
pub fn mean_over_windows(spec: &Spectrogram) -> Psd {
    Psd {
        freqs_hz: spec.freqs_hz.clone(),
        power: spec.values.mean_axis(Axis(2)).expect("at least one window"),
    }
}

/// Spectrogram of `channel` averaged over every trial, with times relative
/// to the go cue and each trial spanning TrialStart to TrialEnd.
///
/// With `erd` the averaged power is expressed against the averaged power of
/// the trials' RS epochs.
pub fn trial_average_spectrogram(
    recs: &[Recording],
    timeline: &TrialTimeline,
    layout: &EpochLayout,
    channel: &str,
    cfg: &FeatureConfig,
    erd: bool,
) -> Result<Spectrogram> {
    let go = timeline.offset_of(EventKind::GoCue);
    let mut power: Option<Spectrogram> = None;
    let mut baseline: Option<Array2<f64>> = None;
    let mut n_trials = 0usize;
    for rec in recs {
        let ch = rec
            .channel_index(channel)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel `{channel}`")))?;
        let fs = rec.sample_rate() as f64;
        let len = (timeline.trial_length_s() * fs).round() as usize;
        let data = rec.data();
        let row = data.slice(s![ch..ch + 1, ..]);
        let labels = [channel.to_string()];
        let rs: BTreeMap<usize, (usize, usize)> = extract_epochs_with(rec, timeline, layout)
            .of(Condition::Rs)
            .map(|e| (e.trial_index, (e.start_sample, e.end_sample())))
            .collect();
        for m in rec.events().iter().filter(|m| m.kind == EventKind::GoCue) {
            let start = m.sample_index as isize - rec.samples_for(go);
            let Some(&(b0, b1)) = rs.get(&m.trial_index) else {
                log::warn!("run {} trial {}: no RS epoch", rec.run_id(), m.trial_index);
                continue;
            };
            if start < 0 || start as usize + len > rec.n_samples() {
                log::warn!("run {} trial {}: trial span outside the recording", rec.run_id(), m.trial_index);
                continue;
            }
            let start = start as usize;
            let spec = sliding_spectrogram_of(row.slice(s![.., start..start + len]), &labels, fs, cfg)?;
            let base = mean_over_windows(&sliding_spectrogram_of(row.slice(s![.., b0..b1]), &labels, fs, cfg)?).power;
            match (&mut power, &mut baseline) {
                (Some(p), Some(b)) => {
                    p.values += &spec.values;
                    *b += &base;
                }
                _ => {
                    power = Some(spec);
                    baseline = Some(base);
                }
            }
            n_trials += 1;
        }
    }
    let (Some(mut power), Some(baseline)) = (power, baseline) else {
        return Err(Error::InvalidArgument("no complete trials to average".into()));
    };
    power.values /= n_trials as f64;
    power.times_s.iter_mut().for_each(|t| *t -= go);
    if !erd {
        return Ok(power);
    }
    let baseline = Psd { freqs_hz: power.freqs_hz.clone(), power: baseline / n_trials as f64 };
    erd_transform(&power, &baseline)
}

/// ERD/ERS as `log10(A(f, t) / B(f))` for every channel and window.
pub fn erd_transform(spec: &Spectrogram, baseline: &Psd) -> Result<Spectrogram> {
    let (n_ch, n_f, _) = spec.values.dim();
    if baseline.power.dim() != (n_ch, n_f) || baseline.freqs_hz != spec.freqs_hz {
        return Err(Error::Dimension(format!(
            "baseline {:?} does not match spectrogram {n_ch} channels x {n_f} bins",
            baseline.power.dim()
        )));
    }
    if spec.kind != SpectrogramKind::Power {
        return Err(Error::InvalidArgument("ERD needs a power spectrogram".into()));
    }
    for ((c, f), &b) in baseline.power.indexed_iter() {
        if !(b > 0.0) {
            return Err(Error::NonPositiveBaseline {
                channel: spec.channels[c].clone(),
                freq_hz: spec.freqs_hz[f],
            });
        }
    }
    let mut values = spec.values.clone();
    for ((c, f, _), v) in values.indexed_iter_mut() {
        *v = (*v / baseline.power[[c, f]]).log10();
    }
    Ok(Spectrogram {
        values,
        kind: SpectrogramKind::ErdLog10,
        ..spec.clone()
    })
}
