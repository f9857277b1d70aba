use std::collections::BTreeMap;
use std::io::Write;

use ndarray::s;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::features::{mean_over_windows, sliding_spectrogram_of, FeatureConfig};
use crate::session::{extract_epochs_with, Condition, EpochLayout, EventKind, Recording, TrialTimeline};

/// Pooled sizes up to this use the exact permutation distribution.
const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// First group tends to smaller values.
    Lower,
    Higher,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first group.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub direction: Direction,
}

fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

fn exact_p(ranks: &[f64], n1: usize, observed_dev: f64, mean_rank_sum: f64) -> f64 {
    fn walk(ranks: &[f64], start: usize, left: usize, sum: f64, target: f64, centre: f64, hits: &mut u64, total: &mut u64) {
        if left == 0 {
            *total += 1;
            if (sum - centre).abs() >= target - 1e-9 {
                *hits += 1;
            }
            return;
        }
        for i in start..=ranks.len() - left {
            walk(ranks, i + 1, left - 1, sum + ranks[i], target, centre, hits, total);
        }
    }
    let (mut hits, mut total) = (0, 0);
    walk(ranks, 0, n1, 0.0, observed_dev, mean_rank_sum, &mut hits, &mut total);
    hits as f64 / total as f64
}

/// Two-sided Mann–Whitney U test. Exact for small pooled samples,
/// otherwise normal approximation with tie and continuity correction.
/// A pooled sample of identical values gives `p = 1`.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("Mann-Whitney needs two non-empty groups".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Mann-Whitney input contains non-finite values".into()));
    }
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean_u = (n1 * n2) as f64 / 2.0;
    let direction = if u < mean_u {
        Direction::Lower
    } else if u > mean_u {
        Direction::Higher
    } else {
        Direction::None
    };
    let n = (n1 + n2) as f64;
    if pooled.iter().all(|v| *v == pooled[0]) {
        return Ok(MannWhitney { u, p: 1.0, direction: Direction::None });
    }
    let dev = (u - mean_u).abs();
    let p = if n1 + n2 <= EXACT_MAX_N {
        let mean_r1 = n1 as f64 * (n + 1.0) / 2.0;
        exact_p(&ranks, n1, dev, mean_r1)
    } else {
        let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        let z = ((dev - 0.5).max(0.0)) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(MannWhitney { u, p: p.min(1.0), direction })
}

/// Per-frequency test-vs-control comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub freqs_hz: Vec<f64>,
    pub u: Vec<f64>,
    pub p_raw: Vec<f64>,
    /// Bonferroni-adjusted over all frequencies, capped at 1.
    pub p_adjusted: Vec<f64>,
    pub direction: Vec<Direction>,
    pub n_test: usize,
    pub n_control: usize,
}

impl ContrastResult {
    pub fn significant(&self, alpha: f64) -> Vec<f64> {
        self.freqs_hz
            .iter()
            .zip(&self.p_adjusted)
            .filter(|(_, p)| **p < alpha)
            .map(|(f, _)| *f)
            .collect()
    }

    pub fn write_csv(&self, w: &mut impl Write, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# n_test={} n_control={}", self.n_test, self.n_control)?;
        writeln!(w, "freq_hz,u,p_raw,p_adjusted,direction")?;
        for i in 0..self.freqs_hz.len() {
            let d = match self.direction[i] {
                Direction::Lower => "lower",
                Direction::Higher => "higher",
                Direction::None => "none",
            };
            writeln!(w, "{},{},{},{},{d}", self.freqs_hz[i], self.u[i], self.p_raw[i], self.p_adjusted[i])?;
        }
        Ok(())
    }
}

/// Mann–Whitney per frequency between per-trial spectra of two groups.
pub fn condition_contrast(test: &[Vec<f64>], control: &[Vec<f64>], freqs_hz: &[f64]) -> Result<ContrastResult> {
    if test.is_empty() || control.is_empty() {
        return Err(Error::InvalidArgument("contrast needs trials in both groups".into()));
    }
    let m = freqs_hz.len();
    if let Some(bad) = test.iter().chain(control).find(|v| v.len() != m) {
        return Err(Error::Dimension(format!("trial spectrum of length {} for {m} frequencies", bad.len())));
    }
    let mut res = ContrastResult {
        freqs_hz: freqs_hz.to_vec(),
        u: Vec::with_capacity(m),
        p_raw: Vec::with_capacity(m),
        p_adjusted: Vec::with_capacity(m),
        direction: Vec::with_capacity(m),
        n_test: test.len(),
        n_control: control.len(),
    };
    for f in 0..m {
        let a: Vec<f64> = test.iter().map(|v| v[f]).collect();
        let b: Vec<f64> = control.iter().map(|v| v[f]).collect();
        let mw = mann_whitney(&a, &b)?;
        res.u.push(mw.u);
        res.p_raw.push(mw.p);
        res.p_adjusted.push((mw.p * m as f64).min(1.0));
        res.direction.push(mw.direction);
    }
    Ok(res)
}

/// A span of each trial anchored on a marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub anchor: EventKind,
    pub offset_s: f64,
    pub length_s: f64,
}

impl Period {
    /// The 1 s after the go cue.
    pub fn bmi() -> Self {
        Self { anchor: EventKind::GoCue, offset_s: 0.0, length_s: 1.0 }
    }

    /// Robot return movement, from the return cue to the end of the trial.
    pub fn robot_return(timeline: &TrialTimeline) -> Self {
        Self { anchor: EventKind::ReturnCue, offset_s: 0.0, length_s: timeline.return_s }
    }
}

/// Mean spectrum of `channel` over `period` in each trial of `rec`, as ERD
/// (log10 ratio of the period's mean power to the mean power of the trial's
/// RS epoch) when `erd` is set. Returns the
/// frequency grid and `(trial_index, spectrum)` pairs; trials lacking the
/// anchor or baseline are skipped.
pub fn trial_period_values(
    rec: &Recording,
    timeline: &TrialTimeline,
    layout: &EpochLayout,
    period: Period,
    channel: &str,
    cfg: &FeatureConfig,
    erd: bool,
) -> Result<(Vec<f64>, Vec<(usize, Vec<f64>)>)> {
    let ch = rec
        .channel_index(channel)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown channel `{channel}`")))?;
    let data = rec.data();
    let row = data.slice(s![ch..ch + 1, ..]);
    let labels = [channel.to_string()];
    let fs = rec.sample_rate() as f64;
    let baselines: BTreeMap<usize, (usize, usize)> = extract_epochs_with(rec, timeline, layout)
        .epochs
        .iter()
        .filter(|e| e.condition == Condition::Rs)
        .map(|e| (e.trial_index, (e.start_sample, e.end_sample())))
        .collect();
    let len = (period.length_s * fs).round() as usize;
    let mut freqs = Vec::new();
    let mut out = Vec::new();
    for m in rec.events().iter().filter(|m| m.kind == period.anchor) {
        let start = m.sample_index as isize + rec.samples_for(period.offset_s);
        if start < 0 || start as usize + len > rec.n_samples() {
            log::warn!("trial {}: contrast period outside the recording", m.trial_index);
            continue;
        }
        let start = start as usize;
        let spec = sliding_spectrogram_of(row.slice(s![.., start..start + len]), &labels, fs, cfg)?;
        let values = if erd {
            let Some(&(b0, b1)) = baselines.get(&m.trial_index) else {
                log::warn!("trial {}: no RS baseline", m.trial_index);
                continue;
            };
            let base = mean_over_windows(&sliding_spectrogram_of(row.slice(s![.., b0..b1]), &labels, fs, cfg)?);
            let a = mean_over_windows(&spec);
            for (f, &b) in base.freqs_hz.iter().zip(base.power.row(0)) {
                if !(b > 0.0) {
                    return Err(Error::NonPositiveBaseline { channel: channel.to_string(), freq_hz: *f });
                }
            }
            (&a.power / &base.power).mapv(f64::log10)
        } else {
            mean_over_windows(&spec).power
        };
        if freqs.is_empty() {
            freqs = spec.freqs_hz.clone();
        }
        out.push((m.trial_index, values.row(0).to_vec()));
    }
    Ok((freqs, out))
}
