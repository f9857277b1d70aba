//! Synthetic sessions with known ERD, robot-motion noise and EOG
//! contamination.
//!
//! Each EEG channel is the sum of pink background noise, a 10 Hz (mu) and a
//! 20 Hz (beta) rhythm weighted by a spatial profile centred on C3, band-
//! limited robot noise shaped by the robot velocity, and the EOG sources
//! mixed in through `eog_mixing`. ERD scales the power of the rhythms by
//! `1 - depth` inside the modulation interval of each trial.

use std::path::Path;

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{design_butterworth, filter_causal, FilterKind, FilterState};
use crate::error::{Error, Result};
use crate::par;
use crate::session::{
    default_channels, EventKind, EventMarker, Recording, Session, TrialTimeline, EEG_MONTAGE, EOG_MONTAGE,
};

/// Rough scalp positions (x: left to right, y: back to front) of the montage.
const POSITIONS: [(f64, f64); 22] = [
    (-0.8, 0.6),
    (-0.4, 0.6),
    (0.0, 0.6),
    (0.4, 0.6),
    (0.8, 0.6),
    (-0.6, 0.3),
    (-0.2, 0.3),
    (0.2, 0.3),
    (0.6, 0.3),
    (-0.4, 0.0),
    (0.0, 0.0),
    (0.4, 0.0),
    (-0.6, -0.3),
    (-0.2, -0.3),
    (0.2, -0.3),
    (0.6, -0.3),
    (-0.8, -0.6),
    (-0.4, -0.6),
    (0.0, -0.6),
    (0.4, -0.6),
    (0.8, -0.6),
    (0.0, -0.8),
];

const ERD_RAMP_S: f64 = 0.1;
const MU_HZ: f64 = 10.0;
const MU_LINEWIDTH_HZ: f64 = 0.5;
const BETA_HZ: f64 = 20.0;
const BETA_LINEWIDTH_HZ: f64 = 1.0;
const AMP_SD: f64 = 0.2;
const AMP_TAU_S: f64 = 0.3;
const SETTLE_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_runs: usize,
    pub n_trials: usize,
    pub sample_rate: u32,
    pub timeline: TrialTimeline,
    /// Fractional power drop of the mu rhythm during ERD.
    pub erd_depth_mu: f64,
    pub erd_depth_beta: f64,
    /// Standard deviation of the robot noise at peak velocity.
    pub robot_noise_gain: f64,
    /// Delay between a cue and the change of the rhythms.
    pub response_latency_s: f64,
    /// EOG × EEG mixing weights; `None` uses a frontal default.
    pub eog_mixing: Option<Vec<Vec<f64>>>,
    /// Per-EEG-channel rhythm gains; `None` uses a profile centred on C3.
    pub spatial_profile: Option<Vec<f64>>,
    pub background_std: f64,
    pub mu_std: f64,
    pub beta_std: f64,
    pub calibration_s: f64,
    /// Quiet time before the first and after the last trial.
    pub lead_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_runs: 6,
            n_trials: 20,
            sample_rate: 512,
            timeline: TrialTimeline::default(),
            erd_depth_mu: 0.5,
            erd_depth_beta: 0.5,
            robot_noise_gain: 2.0,
            response_latency_s: 0.1,
            eog_mixing: None,
            spatial_profile: None,
            background_std: 1.0,
            mu_std: 2.0,
            beta_std: 1.0,
            calibration_s: 90.0,
            lead_s: 2.0,
        }
    }
}

/// Rhythm gains peaking at C3 and falling off with scalp distance.
pub fn default_spatial_profile() -> Vec<f64> {
    let (cx, cy) = POSITIONS[9];
    POSITIONS
        .iter()
        .map(|(x, y)| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * 0.25f64.powi(2))).exp())
        .collect()
}

/// Horizontal EOG reaches the lateral frontal sites, vertical EOG the
/// frontal row.
pub fn default_eog_mixing() -> Vec<Vec<f64>> {
    let lateral = |side: f64| {
        POSITIONS
            .iter()
            .map(|(x, y)| 0.2 * (-((x - side).powi(2) + (y - 0.6).powi(2)) / (2.0 * 0.4f64.powi(2))).exp())
            .collect()
    };
    let vertical = POSITIONS
        .iter()
        .map(|(_, y)| 0.3 * (-(y - 1.0).powi(2) / (2.0 * 0.4f64.powi(2))).exp())
        .collect();
    vec![lateral(-1.0), lateral(1.0), vertical]
}

impl SynthConfig {
    pub fn hash(&self) -> String {
        crate::config::json_sha256(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, d) in [("erd_depth_mu", self.erd_depth_mu), ("erd_depth_beta", self.erd_depth_beta)] {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("{name} = {d} outside [0, 1]"));
            }
        }
        if self.robot_noise_gain < 0.0 || self.response_latency_s < 0.0 {
            return bad("robot_noise_gain and response_latency_s must be nonnegative".into());
        }
        if self.n_runs == 0 || self.n_trials == 0 || self.sample_rate == 0 {
            return bad("n_runs, n_trials and sample_rate must be positive".into());
        }
        if self.background_std < 0.0 || self.mu_std < 0.0 || self.beta_std < 0.0 {
            return bad("signal amplitudes must be nonnegative".into());
        }
        if self.calibration_s <= 0.0 || self.lead_s < 0.0 {
            return bad("calibration_s must be positive and lead_s nonnegative".into());
        }
        self.timeline.validate()?;
        if let Some(m) = &self.eog_mixing {
            if m.len() != EOG_MONTAGE.len() || m.iter().any(|r| r.len() != EEG_MONTAGE.len()) {
                return Err(Error::Dimension(format!(
                    "eog_mixing must be {}x{}",
                    EOG_MONTAGE.len(),
                    EEG_MONTAGE.len()
                )));
            }
        }
        if let Some(p) = &self.spatial_profile {
            if p.len() != EEG_MONTAGE.len() {
                return Err(Error::Dimension(format!("spatial_profile must have {} entries", EEG_MONTAGE.len())));
            }
        }
        Ok(())
    }

    fn mixing(&self) -> Vec<Vec<f64>> {
        self.eog_mixing.clone().unwrap_or_else(default_eog_mixing)
    }

    fn profile(&self) -> Vec<f64> {
        self.spatial_profile.clone().unwrap_or_else(default_spatial_profile)
    }

    pub fn run_length_samples(&self) -> usize {
        let fs = self.sample_rate as f64;
        (2.0 * self.lead_s * fs).round() as usize + self.trial_start(self.n_trials)
    }

    /// First sample of trial `k` (may be called with `k = n_trials`).
    fn trial_start(&self, k: usize) -> usize {
        let fs = self.sample_rate as f64;
        ((self.lead_s + k as f64 * self.timeline.trial_length_s()) * fs).round() as usize
    }
}

/// Modulation intervals of one trial, in seconds from TrialStart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub trial_index: usize,
    /// Passive trial: no imagery, ERD only once the robot moves.
    pub control: bool,
    pub mu_erd_s: (f64, f64),
    pub beta_erd_s: (f64, f64),
}

/// ERD intervals of a trial relative to TrialStart.
///
/// Active trials desynchronize both rhythms from the go cue (plus latency);
/// mu stays suppressed until the robot stops, beta recovers after the stop
/// cue. Control trials desynchronize only while the robot moves.
pub fn erd_intervals(timeline: &TrialTimeline, latency_s: f64, control: bool) -> ((f64, f64), (f64, f64)) {
    let at = |k: EventKind| timeline.offset_of(k);
    if control {
        let span = (at(EventKind::RobotMoveStart) + latency_s, at(EventKind::RobotStop));
        (span, span)
    } else {
        let start = at(EventKind::GoCue) + latency_s;
        ((start, at(EventKind::RobotStop)), (start, at(EventKind::StopCue) + latency_s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTruth {
    pub run_id: u32,
    pub trials: Vec<TrialTruth>,
}

/// Everything needed to check a pipeline against the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub runs: Vec<RunTruth>,
    /// Free-form provenance, as in the session header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl GroundTruth {
    pub const FILE_NAME: &'static str = "ground_truth.json";

    pub fn save(&self, dir: &Path) -> Result<()> {
        crate::session::write_json(&dir.join(Self::FILE_NAME), self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
    }

    pub fn is_control(&self, run_id: u32, trial_index: usize) -> Option<bool> {
        self.runs
            .iter()
            .find(|r| r.run_id == run_id)?
            .trials
            .iter()
            .find(|t| t.trial_index == trial_index)
            .map(|t| t.control)
    }
}

pub struct SynthOutput {
    pub session: Session,
    pub ground_truth: GroundTruth,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        for v in &mut x {
            *v = (*v - mean) / sd;
        }
    }
    x
}

/// Unit-variance noise with a 1/f power spectrum.
fn pink(rng: &mut ChaCha8Rng, n: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = white(rng, n).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for k in 1..n {
        let f = k.min(n - k) as f64;
        buf[k] /= f.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    normalize(buf.into_iter().map(|c| c.re).collect())
}

/// Unit-variance Gaussian noise band-limited by a Butterworth band-pass.
fn band_noise(rng: &mut ChaCha8Rng, n: usize, band: (f64, f64), order: usize, fs: f64) -> Result<Vec<f64>> {
    let settle = (SETTLE_S * fs) as usize;
    let f = design_butterworth(order, FilterKind::Bandpass, &[band.0, band.1], fs)?;
    let x = Array2::from_shape_vec((1, n + settle), white(rng, n + settle)).expect("shape");
    let mut st = FilterState::new(&f, 1);
    let y = filter_causal(&f, &mut st, x.view())?;
    Ok(normalize(y.slice(s![0, settle..]).to_vec()))
}

/// Unit-variance oscillation at `freq_hz` whose phase diffuses (giving a
/// Lorentzian line of full width `linewidth_hz`) and whose log-amplitude
/// follows an Ornstein-Uhlenbeck process with time constant `tau_s`.
fn oscillator(rng: &mut ChaCha8Rng, n: usize, fs: f64, freq_hz: f64, linewidth_hz: f64, amp_sd: f64, tau_s: f64) -> Vec<f64> {
    let dt = 1.0 / fs;
    let phase_sd = (2.0 * std::f64::consts::PI * linewidth_hz * dt).sqrt();
    let decay = (-dt / tau_s).exp();
    let drive = amp_sd * (1.0 - decay * decay).sqrt();
    let mut phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut log_amp = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        phase += std::f64::consts::TAU * freq_hz * dt + phase_sd * a;
        log_amp = decay * log_amp + drive * b;
        out.push(log_amp.exp() * phase.cos());
    }
    normalize(out)
}

/// 0 outside `[a, b]`, 1 inside, with raised-cosine ramps starting at `a`
/// and `b`.
fn erd_indicator(t: f64, (a, b): (f64, f64)) -> f64 {
    let ramp = |x: f64| 0.5 - 0.5 * (std::f64::consts::PI * x.clamp(0.0, 1.0)).cos();
    if t < a || b <= a {
        0.0
    } else if t < b {
        ramp((t - a) / ERD_RAMP_S)
    } else {
        ramp((t - a) / ERD_RAMP_S) * (1.0 - ramp((t - b) / ERD_RAMP_S))
    }
}

/// Bell-shaped velocity profile over `[a, b]`.
fn velocity(t: f64, (a, b): (f64, f64)) -> f64 {
    if t <= a || t >= b {
        0.0
    } else {
        (std::f64::consts::PI * (t - a) / (b - a)).sin()
    }
}

#[derive(Clone, Copy)]
enum EyeActivity {
    Task,
    Calibration,
}

/// EOGL, EOGR and EOGV source signals: blinks, saccades and slow drift.
fn eog_sources(rng: &mut ChaCha8Rng, n: usize, fs: f64, activity: EyeActivity, planner: &mut FftPlanner<f64>) -> Array2<f64> {
    let (blink_rate, saccade_rate, amp) = match activity {
        EyeActivity::Task => (0.2, 0.3, 1.0),
        EyeActivity::Calibration => (0.5, 1.0, 2.5),
    };
    let mut horiz = vec![0.0; n];
    let mut vert = vec![0.0; n];
    // Saccades: piecewise-constant gaze with 30 ms transitions.
    let mut gaze_h = 0.0;
    let mut gaze_v = 0.0;
    let trans = (0.03 * fs) as usize;
    let mut i = 0;
    while i < n {
        let wait: f64 = rng.random_range(0.2..2.0 / saccade_rate);
        let next = (i + (wait * fs) as usize).min(n);
        let (new_h, new_v) = (
            rng.random_range(-40.0..40.0) * amp,
            match activity {
                EyeActivity::Task => 0.0,
                EyeActivity::Calibration => rng.random_range(-30.0..30.0) * amp,
            },
        );
        for (k, j) in (i..next).enumerate() {
            let w = (k as f64 / trans as f64).min(1.0);
            horiz[j] = gaze_h + (new_h - gaze_h) * w;
            vert[j] = gaze_v + (new_v - gaze_v) * w;
        }
        gaze_h = new_h;
        gaze_v = new_v;
        i = next;
    }
    // Blinks: 0.2 s half-sine bumps on the vertical channel.
    let width = (0.2 * fs) as usize;
    let mut t = 0usize;
    loop {
        let gap: f64 = rng.random_range(0.5..2.0 / blink_rate);
        t += (gap * fs) as usize;
        if t + width >= n {
            break;
        }
        let a: f64 = rng.random_range(80.0..150.0) * amp;
        for k in 0..width {
            vert[t + k] += a * (std::f64::consts::PI * k as f64 / width as f64).sin();
        }
    }
    let drift = pink(rng, n, planner);
    let mut out = Array2::zeros((3, n));
    for j in 0..n {
        out[[0, j]] = horiz[j] + 5.0 * drift[j];
        out[[1, j]] = -horiz[j] + 5.0 * drift[j];
        out[[2, j]] = vert[j];
    }
    out
}

/// Pink EEG background plus mixed EOG, shared by runs and calibration.
fn base_signal(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    n: usize,
    activity: EyeActivity,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let fs = cfg.sample_rate as f64;
    let mut planner = FftPlanner::new();
    let n_eeg = EEG_MONTAGE.len();
    let mut eeg = Array2::zeros((n_eeg, n));
    for c in 0..n_eeg {
        let bg = pink(rng, n, &mut planner);
        eeg.row_mut(c).assign(&(Array1::from(bg) * cfg.background_std));
    }
    let eog = eog_sources(rng, n, fs, activity, &mut planner);
    let mixing = cfg.mixing();
    for (e, weights) in mixing.iter().enumerate() {
        for (c, w) in weights.iter().enumerate() {
            eeg.row_mut(c).scaled_add(*w, &eog.row(e));
        }
    }
    let mut recorded = eog;
    for v in recorded.iter_mut() {
        let noise: f64 = StandardNormal.sample(rng);
        *v += 0.5 * noise;
    }
    Ok((eeg, recorded))
}

fn assemble(cfg: &SynthConfig, eeg: Array2<f64>, eog: Array2<f64>, events: Vec<EventMarker>, run_id: u32) -> Result<Recording> {
    let data = ndarray::concatenate![ndarray::Axis(0), eeg, eog];
    Recording::new(cfg.sample_rate, default_channels(), data, events, run_id)
}

fn generate_calibration(cfg: &SynthConfig) -> Result<Recording> {
    let mut rng = rng_for(cfg.seed, 0);
    let fs = cfg.sample_rate as f64;
    let n = (cfg.calibration_s * fs).round() as usize;
    let (mut eeg, eog) = base_signal(cfg, &mut rng, n, EyeActivity::Calibration)?;
    let profile = cfg.profile();
    let mu = oscillator(&mut rng, n, fs, MU_HZ, MU_LINEWIDTH_HZ, AMP_SD, AMP_TAU_S);
    for (c, g) in profile.iter().enumerate() {
        eeg.row_mut(c).scaled_add(g * cfg.mu_std, &Array1::from(mu.clone()));
    }
    assemble(cfg, eeg, eog, vec![], 0)
}

fn generate_run(cfg: &SynthConfig, run_id: u32, controls: &[bool]) -> Result<(Recording, RunTruth)> {
    let mut rng = rng_for(cfg.seed, run_id as u64);
    let fs = cfg.sample_rate as f64;
    let n = cfg.run_length_samples();
    let (mut eeg, eog) = base_signal(cfg, &mut rng, n, EyeActivity::Task)?;
    let tl = &cfg.timeline;

    let mut mu_gain = vec![1.0; n];
    let mut beta_gain = vec![1.0; n];
    let mut robot_env = vec![0.0; n];
    let mut events = Vec::new();
    let mut truths = Vec::new();
    let moves = [
        (tl.offset_of(EventKind::RobotMoveStart), tl.offset_of(EventKind::RobotStop)),
        (tl.offset_of(EventKind::ReturnCue), tl.offset_of(EventKind::TrialEnd)),
    ];
    for (k, &control) in controls.iter().enumerate() {
        let start = cfg.trial_start(k);
        for (kind, off) in tl.marker_offsets_s() {
            events.push(EventMarker { sample_index: start + (off * fs).round() as usize, kind, trial_index: k });
        }
        let (mu_iv, beta_iv) = erd_intervals(tl, cfg.response_latency_s, control);
        let end = cfg.trial_start(k + 1).min(n);
        for j in start..end {
            let t = (j - start) as f64 / fs;
            mu_gain[j] = (1.0 - cfg.erd_depth_mu * erd_indicator(t, mu_iv)).sqrt();
            beta_gain[j] = (1.0 - cfg.erd_depth_beta * erd_indicator(t, beta_iv)).sqrt();
            robot_env[j] = moves.iter().map(|&m| velocity(t, m)).sum();
        }
        truths.push(TrialTruth { trial_index: k, control, mu_erd_s: mu_iv, beta_erd_s: beta_iv });
    }
    events.sort_by_key(|e| (e.sample_index, e.kind));

    let profile = cfg.profile();
    let mu = oscillator(&mut rng, n, fs, MU_HZ, MU_LINEWIDTH_HZ, AMP_SD, AMP_TAU_S);
    let beta = oscillator(&mut rng, n, fs, BETA_HZ, BETA_LINEWIDTH_HZ, AMP_SD, AMP_TAU_S);
    let rhythm: Vec<(f64, f64)> = (0..n).map(|j| (mu[j] * mu_gain[j], beta[j] * beta_gain[j])).collect();
    for (c, g) in profile.iter().enumerate() {
        let mut row = eeg.row_mut(c);
        for (v, (m, b)) in row.iter_mut().zip(&rhythm) {
            *v += g * (cfg.mu_std * m + cfg.beta_std * b);
        }
    }
    if cfg.robot_noise_gain > 0.0 {
        for c in 0..EEG_MONTAGE.len() {
            let gain = cfg.robot_noise_gain * rng.random_range(0.5..1.5);
            let noise = band_noise(&mut rng, n, (5.0, 45.0), 4, fs)?;
            let mut row = eeg.row_mut(c);
            for j in 0..n {
                row[j] += gain * robot_env[j] * noise[j];
            }
        }
    }
    Ok((assemble(cfg, eeg, eog, events, run_id)?, RunTruth { run_id, trials: truths }))
}

fn generate(cfg: &SynthConfig, with_controls: bool) -> Result<SynthOutput> {
    cfg.validate()?;
    let plans: Vec<Vec<bool>> = (1..=cfg.n_runs as u32)
        .map(|run_id| {
            let mut flags: Vec<bool> = (0..cfg.n_trials).map(|k| with_controls && k < cfg.n_trials / 2).collect();
            if with_controls {
                flags.shuffle(&mut rng_for(cfg.seed, 1 << 32 | run_id as u64));
            }
            flags
        })
        .collect();
    let runs = par::map_range(cfg.n_runs, |i| generate_run(cfg, i as u32 + 1, &plans[i]));
    let mut recs = Vec::with_capacity(cfg.n_runs);
    let mut truths = Vec::with_capacity(cfg.n_runs);
    for r in runs {
        let (rec, t) = r?;
        recs.push(rec);
        truths.push(t);
    }
    let mut session = Session::new(cfg.timeline, recs, Some(generate_calibration(cfg)?));
    session.meta = Some(serde_json::json!({ "generator": "synth", "seed": cfg.seed, "control_trials": with_controls }));
    Ok(SynthOutput { session, ground_truth: GroundTruth { config: cfg.clone(), runs: truths, meta: None } })
}

/// Session of active trials only.
pub fn generate_session(cfg: &SynthConfig) -> Result<SynthOutput> {
    generate(cfg, false)
}

/// Session in which half of each run's trials, in random order, are
/// passive controls.
pub fn generate_control_session(cfg: &SynthConfig) -> Result<SynthOutput> {
    generate(cfg, true)
}
