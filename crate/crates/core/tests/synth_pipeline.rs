use ndarray::s;

use mi_core::config::PipelineConfig;
use mi_core::dsp::welch_psd;
use mi_core::evaluation::{loro_cv_features, time_resolved_accuracy};
use mi_core::features::{trial_average_spectrogram, SpectrogramKind, Task};
use mi_core::pipeline::{preprocess_session, runs_features};
use mi_core::session::{extract_epochs, Condition, EventKind, Session};
use mi_core::synth::{erd_intervals, generate_control_session, generate_session, GroundTruth, SynthConfig};

fn mean_power_at(session: &Session, condition: Condition, freq_hz: f64) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for rec in &session.runs {
        let c3 = rec.channel_index("C3").unwrap();
        let data = rec.data();
        for e in extract_epochs(rec, &session.timeline).of(condition) {
            let psd = welch_psd(data.slice(s![c3..c3 + 1, e.start_sample..e.end_sample()]), 0.5, 512.0, 1.0).unwrap();
            total += psd.power[[0, psd.bin(freq_hz)]];
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn mu_power_halves_during_imagery() {
    let synth = generate_session(&SynthConfig { robot_noise_gain: 0.0, ..Default::default() }).unwrap();
    let ratio = mean_power_at(&synth.session, Condition::Bmi, 10.0) / mean_power_at(&synth.session, Condition::Rs, 10.0);
    assert!((ratio - 0.5).abs() <= 0.1, "bMI/RS 10 Hz power ratio {ratio}");
}

#[test]
fn halved_mu_power_reads_as_minus_0_301() {
    let synth = generate_session(&SynthConfig { robot_noise_gain: 0.0, seed: 3, ..Default::default() }).unwrap();
    let pc = PipelineConfig::default();
    let spec =
        trial_average_spectrogram(&synth.session.runs, &synth.session.timeline, &pc.epochs, "C3", &pc.features, true).unwrap();
    assert_eq!(spec.kind, SpectrogramKind::ErdLog10);
    let k = spec.freqs_hz.iter().position(|f| *f == 10.0).unwrap();
    let during: Vec<f64> = (0..spec.n_windows())
        .filter(|&w| (1.0..=3.0).contains(&spec.times_s[w]))
        .map(|w| spec.values[[0, k, w]])
        .collect();
    let mean = during.iter().sum::<f64>() / during.len() as f64;
    assert!((mean - 0.5f64.log10()).abs() <= 0.05, "ERD at 10 Hz {mean}");
    let rest: Vec<f64> = (0..spec.n_windows()).filter(|&w| spec.times_s[w] < -4.0).map(|w| spec.values[[0, k, w]]).collect();
    assert!(rest.iter().all(|v| v.abs() < 0.1), "{rest:?}");
}

#[test]
fn null_session_decodes_at_chance() {
    let cfg = SynthConfig { robot_noise_gain: 0.0, erd_depth_mu: 0.0, erd_depth_beta: 0.0, seed: 11, ..Default::default() };
    let synth = generate_session(&cfg).unwrap();
    let pc = PipelineConfig::default();
    let (runs, _) = preprocess_session(&synth.session, &pc).unwrap();
    let fm = runs_features(&runs, &synth.session, Task::Onset, &pc).unwrap();
    let ids: Vec<u32> = runs.iter().map(|r| r.run_id()).collect();
    let rep = loro_cv_features(&fm, &ids, Task::Onset, &pc.dlda, 0.05).unwrap();
    assert!((0.45..=0.55).contains(&rep.test.mean), "null accuracy {}", rep.test.mean);
}

#[test]
fn late_offset_response_gives_rising_curve() {
    let synth = generate_session(&SynthConfig { response_latency_s: 0.3, seed: 2, ..Default::default() }).unwrap();
    let pc = PipelineConfig::default();
    let (runs, _) = preprocess_session(&synth.session, &pc).unwrap();
    let fm = runs_features(&runs, &synth.session, Task::Offset, &pc).unwrap();
    let ids: Vec<u32> = runs.iter().map(|r| r.run_id()).collect();
    let curve = loro_cv_features(&fm, &ids, Task::Offset, &pc.dlda, 0.05).unwrap().window_curve.unwrap();
    assert_eq!(curve.window_index, (0..9).collect::<Vec<_>>());
    assert!(curve.mean[8] > curve.mean[0], "{:?}", curve.mean);
    assert!(time_resolved_accuracy(&[]).is_err());
}

#[test]
fn sessions_round_trip_through_disk() {
    let cfg = SynthConfig { n_runs: 2, n_trials: 3, seed: 5, ..Default::default() };
    let synth = generate_session(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    synth.session.save(dir.path()).unwrap();
    synth.ground_truth.save(dir.path()).unwrap();
    let back = Session::load(dir.path()).unwrap();
    assert_eq!(back.timeline, synth.session.timeline);
    assert_eq!(back.runs, synth.session.runs);
    assert_eq!(back.calibration, synth.session.calibration);
    assert_eq!(GroundTruth::load(dir.path()).unwrap(), synth.ground_truth);
    assert_eq!(generate_session(&cfg).unwrap().session.runs, synth.session.runs);
}

#[test]
fn control_trials_only_desynchronize_after_movement_onset() {
    let synth = generate_control_session(&SynthConfig::default()).unwrap();
    let truth = &synth.ground_truth;
    let trials: Vec<_> = truth.runs.iter().flat_map(|r| r.trials.iter()).collect();
    assert_eq!(trials.iter().filter(|t| t.control).count(), 60);
    assert_eq!(trials.iter().filter(|t| !t.control).count(), 60);
    for r in &truth.runs {
        assert_eq!(r.trials.iter().filter(|t| t.control).count(), 10);
    }
    let timeline = synth.session.timeline;
    let go = timeline.offset_of(EventKind::GoCue);
    let moving = timeline.offset_of(EventKind::RobotMoveStart);
    for t in trials.iter().filter(|t| t.control) {
        assert!(t.mu_erd_s.0 >= moving && t.beta_erd_s.0 >= moving);
        // the bMI window [go, go + 1) ends where the robot starts
        assert!(go + 1.0 <= t.mu_erd_s.0);
    }
    let (active_mu, _) = erd_intervals(&timeline, 0.1, false);
    assert!(active_mu.0 < go + 1.0);
}
