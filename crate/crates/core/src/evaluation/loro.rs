use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::report::{time_resolved_accuracy, EvalReport, FoldResult, Pipeline, SkippedFold};
use crate::classifiers::{dlda_fit, fisher_scores, DldaModel, FisherRanking};
use crate::config::{DldaConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Task};
use crate::par;
use crate::pipeline::offline_features;
use crate::session::Session;

fn accuracy(pred: &[u8], truth: &[u8]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len().max(1) as f64
}

enum FoldOutcome {
    Done(FoldResult, Vec<(usize, bool)>),
    Skipped(SkippedFold),
}

fn run_fold(fm: &FeatureMatrix, run_id: u32, cfg: &DldaConfig) -> Result<FoldOutcome> {
    let test = fm.subset(|i| fm.run_ids[i] == run_id);
    if test.n_samples() == 0 {
        return Ok(FoldOutcome::Skipped(SkippedFold { run_id, reason: "no valid trials".into() }));
    }
    let train = fm.subset(|i| fm.run_ids[i] != run_id);
    if train.class_count(0) == 0 || train.class_count(1) == 0 {
        return Ok(FoldOutcome::Skipped(SkippedFold {
            run_id,
            reason: "training runs lack one class".into(),
        }));
    }
    let ranking = fisher_scores(&train, cfg.n_features)?;
    let model = dlda_fit(train.x.view(), &train.labels, &ranking.selected)?;
    let train_pred = model.predict_all(train.x.view());
    let test_pred = model.predict_all(test.x.view());
    let windows = test
        .window_indices
        .iter()
        .zip(test_pred.iter().zip(&test.labels))
        .map(|(&w, (p, t))| (w, p == t))
        .collect();
    Ok(FoldOutcome::Done(
        FoldResult {
            run_id,
            train_accuracy: accuracy(&train_pred, &train.labels),
            test_accuracy: accuracy(&test_pred, &test.labels),
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            selected_features: ranking.selected.iter().map(|&j| fm.feature_index[j].clone()).collect(),
        },
        windows,
    ))
}

/// Leave-one-run-out Fisher + dLDA evaluation of a feature matrix.
///
/// `run_ids` lists every run of the session; runs without samples are
/// reported as skipped folds. Feature ranking uses training folds only.
pub fn loro_cv_features(
    fm: &FeatureMatrix,
    run_ids: &[u32],
    task: Task,
    cfg: &DldaConfig,
    alpha: f64,
) -> Result<EvalReport> {
    if run_ids.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-run-out needs at least 2 runs, got {}",
            run_ids.len()
        )));
    }
    let outcomes = par::map_slice(run_ids, |&r| run_fold(fm, r, cfg));
    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    let mut windows = Vec::new();
    for o in outcomes {
        match o? {
            FoldOutcome::Done(f, w) => {
                folds.push(f);
                windows.push(w);
            }
            FoldOutcome::Skipped(s) => {
                log::warn!("fold for run {} skipped: {}", s.run_id, s.reason);
                skipped.push(s);
            }
        }
    }
    if folds.is_empty() {
        return Err(Error::InvalidArgument("every fold was skipped".into()));
    }
    let curve = time_resolved_accuracy(&windows).ok();
    EvalReport::new(task, Pipeline::DldaOffline, folds, skipped, curve, alpha)
}

/// Fisher ranking and dLDA model fitted on every sample of `fm`.
pub fn train_dlda(fm: &FeatureMatrix, cfg: &DldaConfig) -> Result<(FisherRanking, DldaModel)> {
    let ranking = fisher_scores(fm, cfg.n_features)?;
    let model = dlda_fit(fm.x.view(), &fm.labels, &ranking.selected)?;
    Ok((ranking, model))
}

/// Offline preprocessing, feature extraction and LORO-CV of a session.
pub fn loro_cv(session: &Session, task: Task, cfg: &PipelineConfig) -> Result<EvalReport> {
    let fm = offline_features(session, task, cfg)?;
    let runs: Vec<u32> = session.runs.iter().map(|r| r.run_id()).collect();
    loro_cv_features(&fm, &runs, task, &cfg.dlda, cfg.evaluation.alpha)
}

/// Copy of `fm` with labels shuffled across all samples.
pub fn permute_labels(fm: &FeatureMatrix, seed: u64) -> FeatureMatrix {
    let mut out = fm.clone();
    out.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use rand::Rng;

    use super::*;

    fn blobs(shift: f64, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let runs = 4u32;
        let per_run = 40;
        let n = runs as usize * per_run;
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 20), |(i, j)| {
            let base: f64 = rng.random_range(-1.0..1.0);
            if j < 3 && labels[i] == 1 { base + shift } else { base }
        });
        FeatureMatrix {
            x,
            feature_index: (0..20).map(|j| ("C3".to_string(), 8.0 + j as f64)).collect(),
            labels,
            run_ids: (0..n).map(|i| 1 + (i / per_run) as u32).collect(),
            trial_indices: (0..n).map(|i| i / 2).collect(),
            window_indices: (0..n).map(|i| (i / 2) % 9).collect(),
        }
    }

    #[test]
    fn separable_data_is_decoded() {
        let fm = blobs(3.0, 1);
        let rep = loro_cv_features(&fm, &[1, 2, 3, 4], Task::Onset, &DldaConfig::default(), 0.05).unwrap();
        assert_eq!(rep.folds.len(), 4);
        assert!(rep.test.mean > 0.95);
        for f in &rep.folds {
            assert!(f.selected_features[..3].iter().all(|(_, fr)| *fr < 11.0));
        }
    }

    #[test]
    fn missing_run_is_skipped() {
        let fm = blobs(3.0, 2);
        let rep = loro_cv_features(&fm, &[1, 2, 3, 4, 9], Task::Onset, &DldaConfig::default(), 0.05).unwrap();
        assert_eq!(rep.folds.len(), 4);
        assert_eq!(rep.skipped_folds.len(), 1);
        assert_eq!(rep.skipped_folds[0].run_id, 9);
        assert!(loro_cv_features(&fm, &[1], Task::Onset, &DldaConfig::default(), 0.05).is_err());
    }

    #[test]
    fn permuted_labels_keep_balance() {
        let fm = blobs(3.0, 3);
        let p = permute_labels(&fm, 5);
        assert_eq!(p.class_count(1), fm.class_count(1));
        assert_ne!(p.labels, fm.labels);
    }
}
