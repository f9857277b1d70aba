use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::chance_level;
use crate::error::{Error, Result};
use crate::features::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    DldaOffline,
    MdmPseudoOnline,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::DldaOffline => "dlda_offline",
            Pipeline::MdmPseudoOnline => "mdm_pseudo_online",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Held-out run.
    pub run_id: u32,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Channel and frequency of each selected feature (dLDA only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_features: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub run_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            std,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Accuracy per within-epoch window index, averaged over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub window_index: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_folds: usize,
}

/// Per-window-index accuracy of each fold, then mean and spread across
/// folds. Every index from 0 to the largest one seen must be present.
pub fn time_resolved_accuracy(per_fold: &[Vec<(usize, bool)>]) -> Result<AccuracyCurve> {
    let mut per_index: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for fold in per_fold {
        let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for &(w, ok) in fold {
            let e = counts.entry(w).or_default();
            e.0 += ok as usize;
            e.1 += 1;
        }
        for (w, (hit, n)) in counts {
            per_index.entry(w).or_default().push(hit as f64 / n as f64);
        }
    }
    let Some(&last) = per_index.keys().next_back() else {
        return Err(Error::InvalidArgument("no window indices to evaluate".into()));
    };
    if let Some(missing) = (0..=last).find(|w| !per_index.contains_key(w)) {
        return Err(Error::InvalidArgument(format!("window index {missing} has no predictions")));
    }
    let summaries: Vec<Summary> = per_index.values().map(|v| Summary::of(v)).collect();
    Ok(AccuracyCurve {
        window_index: per_index.keys().copied().collect(),
        mean: summaries.iter().map(|s| s.mean).collect(),
        std: summaries.iter().map(|s| s.std).collect(),
        n_folds: per_fold.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub pipeline: Pipeline,
    pub folds: Vec<FoldResult>,
    pub skipped_folds: Vec<SkippedFold>,
    pub train: Summary,
    pub test: Summary,
    /// Chance level for the smallest held-out run.
    pub chance_level: f64,
    pub alpha: f64,
    pub window_curve: Option<AccuracyCurve>,
}

impl EvalReport {
    pub fn new(
        task: Task,
        pipeline: Pipeline,
        folds: Vec<FoldResult>,
        skipped_folds: Vec<SkippedFold>,
        window_curve: Option<AccuracyCurve>,
        alpha: f64,
    ) -> Result<Self> {
        let n_min = folds.iter().map(|f| f.n_test).min().unwrap_or(0);
        let chance = if n_min > 0 { chance_level(n_min as u64, alpha)? } else { f64::NAN };
        let train: Vec<f64> = folds.iter().map(|f| f.train_accuracy).collect();
        let test: Vec<f64> = folds.iter().map(|f| f.test_accuracy).collect();
        Ok(Self {
            task,
            pipeline,
            train: Summary::of(&train),
            test: Summary::of(&test),
            folds,
            skipped_folds,
            chance_level: chance,
            alpha,
            window_curve,
        })
    }

    /// One row per fold followed by AVG, STD, MIN and MAX rows, accuracies
    /// in percent.
    pub fn write_table_csv(&self, w: &mut impl Write, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# task={} pipeline={} chance_level={:.1}", self.task.name(), self.pipeline.name(), 100.0 * self.chance_level)?;
        writeln!(w, "fold,run_id,train,test")?;
        for (i, f) in self.folds.iter().enumerate() {
            writeln!(w, "{},{},{:.1},{:.1}", i + 1, f.run_id, 100.0 * f.train_accuracy, 100.0 * f.test_accuracy)?;
        }
        let rows = [
            ("AVG", self.train.mean, self.test.mean),
            ("STD", self.train.std, self.test.std),
            ("MIN", self.train.min, self.test.min),
            ("MAX", self.train.max, self.test.max),
        ];
        for (name, tr, te) in rows {
            writeln!(w, "{name},,{:.1},{:.1}", 100.0 * tr, 100.0 * te)?;
        }
        Ok(())
    }
}
