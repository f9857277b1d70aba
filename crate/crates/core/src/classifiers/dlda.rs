use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooled variances below this fraction of the largest one are floored.
const VARIANCE_FLOOR_REL: f64 = 1e-9;
const VARIANCE_FLOOR_ABS: f64 = 1e-300;

/// Two-class Gaussian model with a shared diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DldaModel {
    /// Feature columns the model reads from a full feature vector.
    pub selected: Vec<usize>,
    pub means: [Vec<f64>; 2],
    pub variances: Vec<f64>,
    pub priors: [f64; 2],
    /// Set when more than half of the selected features hit the variance floor.
    pub warning: Option<String>,
}

/// Fit on the `selected` columns of `x`.
pub fn dlda_fit(x: ArrayView2<f64>, labels: &[u8], selected: &[usize]) -> Result<DldaModel> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no features selected".into()));
    }
    if labels.len() != x.nrows() {
        return Err(Error::Dimension(format!("{} labels for {} samples", labels.len(), x.nrows())));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= x.ncols()) {
        return Err(Error::Dimension(format!("feature {j} out of {} columns", x.ncols())));
    }
    let counts = [
        labels.iter().filter(|&&l| l == 0).count(),
        labels.iter().filter(|&&l| l == 1).count(),
    ];
    if counts.contains(&0) {
        return Err(Error::SingleClass(format!("class counts {counts:?}")));
    }
    let n = labels.len();
    let mut means = [vec![0.0; selected.len()], vec![0.0; selected.len()]];
    let mut variances = vec![0.0; selected.len()];
    for (f, &j) in selected.iter().enumerate() {
        let col = x.column(j);
        let mut sums = [0.0; 2];
        for (&v, &l) in col.iter().zip(labels) {
            sums[(l == 1) as usize] += v;
        }
        let mu = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
        let ss: f64 = col
            .iter()
            .zip(labels)
            .map(|(&v, &l)| (v - mu[(l == 1) as usize]).powi(2))
            .sum();
        means[0][f] = mu[0];
        means[1][f] = mu[1];
        variances[f] = ss / if n > 2 { (n - 2) as f64 } else { n as f64 };
    }
    let max_var = variances.iter().cloned().fold(0.0, f64::max);
    let floor = (max_var * VARIANCE_FLOOR_REL).max(VARIANCE_FLOOR_ABS);
    let mut floored = 0;
    for v in &mut variances {
        if *v < floor {
            *v = floor;
            floored += 1;
        }
    }
    let warning = (2 * floored > selected.len()).then(|| {
        let msg = format!("{floored} of {} selected features hit the variance floor", selected.len());
        log::warn!("dLDA: {msg}");
        msg
    });
    Ok(DldaModel {
        selected: selected.to_vec(),
        means,
        variances,
        priors: [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64],
        warning,
    })
}

impl DldaModel {
    /// Linear discriminant of class `c` for a full feature vector.
    pub fn discriminant(&self, sample: &[f64], c: usize) -> f64 {
        let mut g = self.priors[c].ln();
        for (f, &j) in self.selected.iter().enumerate() {
            let mu = self.means[c][f];
            g += (sample[j] * mu - 0.5 * mu * mu) / self.variances[f];
        }
        g
    }

    /// `g1 - g0`; positive favours class 1.
    pub fn decision_value(&self, sample: &[f64]) -> f64 {
        self.discriminant(sample, 1) - self.discriminant(sample, 0)
    }

    /// Class with the larger discriminant; ties go to class 0.
    pub fn predict(&self, sample: &[f64]) -> u8 {
        u8::from(self.decision_value(sample) > 0.0)
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Vec<u8> {
        x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict(s),
                None => self.predict(&r.to_vec()),
            })
            .collect()
    }
}
