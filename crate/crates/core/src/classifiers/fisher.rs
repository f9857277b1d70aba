use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Per-feature Fisher scores and the indices of the top-k features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherRanking {
    pub scores: Vec<f64>,
    /// Descending score; ties broken by ascending feature index.
    pub selected: Vec<usize>,
}

/// Fisher score `(mu1 - mu0)^2 / (var0 + var1)` of each column, using
/// population variances. Columns with zero denominator score 0.
pub fn fisher_scores_of(x: ArrayView2<f64>, labels: &[u8], k: usize) -> Result<FisherRanking> {
    if labels.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} samples",
            labels.len(),
            x.nrows()
        )));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.iter().filter(|&&l| l == 0).count();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass(format!("{n0} samples of class 0, {n1} of class 1")));
    }
    let scores: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|col| {
            let mut s = [0.0; 2];
            let mut ss = [0.0; 2];
            for (&v, &l) in col.iter().zip(labels) {
                let c = (l == 1) as usize;
                s[c] += v;
            }
            let mu = [s[0] / n0 as f64, s[1] / n1 as f64];
            for (&v, &l) in col.iter().zip(labels) {
                let c = (l == 1) as usize;
                ss[c] += (v - mu[c]).powi(2);
            }
            let denom = ss[0] / n0 as f64 + ss[1] / n1 as f64;
            if denom > 0.0 {
                (mu[1] - mu[0]).powi(2) / denom
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(FisherRanking { scores, selected: order })
}

pub fn fisher_scores(x: &FeatureMatrix, k: usize) -> Result<FisherRanking> {
    fisher_scores_of(x.x.view(), &x.labels, k)
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;

    #[test]
    fn identical_feature_scores_zero() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [1.0, 5.0], [2.0, 5.0]];
        let r = fisher_scores_of(x.view(), &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.0]);
        assert_eq!(r.selected, vec![0, 1]);
    }

    #[test]
    fn direct_formula() {
        // class 0: {-1, 1} (mean 0, var 1); class 1: {1, 3} (mean 2, var 1)
        let x = array![[-1.0], [1.0], [1.0], [3.0]];
        let r = fisher_scores_of(x.view(), &[0, 0, 1, 1], 1).unwrap();
        assert!((r.scores[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = Array2::zeros((3, 2));
        assert!(matches!(fisher_scores_of(x.view(), &[1, 1, 1], 1), Err(Error::SingleClass(_))));
    }

    #[test]
    fn ties_break_by_index() {
        let x = array![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        let r = fisher_scores_of(x.view(), &[0, 0, 1, 1], 3).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2]);
    }
}
