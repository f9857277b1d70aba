use nalgebra::DMatrix;

use super::spd::{congruence, frechet_mean, invsqrtm, sqrt_and_invsqrt, sym_fn, FrechetOptions};
use crate::error::{Error, Result};

/// Maps incoming covariances into a reference-centred frame while
/// tracking the reference.
pub trait Recenter {
    /// Re-centre `c` with the current reference, then fold it in.
    fn transform_and_update(&mut self, c: &DMatrix<f64>) -> Result<DMatrix<f64>>;
    fn reference(&self) -> &DMatrix<f64>;
}

/// Running geodesic mean: after `k` updates the reference moves a
/// fraction `1/(k+1)` along the geodesic towards the new sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RecenterState {
    reference: DMatrix<f64>,
    count: usize,
}

pub type IncrementalRecenter = RecenterState;

impl RecenterState {
    /// Identity reference, no samples seen.
    pub fn new(dimension: usize) -> Self {
        Self { reference: DMatrix::identity(dimension, dimension), count: 0 }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

impl Recenter for RecenterState {
    fn transform_and_update(&mut self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if c.shape() != self.reference.shape() {
            return Err(Error::Dimension(format!(
                "covariance {:?} vs reference {:?}",
                c.shape(),
                self.reference.shape()
            )));
        }
        let (s, is) = sqrt_and_invsqrt(&self.reference);
        let centred = congruence(&is, c);
        let t = 1.0 / (self.count + 1) as f64;
        let step = sym_fn(&centred, |l| l.powf(t));
        self.reference = congruence(&s, &step);
        self.count += 1;
        Ok(centred)
    }

    fn reference(&self) -> &DMatrix<f64> {
        &self.reference
    }
}

/// Re-centre a whole batch on its own Riemannian mean.
pub fn recenter_batch(samples: &[DMatrix<f64>], opts: FrechetOptions) -> Result<Vec<DMatrix<f64>>> {
    let mean = frechet_mean(samples, opts)?;
    let is = invsqrtm(&mean);
    Ok(samples.iter().map(|c| congruence(&is, c)).collect())
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::classifiers::spd::airm_distance;

    #[test]
    fn first_update_maps_identity_reference_to_sample() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let mut r = RecenterState::new(2);
        let out = r.transform_and_update(&c).unwrap();
        assert!((out - &c).amax() < 1e-12);
        assert!((r.reference() - &c).amax() < 1e-12);
        assert_eq!(r.count(), 1);
    }

    #[test]
    fn second_update_is_geodesic_midpoint() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0]));
        let mut r = RecenterState::new(2);
        r.transform_and_update(&a).unwrap();
        r.transform_and_update(&b).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
        assert!(airm_distance(r.reference(), &expect).unwrap() < 1e-10);
    }

    #[test]
    fn batch_is_centred() {
        let s = vec![
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0])),
        ];
        let out = recenter_batch(&s, FrechetOptions::default()).unwrap();
        let m = frechet_mean(&out, FrechetOptions::default()).unwrap();
        assert!((m - DMatrix::identity(2, 2)).amax() < 1e-8);
    }
}
