//! Symmetric positive-definite matrix utilities under the affine-invariant
//! Riemannian metric.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par;

/// Eigenvalues are clamped to this value before matrix functions are applied.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Covariance of one epoch with its class label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSample {
    pub c: DMatrix<f64>,
    pub label: u8,
    pub run_id: u32,
    pub trial_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrechetOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50 }
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

fn compose(e: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|&l| f(l.max(EIGEN_CLAMP))));
    let v = &e.eigenvectors;
    let m = v * DMatrix::from_diagonal(&d) * v.transpose();
    symmetrize(&m)
}

/// Apply `f` to the (clamped) eigenvalues of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    compose(&eigen(m), f)
}

pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, f64::sqrt)
}

pub fn invsqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, |l| 1.0 / l.sqrt())
}

/// Square root and inverse square root from one decomposition.
pub fn sqrt_and_invsqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let e = eigen(m);
    (compose(&e, f64::sqrt), compose(&e, |l| 1.0 / l.sqrt()))
}

pub fn logm(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, f64::ln)
}

/// Matrix exponential of a symmetric matrix (no clamping).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = eigen(m);
    let d = e.eigenvalues.map(f64::exp);
    symmetrize(&(&e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()))
}

pub fn powm(m: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    sym_fn(m, |l| l.powf(p))
}

/// `w * c * w^T`, symmetrized.
pub fn congruence(w: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(w * c * w.transpose()))
}

/// Fails unless `m` is square, symmetric and has eigenvalues above
/// `EIGEN_CLAMP` relative to its largest one.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::NotSpd(format!("shape {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax();
    if !scale.is_finite() {
        return Err(Error::NotSpd("non-finite entries".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSpd(format!("asymmetry {asym:e}")));
    }
    let e = eigen(m);
    let max = e.eigenvalues.max();
    let min = e.eigenvalues.min();
    if !(max > 0.0) || min <= EIGEN_CLAMP * max {
        return Err(Error::NotSpd(format!("eigenvalue range [{min:e}, {max:e}]")));
    }
    Ok(())
}

/// Sample covariance (channels x samples input) with shrinkage towards
/// `tr(C)/n * I`.
pub fn epoch_covariance(signal: ArrayView2<f64>, shrinkage: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidArgument(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let (n_ch, n) = signal.dim();
    if n < 2 {
        return Err(Error::SignalTooShort { needed: 2, got: n });
    }
    let centred: Vec<Vec<f64>> = signal
        .rows()
        .into_iter()
        .map(|r| {
            let mu = r.sum() / n as f64;
            r.iter().map(|v| v - mu).collect()
        })
        .collect();
    let mut c = DMatrix::zeros(n_ch, n_ch);
    for i in 0..n_ch {
        for j in i..n_ch {
            let s: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let v = s / (n - 1) as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let mu = c.trace() / n_ch as f64;
    let mut shrunk = c * (1.0 - shrinkage);
    for i in 0..n_ch {
        shrunk[(i, i)] += shrinkage * mu;
    }
    check_spd(&shrunk)?;
    Ok(shrunk)
}

/// Distance given `a^{-1/2}` precomputed.
pub fn airm_distance_from(inv_sqrt_a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = congruence(inv_sqrt_a, b);
    let e = eigen(&m);
    e.eigenvalues.iter().map(|&l| l.max(EIGEN_CLAMP).ln().powi(2)).sum::<f64>().sqrt()
}

/// Affine-invariant distance `||log(A^{-1/2} B A^{-1/2})||_F`.
pub fn airm_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_spd(a)?;
    check_spd(b)?;
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(airm_distance_from(&invsqrtm(a), b))
}

/// Riemannian (Karcher) mean by fixed-point iteration from the arithmetic
/// mean. The residual is the Frobenius norm of the mean tangent vector.
pub fn frechet_mean(samples: &[DMatrix<f64>], opts: FrechetOptions) -> Result<DMatrix<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("Fréchet mean of an empty set".into()))?;
    let n = first.nrows();
    if samples.iter().any(|s| s.shape() != (n, n)) {
        return Err(Error::Dimension("samples differ in size".into()));
    }
    let mut m = samples.iter().fold(DMatrix::zeros(n, n), |acc, s| acc + s) / samples.len() as f64;
    check_spd(&m)?;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (s, is) = sqrt_and_invsqrt(&m);
        let logs = par::map_slice(samples, |c| logm(&congruence(&is, c)));
        let t = logs.iter().fold(DMatrix::zeros(n, n), |acc, l| acc + l) / samples.len() as f64;
        residual = t.norm();
        if residual < opts.tol {
            return Ok(m);
        }
        m = congruence(&s, &expm(&t));
    }
    // One last check on the final iterate.
    let is = invsqrtm(&m);
    let logs = par::map_slice(samples, |c| logm(&congruence(&is, c)));
    let t = logs.iter().fold(DMatrix::zeros(n, n), |acc, l| acc + l) / samples.len() as f64;
    if t.norm() < opts.tol {
        return Ok(m);
    }
    residual = residual.min(t.norm());
    Err(Error::NoConvergence { iterations: opts.max_iter, residual, last: m })
}

/// Serde helper storing a square matrix as row-major nested arrays.
pub mod row_major {
    use super::*;

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub(crate) fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn distance_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(&mut rng, 4);
        let b = random_spd(&mut rng, 4);
        assert!(airm_distance(&a, &a).unwrap() < 1e-7);
        let i = DMatrix::<f64>::identity(3, 3);
        let e2 = i.clone() * std::f64::consts::E.powi(2);
        assert!((airm_distance(&i, &e2).unwrap() - 12f64.sqrt()).abs() < 1e-10);
        let dab = airm_distance(&a, &b).unwrap();
        let dba = airm_distance(&b, &a).unwrap();
        assert!((dab - dba).abs() < 1e-9 * dab.max(1.0));
        let w = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(4, 4) * 2.0;
        let d2 = airm_distance(&congruence(&w, &a), &congruence(&w, &b)).unwrap();
        assert!((dab - d2).abs() < 1e-7 * dab);
    }

    #[test]
    fn frechet_mean_of_inverse_pair_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(&mut rng, 5);
        let ainv = a.clone().try_inverse().unwrap();
        let m = frechet_mean(&[a, ainv], FrechetOptions::default()).unwrap();
        assert!((m - DMatrix::identity(5, 5)).amax() < 1e-7);
    }

    #[test]
    fn frechet_mean_of_copies_and_commuting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 3);
        let m = frechet_mean(&[a.clone(), a.clone(), a.clone()], FrechetOptions::default()).unwrap();
        assert!((&m - &a).amax() < 1e-9 * a.amax());
        // Diagonal matrices: mean is the elementwise geometric mean.
        let d1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let d2 = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0]));
        let m = frechet_mean(&[d1, d2], FrechetOptions::default()).unwrap();
        assert!((m[(0, 0)] - 3.0).abs() < 1e-9 && (m[(1, 1)] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<_> = (0..5).map(|_| random_spd(&mut rng, 4)).collect();
        match frechet_mean(&s, FrechetOptions { tol: 0.0, max_iter: 2 }) {
            Err(Error::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert!(check_spd(&last).is_ok());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn covariance_shrinkage_and_rank() {
        let x = Array2::from_shape_fn((3, 200), |(c, t)| ((t as f64) * (0.1 + c as f64 * 0.07)).sin());
        let c = epoch_covariance(x.view(), 0.0).unwrap();
        assert!(check_spd(&c).is_ok());
        let c5 = epoch_covariance(x.view(), 0.05).unwrap();
        assert!((c5.trace() - c.trace()).abs() < 1e-12);

        let mut dup = x.clone();
        let row = dup.row(0).to_owned();
        dup.row_mut(1).assign(&row);
        assert!(matches!(epoch_covariance(dup.view(), 0.0), Err(Error::NotSpd(_))));
        assert!(epoch_covariance(dup.view(), 0.1).is_ok());
        let flat = Array2::<f64>::ones((3, 50));
        assert!(matches!(epoch_covariance(flat.view(), 0.0), Err(Error::NotSpd(_))));
    }

    #[test]
    fn row_major_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let rows = row_major::to_rows(&m);
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(row_major::from_rows(&rows).unwrap(), m);
    }
}
