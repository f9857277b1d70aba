use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spd::{airm_distance_from, check_spd, frechet_mean, invsqrtm, row_major, FrechetOptions, SpdSample};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct MdmFile {
    dimension: usize,
    class_means: Vec<Vec<Vec<f64>>>,
}

/// Minimum distance to Riemannian class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MdmFile", try_from = "MdmFile")]
pub struct MdmModel {
    class_means: [DMatrix<f64>; 2],
    inv_sqrt: [DMatrix<f64>; 2],
}

pub fn mdm_fit(samples: &[SpdSample], opts: FrechetOptions) -> Result<MdmModel> {
    let by_class = |c: u8| -> Vec<DMatrix<f64>> {
        samples.iter().filter(|s| s.label == c).map(|s| s.c.clone()).collect()
    };
    let (c0, c1) = (by_class(0), by_class(1));
    if c0.is_empty() || c1.is_empty() {
        return Err(Error::SingleClass(format!(
            "{} samples of class 0, {} of class 1",
            c0.len(),
            c1.len()
        )));
    }
    MdmModel::new([frechet_mean(&c0, opts)?, frechet_mean(&c1, opts)?])
}

impl MdmModel {
    pub fn new(class_means: [DMatrix<f64>; 2]) -> Result<Self> {
        for m in &class_means {
            check_spd(m)?;
        }
        if class_means[0].shape() != class_means[1].shape() {
            return Err(Error::Dimension("class means differ in size".into()));
        }
        let inv_sqrt = [invsqrtm(&class_means[0]), invsqrtm(&class_means[1])];
        Ok(Self { class_means, inv_sqrt })
    }

    pub fn class_means(&self) -> &[DMatrix<f64>; 2] {
        &self.class_means
    }

    pub fn dimension(&self) -> usize {
        self.class_means[0].nrows()
    }

    pub fn distances(&self, c: &DMatrix<f64>) -> [f64; 2] {
        [airm_distance_from(&self.inv_sqrt[0], c), airm_distance_from(&self.inv_sqrt[1], c)]
    }

    /// Nearest class mean; ties go to class 0.
    pub fn predict(&self, c: &DMatrix<f64>) -> u8 {
        let [d0, d1] = self.distances(c);
        u8::from(d1 < d0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::session::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

impl From<MdmModel> for MdmFile {
    fn from(m: MdmModel) -> Self {
        MdmFile {
            dimension: m.dimension(),
            class_means: m.class_means.iter().map(row_major::to_rows).collect(),
        }
    }
}

impl TryFrom<MdmFile> for MdmModel {
    type Error = Error;

    fn try_from(file: MdmFile) -> Result<Self> {
        let [r0, r1] = <[Vec<Vec<f64>>; 2]>::try_from(file.class_means)
            .map_err(|_| Error::InvalidArgument("expected two class means".into()))?;
        let m0 = row_major::from_rows(&r0).map_err(Error::InvalidArgument)?;
        let m1 = row_major::from_rows(&r1).map_err(Error::InvalidArgument)?;
        if m0.nrows() != file.dimension {
            return Err(Error::Dimension(format!("class means are {} wide, header says {}", m0.nrows(), file.dimension)));
        }
        Self::new([m0, m1])
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn sample(c: DMatrix<f64>, label: u8) -> SpdSample {
        SpdSample { c, label, run_id: 1, trial_index: 0 }
    }

    #[test]
    fn predicts_nearest_mean() {
        let s = vec![
            sample(diag(&[1.0, 1.0]), 0),
            sample(diag(&[1.2, 0.9]), 0),
            sample(diag(&[4.0, 1.0]), 1),
            sample(diag(&[5.0, 1.1]), 1),
        ];
        let m = mdm_fit(&s, FrechetOptions::default()).unwrap();
        assert_eq!(m.predict(&diag(&[1.1, 1.0])), 0);
        assert_eq!(m.predict(&diag(&[4.5, 1.0])), 1);
        // Equidistant in the log domain: geometric midpoint of the means.
        let g0 = m.class_means()[0][(0, 0)];
        let g1 = m.class_means()[1][(0, 0)];
        let mid = diag(&[(g0 * g1).sqrt(), m.class_means()[0][(1, 1)]]);
        let [d0, d1] = m.distances(&mid);
        if (d0 - d1).abs() < 1e-12 {
            assert_eq!(m.predict(&mid), 0);
        }
    }

    #[test]
    fn single_class_fails() {
        let s = vec![sample(diag(&[1.0, 1.0]), 1)];
        assert!(matches!(mdm_fit(&s, FrechetOptions::default()), Err(Error::SingleClass(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = MdmModel::new([diag(&[1.0, 2.0]), diag(&[3.0, 0.5])]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mdm.json");
        m.save(&p).unwrap();
        assert_eq!(MdmModel::load(&p).unwrap(), m);
    }
}
