//! Fisher-score ranking, diagonal LDA and the Riemannian minimum-distance-
//! to-mean classifier with online re-centering.

mod dlda;
mod fisher;
mod mdm;
mod recenter;
pub mod spd;

pub use dlda::{dlda_fit, DldaModel};
pub use fisher::{fisher_scores, fisher_scores_of, FisherRanking};
pub use mdm::{mdm_fit, MdmModel};
pub use recenter::{recenter_batch, IncrementalRecenter, Recenter, RecenterState};
pub use spd::{airm_distance, epoch_covariance, frechet_mean, FrechetOptions, SpdSample};
