use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::session::{ChannelKind, Recording};

/// Subtract the instantaneous cross-channel mean from every row.
pub fn common_average_reference(eeg: ArrayView2<f64>) -> Result<Array2<f64>> {
    if eeg.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "common average reference needs at least 2 channels, got {}",
            eeg.nrows()
        )));
    }
    let mean = eeg.mean_axis(Axis(0)).expect("non-empty");
    Ok(&eeg - &mean.insert_axis(Axis(0)))
}

/// Re-reference the EEG rows of a recording; EOG rows are left untouched.
pub fn reference_eeg(rec: &Recording) -> Result<Recording> {
    let idx = rec.indices_of(ChannelKind::Eeg);
    let referenced = common_average_reference(rec.select(ChannelKind::Eeg).view())?;
    let mut data = rec.data().to_owned();
    for (row, &i) in referenced.rows().into_iter().zip(&idx) {
        data.row_mut(i).assign(&row);
    }
    rec.with_data(data)
}
