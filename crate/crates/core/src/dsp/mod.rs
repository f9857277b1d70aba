//! Butterworth IIR design, causal and zero-phase filtering, common-average
//! referencing and Welch spectral estimation.

mod butterworth;
mod filter;
mod reference;
mod welch;

pub use butterworth::design_butterworth;
pub use filter::{filter_causal, filter_zero_phase, DesignMeta, FilterKind, FilterState, IirFilter, Section};
pub use reference::{common_average_reference, reference_eeg};
pub use welch::{welch_psd, Psd, WelchEstimator};
