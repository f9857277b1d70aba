//! Two-stage motor-imagery decoding for exoskeleton control.
//!
//! Detects motor-imagery onset (rest vs. begin-MI) and offset (maintain-MI
//! vs. end-MI) from EEG recorded during passive arm movement. The crate
//! covers the full offline and pseudo-online chain:
//!
//! - [`session`]: recordings, trial timeline, epoch slicing, session files
//! - [`dsp`]: Butterworth SOS filters, common-average reference, Welch PSD
//! - [`artifact`]: least-squares EOG regression
//! - [`features`]: sliding spectrograms, ERD/ERS, labeled feature matrices
//! - [`classifiers`]: Fisher ranking, diagonal LDA, Riemannian MDM with re-centering
//! - [`evaluation`]: LORO-CV, chance level, time-resolved accuracy, causal replay, Mann–Whitney contrasts
//! - [`synth`]: ground-truth synthetic sessions
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default).

pub mod error;
pub mod par;
pub mod session;
pub mod dsp;
pub mod artifact;
pub mod features;
pub mod classifiers;
pub mod config;
pub mod evaluation;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
