//! Recordings, event markers, the trial timeline and epoch slicing.

mod epochs;
mod io;
mod timeline;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use epochs::{extract_epochs, extract_epochs_with, Condition, Epoch, EpochLayout, EpochSet, SkippedTrial};
pub use io::{load_session, save_session, Session, SESSION_HEADER};
pub(crate) use io::{read_frames, write_frames, write_json};
pub use timeline::TrialTimeline;

/// Whether a channel carries scalp EEG or electro-oculogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "EOG")]
    Eog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub label: String,
    pub kind: ChannelKind,
}

impl ChannelInfo {
    pub fn eeg(label: &str) -> Self {
        Self {
            label: label.to_string(),
            kind: ChannelKind::Eeg,
        }
    }

    pub fn eog(label: &str) -> Self {
        Self {
            label: label.to_string(),
            kind: ChannelKind::Eog,
        }
    }
}

/// The 22 scalp locations of the montage, in header order.
pub const EEG_MONTAGE: [&str; 22] = [
    "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "C3", "Cz", "C4", "CP5", "CP1", "CP2",
    "CP6", "P7", "P3", "Pz", "P4", "P8", "POz",
];

/// Two temporal electrodes and one above the left eye.
pub const EOG_MONTAGE: [&str; 3] = ["EOGL", "EOGR", "EOGV"];

/// Default channel list: the EEG montage followed by the EOG channels.
pub fn default_channels() -> Vec<ChannelInfo> {
    EEG_MONTAGE
        .iter()
        .map(|l| ChannelInfo::eeg(l))
        .chain(EOG_MONTAGE.iter().map(|l| ChannelInfo::eog(l)))
        .collect()
}

/// Cue and phase markers, in the order they occur within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    TrialStart,
    CountdownStart,
    GoCue,
    RobotMoveStart,
    StopCue,
    RobotStop,
    ReturnCue,
    TrialEnd,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::TrialStart,
        EventKind::CountdownStart,
        EventKind::GoCue,
        EventKind::RobotMoveStart,
        EventKind::StopCue,
        EventKind::RobotStop,
        EventKind::ReturnCue,
        EventKind::TrialEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::TrialStart => "TrialStart",
            EventKind::CountdownStart => "CountdownStart",
            EventKind::GoCue => "GoCue",
            EventKind::RobotMoveStart => "RobotMoveStart",
            EventKind::StopCue => "StopCue",
            EventKind::RobotStop => "RobotStop",
            EventKind::ReturnCue => "ReturnCue",
            EventKind::TrialEnd => "TrialEnd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub sample_index: usize,
    pub kind: EventKind,
    pub trial_index: usize,
}

/// One continuous multichannel block (a run, or the EOG calibration segment).
///
/// `data` is channel × sample in microvolts. Run recordings carry
/// `run_id >= 1`; the calibration segment uses `run_id == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sample_rate: u32,
    channels: Vec<ChannelInfo>,
    data: Array2<f64>,
    events: Vec<EventMarker>,
    run_id: u32,
}

impl Recording {
    pub fn new(
        sample_rate: u32,
        channels: Vec<ChannelInfo>,
        data: Array2<f64>,
        events: Vec<EventMarker>,
        run_id: u32,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRecording("sample rate must be positive".into()));
        }
        if data.nrows() != channels.len() {
            return Err(Error::InvalidRecording(format!(
                "{} data rows for {} channels",
                data.nrows(),
                channels.len()
            )));
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::InvalidRecording(format!(
                    "duplicate channel label {}",
                    c.label
                )));
            }
        }
        let n = data.ncols();
        let mut prev = 0usize;
        for (i, e) in events.iter().enumerate() {
            if e.sample_index >= n {
                return Err(Error::InvalidRecording(format!(
                    "event {i} ({}) at sample {} outside [0, {n})",
                    e.kind.name(),
                    e.sample_index
                )));
            }
            if e.sample_index < prev {
                return Err(Error::InvalidRecording(format!(
                    "event {i} at sample {} precedes previous event at {prev}",
                    e.sample_index
                )));
            }
            prev = e.sample_index;
        }
        Ok(Self {
            sample_rate,
            channels,
            data,
            events,
            run_id,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn events(&self) -> &[EventMarker] {
        &self.events
    }

    pub fn run_id(&self) -> u32 {
        self.run_id
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn channel(&self, label: &str) -> Option<ArrayView1<'_, f64>> {
        self.channel_index(label).map(|i| self.data.row(i))
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.label == label)
    }

    pub fn indices_of(&self, kind: ChannelKind) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn labels_of(&self, kind: ChannelKind) -> Vec<String> {
        self.channels
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.label.clone())
            .collect()
    }

    /// Rows of the given kind, copied into a new matrix.
    pub fn select(&self, kind: ChannelKind) -> Array2<f64> {
        self.data.select(Axis(0), &self.indices_of(kind))
    }

    /// Replace the signal block, keeping channels, markers and run id.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::Dimension(format!(
                "replacement data {:?} does not match recording {:?}",
                data.dim(),
                self.data.dim()
            )));
        }
        Ok(Self {
            data,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> Self {
        Self {
            sample_rate: self.sample_rate,
            channels: self.channels.clone(),
            data: Array2::zeros((0, 0)),
            events: self.events.clone(),
            run_id: self.run_id,
        }
    }

    /// Convert a duration to the nearest whole number of samples.
    pub fn samples_for(&self, seconds: f64) -> isize {
        (seconds * self.sample_rate as f64).round() as isize
    }

    pub fn into_parts(self) -> (u32, Vec<ChannelInfo>, Array2<f64>, Vec<EventMarker>, u32) {
        (
            self.sample_rate,
            self.channels,
            self.data,
            self.events,
            self.run_id,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(events: Vec<EventMarker>) -> Result<Recording> {
        Recording::new(
            4,
            vec![ChannelInfo::eeg("C3"), ChannelInfo::eog("EOGV")],
            Array2::zeros((2, 10)),
            events,
            1,
        )
    }

    #[test]
    fn rejects_out_of_range_event() {
        let e = EventMarker {
            sample_index: 10,
            kind: EventKind::GoCue,
            trial_index: 0,
        };
        assert!(matches!(tiny(vec![e]), Err(Error::InvalidRecording(_))));
    }

    #[test]
    fn rejects_decreasing_events() {
        let a = EventMarker {
            sample_index: 5,
            kind: EventKind::TrialStart,
            trial_index: 0,
        };
        let b = EventMarker {
            sample_index: 4,
            ..a
        };
        assert!(tiny(vec![a, b]).is_err());
        assert!(tiny(vec![b, a]).is_ok());
    }

    #[test]
    fn rejects_duplicate_labels() {
        let r = Recording::new(
            4,
            vec![ChannelInfo::eeg("C3"), ChannelInfo::eeg("C3")],
            Array2::zeros((2, 4)),
            vec![],
            1,
        );
        assert!(r.is_err());
    }

    #[test]
    fn event_names_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(EventKind::from_name(k.name()), Some(k));
        }
        assert_eq!(EventKind::from_name("Blink"), None);
    }

    #[test]
    fn default_montage_partition() {
        let ch = default_channels();
        assert_eq!(ch.len(), 25);
        assert_eq!(ch.iter().filter(|c| c.kind == ChannelKind::Eeg).count(), 22);
    }
}
