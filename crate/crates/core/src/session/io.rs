//! Session directory format.
//!
//! ```text
//! <dir>/session.json          header: rate, channels, timeline, run files
//! <dir>/run_<k>.f64           little-endian f64, sample-major frames
//! <dir>/run_<k>.events.json   [{sample_index, kind, trial_index}, ...]
//! <dir>/calibration.f64       optional EOG calibration block
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ChannelInfo, EventKind, EventMarker, Recording, TrialTimeline};
use crate::error::{Error, Result};

pub const SESSION_HEADER: &str = "session.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunEntry {
    run_id: u32,
    data: String,
    events: String,
    n_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlockEntry {
    data: String,
    n_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    sampling_rate_hz: u32,
    channels: Vec<ChannelInfo>,
    timeline: TrialTimeline,
    runs: Vec<RunEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration: Option<BlockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEvent {
    sample_index: usize,
    kind: String,
    trial_index: usize,
}

/// A recording session: ordered runs plus optional EOG calibration data.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub timeline: TrialTimeline,
    pub runs: Vec<Recording>,
    pub calibration: Option<Recording>,
    /// Free-form provenance stored in the header (config hash, tool version).
    pub meta: Option<serde_json::Value>,
}

impl Session {
    pub fn new(timeline: TrialTimeline, runs: Vec<Recording>, calibration: Option<Recording>) -> Self {
        Self {
            timeline,
            runs,
            calibration,
            meta: None,
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.runs.first().map(|r| r.sample_rate()).unwrap_or(0)
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        self.runs.first().map(|r| r.channels()).unwrap_or(&[])
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let header_path = dir.join(SESSION_HEADER);
        if !header_path.exists() {
            let empty = fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .next()
                .is_none();
            return Err(if empty {
                Error::NoRuns(dir.to_path_buf())
            } else {
                Error::Header {
                    path: header_path,
                    reason: "missing".into(),
                }
            });
        }
        let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
        let header: Header = serde_json::from_str(&text).map_err(|e| Error::Header {
            path: header_path.clone(),
            reason: e.to_string(),
        })?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Header {
                path: header_path,
                reason: format!("unsupported format_version {}", header.format_version),
            });
        }
        if header.runs.is_empty() {
            return Err(Error::NoRuns(dir.to_path_buf()));
        }
        if header.sampling_rate_hz == 0 {
            return Err(Error::Header {
                path: header_path,
                reason: "sampling_rate_hz must be positive".into(),
            });
        }

        let mut entries = header.runs.clone();
        entries.sort_by_key(|r| r.run_id);
        let mut runs = Vec::with_capacity(entries.len());
        for entry in &entries {
            if entry.run_id == 0 {
                return Err(Error::Header {
                    path: header_path.clone(),
                    reason: "run_id must be >= 1".into(),
                });
            }
            let data = read_block(&dir.join(&entry.data), header.channels.len(), entry.n_samples)?;
            let events = read_events(&dir.join(&entry.events))?;
            runs.push(Recording::new(
                header.sampling_rate_hz,
                header.channels.clone(),
                data,
                events,
                entry.run_id,
            )?);
        }
        let calibration = match &header.calibration {
            Some(block) => Some(Recording::new(
                header.sampling_rate_hz,
                header.channels.clone(),
                read_block(&dir.join(&block.data), header.channels.len(), block.n_samples)?,
                Vec::new(),
                0,
            )?),
            None => None,
        };
        Ok(Self {
            timeline: header.timeline,
            runs,
            calibration,
            meta: header.meta,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let first = self.runs.first().ok_or_else(|| Error::NoRuns(dir.to_path_buf()))?;
        for r in self.runs.iter().chain(self.calibration.as_ref()) {
            if r.channels() != first.channels() || r.sample_rate() != first.sample_rate() {
                return Err(Error::InvalidRecording(format!(
                    "run {} channel layout differs from run {}",
                    r.run_id(),
                    first.run_id()
                )));
            }
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut entries = Vec::new();
        for r in &self.runs {
            let data = format!("run_{}.f64", r.run_id());
            let events = format!("run_{}.events.json", r.run_id());
            write_block(&dir.join(&data), r)?;
            let raw: Vec<RawEvent> = r
                .events()
                .iter()
                .map(|e| RawEvent {
                    sample_index: e.sample_index,
                    kind: e.kind.name().to_string(),
                    trial_index: e.trial_index,
                })
                .collect();
            write_json(&dir.join(&events), &raw)?;
            entries.push(RunEntry {
                run_id: r.run_id(),
                data,
                events,
                n_samples: r.n_samples(),
            });
        }
        let calibration = match &self.calibration {
            Some(c) => {
                let data = "calibration.f64".to_string();
                write_block(&dir.join(&data), c)?;
                Some(BlockEntry {
                    data,
                    n_samples: c.n_samples(),
                })
            }
            None => None,
        };
        let header = Header {
            format_version: FORMAT_VERSION,
            sampling_rate_hz: first.sample_rate(),
            channels: first.channels().to_vec(),
            timeline: self.timeline,
            runs: entries,
            calibration,
            meta: self.meta.clone(),
        };
        write_json(&dir.join(SESSION_HEADER), &header)
    }
}

/// Load the runs of a session directory, ordered by run id.
pub fn load_session(dir: impl AsRef<Path>) -> Result<Vec<Recording>> {
    Ok(Session::load(dir)?.runs)
}

/// Save runs with the default timeline and no calibration block.
pub fn save_session(recordings: &[Recording], dir: impl AsRef<Path>) -> Result<()> {
    Session::new(TrialTimeline::default(), recordings.to_vec(), None).save(dir)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Write a channel × sample matrix as interleaved little-endian frames.
pub(crate) fn write_frames(path: &Path, data: &ndarray::ArrayView2<f64>) -> Result<()> {
    let (n_ch, n) = data.dim();
    let mut buf = Vec::with_capacity(n_ch * n * 8);
    for s in 0..n {
        for c in 0..n_ch {
            buf.extend_from_slice(&data[[c, s]].to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn write_block(path: &Path, rec: &Recording) -> Result<()> {
    write_frames(path, &rec.data())
}

pub(crate) fn read_frames(path: &Path, n_channels: usize, n_samples: usize) -> Result<Array2<f64>> {
    read_block(path, n_channels, n_samples)
}

fn read_block(path: &Path, n_channels: usize, n_samples: usize) -> Result<Array2<f64>> {
    let expected = (n_channels * n_samples * 8) as u64;
    let found = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if found != expected {
        return Err(Error::DataLength {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut data = Array2::zeros((n_channels, n_samples));
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        data[[i % n_channels, i / n_channels]] = v;
    }
    Ok(data)
}

fn read_events(path: &PathBuf) -> Result<Vec<EventMarker>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawEvent> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    raw.into_iter()
        .enumerate()
        .map(|(index, r)| {
            let kind = EventKind::from_name(&r.kind).ok_or_else(|| Error::UnknownEventKind {
                path: path.clone(),
                kind: r.kind.clone(),
                index,
            })?;
            Ok(EventMarker {
                sample_index: r.sample_index,
                kind,
                trial_index: r.trial_index,
            })
        })
        .collect()
}
