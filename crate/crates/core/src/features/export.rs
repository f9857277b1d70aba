//! CSV (long format) and binary exports for spectrograms and feature matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Spectrogram};
use crate::error::{Error, Result};
use crate::session::{read_frames, write_frames, write_json};

fn comments(w: &mut impl Write, provenance: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in provenance {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// `channel,freq_hz,time_s,value`, one line per cell.
pub fn write_spectrogram_csv(w: &mut impl Write, spec: &Spectrogram, provenance: &[(String, String)]) -> std::io::Result<()> {
    comments(w, provenance)?;
    writeln!(w, "channel,freq_hz,time_s,value")?;
    for ((c, f, t), v) in spec.values.indexed_iter() {
        writeln!(w, "{},{},{},{}", spec.channels[c], spec.freqs_hz[f], spec.times_s[t], v)?;
    }
    Ok(())
}

/// `sample,run_id,trial_index,window_index,label,channel,freq_hz,value`.
pub fn write_feature_csv(w: &mut impl Write, fm: &FeatureMatrix, provenance: &[(String, String)]) -> std::io::Result<()> {
    comments(w, provenance)?;
    writeln!(w, "sample,run_id,trial_index,window_index,label,channel,freq_hz,value")?;
    for (i, row) in fm.x.rows().into_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (ch, f) = &fm.feature_index[j];
            writeln!(
                w,
                "{i},{},{},{},{},{ch},{f},{v}",
                fm.run_ids[i], fm.trial_indices[i], fm.window_indices[i], fm.labels[i]
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FeatureSidecar {
    n_samples: usize,
    feature_index: Vec<(String, f64)>,
    labels: Vec<u8>,
    run_ids: Vec<u32>,
    trial_indices: Vec<usize>,
    window_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

/// Write `<stem>.f64` (sample-major little-endian frames, one value per
/// feature) and `<stem>.json` (feature layout and per-sample metadata).
pub fn write_feature_binary(stem: &Path, fm: &FeatureMatrix, meta: Option<serde_json::Value>) -> Result<()> {
    write_frames(&stem.with_extension("f64"), &fm.x.t())?;
    let side = FeatureSidecar {
        n_samples: fm.n_samples(),
        feature_index: fm.feature_index.clone(),
        labels: fm.labels.clone(),
        run_ids: fm.run_ids.clone(),
        trial_indices: fm.trial_indices.clone(),
        window_indices: fm.window_indices.clone(),
        meta,
    };
    write_json(&stem.with_extension("json"), &side)
}

pub fn read_feature_binary(stem: &Path) -> Result<FeatureMatrix> {
    let json = stem.with_extension("json");
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let side: FeatureSidecar = serde_json::from_str(&text).map_err(|e| Error::json(&json, e))?;
    let xt = read_frames(&stem.with_extension("f64"), side.feature_index.len(), side.n_samples)?;
    Ok(FeatureMatrix {
        x: xt.reversed_axes().as_standard_layout().to_owned(),
        feature_index: side.feature_index,
        labels: side.labels,
        run_ids: side.run_ids,
        trial_indices: side.trial_indices,
        window_indices: side.window_indices,
    })
}
