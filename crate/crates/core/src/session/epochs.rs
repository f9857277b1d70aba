use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EventKind, Recording, TrialTimeline};

/// The four labeled epoch types of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "bMI")]
    Bmi,
    #[serde(rename = "dMI")]
    Dmi,
    #[serde(rename = "eMI")]
    Emi,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Rs, Condition::Bmi, Condition::Dmi, Condition::Emi];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Rs => "RS",
            Condition::Bmi => "bMI",
            Condition::Dmi => "dMI",
            Condition::Emi => "eMI",
        }
    }
}

/// Half-open sample interval `[start_sample, start_sample + length_samples)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub condition: Condition,
    pub start_sample: usize,
    pub length_samples: usize,
    pub trial_index: usize,
    pub run_id: u32,
}

impl Epoch {
    pub fn end_sample(&self) -> usize {
        self.start_sample + self.length_samples
    }
}

/// Epoch placement relative to the cue markers.
///
/// RS ends at CountdownStart, bMI starts at GoCue, eMI starts at StopCue,
/// and dMI starts `dmi_offset_s` relative to StopCue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpochLayout {
    pub epoch_s: f64,
    pub dmi_offset_s: f64,
}

impl Default for EpochLayout {
    fn default() -> Self {
        Self {
            epoch_s: 1.0,
            dmi_offset_s: -1.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub trial_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochSet {
    pub epochs: Vec<Epoch>,
    pub skipped: Vec<SkippedTrial>,
}

impl EpochSet {
    pub fn of(&self, condition: Condition) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(move |e| e.condition == condition)
    }
}

pub fn extract_epochs(rec: &Recording, timeline: &TrialTimeline) -> EpochSet {
    extract_epochs_with(rec, timeline, &EpochLayout::default())
}

/// Slice each trial into its RS, bMI, dMI and eMI epochs.
///
/// Trials lacking a required marker, or whose epochs would leave the trial
/// bounds, are skipped and listed in [`EpochSet::skipped`].
pub fn extract_epochs_with(rec: &Recording, timeline: &TrialTimeline, layout: &EpochLayout) -> EpochSet {
    let mut trials: BTreeMap<usize, BTreeMap<EventKind, usize>> = BTreeMap::new();
    for e in rec.events() {
        trials
            .entry(e.trial_index)
            .or_default()
            .entry(e.kind)
            .or_insert(e.sample_index);
    }

    let len = rec.samples_for(layout.epoch_s);
    let dmi = rec.samples_for(layout.dmi_offset_s);
    let trial_len = rec.samples_for(timeline.trial_length_s());
    let mut out = EpochSet::default();

    for (&trial_index, markers) in &trials {
        let get = |k: EventKind| markers.get(&k).map(|&s| s as isize);
        let (Some(countdown), Some(go), Some(stop)) =
            (get(EventKind::CountdownStart), get(EventKind::GoCue), get(EventKind::StopCue))
        else {
            let missing: Vec<_> = [EventKind::CountdownStart, EventKind::GoCue, EventKind::StopCue]
                .into_iter()
                .filter(|k| !markers.contains_key(k))
                .map(|k| k.name())
                .collect();
            log::warn!("run {} trial {trial_index}: missing {missing:?}", rec.run_id());
            out.skipped.push(SkippedTrial {
                trial_index,
                reason: format!("missing markers {}", missing.join(", ")),
            });
            continue;
        };
        let start = get(EventKind::TrialStart)
            .unwrap_or_else(|| countdown - rec.samples_for(timeline.rest_s));
        let end = get(EventKind::TrialEnd)
            .unwrap_or(start + trial_len)
            .min(rec.n_samples() as isize);

        let spans = [
            (Condition::Rs, countdown - len),
            (Condition::Bmi, go),
            (Condition::Dmi, stop + dmi),
            (Condition::Emi, stop),
        ];
        if let Some((c, s)) = spans.iter().find(|(_, s)| *s < start || *s + len > end) {
            out.skipped.push(SkippedTrial {
                trial_index,
                reason: format!("{} epoch at sample {s} leaves trial [{start}, {end})", c.name()),
            });
            continue;
        }
        out.epochs.extend(spans.iter().map(|&(condition, s)| Epoch {
            condition,
            start_sample: s as usize,
            length_samples: len as usize,
            trial_index,
            run_id: rec.run_id(),
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;
    use crate::session::{ChannelInfo, EventMarker};

    fn markers_for(trials: usize, fs: u32, tl: &TrialTimeline) -> (Vec<EventMarker>, usize) {
        let trial_len = (tl.trial_length_s() * fs as f64).round() as usize;
        let lead = fs as usize;
        let mut ev = Vec::new();
        for t in 0..trials {
            let base = lead + t * trial_len;
            for (k, off) in tl.marker_offsets_s() {
                ev.push(EventMarker {
                    sample_index: base + (off * fs as f64).round() as usize,
                    kind: k,
                    trial_index: t,
                });
            }
        }
        (ev, lead * 2 + trials * trial_len)
    }

    fn recording(trials: usize) -> Recording {
        let tl = TrialTimeline::default();
        let (ev, n) = markers_for(trials, 512, &tl);
        Recording::new(512, vec![ChannelInfo::eeg("C3")], Array2::zeros((1, n)), ev, 3).unwrap()
    }

    #[test]
    fn twenty_trials_give_eighty_epochs() {
        let rec = recording(20);
        let set = extract_epochs(&rec, &TrialTimeline::default());
        assert_eq!(set.epochs.len(), 80);
        assert!(set.skipped.is_empty());
        for c in Condition::ALL {
            assert_eq!(set.of(c).count(), 20);
        }
        assert!(set.epochs.iter().all(|e| e.length_samples == 512 && e.run_id == 3));
    }

    #[test]
    fn epochs_anchor_on_cues() {
        let rec = recording(2);
        let set = extract_epochs(&rec, &TrialTimeline::default());
        let find = |k: EventKind, t: usize| {
            rec.events()
                .iter()
                .find(|e| e.kind == k && e.trial_index == t)
                .unwrap()
                .sample_index
        };
        for e in &set.epochs {
            let t = e.trial_index;
            match e.condition {
                Condition::Rs => assert_eq!(e.end_sample(), find(EventKind::CountdownStart, t)),
                Condition::Bmi => assert_eq!(e.start_sample, find(EventKind::GoCue, t)),
                Condition::Dmi => assert_eq!(e.start_sample, find(EventKind::StopCue, t) - 640),
                Condition::Emi => assert_eq!(e.start_sample, find(EventKind::StopCue, t)),
            }
        }
    }

    #[test]
    fn same_condition_epochs_never_overlap() {
        let rec = recording(5);
        let set = extract_epochs(&rec, &TrialTimeline::default());
        for c in Condition::ALL {
            let v: Vec<_> = set.of(c).collect();
            for w in v.windows(2) {
                assert!(w[0].end_sample() <= w[1].start_sample);
            }
        }
    }

    #[test]
    fn trial_with_missing_marker_is_skipped() {
        let tl = TrialTimeline::default();
        let (mut ev, n) = markers_for(3, 512, &tl);
        ev.retain(|e| !(e.trial_index == 1 && e.kind == EventKind::GoCue));
        let rec = Recording::new(512, vec![ChannelInfo::eeg("C3")], Array2::zeros((1, n)), ev, 1).unwrap();
        let set = extract_epochs(&rec, &tl);
        assert_eq!(set.epochs.len(), 8);
        assert_eq!(set.skipped.len(), 1);
        assert_eq!(set.skipped[0].trial_index, 1);
        assert!(set.skipped[0].reason.contains("GoCue"));
    }
}
