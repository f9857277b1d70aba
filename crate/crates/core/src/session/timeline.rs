use serde::{Deserialize, Serialize};

use super::EventKind;
use crate::error::{Error, Result};

/// Per-trial phase schedule, in seconds.
///
/// TrialStart, then rest, countdown (CountdownStart), go cue (GoCue),
/// robot start (RobotMoveStart), stop cue (StopCue), robot stop (RobotStop),
/// hold, return cue (ReturnCue), return, TrialEnd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTimeline {
    pub rest_s: f64,
    pub countdown_s: f64,
    /// GoCue to RobotMoveStart.
    pub bmi_latency_s: f64,
    /// RobotMoveStart to StopCue.
    pub move_to_stopcue_s: f64,
    /// StopCue to RobotStop.
    pub emi_latency_s: f64,
    pub hold_s: f64,
    pub return_s: f64,
}

impl Default for TrialTimeline {
    fn default() -> Self {
        Self {
            rest_s: 3.0,
            countdown_s: 3.0,
            bmi_latency_s: 1.0,
            move_to_stopcue_s: 2.2,
            emi_latency_s: 1.0,
            hold_s: 6.0,
            return_s: 3.2,
        }
    }
}

impl TrialTimeline {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rest_s,
            self.countdown_s,
            self.bmi_latency_s,
            self.move_to_stopcue_s,
            self.emi_latency_s,
            self.hold_s,
            self.return_s,
        ];
        if all.iter().all(|d| d.is_finite() && *d > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "timeline durations must be positive: {self:?}"
            )))
        }
    }

    pub fn trial_length_s(&self) -> f64 {
        self.rest_s
            + self.countdown_s
            + self.bmi_latency_s
            + self.move_to_stopcue_s
            + self.emi_latency_s
            + self.hold_s
            + self.return_s
    }

    /// Offset of each marker from TrialStart, in enum order.
    pub fn marker_offsets_s(&self) -> [(EventKind, f64); 8] {
        let countdown = self.rest_s;
        let go = countdown + self.countdown_s;
        let mv = go + self.bmi_latency_s;
        let stop = mv + self.move_to_stopcue_s;
        let robot_stop = stop + self.emi_latency_s;
        let ret = robot_stop + self.hold_s;
        let end = ret + self.return_s;
        [
            (EventKind::TrialStart, 0.0),
            (EventKind::CountdownStart, countdown),
            (EventKind::GoCue, go),
            (EventKind::RobotMoveStart, mv),
            (EventKind::StopCue, stop),
            (EventKind::RobotStop, robot_stop),
            (EventKind::ReturnCue, ret),
            (EventKind::TrialEnd, end),
        ]
    }

    pub fn offset_of(&self, kind: EventKind) -> f64 {
        self.marker_offsets_s()
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, t)| *t)
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_length_is_sum_of_phases() {
        let t = TrialTimeline::default();
        assert!((t.trial_length_s() - 19.4).abs() < 1e-12);
        let offs = t.marker_offsets_s();
        assert_eq!(offs[7].1, t.trial_length_s());
        assert!(offs.windows(2).all(|w| w[0].1 < w[1].1));
    }

    #[test]
    fn stop_cue_is_2_2s_into_the_movement() {
        let t = TrialTimeline::default();
        let d = t.offset_of(EventKind::StopCue) - t.offset_of(EventKind::RobotMoveStart);
        assert!((d - 2.2).abs() < 1e-12);
        assert!((t.offset_of(EventKind::GoCue) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_phase() {
        let t = TrialTimeline {
            hold_s: 0.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
        assert!(TrialTimeline::default().validate().is_ok());
    }
}
