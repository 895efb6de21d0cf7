//! Binary misclassification targets: did the simulated stance at a survey
//! wave differ from the recorded answer?

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SimulationTrace;
use crate::data::{OpinionRecord, Question, Stance, Timestamp, Wave, WaveCalendar, FIRST_WAVE};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("wave {wave} at {timestamp} lies outside the trace range [{start}, {end}]")]
    WaveOutOfRange {
        wave: Wave,
        timestamp: Timestamp,
        start: Timestamp,
        end: Timestamp,
    },
    #[error("participant {0:?} is not part of the trace")]
    UnknownParticipant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisclassificationSample {
    pub participant_id: String,
    pub question: Question,
    pub wave: Wave,
    /// True when the model mispredicted.
    pub target: bool,
    pub ground_truth: Stance,
    pub predicted: Stance,
}

/// One sample per `(participant, trace question, wave >= 2)` with a recorded answer.
/// Wave 1 seeds the simulation and is never a target.
pub fn label_mispredictions(
    trace: &SimulationTrace,
    opinions: &[OpinionRecord],
    wave_times: &WaveCalendar,
) -> Result<Vec<MisclassificationSample>, LabelError> {
    let index: HashMap<&str, usize> = trace
        .participants
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut out = Vec::new();
    for o in opinions {
        if o.question != trace.question || o.wave <= FIRST_WAVE || o.stance.is_missing() {
            continue;
        }
        let &pi = index
            .get(o.participant_id.as_str())
            .ok_or_else(|| LabelError::UnknownParticipant(o.participant_id.clone()))?;
        let t = wave_times.time(o.wave).expect("calendars hold all waves");
        let predicted = trace.state_at(pi, t).ok_or(LabelError::WaveOutOfRange {
            wave: o.wave,
            timestamp: t,
            start: trace.start,
            end: trace.end,
        })?;
        out.push(MisclassificationSample {
            participant_id: o.participant_id.clone(),
            question: o.question,
            wave: o.wave,
            target: predicted != o.stance,
            ground_truth: o.stance,
            predicted,
        });
    }
    out.sort_by(|a, b| (&a.participant_id, a.wave).cmp(&(&b.participant_id, b.wave)));
    Ok(out)
}

/// `participant,question,wave,predicted,truth,target` rows.
pub fn samples_csv(samples: &[MisclassificationSample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["participant", "question", "wave", "predicted", "truth", "target"])
        .expect("in-memory write");
    for s in samples {
        w.write_record([
            s.participant_id.as_str(),
            s.question.shortcode(),
            &s.wave.to_string(),
            s.predicted.as_str(),
            s.ground_truth.as_str(),
            if s.target { "1" } else { "0" },
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
