//! Dataset schemas, ingestion, minority derivation and synthetic populations.

mod codebook;
mod io;
mod minority;
mod model;
pub mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

pub use codebook::{AttributeKind, Codebook};
pub use io::{load_dataset, save_dataset, serialize_dataset, DatasetSource, Format};
pub use minority::{
    derive_minorities, income_bracket_index, Minority, MinorityMembership, INCOME_BRACKETS, INCOME_UNSURE,
};
pub use model::*;
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticOutput};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("unknown participant id {id:?} referenced by {context}")]
    Referential { id: String, context: String },
    #[error("duplicate opinion row for ({participant}, {question}, wave {wave})")]
    DuplicateOpinion {
        participant: String,
        question: Question,
        wave: Wave,
    },
    #[error("duplicate participant id {0:?}")]
    DuplicateParticipant(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid wave calendar: {0}")]
    Calendar(String),
    #[error("codebook {path}: {message}")]
    Codebook { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("infeasible synthetic config: {0}")]
    Infeasible(String),
}

/// A communication event addressed by participant index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedEvent {
    pub source: usize,
    pub target: usize,
    pub timestamp: Timestamp,
    pub channel: Channel,
}

/// A validated, immutable dataset.
///
/// Participants are sorted by id, events by `(timestamp, source, target, channel)`
/// and opinions by `(participant, question, wave)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    participants: Vec<Participant>,
    events: Vec<CommEvent>,
    opinions: Vec<OpinionRecord>,
    calendar: WaveCalendar,
    codebook: Codebook,
    provenance: Provenance,
    index: HashMap<String, usize>,
    stances: BTreeMap<(usize, Question, Wave), Stance>,
}

impl Dataset {
    pub fn new(
        mut participants: Vec<Participant>,
        mut events: Vec<CommEvent>,
        mut opinions: Vec<OpinionRecord>,
        calendar: WaveCalendar,
        codebook: Codebook,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        participants.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(participants.len());
        for (i, p) in participants.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(DataError::DuplicateParticipant(p.id.clone()));
            }
        }
        for e in &events {
            for id in [&e.source, &e.target] {
                if !index.contains_key(id) {
                    return Err(DataError::Referential {
                        id: id.clone(),
                        context: "events".into(),
                    });
                }
            }
            if e.source == e.target {
                return Err(DataError::InvalidEvent(format!(
                    "self-loop on {:?} at {}",
                    e.source, e.timestamp
                )));
            }
            if e.timestamp < 0 {
                return Err(DataError::InvalidEvent(format!(
                    "negative timestamp {} on {} -> {}",
                    e.timestamp, e.source, e.target
                )));
            }
        }
        events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

        let mut stances = BTreeMap::new();
        for o in &opinions {
            let Some(&pi) = index.get(&o.participant_id) else {
                return Err(DataError::Referential {
                    id: o.participant_id.clone(),
                    context: "opinions".into(),
                });
            };
            if !is_valid_wave(o.wave as i64) {
                return Err(DataError::Calendar(format!("opinion wave {} out of range", o.wave)));
            }
            if stances.insert((pi, o.question, o.wave), o.stance).is_some() {
                return Err(DataError::DuplicateOpinion {
                    participant: o.participant_id.clone(),
                    question: o.question,
                    wave: o.wave,
                });
            }
        }
        opinions.sort_by(|a, b| (&a.participant_id, a.question, a.wave).cmp(&(&b.participant_id, b.question, b.wave)));

        Ok(Dataset {
            participants,
            events,
            opinions,
            calendar,
            codebook,
            provenance,
            index,
            stances,
        })
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn events(&self) -> &[CommEvent] {
        &self.events
    }

    pub fn opinions(&self) -> &[OpinionRecord] {
        &self.opinions
    }

    pub fn calendar(&self) -> &WaveCalendar {
        &self.calendar
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn participant_ids(&self) -> impl Iterator<Item = &str> {
        self.participants.iter().map(|p| p.id.as_str())
    }

    /// Recorded stance, `Missing` when no row exists.
    pub fn stance(&self, participant: usize, question: Question, wave: Wave) -> Stance {
        self.stances
            .get(&(participant, question, wave))
            .copied()
            .unwrap_or(Stance::Missing)
    }

    /// Events with participant indices, in timestamp order.
    pub fn indexed_events(&self) -> Vec<IndexedEvent> {
        self.events
            .iter()
            .map(|e| IndexedEvent {
                source: self.index[&e.source],
                target: self.index[&e.target],
                timestamp: e.timestamp,
                channel: e.channel,
            })
            .collect()
    }

    /// Questions with at least one opinion row.
    pub fn questions(&self) -> Vec<Question> {
        let seen: HashSet<Question> = self.opinions.iter().map(|o| o.question).collect();
        Question::ALL.into_iter().filter(|q| seen.contains(q)).collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.participants.len(), self.events.len(), self.opinions.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> WaveCalendar {
        WaveCalendar::evenly_spaced(0, 500)
    }

    #[test]
    fn rejects_dangling_and_duplicates() {
        let ps = vec![Participant::new("p1"), Participant::new("p2")];
        let ev = vec![CommEvent {
            source: "p1".into(),
            target: "X99".into(),
            timestamp: 3,
            channel: Channel::Call,
        }];
        let err = Dataset::new(ps.clone(), ev, vec![], cal(), Codebook::default(), Provenance::Real).unwrap_err();
        assert!(err.to_string().contains("X99"));

        let op = OpinionRecord {
            participant_id: "p1".into(),
            question: Question::Euthanasia,
            wave: 2,
            stance: Stance::A,
        };
        let err = Dataset::new(
            ps.clone(),
            vec![],
            vec![op.clone(), op],
            cal(),
            Codebook::default(),
            Provenance::Real,
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DuplicateOpinion { wave: 2, .. }));

        let loop_ev = CommEvent {
            source: "p1".into(),
            target: "p1".into(),
            timestamp: 1,
            channel: Channel::Text,
        };
        assert!(matches!(
            Dataset::new(ps, vec![loop_ev], vec![], cal(), Codebook::default(), Provenance::Real),
            Err(DataError::InvalidEvent(_))
        ));
    }

    #[test]
    fn events_sorted_with_stable_ties() {
        let ps = vec![Participant::new("a"), Participant::new("b"), Participant::new("c")];
        let mk = |s: &str, t: &str, ts, ch| CommEvent {
            source: s.into(),
            target: t.into(),
            timestamp: ts,
            channel: ch,
        };
        let ev = vec![
            mk("b", "c", 5, Channel::Text),
            mk("a", "b", 5, Channel::Text),
            mk("a", "b", 5, Channel::Call),
            mk("c", "a", 1, Channel::Call),
        ];
        let ds = Dataset::new(ps, ev, vec![], cal(), Codebook::default(), Provenance::Real).unwrap();
        let keys: Vec<_> = ds
            .events()
            .iter()
            .map(|e| (e.timestamp, e.source.as_str(), e.channel))
            .collect();
        assert_eq!(
            keys,
            vec![
                (1, "c", Channel::Call),
                (5, "a", Channel::Call),
                (5, "a", Channel::Text),
                (5, "b", Channel::Text)
            ]
        );
    }

    #[test]
    fn question_registry() {
        assert_eq!(Question::ALL.len(), 6);
        let codes: HashSet<_> = Question::ALL.iter().map(|q| q.shortcode()).collect();
        assert_eq!(codes.len(), 6);
        assert_eq!(Question::Marijuana.typology(), Typology::Polarized);
        assert_eq!(Question::Jobguar.typology(), Typology::Consensus);
        assert_eq!(Question::Fswelfare.typology(), Typology::Apathetic);
        assert_eq!(
            "toomucheqrights".parse::<Question>().unwrap(),
            Question::Toomucheqrights
        );
        assert!("abortion".parse::<Question>().is_err());
    }
}
