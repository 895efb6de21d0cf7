//! Core record types shared by every stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Survey wave index, 1..=6.
pub type Wave = u8;
/// Seconds since the Unix epoch.
pub type Timestamp = i64;

pub const FIRST_WAVE: Wave = 1;
pub const LAST_WAVE: Wave = 6;

pub fn waves() -> impl Iterator<Item = Wave> {
    FIRST_WAVE..=LAST_WAVE
}

pub fn is_valid_wave(w: i64) -> bool {
    (FIRST_WAVE as i64..=LAST_WAVE as i64).contains(&w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Typology {
    Consensus,
    Polarized,
    Apathetic,
}

/// The six worldview questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Question {
    Euthanasia,
    Fssocsec,
    Fswelfare,
    Jobguar,
    Marijuana,
    Toomucheqrights,
}

impl Question {
    pub const ALL: [Question; 6] = [
        Question::Euthanasia,
        Question::Fssocsec,
        Question::Fswelfare,
        Question::Jobguar,
        Question::Marijuana,
        Question::Toomucheqrights,
    ];

    pub fn shortcode(self) -> &'static str {
        match self {
            Question::Euthanasia => "euthanasia",
            Question::Fssocsec => "fssocsec",
            Question::Fswelfare => "fswelfare",
            Question::Jobguar => "jobguar",
            Question::Marijuana => "marijuana",
            Question::Toomucheqrights => "toomucheqrights",
        }
    }

    pub fn typology(self) -> Typology {
        match self {
            Question::Euthanasia | Question::Jobguar => Typology::Consensus,
            Question::Marijuana => Typology::Polarized,
            Question::Fssocsec | Question::Fswelfare | Question::Toomucheqrights => Typology::Apathetic,
        }
    }

    pub fn index(self) -> usize {
        Question::ALL.iter().position(|q| *q == self).unwrap()
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.shortcode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown question shortcode {0:?}")]
pub struct UnknownQuestion(pub String);

impl FromStr for Question {
    type Err = UnknownQuestion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Question::ALL
            .into_iter()
            .find(|q| q.shortcode() == s.trim())
            .ok_or_else(|| UnknownQuestion(s.to_string()))
    }
}

/// A discrete opinion as recorded in a survey or produced by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stance {
    A,
    B,
    AB,
    Missing,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::A => "A",
            Stance::B => "B",
            Stance::AB => "AB",
            Stance::Missing => "Missing",
        }
    }

    pub fn is_missing(self) -> bool {
        self == Stance::Missing
    }

    /// Parse one of the canonical tokens; the empty string means `Missing`.
    pub fn parse_canonical(s: &str) -> Option<Stance> {
        match s.trim() {
            "A" => Some(Stance::A),
            "B" => Some(Stance::B),
            "AB" => Some(Stance::AB),
            "Missing" | "" => Some(Stance::Missing),
            _ => None,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Call,
    Text,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Call => "call",
            Channel::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s.trim() {
            "call" => Some(Channel::Call),
            "text" => Some(Channel::Text),
            _ => None,
        }
    }
}

/// A study participant and their per-wave survey answers.
///
/// `None` marks an attribute the participant did not answer in that wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub survey_attributes: BTreeMap<Wave, BTreeMap<String, Option<String>>>,
}

impl Participant {
    pub fn new(id: impl Into<String>) -> Self {
        Participant {
            id: id.into(),
            survey_attributes: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, wave: Wave, attr: &str, value: Option<&str>) {
        self.survey_attributes
            .entry(wave)
            .or_default()
            .insert(attr.to_string(), value.map(str::to_string));
    }

    pub fn attr(&self, wave: Wave, attr: &str) -> Option<&str> {
        self.survey_attributes
            .get(&wave)
            .and_then(|m| m.get(attr))
            .and_then(|v| v.as_deref())
    }

    /// Value from the earliest wave with a non-missing answer.
    pub fn earliest(&self, attr: &str) -> Option<&str> {
        self.survey_attributes
            .values()
            .find_map(|m| m.get(attr).and_then(|v| v.as_deref()))
    }

    /// Waves with at least one answered attribute.
    pub fn active_waves(&self) -> BTreeSet<Wave> {
        self.survey_attributes
            .iter()
            .filter(|(_, m)| m.values().any(Option::is_some))
            .map(|(w, _)| *w)
            .collect()
    }

    pub fn attribute_names(&self) -> BTreeSet<&str> {
        self.survey_attributes
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionRecord {
    pub participant_id: String,
    pub question: Question,
    pub wave: Wave,
    pub stance: Stance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEvent {
    pub source: String,
    pub target: String,
    pub timestamp: Timestamp,
    pub channel: Channel,
}

impl CommEvent {
    pub fn sort_key(&self) -> (Timestamp, &str, &str, Channel) {
        (self.timestamp, &self.source, &self.target, self.channel)
    }
}

/// Survey wave timestamps. Wave 1 anchors simulation start, wave 6 its end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveCalendar {
    times: BTreeMap<Wave, Timestamp>,
}

impl WaveCalendar {
    /// Requires all six waves with strictly increasing timestamps.
    pub fn new(times: BTreeMap<Wave, Timestamp>) -> Result<Self, String> {
        if times.keys().copied().ne(waves()) {
            return Err(format!(
                "wave calendar must list waves 1..=6 exactly once, got {:?}",
                times.keys().collect::<Vec<_>>()
            ));
        }
        let ts: Vec<_> = times.values().copied().collect();
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err("wave timestamps must be strictly increasing".into());
        }
        Ok(WaveCalendar { times })
    }

    /// Six waves evenly spaced over `[start, end]`.
    pub fn evenly_spaced(start: Timestamp, end: Timestamp) -> Self {
        let span = (end - start).max(5);
        let times = waves().map(|w| (w, start + span * (w as i64 - 1) / 5)).collect();
        WaveCalendar { times }
    }

    pub fn time(&self, wave: Wave) -> Option<Timestamp> {
        self.times.get(&wave).copied()
    }

    pub fn start(&self) -> Timestamp {
        self.times[&FIRST_WAVE]
    }

    pub fn end(&self) -> Timestamp {
        self.times[&LAST_WAVE]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Wave, Timestamp)> + '_ {
        self.times.iter().map(|(w, t)| (*w, *t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic { seed: u64, config_hash: String },
}
