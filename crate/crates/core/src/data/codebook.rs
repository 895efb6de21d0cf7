//! Per-question stance vocabulary and survey attribute types.
//!
//! ```json
//! {
//!   "questions": { "euthanasia": { "agree": "A", "disagree": "B", "neutral": "AB" } },
//!   "attributes": { "gender": "categorical", "gpa": "numeric" }
//! }
//! ```
//!
//! The canonical tokens `A`, `B`, `AB`, `Missing` (and the empty string) are
//! always accepted without a codebook entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Question, Stance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    #[serde(default)]
    pub questions: BTreeMap<Question, BTreeMap<String, Stance>>,
    /// Attribute name to declared type string (`categorical` or `numeric`).
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Codebook {
    /// Map a raw survey answer to a stance.
    pub fn stance(&self, question: Question, raw: &str) -> Option<Stance> {
        if let Some(s) = Stance::parse_canonical(raw) {
            return Some(s);
        }
        self.questions.get(&question)?.get(raw.trim()).copied()
    }

    /// Declared kind of an attribute, `Ok(None)` when undeclared.
    pub fn attribute_kind(&self, name: &str) -> Result<Option<AttributeKind>, String> {
        match self.attributes.get(name).map(String::as_str) {
            None => Ok(None),
            Some("categorical") => Ok(Some(AttributeKind::Categorical)),
            Some("numeric") => Ok(Some(AttributeKind::Numeric)),
            Some(other) => Err(format!("unknown attribute type {other:?} for {name:?}")),
        }
    }

    /// Codebook matching the synthetic generator's answer vocabulary.
    pub fn synthetic_default() -> Self {
        let answers: BTreeMap<String, Stance> = [
            ("strongly agree", Stance::A),
            ("agree", Stance::A),
            ("neither", Stance::AB),
            ("disagree", Stance::B),
            ("strongly disagree", Stance::B),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let questions = Question::ALL.into_iter().map(|q| (q, answers.clone())).collect();
        let attributes = [
            ("gender", "categorical"),
            ("ethnicity", "categorical"),
            ("fbprivacy", "categorical"),
            ("english_native", "categorical"),
            ("parents_income_bracket", "categorical"),
            ("mother_education", "categorical"),
            ("father_education", "categorical"),
            ("mother_religion", "categorical"),
            ("father_religion", "categorical"),
            ("gpa", "numeric"),
            ("hours_online", "numeric"),
            ("clubs", "numeric"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Codebook { questions, attributes }
    }
}
