//! Minority memberships derived from survey attributes.
//!
//! Each rule reads the earliest wave in which the participant answered the
//! underlying attribute. A rule that cannot be evaluated leaves the flag false
//! and records the minority as undetermined.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dataset, Participant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Minority {
    Gender,
    Ethnicity,
    FBPrivacy,
    EnglishNative,
    ParentsIncome,
    ParentsEducation,
    ParentsReligion,
}

impl Minority {
    pub const ALL: [Minority; 7] = [
        Minority::Gender,
        Minority::Ethnicity,
        Minority::FBPrivacy,
        Minority::EnglishNative,
        Minority::ParentsIncome,
        Minority::ParentsEducation,
        Minority::ParentsReligion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Minority::Gender => "Gender",
            Minority::Ethnicity => "Ethnicity",
            Minority::FBPrivacy => "FBPrivacy",
            Minority::EnglishNative => "EnglishNative",
            Minority::ParentsIncome => "ParentsIncome",
            Minority::ParentsEducation => "ParentsEducation",
            Minority::ParentsReligion => "ParentsReligion",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Minority> {
        Minority::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Minority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The 14 ordered parental income brackets.
pub const INCOME_BRACKETS: [&str; 14] = [
    "<$10k",
    "$10k-$20k",
    "$20k-$30k",
    "$30k-$40k",
    "$40k-$50k",
    "$50k-$60k",
    "$60k-$75k",
    "$75k-$100k",
    "$100k-$125k",
    "$125k-$150k",
    "$150k-$175k",
    "$175k-$200k",
    "$200k-$250k",
    "$250k+",
];
/// Sentinel for "unsure / no answer".
pub const INCOME_UNSURE: &str = "unsure";
/// First bracket at or above $200k a year.
const HIGH_INCOME_FROM: usize = 12;

pub fn income_bracket_index(value: &str) -> Option<usize> {
    INCOME_BRACKETS.iter().position(|b| *b == value.trim())
}

pub const WHITE: &str = "White/Caucasian";
pub const FB_DEFAULT: &str = "All my friends can see my posts";
pub const ROMAN_CATHOLIC: &str = "Roman Catholic";
/// Education answers that count as a completed college or university degree.
pub const COLLEGE_DEGREES: [&str; 2] = ["bachelors", "graduate"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorityMembership {
    pub participant_id: String,
    pub flags: BTreeMap<Minority, bool>,
    pub undetermined: BTreeSet<Minority>,
    pub intersection_count: u8,
}

impl MinorityMembership {
    pub fn has(&self, m: Minority) -> bool {
        self.flags.get(&m).copied().unwrap_or(false)
    }
}

enum Rule {
    Flag(bool),
    Undetermined,
}

fn parent_pair(p: &Participant, mother: &str, father: &str, hit: impl Fn(&str) -> bool) -> Rule {
    // `hit` marks the minority-side answer for a single parent.
    let m = p.earliest(mother);
    let f = p.earliest(father);
    match (m, f) {
        (Some(m), Some(f)) => Rule::Flag(hit(m) || hit(f)),
        (Some(x), None) | (None, Some(x)) if hit(x) => Rule::Flag(true),
        _ => Rule::Undetermined,
    }
}

fn evaluate(p: &Participant, m: Minority) -> Rule {
    let simple = |attr: &str, f: &dyn Fn(&str) -> bool| match p.earliest(attr) {
        Some(v) => Rule::Flag(f(v)),
        None => Rule::Undetermined,
    };
    match m {
        Minority::Gender => simple("gender", &|v| v.eq_ignore_ascii_case("female")),
        Minority::Ethnicity => simple("ethnicity", &|v| v != WHITE),
        Minority::FBPrivacy => Rule::Flag(p.earliest("fbprivacy") != Some(FB_DEFAULT)),
        Minority::EnglishNative => simple("english_native", &|v| v.eq_ignore_ascii_case("no")),
        Minority::ParentsIncome => match p.earliest("parents_income_bracket").and_then(income_bracket_index) {
            Some(i) => Rule::Flag(i >= HIGH_INCOME_FROM),
            None => Rule::Undetermined,
        },
        Minority::ParentsEducation => {
            let m = p.earliest("mother_education");
            let f = p.earliest("father_education");
            let grad = |v: &str| COLLEGE_DEGREES.contains(&v);
            match (m, f) {
                (Some(m), Some(f)) => Rule::Flag(!grad(m) && !grad(f)),
                // one graduate parent settles it
                (Some(x), None) | (None, Some(x)) if grad(x) => Rule::Flag(false),
                _ => Rule::Undetermined,
            }
        }
        Minority::ParentsReligion => parent_pair(p, "mother_religion", "father_religion", |v| v != ROMAN_CATHOLIC),
    }
}

pub fn membership_of(p: &Participant) -> MinorityMembership {
    let mut flags = BTreeMap::new();
    let mut undetermined = BTreeSet::new();
    for m in Minority::ALL {
        match evaluate(p, m) {
            Rule::Flag(b) => {
                flags.insert(m, b);
            }
            Rule::Undetermined => {
                flags.insert(m, false);
                undetermined.insert(m);
            }
        }
    }
    let intersection_count = flags.values().filter(|b| **b).count() as u8;
    MinorityMembership {
        participant_id: p.id.clone(),
        flags,
        undetermined,
        intersection_count,
    }
}

/// One membership per participant, in dataset order.
pub fn derive_minorities(dataset: &Dataset) -> Vec<MinorityMembership> {
    dataset.participants().iter().map(membership_of).collect()
}
