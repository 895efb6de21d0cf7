//! Exploratory metrics on ground truth and CoDiNG mispredictions, broken down
//! by minority subgroup.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Minority, MinorityMembership, OpinionRecord, Question, Stance, Wave, FIRST_WAVE, LAST_WAVE};
use crate::opinion::MisclassificationSample;

#[derive(Debug, Error, PartialEq)]
pub enum EdaError {
    #[error("no non-missing A/B answers for {0}")]
    NoAnswers(Question),
}

/// A population slice: everyone, a minority, or that minority's complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Subgroup {
    General,
    Members(Minority),
    Complement(Minority),
}

impl Subgroup {
    /// General, then members and complement of each minority.
    pub fn all() -> Vec<Subgroup> {
        let mut out = vec![Subgroup::General];
        for m in Minority::ALL {
            out.push(Subgroup::Members(m));
            out.push(Subgroup::Complement(m));
        }
        out
    }

    pub fn contains(self, m: &MinorityMembership) -> bool {
        match self {
            Subgroup::General => true,
            Subgroup::Members(x) => m.has(x),
            Subgroup::Complement(x) => !m.has(x),
        }
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgroup::General => f.write_str("general"),
            Subgroup::Members(m) => write!(f, "{m}=1"),
            Subgroup::Complement(m) => write!(f, "{m}=0"),
        }
    }
}

impl From<Subgroup> for String {
    fn from(s: Subgroup) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Subgroup {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if s == "general" {
            return Ok(Subgroup::General);
        }
        let (name, side) = s.rsplit_once('=').ok_or_else(|| format!("bad subgroup {s:?}"))?;
        let m = Minority::parse(name).ok_or_else(|| format!("unknown minority in {s:?}"))?;
        match side {
            "1" => Ok(Subgroup::Members(m)),
            "0" => Ok(Subgroup::Complement(m)),
            _ => Err(format!("bad subgroup {s:?}")),
        }
    }
}

/// Whether rates pool samples or average per-participant rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    PerSample,
    PerParticipant,
}

/// Which waves feed a pooled stance metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavePolicy {
    #[default]
    AllWaves,
    Wave(Wave),
}

impl WavePolicy {
    fn admits(self, w: Wave) -> bool {
        match self {
            WavePolicy::AllWaves => true,
            WavePolicy::Wave(x) => x == w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MinorityOpinionPolicy {
    pub waves: WavePolicy,
    pub aggregation: Aggregation,
    /// Also count AB answers when AB is rarer than the majority pole.
    pub ab_as_minority_when_rarer: bool,
}

/// `rate` is `None` exactly when `n == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub subgroup: Subgroup,
    pub rate: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityOpinionRates {
    pub question: Question,
    /// The less common of A and B over the pooled answers.
    pub minority_pole: Stance,
    pub rates: Vec<GroupRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityStat {
    pub question: Question,
    pub subgroup: Subgroup,
    pub mean_changes: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: u8,
    pub rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionalityCurve {
    pub question: Question,
    pub points: Vec<CurvePoint>,
}

fn index(memberships: &[MinorityMembership]) -> HashMap<&str, &MinorityMembership> {
    memberships.iter().map(|m| (m.participant_id.as_str(), m)).collect()
}

/// Rates per subgroup from per-participant `(hits, trials)` tallies.
fn group_rates(
    tallies: &BTreeMap<&str, (usize, usize)>,
    members: &HashMap<&str, &MinorityMembership>,
    aggregation: Aggregation,
) -> Vec<GroupRate> {
    Subgroup::all()
        .into_iter()
        .map(|g| {
            let (mut hits, mut trials, mut people, mut mean) = (0usize, 0usize, 0usize, 0.0);
            for (id, &(h, t)) in tallies {
                let Some(m) = members.get(id) else { continue };
                if t == 0 || !g.contains(m) {
                    continue;
                }
                hits += h;
                trials += t;
                people += 1;
                mean += h as f64 / t as f64;
            }
            let (rate, n) = match aggregation {
                Aggregation::PerSample => ((trials > 0).then(|| hits as f64 / trials as f64), trials),
                Aggregation::PerParticipant => ((people > 0).then(|| mean / people as f64), people),
            };
            GroupRate { subgroup: g, rate, n }
        })
        .collect()
}

/// Share of each subgroup's answers on the question's minority pole.
///
/// The pole is the rarer of A and B over all admitted non-missing answers
/// (B on a tie). AB never decides the pole and, unless the policy says so,
/// counts as a non-minority answer.
pub fn minority_opinion_rate(
    opinions: &[OpinionRecord],
    memberships: &[MinorityMembership],
    question: Question,
    policy: &MinorityOpinionPolicy,
) -> Result<MinorityOpinionRates, EdaError> {
    let admitted: Vec<&OpinionRecord> = opinions
        .iter()
        .filter(|o| o.question == question && policy.waves.admits(o.wave) && !o.stance.is_missing())
        .collect();
    let count = |s: Stance| admitted.iter().filter(|o| o.stance == s).count();
    let (a, b, ab) = (count(Stance::A), count(Stance::B), count(Stance::AB));
    if a + b == 0 {
        return Err(EdaError::NoAnswers(question));
    }
    let (pole, majority) = if a < b { (Stance::A, b) } else { (Stance::B, a) };
    let ab_counts = policy.ab_as_minority_when_rarer && ab < majority;

    let mut tallies: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for o in admitted {
        let e = tallies.entry(o.participant_id.as_str()).or_default();
        e.1 += 1;
        if o.stance == pole || (ab_counts && o.stance == Stance::AB) {
            e.0 += 1;
        }
    }
    Ok(MinorityOpinionRates {
        question,
        minority_pole: pole,
        rates: group_rates(&tallies, &index(memberships), policy.aggregation),
    })
}

/// Stance changes between consecutive waves that are both answered.
pub fn stance_changes(sequence: &[Stance]) -> usize {
    sequence
        .windows(2)
        .filter(|w| !w[0].is_missing() && !w[1].is_missing() && w[0] != w[1])
        .count()
}

/// Mean stance changes per participant with at least two answered waves.
pub fn opinion_volatility(
    opinions: &[OpinionRecord],
    memberships: &[MinorityMembership],
    question: Question,
) -> Vec<VolatilityStat> {
    let mut sequences: BTreeMap<&str, Vec<Stance>> = BTreeMap::new();
    for o in opinions.iter().filter(|o| o.question == question) {
        let seq = sequences
            .entry(o.participant_id.as_str())
            .or_insert_with(|| vec![Stance::Missing; LAST_WAVE as usize]);
        seq[(o.wave - FIRST_WAVE) as usize] = o.stance;
    }
    let members = index(memberships);
    let counted: Vec<(&MinorityMembership, usize)> = sequences
        .iter()
        .filter(|(_, s)| s.iter().filter(|x| !x.is_missing()).count() >= 2)
        .filter_map(|(id, s)| members.get(id).map(|m| (*m, stance_changes(s))))
        .collect();
    Subgroup::all()
        .into_iter()
        .map(|g| {
            let changes: Vec<usize> = counted.iter().filter(|(m, _)| g.contains(m)).map(|(_, c)| *c).collect();
            let n = changes.len();
            VolatilityStat {
                question,
                subgroup: g,
                mean_changes: (n > 0).then(|| changes.iter().sum::<usize>() as f64 / n as f64),
                n,
            }
        })
        .collect()
}

/// Fraction of mispredicted samples per question and subgroup.
pub fn baseline_misprediction_rate(
    samples: &[MisclassificationSample],
    memberships: &[MinorityMembership],
    aggregation: Aggregation,
) -> BTreeMap<Question, Vec<GroupRate>> {
    let members = index(memberships);
    let mut per_question: BTreeMap<Question, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for s in samples {
        let e = per_question
            .entry(s.question)
            .or_default()
            .entry(s.participant_id.as_str())
            .or_default();
        e.0 += s.target as usize;
        e.1 += 1;
    }
    per_question
        .into_iter()
        .map(|(q, tallies)| (q, group_rates(&tallies, &members, aggregation)))
        .collect()
}

/// Misprediction rate by the number of minority flags a sample's holder has.
pub fn misprediction_by_intersectionality(
    samples: &[MisclassificationSample],
    memberships: &[MinorityMembership],
    question: Question,
) -> IntersectionalityCurve {
    let members = index(memberships);
    let mut by_k: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.question == question) {
        if let Some(m) = members.get(s.participant_id.as_str()) {
            let e = by_k.entry(m.intersection_count).or_default();
            e.0 += s.target as usize;
            e.1 += 1;
        }
    }
    IntersectionalityCurve {
        question,
        points: by_k
            .into_iter()
            .map(|(k, (hits, n))| CurvePoint {
                k,
                rate: hits as f64 / n as f64,
                n,
            })
            .collect(),
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Stance::*;

    #[test]
    fn change_counts() {
        assert_eq!(stance_changes(&[A, A, B, AB, AB]), 2);
        assert_eq!(stance_changes(&[B, B, B]), 0);
        assert_eq!(stance_changes(&[A, Missing, B]), 0);
    }

    #[test]
    fn subgroup_names_round_trip() {
        for g in Subgroup::all() {
            assert_eq!(Subgroup::try_from(g.to_string()).unwrap(), g);
        }
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[0.1, 0.5, 0.9]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[0.9, 0.5, 0.1]) + 1.0).abs() < 1e-12);
    }
}
