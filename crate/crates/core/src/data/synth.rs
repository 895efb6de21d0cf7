//! Synthetic NetSense-shaped populations.
//!
//! Generation runs in five steps, each on its own derived RNG stream:
//!
//! 1. Minority flags from a Gaussian copula. Flag `j` goes to the
//!    `round(f_j * n)` participants with the largest latent score, so
//!    marginals are exact and correlations follow the latent matrix.
//! 2. Raw survey answers consistent with the flags, plus a few extra
//!    attributes and per-wave attrition.
//! 3. A homophilous contact graph and a Poisson stream of calls and texts.
//! 4. Wave-1 stances, then a reference CoDiNG run on the generated network.
//! 5. Stances for waves 2..6, drawn per participant from the maximum-entropy
//!    distribution over stance sequences whose expected mispredictions
//!    (against the reference run), changes and minority-pole answers equal
//!    the participant's targets.
//!
//! Step 5 is what lets configured misprediction and volatility targets
//! survive a later audit: the audit repeats the reference run exactly when
//! it uses the same root seed and model parameters.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::minority::{membership_of, COLLEGE_DEGREES, FB_DEFAULT, ROMAN_CATHOLIC, WHITE};
use super::{
    Channel, Codebook, CommEvent, DataError, Dataset, Minority, MinorityMembership, OpinionRecord, Participant,
    Provenance, Question, Stance, Wave, WaveCalendar, INCOME_BRACKETS, INCOME_UNSURE, LAST_WAVE,
};
use crate::cogsnet::CogsnetParams;
use crate::opinion::{run_coding, simulation_seed, CodingParams, SimulationTrace};
use crate::seed;

const DAY: f64 = 86_400.0;

const OTHER_ETHNICITIES: [&str; 7] = [
    "Black/African American",
    "Hispanic/Latino",
    "Asian American",
    "Asian/Pacific Islander",
    "Native American",
    "Mixed",
    "Other",
];
const OTHER_FB: [&str; 3] = ["Only my close friends can see my posts", "Custom", "Public"];
const OTHER_RELIGIONS: [&str; 6] = ["Protestant", "Other Christian", "Jewish", "Muslim", "Hindu", "None"];
const NON_DEGREES: [&str; 3] = ["less_than_high_school", "high_school", "some_college"];

/// Correlation between the latent scores of two minority flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagCorrelation {
    pub a: Minority,
    pub b: Minority,
    pub rho: f64,
}

/// Override for one (question, minority) group. Unset fields fall back to
/// the population-wide defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTarget {
    pub question: Question,
    pub minority: Minority,
    #[serde(default)]
    pub minority_rate: Option<f64>,
    #[serde(default)]
    pub volatility: Option<f64>,
    #[serde(default)]
    pub misprediction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpinionTargets {
    /// Share of answers on the minority pole (B).
    pub minority_rate: f64,
    /// Share of neutral (AB) answers at wave 1.
    pub neutral_share: f64,
    /// Misprediction rate of a participant with no minority flag.
    pub misprediction: f64,
    /// Added to the misprediction rate per held minority flag.
    pub intersectionality_slope: f64,
    /// Expected stance changes per participant across the six waves.
    pub volatility: f64,
    pub groups: Vec<GroupTarget>,
}

impl Default for OpinionTargets {
    fn default() -> Self {
        let group = |question, minority, rate, vol, mis| GroupTarget {
            question,
            minority,
            minority_rate: rate,
            volatility: vol,
            misprediction: mis,
        };
        OpinionTargets {
            minority_rate: 0.2,
            neutral_share: 0.1,
            misprediction: 0.41,
            intersectionality_slope: 0.07,
            volatility: 0.9,
            groups: vec![
                group(Question::Euthanasia, Minority::ParentsReligion, Some(0.393), None, None),
                group(Question::Euthanasia, Minority::FBPrivacy, Some(0.355), None, None),
                group(Question::Fssocsec, Minority::Ethnicity, Some(0.172), None, None),
                group(Question::Jobguar, Minority::ParentsEducation, None, Some(1.57), None),
                group(Question::Euthanasia, Minority::ParentsEducation, None, Some(1.11), None),
                group(Question::Jobguar, Minority::Ethnicity, None, None, Some(0.729)),
            ],
        }
    }
}

/// Model parameters of the reference CoDiNG run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceModel {
    pub cogsnet: CogsnetParams,
    pub coding: CodingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub population: usize,
    /// Minority fractions; absent entries take the defaults.
    pub fractions: BTreeMap<Minority, f64>,
    /// Share of the population answering "unsure" on parental income.
    pub income_unsure: f64,
    /// Share of the FBPrivacy minority that left the question blank.
    pub fbprivacy_unanswered: f64,
    pub correlations: Vec<FlagCorrelation>,
    /// Contact-rate multiplier per minority flag a pair shares.
    pub homophily_multiplier: f64,
    pub mean_degree: f64,
    /// Mean events per day on a contact pair.
    pub events_per_day: f64,
    pub call_share: f64,
    pub start_timestamp: i64,
    /// Days of communication before wave 1.
    pub lead_in_days: u32,
    pub wave_spacing_days: u32,
    /// Per-wave probability of leaving the study, from wave 2 on.
    pub dropout_hazard: f64,
    pub opinions: OpinionTargets,
    pub reference: ReferenceModel,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            population: 200,
            fractions: default_fractions(),
            income_unsure: 0.13,
            fbprivacy_unanswered: 0.3,
            correlations: vec![
                FlagCorrelation {
                    a: Minority::Ethnicity,
                    b: Minority::ParentsEducation,
                    rho: 0.35,
                },
                FlagCorrelation {
                    a: Minority::ParentsEducation,
                    b: Minority::ParentsReligion,
                    rho: 0.25,
                },
                FlagCorrelation {
                    a: Minority::Ethnicity,
                    b: Minority::ParentsReligion,
                    rho: 0.3,
                },
                FlagCorrelation {
                    a: Minority::Ethnicity,
                    b: Minority::EnglishNative,
                    rho: 0.4,
                },
            ],
            homophily_multiplier: 1.6,
            mean_degree: 6.0,
            events_per_day: 0.1,
            call_share: 0.3,
            // 2011-08-22
            start_timestamp: 1_313_971_200,
            lead_in_days: 30,
            wave_spacing_days: 182,
            dropout_hazard: 0.05,
            opinions: OpinionTargets::default(),
            reference: ReferenceModel::default(),
        }
    }
}

fn default_fractions() -> BTreeMap<Minority, f64> {
    [
        (Minority::Gender, 0.48),
        (Minority::Ethnicity, 0.33),
        (Minority::FBPrivacy, 0.19),
        (Minority::EnglishNative, 0.16),
        (Minority::ParentsIncome, 0.15),
        (Minority::ParentsEducation, 0.15),
        (Minority::ParentsReligion, 0.40),
    ]
    .into_iter()
    .collect()
}

impl SyntheticConfig {
    pub fn fraction(&self, m: Minority) -> f64 {
        self.fractions
            .get(&m)
            .copied()
            .unwrap_or_else(|| default_fractions()[&m])
    }

    /// Number of participants flagged for `m`.
    pub fn flagged(&self, m: Minority) -> usize {
        (self.fraction(m) * self.population as f64).round() as usize
    }

    pub fn wave_calendar(&self) -> WaveCalendar {
        let times = (1..=LAST_WAVE)
            .map(|w| {
                let days = self.lead_in_days as i64 + self.wave_spacing_days as i64 * (w as i64 - 1);
                (w, self.start_timestamp + days * DAY as i64)
            })
            .collect();
        WaveCalendar::new(times).expect("positive spacing yields a valid calendar")
    }

    /// Latent correlation matrix in [`Minority::ALL`] order.
    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let mut r = DMatrix::identity(7, 7);
        for c in &self.correlations {
            r[(c.a.index(), c.b.index())] = c.rho;
            r[(c.b.index(), c.a.index())] = c.rho;
        }
        r
    }

    /// Check every constraint, naming the first violated one.
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::Infeasible(msg));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population < 2 {
            return bad(format!("population must be at least 2, got {}", self.population));
        }
        for (m, f) in &self.fractions {
            if !unit(*f) {
                return bad(format!("fraction for {m} must lie in [0, 1], got {f}"));
            }
        }
        for (name, x) in [
            ("income_unsure", self.income_unsure),
            ("fbprivacy_unanswered", self.fbprivacy_unanswered),
            ("call_share", self.call_share),
            ("opinions.minority_rate", self.opinions.minority_rate),
            ("opinions.neutral_share", self.opinions.neutral_share),
            ("opinions.misprediction", self.opinions.misprediction),
        ] {
            if !unit(x) {
                return bad(format!("{name} must lie in [0, 1], got {x}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_hazard) {
            return bad(format!(
                "dropout_hazard must lie in [0, 1), got {}",
                self.dropout_hazard
            ));
        }
        let income = self.fraction(Minority::ParentsIncome);
        if income + self.income_unsure > 1.0 + 1e-12 {
            return bad(format!(
                "ParentsIncome fraction {income} plus income_unsure {} exceeds 1",
                self.income_unsure
            ));
        }
        if self.opinions.minority_rate + self.opinions.neutral_share > 1.0 {
            return bad("opinions.minority_rate + opinions.neutral_share exceeds 1".into());
        }
        let max_vol = (LAST_WAVE - 1) as f64;
        if !(0.0..=max_vol).contains(&self.opinions.volatility) {
            return bad(format!("opinions.volatility must lie in [0, {max_vol}]"));
        }
        if !self.opinions.intersectionality_slope.is_finite() {
            return bad("opinions.intersectionality_slope must be finite".into());
        }
        for g in &self.opinions.groups {
            let tag = format!("group ({}, {})", g.question, g.minority);
            for (name, x) in [("minority_rate", g.minority_rate), ("misprediction", g.misprediction)] {
                if let Some(x) = x {
                    if !unit(x) {
                        return bad(format!("{tag}: {name} must lie in [0, 1], got {x}"));
                    }
                }
            }
            if let Some(rate) = g.minority_rate {
                if rate + self.opinions.neutral_share > 1.0 {
                    return bad(format!("{tag}: minority_rate + neutral_share exceeds 1"));
                }
            }
            if let Some(v) = g.volatility {
                if !(0.0..=max_vol).contains(&v) {
                    return bad(format!("{tag}: volatility must lie in [0, {max_vol}], got {v}"));
                }
            }
        }
        for c in &self.correlations {
            if c.a == c.b {
                return bad(format!("correlation of {} with itself", c.a));
            }
            if !(c.rho > -1.0 && c.rho < 1.0) {
                return bad(format!(
                    "correlation {}~{} must lie in (-1, 1), got {}",
                    c.a, c.b, c.rho
                ));
            }
        }
        if self.correlation_matrix().cholesky().is_none() {
            return bad("flag correlation matrix is not positive definite".into());
        }
        if !(self.homophily_multiplier > 0.0 && self.homophily_multiplier.is_finite()) {
            return bad(format!(
                "homophily_multiplier must be positive, got {}",
                self.homophily_multiplier
            ));
        }
        let max_degree = (self.population - 1) as f64;
        if !(self.mean_degree >= 0.0 && self.mean_degree <= max_degree * 0.5) {
            return bad(format!(
                "mean_degree must lie in [0, {}] for population {}",
                max_degree * 0.5,
                self.population
            ));
        }
        if !(self.events_per_day > 0.0 && self.events_per_day.is_finite()) {
            return bad(format!("events_per_day must be positive, got {}", self.events_per_day));
        }
        if self.wave_spacing_days == 0 {
            return bad("wave_spacing_days must be positive".into());
        }
        if self.start_timestamp < 0 {
            return bad("start_timestamp must be non-negative".into());
        }
        self.reference
            .cogsnet
            .validate()
            .map_err(|e| DataError::Infeasible(e.to_string()))?;
        self.reference.coding.validate().map_err(DataError::Infeasible)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub dataset: Dataset,
    pub memberships: Vec<MinorityMembership>,
    /// The reference CoDiNG runs ground truth was planted against.
    pub reference: BTreeMap<Question, SimulationTrace>,
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<SyntheticOutput, DataError> {
    config.validate()?;
    let n = config.population;
    let flags = sample_flags(config, seed::derive(seed, &["synth", "flags"]));
    let calendar = config.wave_calendar();
    let mut participants = build_participants(config, &flags, seed::derive(seed, &["synth", "attributes"]));
    let last_active = apply_attrition(config, &mut participants, seed::derive(seed, &["synth", "attrition"]));
    let memberships: Vec<MinorityMembership> = participants.iter().map(membership_of).collect();
    let events = build_events(
        config,
        &participants,
        &flags,
        &calendar,
        seed::derive(seed, &["synth", "contacts"]),
    );

    let provenance = Provenance::Synthetic {
        seed,
        config_hash: seed::config_hash(config),
    };
    let codebook = Codebook::synthetic_default();

    let mut wave1 = Vec::with_capacity(n * Question::ALL.len());
    for q in Question::ALL {
        let mut rng = seed::rng(seed::derive(seed, &["synth", "wave1", q.shortcode()]));
        for (i, p) in participants.iter().enumerate() {
            let rate = minority_rate(config, q, &memberships[i]);
            let u: f64 = rng.random();
            let stance = if u < rate {
                Stance::B
            } else if u < rate + config.opinions.neutral_share {
                Stance::AB
            } else {
                Stance::A
            };
            wave1.push(OpinionRecord {
                participant_id: p.id.clone(),
                question: q,
                wave: 1,
                stance,
            });
        }
    }
    let provisional = Dataset::new(
        participants.clone(),
        events.clone(),
        wave1.clone(),
        calendar.clone(),
        codebook.clone(),
        provenance.clone(),
    )?;

    let mut opinions = wave1;
    let mut reference = BTreeMap::new();
    for q in Question::ALL {
        let trace = run_coding(
            &provisional,
            &config.reference.cogsnet,
            q,
            &config.reference.coding,
            simulation_seed(seed, q),
        )
        .map_err(|e| DataError::Infeasible(format!("reference simulation for {q}: {e}")))?;
        let later = plant_truth(
            config,
            q,
            &provisional,
            &trace,
            &memberships,
            &last_active,
            seed::derive(seed, &["synth", "truth", q.shortcode()]),
        );
        opinions.extend(later);
        reference.insert(q, trace);
    }

    let dataset = Dataset::new(participants, events, opinions, calendar, codebook, provenance)?;
    Ok(SyntheticOutput {
        dataset,
        memberships,
        reference,
    })
}

fn participant_id(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("P{:0width$}", i + 1)
}

/// `flags[i][m.index()]`.
fn sample_flags(config: &SyntheticConfig, seed: u64) -> Vec<[bool; 7]> {
    let n = config.population;
    let mut rng = seed::rng(seed);
    let l = config
        .correlation_matrix()
        .cholesky()
        .expect("validated positive definite")
        .l();
    let latent: Vec<[f64; 7]> = (0..n)
        .map(|_| {
            let eps: Vec<f64> = (0..7).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut z = [0.0; 7];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr = (0..=r).map(|c| l[(r, c)] * eps[c]).sum();
            }
            z
        })
        .collect();
    let mut flags = vec![[false; 7]; n];
    for m in Minority::ALL {
        let j = m.index();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| latent[b][j].total_cmp(&latent[a][j]).then(a.cmp(&b)));
        for &i in order.iter().take(config.flagged(m)) {
            flags[i][j] = true;
        }
    }
    flags
}

fn pick<'a>(rng: &mut seed::Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn build_participants(config: &SyntheticConfig, flags: &[[bool; 7]], seed: u64) -> Vec<Participant> {
    let n = config.population;
    let mut rng = seed::rng(seed);
    let has = |i: usize, m: Minority| flags[i][m.index()];

    // "unsure" goes to a random subset of participants below the income threshold
    let mut low_income: Vec<usize> = (0..n).filter(|&i| !has(i, Minority::ParentsIncome)).collect();
    low_income.shuffle(&mut rng);
    let n_unsure = ((config.income_unsure * n as f64).round() as usize).min(low_income.len());
    let unsure: BTreeSet<usize> = low_income[..n_unsure].iter().copied().collect();

    (0..n)
        .map(|i| {
            let mut static_attrs: Vec<(&str, Option<String>)> = Vec::new();
            let mut put = |k: &'static str, v: Option<&str>| static_attrs.push((k, v.map(str::to_string)));
            put("gender", Some(if has(i, Minority::Gender) { "female" } else { "male" }));
            let eth = if has(i, Minority::Ethnicity) {
                pick(&mut rng, &OTHER_ETHNICITIES)
            } else {
                WHITE
            };
            put("ethnicity", Some(eth));
            let fb = if !has(i, Minority::FBPrivacy) {
                Some(FB_DEFAULT)
            } else if rng.random::<f64>() < config.fbprivacy_unanswered {
                None
            } else {
                Some(pick(&mut rng, &OTHER_FB))
            };
            put("fbprivacy", fb);
            put(
                "english_native",
                Some(if has(i, Minority::EnglishNative) { "no" } else { "yes" }),
            );
            let income = if has(i, Minority::ParentsIncome) {
                INCOME_BRACKETS[12 + rng.random_range(0..2)]
            } else if unsure.contains(&i) {
                INCOME_UNSURE
            } else {
                // triangular over the twelve lower brackets, peaking mid-range
                let k = (rng.random_range(0..12usize) + rng.random_range(0..12usize)).div_ceil(2);
                INCOME_BRACKETS[k.min(11)]
            };
            put("parents_income_bracket", Some(income));
            let (mother, father) = if has(i, Minority::ParentsEducation) {
                (pick(&mut rng, &NON_DEGREES), pick(&mut rng, &NON_DEGREES))
            } else {
                let all = [NON_DEGREES.as_slice(), COLLEGE_DEGREES.as_slice()].concat();
                let graduate = pick(&mut rng, &COLLEGE_DEGREES);
                let other = pick(&mut rng, &all);
                if rng.random::<bool>() {
                    (graduate, other)
                } else {
                    (other, graduate)
                }
            };
            put("mother_education", Some(mother));
            put("father_education", Some(father));
            let (mother, father) = if has(i, Minority::ParentsReligion) {
                match rng.random_range(0..3) {
                    0 => (pick(&mut rng, &OTHER_RELIGIONS), ROMAN_CATHOLIC),
                    1 => (ROMAN_CATHOLIC, pick(&mut rng, &OTHER_RELIGIONS)),
                    _ => (pick(&mut rng, &OTHER_RELIGIONS), pick(&mut rng, &OTHER_RELIGIONS)),
                }
            } else {
                (ROMAN_CATHOLIC, ROMAN_CATHOLIC)
            };
            put("mother_religion", Some(mother));
            put("father_religion", Some(father));
            let gpa = (3.3 + 0.4 * rng.sample::<f64, _>(StandardNormal)).clamp(2.0, 4.0);
            put("gpa", Some(&format!("{gpa:.2}")));
            put("clubs", Some(&rng.random_range(0..6).to_string()));

            let mut p = Participant::new(participant_id(i, n));
            let base_hours = rng.random_range(1.0..6.0);
            for w in 1..=LAST_WAVE {
                for (k, v) in &static_attrs {
                    p.set(w, k, v.as_deref());
                }
                let hours: f64 = base_hours + rng.random_range(-1.0..1.0);
                p.set(w, "hours_online", Some(&format!("{:.1}", hours.max(0.0))));
            }
            p
        })
        .collect()
}

/// Blank out every wave after a participant leaves. Returns the last wave
/// each participant answered.
fn apply_attrition(config: &SyntheticConfig, participants: &mut [Participant], seed: u64) -> Vec<Wave> {
    let mut rng = seed::rng(seed);
    participants
        .iter_mut()
        .map(|p| {
            let mut last = LAST_WAVE;
            for w in 2..=LAST_WAVE {
                if rng.random::<f64>() < config.dropout_hazard {
                    last = w - 1;
                    break;
                }
            }
            for w in last + 1..=LAST_WAVE {
                if let Some(attrs) = p.survey_attributes.get_mut(&w) {
                    attrs.values_mut().for_each(|v| *v = None);
                }
            }
            last
        })
        .collect()
}

fn build_events(
    config: &SyntheticConfig,
    participants: &[Participant],
    flags: &[[bool; 7]],
    calendar: &WaveCalendar,
    seed: u64,
) -> Vec<CommEvent> {
    let n = participants.len();
    let mut rng = seed::rng(seed);
    let target = ((config.mean_degree * n as f64) / 2.0).round() as usize;
    let shared = |u: usize, v: usize| (0..7).filter(|&j| flags[u][j] && flags[v][j]).count() as i32;
    let mult = config.homophily_multiplier;
    let max_shared = flags
        .iter()
        .map(|f| f.iter().filter(|b| **b).count())
        .max()
        .unwrap_or(0) as i32;
    let ceiling = mult.powi(max_shared).max(1.0);

    let mut pairs = BTreeSet::new();
    let mut order = Vec::with_capacity(target);
    while order.len() < target {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if pairs.contains(&key) {
            continue;
        }
        if rng.random::<f64>() * ceiling < mult.powi(shared(u, v)) {
            pairs.insert(key);
            order.push(key);
        }
    }

    let start = config.start_timestamp as f64;
    let end = calendar.end() as f64;
    let strength = Gamma::new(2.0, 0.5).expect("valid gamma");
    let mut events = Vec::new();
    for (u, v) in order {
        let rate = config.events_per_day * strength.sample(&mut rng) / DAY;
        let gap = Exp::new(rate).expect("positive rate");
        let mut t = start + gap.sample(&mut rng);
        while t < end {
            let (s, d) = if rng.random::<bool>() { (u, v) } else { (v, u) };
            let channel = if rng.random::<f64>() < config.call_share {
                Channel::Call
            } else {
                Channel::Text
            };
            events.push(CommEvent {
                source: participants[s].id.clone(),
                target: participants[d].id.clone(),
                timestamp: t as i64,
                channel,
            });
            t += gap.sample(&mut rng);
        }
    }
    events
}

fn group_value(
    config: &SyntheticConfig,
    q: Question,
    m: &MinorityMembership,
    field: impl Fn(&GroupTarget) -> Option<f64>,
) -> Option<(usize, f64)> {
    config
        .opinions
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.question == q && m.has(g.minority))
        .find_map(|(i, g)| field(g).map(|x| (i, x)))
}

fn minority_rate(config: &SyntheticConfig, q: Question, m: &MinorityMembership) -> f64 {
    group_value(config, q, m, |g| g.minority_rate).map_or(config.opinions.minority_rate, |(_, x)| x)
}

fn misprediction_rate(config: &SyntheticConfig, q: Question, m: &MinorityMembership) -> f64 {
    group_value(config, q, m, |g| g.misprediction).map_or_else(
        || config.opinions.misprediction + config.opinions.intersectionality_slope * m.intersection_count as f64,
        |(_, x)| x,
    )
}

/// Calibration cell: a configured group override, or the default rule
/// (keyed by intersection count for mispredictions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum CellKey {
    Base(u8),
    Group(usize),
}

const STATES: [Stance; 3] = [Stance::A, Stance::B, Stance::AB];

fn plant_truth(
    config: &SyntheticConfig,
    q: Question,
    dataset: &Dataset,
    trace: &SimulationTrace,
    memberships: &[MinorityMembership],
    last_active: &[Wave],
    seed: u64,
) -> Vec<OpinionRecord> {
    let calendar = dataset.calendar();

    struct Unit {
        participant: usize,
        stats: Vec<[f64; 3]>,
        len: f64,
        misprediction: f64,
        minority: f64,
        probs: Vec<f64>,
        cells: [CellKey; 3],
    }
    let mut units = Vec::new();
    // volatility group (override index, or None for the default) -> unit ids
    let mut groups: BTreeMap<Option<usize>, (f64, Vec<usize>)> = BTreeMap::new();
    for i in 0..dataset.len() {
        let answered = (last_active[i] - 1) as usize;
        if answered == 0 {
            continue;
        }
        let preds: Vec<Stance> = (2..=last_active[i])
            .map(|w| {
                let t = calendar.time(w).expect("calendar covers all waves");
                trace.state_at(i, t).unwrap_or(Stance::AB)
            })
            .collect();
        let len = answered as f64;
        let source = group_value(config, q, &memberships[i], |g| g.volatility);
        groups
            .entry(source.map(|(g, _)| g))
            .or_insert((source.map_or(config.opinions.volatility, |(_, v)| v), Vec::new()))
            .1
            .push(units.len());
        units.push(Unit {
            participant: i,
            stats: sequence_stats(dataset.stance(i, q, 1), &preds),
            len,
            misprediction: misprediction_rate(config, q, &memberships[i]) * len,
            minority: minority_rate(config, q, &memberships[i]) * len,
            probs: Vec::new(),
            cells: [
                group_value(config, q, &memberships[i], |g| g.misprediction)
                    .map_or(CellKey::Base(memberships[i].intersection_count), |(g, _)| {
                        CellKey::Group(g)
                    }),
                source.map_or(CellKey::Base(0), |(g, _)| CellKey::Group(g)),
                group_value(config, q, &memberships[i], |g| g.minority_rate)
                    .map_or(CellKey::Base(0), |(g, _)| CellKey::Group(g)),
            ],
        });
    }

    // Changes are a soft target: short sequences cannot always honour them
    // together with the misprediction target. Each group's per-transition
    // change rate is calibrated so the expected group mean hits its target.
    for (target, members) in groups.values() {
        let fit = |rate: f64, units: &mut [Unit]| {
            let mut total = 0.0;
            for &u in members {
                let unit = &mut units[u];
                unit.probs = max_entropy(
                    &unit.stats,
                    [unit.misprediction, rate * unit.len, unit.minority],
                    unit.len,
                );
                total += unit.stats.iter().zip(&unit.probs).map(|(f, p)| f[1] * p).sum::<f64>();
            }
            total / members.len() as f64
        };
        let mean_len = members.iter().map(|&u| units[u].len).sum::<f64>() / members.len() as f64;
        let mut lo = (0.0, fit(0.0, &mut units));
        let mut hi = (1.0, fit(1.0, &mut units));
        if *target <= lo.1 {
            fit(0.0, &mut units);
            continue;
        }
        if *target >= hi.1 {
            continue;
        }
        let mut rate = (target / mean_len).clamp(lo.0, hi.0);
        for _ in 0..40 {
            let got = fit(rate, &mut units);
            if (got - target).abs() < 1e-4 {
                break;
            }
            if got < *target {
                lo = (rate, got);
            } else {
                hi = (rate, got);
            }
            rate = lo.0 + (hi.0 - lo.0) * (target - lo.1) / (hi.1 - lo.1);
        }
    }

    let draws: Vec<Draw> = units
        .iter()
        .map(|u| Draw {
            stats: &u.stats,
            probs: &u.probs,
            cells: u.cells,
            len: u.len,
        })
        .collect();
    let chosen = sample_calibrated(&draws, seed);

    let mut out = Vec::new();
    let mut next = units.iter().zip(&chosen).peekable();
    for (i, p) in dataset.participants().iter().enumerate() {
        if let Some((_, &code)) = next.next_if(|(u, _)| u.participant == i) {
            for (j, w) in (2..=last_active[i]).enumerate() {
                out.push(OpinionRecord {
                    participant_id: p.id.clone(),
                    question: q,
                    wave: w,
                    stance: STATES[digit(code, j)],
                });
            }
        }
        for w in (last_active[i] + 1).max(2)..=LAST_WAVE {
            out.push(OpinionRecord {
                participant_id: p.id.clone(),
                question: q,
                wave: w,
                stance: Stance::Missing,
            });
        }
    }
    out
}

/// Draw one sequence per unit, then re-draw units from their own
/// distributions while that brings each cell's realized statistic closer to
/// its expectation. Cells are disjoint per statistic, so realized group
/// rates track their targets far more tightly than independent draws whose
/// answers within one participant are strongly correlated.
struct Draw<'a> {
    stats: &'a [[f64; 3]],
    probs: &'a [f64],
    cells: [CellKey; 3],
    len: f64,
}

fn sample_calibrated(units: &[Draw], seed: u64) -> Vec<usize> {
    const CANDIDATES: usize = 8;
    const PASSES: usize = 10;
    let mut rng = seed::rng(seed);
    let draw = |probs: &[f64], rng: &mut seed::Rng| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, pk) in probs.iter().enumerate() {
            acc += pk;
            if u < acc {
                return k;
            }
        }
        probs.len() - 1
    };
    let mut chosen: Vec<usize> = units.iter().map(|u| draw(u.probs, &mut rng)).collect();

    // per statistic: cell -> (realized - expected, answered waves)
    let mut cells: [BTreeMap<CellKey, (f64, f64)>; 3] = Default::default();
    for (u, &c) in units.iter().zip(&chosen) {
        for s in 0..3 {
            let expected: f64 = u.stats.iter().zip(u.probs).map(|(f, p)| f[s] * p).sum();
            let e = cells[s].entry(u.cells[s]).or_default();
            e.0 += u.stats[c][s] - expected;
            e.1 += u.len;
        }
    }

    let mut order: Vec<usize> = (0..units.len()).collect();
    for _ in 0..PASSES {
        order.shuffle(&mut rng);
        let mut moved = false;
        for &u in &order {
            let Draw {
                stats,
                probs,
                cells: keys,
                ..
            } = units[u];
            let current = chosen[u];
            let mut best = (0.0, current);
            for _ in 0..CANDIDATES {
                let cand = draw(probs, &mut rng);
                let delta: f64 = (0..3)
                    .map(|s| {
                        let (dev, n) = cells[s][&keys[s]];
                        let next = dev + stats[cand][s] - stats[current][s];
                        (next * next - dev * dev) / n
                    })
                    .sum();
                if delta < best.0 - 1e-12 {
                    best = (delta, cand);
                }
            }
            if best.1 != current {
                for s in 0..3 {
                    cells[s].get_mut(&keys[s]).unwrap().0 += stats[best.1][s] - stats[current][s];
                }
                chosen[u] = best.1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    chosen
}

fn digit(code: usize, j: usize) -> usize {
    (code / 3usize.pow(j as u32)) % 3
}

/// `(mispredictions, changes, minority-pole answers)` for every stance
/// sequence over the waves in `preds`, indexed by base-3 code.
fn sequence_stats(t1: Stance, preds: &[Stance]) -> Vec<[f64; 3]> {
    (0..3usize.pow(preds.len() as u32))
        .map(|code| {
            let mut prev = t1;
            let mut f = [0.0; 3];
            for (j, pred) in preds.iter().enumerate() {
                let s = STATES[digit(code, j)];
                f[0] += (s != *pred) as u8 as f64;
                f[1] += (s != prev) as u8 as f64;
                f[2] += (s == Stance::B) as u8 as f64;
                prev = s;
            }
            f
        })
        .collect()
}

/// Dual ridge per statistic: mispredictions, changes, minority answers.
const MAX_ENTROPY_RIDGE: [f64; 3] = [1e-7, 1e-3, 1e-7];

/// Maximum-entropy distribution over sequences with expected statistics
/// `target`, fitted by damped Newton on the ridge-regularized dual.
///
/// The ridge turns each constraint into a quadratic penalty of weight
/// `1 / (2 * ridge)`: mispredictions and minority answers are near-hard,
/// changes give way when the three targets are jointly infeasible. Targets
/// are pulled slightly inside `[0, len]` to stay interior.
fn max_entropy(stats: &[[f64; 3]], target: [f64; 3], len: f64) -> Vec<f64> {
    let ridge = Vector3::from(MAX_ENTROPY_RIDGE);
    let target = Vector3::from_iterator(target.iter().map(|t| t.clamp(0.02 * len, 0.98 * len)));
    let feats: Vec<Vector3<f64>> = stats.iter().map(|f| Vector3::new(f[0], f[1], f[2])).collect();

    let evaluate = |theta: &Vector3<f64>| {
        let scores: Vec<f64> = feats.iter().map(|f| theta.dot(f)).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let z: f64 = weights.iter().sum();
        let dual = top + z.ln() - theta.dot(&target) + 0.5 * theta.dot(&ridge.component_mul(theta));
        (weights.into_iter().map(|w| w / z).collect::<Vec<_>>(), dual)
    };

    let mut theta = Vector3::zeros();
    let (mut probs, mut dual) = evaluate(&theta);
    for _ in 0..200 {
        let mean: Vector3<f64> = feats.iter().zip(&probs).map(|(f, p)| f * *p).sum();
        let grad = mean - target + ridge.component_mul(&theta);
        if grad.amax() < 1e-9 {
            break;
        }
        let mut hess = Matrix3::from_diagonal(&ridge);
        for (f, p) in feats.iter().zip(&probs) {
            let d = f - mean;
            hess += d * d.transpose() * *p;
        }
        let step = hess.try_inverse().map(|h| h * grad).unwrap_or(grad);
        let mut scale = 1.0;
        loop {
            let candidate = theta - step * scale;
            let (p, d) = evaluate(&candidate);
            if d <= dual - 1e-4 * scale * grad.dot(&step) || scale < 1e-8 {
                theta = candidate;
                probs = p;
                dual = d;
                break;
            }
            scale *= 0.5;
        }
    }
    probs
}
