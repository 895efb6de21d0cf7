//! Day-stepped simulation over a replayed CogSNet.
//!
//! Each simulated day every edge of weight `w` triggers a speaker-to-listener
//! interaction in each direction with probability `min(1, w * interactions_per_day)`.
//! The day's interactions run in a shuffled order and state changes are
//! stamped with the day's timestamp.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kernel::{express, interact, naming_game_interact, AdditiveKernel, AgentState, OpinionVector};
use super::{CodingParams, InitPolicy};
use crate::cogsnet::{CogsnetError, CogsnetParams, NetworkReplay};
use crate::data::{Dataset, Question, Stance, Timestamp, FIRST_WAVE};
use crate::seed;

const DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("question {0} has no opinion records in this dataset")]
    UnknownQuestion(Question),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cogsnet(#[from] CogsnetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Model {
    Coding(CodingParams),
    NamingGame { interactions_per_day: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub timestamp: Timestamp,
    pub state: Stance,
    /// Opinion vector at this point (CoDiNG only).
    pub vector: Option<OpinionVector>,
}

/// Discrete-state history per participant. A point is stored at the start
/// time and at every interaction that changed the expressed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub question: Question,
    pub model: Model,
    pub seed: u64,
    pub cogsnet: CogsnetParams,
    pub start: Timestamp,
    pub end: Timestamp,
    pub participants: Vec<String>,
    pub series: Vec<Vec<TracePoint>>,
    pub interactions: u64,
}

impl SimulationTrace {
    /// Expressed state at `t`, `None` outside `[start, end]`.
    pub fn state_at(&self, participant: usize, t: Timestamp) -> Option<Stance> {
        if t < self.start || t > self.end {
            return None;
        }
        let s = &self.series[participant];
        let i = s.partition_point(|p| p.timestamp <= t);
        Some(s[i.saturating_sub(1)].state)
    }

    pub fn final_state(&self, participant: usize) -> Stance {
        self.series[participant]
            .last()
            .expect("series start with an initial point")
            .state
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.participants.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }
}

trait Dynamics {
    fn interact(&mut self, speaker: usize, listener: usize, rng: &mut seed::Rng);
    fn point(&self, i: usize, t: Timestamp) -> TracePoint;
}

struct CodingAgents {
    agents: Vec<AgentState>,
    gamma: f64,
    kernel: AdditiveKernel,
}

impl Dynamics for CodingAgents {
    fn interact(&mut self, speaker: usize, listener: usize, rng: &mut seed::Rng) {
        let (s, l) = pair_mut(&mut self.agents, speaker, listener);
        interact(s, l, self.gamma, &self.kernel, rng);
    }

    fn point(&self, i: usize, t: Timestamp) -> TracePoint {
        let v = self.agents[i].vector;
        TracePoint {
            timestamp: t,
            state: express(v, self.gamma),
            vector: Some(v),
        }
    }
}

struct NamingAgents {
    states: Vec<Stance>,
}

impl Dynamics for NamingAgents {
    fn interact(&mut self, speaker: usize, listener: usize, rng: &mut seed::Rng) {
        let (s, l) = pair_mut(&mut self.states, speaker, listener);
        naming_game_interact(s, l, rng);
    }

    fn point(&self, i: usize, t: Timestamp) -> TracePoint {
        TracePoint {
            timestamp: t,
            state: self.states[i],
            vector: None,
        }
    }
}

fn pair_mut<T>(xs: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = xs.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = xs.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

fn check_question(dataset: &Dataset, question: Question) -> Result<(), SimError> {
    if dataset.opinions().iter().any(|o| o.question == question) {
        Ok(())
    } else {
        Err(SimError::UnknownQuestion(question))
    }
}

#[allow(clippy::too_many_arguments)]
fn run<D: Dynamics>(
    dataset: &Dataset,
    cogsnet: &CogsnetParams,
    question: Question,
    model: Model,
    interactions_per_day: f64,
    seed: u64,
    mut rng: seed::Rng,
    mut dynamics: D,
) -> Result<SimulationTrace, SimError> {
    let n = dataset.len();
    let events = dataset.indexed_events();
    let mut replay = NetworkReplay::new(*cogsnet, n, &events)?;
    let start = dataset.calendar().start();
    let end = dataset.calendar().end();

    let mut series: Vec<Vec<TracePoint>> = (0..n).map(|i| vec![dynamics.point(i, start)]).collect();
    let mut interactions = 0u64;
    let mut schedule = Vec::new();
    let mut day = 1i64;
    loop {
        let t = start + day * DAY;
        if t > end {
            break;
        }
        schedule.clear();
        for (u, v, w) in replay.weighted_edges(t)? {
            let p = (w * interactions_per_day).min(1.0);
            for (s, l) in [(u, v), (v, u)] {
                if rng.random::<f64>() < p {
                    schedule.push((s, l));
                }
            }
        }
        schedule.shuffle(&mut rng);
        for &(s, l) in &schedule {
            dynamics.interact(s, l, &mut rng);
            for i in [s, l] {
                let pt = dynamics.point(i, t);
                if pt.state != series[i].last().unwrap().state {
                    series[i].push(pt);
                }
            }
        }
        interactions += schedule.len() as u64;
        day += 1;
    }
    if interactions == 0 {
        log::warn!("{question}: no interactions took place; trace holds the initial states");
    }
    Ok(SimulationTrace {
        question,
        model,
        seed,
        cogsnet: *cogsnet,
        start,
        end,
        participants: dataset.participant_ids().map(str::to_string).collect(),
        series,
        interactions,
    })
}

fn random_vector(rng: &mut seed::Rng) -> OpinionVector {
    OpinionVector::new(rng.random::<f64>(), rng.random::<f64>())
}

/// Run CoDiNG for `question` between the first and last survey wave.
pub fn run_coding(
    dataset: &Dataset,
    cogsnet: &CogsnetParams,
    question: Question,
    params: &CodingParams,
    seed: u64,
) -> Result<SimulationTrace, SimError> {
    params.validate().map_err(SimError::InvalidParams)?;
    check_question(dataset, question)?;
    let mut rng = seed::rng(seed);
    let agents = (0..dataset.len())
        .map(|i| {
            let init = match params.init_policy {
                InitPolicy::FromWave1 => OpinionVector::from_stance(dataset.stance(i, question, FIRST_WAVE)),
                InitPolicy::Uniform => None,
            };
            AgentState {
                vector: init.unwrap_or_else(|| random_vector(&mut rng)),
            }
        })
        .collect();
    let dynamics = CodingAgents {
        agents,
        gamma: params.gamma,
        kernel: AdditiveKernel { delta: params.delta },
    };
    run(
        dataset,
        cogsnet,
        question,
        Model::Coding(*params),
        params.interactions_per_day,
        seed,
        rng,
        dynamics,
    )
}

/// Run the three-state Naming Game with the same scheduling as [`run_coding`].
pub fn run_naming_game(
    dataset: &Dataset,
    cogsnet: &CogsnetParams,
    question: Question,
    interactions_per_day: f64,
    seed: u64,
) -> Result<SimulationTrace, SimError> {
    check_question(dataset, question)?;
    let mut rng = seed::rng(seed);
    let states = (0..dataset.len())
        .map(|i| match dataset.stance(i, question, FIRST_WAVE) {
            Stance::Missing => [Stance::A, Stance::B, Stance::AB][rng.random_range(0..3)],
            s => s,
        })
        .collect();
    run(
        dataset,
        cogsnet,
        question,
        Model::NamingGame { interactions_per_day },
        interactions_per_day,
        seed,
        rng,
        NamingAgents { states },
    )
}

/// `participant,question,timestamp,state` rows for every stored trace point.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["participant", "question", "timestamp", "state"])
        .expect("in-memory write");
    for (id, points) in trace.participants.iter().zip(&trace.series) {
        for p in points {
            w.write_record([
                id.as_str(),
                trace.question.shortcode(),
                &p.timestamp.to_string(),
                p.state.as_str(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
