//! CogSNet: a temporal network whose edge weights are reinforced by
//! communication events and decay with an exponential forgetting function.
//!
//! On each event for a pair with current weight `w_last` decayed over `dt`:
//!
//! ```text
//! w <- mu + w_last * f(dt) * (1 - mu)      (edge present)
//! w <- mu                                  (edge absent or already pruned)
//! ```
//!
//! with `f(dt) = exp(-lambda * dt)`. A pair whose decayed weight falls below
//! `theta` is treated as having no edge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Channel, IndexedEvent, Timestamp};
use crate::graph::WeightedGraph;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, PartialEq)]
pub enum CogsnetError {
    #[error("invalid CogSNet parameters: {0}")]
    InvalidParams(String),
    #[error("negative forgetting interval {0}")]
    NegativeInterval(f64),
    #[error("out-of-order event at {event} (network clock is {clock})")]
    OutOfOrder { clock: Timestamp, event: Timestamp },
    #[error("query at {query} precedes the pair's last event at {last}")]
    QueryBeforeLastEvent { query: Timestamp, last: Timestamp },
    #[error("node {0} out of range")]
    UnknownNode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forgetting {
    #[default]
    Exponential,
}

/// Parameters with `lambda` in 1/second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CogsnetParams {
    pub mu: f64,
    pub theta: f64,
    pub lambda: f64,
    #[serde(default)]
    pub forgetting: Forgetting,
    /// Multipliers on `mu` per channel.
    #[serde(default = "one")]
    pub call_multiplier: f64,
    #[serde(default = "one")]
    pub text_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for CogsnetParams {
    /// mu = 0.4, theta = 0.1, half-life of seven days.
    fn default() -> Self {
        CogsnetParams {
            mu: 0.4,
            theta: 0.1,
            lambda: std::f64::consts::LN_2 / (7.0 * SECONDS_PER_DAY),
            forgetting: Forgetting::Exponential,
            call_multiplier: 1.0,
            text_multiplier: 1.0,
        }
    }
}

impl CogsnetParams {
    pub fn new(mu: f64, theta: f64, lambda: f64) -> Result<Self, CogsnetError> {
        let p = CogsnetParams {
            mu,
            theta,
            lambda,
            ..CogsnetParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_per_day(mu: f64, theta: f64, lambda_per_day: f64) -> Result<Self, CogsnetError> {
        Self::new(mu, theta, lambda_per_day / SECONDS_PER_DAY)
    }

    pub fn lambda_per_day(&self) -> f64 {
        self.lambda * SECONDS_PER_DAY
    }

    pub fn validate(&self) -> Result<(), CogsnetError> {
        let ok = self.theta > 0.0 && self.theta < self.mu && self.mu <= 1.0;
        if !ok {
            return Err(CogsnetError::InvalidParams(format!(
                "need 0 < theta < mu <= 1, got mu={} theta={}",
                self.mu, self.theta
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CogsnetError::InvalidParams(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        for m in [self.call_multiplier, self.text_multiplier] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(CogsnetError::InvalidParams(format!(
                    "channel multiplier must be > 0, got {m}"
                )));
            }
        }
        Ok(())
    }

    /// `f(dt) = exp(-lambda * dt)`.
    pub fn forgetting(&self, delta_t: f64) -> Result<f64, CogsnetError> {
        if delta_t < 0.0 || delta_t.is_nan() {
            return Err(CogsnetError::NegativeInterval(delta_t));
        }
        Ok(match self.forgetting {
            Forgetting::Exponential => (-self.lambda * delta_t).exp(),
        })
    }

    fn peak(&self, channel: Channel) -> f64 {
        let m = match channel {
            Channel::Call => self.call_multiplier,
            Channel::Text => self.text_multiplier,
        };
        (self.mu * m).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeState {
    pub weight_at_last_event: f64,
    pub last_event_time: Timestamp,
}

fn pair(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Event-driven network over nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalNetwork {
    params: CogsnetParams,
    n: usize,
    edges: BTreeMap<(usize, usize), EdgeState>,
    clock: Option<Timestamp>,
}

impl TemporalNetwork {
    pub fn new(params: CogsnetParams, n: usize) -> Result<Self, CogsnetError> {
        params.validate()?;
        Ok(TemporalNetwork {
            params,
            n,
            edges: BTreeMap::new(),
            clock: None,
        })
    }

    pub fn params(&self) -> &CogsnetParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn clock(&self) -> Option<Timestamp> {
        self.clock
    }

    pub fn edge(&self, u: usize, v: usize) -> Option<&EdgeState> {
        self.edges.get(&pair(u, v))
    }

    pub fn stored_edges(&self) -> impl Iterator<Item = ((usize, usize), &EdgeState)> {
        self.edges.iter().map(|(k, v)| (*k, v))
    }

    fn decayed(&self, e: &EdgeState, t: Timestamp) -> f64 {
        let dt = (t - e.last_event_time).max(0) as f64;
        let w = e.weight_at_last_event * (-self.params.lambda * dt).exp();
        if w < self.params.theta {
            0.0
        } else {
            w
        }
    }

    /// Reinforce the edge between `source` and `target`.
    pub fn process_event(
        &mut self,
        source: usize,
        target: usize,
        timestamp: Timestamp,
        channel: Channel,
    ) -> Result<(), CogsnetError> {
        for node in [source, target] {
            if node >= self.n {
                return Err(CogsnetError::UnknownNode(node));
            }
        }
        if let Some(clock) = self.clock {
            if timestamp < clock {
                return Err(CogsnetError::OutOfOrder {
                    clock,
                    event: timestamp,
                });
            }
        }
        let mu = self.params.peak(channel);
        let key = pair(source, target);
        let prior = self.edges.get(&key).map(|e| self.decayed(e, timestamp)).unwrap_or(0.0);
        let weight = if prior > 0.0 { mu + prior * (1.0 - mu) } else { mu };
        self.edges.insert(
            key,
            EdgeState {
                weight_at_last_event: weight,
                last_event_time: timestamp,
            },
        );
        self.clock = Some(timestamp);
        Ok(())
    }

    pub fn process(&mut self, event: &IndexedEvent) -> Result<(), CogsnetError> {
        self.process_event(event.source, event.target, event.timestamp, event.channel)
    }

    /// Decayed weight of a pair at `t`, zero when pruned or never connected.
    pub fn weight_at(&self, u: usize, v: usize, t: Timestamp) -> Result<f64, CogsnetError> {
        match self.edges.get(&pair(u, v)) {
            None => Ok(0.0),
            Some(e) if t < e.last_event_time => Err(CogsnetError::QueryBeforeLastEvent {
                query: t,
                last: e.last_event_time,
            }),
            Some(e) => Ok(self.decayed(e, t)),
        }
    }

    /// Weighted graph of all pairs with weight at least `theta` at time `t`.
    ///
    /// Edges whose last event is later than `t` contribute their weight at that
    /// last event (no backwards extrapolation).
    pub fn snapshot_at(&self, t: Timestamp) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.n);
        for (&(u, v), e) in &self.edges {
            let w = self.decayed(e, t);
            if w > 0.0 {
                g.set_edge(u, v, w);
            }
        }
        g
    }

    /// `(u, v, weight)` for every pair above threshold at `t`, sorted by pair.
    pub fn weighted_edges_at(&self, t: Timestamp) -> Vec<(usize, usize, f64)> {
        self.edges
            .iter()
            .filter_map(|(&(u, v), e)| {
                let w = self.decayed(e, t);
                (w > 0.0).then_some((u, v, w))
            })
            .collect()
    }

    /// Drop stored edges already below threshold at `t`.
    pub fn prune(&mut self, t: Timestamp) {
        let theta = self.params.theta;
        let lambda = self.params.lambda;
        self.edges.retain(|_, e| {
            let dt = (t - e.last_event_time).max(0) as f64;
            e.weight_at_last_event * (-lambda * dt).exp() >= theta
        });
    }
}

/// Replays a time-sorted event stream and produces snapshots at increasing times.
pub struct NetworkReplay<'a> {
    net: TemporalNetwork,
    events: &'a [IndexedEvent],
    cursor: usize,
}

impl<'a> NetworkReplay<'a> {
    pub fn new(params: CogsnetParams, n: usize, events: &'a [IndexedEvent]) -> Result<Self, CogsnetError> {
        Ok(NetworkReplay {
            net: TemporalNetwork::new(params, n)?,
            events,
            cursor: 0,
        })
    }

    /// Process every event with timestamp `<= t`.
    pub fn advance_to(&mut self, t: Timestamp) -> Result<(), CogsnetError> {
        while let Some(e) = self.events.get(self.cursor) {
            if e.timestamp > t {
                break;
            }
            self.net.process(e)?;
            self.cursor += 1;
        }
        Ok(())
    }

    pub fn snapshot(&mut self, t: Timestamp) -> Result<WeightedGraph, CogsnetError> {
        self.advance_to(t)?;
        Ok(self.net.snapshot_at(t))
    }

    pub fn weighted_edges(&mut self, t: Timestamp) -> Result<Vec<(usize, usize, f64)>, CogsnetError> {
        self.advance_to(t)?;
        Ok(self.net.weighted_edges_at(t))
    }

    pub fn network(&self) -> &TemporalNetwork {
        &self.net
    }
}

/// Snapshots at each requested (sorted) time.
pub fn snapshots(
    params: CogsnetParams,
    n: usize,
    events: &[IndexedEvent],
    times: &[Timestamp],
) -> Result<Vec<WeightedGraph>, CogsnetError> {
    let mut replay = NetworkReplay::new(params, n, events)?;
    times.iter().map(|&t| replay.snapshot(t)).collect()
}

/// Weighted edge-list CSV (`timestamp,u,v,weight`) with participant labels.
pub fn edge_list_csv(labels: &[&str], snaps: &[(Timestamp, &WeightedGraph)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "u", "v", "weight"])
        .expect("in-memory write");
    for (t, g) in snaps {
        for (u, v, weight) in g.edges() {
            w.write_record([
                t.to_string(),
                labels[u].to_string(),
                labels[v].to_string(),
                format!("{weight}"),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
