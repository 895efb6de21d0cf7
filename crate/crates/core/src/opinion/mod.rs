//! Opinion dynamics on CogSNet snapshots.
//!
//! CoDiNG agents carry a continuous vector `(o_A, o_B)` in `[0,1]^2` and reveal
//! only the discrete state it expresses: the stronger pole when
//! `|o_A - o_B| > gamma`, otherwise the mixed state `AB`. The classical
//! three-state Naming Game serves as the baseline.

mod kernel;
mod label;
mod simulate;

pub use kernel::{
    express, interact, interact_uttering, naming_game_interact, naming_game_listener, AdditiveKernel, AgentState,
    OpinionKernel, OpinionVector, Pole,
};
pub use label::{label_mispredictions, samples_csv, LabelError, MisclassificationSample};
pub use simulate::{run_coding, run_naming_game, trace_csv, Model, SimError, SimulationTrace, TracePoint};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitPolicy {
    #[default]
    FromWave1,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    /// Expression threshold in `[0, 1)`.
    pub gamma: f64,
    /// Reinforcement step in `(0, 1]`.
    pub delta: f64,
    /// Expected directed interactions per day on an edge of weight 1.
    pub interactions_per_day: f64,
    #[serde(default)]
    pub init_policy: InitPolicy,
}

impl Default for CodingParams {
    fn default() -> Self {
        CodingParams {
            gamma: 0.2,
            delta: 0.1,
            interactions_per_day: 1.0,
            init_policy: InitPolicy::FromWave1,
        }
    }
}

impl CodingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.interactions_per_day >= 0.0 && self.interactions_per_day.is_finite()) {
            return Err(format!(
                "interactions_per_day must be finite and non-negative, got {}",
                self.interactions_per_day
            ));
        }
        Ok(())
    }
}

/// Seed of the CoDiNG run for `question` under a root seed. The synthetic
/// generator and the audit pipeline both use it, so a dataset generated with
/// seed `s` is simulated identically by an audit rooted at `s`.
pub fn simulation_seed(root: u64, question: crate::Question) -> u64 {
    crate::seed::derive(root, &["simulate", question.shortcode()])
}
