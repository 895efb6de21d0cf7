//! Expression rule and pairwise interaction kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Stance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pole {
    A,
    B,
}

impl Pole {
    pub fn stance(self) -> Stance {
        match self {
            Pole::A => Stance::A,
            Pole::B => Stance::B,
        }
    }

    pub fn other(self) -> Pole {
        match self {
            Pole::A => Pole::B,
            Pole::B => Pole::A,
        }
    }

    /// Fair coin between the two poles.
    pub fn coin<R: Rng + ?Sized>(rng: &mut R) -> Pole {
        if rng.random_bool(0.5) {
            Pole::A
        } else {
            Pole::B
        }
    }
}

/// Internal preference strengths, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpinionVector {
    pub a: f64,
    pub b: f64,
}

impl OpinionVector {
    pub fn new(a: f64, b: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        OpinionVector { a, b }
    }

    /// Pole vectors used for initialization; `None` for `Missing`.
    pub fn from_stance(s: Stance) -> Option<Self> {
        match s {
            Stance::A => Some(OpinionVector::new(1.0, 0.0)),
            Stance::B => Some(OpinionVector::new(0.0, 1.0)),
            Stance::AB => Some(OpinionVector::new(0.5, 0.5)),
            Stance::Missing => None,
        }
    }

    pub fn get(&self, p: Pole) -> f64 {
        match p {
            Pole::A => self.a,
            Pole::B => self.b,
        }
    }

    fn slot(&mut self, p: Pole) -> &mut f64 {
        match p {
            Pole::A => &mut self.a,
            Pole::B => &mut self.b,
        }
    }

    pub fn add(&mut self, p: Pole, amount: f64) {
        let s = self.slot(p);
        *s = (*s + amount).clamp(0.0, 1.0);
    }

    pub fn scaled(&self, c: f64) -> Self {
        OpinionVector::new(self.a * c, self.b * c)
    }
}

/// Discrete state revealed by an opinion vector.
///
/// `|o_A - o_B| <= gamma` expresses `AB`; exact equality is included.
pub fn express(v: OpinionVector, gamma: f64) -> Stance {
    let diff = v.a - v.b;
    if diff.abs() <= gamma {
        Stance::AB
    } else if diff > 0.0 {
        Stance::A
    } else {
        Stance::B
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub vector: OpinionVector,
}

impl AgentState {
    pub fn new(a: f64, b: f64) -> Self {
        AgentState {
            vector: OpinionVector::new(a, b),
        }
    }

    pub fn discrete_state(&self, gamma: f64) -> Stance {
        express(self.vector, gamma)
    }
}

/// Continuous update applied after an utterance.
pub trait OpinionKernel {
    /// `success` is true when the listener's pre-interaction state contained
    /// the uttered pole.
    fn update(&self, speaker: &mut OpinionVector, listener: &mut OpinionVector, uttered: Pole, success: bool);
}

/// Additive reinforcement with clamping.
///
/// The listener always moves `delta` toward the uttered pole. On success both
/// agents additionally move `delta` toward it and `delta` away from the other
/// pole, mirroring the Naming Game collapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveKernel {
    pub delta: f64,
}

impl OpinionKernel for AdditiveKernel {
    fn update(&self, speaker: &mut OpinionVector, listener: &mut OpinionVector, uttered: Pole, success: bool) {
        listener.add(uttered, self.delta);
        if success {
            listener.add(uttered.other(), -self.delta);
            speaker.add(uttered, self.delta);
            speaker.add(uttered.other(), -self.delta);
        }
    }
}

fn contains(state: Stance, pole: Pole) -> bool {
    state == Stance::AB || state == pole.stance()
}

/// Run one interaction with a fixed utterance. Returns whether it succeeded.
pub fn interact_uttering<K: OpinionKernel + ?Sized>(
    speaker: &mut AgentState,
    listener: &mut AgentState,
    uttered: Pole,
    gamma: f64,
    kernel: &K,
) -> bool {
    let success = contains(listener.discrete_state(gamma), uttered);
    kernel.update(&mut speaker.vector, &mut listener.vector, uttered, success);
    success
}

/// Speaker utters its expressed pole (a fair coin when it expresses `AB`).
pub fn interact<K: OpinionKernel + ?Sized, R: Rng + ?Sized>(
    speaker: &mut AgentState,
    listener: &mut AgentState,
    gamma: f64,
    kernel: &K,
    rng: &mut R,
) -> (Pole, bool) {
    let uttered = match speaker.discrete_state(gamma) {
        Stance::A => Pole::A,
        Stance::B => Pole::B,
        _ => Pole::coin(rng),
    };
    let success = interact_uttering(speaker, listener, uttered, gamma, kernel);
    (uttered, success)
}

/// Naming Game listener rule: unknown word is added, known word collapses.
pub fn naming_game_listener(listener: Stance, uttered: Pole) -> (Stance, bool) {
    if contains(listener, uttered) {
        (uttered.stance(), true)
    } else {
        (Stance::AB, false)
    }
}

/// One Naming Game exchange. Returns the uttered word.
pub fn naming_game_interact<R: Rng + ?Sized>(speaker: &mut Stance, listener: &mut Stance, rng: &mut R) -> Pole {
    let uttered = match *speaker {
        Stance::A => Pole::A,
        Stance::B => Pole::B,
        _ => Pole::coin(rng),
    };
    let (next, success) = naming_game_listener(*listener, uttered);
    *listener = next;
    if success {
        *speaker = uttered.stance();
    }
    uttered
}
