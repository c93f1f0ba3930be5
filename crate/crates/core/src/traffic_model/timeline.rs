//! Alternating occupied/vacant renewal timeline of one parking space.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::weibull::{sample_weibull, WeibullParams};
use crate::error::TrafficError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyState {
    Occupied,
    Vacant,
}

impl OccupancyState {
    pub fn flip(self) -> Self {
        match self {
            Self::Occupied => Self::Vacant,
            Self::Vacant => Self::Occupied,
        }
    }
}

/// One state interval; `end` equals the horizon for the final, truncated one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub state: OccupancyState,
    pub start: f64,
    pub end: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTimeline {
    pub initial_state: OccupancyState,
    pub horizon: f64,
    /// Instants of state change, strictly increasing and inside `(0, horizon)`.
    pub transitions: Vec<f64>,
}

impl OccupancyTimeline {
    pub fn intervals(&self) -> Vec<Interval> {
        let mut out = Vec::with_capacity(self.transitions.len() + 1);
        let mut state = self.initial_state;
        let mut start = 0.0;
        for &t in &self.transitions {
            out.push(Interval {
                state,
                start,
                end: t,
                truncated: false,
            });
            state = state.flip();
            start = t;
        }
        out.push(Interval {
            state,
            start,
            end: self.horizon,
            truncated: true,
        });
        out
    }

    /// State entered at transition `i`.
    pub fn state_after(&self, i: usize) -> OccupancyState {
        if i % 2 == 0 {
            self.initial_state.flip()
        } else {
            self.initial_state
        }
    }

    /// Vehicle arrivals: transitions from vacant to occupied.
    pub fn arrivals(&self) -> Vec<f64> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(i, _)| self.state_after(*i) == OccupancyState::Occupied)
            .map(|(_, &t)| t)
            .collect()
    }
}

/// Probability that a space observed at a random instant is occupied,
/// `E[T_p] / (E[T_p] + E[T_v])`.
pub fn stationary_occupied_probability(pp: &WeibullParams, pv: &WeibullParams) -> f64 {
    let (mp, mv) = (pp.mean(), pv.mean());
    mp / (mp + mv)
}

/// Draw the starting state from the stationary occupancy probability.
pub fn draw_initial_state<R: Rng + ?Sized>(
    pp: &WeibullParams,
    pv: &WeibullParams,
    rng: &mut R,
) -> OccupancyState {
    let u: f64 = rng.random();
    if u < stationary_occupied_probability(pp, pv) {
        OccupancyState::Occupied
    } else {
        OccupancyState::Vacant
    }
}

/// Alternate occupied durations from `pp` and vacant durations from `pv`
/// until `horizon`, starting in `initial_state` at time zero.
pub fn generate_occupancy_timeline<R: Rng + ?Sized>(
    pp: &WeibullParams,
    pv: &WeibullParams,
    horizon: f64,
    initial_state: OccupancyState,
    rng: &mut R,
) -> Result<OccupancyTimeline, TrafficError> {
    pp.validate()?;
    pv.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(TrafficError::InvalidParameter {
            name: "horizon",
            value: horizon,
        });
    }
    let mut transitions = Vec::new();
    let mut state = initial_state;
    let mut t = 0.0f64;
    loop {
        let p = match state {
            OccupancyState::Occupied => pp,
            OccupancyState::Vacant => pv,
        };
        let next = t + sample_weibull(p, rng.sample(Open01))?;
        // A duration below the float spacing at t would repeat the instant.
        if next >= horizon {
            break;
        }
        if next > t {
            transitions.push(next);
            t = next;
            state = state.flip();
        }
    }
    Ok(OccupancyTimeline {
        initial_state,
        horizon,
        transitions,
    })
}
