//! Reward-shaping strategies.
//!
//! Every strategy is potential-based: it pays `F = gamma * phi(next) - phi(prev)`,
//! with `phi = 0` once the environment terminates. They differ in where the
//! potential comes from:
//!
//! - [`PotentialShaper`] over a fixed [`Potential`] (including [`NrsPotential`]);
//! - [`StaticAggregationShaper`]: a value function learned over a fixed state
//!   partition (e.g. rooms);
//! - [`DynamicShaper`]: a value function learned over abstract states that count
//!   the subgoals achieved so far in the episode.

mod dynamic;
mod nrs;
mod potential;
mod static_agg;

pub use dynamic::{dynamic_shaping_step, DynamicShaper, SegmentEnd, SegmentRecord};
pub use nrs::{nrs_potential, NrsPotential};
pub use potential::{Potential, PotentialShaper, TabularPotential};
pub use static_agg::{StaticAggregation, StaticAggregationShaper};

use serde::{Deserialize, Serialize};

use crate::mdp::EnvState;
use crate::subgoal::{AchievementCursor, SubgoalSeries};
use crate::Result;

/// `gamma * phi_next - phi_prev`. Pass `phi_next = 0` for terminal transitions.
pub fn potential_shaping_reward(phi_prev: f64, phi_next: f64, gamma: f64) -> f64 {
    gamma * phi_next - phi_prev
}

/// Which table values the shaping reward reads on a step that also updates the table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialTiming {
    /// Values after this step's abstract update (the update precedes `F`).
    #[default]
    PostUpdate,
    PreUpdate,
}

/// What an abstract value update bootstraps from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bootstrap {
    Abstract(usize),
    /// The environment terminated: the bootstrap value is 0.
    Terminal,
}

/// Potential source `V(z)` over abstract states.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractValueTable {
    values: Vec<f64>,
    alpha: f64,
    gamma: f64,
}

impl AbstractValueTable {
    /// Zero-initialized table of `size` abstract states.
    pub fn new(size: usize, alpha: f64, gamma: f64) -> Self {
        AbstractValueTable {
            values: vec![0.0; size],
            alpha,
            gamma,
        }
    }

    /// `n + 1` abstract states for an `n`-subgoal series.
    pub fn for_series(series: &SubgoalSeries, alpha: f64, gamma: f64) -> Self {
        Self::new(series.len() + 1, alpha, gamma)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, z: usize) -> f64 {
        self.values[z]
    }

    pub fn set(&mut self, z: usize, v: f64) {
        self.values[z] = v;
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// SMDP TD update `V(z) += alpha (r_h + gamma^k V(next) - V(z))` over a
    /// segment of `k` steps. Returns the TD error.
    pub fn update(&mut self, z: usize, next: Bootstrap, r_h: f64, k: usize) -> f64 {
        let bootstrap = match next {
            Bootstrap::Abstract(n) => self.gamma.powi(k as i32) * self.values[n],
            Bootstrap::Terminal => 0.0,
        };
        let delta = r_h + bootstrap - self.values[z];
        self.values[z] += self.alpha * delta;
        delta
    }
}

/// Per-episode bookkeeping of the current abstract segment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShapingContext {
    /// Current abstract state; equals `cursor.achieved()` under subgoal aggregation.
    pub z: usize,
    /// Steps since entering `z`.
    pub t: usize,
    /// Discounted reward accumulated since entering `z`.
    pub r_h: f64,
    pub cursor: AchievementCursor,
}

impl ShapingContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `gamma^t * reward` to `r_h`, then increments `t`; the first reward
    /// of a segment carries weight 1.
    pub fn accumulate(&mut self, reward: f64, gamma: f64) {
        self.r_h += gamma.powi(self.t as i32) * reward;
        self.t += 1;
    }

    /// Starts a new segment in abstract state `z`.
    pub fn enter(&mut self, z: usize) {
        self.z = z;
        self.t = 0;
        self.r_h = 0.0;
    }
}

/// Functional form of [`ShapingContext::accumulate`].
pub fn accumulate(context: ShapingContext, reward: f64, gamma: f64) -> ShapingContext {
    let mut c = context;
    c.accumulate(reward, gamma);
    c
}

/// Abstract state after observing `state`: `z + 1` if the next subgoal in
/// order matches, otherwise `z`.
pub fn filter(state: &EnvState, context: &ShapingContext, series: &SubgoalSeries) -> Result<usize> {
    match series.subgoals.get(context.cursor.achieved()) {
        Some(next) if next.matches(state)? => Ok(context.z + 1),
        _ => Ok(context.z),
    }
}

/// Functional form of [`AbstractValueTable::update`].
pub fn update_abstract_value(
    table: &AbstractValueTable,
    z: usize,
    next: Bootstrap,
    r_h: f64,
    k: usize,
) -> AbstractValueTable {
    let mut t = table.clone();
    t.update(z, next, r_h, k);
    t
}
