//! Environment, transition and reward-transformer contracts.

use serde::{Deserialize, Serialize};

use crate::Result;

/// Index of a discrete action, `< Environment::action_count()`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

/// Ball configuration in the pinball domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinballState {
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl PinballState {
    pub fn at_rest(x: f64, y: f64) -> Self {
        PinballState {
            x,
            y,
            xdot: 0.0,
            ydot: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.xdot, self.ydot]
    }

    pub fn speed(&self) -> f64 {
        self.xdot.hypot(self.ydot)
    }
}

/// State of either shipped domain.
///
/// Both kinds expose a canonical observation vector: the cell id for grids
/// (length 1), `(x, y, xdot, ydot)` for pinball (length 4).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvState {
    Discrete { cell: usize },
    Continuous(PinballState),
}

impl EnvState {
    pub fn observation_len(&self) -> usize {
        match self {
            EnvState::Discrete { .. } => 1,
            EnvState::Continuous(_) => 4,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        match self {
            EnvState::Discrete { cell } => vec![*cell as f64],
            EnvState::Continuous(p) => p.as_array().to_vec(),
        }
    }

    /// Single observation component without allocating.
    pub fn observation_at(&self, index: usize) -> Option<f64> {
        match (self, index) {
            (EnvState::Discrete { cell }, 0) => Some(*cell as f64),
            (EnvState::Continuous(p), i) if i < 4 => Some(p.as_array()[i]),
            _ => None,
        }
    }

    pub fn cell(&self) -> Option<usize> {
        match self {
            EnvState::Discrete { cell } => Some(*cell),
            EnvState::Continuous(_) => None,
        }
    }

    pub fn pinball(&self) -> Option<&PinballState> {
        match self {
            EnvState::Continuous(p) => Some(p),
            EnvState::Discrete { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

/// One recorded transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: EnvState,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: EnvState,
    pub terminal: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_index: usize,
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn new(episode_index: usize) -> Self {
        Trajectory {
            episode_index,
            steps: Vec::new(),
        }
    }

    /// `next_state` of every step equals `state` of the following one.
    pub fn is_contiguous(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].next_state == w[1].state)
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|t| t.reward)
    }
}

/// An episodic environment with a discrete action set.
pub trait Environment: Send {
    fn action_count(&self) -> usize;

    /// Maximum number of steps before an episode is truncated.
    fn step_cap(&self) -> usize;

    /// Returns the fixed start state and clears the step counter. Both shipped
    /// domains are deterministic, so the seed only matters for stochastic
    /// implementations of this trait.
    fn reset(&mut self, seed: u64) -> EnvState;

    /// Fails with a usage error once the episode has terminated or been truncated.
    fn step(&mut self, action: ActionId) -> Result<StepOutcome>;

    fn state(&self) -> EnvState;

    fn steps_taken(&self) -> usize;
}

/// Borrowed view of the transition handed to a reward transformer.
#[derive(Clone, Copy, Debug)]
pub struct StepView<'a> {
    pub state: &'a EnvState,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: &'a EnvState,
    pub terminal: bool,
    pub truncated: bool,
}

impl<'a> StepView<'a> {
    pub fn of(t: &'a Transition) -> Self {
        StepView {
            state: &t.state,
            action: t.action,
            reward: t.reward,
            next_state: &t.next_state,
            terminal: t.terminal,
            truncated: t.truncated,
        }
    }
}

/// Produces the additional shaping reward `F` added to every environment reward.
pub trait RewardTransformer: Send {
    fn begin_episode(&mut self, initial: &EnvState);

    /// Shaping reward for one transition; called exactly once per environment step.
    fn shape(&mut self, step: &StepView<'_>) -> Result<f64>;

    fn end_episode(&mut self) {}
}

/// The unshaped baseline: `F = 0` everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl RewardTransformer for Identity {
    fn begin_episode(&mut self, _initial: &EnvState) {}

    fn shape(&mut self, _step: &StepView<'_>) -> Result<f64> {
        Ok(0.0)
    }
}
