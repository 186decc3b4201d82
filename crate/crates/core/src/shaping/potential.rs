use crate::mdp::{EnvState, RewardTransformer, StepView};
use crate::shaping::potential_shaping_reward;
use crate::{Error, Result};

/// A fixed state potential.
pub trait Potential: Send {
    fn potential(&self, state: &EnvState) -> Result<f64>;
}

/// Potential stored per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPotential(pub Vec<f64>);

impl Potential for TabularPotential {
    fn potential(&self, state: &EnvState) -> Result<f64> {
        state
            .cell()
            .and_then(|c| self.0.get(c).copied())
            .ok_or_else(|| Error::usage(format!("no tabular potential for {state:?}")))
    }
}

/// Static potential-based shaping with the absorbing-terminal convention.
#[derive(Clone, Debug)]
pub struct PotentialShaper<P> {
    potential: P,
    gamma: f64,
}

impl<P: Potential> PotentialShaper<P> {
    pub fn new(potential: P, gamma: f64) -> Self {
        PotentialShaper { potential, gamma }
    }

    pub fn potential(&self) -> &P {
        &self.potential
    }

    pub fn reward(&self, state: &EnvState, next: &EnvState, terminal: bool) -> Result<f64> {
        let prev = self.potential.potential(state)?;
        let next = if terminal {
            0.0
        } else {
            self.potential.potential(next)?
        };
        Ok(potential_shaping_reward(prev, next, self.gamma))
    }
}

impl<P: Potential> RewardTransformer for PotentialShaper<P> {
    fn begin_episode(&mut self, _initial: &EnvState) {}

    fn shape(&mut self, step: &StepView<'_>) -> Result<f64> {
        self.reward(step.state, step.next_state, step.terminal)
    }
}
