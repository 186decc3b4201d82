//! Base learners that consume environment reward plus shaping reward.

mod actor_critic;
mod fourier;
mod sarsa;
mod softmax;

pub use actor_critic::{ActorCritic, ActorCriticParams};
pub use fourier::FourierBasis;
pub use sarsa::{q_learning_update, sarsa_update, QTable, SarsaAgent, TdRule};
pub use softmax::{softmax_probs, softmax_select};

use crate::mdp::{ActionId, EnvState};
use crate::Result;

/// One step of experience handed to a learner.
#[derive(Clone, Copy, Debug)]
pub struct Feedback<'a> {
    pub state: &'a EnvState,
    pub action: ActionId,
    pub reward: f64,
    pub shaping: f64,
    pub next_state: &'a EnvState,
    pub terminal: bool,
    pub truncated: bool,
}

impl Feedback<'_> {
    pub fn episode_over(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// An on-policy control agent driven one transition at a time.
pub trait Learner: Send {
    /// Chooses the first action of an episode.
    fn start(&mut self, state: &EnvState) -> Result<ActionId>;

    /// Learns from one transition and returns the next action, or `None` when
    /// the episode is over.
    fn learn(&mut self, feedback: &Feedback<'_>) -> Result<Option<ActionId>>;
}
