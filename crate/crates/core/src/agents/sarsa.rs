use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::softmax::{sample, softmax_probs};
use crate::agents::{Feedback, Learner};
use crate::mdp::{ActionId, EnvState};
use crate::{Error, Result};

/// Action values over discrete states, zero-initialized.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    n_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        QTable {
            values: vec![0.0; n_states * n_actions],
            n_actions,
            alpha,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: ActionId) -> f64 {
        self.values[s * self.n_actions + a.0]
    }

    pub fn set(&mut self, s: usize, a: ActionId, v: f64) {
        self.values[s * self.n_actions + a.0] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action at `s`, lowest index on ties.
    pub fn greedy(&self, s: usize) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        ActionId(best)
    }

    fn td(&mut self, s: usize, a: ActionId, target: f64) {
        let i = s * self.n_actions + a.0;
        self.values[i] += self.alpha * (target - self.values[i]);
    }
}

/// `Q(s,a) += alpha (r + F + gamma Q(s',a') [not terminal] - Q(s,a))`.
#[allow(clippy::too_many_arguments)]
pub fn sarsa_update(
    q: &mut QTable,
    s: usize,
    a: ActionId,
    r: f64,
    f: f64,
    s_next: usize,
    a_next: ActionId,
    terminal: bool,
) {
    let bootstrap = if terminal {
        0.0
    } else {
        q.gamma * q.get(s_next, a_next)
    };
    q.td(s, a, r + f + bootstrap);
}

/// Off-policy form with `max_a' Q(s',a')`.
pub fn q_learning_update(
    q: &mut QTable,
    s: usize,
    a: ActionId,
    r: f64,
    f: f64,
    s_next: usize,
    terminal: bool,
) {
    let bootstrap = if terminal { 0.0 } else { q.gamma * q.max(s_next) };
    q.td(s, a, r + f + bootstrap);
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdRule {
    #[default]
    Sarsa,
    QLearning,
}

/// Tabular agent with a softmax policy over `Q(s, .) / temperature`.
#[derive(Clone, Debug)]
pub struct SarsaAgent {
    q: QTable,
    temperature: f64,
    rule: TdRule,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
}

impl SarsaAgent {
    pub fn new(q: QTable, temperature: f64, rng: ChaCha8Rng) -> Self {
        SarsaAgent {
            q,
            temperature,
            rule: TdRule::Sarsa,
            rng,
            probs: Vec::new(),
        }
    }

    pub fn with_rule(mut self, rule: TdRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn set_temperature(&mut self, temperature: f64) {
        self.temperature = temperature;
    }

    fn cell(state: &EnvState) -> Result<usize> {
        state
            .cell()
            .ok_or_else(|| Error::usage("tabular agent needs a discrete state"))
    }

    fn select(&mut self, s: usize) -> Result<ActionId> {
        softmax_probs(self.q.row(s), self.temperature, &mut self.probs)?;
        Ok(sample(&self.probs, &mut self.rng))
    }
}

impl Learner for SarsaAgent {
    fn start(&mut self, state: &EnvState) -> Result<ActionId> {
        let s = Self::cell(state)?;
        self.select(s)
    }

    fn learn(&mut self, fb: &Feedback<'_>) -> Result<Option<ActionId>> {
        let s = Self::cell(fb.state)?;
        let s_next = Self::cell(fb.next_state)?;
        if fb.terminal {
            sarsa_update(
                &mut self.q,
                s,
                fb.action,
                fb.reward,
                fb.shaping,
                s_next,
                fb.action,
                true,
            );
            return Ok(None);
        }
        let a_next = self.select(s_next)?;
        match self.rule {
            TdRule::Sarsa => sarsa_update(
                &mut self.q,
                s,
                fb.action,
                fb.reward,
                fb.shaping,
                s_next,
                a_next,
                false,
            ),
            TdRule::QLearning => {
                q_learning_update(&mut self.q, s, fb.action, fb.reward, fb.shaping, s_next, false)
            }
        }
        Ok((!fb.truncated).then_some(a_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_update_from_zero() {
        let mut q = QTable::new(4, 4, 0.01, 0.99);
        sarsa_update(&mut q, 0, ActionId(1), 1.0, 0.0, 1, ActionId(0), true);
        assert!((q.get(0, ActionId(1)) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_td_error_is_fixed_point() {
        let mut q = QTable::new(4, 4, 0.01, 1.0);
        q.set(0, ActionId(0), 0.7);
        q.set(1, ActionId(2), 0.7);
        let before = q.clone();
        sarsa_update(&mut q, 0, ActionId(0), 0.0, 0.0, 1, ActionId(2), false);
        assert_eq!(q, before);
    }

    #[test]
    fn shaping_enters_target() {
        let mut q = QTable::new(4, 4, 0.01, 0.99);
        sarsa_update(&mut q, 2, ActionId(3), 0.0, 0.495, 3, ActionId(0), false);
        assert!((q.get(2, ActionId(3)) - 0.00495).abs() < 1e-15);
    }

    #[test]
    fn q_learning_uses_max() {
        let mut q = QTable::new(2, 2, 0.5, 1.0);
        q.set(1, ActionId(1), 2.0);
        q_learning_update(&mut q, 0, ActionId(0), 0.0, 0.0, 1, false);
        assert_eq!(q.get(0, ActionId(0)), 1.0);
        assert_eq!(q.greedy(1), ActionId(1));
    }
}
