use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::softmax::{sample, softmax_probs};
use crate::agents::{Feedback, FourierBasis, Learner};
use crate::mdp::{ActionId, EnvState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorCriticParams {
    pub alpha_critic: f64,
    pub alpha_actor: f64,
    pub gamma: f64,
    pub temperature: f64,
    /// Probability of replacing the policy's choice with a uniform action.
    pub explore_prob: f64,
    /// Scale critic step sizes per feature by `1 / |c|`.
    pub scale_critic: bool,
}

impl Default for ActorCriticParams {
    fn default() -> Self {
        ActorCriticParams {
            alpha_critic: 0.01,
            alpha_actor: 0.01,
            gamma: 0.99,
            temperature: 1.0,
            explore_prob: 0.1,
            scale_critic: true,
        }
    }
}

/// One-step actor-critic: linear critic `V(s) = w . phi(s)` and a softmax
/// actor over linear preferences `h_a(s) = theta_a . phi(s)`.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    basis: FourierBasis,
    params: ActorCriticParams,
    n_actions: usize,
    critic: Vec<f64>,
    actor: Vec<f64>,
    rng: ChaCha8Rng,
    phi: Vec<f64>,
    phi_next: Vec<f64>,
    prefs: Vec<f64>,
    probs: Vec<f64>,
}

impl ActorCritic {
    pub fn new(basis: FourierBasis, n_actions: usize, params: ActorCriticParams, rng: ChaCha8Rng) -> Self {
        let n = basis.len();
        ActorCritic {
            basis,
            params,
            n_actions,
            critic: vec![0.0; n],
            actor: vec![0.0; n * n_actions],
            rng,
            phi: vec![0.0; n],
            phi_next: vec![0.0; n],
            prefs: vec![0.0; n_actions],
            probs: Vec::with_capacity(n_actions),
        }
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn params(&self) -> &ActorCriticParams {
        &self.params
    }

    pub fn critic_weights(&self) -> &[f64] {
        &self.critic
    }

    pub fn actor_weights(&self) -> &[f64] {
        &self.actor
    }

    pub fn actor_weights_mut(&mut self) -> &mut [f64] {
        &mut self.actor
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        dot(&self.critic, phi)
    }

    fn fill_prefs(&mut self, phi: &[f64]) {
        let n = phi.len();
        for (a, h) in self.prefs.iter_mut().enumerate() {
            *h = dot(&self.actor[a * n..(a + 1) * n], phi);
        }
    }

    /// Softmax part of the policy (without the uniform exploration mixture).
    pub fn policy(&mut self, phi: &[f64]) -> Result<Vec<f64>> {
        self.fill_prefs(phi);
        let mut p = Vec::new();
        softmax_probs(&self.prefs, self.params.temperature, &mut p)?;
        Ok(p)
    }

    /// `log pi(a | s)` of the softmax part.
    pub fn log_policy(&mut self, phi: &[f64], action: ActionId) -> Result<f64> {
        Ok(self.policy(phi)?[action.0].ln())
    }

    /// Gradient of `log pi(a | s)` with respect to the actor weights, laid out
    /// like [`ActorCritic::actor_weights`]: `(1{b = a} - pi(b|s)) phi(s) / tau`.
    pub fn log_policy_gradient(&mut self, phi: &[f64], action: ActionId) -> Result<Vec<f64>> {
        let probs = self.policy(phi)?;
        let n = phi.len();
        let mut g = vec![0.0; self.actor.len()];
        for (b, p) in probs.iter().enumerate() {
            let coef = ((b == action.0) as u8 as f64 - p) / self.params.temperature;
            for (gi, &f) in g[b * n..(b + 1) * n].iter_mut().zip(phi) {
                *gi = coef * f;
            }
        }
        Ok(g)
    }

    fn select(&mut self, phi_is_next: bool) -> Result<ActionId> {
        if self.rng.random::<f64>() < self.params.explore_prob {
            return Ok(ActionId(self.rng.random_range(0..self.n_actions)));
        }
        let phi = if phi_is_next {
            std::mem::take(&mut self.phi_next)
        } else {
            std::mem::take(&mut self.phi)
        };
        self.fill_prefs(&phi);
        if phi_is_next {
            self.phi_next = phi;
        } else {
            self.phi = phi;
        }
        softmax_probs(&self.prefs, self.params.temperature, &mut self.probs)?;
        Ok(sample(&self.probs, &mut self.rng))
    }

    /// One TD(0) actor-critic update. Returns the TD error.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        phi: &[f64],
        action: ActionId,
        reward: f64,
        shaping: f64,
        phi_next: &[f64],
        terminal: bool,
    ) -> Result<f64> {
        let bootstrap = if terminal {
            0.0
        } else {
            self.params.gamma * self.value(phi_next)
        };
        let delta = reward + shaping + bootstrap - self.value(phi);
        if !delta.is_finite() {
            return Err(Error::Numeric(format!("non-finite TD error {delta}")));
        }
        if delta == 0.0 {
            return Ok(0.0);
        }

        self.fill_prefs(phi);
        softmax_probs(&self.prefs, self.params.temperature, &mut self.probs)?;
        let n = phi.len();
        let step = self.params.alpha_actor * delta / self.params.temperature;
        for b in 0..self.n_actions {
            let coef = step * ((b == action.0) as u8 as f64 - self.probs[b]);
            for (w, &f) in self.actor[b * n..(b + 1) * n].iter_mut().zip(phi) {
                *w += coef * f;
            }
        }

        let step = self.params.alpha_critic * delta;
        if self.params.scale_critic {
            for ((w, &f), &k) in self.critic.iter_mut().zip(phi).zip(self.basis.scales()) {
                *w += step * k * f;
            }
        } else {
            for (w, &f) in self.critic.iter_mut().zip(phi) {
                *w += step * f;
            }
        }
        Ok(delta)
    }

    fn encode(&self, state: &EnvState, out: &mut [f64]) -> Result<()> {
        let p = state
            .pinball()
            .ok_or_else(|| Error::usage("actor-critic needs a continuous state"))?;
        self.basis.features_into(&p.as_array(), out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Learner for ActorCritic {
    fn start(&mut self, state: &EnvState) -> Result<ActionId> {
        let mut phi = std::mem::take(&mut self.phi);
        let r = self.encode(state, &mut phi);
        self.phi = phi;
        r?;
        self.select(false)
    }

    fn learn(&mut self, fb: &Feedback<'_>) -> Result<Option<ActionId>> {
        let mut next = std::mem::take(&mut self.phi_next);
        let encoded = self.encode(fb.next_state, &mut next);
        let phi = std::mem::take(&mut self.phi);
        let updated =
            encoded.and_then(|_| self.update(&phi, fb.action, fb.reward, fb.shaping, &next, fb.terminal));
        // the next state's features become the current ones
        self.phi = next;
        self.phi_next = phi;
        updated?;
        if fb.episode_over() {
            return Ok(None);
        }
        self.select(false).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn agent(params: ActorCriticParams) -> ActorCritic {
        ActorCritic::new(FourierBasis::pinball(3), 5, params, ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn zero_td_error_changes_nothing() {
        let mut ac = agent(ActorCriticParams::default());
        let phi = ac.basis().features(&[0.3, 0.4, 0.1, -0.2]).unwrap();
        let before = (ac.critic_weights().to_vec(), ac.actor_weights().to_vec());
        let d = ac.update(&phi, ActionId(2), 0.0, 0.0, &phi, false).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(
            before,
            (ac.critic_weights().to_vec(), ac.actor_weights().to_vec())
        );
    }

    #[test]
    fn terminal_reward_on_all_ones() {
        let params = ActorCriticParams::default();
        let mut ac = agent(params);
        let ones = vec![1.0; 256];
        ac.update(&ones, ActionId(0), 1.0, 0.0, &ones, true).unwrap();
        for (w, k) in ac.critic_weights().iter().zip(ac.basis().scales()) {
            assert!((w - 0.01 * k).abs() < 1e-15);
        }
        let unscaled = ActorCriticParams {
            scale_critic: false,
            ..params
        };
        let mut ac = agent(unscaled);
        ac.update(&ones, ActionId(0), 1.0, 0.0, &ones, true).unwrap();
        assert!(ac.critic_weights().iter().all(|&w| (w - 0.01).abs() < 1e-15));
    }

    #[test]
    fn positive_td_error_favors_taken_action() {
        let mut ac = agent(ActorCriticParams::default());
        let phi = ac.basis().features(&[0.6, 0.2, 0.5, 0.9]).unwrap();
        let before = ac.policy(&phi).unwrap()[3];
        ac.update(&phi, ActionId(3), 1.0, 0.0, &phi, true).unwrap();
        assert!(ac.policy(&phi).unwrap()[3] > before);
    }
}
