use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Feedback, Learner};
use crate::harness::config::{MethodPlan, Prepared};
use crate::mdp::{Environment, RewardTransformer, StepView};
use crate::rng::{SeedStreams, Stream};
use crate::{Error, Result};

/// Outcome of one episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub steps: usize,
    /// Undiscounted environment return (shaping excluded).
    pub env_return: f64,
}

/// Plays one episode, learning online. `reset_seed` is passed to the environment.
pub fn run_episode(
    env: &mut dyn Environment,
    learner: &mut dyn Learner,
    shaper: &mut dyn RewardTransformer,
    reset_seed: u64,
) -> Result<EpisodeStats> {
    let mut state = env.reset(reset_seed);
    shaper.begin_episode(&state);
    let mut action = learner.start(&state)?;
    let mut env_return = 0.0;
    loop {
        let out = env.step(action)?;
        let view = StepView {
            state: &state,
            action,
            reward: out.reward,
            next_state: &out.next_state,
            terminal: out.terminal,
            truncated: out.truncated,
        };
        let shaping = shaper.shape(&view)?;
        env_return += out.reward;
        let feedback = Feedback {
            state: &state,
            action,
            reward: out.reward,
            shaping,
            next_state: &out.next_state,
            terminal: out.terminal,
            truncated: out.truncated,
        };
        let next = learner.learn(&feedback)?;
        state = out.next_state;
        match next {
            Some(a) => action = a,
            None => break,
        }
        if out.terminal || out.truncated {
            break;
        }
    }
    shaper.end_episode();
    Ok(EpisodeStats {
        steps: env.steps_taken(),
        env_return,
    })
}

/// One learning run: a method pattern under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// `label` or `label@pattern`.
    pub method: String,
    pub seed: u64,
    pub steps: Vec<usize>,
    pub returns: Vec<f64>,
    #[serde(default)]
    pub duration_ms: u64,
    /// Set when the run failed or panicked; episodes played so far are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunResult {
    /// Method label without the pattern suffix.
    pub fn label(&self) -> &str {
        self.method.split('@').next().unwrap_or(&self.method)
    }

    pub fn is_complete(&self, episodes: usize) -> bool {
        self.error.is_none() && self.steps.len() == episodes
    }
}

/// Runs every episode of one learning, stopping at the first error.
pub fn run_learning(prepared: &Prepared, plan: &MethodPlan, seed: u64) -> RunResult {
    let started = Instant::now();
    let mut result = RunResult {
        method: plan.key(),
        seed,
        steps: Vec::with_capacity(prepared.config.episodes),
        returns: Vec::with_capacity(prepared.config.episodes),
        duration_ms: 0,
        error: None,
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<()> {
        let streams = SeedStreams::new(seed);
        let mut env = prepared.map.instantiate();
        let mut learner = prepared.build_learner(&streams)?;
        let mut shaper = prepared.build_shaper(plan)?;
        let mut env_rng = streams.rng(Stream::Environment);
        for _ in 0..prepared.config.episodes {
            let stats = run_episode(env.as_mut(), learner.as_mut(), shaper.as_mut(), env_rng.random())?;
            result.steps.push(stats.steps);
            result.returns.push(stats.env_return);
        }
        Ok(())
    }));
    result.error = match outcome {
        Ok(Ok(())) => None,
        Ok(Err(e)) => Some(e.to_string()),
        Err(panic) => Some(panic_message(&panic)),
    };
    result.duration_ms = started.elapsed().as_millis() as u64;
    result
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    let text = panic
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| panic.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("run panicked: {text}")
}

/// Runs every (method pattern, seed) pair, in parallel on `workers` threads
/// (0 = all cores). Results are ordered by method then seed as configured.
/// `progress(done, total)` is called after each finished run.
pub fn run_battery_with(
    prepared: &Prepared,
    workers: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<RunResult>> {
    let jobs: Vec<(&MethodPlan, u64)> = prepared
        .methods
        .iter()
        .flat_map(|m| prepared.config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::usage(format!("worker pool: {e}")))?;
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(plan, seed)| {
                let r = run_learning(prepared, plan, seed);
                progress(done.fetch_add(1, Ordering::SeqCst) + 1, total);
                r
            })
            .collect()
    });
    Ok(results)
}

pub fn run_battery(prepared: &Prepared) -> Result<Vec<RunResult>> {
    run_battery_with(prepared, prepared.config.workers, &|_, _| {})
}
