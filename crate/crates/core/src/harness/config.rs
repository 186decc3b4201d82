use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{ActorCritic, ActorCriticParams, FourierBasis, Learner, QTable, SarsaAgent, TdRule};
use crate::env::{resolve_map, EnvKind, EnvMap};
use crate::mdp::{Identity, RewardTransformer};
use crate::rng::{SeedStreams, Stream};
use crate::shaping::{
    DynamicShaper, NrsPotential, PotentialShaper, PotentialTiming, StaticAggregation, StaticAggregationShaper,
};
use crate::subgoal::{random_series, validate_series, FieldError, SubgoalSeries};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Sarsa,
    ActorCritic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub agent: AgentKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_explore")]
    pub explore_prob: f64,
    #[serde(default = "default_order")]
    pub fourier_order: usize,
    /// Scale critic step sizes by `1 / |c|` per Fourier feature.
    #[serde(default = "default_true")]
    pub scale_critic: bool,
}

fn default_alpha() -> f64 {
    0.01
}
fn default_gamma() -> f64 {
    0.99
}
fn default_temperature() -> f64 {
    1.0
}
fn default_explore() -> f64 {
    0.1
}
fn default_order() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_random_count() -> usize {
    2
}
fn default_patterns() -> usize {
    1
}
fn default_episodes() -> usize {
    1000
}
fn default_window() -> usize {
    1
}
fn default_tail() -> usize {
    10
}

impl AgentConfig {
    pub fn sarsa() -> Self {
        AgentConfig {
            agent: AgentKind::Sarsa,
            alpha: default_alpha(),
            gamma: default_gamma(),
            temperature: default_temperature(),
            explore_prob: default_explore(),
            fourier_order: default_order(),
            scale_critic: true,
        }
    }

    pub fn actor_critic() -> Self {
        AgentConfig {
            agent: AgentKind::ActorCritic,
            ..Self::sarsa()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Hrs,
    Rrs,
    Nrs,
    StaticAgg,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Hrs => "hrs",
            Method::Rrs => "rrs",
            Method::Nrs => "nrs",
            Method::StaticAgg => "static_agg",
        }
    }

    fn uses_series(self) -> bool {
        matches!(self, Method::Hrs | Method::Rrs | Method::Nrs)
    }
}

/// Where a method's subgoal series come from: `"random"`, one document, or a
/// list of documents (one learning pattern each).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSpec {
    Keyword(String),
    One(SubgoalSeries),
    Many(Vec<SubgoalSeries>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingConfig {
    pub method: Method,
    /// Name used in result files; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// NRS potential; defaults to the environment's goal reward.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgoal_series: Option<SeriesSpec>,
    #[serde(default = "default_random_count")]
    pub random_count: usize,
    /// Number of random series drawn when the series is `"random"`.
    #[serde(default = "default_patterns")]
    pub patterns: usize,
    #[serde(default)]
    pub series_seed: u64,
    #[serde(default)]
    pub potential_timing: PotentialTiming,
}

impl ShapingConfig {
    pub fn new(method: Method) -> Self {
        ShapingConfig {
            method,
            label: None,
            eta: None,
            subgoal_series: None,
            random_count: default_random_count(),
            patterns: default_patterns(),
            series_seed: 0,
            potential_timing: PotentialTiming::default(),
        }
    }

    pub fn with_series(mut self, series: SubgoalSeries) -> Self {
        self.subgoal_series = Some(SeriesSpec::One(series));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.method.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in map id or path to a map document.
    pub env: String,
    pub agent: AgentConfig,
    /// A single shaping block; merged in front of `methods`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<ShapingConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<ShapingConfig>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub thresholds: Vec<usize>,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_tail")]
    pub asymptotic_tail: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    /// All shaping blocks in run order.
    pub fn method_blocks(&self) -> Vec<&ShapingConfig> {
        self.shaping.iter().chain(&self.methods).collect()
    }

    /// Checks the config against its map and expands every method into its
    /// learning patterns.
    pub fn prepare(&self) -> Result<Prepared> {
        let map = Arc::new(resolve_map(&self.env)?);
        let fields = self.field_errors(&map);
        if !fields.is_empty() {
            return Err(Error::Invalid(fields));
        }
        let mut methods = Vec::new();
        for block in self.method_blocks() {
            let series = resolve_series(&map, block)?;
            let patterns = series.len().max(1);
            for (p, s) in series
                .into_iter()
                .map(Some)
                .chain(std::iter::repeat(None))
                .take(patterns)
                .enumerate()
            {
                methods.push(MethodPlan {
                    label: block.label().to_string(),
                    pattern: (patterns > 1).then_some(p),
                    config: block.clone(),
                    series: s.map(Arc::new),
                });
            }
        }
        Ok(Prepared {
            config: self.clone(),
            map,
            methods,
        })
    }

    /// Field-level problems, including invalid subgoal series.
    pub fn field_errors(&self, map: &EnvMap) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let mut push = |field: String, message: &str| errs.push(FieldError::new(field, message));
        if self.episodes < 1 {
            push("episodes".into(), "must be at least 1");
        }
        if self.seeds.is_empty() {
            push("seeds".into(), "must not be empty");
        }
        if self.thresholds.contains(&0) {
            push("thresholds".into(), "thresholds must be positive");
        }
        if self.smoothing_window < 1 {
            push("smoothing_window".into(), "must be at least 1");
        }
        if self.asymptotic_tail < 1 || self.asymptotic_tail > self.episodes {
            push(
                "asymptotic_tail".into(),
                "must be between 1 and the episode count",
            );
        }
        let a = &self.agent;
        if !(a.alpha > 0.0 && a.alpha.is_finite()) {
            push("agent.alpha".into(), "must be positive");
        }
        if !(0.0..=1.0).contains(&a.gamma) {
            push("agent.gamma".into(), "must be in [0, 1]");
        }
        if !(a.temperature > 0.0 && a.temperature.is_finite()) {
            push("agent.temperature".into(), "must be positive");
        }
        if !(0.0..=1.0).contains(&a.explore_prob) {
            push("agent.explore_prob".into(), "must be in [0, 1]");
        }
        let expected = match map.kind() {
            EnvKind::Grid => AgentKind::Sarsa,
            EnvKind::Pinball => AgentKind::ActorCritic,
        };
        if a.agent != expected {
            push(
                "agent.agent".into(),
                &format!("{} maps need the {:?} agent", map.kind().as_str(), expected),
            );
        }
        let blocks = self.method_blocks();
        if blocks.is_empty() {
            push("methods".into(), "at least one shaping block is required");
        }
        let mut labels = std::collections::HashSet::new();
        for (i, b) in blocks.iter().enumerate() {
            let at = |f: &str| format!("methods[{i}].{f}");
            if !labels.insert(b.label()) {
                push(at("label"), "duplicate method label");
            }
            if b.label().contains(['@', ',', '"', '\n']) {
                push(at("label"), "label may not contain '@', ',', quotes or newlines");
            }
            if b.eta.is_some_and(|e| !e.is_finite()) {
                push(at("eta"), "must be finite");
            }
            if b.method == Method::StaticAgg && map.kind() != EnvKind::Grid {
                push(at("method"), "static aggregation is only defined for grid maps");
            }
            if !b.method.uses_series() {
                continue;
            }
            match &b.subgoal_series {
                None if b.method == Method::Rrs => {}
                None => push(at("subgoal_series"), "required for this method"),
                Some(SeriesSpec::Keyword(k)) if k == "random" => {}
                Some(SeriesSpec::Keyword(k)) => push(at("subgoal_series"), &format!("unknown keyword {k:?}")),
                Some(SeriesSpec::One(s)) => {
                    for e in validate_series(map, s) {
                        push(format!("{}.{}", at("subgoal_series"), e.field), &e.message);
                    }
                }
                Some(SeriesSpec::Many(list)) => {
                    if list.is_empty() {
                        push(at("subgoal_series"), "must not be empty");
                    }
                    for (j, s) in list.iter().enumerate() {
                        for e in validate_series(map, s) {
                            push(format!("{}[{j}].{}", at("subgoal_series"), e.field), &e.message);
                        }
                    }
                }
            }
            if is_random(b) && (b.random_count < 1 || b.patterns < 1) {
                push(
                    at("random_count"),
                    "random series need at least one subgoal and one pattern",
                );
            }
        }
        errs
    }
}

fn is_random(b: &ShapingConfig) -> bool {
    match &b.subgoal_series {
        None => b.method == Method::Rrs,
        Some(SeriesSpec::Keyword(k)) => k == "random",
        _ => false,
    }
}

fn resolve_series(map: &EnvMap, block: &ShapingConfig) -> Result<Vec<SubgoalSeries>> {
    if !block.method.uses_series() {
        return Ok(Vec::new());
    }
    if is_random(block) {
        return (0..block.patterns as u64)
            .map(|p| random_series(map, block.random_count, block.series_seed.wrapping_add(p)))
            .collect();
    }
    Ok(match &block.subgoal_series {
        Some(SeriesSpec::One(s)) => vec![s.clone()],
        Some(SeriesSpec::Many(list)) => list.clone(),
        _ => Vec::new(),
    })
}

/// One learning pattern: a method block with a concrete subgoal series.
#[derive(Clone, Debug)]
pub struct MethodPlan {
    pub label: String,
    pub pattern: Option<usize>,
    pub config: ShapingConfig,
    pub series: Option<Arc<SubgoalSeries>>,
}

impl MethodPlan {
    /// Method column of the results file: `label` or `label@pattern`.
    pub fn key(&self) -> String {
        match self.pattern {
            Some(p) => format!("{}@{p}", self.label),
            None => self.label.clone(),
        }
    }
}

/// A validated run config with its map loaded and series resolved.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub map: Arc<EnvMap>,
    pub methods: Vec<MethodPlan>,
}

impl Prepared {
    pub fn total_runs(&self) -> usize {
        self.methods.len() * self.config.seeds.len()
    }

    pub fn build_shaper(&self, plan: &MethodPlan) -> Result<Box<dyn RewardTransformer>> {
        let agent = &self.config.agent;
        let (alpha, gamma) = (agent.alpha, agent.gamma);
        let series = || {
            plan.series
                .clone()
                .ok_or_else(|| Error::config(format!("method {} has no subgoal series", plan.label)))
        };
        Ok(match plan.config.method {
            Method::Baseline => Box::new(Identity),
            Method::Hrs | Method::Rrs => Box::new(
                DynamicShaper::new(series()?, alpha, gamma, gamma).with_timing(plan.config.potential_timing),
            ),
            Method::Nrs => {
                let eta = plan.config.eta.unwrap_or_else(|| self.map.goal_reward());
                let potential = NrsPotential::new(eta, series()?.subgoals.clone());
                Box::new(PotentialShaper::new(potential, gamma))
            }
            Method::StaticAgg => {
                let grid = self
                    .map
                    .grid()
                    .ok_or_else(|| Error::config("static aggregation needs a grid map"))?;
                Box::new(StaticAggregationShaper::new(
                    StaticAggregation::rooms(grid),
                    alpha,
                    gamma,
                    gamma,
                ))
            }
        })
    }

    pub fn build_learner(&self, seeds: &SeedStreams) -> Result<Box<dyn Learner>> {
        let a = &self.config.agent;
        let rng = seeds.rng(Stream::Policy);
        Ok(match (a.agent, &*self.map) {
            (AgentKind::Sarsa, EnvMap::Grid(g)) => {
                let q = QTable::new(g.width() * g.height(), self.map.action_count(), a.alpha, a.gamma);
                Box::new(SarsaAgent::new(q, a.temperature, rng).with_rule(TdRule::Sarsa))
            }
            (AgentKind::ActorCritic, EnvMap::Pinball(_)) => {
                let params = ActorCriticParams {
                    alpha_critic: a.alpha,
                    alpha_actor: a.alpha,
                    gamma: a.gamma,
                    temperature: a.temperature,
                    explore_prob: a.explore_prob,
                    scale_critic: a.scale_critic,
                };
                let basis = FourierBasis::pinball(a.fourier_order);
                Box::new(ActorCritic::new(basis, self.map.action_count(), params, rng))
            }
            (kind, map) => {
                return Err(Error::config(format!(
                    "agent {kind:?} cannot drive a {} map",
                    map.kind().as_str()
                )))
            }
        })
    }
}
