use crate::env::GridMap;
use crate::mdp::{EnvState, RewardTransformer, StepView};
use crate::shaping::{AbstractValueTable, Bootstrap, ShapingContext};
use crate::{Error, Result};

/// A fixed partition of grid cells into abstract states.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticAggregation {
    mapping: Vec<Option<usize>>,
    n_abstract: usize,
}

impl StaticAggregation {
    pub fn new(mapping: Vec<Option<usize>>) -> Self {
        let n_abstract = mapping.iter().flatten().max().map_or(0, |m| m + 1);
        StaticAggregation { mapping, n_abstract }
    }

    /// One abstract state per room.
    pub fn rooms(map: &GridMap) -> Self {
        Self::new(map.rooms())
    }

    pub fn n_abstract(&self) -> usize {
        self.n_abstract
    }

    pub fn abstract_state(&self, state: &EnvState) -> Result<usize> {
        state
            .cell()
            .and_then(|c| self.mapping.get(c).copied().flatten())
            .ok_or_else(|| Error::config(format!("state {state:?} is outside the aggregation")))
    }
}

/// SARSA-RS over a static aggregation: abstract transitions happen whenever the
/// partition block changes, in either direction.
#[derive(Clone, Debug)]
pub struct StaticAggregationShaper {
    aggregation: StaticAggregation,
    table: AbstractValueTable,
    context: ShapingContext,
    gamma: f64,
}

impl StaticAggregationShaper {
    pub fn new(aggregation: StaticAggregation, alpha_v: f64, gamma_v: f64, gamma: f64) -> Self {
        let table = AbstractValueTable::new(aggregation.n_abstract(), alpha_v, gamma_v);
        StaticAggregationShaper {
            aggregation,
            table,
            context: ShapingContext::new(),
            gamma,
        }
    }

    pub fn table(&self) -> &AbstractValueTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut AbstractValueTable {
        &mut self.table
    }

    pub fn step(&mut self, next_state: &EnvState, reward: f64, terminal: bool) -> Result<f64> {
        let z = self.context.z;
        self.context.accumulate(reward, self.table.gamma());
        let z_next = self.aggregation.abstract_state(next_state)?;
        if z_next != z {
            self.table
                .update(z, Bootstrap::Abstract(z_next), self.context.r_h, self.context.t);
            self.context.enter(z_next);
        }
        if terminal {
            self.table
                .update(z_next, Bootstrap::Terminal, self.context.r_h, self.context.t);
        }
        let phi_next = if terminal { 0.0 } else { self.table.value(z_next) };
        Ok(self.gamma * phi_next - self.table.value(z))
    }
}

impl RewardTransformer for StaticAggregationShaper {
    fn begin_episode(&mut self, initial: &EnvState) {
        let z = self.aggregation.abstract_state(initial).unwrap_or(0);
        self.context = ShapingContext::new();
        self.context.enter(z);
    }

    fn shape(&mut self, step: &StepView<'_>) -> Result<f64> {
        self.step(step.next_state, step.reward, step.terminal)
    }
}
