//! Learned potentials over subgoal-achievement abstract states.
//!
//! Abstract state `z` is the number of subgoals achieved so far in the episode,
//! so an `n`-subgoal series yields `n + 1` abstract states and each episode is
//! cut into segments at the moments subgoals are achieved. Each completed
//! segment is one SMDP transition: its discounted reward `r_h` and its duration
//! `k` drive a TD update of `V(z)`, and `V` serves as the shaping potential.

use std::sync::Arc;

use crate::mdp::{EnvState, RewardTransformer, StepView};
use crate::shaping::{filter, AbstractValueTable, Bootstrap, PotentialTiming, ShapingContext};
use crate::subgoal::SubgoalSeries;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentEnd {
    Subgoal,
    Terminal,
}

/// A completed abstract segment, recorded when logging is enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentRecord {
    pub z: usize,
    pub rewards: Vec<f64>,
    pub r_h: f64,
    pub k: usize,
    pub end: SegmentEnd,
}

/// Subgoal-based dynamic trajectory aggregation.
#[derive(Clone, Debug)]
pub struct DynamicShaper {
    series: Arc<SubgoalSeries>,
    table: AbstractValueTable,
    context: ShapingContext,
    gamma: f64,
    timing: PotentialTiming,
    frozen: bool,
    log: Option<SegmentLog>,
}

#[derive(Clone, Debug, Default)]
struct SegmentLog {
    current: Vec<f64>,
    done: Vec<SegmentRecord>,
}

impl DynamicShaper {
    /// `gamma` is the agent's discount (used in `F`); the table carries its own
    /// `alpha_v` and `gamma_v`.
    pub fn new(series: Arc<SubgoalSeries>, alpha_v: f64, gamma_v: f64, gamma: f64) -> Self {
        let table = AbstractValueTable::for_series(&series, alpha_v, gamma_v);
        DynamicShaper {
            series,
            table,
            context: ShapingContext::new(),
            gamma,
            timing: PotentialTiming::PostUpdate,
            frozen: false,
            log: None,
        }
    }

    pub fn with_timing(mut self, timing: PotentialTiming) -> Self {
        self.timing = timing;
        self
    }

    /// Disables learning of `V`; with a zero table the shaper is inert.
    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Records every completed segment (see [`DynamicShaper::take_segments`]).
    pub fn with_segment_log(mut self) -> Self {
        self.log = Some(SegmentLog::default());
        self
    }

    pub fn table(&self) -> &AbstractValueTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut AbstractValueTable {
        &mut self.table
    }

    pub fn context(&self) -> &ShapingContext {
        &self.context
    }

    pub fn series(&self) -> &SubgoalSeries {
        &self.series
    }

    pub fn take_segments(&mut self) -> Vec<SegmentRecord> {
        self.log
            .as_mut()
            .map(|l| std::mem::take(&mut l.done))
            .unwrap_or_default()
    }

    fn close_segment(&mut self, end: SegmentEnd) {
        if let Some(log) = self.log.as_mut() {
            log.done.push(SegmentRecord {
                z: self.context.z,
                rewards: std::mem::take(&mut log.current),
                r_h: self.context.r_h,
                k: self.context.t,
                end,
            });
        }
    }

    /// One environment step: accumulate, filter, update `V` on achievement (and
    /// at termination, bootstrapping from 0), then return `F`.
    pub fn step(&mut self, next_state: &EnvState, reward: f64, terminal: bool) -> Result<f64> {
        let z = self.context.z;
        let gamma_v = self.table.gamma();
        self.context.accumulate(reward, gamma_v);
        if let Some(log) = self.log.as_mut() {
            log.current.push(reward);
        }

        let z_next = filter(next_state, &self.context, &self.series)?;
        let before = match self.timing {
            PotentialTiming::PreUpdate => Some((self.table.value(z), self.table.value(z_next))),
            PotentialTiming::PostUpdate => None,
        };

        if z_next != z {
            if !self.frozen {
                self.table
                    .update(z, Bootstrap::Abstract(z_next), self.context.r_h, self.context.t);
            }
            self.close_segment(SegmentEnd::Subgoal);
            self.context.cursor.advance(next_state, &self.series)?;
            self.context.enter(z_next);
        }
        if terminal {
            if !self.frozen {
                self.table
                    .update(z_next, Bootstrap::Terminal, self.context.r_h, self.context.t);
            }
            self.close_segment(SegmentEnd::Terminal);
        }

        let (v_prev, v_next) = before.unwrap_or_else(|| (self.table.value(z), self.table.value(z_next)));
        let phi_next = if terminal { 0.0 } else { v_next };
        Ok(self.gamma * phi_next - v_prev)
    }
}

/// Functional form of [`DynamicShaper::step`]: returns `F` and leaves the
/// updated context and table in `shaper`.
pub fn dynamic_shaping_step(
    shaper: &mut DynamicShaper,
    next_state: &EnvState,
    reward: f64,
    terminal: bool,
) -> Result<f64> {
    shaper.step(next_state, reward, terminal)
}

impl RewardTransformer for DynamicShaper {
    fn begin_episode(&mut self, _initial: &EnvState) {
        self.context = ShapingContext::new();
        if let Some(log) = self.log.as_mut() {
            log.current.clear();
        }
    }

    fn shape(&mut self, step: &StepView<'_>) -> Result<f64> {
        self.step(step.next_state, step.reward, step.terminal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;
    use crate::subgoal::{SeriesSource, SubgoalSpec};

    fn series() -> Arc<SubgoalSeries> {
        Arc::new(SubgoalSeries::new(
            EnvKind::Grid,
            vec![SubgoalSpec::Cell { cell: 4 }, SubgoalSpec::Cell { cell: 9 }],
            SeriesSource::Scripted,
        ))
    }

    fn cell(c: usize) -> EnvState {
        EnvState::Discrete { cell: c }
    }

    #[test]
    fn zero_table_gives_zero_shaping() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99);
        s.begin_episode(&cell(0));
        assert_eq!(s.step(&cell(1), 0.0, false).unwrap(), 0.0);
    }

    #[test]
    fn transition_uses_next_abstract_value() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99);
        s.table_mut().set(1, 0.5);
        s.begin_episode(&cell(0));
        let f = s.step(&cell(4), 0.0, false).unwrap();
        // V(z0) stays 0: r_h = 0 and gamma^k V(z1) = 0.99 * 0.5 moves it by alpha * 0.495
        let v0 = s.table().value(0);
        assert!((v0 - 0.01 * 0.99 * 0.5).abs() < 1e-15);
        assert!((f - (0.99 * 0.5 - v0)).abs() < 1e-15);
        assert_eq!(s.context().z, 1);
        assert_eq!(s.context().t, 0);
    }

    #[test]
    fn transition_pre_update_timing() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99).with_timing(PotentialTiming::PreUpdate);
        s.table_mut().set(1, 0.5);
        s.begin_episode(&cell(0));
        let f = s.step(&cell(4), 0.0, false).unwrap();
        assert!((f - 0.495).abs() < 1e-15);
    }

    #[test]
    fn frozen_transition_matches_hand_value() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99).frozen();
        s.table_mut().set(1, 0.5);
        s.begin_episode(&cell(0));
        assert!((s.step(&cell(4), 0.0, false).unwrap() - 0.495).abs() < 1e-15);
    }

    #[test]
    fn off_transition_penalty() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99).frozen();
        s.table_mut().set(0, 10.0);
        s.begin_episode(&cell(0));
        assert!((s.step(&cell(1), 0.0, false).unwrap() + 0.1).abs() < 1e-12);
    }

    #[test]
    fn out_of_order_visit_ignored() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99);
        s.begin_episode(&cell(0));
        s.step(&cell(9), 0.0, false).unwrap();
        assert_eq!(s.context().z, 0);
        s.step(&cell(4), 0.0, false).unwrap();
        s.step(&cell(9), 0.0, false).unwrap();
        assert_eq!(s.context().z, 2);
        s.begin_episode(&cell(0));
        assert_eq!(s.context().z, 0);
        assert_eq!(s.context().cursor.next_index(), 1);
    }

    #[test]
    fn goal_reward_reaches_the_chain() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99).with_segment_log();
        s.begin_episode(&cell(0));
        s.step(&cell(4), 0.0, false).unwrap();
        s.step(&cell(9), 0.0, false).unwrap();
        s.step(&cell(10), 0.0, false).unwrap();
        let f = s.step(&cell(11), 1.0, true).unwrap();
        // r_h = 0 + 0.99 * 1 over the last segment of two steps
        let v2 = s.table().value(2);
        assert!((v2 - 0.01 * 0.99).abs() < 1e-15);
        assert!((f + v2).abs() < 1e-15);
        let segs = s.take_segments();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[2].end, SegmentEnd::Terminal);
        assert_eq!(segs[2].rewards, vec![0.0, 1.0]);
        assert_eq!(segs[2].k, 2);
    }

    #[test]
    fn truncation_performs_no_update() {
        let mut s = DynamicShaper::new(series(), 0.01, 0.99, 0.99);
        s.begin_episode(&cell(0));
        s.step(&cell(1), 1.0, false).unwrap();
        assert!(s.table().values().iter().all(|&v| v == 0.0));
    }
}
