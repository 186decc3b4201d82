use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waypoint_core::agents::{QTable, SarsaAgent};
use waypoint_core::env::{builtin, EnvKind, EnvMap, GridWorld};
use waypoint_core::harness::run_episode;
use waypoint_core::mdp::{EnvState, Identity, RewardTransformer};
use waypoint_core::shaping::{
    AbstractValueTable, DynamicShaper, PotentialShaper, PotentialTiming, TabularPotential,
};
use waypoint_core::subgoal::{random_series, SeriesSource, SubgoalSeries, SubgoalSpec};

fn cell(c: usize) -> EnvState {
    EnvState::Discrete { cell: c }
}

fn cells(ids: &[usize]) -> Arc<SubgoalSeries> {
    Arc::new(SubgoalSeries::new(
        EnvKind::Grid,
        ids.iter().map(|&cell| SubgoalSpec::Cell { cell }).collect(),
        SeriesSource::Scripted,
    ))
}

proptest! {
    #[test]
    fn static_shaping_telescopes(
        phi in prop::collection::vec(-100.0f64..100.0, 16),
        path in prop::collection::vec(0usize..16, 2..300),
        terminal in any::<bool>(),
        gamma in 0.5f64..1.0,
    ) {
        let shaper = PotentialShaper::new(TabularPotential(phi.clone()), gamma);
        let steps = path.len() - 1;
        let mut total = 0.0;
        for t in 0..steps {
            let last = t + 1 == steps;
            total += gamma.powi(t as i32)
                * shaper.reward(&cell(path[t]), &cell(path[t + 1]), last && terminal).unwrap();
        }
        let end = if terminal { 0.0 } else { phi[path[steps]] };
        let closed = gamma.powi(steps as i32) * end - phi[path[0]];
        prop_assert!((total - closed).abs() < 1e-8 * (1.0 + closed.abs()));
    }

    #[test]
    fn achievement_follows_series_order(path in prop::collection::vec(0usize..6, 1..60)) {
        let series = [2usize, 4, 1];
        let mut shaper = DynamicShaper::new(cells(&series), 0.1, 0.9, 0.9);
        shaper.begin_episode(&cell(0));
        let mut expected = 0;
        for &c in &path {
            if expected < series.len() && c == series[expected] {
                expected += 1;
            }
            shaper.step(&cell(c), 0.0, false).unwrap();
            prop_assert_eq!(shaper.context().z, expected);
        }
    }

    #[test]
    fn table_has_one_entry_per_abstract_state(n in 1usize..60, seed in any::<u64>()) {
        let map = EnvMap::Grid(builtin::fourrooms());
        let series = random_series(&map, n, seed).unwrap();
        let table = AbstractValueTable::for_series(&series, 0.01, 0.99);
        prop_assert_eq!(table.len(), n + 1);
        prop_assert!(table.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn frozen_zero_potential_matches_unshaped_learning() {
    let map = Arc::new(builtin::fourrooms());
    let play = |shaper: &mut dyn RewardTransformer| -> Vec<usize> {
        let q = QTable::new(map.n_cells(), 4, 0.01, 0.99);
        let mut agent = SarsaAgent::new(q, 1e-3, ChaCha8Rng::seed_from_u64(9));
        let mut env = GridWorld::new(map.clone());
        (0..40)
            .map(|e| run_episode(&mut env, &mut agent, shaper, e).unwrap().steps)
            .collect()
    };
    let unshaped = play(&mut Identity);
    let mut frozen = DynamicShaper::new(cells(&[27, 74]), 0.01, 0.99, 0.99).frozen();
    assert_eq!(play(&mut frozen), unshaped);
    assert!(frozen.table().values().iter().all(|&v| v == 0.0));
}

#[test]
fn pre_and_post_update_timing_differ_only_at_updates() {
    let series = cells(&[3]);
    let mut post = DynamicShaper::new(series.clone(), 0.5, 0.9, 0.9);
    let mut pre = DynamicShaper::new(series, 0.5, 0.9, 0.9).with_timing(PotentialTiming::PreUpdate);
    for s in [&mut post, &mut pre] {
        s.table_mut().set(0, 2.0);
        s.table_mut().set(1, 4.0);
        s.begin_episode(&cell(0));
    }
    // Ordinary step inside segment 0: both give 0.9 * 2 - 2.
    let a = post.step(&cell(1), 1.0, false).unwrap();
    let b = pre.step(&cell(1), 1.0, false).unwrap();
    assert_eq!(a, b);
    assert!((a - (0.9 * 2.0 - 2.0)).abs() < 1e-12);
    // Achieving the subgoal updates V(0) = 2 + 0.5 (1 + 0.9*1 + 0.81*4 - 2) first under post-update.
    let a = post.step(&cell(3), 1.0, false).unwrap();
    let b = pre.step(&cell(3), 1.0, false).unwrap();
    let v0 = 2.0 + 0.5 * (1.0 + 0.9 * 1.0 + 0.81 * 4.0 - 2.0);
    assert!((a - (0.9 * 4.0 - v0)).abs() < 1e-12);
    assert!((b - (0.9 * 4.0 - 2.0)).abs() < 1e-12);
}

#[test]
fn terminal_potential_is_absorbing() {
    let mut s = DynamicShaper::new(cells(&[3]), 0.0, 0.9, 0.9);
    s.table_mut().set(0, 5.0);
    s.begin_episode(&cell(0));
    let f = s.step(&cell(1), 0.0, true).unwrap();
    assert_eq!(f, -5.0);
}
