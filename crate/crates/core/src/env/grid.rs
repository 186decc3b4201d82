//! Deterministic gridworld (four-rooms by default).

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use crate::mdp::{ActionId, EnvState, Environment, StepOutcome};
use crate::{Error, Result};

/// Step cap for grid episodes.
pub const GRID_STEP_CAP: usize = 1000;
pub const GRID_ACTIONS: usize = 4;
pub const GOAL_REWARD: f64 = 1.0;

pub const UP: ActionId = ActionId(0);
pub const DOWN: ActionId = ActionId(1);
pub const LEFT: ActionId = ActionId(2);
pub const RIGHT: ActionId = ActionId(3);

/// `(row, col)` coordinate.
pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    walls: BTreeSet<Cell>,
    start: Cell,
    goal: Cell,
    hallways: Vec<Cell>,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Validates bounds, start/goal placement and reachability of every open cell.
    pub fn new(
        width: usize,
        height: usize,
        walls: impl IntoIterator<Item = Cell>,
        start: Cell,
        goal: Cell,
        hallways: Vec<Cell>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::map("width/height", "grid dimensions must be positive"));
        }
        let in_bounds = |(r, c): Cell| r < height && c < width;
        let mut blocked = vec![false; width * height];
        let mut wall_set = BTreeSet::new();
        for (i, w) in walls.into_iter().enumerate() {
            if !in_bounds(w) {
                return Err(Error::map(format!("walls[{i}]"), format!("{w:?} is off-grid")));
            }
            blocked[w.0 * width + w.1] = true;
            wall_set.insert(w);
        }
        for (name, cell) in [("start", start), ("goal", goal)] {
            if !in_bounds(cell) {
                return Err(Error::map(name, format!("{cell:?} is off-grid")));
            }
            if blocked[cell.0 * width + cell.1] {
                return Err(Error::map(name, format!("{cell:?} is a wall")));
            }
        }
        if start == goal {
            return Err(Error::map("goal", "start and goal coincide"));
        }
        for (i, h) in hallways.iter().enumerate() {
            if !in_bounds(*h) || blocked[h.0 * width + h.1] {
                return Err(Error::map(
                    format!("hallways[{i}]"),
                    format!("{h:?} is not an open cell"),
                ));
            }
        }
        let map = GridMap {
            width,
            height,
            walls: wall_set,
            start,
            goal,
            hallways,
            blocked,
        };
        let dist = map.distances_from(map.cell_id(start));
        if let Some(id) = (0..map.n_cells()).find(|&id| !map.blocked[id] && dist[id].is_none()) {
            return Err(Error::map(
                format!("cell {:?}", map.cell_of(id)),
                "open cell unreachable from start",
            ));
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn hallways(&self) -> &[Cell] {
        &self.hallways
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_id(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    pub fn cell_of(&self, id: usize) -> Cell {
        (id / self.width, id % self.width)
    }

    pub fn start_id(&self) -> usize {
        self.cell_id(self.start)
    }

    pub fn goal_id(&self) -> usize {
        self.cell_id(self.goal)
    }

    pub fn is_open(&self, id: usize) -> bool {
        id < self.n_cells() && !self.blocked[id]
    }

    pub fn open_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cells()).filter(|&id| !self.blocked[id])
    }

    /// Cell reached by `action` from `id`; blocked or off-grid moves stay put.
    pub fn neighbor(&self, id: usize, action: ActionId) -> usize {
        let (r, c) = self.cell_of(id);
        let target = match action {
            UP if r > 0 => Some((r - 1, c)),
            DOWN if r + 1 < self.height => Some((r + 1, c)),
            LEFT if c > 0 => Some((r, c - 1)),
            RIGHT if c + 1 < self.width => Some((r, c + 1)),
            _ => None,
        };
        match target.map(|t| self.cell_id(t)) {
            Some(t) if !self.blocked[t] => t,
            _ => id,
        }
    }

    fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(id) = queue.pop_front() {
            let d = dist[id].unwrap_or(0);
            for a in 0..GRID_ACTIONS {
                let n = self.neighbor(id, ActionId(a));
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Length of the shortest start-to-goal path in steps.
    pub fn shortest_path_len(&self) -> usize {
        self.distances_from(self.start_id())[self.goal_id()].expect("reachability is checked at construction")
    }

    /// Room index per cell: open regions separated by hallway cells, with each
    /// hallway joined to its lowest-numbered neighboring room. Walls map to `None`.
    pub fn rooms(&self) -> Vec<Option<usize>> {
        let hall: BTreeSet<usize> = self.hallways.iter().map(|&h| self.cell_id(h)).collect();
        let mut room = vec![None; self.n_cells()];
        let mut next = 0;
        for seed in self.open_cells() {
            if room[seed].is_some() || hall.contains(&seed) {
                continue;
            }
            room[seed] = Some(next);
            let mut queue = VecDeque::from([seed]);
            while let Some(id) = queue.pop_front() {
                for a in 0..GRID_ACTIONS {
                    let n = self.neighbor(id, ActionId(a));
                    if room[n].is_none() && !hall.contains(&n) {
                        room[n] = Some(next);
                        queue.push_back(n);
                    }
                }
            }
            next += 1;
        }
        for &h in &hall {
            room[h] = (0..GRID_ACTIONS)
                .filter_map(|a| room[self.neighbor(h, ActionId(a))])
                .min()
                .or(Some(next));
        }
        room
    }
}

/// One transition of the gridworld dynamics from `cell`.
pub fn fourrooms_step(map: &GridMap, cell: usize, action: ActionId) -> Result<StepOutcome> {
    if !map.is_open(cell) {
        return Err(Error::usage(format!("cell {cell} is not an open cell")));
    }
    if action.0 >= GRID_ACTIONS {
        return Err(Error::usage(format!("action {} out of range", action.0)));
    }
    let next = map.neighbor(cell, action);
    let terminal = next == map.goal_id();
    Ok(StepOutcome {
        next_state: EnvState::Discrete { cell: next },
        reward: if terminal { GOAL_REWARD } else { 0.0 },
        terminal,
        truncated: false,
    })
}

/// Episodic gridworld environment over a shared map.
#[derive(Clone, Debug)]
pub struct GridWorld {
    map: Arc<GridMap>,
    cell: usize,
    steps: usize,
    done: bool,
    step_cap: usize,
}

impl GridWorld {
    pub fn new(map: Arc<GridMap>) -> Self {
        Self::with_step_cap(map, GRID_STEP_CAP)
    }

    pub fn with_step_cap(map: Arc<GridMap>, step_cap: usize) -> Self {
        let cell = map.start_id();
        GridWorld {
            map,
            cell,
            steps: 0,
            done: false,
            step_cap,
        }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }
}

impl Environment for GridWorld {
    fn action_count(&self) -> usize {
        GRID_ACTIONS
    }

    fn step_cap(&self) -> usize {
        self.step_cap
    }

    fn reset(&mut self, _seed: u64) -> EnvState {
        self.cell = self.map.start_id();
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::usage("step after episode end"));
        }
        let mut out = fourrooms_step(&self.map, self.cell, action)?;
        self.steps += 1;
        self.cell = out.next_state.cell().unwrap_or(self.cell);
        out.truncated = !out.terminal && self.steps >= self.step_cap;
        self.done = out.terminal || out.truncated;
        Ok(out)
    }

    fn state(&self) -> EnvState {
        EnvState::Discrete { cell: self.cell }
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::builtin;

    fn fourrooms() -> GridMap {
        builtin::fourrooms()
    }

    #[test]
    fn step_into_goal_pays_and_terminates() {
        let m = fourrooms();
        let (gr, gc) = m.goal();
        let above = m.cell_id((gr - 1, gc));
        let out = fourrooms_step(&m, above, DOWN).unwrap();
        assert_eq!(out.next_state, EnvState::Discrete { cell: m.goal_id() });
        assert_eq!(out.reward, 1.0);
        assert!(out.terminal);
    }

    #[test]
    fn blocked_move_stays() {
        let m = fourrooms();
        // (5,4) is a wall
        let id = m.cell_id((4, 4));
        let out = fourrooms_step(&m, id, DOWN).unwrap();
        assert_eq!(out.next_state.cell(), Some(id));
        assert_eq!(out.reward, 0.0);
        // off-grid
        let corner = m.cell_id((0, 0));
        assert_eq!(
            fourrooms_step(&m, corner, UP).unwrap().next_state.cell(),
            Some(corner)
        );
    }

    #[test]
    fn wall_cell_rejected() {
        let m = fourrooms();
        let wall = m.cell_id((0, 5));
        assert!(matches!(fourrooms_step(&m, wall, UP), Err(Error::Usage(_))));
    }

    #[test]
    fn truncation_at_cap_without_reward() {
        let mut env = GridWorld::new(Arc::new(fourrooms()));
        env.reset(0);
        for i in 1..=GRID_STEP_CAP {
            let out = env.step(UP).unwrap();
            assert_eq!(out.reward, 0.0);
            assert!(!out.terminal);
            assert_eq!(out.truncated, i == GRID_STEP_CAP);
        }
        assert!(matches!(env.step(UP), Err(Error::Usage(_))));
        let s = env.reset(1);
        assert_eq!(
            s,
            EnvState::Discrete {
                cell: env.map().start_id()
            }
        );
        assert_eq!(env.steps_taken(), 0);
    }

    #[test]
    fn rooms_partition() {
        let m = fourrooms();
        let rooms = m.rooms();
        let ids: BTreeSet<usize> = rooms.iter().flatten().copied().collect();
        assert_eq!(ids.len(), 4);
        for id in m.open_cells() {
            assert!(rooms[id].is_some());
        }
        assert_ne!(rooms[m.start_id()], rooms[m.goal_id()]);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(GridMap::new(3, 3, [], (0, 0), (0, 0), vec![]).is_err());
        assert!(GridMap::new(3, 3, [(0, 1)], (0, 1), (2, 2), vec![]).is_err());
        // goal sealed off
        let err = GridMap::new(3, 3, [(1, 2), (2, 1)], (0, 0), (2, 2), vec![]).unwrap_err();
        assert!(matches!(err, Error::MapLoad { .. }));
    }
}
