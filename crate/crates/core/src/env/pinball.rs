//! Pinball: a ball steered by thrust through a field of polygonal obstacles.
//!
//! Each step applies at most one unit of thrust, integrates the ball over
//! `substeps` sub-intervals with elastic contact against obstacles and the
//! unit-square frame, then applies drag. At speed 1 the ball travels one ball
//! radius per step.

use std::sync::Arc;

use crate::env::geometry::{reflect, Polygon, Vec2};
use crate::mdp::{ActionId, EnvState, Environment, PinballState, StepOutcome};
use crate::{Error, Result};

pub const PINBALL_STEP_CAP: usize = 10_000;
pub const PINBALL_ACTIONS: usize = 5;
pub const TARGET_REWARD: f64 = 10_000.0;

/// Per-step costs of the classic formulation, active only with `step_penalties`.
pub const STEP_PENALTY: f64 = -1.0;
pub const THRUST_PENALTY: f64 = -5.0;

pub const INC_X: ActionId = ActionId(0);
pub const DEC_X: ActionId = ActionId(1);
pub const INC_Y: ActionId = ActionId(2);
pub const DEC_Y: ActionId = ActionId(3);
pub const COAST: ActionId = ActionId(4);

#[derive(Clone, Debug, PartialEq)]
pub struct PinballMap {
    pub obstacles: Vec<Polygon>,
    pub start: Vec2,
    pub target: Vec2,
    pub target_radius: f64,
    pub ball_radius: f64,
    pub drag: f64,
    pub impulse: f64,
    pub substeps: usize,
    pub step_penalties: bool,
}

impl PinballMap {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: Vec2| v.is_finite() && (0.0..=1.0).contains(&v.x) && (0.0..=1.0).contains(&v.y);
        for (i, poly) in self.obstacles.iter().enumerate() {
            if let Some(j) = poly.vertices().iter().position(|v| !unit(*v)) {
                return Err(Error::map(
                    format!("obstacles[{i}][{j}]"),
                    "vertex outside the unit square",
                ));
            }
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::map(name, format!("must be positive, got {v}")))
            }
        };
        positive("target_radius", self.target_radius)?;
        positive("ball_radius", self.ball_radius)?;
        positive("impulse", self.impulse)?;
        if !(self.drag > 0.0 && self.drag <= 1.0) {
            return Err(Error::map(
                "drag",
                format!("must lie in (0, 1], got {}", self.drag),
            ));
        }
        if self.substeps == 0 {
            return Err(Error::map("substeps", "must be at least 1"));
        }
        if !unit(self.target) {
            return Err(Error::map("target", "outside the unit square"));
        }
        if !unit(self.start) {
            return Err(Error::map("start", "outside the unit square"));
        }
        match self.blocking_obstacle(self.start) {
            Some(usize::MAX) => return Err(Error::map("start", "ball overlaps the frame")),
            Some(i) => return Err(Error::map("start", format!("ball overlaps obstacle {i}"))),
            None => {}
        }
        Ok(())
    }

    /// Index of an obstacle the ball would overlap with its center at `p`
    /// (`usize::MAX` for the frame).
    pub fn blocking_obstacle(&self, p: Vec2) -> Option<usize> {
        let r = self.ball_radius;
        if p.x < r || p.x > 1.0 - r || p.y < r || p.y > 1.0 - r || !p.is_finite() {
            return Some(usize::MAX);
        }
        self.obstacles.iter().position(|poly| {
            poly.near_bounds(p, r) && (poly.closest_boundary_point(p).1 < r * r || poly.contains(p))
        })
    }

    /// Whether a ball centered at `p` is clear of obstacles and the frame.
    pub fn is_free(&self, p: Vec2) -> bool {
        self.blocking_obstacle(p).is_none()
    }

    pub fn start_state(&self) -> PinballState {
        PinballState::at_rest(self.start.x, self.start.y)
    }

    pub fn at_target(&self, p: Vec2) -> bool {
        p.distance(self.target) <= self.target_radius
    }

    /// Unit normals of every surface the ball touches at `p`, pointing toward the ball.
    fn contact_normals(&self, p: Vec2, out: &mut Vec<Vec2>) {
        out.clear();
        let r = self.ball_radius;
        if p.x < r {
            out.push(Vec2::new(1.0, 0.0));
        }
        if p.x > 1.0 - r {
            out.push(Vec2::new(-1.0, 0.0));
        }
        if p.y < r {
            out.push(Vec2::new(0.0, 1.0));
        }
        if p.y > 1.0 - r {
            out.push(Vec2::new(0.0, -1.0));
        }
        for poly in &self.obstacles {
            if !poly.near_bounds(p, r) {
                continue;
            }
            let (closest, d2) = poly.closest_boundary_point(p);
            if d2 < r * r {
                // Nearest feature is an edge interior (edge normal) or a vertex
                // (center-to-vertex normal); both come out of the same difference.
                let away = if poly.contains(p) {
                    closest - p
                } else {
                    p - closest
                };
                if let Some(n) = away.normalized() {
                    out.push(n);
                }
            }
        }
    }
}

fn thrust(action: ActionId) -> Result<Vec2> {
    Ok(match action {
        INC_X => Vec2::new(1.0, 0.0),
        DEC_X => Vec2::new(-1.0, 0.0),
        INC_Y => Vec2::new(0.0, 1.0),
        DEC_Y => Vec2::new(0.0, -1.0),
        COAST => Vec2::new(0.0, 0.0),
        ActionId(a) => return Err(Error::usage(format!("pinball action {a} out of range"))),
    })
}

/// Result of one pinball step before step-cap bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinballStep {
    pub state: PinballState,
    pub reward: f64,
    pub terminal: bool,
}

/// One step of the pinball dynamics.
pub fn pinball_step(map: &PinballMap, state: &PinballState, action: ActionId) -> Result<PinballStep> {
    let mut pos = Vec2::new(state.x, state.y);
    if let Some(i) = map.blocking_obstacle(pos) {
        let what = if i == usize::MAX {
            "the frame".to_string()
        } else {
            format!("obstacle {i}")
        };
        return Err(Error::Integrity(format!(
            "ball at ({}, {}) overlaps {what}",
            state.x, state.y
        )));
    }
    let push = thrust(action)?;
    let mut vel = Vec2::new(
        (state.xdot + push.x * map.impulse).clamp(-1.0, 1.0),
        (state.ydot + push.y * map.impulse).clamp(-1.0, 1.0),
    );

    let dt = map.ball_radius / map.substeps as f64;
    let mut normals = Vec::new();
    let mut terminal = false;
    for _ in 0..map.substeps {
        let next = pos + vel * dt;
        map.contact_normals(next, &mut normals);
        if normals.is_empty() {
            pos = next;
        } else {
            // Stay at the last free position and bounce off each approached surface.
            for &n in &normals {
                if vel.dot(n) < 0.0 {
                    vel = reflect(vel, n);
                }
            }
        }
        if map.at_target(pos) {
            terminal = true;
            break;
        }
    }

    vel = vel * map.drag;
    let next = PinballState {
        x: pos.x,
        y: pos.y,
        xdot: vel.x.clamp(-1.0, 1.0),
        ydot: vel.y.clamp(-1.0, 1.0),
    };
    let reward = if terminal {
        TARGET_REWARD
    } else if map.step_penalties {
        if action == COAST {
            STEP_PENALTY
        } else {
            THRUST_PENALTY
        }
    } else {
        0.0
    };
    Ok(PinballStep {
        state: next,
        reward,
        terminal,
    })
}

#[derive(Clone, Debug)]
pub struct Pinball {
    map: Arc<PinballMap>,
    state: PinballState,
    steps: usize,
    done: bool,
    step_cap: usize,
}

impl Pinball {
    pub fn new(map: Arc<PinballMap>) -> Self {
        Self::with_step_cap(map, PINBALL_STEP_CAP)
    }

    pub fn with_step_cap(map: Arc<PinballMap>, step_cap: usize) -> Self {
        let state = map.start_state();
        Pinball {
            map,
            state,
            steps: 0,
            done: false,
            step_cap,
        }
    }

    pub fn map(&self) -> &PinballMap {
        &self.map
    }
}

impl Environment for Pinball {
    fn action_count(&self) -> usize {
        PINBALL_ACTIONS
    }

    fn step_cap(&self) -> usize {
        self.step_cap
    }

    fn reset(&mut self, _seed: u64) -> EnvState {
        self.state = self.map.start_state();
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::usage("step after episode end"));
        }
        let out = pinball_step(&self.map, &self.state, action)?;
        self.steps += 1;
        self.state = out.state;
        let truncated = !out.terminal && self.steps >= self.step_cap;
        self.done = out.terminal || truncated;
        Ok(StepOutcome {
            next_state: EnvState::Continuous(out.state),
            reward: out.reward,
            terminal: out.terminal,
            truncated,
        })
    }

    fn state(&self) -> EnvState {
        EnvState::Continuous(self.state)
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_map() -> PinballMap {
        PinballMap {
            obstacles: vec![],
            start: Vec2::new(0.5, 0.5),
            target: Vec2::new(0.9, 0.9),
            target_radius: 0.04,
            ball_radius: 0.02,
            drag: 0.995,
            impulse: 0.2,
            substeps: 20,
            step_penalties: false,
        }
    }

    fn state(x: f64, y: f64, xdot: f64, ydot: f64) -> PinballState {
        PinballState { x, y, xdot, ydot }
    }

    #[test]
    fn drag_applies_once_per_step() {
        let m = open_map();
        let out = pinball_step(&m, &state(0.3, 0.5, 1.0, 0.0), COAST).unwrap();
        assert_eq!(out.state.xdot, 0.995);
        assert_eq!(out.state.ydot, 0.0);
        assert!((out.state.x - 0.32).abs() < 1e-12);
        assert_eq!(out.reward, 0.0);
        assert!(!out.terminal);
    }

    #[test]
    fn head_on_wall_reverses_velocity() {
        let mut m = open_map();
        m.drag = 1.0;
        m.obstacles.push(
            Polygon::new(vec![
                Vec2::new(0.6, 0.2),
                Vec2::new(0.7, 0.2),
                Vec2::new(0.7, 0.8),
                Vec2::new(0.6, 0.8),
            ])
            .unwrap(),
        );
        // ball surface 0.001 from the wall, moving right at 0.3
        let out = pinball_step(&m, &state(0.579, 0.5, 0.3, 0.0), COAST).unwrap();
        assert!((out.state.xdot + 0.3).abs() < 1e-15);
        assert_eq!(out.state.ydot, 0.0);
        assert!(m.is_free(Vec2::new(out.state.x, out.state.y)));
    }

    #[test]
    fn thrust_is_clipped() {
        let m = open_map();
        let out = pinball_step(&m, &state(0.5, 0.5, 0.95, -0.95), INC_X).unwrap();
        assert_eq!(out.state.xdot, 0.995);
        let out = pinball_step(&m, &state(0.5, 0.5, 0.0, -0.95), DEC_Y).unwrap();
        assert_eq!(out.state.ydot, -0.995);
    }

    #[test]
    fn reaching_target_pays() {
        let m = open_map();
        let out = pinball_step(&m, &state(0.85, 0.9, 1.0, 0.0), COAST).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, TARGET_REWARD);
    }

    #[test]
    fn overlapping_state_is_integrity_error() {
        let m = open_map();
        let err = pinball_step(&m, &state(0.005, 0.5, 0.0, 0.0), COAST).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn classic_penalties_when_enabled() {
        let mut m = open_map();
        m.step_penalties = true;
        let s = state(0.5, 0.5, 0.0, 0.0);
        assert_eq!(pinball_step(&m, &s, COAST).unwrap().reward, STEP_PENALTY);
        assert_eq!(pinball_step(&m, &s, INC_Y).unwrap().reward, THRUST_PENALTY);
    }

    #[test]
    fn env_truncates_at_cap() {
        let mut env = Pinball::with_step_cap(Arc::new(open_map()), 3);
        env.reset(0);
        assert!(!env.step(COAST).unwrap().truncated);
        assert!(!env.step(COAST).unwrap().truncated);
        let last = env.step(COAST).unwrap();
        assert!(last.truncated && !last.terminal);
        assert!(env.step(COAST).is_err());
    }
}
