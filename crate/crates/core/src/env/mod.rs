//! Environments and their map documents.
//!
//! Maps are JSON documents tagged by `"type"`: `"grid"` or `"pinball"`.
//! Unknown keys are rejected, and every semantic check reports the field it
//! failed on.

pub mod geometry;
pub mod grid;
pub mod pinball;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::mdp::Environment;
use crate::{Error, Result};

pub use geometry::{Polygon, Vec2};
pub use grid::{fourrooms_step, GridMap, GridWorld};
pub use pinball::{pinball_step, Pinball, PinballMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    #[serde(rename = "fourrooms", alias = "grid")]
    Grid,
    Pinball,
}

impl EnvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Grid => "fourrooms",
            EnvKind::Pinball => "pinball",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvMap {
    Grid(GridMap),
    Pinball(PinballMap),
}

impl EnvMap {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvMap::Grid(_) => EnvKind::Grid,
            EnvMap::Pinball(_) => EnvKind::Pinball,
        }
    }

    pub fn grid(&self) -> Option<&GridMap> {
        match self {
            EnvMap::Grid(g) => Some(g),
            EnvMap::Pinball(_) => None,
        }
    }

    pub fn pinball(&self) -> Option<&PinballMap> {
        match self {
            EnvMap::Pinball(p) => Some(p),
            EnvMap::Grid(_) => None,
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            EnvMap::Grid(_) => grid::GRID_ACTIONS,
            EnvMap::Pinball(_) => pinball::PINBALL_ACTIONS,
        }
    }

    pub fn step_cap(&self) -> usize {
        match self {
            EnvMap::Grid(_) => grid::GRID_STEP_CAP,
            EnvMap::Pinball(_) => pinball::PINBALL_STEP_CAP,
        }
    }

    /// Reward for reaching the goal.
    pub fn goal_reward(&self) -> f64 {
        match self {
            EnvMap::Grid(_) => grid::GOAL_REWARD,
            EnvMap::Pinball(_) => pinball::TARGET_REWARD,
        }
    }

    /// Default radius for circular subgoals (the target radius).
    pub fn subgoal_radius(&self) -> Option<f64> {
        self.pinball().map(|p| p.target_radius)
    }

    /// Fresh environment instance over this map.
    pub fn instantiate(&self) -> Box<dyn Environment> {
        match self {
            EnvMap::Grid(g) => Box::new(GridWorld::new(Arc::new(g.clone()))),
            EnvMap::Pinball(p) => Box::new(Pinball::new(Arc::new(p.clone()))),
        }
    }

    pub fn to_document(&self) -> MapDocument {
        match self {
            EnvMap::Grid(g) => MapDocument::Grid(GridDoc {
                width: g.width(),
                height: g.height(),
                walls: g.walls().iter().map(|&(r, c)| [r, c]).collect(),
                start: [g.start().0, g.start().1],
                goal: [g.goal().0, g.goal().1],
                hallways: (!g.hallways().is_empty())
                    .then(|| g.hallways().iter().map(|&(r, c)| [r, c]).collect()),
            }),
            EnvMap::Pinball(p) => MapDocument::Pinball(PinballDoc {
                obstacles: p
                    .obstacles
                    .iter()
                    .map(|o| o.vertices().iter().map(|&v| v.into()).collect())
                    .collect(),
                start: p.start.into(),
                target: p.target.into(),
                target_radius: p.target_radius,
                ball_radius: p.ball_radius,
                drag: p.drag,
                impulse: p.impulse,
                substeps: p.substeps,
                step_penalties: p.step_penalties,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document().to_value()).expect("map documents always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<[usize; 2]>,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hallways: Option<Vec<[usize; 2]>>,
}

fn default_ball_radius() -> f64 {
    0.02
}
fn default_drag() -> f64 {
    0.995
}
fn default_impulse() -> f64 {
    0.2
}
fn default_substeps() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinballDoc {
    pub obstacles: Vec<Vec<[f64; 2]>>,
    pub start: [f64; 2],
    pub target: [f64; 2],
    pub target_radius: f64,
    #[serde(default = "default_ball_radius")]
    pub ball_radius: f64,
    #[serde(default = "default_drag")]
    pub drag: f64,
    #[serde(default = "default_impulse")]
    pub impulse: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub step_penalties: bool,
}

/// Wire form of a map, before semantic validation.
#[derive(Clone, Debug, PartialEq)]
pub enum MapDocument {
    Grid(GridDoc),
    Pinball(PinballDoc),
}

impl MapDocument {
    pub fn from_value(mut value: Value) -> Result<Self> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::map("$", "map document must be a JSON object"))?;
        let kind = obj
            .remove("type")
            .ok_or_else(|| Error::map("type", "missing map type"))?;
        let doc_err = |e: serde_json::Error| Error::map("$", e.to_string());
        match kind.as_str() {
            Some("grid") => Ok(MapDocument::Grid(serde_json::from_value(value).map_err(doc_err)?)),
            Some("pinball") => Ok(MapDocument::Pinball(
                serde_json::from_value(value).map_err(doc_err)?,
            )),
            _ => Err(Error::map("type", format!("unknown map type {kind}"))),
        }
    }

    pub fn to_value(&self) -> Value {
        let (kind, mut v) = match self {
            MapDocument::Grid(g) => ("grid", serde_json::to_value(g)),
            MapDocument::Pinball(p) => ("pinball", serde_json::to_value(p)),
        };
        let v = v.as_mut().expect("map documents always serialize");
        v.as_object_mut()
            .expect("documents are objects")
            .insert("type".into(), Value::String(kind.into()));
        v.take()
    }

    pub fn into_map(self) -> Result<EnvMap> {
        match self {
            MapDocument::Grid(d) => {
                let cell = |a: [usize; 2]| (a[0], a[1]);
                let g = GridMap::new(
                    d.width,
                    d.height,
                    d.walls.iter().copied().map(cell),
                    cell(d.start),
                    cell(d.goal),
                    d.hallways.unwrap_or_default().into_iter().map(cell).collect(),
                )?;
                Ok(EnvMap::Grid(g))
            }
            MapDocument::Pinball(d) => {
                let obstacles = d
                    .obstacles
                    .into_iter()
                    .enumerate()
                    .map(|(i, vs)| {
                        Polygon::new(vs.into_iter().map(Vec2::from).collect()).ok_or_else(|| {
                            Error::map(format!("obstacles[{i}]"), "polygon needs at least 3 vertices")
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let p = PinballMap {
                    obstacles,
                    start: d.start.into(),
                    target: d.target.into(),
                    target_radius: d.target_radius,
                    ball_radius: d.ball_radius,
                    drag: d.drag,
                    impulse: d.impulse,
                    substeps: d.substeps,
                    step_penalties: d.step_penalties,
                };
                p.validate()?;
                Ok(EnvMap::Pinball(p))
            }
        }
    }
}

/// Parses and validates a map document.
pub fn load_map(text: &str) -> Result<EnvMap> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::map(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    MapDocument::from_value(value)?.into_map()
}

pub fn load_map_file(path: &Path) -> Result<EnvMap> {
    let text = std::fs::read_to_string(path)?;
    load_map(&text).map_err(|e| match e {
        Error::MapLoad { location, message } => Error::MapLoad {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

/// A shipped map id (`fourrooms`, `pinball`) or a path to a map document.
pub fn resolve_map(id_or_path: &str) -> Result<EnvMap> {
    match builtin::by_id(id_or_path) {
        Some(m) => Ok(m),
        None => load_map_file(Path::new(id_or_path)),
    }
}

pub mod builtin {
    //! Maps shipped with the crate.

    use super::*;

    pub const FOURROOMS_JSON: &str = include_str!("../../maps/fourrooms.json");
    pub const PINBALL_JSON: &str = include_str!("../../maps/pinball.json");

    pub const IDS: [&str; 2] = ["fourrooms", "pinball"];

    pub fn by_id(id: &str) -> Option<EnvMap> {
        let text = match id {
            "fourrooms" => FOURROOMS_JSON,
            "pinball" => PINBALL_JSON,
            _ => return None,
        };
        Some(load_map(text).expect("shipped maps are valid"))
    }

    pub fn fourrooms() -> GridMap {
        match by_id("fourrooms") {
            Some(EnvMap::Grid(g)) => g,
            _ => unreachable!(),
        }
    }

    pub fn pinball() -> PinballMap {
        match by_id("pinball") {
            Some(EnvMap::Pinball(p)) => p,
            _ => unreachable!(),
        }
    }
}
