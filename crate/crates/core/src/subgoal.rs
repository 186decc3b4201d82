//! Subgoal predicates, totally ordered subgoal series, and achievement tracking.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, EnvMap, Vec2};
use crate::mdp::EnvState;
use crate::rng::{SeedStreams, Stream};
use crate::{Error, Result};

/// A predicate over environment states that marks one subgoal as achieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SubgoalSpec {
    /// Exact grid cell.
    Cell { cell: usize },
    /// Ball center within `radius` of `center`, at any velocity.
    Circle { center: [f64; 2], radius: f64 },
    /// Every selected observation component within `margin` of its target value.
    Slice {
        indices: Vec<usize>,
        values: Vec<f64>,
        margin: f64,
    },
}

impl SubgoalSpec {
    pub fn matches(&self, state: &EnvState) -> Result<bool> {
        match (self, state) {
            (SubgoalSpec::Cell { cell }, EnvState::Discrete { cell: c }) => Ok(cell == c),
            (SubgoalSpec::Circle { center, radius }, EnvState::Continuous(p)) => {
                let d = (p.x - center[0]).hypot(p.y - center[1]);
                Ok(d <= *radius)
            }
            (
                SubgoalSpec::Slice {
                    indices,
                    values,
                    margin,
                },
                s,
            ) => {
                let mut all = true;
                for (&i, &v) in indices.iter().zip(values) {
                    let o = s.observation_at(i).ok_or_else(|| {
                        Error::usage(format!(
                            "slice index {i} outside observation of length {}",
                            s.observation_len()
                        ))
                    })?;
                    all &= (o - v).abs() <= *margin;
                }
                Ok(all)
            }
            (spec, s) => Err(Error::usage(format!(
                "subgoal {spec:?} cannot be evaluated on state {s:?}"
            ))),
        }
    }
}

/// Shorthand for [`SubgoalSpec::matches`].
pub fn matches(spec: &SubgoalSpec, state: &EnvState) -> Result<bool> {
    spec.matches(state)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSource {
    #[default]
    Human,
    Random,
    Scripted,
}

/// Totally ordered subgoal series `sg_1 < sg_2 < ... < sg_n`.
///
/// Also the JSON document exchanged with the CLI and the UI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgoalSeries {
    pub env: EnvKind,
    pub subgoals: Vec<SubgoalSpec>,
    #[serde(default)]
    pub source: SeriesSource,
}

impl SubgoalSeries {
    pub fn new(env: EnvKind, subgoals: Vec<SubgoalSpec>, source: SeriesSource) -> Self {
        SubgoalSeries {
            env,
            subgoals,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.subgoals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgoals.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series always serialize")
    }
}

/// Position in a series: how many subgoals have been achieved this episode.
///
/// `next_index()` is 1-based, `n + 1` once every subgoal is achieved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AchievementCursor {
    achieved: usize,
}

impl AchievementCursor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn achieved(&self) -> usize {
        self.achieved
    }

    pub fn next_index(&self) -> usize {
        self.achieved + 1
    }

    pub fn is_saturated(&self, series: &SubgoalSeries) -> bool {
        self.achieved >= series.len()
    }

    pub fn reset(&mut self) {
        self.achieved = 0;
    }

    /// Tests only the next subgoal in order and advances by at most one.
    pub fn advance(&mut self, state: &EnvState, series: &SubgoalSeries) -> Result<bool> {
        let Some(next) = series.subgoals.get(self.achieved) else {
            return Ok(false);
        };
        let hit = next.matches(state)?;
        if hit {
            self.achieved += 1;
        }
        Ok(hit)
    }
}

/// Functional form of [`AchievementCursor::advance`].
pub fn advance(
    cursor: AchievementCursor,
    state: &EnvState,
    series: &SubgoalSeries,
) -> Result<(bool, AchievementCursor)> {
    let mut c = cursor;
    let hit = c.advance(state, series)?;
    Ok((hit, c))
}

/// `count` distinct random subgoals in random order.
///
/// Grid: open cells other than start and goal. Pinball: circle centers drawn
/// uniformly where the ball fits, with the target's radius.
pub fn random_series(map: &EnvMap, count: usize, seed: u64) -> Result<SubgoalSeries> {
    if count == 0 {
        return Err(Error::Generation("subgoal count must be at least 1".into()));
    }
    let mut rng = SeedStreams::new(seed).rng(Stream::Subgoal);
    let subgoals = match map {
        EnvMap::Grid(g) => {
            let mut pool: Vec<usize> = g
                .open_cells()
                .filter(|&c| c != g.start_id() && c != g.goal_id())
                .collect();
            if count > pool.len() {
                return Err(Error::Generation(format!(
                    "requested {count} subgoals but only {} candidate cells exist",
                    pool.len()
                )));
            }
            let (picked, _) = pool.partial_shuffle(&mut rng, count);
            picked.iter().map(|&cell| SubgoalSpec::Cell { cell }).collect()
        }
        EnvMap::Pinball(p) => {
            const MAX_TRIES: usize = 100_000;
            let mut centers: Vec<Vec2> = Vec::with_capacity(count);
            let mut tries = 0;
            while centers.len() < count {
                tries += 1;
                if tries > MAX_TRIES {
                    return Err(Error::Generation(
                        "could not place random pinball subgoals".into(),
                    ));
                }
                let c = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
                if p.is_free(c) && !centers.contains(&c) {
                    centers.push(c);
                }
            }
            centers
                .into_iter()
                .map(|c| SubgoalSpec::Circle {
                    center: c.into(),
                    radius: p.target_radius,
                })
                .collect()
        }
    };
    Ok(SubgoalSeries::new(map.kind(), subgoals, SeriesSource::Random))
}

/// Field-level validation failure, keyed by a JSON-path-like field name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Checks a series against a map. Empty result means the series is usable.
pub fn validate_series(map: &EnvMap, series: &SubgoalSeries) -> Vec<FieldError> {
    let mut errors = Vec::new();
    if series.env != map.kind() {
        errors.push(FieldError::new(
            "env",
            format!(
                "series is for {} but the map is {}",
                series.env.as_str(),
                map.kind().as_str()
            ),
        ));
    }
    if series.is_empty() {
        errors.push(FieldError::new(
            "subgoals",
            "series must contain at least one subgoal",
        ));
    }
    let obs_len = match map {
        EnvMap::Grid(_) => 1,
        EnvMap::Pinball(_) => 4,
    };
    for (i, sg) in series.subgoals.iter().enumerate() {
        let field = format!("subgoals[{i}]");
        if series.subgoals[..i].contains(sg) {
            errors.push(FieldError::new(&field, "duplicate subgoal"));
        }
        match (sg, map) {
            (SubgoalSpec::Cell { cell }, EnvMap::Grid(g)) => {
                if *cell >= g.n_cells() {
                    errors.push(FieldError::new(&field, format!("cell {cell} is off-grid")));
                } else if !g.is_open(*cell) {
                    errors.push(FieldError::new(&field, format!("cell {cell} is a wall")));
                } else if *cell == g.start_id() {
                    errors.push(FieldError::new(&field, "subgoal coincides with the start"));
                } else if *cell == g.goal_id() {
                    errors.push(FieldError::new(&field, "subgoal coincides with the goal"));
                }
            }
            (SubgoalSpec::Circle { center, radius }, EnvMap::Pinball(p)) => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    errors.push(FieldError::new(
                        format!("{field}.radius"),
                        "radius must be positive",
                    ));
                }
                let c = Vec2::from(*center);
                if !(c.is_finite() && (0.0..=1.0).contains(&c.x) && (0.0..=1.0).contains(&c.y)) {
                    errors.push(FieldError::new(
                        format!("{field}.center"),
                        "center outside the unit square",
                    ));
                } else if p.obstacles.iter().any(|o| o.contains(c)) {
                    errors.push(FieldError::new(
                        format!("{field}.center"),
                        "center lies inside an obstacle",
                    ));
                }
            }
            (
                SubgoalSpec::Slice {
                    indices,
                    values,
                    margin,
                },
                _,
            ) => {
                if indices.is_empty() {
                    errors.push(FieldError::new(
                        format!("{field}.indices"),
                        "no observation indices",
                    ));
                }
                if indices.len() != values.len() {
                    errors.push(FieldError::new(
                        format!("{field}.values"),
                        "values and indices differ in length",
                    ));
                }
                if let Some(bad) = indices.iter().find(|&&ix| ix >= obs_len) {
                    errors.push(FieldError::new(
                        format!("{field}.indices"),
                        format!("index {bad} outside observation of length {obs_len}"),
                    ));
                }
                if !(*margin >= 0.0 && margin.is_finite()) {
                    errors.push(FieldError::new(
                        format!("{field}.margin"),
                        "margin must be non-negative",
                    ));
                }
            }
            (spec, m) => errors.push(FieldError::new(
                &field,
                format!(
                    "{} subgoals do not apply to {}",
                    spec_kind(spec),
                    m.kind().as_str()
                ),
            )),
        }
    }
    errors
}

fn spec_kind(spec: &SubgoalSpec) -> &'static str {
    match spec {
        SubgoalSpec::Cell { .. } => "cell",
        SubgoalSpec::Circle { .. } => "circle",
        SubgoalSpec::Slice { .. } => "slice",
    }
}

/// Parses a series document and validates it against `map`.
/// Parse failures are reported as a single error on the `series` field.
pub fn check_series_value(map: &EnvMap, value: serde_json::Value) -> Vec<FieldError> {
    match serde_json::from_value::<SubgoalSeries>(value) {
        Ok(series) => validate_series(map, &series),
        Err(e) => vec![FieldError::new("series", e.to_string())],
    }
}

pub fn check_series_json(map: &EnvMap, text: &str) -> Vec<FieldError> {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(v) => check_series_value(map, v),
        Err(e) => vec![FieldError::new("series", e.to_string())],
    }
}

/// Groups field errors by field for JSON error bodies.
pub fn errors_by_field(errors: &[FieldError]) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in errors {
        out.entry(e.field.clone()).or_default().push(e.message.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::builtin;
    use crate::mdp::PinballState;

    fn ball(x: f64, y: f64, xdot: f64, ydot: f64) -> EnvState {
        EnvState::Continuous(PinballState { x, y, xdot, ydot })
    }

    #[test]
    fn circle_ignores_velocity() {
        let sg = SubgoalSpec::Circle {
            center: [0.5, 0.5],
            radius: 0.04,
        };
        assert!(sg.matches(&ball(0.52, 0.5, 0.9, -0.7)).unwrap());
        assert!(sg.matches(&ball(0.52, 0.5, 0.0, 0.0)).unwrap());
        assert!(!sg.matches(&ball(0.55, 0.5, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn cell_equality() {
        let sg = SubgoalSpec::Cell { cell: 37 };
        assert!(sg.matches(&EnvState::Discrete { cell: 37 }).unwrap());
        assert!(!sg.matches(&EnvState::Discrete { cell: 38 }).unwrap());
    }

    #[test]
    fn slice_margin() {
        let sg = SubgoalSpec::Slice {
            indices: vec![3],
            values: vec![0.10],
            margin: 0.01,
        };
        assert!(!sg.matches(&ball(0.0, 0.0, 0.0, 0.115)).unwrap());
        assert!(sg.matches(&ball(0.0, 0.0, 0.0, 0.105)).unwrap());
        let bad = SubgoalSpec::Slice {
            indices: vec![4],
            values: vec![0.0],
            margin: 0.01,
        };
        assert!(bad.matches(&ball(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn incompatible_kinds_are_usage_errors() {
        let sg = SubgoalSpec::Cell { cell: 1 };
        assert!(matches!(
            sg.matches(&ball(0.5, 0.5, 0.0, 0.0)),
            Err(Error::Usage(_))
        ));
    }

    fn two_cells() -> SubgoalSeries {
        SubgoalSeries::new(
            EnvKind::Grid,
            vec![SubgoalSpec::Cell { cell: 10 }, SubgoalSpec::Cell { cell: 20 }],
            SeriesSource::Scripted,
        )
    }

    #[test]
    fn ordered_advance() {
        let series = two_cells();
        let c = AchievementCursor::new();
        let (hit, c) = advance(c, &EnvState::Discrete { cell: 10 }, &series).unwrap();
        assert!(hit);
        assert_eq!(c.next_index(), 2);
    }

    #[test]
    fn order_gate_blocks_later_subgoal() {
        let series = two_cells();
        let (hit, c) = advance(
            AchievementCursor::new(),
            &EnvState::Discrete { cell: 20 },
            &series,
        )
        .unwrap();
        assert!(!hit);
        assert_eq!(c.next_index(), 1);
    }

    #[test]
    fn saturated_cursor_stays() {
        let series = two_cells();
        let mut c = AchievementCursor::new();
        c.advance(&EnvState::Discrete { cell: 10 }, &series).unwrap();
        c.advance(&EnvState::Discrete { cell: 20 }, &series).unwrap();
        assert!(c.is_saturated(&series));
        assert!(!c.advance(&EnvState::Discrete { cell: 20 }, &series).unwrap());
        assert_eq!(c.next_index(), 3);
    }

    #[test]
    fn random_series_grid() {
        let map = EnvMap::Grid(builtin::fourrooms());
        let a = random_series(&map, 2, 11).unwrap();
        let b = random_series(&map, 2, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_ne!(a.subgoals[0], a.subgoals[1]);
        assert_eq!(a.source, SeriesSource::Random);
        assert!(validate_series(&map, &a).is_empty());
        assert!(matches!(random_series(&map, 103, 0), Err(Error::Generation(_))));
        assert!(random_series(&map, 102, 0).is_ok());
    }

    #[test]
    fn random_series_pinball() {
        let map = EnvMap::Pinball(builtin::pinball());
        let s = random_series(&map, 2, 3).unwrap();
        for sg in &s.subgoals {
            match sg {
                SubgoalSpec::Circle { center, radius } => {
                    assert_eq!(*radius, 0.04);
                    assert!(map.pinball().unwrap().is_free(Vec2::from(*center)));
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn validation_messages() {
        let map = EnvMap::Grid(builtin::fourrooms());
        let g = map.grid().unwrap();
        let series = SubgoalSeries::new(
            EnvKind::Grid,
            vec![
                SubgoalSpec::Cell { cell: 5 }, // (0,5) wall
                SubgoalSpec::Cell { cell: g.start_id() },
                SubgoalSpec::Cell { cell: 200 },
                SubgoalSpec::Cell { cell: 27 },
                SubgoalSpec::Cell { cell: 27 },
                SubgoalSpec::Circle {
                    center: [0.5, 0.5],
                    radius: 0.04,
                },
            ],
            SeriesSource::Human,
        );
        let errs = validate_series(&map, &series);
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(
            fields,
            vec![
                "subgoals[0]",
                "subgoals[1]",
                "subgoals[2]",
                "subgoals[4]",
                "subgoals[5]"
            ]
        );
    }

    #[test]
    fn pinball_subgoal_inside_obstacle() {
        let map = EnvMap::Pinball(builtin::pinball());
        let series = SubgoalSeries::new(
            EnvKind::Pinball,
            vec![SubgoalSpec::Circle {
                center: [0.5, 0.82],
                radius: 0.04,
            }],
            SeriesSource::Human,
        );
        let errs = validate_series(&map, &series);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "subgoals[0].center");
    }

    #[test]
    fn document_format() {
        let text = r#"{"env":"pinball","subgoals":[{"kind":"circle","center":[0.5,0.2],"radius":0.04},
            {"kind":"slice","indices":[0,1],"values":[0.9,0.2],"margin":0.01}],"source":"human"}"#;
        let s = SubgoalSeries::from_json(text).unwrap();
        assert_eq!(s.env, EnvKind::Pinball);
        assert_eq!(s.len(), 2);
        assert_eq!(SubgoalSeries::from_json(&s.to_json()).unwrap(), s);
        let grid = r#"{"env":"fourrooms","subgoals":[{"kind":"cell","cell":37}]}"#;
        assert_eq!(
            SubgoalSeries::from_json(grid).unwrap().source,
            SeriesSource::Human
        );
    }
}
