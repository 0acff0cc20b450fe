//! Scenario files: YAML with a versioned schema, validated on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::{wrap_angle, Bump, FactoryMap, Polytope, Rect, RegionKind, RobotState, Vec2};
use crate::config::{ControllerConfig, PrintMode, SimConfig};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: FactoryMap,
    pub start: RobotState,
    pub reference_path: Vec<Vec2>,
    /// Resolved against the scenario file's directory.
    pub gcode_path: PathBuf,
    pub mode: PrintMode,
    pub rng_seed: u64,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn goal(&self) -> Vec2 {
        *self.reference_path.last().expect("validated: >= 2 waypoints")
    }

    /// Parses scenario YAML; relative paths inside resolve against `base_dir`.
    pub fn from_yaml_str(text: &str, source_name: &str, base_dir: &Path) -> Result<Self> {
        let value: Value = serde_yaml::from_str(text).map_err(|e| yaml_error(source_name, e))?;
        Scenario::from_value(value, source_name, base_dir)
    }

    fn from_value(value: Value, source_name: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = serde_yaml::from_value(value).map_err(|e| yaml_error(source_name, e))?;
        file.into_scenario(base_dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.controller.validate()?;
        self.sim.validate()?;
        self.start.validate(self.controller.v_max)?;
        if !self.map.bounds.contains(self.start.position) {
            return Err(Error::validation("start position lies outside the map bounds"));
        }
        if let Some(i) = self.map.obstacle_at(self.start.position) {
            return Err(Error::validation(format!("start position lies inside obstacle {i}")));
        }
        if self.reference_path.len() < 2 {
            return Err(Error::validation(format!(
                "reference_path needs at least 2 waypoints, got {}",
                self.reference_path.len()
            )));
        }
        for (i, w) in self.reference_path.iter().enumerate() {
            if !w.is_finite() || !self.map.bounds.contains(*w) {
                return Err(Error::validation(format!("waypoint {i} {w} lies outside the map bounds")));
            }
        }
        for (i, w) in self.reference_path.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::validation(format!(
                    "waypoints {i} and {} coincide; consecutive waypoints must be distinct",
                    i + 1
                )));
            }
        }
        if let Some(i) = self.map.obstacle_at(self.goal()) {
            return Err(Error::validation(format!("goal lies inside obstacle {i}")));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    map: MapFile,
    start: StartFile,
    reference_path: Vec<Vec2>,
    gcode: PathBuf,
    mode: PrintMode,
    seed: u64,
    #[serde(default)]
    controller: ControllerConfig,
    #[serde(default)]
    sim: SimConfig,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    bounds: Rect,
    #[serde(default)]
    obstacles: Vec<Vec<Vec2>>,
    #[serde(default)]
    zones: Vec<Vec<Vec2>>,
    #[serde(default)]
    bumps: Vec<Bump>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct StartFile {
    position: Vec2,
    #[serde(default)]
    heading: f64,
    #[serde(default)]
    velocity: Vec2,
}

impl ScenarioFile {
    fn into_scenario(self, base_dir: &Path) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let polys = |list: Vec<Vec<Vec2>>, label: RegionKind, what: &str| -> Result<Vec<Polytope>> {
            list.iter()
                .enumerate()
                .map(|(i, v)| {
                    Polytope::from_vertices(v, label).map_err(|e| Error::validation(format!("{what} {i}: {e}")))
                })
                .collect()
        };
        let map = FactoryMap {
            bounds: self.map.bounds,
            obstacles: polys(self.map.obstacles, RegionKind::Obstacle, "obstacle")?,
            zones: polys(self.map.zones, RegionKind::RestrictedZone, "zone")?,
            bumps: self.map.bumps,
        };
        if !self.start.heading.is_finite() {
            return Err(Error::validation("start heading is not finite"));
        }
        let start = RobotState {
            position: self.start.position,
            velocity: self.start.velocity,
            heading: wrap_angle(self.start.heading),
            time: 0.0,
        };
        let mut sim = self.sim;
        if let Some(c) = sim.calibration.take() {
            sim.calibration = Some(base_dir.join(c));
        }
        let scenario = Scenario {
            map,
            start,
            reference_path: self.reference_path,
            gcode_path: base_dir.join(self.gcode),
            mode: self.mode,
            rng_seed: self.seed,
            controller: self.controller,
            sim,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

fn yaml_error(source_name: &str, e: serde_yaml::Error) -> Error {
    Error::Parse { source_name: source_name.to_string(), line: e.location().map(|l| l.line()), message: e.to_string() }
}

/// Sets a dotted-path key (`controller.v_lim_critical`) in a YAML tree.
/// The value text is parsed as a YAML scalar or flow collection.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed: Value = serde_yaml::from_str(raw).map_err(|e| Error::Parse {
        source_name: format!("override {key}"),
        line: None,
        message: e.to_string(),
    })?;
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::validation(format!("malformed override key {key:?}")));
    }
    for (i, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Mapping(m) => m,
            Value::Null => {
                *node = Value::Mapping(Default::default());
                match node {
                    Value::Mapping(m) => m,
                    _ => unreachable!(),
                }
            }
            _ => return Err(Error::validation(format!("override {key:?}: {} is not a mapping", parts[..i].join(".")))),
        };
        let k = Value::String((*part).to_string());
        if i + 1 == parts.len() {
            map.insert(k, parsed);
            return Ok(());
        }
        node = map.entry(k).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last key")
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_scenario_with_overrides(path, &[])
}

/// Loads a scenario, applying `key=value` overrides to the raw tree before
/// typed validation.
pub fn load_scenario_with_overrides(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut value: Value = serde_yaml::from_str(&text).map_err(|e| yaml_error(&name, e))?;
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Scenario::from_value(value, &name, base)
}
