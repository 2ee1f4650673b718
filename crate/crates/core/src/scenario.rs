//! Scenario files: TOML documents describing the workspace, objects and
//! their scripts, the task, and every tunable of the run.
//!
//! ```toml
//! name = "demo"
//! task = "[]<> a"
//!
//! [workspace]
//! bounds = [0.0, 0.0, 10.0, 10.0]   # xmin, ymin, xmax, ymax
//! eta = 1.0
//! epsilon_sat = 0.5
//! obstacles = [{ rect = [4.0, 0.0, 5.0, 6.0] }, { circle = { center = [8.0, 8.0], radius = 0.5 } }]
//! regions = [{ name = "Room_A", rect = [0.0, 0.0, 4.0, 10.0] }]
//!
//! [[terrain]]                        # zones default to flat ground
//! kind = "stairs"
//! polygon = [[6.0, 0.0], [7.0, 0.0], [7.0, 2.0], [6.0, 2.0]]
//!
//! [[objects]]
//! id = "a1"
//! class = "a"
//! position = [2.0, 2.0]             # or waypoints = [[t, x, y], ...]
//!
//! [robot]
//! start = [1.0, 1.0]
//! ```
//!
//! Sections `prior`, `camera`, `perception`, `planner` and `sim` are
//! optional. Without `prior` the robot knows every object's position at
//! t = 0; `prior = []` means it knows nothing. Obstacles are not inflated:
//! the robot is a point, so leave room for its body when drawing walls.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::executive::{strip_constraints, ConstrainedTask};
use crate::locomotion::{Terrain, TrackParams};
use crate::perception::{CameraModel, KbParams};
use crate::planner::PlannerParams;
use crate::workspace::{
    ConvexPolygon, EnvObject, Mobility, Obstacle, Point, Region, Waypoint, Workspace,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, reason: impl ToString) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircleDef {
    center: [f64; 2],
    radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeDef {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    rect: Option<[f64; 4]>,
    #[serde(default)]
    polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    circle: Option<CircleDef>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceDef {
    bounds: [f64; 4],
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_eps")]
    epsilon_sat: f64,
    #[serde(default)]
    obstacles: Vec<ShapeDef>,
    #[serde(default)]
    regions: Vec<ShapeDef>,
}

fn default_eta() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDef {
    id: String,
    class: String,
    #[serde(default)]
    position: Option<[f64; 2]>,
    #[serde(default)]
    waypoints: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorDef {
    class: String,
    position: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDef {
    start: [f64; 2],
    #[serde(default)]
    heading: f64,
    #[serde(default = "default_trot")]
    trot_speed: f64,
    #[serde(default = "default_walk")]
    walk_speed: f64,
    #[serde(default = "default_omega")]
    omega_max: f64,
    #[serde(default = "default_humans")]
    human_classes: Vec<String>,
}

fn default_trot() -> f64 {
    0.8
}

fn default_walk() -> f64 {
    0.3
}

fn default_omega() -> f64 {
    2.0
}

fn default_humans() -> Vec<String> {
    vec!["human".into(), "person".into(), "patient".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDef {
    #[serde(default = "default_fov")]
    fov_half_angle: f64,
    #[serde(default = "default_range")]
    range: f64,
    #[serde(default = "default_noise")]
    noise_sigma: f64,
}

fn default_fov() -> f64 {
    0.6
}

fn default_range() -> f64 {
    5.0
}

fn default_noise() -> f64 {
    0.05
}

impl Default for CameraDef {
    fn default() -> Self {
        Self {
            fov_half_angle: default_fov(),
            range: default_range(),
            noise_sigma: default_noise(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerceptionDef {
    speed_threshold: Option<f64>,
    association_gate: Option<f64>,
    alpha: Option<f64>,
    drift_window: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerDef {
    n_samples: Option<usize>,
    rewire_gamma: Option<f64>,
    goal_bias: Option<f64>,
    suffix_candidates: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimDef {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_loops")]
    suffix_loops: usize,
}

fn default_dt() -> f64 {
    0.05
}

fn default_horizon() -> f64 {
    120.0
}

fn default_loops() -> usize {
    2
}

impl Default for SimDef {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            seed: 0,
            suffix_loops: default_loops(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDef {
    name: String,
    task: String,
    workspace: WorkspaceDef,
    #[serde(default)]
    terrain: Vec<ShapeDef>,
    #[serde(default)]
    objects: Vec<ObjectDef>,
    #[serde(default)]
    prior: Option<Vec<PriorDef>>,
    robot: RobotDef,
    #[serde(default)]
    camera: CameraDef,
    #[serde(default)]
    perception: PerceptionDef,
    #[serde(default)]
    planner: PlannerDef,
    #[serde(default)]
    sim: SimDef,
}

#[derive(Debug, Clone)]
pub struct TerrainZone {
    pub kind: Terrain,
    pub polygon: ConvexPolygon,
}

#[derive(Debug, Clone)]
pub struct RobotConfig {
    pub start: Point,
    pub heading: f64,
    pub trot_speed: f64,
    pub walk_speed: f64,
    pub track: TrackParams,
    pub human_classes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub suffix_loops: usize,
}

impl SimConfig {
    pub fn ticks(&self) -> usize {
        ((self.horizon / self.dt) + 1e-9).floor() as usize
    }
}

/// A validated scenario with all cross-references resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub task: ConstrainedTask,
    pub workspace: Workspace,
    pub terrain: Vec<TerrainZone>,
    pub objects: Vec<EnvObject>,
    /// (class, position) entries the robot starts out believing.
    pub prior: Vec<(String, Point)>,
    pub robot: RobotConfig,
    pub camera: CameraModel,
    pub kb: KbParams,
    pub planner: PlannerParams,
    pub sim: SimConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn pt(a: [f64; 2]) -> Point {
    Point::new(a[0], a[1])
}

fn finite(field: &str, vals: &[f64]) -> Result<(), ScenarioError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(field, "non-finite number"))
    }
}

fn polygon_of(field: &str, s: &ShapeDef) -> Result<ConvexPolygon, ScenarioError> {
    match (&s.rect, &s.polygon, &s.circle) {
        (Some(r), None, None) => {
            finite(field, r)?;
            ConvexPolygon::rect(r[0], r[1], r[2], r[3]).map_err(|e| invalid(field, e))
        }
        (None, Some(vs), None) => {
            finite(field, &vs.concat())?;
            ConvexPolygon::new(vs.iter().map(|&v| pt(v)).collect()).map_err(|e| invalid(field, e))
        }
        _ => Err(invalid(field, "expected exactly one of `rect` or `polygon`")),
    }
}

fn obstacle_of(field: &str, s: &ShapeDef) -> Result<Obstacle, ScenarioError> {
    if s.name.is_some() || s.kind.is_some() {
        return Err(invalid(field, "obstacles take no `name` or `kind`"));
    }
    match &s.circle {
        Some(c) if s.rect.is_none() && s.polygon.is_none() => {
            finite(field, &[c.center[0], c.center[1], c.radius])?;
            if !(c.radius > 0.0) {
                return Err(invalid(field, "circle radius must be positive"));
            }
            Ok(Obstacle::Circle {
                center: pt(c.center),
                radius: c.radius,
            })
        }
        Some(_) => Err(invalid(field, "expected exactly one shape")),
        None => polygon_of(field, s).map(Obstacle::Polygon),
    }
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let def: ScenarioDef = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        Self::from_def(def)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// A bundled fixture by name, or else a file path.
    pub fn load(name_or_path: &str) -> Result<Self, ScenarioError> {
        match fixture(name_or_path) {
            Some(text) => Self::from_toml(text),
            None => Self::from_path(Path::new(name_or_path)),
        }
    }

    fn from_def(d: ScenarioDef) -> Result<Self, ScenarioError> {
        let w = &d.workspace;
        finite("workspace.bounds", &w.bounds)?;
        let obstacles = w
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, s)| obstacle_of(&format!("workspace.obstacles[{i}]"), s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut regions = Vec::new();
        for (i, s) in w.regions.iter().enumerate() {
            let field = format!("workspace.regions[{i}]");
            let name = s.name.clone().ok_or_else(|| invalid(&field, "region needs a `name`"))?;
            if s.kind.is_some() || s.circle.is_some() {
                return Err(invalid(&field, "regions are convex polygons without `kind`"));
            }
            regions.push(Region {
                name,
                polygon: polygon_of(&field, s)?,
            });
        }
        let ws = Workspace::new(
            Point::new(w.bounds[0], w.bounds[1]),
            Point::new(w.bounds[2], w.bounds[3]),
            obstacles,
            regions,
            w.eta,
            w.epsilon_sat,
        )
        .map_err(|e| invalid("workspace", e))?;

        let mut terrain = Vec::new();
        for (i, s) in d.terrain.iter().enumerate() {
            let field = format!("terrain[{i}]");
            let kind = match s.kind.as_deref() {
                Some("stairs") => Terrain::Stairs,
                Some("flat") => Terrain::Flat,
                other => return Err(invalid(&field, format!("unknown terrain kind {other:?}"))),
            };
            terrain.push(TerrainZone {
                kind,
                polygon: polygon_of(&field, s)?,
            });
        }

        let mut objects = Vec::new();
        for (i, o) in d.objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            if objects.iter().any(|e: &EnvObject| e.id == o.id) {
                return Err(invalid(&field, format!("duplicate id `{}`", o.id)));
            }
            let mobility = match (&o.position, &o.waypoints) {
                (Some(p), None) => {
                    finite(&field, p)?;
                    Mobility::Static(pt(*p))
                }
                (None, Some(wps)) => {
                    finite(&field, &wps.concat())?;
                    Mobility::Scripted(
                        wps.iter()
                            .map(|w| Waypoint {
                                time: w[0],
                                position: Point::new(w[1], w[2]),
                            })
                            .collect(),
                    )
                }
                _ => return Err(invalid(&field, "expected exactly one of `position` or `waypoints`")),
            };
            let obj = EnvObject::new(o.id.clone(), o.class.clone(), mobility).map_err(|e| invalid(&field, e))?;
            let positions: Vec<Point> = match &obj.mobility {
                Mobility::Static(p) => vec![*p],
                Mobility::Scripted(w) => w.iter().map(|w| w.position).collect(),
            };
            if positions.iter().any(|&p| !ws.point_free(p)) {
                return Err(invalid(&field, "position outside bounds or inside an obstacle"));
            }
            objects.push(obj);
        }

        let prior = match &d.prior {
            None => objects
                .iter()
                .map(|o| (o.class_name.clone(), o.mobility.position_at(0.0)))
                .collect(),
            Some(list) => {
                for (i, p) in list.iter().enumerate() {
                    finite(&format!("prior[{i}]"), &p.position)?;
                }
                list.iter().map(|p| (p.class.clone(), pt(p.position))).collect()
            }
        };

        let r = &d.robot;
        finite("robot", &[r.start[0], r.start[1], r.heading, r.trot_speed, r.walk_speed, r.omega_max])?;
        let start = pt(r.start);
        if !ws.point_free(start) {
            return Err(invalid("robot.start", "outside bounds or inside an obstacle"));
        }
        if !(r.trot_speed > 0.0 && r.walk_speed > 0.0 && r.omega_max > 0.0) {
            return Err(invalid("robot", "speeds and omega_max must be positive"));
        }

        let camera = CameraModel::new(d.camera.fov_half_angle, d.camera.range, d.camera.noise_sigma)
            .map_err(|e| invalid("camera", e))?;

        let mut kb = KbParams::default();
        let pd = &d.perception;
        kb.speed_threshold = pd.speed_threshold.unwrap_or(kb.speed_threshold);
        kb.gate = pd.association_gate.unwrap_or(kb.gate);
        kb.alpha = pd.alpha.unwrap_or(kb.alpha);
        kb.drift_window = pd.drift_window.unwrap_or(kb.drift_window);
        if !(kb.speed_threshold >= 0.0 && kb.gate > 0.0 && kb.alpha > 0.0 && kb.alpha <= 1.0 && kb.drift_window >= 0.0) {
            return Err(invalid("perception", "thresholds out of range"));
        }

        let mut planner = PlannerParams::default();
        let p = &d.planner;
        planner.n_samples = p.n_samples.unwrap_or(planner.n_samples);
        planner.rewire_gamma = p.rewire_gamma.unwrap_or(planner.rewire_gamma);
        planner.goal_bias = p.goal_bias.unwrap_or(planner.goal_bias);
        planner.suffix_candidates = p.suffix_candidates.unwrap_or(planner.suffix_candidates);
        planner.seed = p.seed.unwrap_or(d.sim.seed);
        if !(0.0..=1.0).contains(&planner.goal_bias) || planner.suffix_candidates == 0 || planner.n_samples == 0 {
            return Err(invalid("planner", "goal_bias must be in [0,1]; counts must be positive"));
        }

        let s = &d.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid("sim.dt", "must be positive"));
        }
        if !(s.horizon >= s.dt && s.horizon.is_finite()) {
            return Err(invalid("sim.horizon", "must be at least dt"));
        }

        let task = strip_constraints(&d.task, &ws).map_err(|e| invalid("task", e))?;

        Ok(Scenario {
            name: d.name,
            task,
            workspace: ws,
            terrain,
            objects,
            prior,
            robot: RobotConfig {
                start,
                heading: r.heading,
                trot_speed: r.trot_speed,
                walk_speed: r.walk_speed,
                track: TrackParams {
                    omega_max: r.omega_max,
                    ..TrackParams::default()
                },
                human_classes: r.human_classes.clone(),
            },
            camera,
            kb,
            planner,
            sim: SimConfig {
                dt: s.dt,
                horizon: s.horizon,
                seed: s.seed,
                suffix_loops: s.suffix_loops,
            },
        })
    }

    pub fn terrain_at(&self, p: Point) -> Terrain {
        self.terrain
            .iter()
            .find(|z| z.polygon.contains(p))
            .map_or(Terrain::Flat, |z| z.kind)
    }

    /// Same scenario with a different seed for planning and sensing.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.planner.seed = seed;
        self
    }
}

pub const FIXTURES: [(&str, &str); 10] = [
    ("hospital_1", include_str!("../scenarios/hospital_1.toml")),
    ("hospital_1_static", include_str!("../scenarios/hospital_1_static.toml")),
    ("hospital_2_gaits", include_str!("../scenarios/hospital_2_gaits.toml")),
    ("handover_1", include_str!("../scenarios/handover_1.toml")),
    ("micro_reach", include_str!("../scenarios/micro_reach.toml")),
    ("micro_recur", include_str!("../scenarios/micro_recur.toml")),
    ("micro_walled", include_str!("../scenarios/micro_walled.toml")),
    ("micro_empty", include_str!("../scenarios/micro_empty.toml")),
    ("micro_blocked", include_str!("../scenarios/micro_blocked.toml")),
    ("micro_retarget", include_str!("../scenarios/micro_retarget.toml")),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
