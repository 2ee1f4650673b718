//! Simulated sensing and scene understanding.
//!
//! Detections come from ground truth filtered by a camera cone, range and
//! line of sight, plus seeded Gaussian noise. Point-cloud helpers cover
//! density clustering and the cylinder-occupancy score for human position
//! hypotheses. The knowledge base keeps per-object beliefs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::par::{self, Exec};
use crate::workspace::{dist, EnvState, Point, Workspace};

pub const CYLINDER_RADIUS: f64 = 0.2;
pub const CYLINDER_HEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("point cloud has no human points")]
    NoHumanPoints,
    #[error("no candidate positions")]
    NoCandidates,
    #[error("detections are not in increasing time order ({prev} then {curr})")]
    NonMonotoneTimestamps { prev: f64, curr: f64 },
    #[error("invalid camera: {0}")]
    BadCamera(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fov_half_angle: f64,
    pub range: f64,
    pub noise_sigma: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_half_angle: 0.6,
            range: 5.0,
            noise_sigma: 0.05,
        }
    }
}

impl CameraModel {
    pub fn new(fov_half_angle: f64, range: f64, noise_sigma: f64) -> Result<Self, PerceptionError> {
        if !(fov_half_angle > 0.0 && fov_half_angle <= PI) {
            return Err(PerceptionError::BadCamera("fov_half_angle must be in (0, pi]"));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(PerceptionError::BadCamera("range must be positive"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(PerceptionError::BadCamera("noise_sigma must be non-negative"));
        }
        Ok(Self {
            fov_half_angle,
            range,
            noise_sigma,
        })
    }

    /// Geometric visibility of `target` from `pose`, ignoring noise.
    pub fn sees(&self, ws: &Workspace, pose: Pose, target: Point) -> bool {
        let d = dist(pose.position, target);
        d <= self.range
            && (d == 0.0 || angular_offset(pose, target) <= self.fov_half_angle)
            && ws.segment_free(pose.position, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Point, heading: f64) -> Self {
        Self { position, heading }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Absolute bearing error between the heading and the direction to `target`.
pub fn angular_offset(pose: Pose, target: Point) -> f64 {
    let v = target - pose.position;
    wrap_angle(v.y.atan2(v.x) - pose.heading).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub class_name: String,
    pub measured_position: Point,
    pub timestamp: f64,
}

/// One detection per visible object, in object order. Noise is drawn only
/// for visible objects, two normal deviates each.
pub fn sense<R: Rng>(
    ws: &Workspace,
    env: &EnvState,
    pose: Pose,
    cam: &CameraModel,
    rng: &mut R,
) -> Vec<Detection> {
    let noise = (cam.noise_sigma > 0.0).then(|| Normal::new(0.0, cam.noise_sigma).unwrap());
    env.objects
        .iter()
        .filter(|o| cam.sees(ws, pose, o.position))
        .map(|o| {
            let offset = match &noise {
                Some(n) => Point::new(n.sample(rng), n.sample(rng)),
                None => Point::default(),
            };
            Detection {
                class_name: o.class_name.clone(),
                measured_position: o.position + offset,
                timestamp: env.time,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointTag {
    Human,
    Other,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud3 {
    pub points: Vec<[f64; 3]>,
    /// Ground-truth tags; `None` means every point is human.
    pub labels: Option<Vec<PointTag>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct CloudParseError {
    pub line: usize,
    pub message: String,
}

impl PointCloud3 {
    pub fn unlabeled(points: Vec<[f64; 3]>) -> Self {
        Self {
            points,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_human(&self, i: usize) -> bool {
        match &self.labels {
            Some(l) => l[i] == PointTag::Human,
            None => true,
        }
    }

    /// Parses `x y z [label]` lines; `#` starts a comment. Labels are
    /// `human` or `other` and must be present on every line or none.
    pub fn parse(text: &str) -> Result<Self, CloudParseError> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut labeled: Option<bool> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| CloudParseError { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != 3 && toks.len() != 4 {
                return Err(err(format!("expected 3 or 4 fields, got {}", toks.len())));
            }
            let mut p = [0.0; 3];
            for (k, t) in toks[..3].iter().enumerate() {
                p[k] = t
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad coordinate `{t}`")))?;
            }
            let has_label = toks.len() == 4;
            if *labeled.get_or_insert(has_label) != has_label {
                return Err(err("labels must be given on every line or none".into()));
            }
            if has_label {
                labels.push(match toks[3] {
                    "human" => PointTag::Human,
                    "other" => PointTag::Other,
                    t => return Err(err(format!("unknown label `{t}`"))),
                });
            }
            points.push(p);
        }
        Ok(Self {
            points,
            labels: (labeled == Some(true)).then_some(labels),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: [f64; 3],
    pub extent: ([f64; 3], [f64; 3]),
    /// Sorted point indices.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub noise: Vec<usize>,
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn lex_cmp(a: &[f64; 3], b: &[f64; 3]) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Density clustering. A point's neighbourhood includes itself; a point is
/// core with at least `min_pts` neighbours. Clusters are the connected
/// components of core points; a border point joins the cluster of its
/// nearest core neighbour (ties: lexicographically smallest coordinates),
/// which keeps the result independent of input order.
pub fn dbscan(cloud: &PointCloud3, eps: f64, min_pts: usize, exec: Exec) -> Clustering {
    assert!(eps > 0.0 && min_pts >= 1, "dbscan needs eps > 0 and min_pts >= 1");
    let pts = &cloud.points;
    let n = pts.len();
    let neighbours: Vec<Vec<usize>> = par::map_range(exec, n, |i| {
        (0..n).filter(|&j| dist3(&pts[i], &pts[j]) <= eps).collect()
    });
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut count = 0;
    for start in 0..n {
        if !core[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(count);
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &j in &neighbours[i] {
                if core[j] && label[j].is_none() {
                    label[j] = Some(count);
                    stack.push(j);
                }
            }
        }
        count += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let best = neighbours[i]
            .iter()
            .filter(|&&j| core[j])
            .min_by(|&&a, &&b| {
                dist3(&pts[i], &pts[a])
                    .total_cmp(&dist3(&pts[i], &pts[b]))
                    .then(lex_cmp(&pts[a], &pts[b]))
            });
        label[i] = best.and_then(|&j| label[j]);
    }

    let mut groups = vec![Vec::new(); count];
    let mut noise = Vec::new();
    for (i, l) in label.iter().enumerate() {
        match l {
            Some(c) => groups[*c].push(i),
            None => noise.push(i),
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            let mut sum = [0.0; 3];
            for &i in &members {
                for k in 0..3 {
                    lo[k] = lo[k].min(pts[i][k]);
                    hi[k] = hi[k].max(pts[i][k]);
                    sum[k] += pts[i][k];
                }
            }
            let m = members.len() as f64;
            Cluster {
                centroid: [sum[0] / m, sum[1] / m, sum[2] / m],
                extent: (lo, hi),
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| lex_cmp(&a.centroid, &b.centroid).then(a.members.cmp(&b.members)));
    Clustering { clusters, noise }
}

fn in_cylinder(p: &[f64; 3], axis: Point) -> bool {
    let (dx, dy) = (p[0] - axis.x, p[1] - axis.y);
    dx * dx + dy * dy <= CYLINDER_RADIUS * CYLINDER_RADIUS && (0.0..=CYLINDER_HEIGHT).contains(&p[2])
}

/// (human points inside the cylinder at `candidate`, total human points).
fn occupancy_counts(cloud: &PointCloud3, candidate: Point) -> (usize, usize) {
    let mut inside = 0;
    let mut total = 0;
    for (i, p) in cloud.points.iter().enumerate() {
        if cloud.is_human(i) {
            total += 1;
            if in_cylinder(p, candidate) {
                inside += 1;
            }
        }
    }
    (inside, total)
}

/// Fraction of human points inside the vertical cylinder standing at `candidate`.
pub fn cylinder_occupancy(cloud: &PointCloud3, candidate: Point) -> Result<f64, PerceptionError> {
    match occupancy_counts(cloud, candidate) {
        (_, 0) => Err(PerceptionError::NoHumanPoints),
        (n, total) => Ok(n as f64 / total as f64),
    }
}

/// Candidate with the highest occupancy; the first index wins ties.
pub fn best_human_position(cloud: &PointCloud3, candidates: &[Point]) -> Result<Point, PerceptionError> {
    if candidates.is_empty() {
        return Err(PerceptionError::NoCandidates);
    }
    let mut best: Option<(usize, Point)> = None;
    for &c in candidates {
        let (n, total) = occupancy_counts(cloud, c);
        if total == 0 {
            return Err(PerceptionError::NoHumanPoints);
        }
        if best.is_none_or(|(bn, _)| n > bn) {
            best = Some((n, c));
        }
    }
    Ok(best.unwrap().1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Drift {
    Dynamic,
    Jitter,
}

/// Dynamic iff the apparent speed strictly exceeds `speed_threshold`.
pub fn classify_drift(
    prev: &Detection,
    curr: &Detection,
    speed_threshold: f64,
) -> Result<Drift, PerceptionError> {
    let dt = curr.timestamp - prev.timestamp;
    if !(dt > 0.0) {
        return Err(PerceptionError::NonMonotoneTimestamps {
            prev: prev.timestamp,
            curr: curr.timestamp,
        });
    }
    let speed = dist(prev.measured_position, curr.measured_position) / dt;
    Ok(if speed > speed_threshold {
        Drift::Dynamic
    } else {
        Drift::Jitter
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Belief {
    pub class_name: String,
    pub position: Point,
    pub last_seen: f64,
    pub dynamic: bool,
    /// Position and time the next drift verdict is measured against.
    anchor: (Point, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbParams {
    pub speed_threshold: f64,
    pub gate: f64,
    pub alpha: f64,
    /// Minimum age of the drift anchor before a verdict is taken. Zero
    /// classifies every consecutive pair of sightings.
    pub drift_window: f64,
}

impl Default for KbParams {
    fn default() -> Self {
        Self {
            speed_threshold: 0.3,
            gate: 1.0,
            alpha: 0.5,
            drift_window: 1.0,
        }
    }
}

/// The robot's beliefs about object positions, keyed by belief id.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    beliefs: BTreeMap<u32, Belief>,
    next_id: u32,
    pub params: KbParams,
}

impl KnowledgeBase {
    pub fn new(params: KbParams) -> Self {
        Self {
            beliefs: BTreeMap::new(),
            next_id: 0,
            params,
        }
    }

    /// Seeds the base with prior-map entries, seen at time 0.
    pub fn with_prior<'a>(params: KbParams, prior: impl IntoIterator<Item = (&'a str, Point)>) -> Self {
        let mut kb = Self::new(params);
        for (class, p) in prior {
            kb.insert(class, p, 0.0);
        }
        kb
    }

    fn insert(&mut self, class: &str, p: Point, t: f64) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.beliefs.insert(
            id,
            Belief {
                class_name: class.to_string(),
                position: p,
                last_seen: t,
                dynamic: false,
                anchor: (p, t),
            },
        );
        id
    }

    pub fn beliefs(&self) -> impl Iterator<Item = (u32, &Belief)> {
        self.beliefs.iter().map(|(&id, b)| (id, b))
    }

    pub fn get(&self, id: u32) -> Option<&Belief> {
        self.beliefs.get(&id)
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = (u32, &'a Belief)> + 'a {
        self.beliefs().filter(move |(_, b)| b.class_name == class)
    }

    /// Folds detections taken at time `t` into the base. Each detection is
    /// matched to the nearest unmatched belief of its class within the gate
    /// (lower id on ties) or starts a new belief.
    pub fn update(&mut self, detections: &[Detection], t: f64) {
        let p = self.params;
        let mut matched: Vec<u32> = Vec::new();
        for d in detections {
            let hit = self
                .of_class(&d.class_name)
                .filter(|(id, b)| !matched.contains(id) && dist(b.position, d.measured_position) <= p.gate)
                .min_by(|(ia, a), (ib, b)| {
                    dist(a.position, d.measured_position)
                        .total_cmp(&dist(b.position, d.measured_position))
                        .then(ia.cmp(ib))
                })
                .map(|(id, _)| id);
            let Some(id) = hit else {
                let id = self.insert(&d.class_name, d.measured_position, t);
                matched.push(id);
                continue;
            };
            matched.push(id);
            let b = self.beliefs.get_mut(&id).unwrap();
            b.last_seen = b.last_seen.max(t);
            let (anchor_pos, anchor_t) = b.anchor;
            let verdict = if t - anchor_t >= p.drift_window && t > anchor_t {
                let prev = Detection {
                    class_name: d.class_name.clone(),
                    measured_position: anchor_pos,
                    timestamp: anchor_t,
                };
                let v = classify_drift(&prev, d, p.speed_threshold).unwrap_or(Drift::Jitter);
                b.anchor = (d.measured_position, t);
                v
            } else {
                Drift::Jitter
            };
            match verdict {
                Drift::Dynamic => {
                    b.dynamic = true;
                    b.position = d.measured_position;
                }
                Drift::Jitter => {
                    b.position = b.position * (1.0 - p.alpha) + d.measured_position * p.alpha;
                }
            }
        }
    }

    /// Forgets beliefs of `class` within `radius` of `at`.
    pub fn forget_near(&mut self, class: &str, at: Point, radius: f64) {
        self.beliefs
            .retain(|_, b| b.class_name != class || dist(b.position, at) > radius);
    }

    /// Drops beliefs that should be visible but were not detected: inside
    /// a shrunken view cone (range minus 0.5 m, half-angle minus 0.1 rad)
    /// with clear line of sight, farther from the robot than the association
    /// gate, and no detection of the same class within the gate. Returns the
    /// removed ids.
    pub fn retract_unseen(
        &mut self,
        ws: &Workspace,
        pose: Pose,
        cam: &CameraModel,
        detections: &[Detection],
    ) -> Vec<u32> {
        let inner = CameraModel {
            fov_half_angle: (cam.fov_half_angle - 0.1).max(0.0),
            range: cam.range - 0.5,
            noise_sigma: 0.0,
        };
        if inner.range <= 0.0 || inner.fov_half_angle <= 0.0 {
            return Vec::new();
        }
        let gate = self.params.gate;
        let gone: Vec<u32> = self
            .beliefs()
            .filter(|(_, b)| {
                dist(b.position, pose.position) > gate
                    && inner.sees(ws, pose, b.position)
                    && !detections
                        .iter()
                        .any(|d| d.class_name == b.class_name && dist(d.measured_position, b.position) <= gate)
            })
            .map(|(id, _)| id)
            .collect();
        for id in &gone {
            self.beliefs.remove(id);
        }
        gone
    }
}

/// Functional form of [`KnowledgeBase::update`].
pub fn update_knowledge(kb: &KnowledgeBase, detections: &[Detection], t: f64) -> KnowledgeBase {
    let mut next = kb.clone();
    next.update(detections, t);
    next
}
