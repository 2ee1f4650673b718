//! Planar environment model: bounds, obstacles, named regions, labeled
//! objects with scripted motion, and the bounded-step transition relation.
//!
//! Conventions: the robot is a point; touching an obstacle boundary counts
//! as free; regions are closed sets.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when deciding strict interior membership, in meters.
const INTERIOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Euclidean distance.
pub fn dist(a: Point, b: Point) -> f64 {
    (a - b).norm()
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    dist(p, a + ab * t)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertices must be counter-clockwise and convex")]
    NotConvexCcw,
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = vertices.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if (b - a).cross(c - b) < -1e-12 {
                return Err(GeometryError::NotConvexCcw);
            }
            area2 += a.cross(b);
        }
        if area2 <= 0.0 {
            return Err(GeometryError::NotConvexCcw);
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle.
    pub fn rect(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point::new(xmin, ymin),
            Point::new(xmax, ymin),
            Point::new(xmax, ymax),
            Point::new(xmin, ymax),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed distance of `p` to each edge line, positive inside; returns the minimum.
    fn inner_clearance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.cross(p - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        self.inner_clearance(p) >= -INTERIOR_TOL
    }

    pub fn strictly_contains(&self, p: Point) -> bool {
        self.inner_clearance(p) > INTERIOR_TOL
    }

    /// True iff the segment passes through the open interior.
    pub fn segment_hits_interior(&self, a: Point, b: Point) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (v, w) in self.edges() {
            let e = w - v;
            let c0 = e.cross(a - v);
            let c1 = e.cross(d);
            if c1.abs() < 1e-15 {
                if c0 < 0.0 {
                    return false;
                }
                continue;
            }
            let t = -c0 / c1;
            if c1 > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
        // For a convex set the clipped chord crosses the interior iff its midpoint does.
        self.strictly_contains(a + d * (0.5 * (t0 + t1)))
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    Circle { center: Point, radius: f64 },
    Polygon(ConvexPolygon),
}

impl Obstacle {
    pub fn blocks_segment(&self, a: Point, b: Point) -> bool {
        match self {
            Obstacle::Circle { center, radius } => {
                point_segment_distance(*center, a, b) < radius - INTERIOR_TOL
            }
            Obstacle::Polygon(poly) => poly.segment_hits_interior(a, b),
        }
    }

    pub fn blocks_point(&self, p: Point) -> bool {
        self.blocks_segment(p, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub polygon: ConvexPolygon,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkspaceError {
    #[error("eta must be positive, got {0}")]
    BadEta(f64),
    #[error("epsilon_sat must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("workspace bounds are empty")]
    EmptyBounds,
    #[error("region `{0}` extends outside the workspace bounds")]
    RegionOutOfBounds(String),
    #[error("duplicate region `{0}`")]
    DuplicateRegion(String),
    #[error("circle obstacle radius must be positive")]
    BadRadius,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("no collision-free sample after {attempts} attempts")]
pub struct SamplingExhausted {
    pub attempts: usize,
}

/// Static geometry of the environment plus the transition parameters.
#[derive(Debug, Clone)]
pub struct Workspace {
    lo: Point,
    hi: Point,
    obstacles: Vec<Obstacle>,
    regions: Vec<Region>,
    eta: f64,
    epsilon_sat: f64,
    pub sample_attempts: usize,
}

impl Workspace {
    pub fn new(
        lo: Point,
        hi: Point,
        obstacles: Vec<Obstacle>,
        regions: Vec<Region>,
        eta: f64,
        epsilon_sat: f64,
    ) -> Result<Self, WorkspaceError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(WorkspaceError::BadEta(eta));
        }
        if !(epsilon_sat > 0.0 && epsilon_sat.is_finite()) {
            return Err(WorkspaceError::BadEpsilon(epsilon_sat));
        }
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(WorkspaceError::EmptyBounds);
        }
        for o in &obstacles {
            if let Obstacle::Circle { radius, .. } = o {
                if !(*radius > 0.0) {
                    return Err(WorkspaceError::BadRadius);
                }
            }
        }
        let mut names = BTreeSet::new();
        for r in &regions {
            if !names.insert(r.name.clone()) {
                return Err(WorkspaceError::DuplicateRegion(r.name.clone()));
            }
            let (rlo, rhi) = r.polygon.bounding_box();
            let tol = 1e-9;
            if rlo.x < lo.x - tol || rlo.y < lo.y - tol || rhi.x > hi.x + tol || rhi.y > hi.y + tol {
                return Err(WorkspaceError::RegionOutOfBounds(r.name.clone()));
            }
        }
        Ok(Self {
            lo,
            hi,
            obstacles,
            regions,
            eta,
            epsilon_sat,
            sample_attempts: 10_000,
        })
    }

    pub fn bounds(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon_sat(&self) -> f64 {
        self.epsilon_sat
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    /// True iff the segment crosses no obstacle interior.
    pub fn segment_free(&self, a: Point, b: Point) -> bool {
        self.obstacles.iter().all(|o| !o.blocks_segment(a, b))
    }

    pub fn point_free(&self, p: Point) -> bool {
        self.in_bounds(p) && self.segment_free(p, p)
    }

    /// `dist(a, b) <= eta`, both endpoints in bounds, and the segment is free.
    pub fn can_transition(&self, a: Point, b: Point) -> bool {
        dist(a, b) <= self.eta && self.in_bounds(a) && self.in_bounds(b) && self.segment_free(a, b)
    }

    /// First region (in declaration order) containing `p`.
    pub fn region_of(&self, p: Point) -> Option<&str> {
        self.regions
            .iter()
            .find(|r| r.polygon.contains(p))
            .map(|r| r.name.as_str())
    }

    /// Uniform rejection sample over the bounds.
    pub fn sample_free<R: Rng>(&self, rng: &mut R) -> Result<Point, SamplingExhausted> {
        for _ in 0..self.sample_attempts {
            let p = Point::new(
                rng.random_range(self.lo.x..=self.hi.x),
                rng.random_range(self.lo.y..=self.hi.y),
            );
            if self.segment_free(p, p) {
                return Ok(p);
            }
        }
        Err(SamplingExhausted {
            attempts: self.sample_attempts,
        })
    }

    /// Labels satisfied at `x`: every object within `epsilon_sat`, paired with
    /// the region that contains the object.
    pub fn label_at(&self, env: &EnvState, x: Point) -> BTreeSet<Label> {
        env.objects
            .iter()
            .filter(|o| dist(x, o.position) <= self.epsilon_sat)
            .map(|o| Label {
                class_name: o.class_name.clone(),
                region: self.region_of(o.position).map(str::to_string),
            })
            .collect()
    }
}

/// A class proposition together with the region of the object that produced it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub class_name: String,
    pub region: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: f64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    Static(Point),
    /// Piecewise-linear motion; held at the first/last waypoint outside the time span.
    Scripted(Vec<Waypoint>),
}

impl Mobility {
    pub fn position_at(&self, t: f64) -> Point {
        match self {
            Mobility::Static(p) => *p,
            Mobility::Scripted(wps) => {
                let first = wps[0];
                if t <= first.time {
                    return first.position;
                }
                for w in wps.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if t <= b.time {
                        let s = (t - a.time) / (b.time - a.time);
                        return a.position.lerp(b.position, s);
                    }
                }
                wps[wps.len() - 1].position
            }
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            Mobility::Static(_) => true,
            Mobility::Scripted(w) => w.windows(2).all(|p| p[0].position == p[1].position),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectError {
    #[error("object `{0}` has no waypoints")]
    NoWaypoints(String),
    #[error("object `{0}`: waypoint times must be strictly increasing")]
    NonIncreasingTimes(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvObject {
    pub id: String,
    pub class_name: String,
    pub mobility: Mobility,
}

impl EnvObject {
    pub fn new(
        id: impl Into<String>,
        class_name: impl Into<String>,
        mobility: Mobility,
    ) -> Result<Self, ObjectError> {
        let id = id.into();
        if let Mobility::Scripted(w) = &mobility {
            if w.is_empty() {
                return Err(ObjectError::NoWaypoints(id));
            }
            if w.windows(2).any(|p| p[1].time <= p[0].time) {
                return Err(ObjectError::NonIncreasingTimes(id));
            }
        }
        Ok(Self {
            id,
            class_name: class_name.into(),
            mobility,
        })
    }

    pub fn fixed(id: impl Into<String>, class_name: impl Into<String>, at: Point) -> Self {
        Self {
            id: id.into(),
            class_name: class_name.into(),
            mobility: Mobility::Static(at),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSnapshot {
    pub id: String,
    pub class_name: String,
    pub position: Point,
}

/// Object positions at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub time: f64,
    pub objects: Vec<ObjectSnapshot>,
}

impl EnvState {
    pub fn at(objects: &[EnvObject], time: f64) -> Self {
        Self {
            time,
            objects: objects
                .iter()
                .map(|o| ObjectSnapshot {
                    id: o.id.clone(),
                    class_name: o.class_name.clone(),
                    position: o.mobility.position_at(time),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn ws(obstacles: Vec<Obstacle>, eta: f64) -> Workspace {
        Workspace::new(p(0.0, 0.0), p(10.0, 10.0), obstacles, vec![], eta, 0.5).unwrap()
    }

    fn circle(x: f64, y: f64, r: f64) -> Obstacle {
        Obstacle::Circle {
            center: p(x, y),
            radius: r,
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist(p(0.0, 0.0), p(3.0, 4.0)), 5.0);
        assert_eq!(dist(p(2.5, -1.0), p(2.5, -1.0)), 0.0);
        assert_eq!(dist(p(0.0, 0.0), p(1.0, 0.0)), 1.0);
    }

    #[test]
    fn segment_free_examples() {
        let empty = ws(vec![], 1.0);
        assert!(empty.segment_free(p(0.0, 0.0), p(10.0, 10.0)));
        let w = ws(vec![circle(5.0, 5.0, 1.0)], 1.0);
        assert!(!w.segment_free(p(3.0, 5.0), p(7.0, 5.0)));
        // tangent at exactly radius distance
        assert!(w.segment_free(p(3.0, 6.0), p(7.0, 6.0)));
    }

    #[test]
    fn polygon_boundary_contact_is_free() {
        let sq = Obstacle::Polygon(ConvexPolygon::rect(4.0, 4.0, 6.0, 6.0).unwrap());
        let w = ws(vec![sq], 5.0);
        assert!(!w.segment_free(p(3.0, 5.0), p(7.0, 5.0)));
        // along an edge
        assert!(w.segment_free(p(3.0, 4.0), p(7.0, 4.0)));
        // grazing a vertex
        assert!(w.segment_free(p(3.0, 3.0), p(5.0, 5.0 - 2.0 + 1.0 - 1.0)));
        assert!(w.segment_free(p(2.0, 6.0), p(6.0, 2.0 + 4.0 + 2.0)));
        // diagonal through the corner region
        assert!(!w.segment_free(p(3.9, 3.9), p(4.1, 4.1)));
        // endpoint inside
        assert!(!w.segment_free(p(5.0, 5.0), p(8.0, 8.0)));
        assert!(!w.point_free(p(5.0, 5.0)));
        assert!(w.point_free(p(4.0, 5.0)));
    }

    #[test]
    fn can_transition_examples() {
        let w = ws(vec![circle(5.0, 5.0, 0.1)], 1.0);
        assert!(w.can_transition(p(1.0, 1.0), p(1.5, 1.0)));
        assert!(!w.can_transition(p(1.0, 1.0), p(2.5, 1.0)));
        assert!(!w.can_transition(p(4.75, 5.0), p(5.25, 5.0)));
    }

    #[test]
    fn polygon_validation() {
        assert!(ConvexPolygon::new(vec![p(0.0, 0.0), p(1.0, 0.0)]).is_err());
        // clockwise
        assert!(ConvexPolygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)]).is_err());
        // non-convex
        assert!(ConvexPolygon::new(vec![
            p(0.0, 0.0),
            p(2.0, 0.0),
            p(1.0, 0.5),
            p(2.0, 2.0),
            p(0.0, 2.0)
        ])
        .is_err());
    }

    #[test]
    fn workspace_validation() {
        let bad_region = Region {
            name: "R".into(),
            polygon: ConvexPolygon::rect(8.0, 8.0, 12.0, 9.0).unwrap(),
        };
        assert_eq!(
            Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![bad_region], 1.0, 0.5).unwrap_err(),
            WorkspaceError::RegionOutOfBounds("R".into())
        );
        assert!(Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![], 0.0, 0.5).is_err());
        assert!(Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![], 1.0, -1.0).is_err());
    }

    #[test]
    fn labels() {
        let room = Region {
            name: "Room_A".into(),
            polygon: ConvexPolygon::rect(0.0, 0.0, 3.0, 3.0).unwrap(),
        };
        let w = Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![room], 1.0, 0.5).unwrap();
        let objs = vec![
            EnvObject::fixed("n1", "nurse", p(1.0, 1.0)),
            EnvObject::fixed("c1", "can", p(6.0, 6.0)),
            EnvObject::fixed("c2", "can", p(6.2, 6.0)),
        ];
        let env = EnvState::at(&objs, 0.0);
        assert!(w.label_at(&env, p(9.0, 1.0)).is_empty());
        let l = w.label_at(&env, p(1.2, 1.0));
        assert_eq!(
            l.into_iter().collect::<Vec<_>>(),
            vec![Label {
                class_name: "nurse".into(),
                region: Some("Room_A".into())
            }]
        );
        // two cans, same class and region, collapse into one pair
        let l = w.label_at(&env, p(6.1, 6.0));
        assert_eq!(l.len(), 1);
        assert_eq!(l.iter().next().unwrap().region, None);
    }

    #[test]
    fn scripted_positions() {
        let o = EnvObject::new(
            "d",
            "doctor",
            Mobility::Scripted(vec![
                Waypoint { time: 1.0, position: p(0.0, 0.0) },
                Waypoint { time: 3.0, position: p(2.0, 0.0) },
            ]),
        )
        .unwrap();
        assert_eq!(o.mobility.position_at(0.0), p(0.0, 0.0));
        assert_eq!(o.mobility.position_at(1.0), p(0.0, 0.0));
        assert_eq!(o.mobility.position_at(2.0), p(1.0, 0.0));
        assert_eq!(o.mobility.position_at(3.0), p(2.0, 0.0));
        assert_eq!(o.mobility.position_at(9.0), p(2.0, 0.0));
        let bad = EnvObject::new(
            "d",
            "doctor",
            Mobility::Scripted(vec![
                Waypoint { time: 1.0, position: p(0.0, 0.0) },
                Waypoint { time: 1.0, position: p(2.0, 0.0) },
            ]),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_exhausts() {
        let w = ws(vec![], 1.0);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| w.sample_free(&mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));

        let mut blocked = Workspace::new(
            p(0.0, 0.0),
            p(1.0, 1.0),
            vec![Obstacle::Polygon(ConvexPolygon::rect(-1.0, -1.0, 2.0, 2.0).unwrap())],
            vec![],
            1.0,
            0.5,
        )
        .unwrap();
        blocked.sample_attempts = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            blocked.sample_free(&mut rng),
            Err(SamplingExhausted { attempts: 100 })
        );
    }

    #[test]
    fn many_samples_are_free_and_in_bounds() {
        let w = ws(vec![circle(5.0, 5.0, 2.0), circle(1.0, 8.0, 0.5)], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let s = w.sample_free(&mut rng).unwrap();
            assert!(w.in_bounds(s));
            assert!(w.segment_free(s, s));
        }
    }
}
