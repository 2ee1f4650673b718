//! Gait parameterization, contact schedules, scene-driven gait selection,
//! static stability and a kinematic tracking step.
//!
//! Legs are always ordered `[LF, LH, RH, RF]`. A leg is in stance while its
//! phase-shifted cycle position lies in the first `rho` of the cycle.

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::perception::{wrap_angle, KnowledgeBase, Pose};
use crate::workspace::{dist, point_segment_distance, Point, Workspace};

pub const LEG_NAMES: [&str; 4] = ["LF", "LH", "RH", "RF"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum GaitName {
    Trot,
    Walk,
}

impl fmt::Display for GaitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaitName::Trot => "trot",
            GaitName::Walk => "walk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaitSpec {
    pub name: GaitName,
    pub rho: f64,
    pub t_gait: f64,
    pub phases: [f64; 4],
    pub max_speed: f64,
}

impl GaitSpec {
    pub const fn trot() -> Self {
        Self {
            name: GaitName::Trot,
            rho: 0.5,
            t_gait: 0.6,
            phases: [0.0, 0.5, 0.0, 0.5],
            max_speed: 0.8,
        }
    }

    pub const fn walk() -> Self {
        Self {
            name: GaitName::Walk,
            rho: 0.75,
            t_gait: 1.2,
            phases: [0.0, 0.75, 0.25, 0.5],
            max_speed: 0.3,
        }
    }

    pub fn with_speed(mut self, max_speed: f64) -> Self {
        self.max_speed = max_speed;
        self
    }

    pub fn stance_duration(&self) -> f64 {
        self.rho * self.t_gait
    }
}

/// Stance flags at time `t`.
pub fn contact_state(g: &GaitSpec, t: f64) -> [bool; 4] {
    let x = t / g.t_gait;
    g.phases.map(|phi| (x - phi).rem_euclid(1.0) < g.rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Terrain {
    Flat,
    Stairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum People {
    NoPeople,
    StaticPerson,
    MovingPeople,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SceneContext {
    pub terrain: Terrain,
    pub people: People,
}

impl SceneContext {
    pub const ALL: [SceneContext; 6] = {
        use People::*;
        use Terrain::*;
        [
            SceneContext { terrain: Flat, people: NoPeople },
            SceneContext { terrain: Flat, people: StaticPerson },
            SceneContext { terrain: Flat, people: MovingPeople },
            SceneContext { terrain: Stairs, people: NoPeople },
            SceneContext { terrain: Stairs, people: StaticPerson },
            SceneContext { terrain: Stairs, people: MovingPeople },
        ]
    };
}

/// Stairs force the walk; otherwise a static person calls for walking and
/// moving people (or nobody) for trotting.
pub fn select_gait(ctx: SceneContext) -> GaitSpec {
    match (ctx.terrain, ctx.people) {
        (Terrain::Stairs, _) => GaitSpec::walk(),
        (Terrain::Flat, People::StaticPerson) => GaitSpec::walk(),
        (Terrain::Flat, People::MovingPeople | People::NoPeople) => GaitSpec::trot(),
    }
}

/// People context near the robot: human-class beliefs whose region matches
/// the robot's region. Any dynamic one means moving people.
pub fn people_context(
    ws: &Workspace,
    kb: &KnowledgeBase,
    robot: Point,
    human_classes: &[String],
) -> People {
    let here = ws.region_of(robot);
    let mut people = People::NoPeople;
    for (_, b) in kb.beliefs() {
        if !human_classes.contains(&b.class_name) || ws.region_of(b.position) != here {
            continue;
        }
        if b.dynamic {
            return People::MovingPeople;
        }
        people = People::StaticPerson;
    }
    people
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub on: f64,
    pub off: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.on && t < self.off
    }

    pub fn len(&self) -> f64 {
        self.off - self.on
    }
}

/// Per-leg stance intervals whose onset lies in `[t0, t0 + horizon)`, kept
/// at full length, plus the stance already in progress at `t0` if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactSchedule {
    pub gait: GaitSpec,
    pub t0: f64,
    pub horizon: f64,
    pub legs: [Vec<Interval>; 4],
    pub carry_in: [Option<Interval>; 4],
}

impl ContactSchedule {
    pub fn in_stance(&self, leg: usize, t: f64) -> bool {
        self.carry_in[leg].is_some_and(|i| i.contains(t)) || self.legs[leg].iter().any(|i| i.contains(t))
    }

    /// One line per interval: `LEG on off`, carry-in intervals first.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "gait {} t0 {:.4} horizon {:.4}\n",
            self.gait.name, self.t0, self.horizon
        );
        for leg in 0..4 {
            for i in self.carry_in[leg].iter().chain(&self.legs[leg]) {
                let _ = writeln!(out, "{} {:.4} {:.4}", LEG_NAMES[leg], i.on, i.off);
            }
        }
        out
    }
}

pub fn build_schedule(g: &GaitSpec, t0: f64, horizon: f64) -> ContactSchedule {
    assert!(horizon > 0.0, "schedule horizon must be positive");
    let end = t0 + horizon;
    let stance = g.stance_duration();
    let mut legs: [Vec<Interval>; 4] = Default::default();
    let mut carry_in = [None; 4];
    for (leg, &phi) in g.phases.iter().enumerate() {
        let first = (t0 / g.t_gait - phi).ceil() as i64;
        let onset = |k: i64| (k as f64 + phi) * g.t_gait;
        let prev = onset(first - 1);
        if prev + stance > t0 {
            carry_in[leg] = Some(Interval { on: prev, off: prev + stance });
        }
        let mut k = first;
        while onset(k) < end {
            legs[leg].push(Interval { on: onset(k), off: onset(k) + stance });
            k += 1;
        }
    }
    ContactSchedule { gait: *g, t0, horizon, legs, carry_in }
}

/// Holds the active gait and defers requested switches to the next cycle
/// boundary. Contact phase restarts at each switch.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitScheduler {
    current: GaitSpec,
    cycle_start: f64,
    /// Requested gait and the cycle boundary at which it takes over.
    pending: Option<(GaitSpec, f64)>,
}

impl GaitScheduler {
    pub fn new(initial: GaitSpec, t: f64) -> Self {
        Self { current: initial, cycle_start: t, pending: None }
    }

    pub fn current(&self) -> &GaitSpec {
        &self.current
    }

    /// Requests `g`; returns the active gait at `t` after applying any
    /// switch whose boundary has been reached.
    pub fn request(&mut self, g: GaitSpec, t: f64) -> &GaitSpec {
        if g.name == self.current.name {
            self.pending = None;
        } else if self.pending.is_none_or(|(p, _)| p.name != g.name) {
            let cycles = ((t - self.cycle_start) / self.current.t_gait - 1e-9).ceil().max(0.0);
            self.pending = Some((g, self.cycle_start + cycles * self.current.t_gait));
        }
        self.advance(t)
    }

    pub fn advance(&mut self, t: f64) -> &GaitSpec {
        if let Some((next, at)) = self.pending {
            if t >= at - 1e-9 {
                self.cycle_start = at;
                self.current = next;
                self.pending = None;
            }
        } else {
            // keep cycle_start near t so boundaries stay exact-ish
            let cycles = ((t - self.cycle_start) / self.current.t_gait + 1e-9).floor();
            if cycles >= 1.0 {
                self.cycle_start += cycles * self.current.t_gait;
            }
        }
        &self.current
    }

    pub fn contacts(&self, t: f64) -> [bool; 4] {
        contact_state(&self.current, (t - self.cycle_start).max(0.0))
    }
}

/// Nominal foot positions: a 0.36 m by 0.30 m rectangle around the body.
pub fn nominal_feet(pose: Pose) -> [Point; 4] {
    let (s, c) = pose.heading.sin_cos();
    [(0.18, 0.15), (-0.18, 0.15), (-0.18, -0.15), (0.18, -0.15)].map(|(fx, fy)| {
        pose.position + Point::new(c * fx - s * fy, s * fx + c * fy)
    })
}

fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b - a).cross(p - b) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// CoM projection inside the closed support polygon of the stance feet.
pub fn static_stability(contact: [bool; 4], feet: [Point; 4], com: Point) -> bool {
    const TOL: f64 = 1e-6;
    let stance: Vec<Point> = (0..4).filter(|&i| contact[i]).map(|i| feet[i]).collect();
    assert!(!stance.is_empty(), "static stability needs at least one stance leg");
    let hull = convex_hull(stance);
    match hull.len() {
        1 => dist(hull[0], com) <= TOL,
        2 => point_segment_distance(com, hull[0], hull[1]) <= TOL,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            (b - a).cross(com - a) / (b - a).norm() >= -TOL
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackParams {
    pub omega_max: f64,
    /// Heading error above which the robot turns without translating.
    pub turn_in_place: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self { omega_max: 2.0, turn_in_place: 0.5 }
    }
}

/// One unicycle tick toward `goal`. Translation follows the goal direction
/// and is clamped so the robot never overshoots; a step that would leave
/// the bounds or cut an obstacle is rejected (heading still updates).
pub fn track(
    goal: Point,
    pose: Pose,
    g: &GaitSpec,
    dt: f64,
    ws: &Workspace,
    params: &TrackParams,
) -> Pose {
    assert!(dt > 0.0);
    let to_goal = goal - pose.position;
    let d = to_goal.norm();
    if d == 0.0 {
        return pose;
    }
    let err = wrap_angle(to_goal.y.atan2(to_goal.x) - pose.heading);
    let max_turn = params.omega_max * dt;
    let heading = wrap_angle(pose.heading + err.clamp(-max_turn, max_turn));
    if err.abs() > params.turn_in_place {
        return Pose::new(pose.position, heading);
    }
    let step = (g.max_speed * dt).min(d);
    let next = if step >= d { goal } else { pose.position + to_goal * (step / d) };
    if ws.in_bounds(next) && ws.segment_free(pose.position, next) {
        Pose::new(next, heading)
    } else {
        Pose::new(pose.position, heading)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::KbParams;
    use crate::workspace::{ConvexPolygon, Obstacle, Region};

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn contact_examples() {
        assert_eq!(contact_state(&GaitSpec::trot(), 0.0), [true, false, true, false]);
        assert_eq!(contact_state(&GaitSpec::walk(), 0.0), [true, true, false, true]);
        for g in [GaitSpec::trot(), GaitSpec::walk()] {
            for k in 0..50 {
                let t = k as f64 * 0.037;
                assert_eq!(contact_state(&g, t), contact_state(&g, t + g.t_gait));
            }
        }
    }

    #[test]
    fn selection_table() {
        let got: Vec<GaitName> = SceneContext::ALL.iter().map(|&c| select_gait(c).name).collect();
        assert_eq!(
            got,
            vec![GaitName::Trot, GaitName::Walk, GaitName::Trot, GaitName::Walk, GaitName::Walk, GaitName::Walk]
        );
    }

    #[test]
    fn one_cycle_schedules() {
        let s = build_schedule(&GaitSpec::trot(), 0.0, 0.6);
        for leg in 0..4 {
            assert_eq!(s.legs[leg].len(), 1);
            assert!((s.legs[leg][0].len() - 0.3).abs() < 1e-12);
        }
        let s = build_schedule(&GaitSpec::walk(), 0.0, 1.2);
        for leg in 0..4 {
            assert_eq!(s.legs[leg].len(), 1);
            assert!((s.legs[leg][0].len() - 0.9).abs() < 1e-12);
        }
        // LH (phase 0.75) is mid-stance at t0
        assert_eq!(s.carry_in[1].map(|i| (i.on * 1e9).round() / 1e9), Some(-0.3));
    }

    #[test]
    fn schedule_repeats_and_agrees_with_contact_state() {
        for g in [GaitSpec::trot(), GaitSpec::walk()] {
            let s = build_schedule(&g, 0.25, 2.0 * g.t_gait);
            for leg in 0..4 {
                let ivs = &s.legs[leg];
                assert_eq!(ivs.len(), 2);
                assert!((ivs[1].on - ivs[0].on - g.t_gait).abs() < 1e-9);
            }
            for k in 0..1000 {
                let t = 0.25 + k as f64 * 2.0 * g.t_gait / 1000.0;
                let c = contact_state(&g, t);
                for leg in 0..4 {
                    assert_eq!(s.in_stance(leg, t), c[leg], "{:?} leg {leg} t {t}", g.name);
                }
            }
        }
    }

    #[test]
    fn switches_wait_for_cycle_boundary() {
        let mut s = GaitScheduler::new(GaitSpec::trot(), 0.0);
        assert_eq!(s.request(GaitSpec::walk(), 0.1).name, GaitName::Trot);
        assert_eq!(s.advance(0.55).name, GaitName::Trot);
        assert_eq!(s.advance(0.6).name, GaitName::Walk);
        assert_eq!(s.contacts(0.6), contact_state(&GaitSpec::walk(), 0.0));
        // late requests still wait for the following boundary
        let mut s2 = GaitScheduler::new(GaitSpec::trot(), 0.0);
        s2.advance(5.0);
        assert_eq!(s2.request(GaitSpec::walk(), 5.1).name, GaitName::Trot);
        assert_eq!(s2.advance(5.39).name, GaitName::Trot);
        assert_eq!(s2.advance(5.4).name, GaitName::Walk);
        // a request that is withdrawn before the boundary never applies
        s.request(GaitSpec::trot(), 0.7);
        s.request(GaitSpec::walk(), 0.8);
        assert_eq!(s.advance(2.0).name, GaitName::Walk);
    }

    #[test]
    fn stability_examples() {
        let feet = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), p(5.0, 5.0)];
        assert!(static_stability([true, true, true, false], feet, p(0.2, 0.2)));
        assert!(!static_stability([true, true, true, false], feet, p(0.8, 0.8)));
        assert!(static_stability([true, true, true, false], feet, p(0.5, 0.0)));
        assert!(!static_stability([true, false, false, true], feet, p(2.0, 2.5)));
        assert!(static_stability([true, false, false, true], feet, p(2.5, 2.5)));
        assert!(static_stability([true, false, false, false], feet, p(0.0, 0.0)));
    }

    #[test]
    fn walk_is_statically_stable_at_nominal_stance() {
        let feet = nominal_feet(Pose::new(p(0.0, 0.0), 0.3));
        for k in 0..1200 {
            let c = contact_state(&GaitSpec::walk(), k as f64 * 0.001);
            let stance = c.iter().filter(|&&s| s).count();
            if stance == 4 {
                assert!(static_stability(c, feet, p(0.0, 0.0)));
            }
        }
    }

    fn open_ws() -> Workspace {
        Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![], 1.0, 0.5).unwrap()
    }

    #[test]
    fn tracking_examples() {
        let ws = open_ws();
        let tp = TrackParams::default();
        let pose = Pose::new(p(1.0, 1.0), 0.0);
        let next = track(p(2.0, 1.0), pose, &GaitSpec::trot(), 0.1, &ws, &tp);
        assert!((next.position.x - 1.08).abs() < 1e-12);
        let next = track(p(0.0, 1.0), pose, &GaitSpec::trot(), 0.1, &ws, &tp);
        assert_eq!(next.position, pose.position);
        assert!((next.heading - 0.2).abs() < 1e-12);
        let next = track(p(1.05, 1.0), pose, &GaitSpec::trot(), 0.1, &ws, &tp);
        assert_eq!(next.position, p(1.05, 1.0));
    }

    #[test]
    fn tracking_rejects_colliding_steps() {
        let wall = Obstacle::Polygon(ConvexPolygon::rect(1.02, 0.0, 1.5, 3.0).unwrap());
        let ws = Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![wall], vec![], 1.0, 0.5).unwrap();
        let pose = Pose::new(p(1.0, 1.0), 0.0);
        let next = track(p(3.0, 1.0), pose, &GaitSpec::trot(), 0.1, &ws, &TrackParams::default());
        assert_eq!(next.position, pose.position);
    }

    #[test]
    fn people_context_by_region() {
        let ward = Region { name: "Ward".into(), polygon: ConvexPolygon::rect(0.0, 0.0, 5.0, 10.0).unwrap() };
        let ws = Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![ward], 1.0, 0.5).unwrap();
        let humans = vec!["patient".to_string()];
        let kb = KnowledgeBase::with_prior(KbParams::default(), [("patient", p(2.0, 2.0))]);
        assert_eq!(people_context(&ws, &kb, p(1.0, 1.0), &humans), People::StaticPerson);
        assert_eq!(people_context(&ws, &kb, p(8.0, 1.0), &humans), People::NoPeople);
    }
}
