//! Online plan repair.
//!
//! The executive walks the decomposed plan one subtask at a time. Each tick
//! it senses, updates its beliefs, lets the greedy mechanism retarget to a
//! strictly closer admissible object, and on arrival asks the gate whether
//! the subtask's proposition is really satisfied. Only a confirmation moves
//! the automaton; the automaton itself is never rebuilt.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ltl::{parse_constrained, Formula, Nba, ParseError, StateId};
use crate::navigation::Navigator;
use crate::perception::{sense, CameraModel, Detection, KnowledgeBase, Pose};
use crate::planner::{constraint_allows, ConstraintTable, Decomposition, Subtask};
use crate::workspace::{dist, EnvState, Point, Workspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("constraint on `{class}` names unknown region `{region}`")]
    UnknownRegion { class: String, region: String },
}

/// A task over plain class atoms plus the region constraints that were
/// attached to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedTask {
    pub formula_text: String,
    pub formula: Formula,
    pub constraint_table: ConstraintTable,
}

/// Drops `^{...}` superscripts, collecting them per class. Every class in
/// the formula gets an entry; an empty set means unconstrained.
pub fn strip_constraints(text: &str, ws: &Workspace) -> Result<ConstrainedTask, TaskError> {
    let (formula, occurrences) = parse_constrained(text)?;
    let mut table: ConstraintTable = formula.atoms().into_iter().map(|a| (a, BTreeSet::new())).collect();
    for occ in occurrences {
        for region in occ.regions {
            if ws.region(&region).is_none() {
                return Err(TaskError::UnknownRegion { class: occ.class_name, region });
            }
            table.entry(occ.class_name.clone()).or_default().insert(region);
        }
    }
    Ok(ConstrainedTask {
        formula_text: text.to_string(),
        formula,
        constraint_table: table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    GateConfirm {
        subtask: usize,
        class: String,
        label: Vec<String>,
        position: Point,
        region: Option<String>,
    },
    GateDecline {
        subtask: usize,
        class: String,
        robot: Point,
        region: Option<String>,
        alternative: Option<Point>,
    },
    GreedyRetarget {
        subtask: usize,
        class: String,
        robot: Point,
        from: Point,
        to: Point,
    },
    GreedySkip {
        subtask: usize,
        class: String,
        toward: Point,
    },
    NbaAdvance {
        subtask: usize,
        /// Finished suffix loops when a repeating subtask is discharged.
        #[serde(skip_serializing_if = "Option::is_none")]
        suffix_loop: Option<usize>,
        q_path: Vec<StateId>,
        at_goal_from: usize,
    },
    TaskComplete {
        suffix_loops: usize,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::GateConfirm { .. } => "GateConfirm",
            EventKind::GateDecline { .. } => "GateDecline",
            EventKind::GreedyRetarget { .. } => "GreedyRetarget",
            EventKind::GreedySkip { .. } => "GreedySkip",
            EventKind::NbaAdvance { .. } => "NbaAdvance",
            EventKind::TaskComplete { .. } => "TaskComplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl ExecEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Line-delimited JSON, one event per line.
pub fn events_to_jsonl(events: &[ExecEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Navigating,
    Exploring,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecParams {
    /// Radius within which a detection satisfies a proposition.
    pub epsilon_sat: f64,
    /// Distance to the goal at which the gate is consulted.
    pub arrival_radius: f64,
    /// Suffix loops required before the task counts as complete.
    pub loops_required: usize,
}

impl ExecParams {
    pub fn for_workspace(ws: &Workspace) -> Self {
        Self {
            epsilon_sat: ws.epsilon_sat(),
            arrival_radius: ws.epsilon_sat() / 2.0,
            loops_required: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Executive {
    nba: Arc<Nba>,
    dec: Decomposition,
    pub kb: KnowledgeBase,
    nav: Navigator,
    ws: Workspace,
    cam: CameraModel,
    params: ExecParams,
    index: usize,
    loops_done: usize,
    q: StateId,
    goal: Point,
    bound: Option<u32>,
    phase: Phase,
    explore: Vec<Point>,
    explore_at: usize,
    events: Vec<ExecEvent>,
}

/// What one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub motion_goal: Point,
    pub detections: Vec<Detection>,
}

impl Executive {
    pub fn new(
        nba: Arc<Nba>,
        dec: Decomposition,
        kb: KnowledgeBase,
        ws: &Workspace,
        cam: CameraModel,
        params: ExecParams,
        start: Point,
    ) -> Self {
        let q = dec
            .subtasks
            .first()
            .map(|s| s.nba_path[0])
            .or_else(|| dec.tail_states.first().copied())
            .unwrap_or(nba.initial()[0]);
        let mut ex = Self {
            nba,
            dec,
            kb,
            nav: Navigator::new(ws),
            ws: ws.clone(),
            cam,
            params,
            index: 0,
            loops_done: 0,
            q,
            goal: start,
            bound: None,
            phase: Phase::Navigating,
            explore: Vec::new(),
            explore_at: 0,
            events: Vec::new(),
        };
        if ex.dec.subtasks.is_empty() {
            ex.finish(0.0);
        } else {
            ex.enter_subtask(0);
        }
        ex
    }

    pub fn nba(&self) -> &Arc<Nba> {
        &self.nba
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    pub fn events(&self) -> &[ExecEvent] {
        &self.events
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn nba_state(&self) -> StateId {
        self.q
    }

    pub fn current_goal(&self) -> Point {
        self.goal
    }

    pub fn current_index(&self) -> usize {
        self.index
    }

    pub fn suffix_loops(&self) -> usize {
        self.loops_done
    }

    fn subtask(&self) -> &Subtask {
        &self.dec.subtasks[self.index]
    }

    /// Region check for the goal class; co-required classes are unconstrained.
    fn admissible(&self, class: &str, p: Point) -> bool {
        let s = self.subtask();
        if class != s.goal_class {
            return true;
        }
        let table: ConstraintTable = [(class.to_string(), s.goal_constraint.clone())].into();
        constraint_allows(&table, class, self.ws.region_of(p))
    }

    /// Beliefs of the current goal class inside `bind[i]`, nearest to `to`
    /// first (lower id on ties).
    fn candidates(&self, to: Point) -> Vec<(u32, Point)> {
        let class = self.subtask().goal_class.clone();
        let mut c: Vec<(u32, Point)> = self
            .kb
            .of_class(&class)
            .filter(|(_, b)| self.admissible(&class, b.position))
            .map(|(id, b)| (id, b.position))
            .collect();
        c.sort_by(|a, b| dist(a.1, to).total_cmp(&dist(b.1, to)).then(a.0.cmp(&b.0)));
        c
    }

    fn enter_subtask(&mut self, i: usize) {
        self.index = i;
        self.phase = Phase::Navigating;
        let locate = self.subtask().locate;
        match self.candidates(locate).first() {
            Some(&(id, p)) => {
                self.goal = p;
                self.bound = Some(id);
            }
            None => {
                self.goal = locate;
                self.bound = None;
            }
        }
    }

    fn log(&mut self, time: f64, kind: EventKind) {
        self.events.push(ExecEvent { time, kind });
    }

    fn finish(&mut self, t: f64) {
        self.phase = Phase::Done;
        self.log(t, EventKind::TaskComplete { suffix_loops: self.loops_done });
    }

    /// Greedy mechanism: a strictly closer admissible belief, if any. While
    /// exploring, any admissible belief qualifies.
    pub fn greedy_check(&self, robot: Point) -> Option<(u32, Point)> {
        let &(id, p) = self.candidates(robot).first()?;
        match self.phase {
            Phase::Exploring => Some((id, p)),
            Phase::Navigating if Some(id) != self.bound && dist(p, robot) < dist(self.goal, robot) - 1e-9 => {
                Some((id, p))
            }
            _ => None,
        }
    }

    /// Live detections confirming every class of the current goal label.
    fn gate_confirms<'a>(&self, robot: Point, detections: &'a [Detection]) -> Option<&'a Detection> {
        let s = self.subtask();
        let mut primary = None;
        for class in &s.goal_label {
            let hit = detections
                .iter()
                .filter(|d| {
                    &d.class_name == class
                        && dist(d.measured_position, robot) <= self.params.epsilon_sat
                        && self.admissible(class, d.measured_position)
                })
                .min_by(|a, b| dist(a.measured_position, robot).total_cmp(&dist(b.measured_position, robot)))?;
            if class == &s.goal_class {
                primary = Some(hit);
            }
        }
        primary
    }

    fn confirm(&mut self, t: f64, det: &Detection) {
        let s = self.subtask().clone();
        self.log(
            t,
            EventKind::GateConfirm {
                subtask: s.index,
                class: s.goal_class.clone(),
                label: s.goal_label.clone(),
                position: det.measured_position,
                region: self.ws.region_of(det.measured_position).map(String::from),
            },
        );
        let (q_path, at_goal_from) = self.dec.leg(self.index, self.loops_done);
        self.q = *q_path.last().unwrap();
        self.log(
            t,
            EventKind::NbaAdvance {
                subtask: s.index,
                suffix_loop: s.repeating.then_some(self.loops_done),
                q_path,
                at_goal_from,
            },
        );
        let next = self.index + 1;
        if next < self.dec.subtasks.len() {
            self.enter_subtask(next);
        } else if self.dec.suffix_len() == 0 {
            self.finish(t);
        } else {
            self.loops_done += 1;
            if self.loops_done >= self.params.loops_required {
                self.finish(t);
            } else {
                self.enter_subtask(self.dec.suffix_start);
            }
        }
    }

    fn decline(&mut self, t: f64, robot: Point) {
        let s = self.subtask().clone();
        // the gate just looked here: beliefs at this spot are stale
        self.kb.forget_near(&s.goal_class, robot, self.params.epsilon_sat);
        let alt = self.candidates(robot).first().copied();
        self.log(
            t,
            EventKind::GateDecline {
                subtask: s.index,
                class: s.goal_class.clone(),
                robot,
                region: self.ws.region_of(robot).map(String::from),
                alternative: alt.map(|a| a.1),
            },
        );
        match alt {
            Some((id, p)) => {
                self.goal = p;
                self.bound = Some(id);
            }
            None => self.greedy_skip(t),
        }
    }

    /// Explore toward the following subtasks' goals while scanning for the
    /// current class.
    fn greedy_skip(&mut self, t: f64) {
        let n = self.dec.subtasks.len();
        let mut targets = Vec::new();
        let mut j = self.index;
        for _ in 0..n {
            j = if j + 1 < n {
                j + 1
            } else if self.dec.suffix_len() > 0 {
                self.dec.suffix_start
            } else {
                break;
            };
            if j == self.index {
                break;
            }
            targets.push(self.dec.subtasks[j].locate);
        }
        targets.push(self.subtask().locate);
        targets.dedup();
        self.explore = targets;
        self.explore_at = 0;
        self.phase = Phase::Exploring;
        self.goal = self.explore[0];
        self.bound = None;
        let s = self.subtask();
        let kind = EventKind::GreedySkip {
            subtask: s.index,
            class: s.goal_class.clone(),
            toward: self.goal,
        };
        self.log(t, kind);
    }

    /// One control tick at time `t`.
    pub fn step<R: Rng>(&mut self, t: f64, pose: Pose, env: &EnvState, rng: &mut R) -> Tick {
        let robot = pose.position;
        let detections = sense(&self.ws, env, pose, &self.cam, rng);
        self.kb.update(&detections, t);
        self.kb.retract_unseen(&self.ws, pose, &self.cam, &detections);
        if self.phase == Phase::Done {
            return Tick { motion_goal: robot, detections };
        }
        if let Some(id) = self.bound {
            match self.kb.get(id) {
                Some(b) => self.goal = b.position,
                None => self.bound = None,
            }
        }

        if let Some((id, p)) = self.greedy_check(robot) {
            let s = self.subtask();
            let kind = EventKind::GreedyRetarget {
                subtask: s.index,
                class: s.goal_class.clone(),
                robot,
                from: self.goal,
                to: p,
            };
            self.log(t, kind);
            self.goal = p;
            self.bound = Some(id);
            self.phase = Phase::Navigating;
        }

        match self.phase {
            Phase::Navigating if dist(robot, self.goal) <= self.params.arrival_radius => {
                match self.gate_confirms(robot, &detections).cloned() {
                    Some(det) => self.confirm(t, &det),
                    None => self.decline(t, robot),
                }
            }
            Phase::Exploring if dist(robot, self.goal) <= self.params.arrival_radius => {
                self.explore_at = (self.explore_at + 1) % self.explore.len();
                self.goal = self.explore[self.explore_at];
            }
            _ => {}
        }

        let motion_goal = if self.phase == Phase::Done {
            robot
        } else {
            self.nav
                .route(robot, self.goal)
                .and_then(|r| r.first().copied())
                .unwrap_or(self.goal)
        };
        Tick { motion_goal, detections }
    }
}

/// Outcome of replaying a logged run against the automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub advances: usize,
    /// Per finished suffix loop, whether an accepting state was visited.
    pub loop_accepting: Vec<bool>,
}

/// Replays logged automaton moves from the initial state. Each advance must
/// follow a same-tick confirmation; its path must continue from the current
/// state; edges in transit must be enabled by the empty symbol and edges at
/// the goal by the confirmed label.
pub fn replay(nba: &Nba, events: &[ExecEvent]) -> Result<ReplayReport, String> {
    let mut q: Option<StateId> = None;
    let mut loops: Vec<bool> = Vec::new();
    let mut advances = 0;
    for (k, e) in events.iter().enumerate() {
        let EventKind::NbaAdvance { subtask, suffix_loop, q_path, at_goal_from } = &e.kind else {
            continue;
        };
        let label = match k.checked_sub(1).map(|j| &events[j]) {
            Some(ExecEvent { time, kind: EventKind::GateConfirm { subtask: s, label, .. } })
                if *time == e.time && s == subtask =>
            {
                label
            }
            _ => return Err(format!("advance at t={} without a same-tick confirmation", e.time)),
        };
        let start = q_path[0];
        match q {
            None if !nba.initial().contains(&start) => {
                return Err(format!("first path starts at non-initial state {start}"))
            }
            Some(cur) if cur != start => {
                return Err(format!("path at t={} starts at {start}, automaton is at {cur}", e.time))
            }
            _ => {}
        }
        let sigma = nba.encode(label);
        for j in 0..q_path.len() - 1 {
            let (a, b) = (q_path[j], q_path[j + 1]);
            if a == b {
                continue;
            }
            let mask = if j >= *at_goal_from { sigma } else { 0 };
            if !nba.has_transition(a, b, mask) {
                return Err(format!("edge {a}->{b} at t={} not enabled", e.time));
            }
        }
        if let Some(l) = suffix_loop {
            if loops.len() <= *l {
                loops.resize(l + 1, false);
            }
            loops[*l] |= q_path.iter().any(|&s| nba.is_accepting(s));
        }
        q = q_path.last().copied();
        advances += 1;
    }
    Ok(ReplayReport { advances, loop_accepting: loops })
}
