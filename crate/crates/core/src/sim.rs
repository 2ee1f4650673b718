//! Fixed-step simulation: offline planning followed by the reactive tick
//! loop of perception, executive, gait selection and tracking.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::executive::{ExecEvent, ExecParams, Executive, Phase};
use crate::locomotion::{
    people_context, select_gait, track, GaitName, GaitScheduler, GaitSpec, SceneContext,
};
use crate::ltl::{translate, Nba, StateId};
use crate::perception::{KnowledgeBase, Pose};
use crate::planner::{decompose, plan, Decomposition, PlanError, PrefixSuffixPlan};
use crate::scenario::Scenario;
use crate::workspace::{EnvObject, EnvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Completed,
    /// Still exploring for a subtask when the horizon ran out.
    Blocked,
    HorizonReached,
    NoPlanFound,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::HorizonReached => 1,
            RunStatus::NoPlanFound => 2,
            RunStatus::Blocked => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub pose: Pose,
    pub gait: GaitName,
    pub q: StateId,
    pub contacts: [bool; 4],
}

/// Output of the offline phase.
#[derive(Debug, Clone)]
pub struct Offline {
    pub nba: Arc<Nba>,
    pub plan: PrefixSuffixPlan,
    pub decomposition: Decomposition,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<ExecEvent>,
    pub status: RunStatus,
    pub nba: Arc<Nba>,
    pub offline: Option<Offline>,
}

/// Positions the robot believes in before it starts, as planner input.
pub fn prior_env(sc: &Scenario) -> EnvState {
    let objects: Vec<EnvObject> = sc
        .prior
        .iter()
        .enumerate()
        .map(|(i, (class, p))| EnvObject::fixed(format!("prior{i}"), class.clone(), *p))
        .collect();
    EnvState::at(&objects, 0.0)
}

pub fn offline(sc: &Scenario) -> Result<Offline, PlanError> {
    let nba = Arc::new(translate(&sc.task.formula));
    let table = &sc.task.constraint_table;
    let p = plan(&sc.workspace, &prior_env(sc), &nba, sc.robot.start, table, &sc.planner)?;
    let decomposition = decompose(&p, &nba, table);
    Ok(Offline { nba, plan: p, decomposition })
}

fn gait_for(sc: &Scenario, ctx: SceneContext) -> GaitSpec {
    let g = select_gait(ctx);
    match g.name {
        GaitName::Trot => g.with_speed(sc.robot.trot_speed),
        GaitName::Walk => g.with_speed(sc.robot.walk_speed),
    }
}

/// Runs the scenario to its horizon. Deterministic in the scenario seed.
pub fn run(sc: &Scenario) -> RunTrace {
    let off = match offline(sc) {
        Ok(o) => o,
        Err(_) => {
            return RunTrace {
                scenario: sc.name.clone(),
                seed: sc.sim.seed,
                dt: sc.sim.dt,
                ticks: Vec::new(),
                events: Vec::new(),
                status: RunStatus::NoPlanFound,
                nba: Arc::new(translate(&sc.task.formula)),
                offline: None,
            }
        }
    };
    let ws = &sc.workspace;
    let kb = KnowledgeBase::with_prior(sc.kb, sc.prior.iter().map(|(c, p)| (c.as_str(), *p)));
    let params = ExecParams {
        loops_required: sc.sim.suffix_loops,
        ..ExecParams::for_workspace(ws)
    };
    let mut ex = Executive::new(
        off.nba.clone(),
        off.decomposition.clone(),
        kb,
        ws,
        sc.camera,
        params,
        sc.robot.start,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(sc.sim.seed);
    let mut pose = Pose::new(sc.robot.start, sc.robot.heading);
    let start_ctx = SceneContext {
        terrain: sc.terrain_at(pose.position),
        people: people_context(ws, &ex.kb, pose.position, &sc.robot.human_classes),
    };
    let mut sched = GaitScheduler::new(gait_for(sc, start_ctx), 0.0);
    let n = sc.sim.ticks();
    let mut ticks = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * sc.sim.dt;
        let env = EnvState::at(&sc.objects, t);
        let tick = ex.step(t, pose, &env, &mut rng);
        let ctx = SceneContext {
            terrain: sc.terrain_at(pose.position),
            people: people_context(ws, &ex.kb, pose.position, &sc.robot.human_classes),
        };
        let gait = *sched.request(gait_for(sc, ctx), t);
        ticks.push(TickRecord {
            t,
            pose,
            gait: gait.name,
            q: ex.nba_state(),
            contacts: sched.contacts(t),
        });
        pose = track(tick.motion_goal, pose, &gait, sc.sim.dt, ws, &sc.robot.track);
    }
    let status = match ex.phase() {
        Phase::Done => RunStatus::Completed,
        Phase::Exploring => RunStatus::Blocked,
        Phase::Navigating => RunStatus::HorizonReached,
    };
    RunTrace {
        scenario: sc.name.clone(),
        seed: sc.sim.seed,
        dt: sc.sim.dt,
        ticks,
        events: ex.events().to_vec(),
        status,
        nba: off.nba.clone(),
        offline: Some(off),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executive::EventKind;

    #[test]
    fn reach_completes_and_ticks_match_horizon() {
        let sc = Scenario::load("micro_reach").unwrap();
        let tr = run(&sc);
        assert_eq!(tr.status, RunStatus::Completed);
        assert_eq!(tr.ticks.len(), sc.sim.ticks());
        assert!(tr.ticks.windows(2).all(|w| w[0].t < w[1].t));
        assert!(tr.ticks.iter().all(|r| sc.workspace.point_free(r.pose.position)));
        assert!(matches!(tr.events.last().unwrap().kind, EventKind::TaskComplete { .. }));
    }

    #[test]
    fn walled_goal_has_no_plan() {
        let tr = run(&Scenario::load("micro_walled").unwrap());
        assert_eq!(tr.status, RunStatus::NoPlanFound);
        assert!(tr.ticks.is_empty());
    }

    #[test]
    fn missing_object_blocks() {
        let tr = run(&Scenario::load("micro_blocked").unwrap());
        assert_eq!(tr.status, RunStatus::Blocked);
    }
}
