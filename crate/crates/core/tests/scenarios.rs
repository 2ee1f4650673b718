use std::fs;

use reactive_ltl::executive::EventKind;
use reactive_ltl::export::{export, trajectory_csv, Format};
use reactive_ltl::locomotion::{GaitName, Terrain};
use reactive_ltl::scenario::Scenario;
use reactive_ltl::sim::{run, RunStatus};
use reactive_ltl::workspace::{Mobility, Point};

fn load(name: &str) -> Scenario {
    Scenario::load(name).unwrap()
}

#[test]
fn hospital_layout() {
    let sc = load("hospital_1");
    let names: Vec<&str> = sc.workspace.regions().iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["Room_A", "Room_B", "Room_C", "Corridor_D"]);
    let cans = sc.objects.iter().filter(|o| o.class_name == "can").count();
    assert_eq!(cans, 2);
    let doctor = sc.objects.iter().find(|o| o.class_name == "doctor").unwrap();
    assert!(matches!(doctor.mobility, Mobility::Scripted(_)));
}

#[test]
fn static_clone_needs_no_repair() {
    let tr = run(&load("hospital_1_static"));
    assert_eq!(tr.status, RunStatus::Completed);
    let repairs = tr
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::GateDecline { .. } | EventKind::GreedyRetarget { .. }))
        .count();
    assert_eq!(repairs, 0, "{:?}", tr.events);
}

#[test]
fn logged_positions_are_free() {
    for name in ["hospital_1", "handover_1", "hospital_2_gaits", "micro_recur"] {
        let sc = load(name);
        let tr = run(&sc);
        assert!(!tr.ticks.is_empty(), "{name}");
        for k in &tr.ticks {
            assert!(sc.workspace.point_free(k.pose.position), "{name} at t={}", k.t);
        }
        for w in tr.ticks.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }
}

#[test]
fn retarget_fixture_retargets() {
    let tr = run(&load("micro_retarget"));
    let r = tr.events.iter().find_map(|e| match &e.kind {
        EventKind::GreedyRetarget { from, to, .. } => Some((*from, *to)),
        _ => None,
    });
    let (from, to) = r.expect("a retarget event");
    assert!(from.x > 10.0 && to.x < 6.0, "{from:?} -> {to:?}");
    assert_eq!(tr.status, RunStatus::Completed);
}

#[test]
fn gait_follows_terrain() {
    let sc = load("hospital_2_gaits");
    let tr = run(&sc);
    assert_eq!(tr.status, RunStatus::Completed);
    let mut on_stairs = 0;
    for k in &tr.ticks {
        if sc.terrain_at(k.pose.position) == Terrain::Stairs {
            on_stairs += 1;
        }
    }
    assert!(on_stairs > 0, "route never crossed the stairs");
    assert!(tr.ticks.iter().any(|k| k.gait == GaitName::Trot));
    assert!(tr.ticks.iter().any(|k| k.gait == GaitName::Walk));
    // switches wait for a cycle boundary, so a few trot ticks can spill onto the stairs
    let trot_on_stairs = tr
        .ticks
        .iter()
        .filter(|k| k.gait == GaitName::Trot && sc.terrain_at(k.pose.position) == Terrain::Stairs)
        .count();
    assert!(trot_on_stairs * 5 < on_stairs, "{trot_on_stairs} of {on_stairs} stair ticks trotting");
}

#[test]
fn export_writes_requested_files_deterministically() {
    let sc = load("micro_reach");
    let tr = run(&sc);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = export(&sc, &tr, a.path(), &Format::ALL).unwrap();
    let pb = export(&sc, &run(&sc), b.path(), &Format::ALL).unwrap();
    assert_eq!(pa.len(), 4);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let svg = fs::read_to_string(a.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let c = tempfile::tempdir().unwrap();
    let only = export(&sc, &tr, c.path(), &[Format::Events]).unwrap();
    assert_eq!(only, vec![c.path().join("events.jsonl")]);
    assert_eq!(fs::read_dir(c.path()).unwrap().count(), 1);
}

#[test]
fn single_tick_run_exports() {
    let sc = load("micro_empty");
    let tr = run(&sc);
    assert_eq!(tr.status, RunStatus::Completed);
    let csv = trajectory_csv(&tr);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,x,y,heading,gait,q");
    assert_eq!(rows.len(), 1 + tr.ticks.len());

    let mut one = sc.clone();
    one.sim.horizon = one.sim.dt;
    let tr = run(&one);
    let dir = tempfile::tempdir().unwrap();
    export(&one, &tr, dir.path(), &Format::ALL).unwrap();
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    for f in ["plot.svg", "gait.svg"] {
        let s = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(s.trim_end().ends_with("</svg>"), "{f}");
        assert!(!s.contains("NaN"), "{f}");
    }
}

#[test]
fn seeds_change_noise_but_not_validity() {
    let sc = load("micro_recur");
    let a = run(&sc.clone().with_seed(1));
    let b = run(&sc.with_seed(1));
    assert_eq!(trajectory_csv(&a), trajectory_csv(&b));
    assert_eq!(a.status, RunStatus::Completed);
}

#[test]
fn paths_load_like_names() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/micro_reach.toml");
    let by_path = Scenario::load(path).unwrap();
    assert_eq!(by_path.name, "micro_reach");
    assert_eq!(by_path.robot.start, Point::new(1.0, 5.0));
}
