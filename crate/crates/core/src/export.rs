//! Trace export: trajectory CSV, event JSONL and two SVG figures. All
//! output is formatted with fixed precision so re-exports are identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::executive::{events_to_jsonl, EventKind};
use crate::locomotion::{GaitName, LEG_NAMES};
use crate::scenario::Scenario;
use crate::sim::RunTrace;
use crate::workspace::{Mobility, Obstacle, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Events,
    Plot,
    Gait,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Csv, Format::Events, Format::Plot, Format::Gait];

    pub fn file_name(self) -> &'static str {
        match self {
            Format::Csv => "trajectory.csv",
            Format::Events => "events.jsonl",
            Format::Plot => "plot.svg",
            Format::Gait => "gait.svg",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "events" => Ok(Format::Events),
            "plot" => Ok(Format::Plot),
            "gait" => Ok(Format::Gait),
            other => Err(format!("unknown format `{other}` (expected csv, events, plot or gait)")),
        }
    }
}

pub fn trajectory_csv(trace: &RunTrace) -> String {
    let mut out = String::from("t,x,y,heading,gait,q\n");
    for r in &trace.ticks {
        let _ = writeln!(
            out,
            "{:.3},{:.4},{:.4},{:.4},{},{}",
            r.t, r.pose.position.x, r.pose.position.y, r.pose.heading, r.gait, r.q
        );
    }
    out
}

fn gait_color(g: GaitName) -> &'static str {
    match g {
        GaitName::Trot => "#1f77b4",
        GaitName::Walk => "#ff7f0e",
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    lo: Point,
    hi: Point,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn x(&self, p: Point) -> f64 {
        self.margin + (p.x - self.lo.x) * self.scale
    }

    fn y(&self, p: Point) -> f64 {
        self.margin + (self.hi.y - p.y) * self.scale
    }

    fn pt(&self, p: Point) -> String {
        format!("{:.1},{:.1}", self.x(p), self.y(p))
    }

    fn poly(&self, ps: &[Point]) -> String {
        ps.iter().map(|&p| self.pt(p)).collect::<Vec<_>>().join(" ")
    }
}

/// Overhead view: workspace, object paths, trajectory by gait, events.
pub fn plot_svg(sc: &Scenario, trace: &RunTrace) -> String {
    let (lo, hi) = sc.workspace.bounds();
    let scale = (900.0 / (hi.x - lo.x)).min(600.0 / (hi.y - lo.y));
    let f = Frame { lo, hi, scale, margin: 20.0 };
    let w = 2.0 * f.margin + (hi.x - lo.x) * scale;
    let h = 2.0 * f.margin + (hi.y - lo.y) * scale + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        f.x(Point::new(lo.x, hi.y)),
        f.y(Point::new(lo.x, hi.y)),
        (hi.x - lo.x) * scale,
        (hi.y - lo.y) * scale
    );
    for z in &sc.terrain {
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#f2e6c9" stroke="#c8b88a"/>"##,
            f.poly(z.polygon.vertices())
        );
    }
    for r in sc.workspace.regions() {
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="none" stroke="#999" stroke-dasharray="4 3"/>"##,
            f.poly(r.polygon.vertices())
        );
        let (blo, bhi) = r.polygon.bounding_box();
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" fill="#777">{}</text>"##,
            f.x(blo) + 4.0,
            f.y(bhi) + 13.0,
            esc(&r.name)
        );
    }
    for o in sc.workspace.obstacles() {
        match o {
            Obstacle::Circle { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.1}" cy="{:.1}" r="{:.1}" fill="#555"/>"##,
                    f.x(*center),
                    f.y(*center),
                    radius * scale
                );
            }
            Obstacle::Polygon(p) => {
                let _ = writeln!(s, r##"<polygon points="{}" fill="#555"/>"##, f.poly(p.vertices()));
            }
        }
    }
    for o in &sc.objects {
        let at = match &o.mobility {
            Mobility::Static(p) => *p,
            Mobility::Scripted(wps) => {
                let ps: Vec<Point> = wps.iter().map(|w| w.position).collect();
                let _ = writeln!(
                    s,
                    r##"<polyline points="{}" fill="none" stroke="#888" stroke-dasharray="2 2"/>"##,
                    f.poly(&ps)
                );
                ps[ps.len() - 1]
            }
        };
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="6" height="6" fill="#2ca02c"/><text x="{:.1}" y="{:.1}">{}</text>"##,
            f.x(at) - 3.0,
            f.y(at) - 3.0,
            f.x(at) + 5.0,
            f.y(at) - 5.0,
            esc(&o.class_name)
        );
    }
    // trajectory, one polyline per run of equal gait
    let mut i = 0;
    while i < trace.ticks.len() {
        let g = trace.ticks[i].gait;
        let mut j = i;
        while j + 1 < trace.ticks.len() && trace.ticks[j + 1].gait == g {
            j += 1;
        }
        let end = (j + 1).min(trace.ticks.len() - 1);
        let ps: Vec<Point> = trace.ticks[i..=end].iter().map(|r| r.pose.position).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            f.poly(&ps),
            gait_color(g)
        );
        i = j + 1;
    }
    if let Some(r) = trace.ticks.first() {
        let p = r.pose.position;
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="black"/>"#, f.x(p), f.y(p));
    }
    for e in &trace.events {
        match &e.kind {
            EventKind::GateConfirm { position, .. } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.1}" cy="{:.1}" r="7" fill="none" stroke="#2ca02c" stroke-width="2"/>"##,
                    f.x(*position),
                    f.y(*position)
                );
            }
            EventKind::GateDecline { robot, .. } => {
                let (x, y) = (f.x(*robot), f.y(*robot));
                let _ = writeln!(
                    s,
                    r##"<path d="M{:.1},{:.1}L{:.1},{:.1}M{:.1},{:.1}L{:.1},{:.1}" stroke="#d62728" stroke-width="2"/>"##,
                    x - 6.0,
                    y - 6.0,
                    x + 6.0,
                    y + 6.0,
                    x - 6.0,
                    y + 6.0,
                    x + 6.0,
                    y - 6.0
                );
            }
            EventKind::GreedyRetarget { to, .. } => {
                let (x, y) = (f.x(*to), f.y(*to));
                let _ = writeln!(
                    s,
                    r##"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="none" stroke="#9467bd" stroke-width="2"/>"##,
                    x,
                    y - 8.0,
                    x + 8.0,
                    y,
                    x,
                    y + 8.0,
                    x - 8.0,
                    y
                );
            }
            EventKind::GreedySkip { toward, .. } => {
                let (x, y) = (f.x(*toward), f.y(*toward));
                let _ = writeln!(
                    s,
                    r##"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="none" stroke="#e377c2" stroke-width="2"/>"##,
                    x,
                    y - 8.0,
                    x + 7.0,
                    y + 6.0,
                    x - 7.0,
                    y + 6.0
                );
            }
            _ => {}
        }
    }
    let ly = h - 12.0;
    let _ = writeln!(
        s,
        r##"<text x="20" y="{ly:.0}"><tspan fill="#1f77b4">trot</tspan>  <tspan fill="#ff7f0e">walk</tspan>  <tspan fill="#2ca02c">confirm</tspan>  <tspan fill="#d62728">decline</tspan>  <tspan fill="#9467bd">retarget</tspan>  <tspan fill="#e377c2">skip</tspan>  {}: {:?}</text>"##,
        esc(&trace.scenario),
        trace.status
    );
    s.push_str("</svg>\n");
    s
}

/// Gait diagram: active gait strip and per-leg stance bars over time.
pub fn gait_svg(trace: &RunTrace) -> String {
    let n = trace.ticks.len();
    let span = (n as f64 * trace.dt).max(trace.dt);
    let px = (1200.0 / span).min(200.0);
    let (left, row) = (40.0, 18.0);
    let w = left + span * px + 20.0;
    let h = 30.0 + 5.0 * row + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let bar = |s: &mut String, a: usize, b: usize, y: f64, color: &str| {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.1}" width="{:.2}" height="{:.1}" fill="{}"/>"#,
            left + a as f64 * trace.dt * px,
            y,
            (b - a) as f64 * trace.dt * px,
            row - 4.0,
            color
        );
    };
    let _ = writeln!(s, r#"<text x="4" y="{:.1}">gait</text>"#, 20.0 + row - 6.0);
    let mut i = 0;
    while i < n {
        let g = trace.ticks[i].gait;
        let mut j = i;
        while j < n && trace.ticks[j].gait == g {
            j += 1;
        }
        bar(&mut s, i, j, 20.0, gait_color(g));
        i = j;
    }
    for (leg, name) in LEG_NAMES.iter().enumerate() {
        let y = 20.0 + (leg + 1) as f64 * row;
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{name}</text>"#, y + row - 6.0);
        let mut i = 0;
        while i < n {
            if !trace.ticks[i].contacts[leg] {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < n && trace.ticks[j].contacts[leg] {
                j += 1;
            }
            bar(&mut s, i, j, y, "#333");
            i = j;
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{:.0}">0 s .. {:.2} s, stance in black</text>"#,
        h - 10.0,
        span
    );
    s.push_str("</svg>\n");
    s
}

/// Writes the selected formats into `dir`, returning the written paths.
pub fn export(sc: &Scenario, trace: &RunTrace, dir: &Path, formats: &[Format]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        let body = match f {
            Format::Csv => trajectory_csv(trace),
            Format::Events => events_to_jsonl(&trace.events),
            Format::Plot => plot_svg(sc, trace),
            Format::Gait => gait_svg(trace),
        };
        let path = dir.join(f.file_name());
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
