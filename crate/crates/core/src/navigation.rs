//! Shortest collision-free routes between arbitrary points via a visibility
//! graph over slightly inflated obstacle corners.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::workspace::{dist, Obstacle, Point, Workspace};

/// Corner offset from obstacle boundaries, in meters.
pub const CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Navigator {
    ws: Workspace,
    corners: Vec<Point>,
    visible: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn inflated_corners(o: &Obstacle) -> Vec<Point> {
    match o {
        Obstacle::Circle { center, radius } => {
            // circumscribed octagon around the inflated circle
            let r = (radius + CLEARANCE) / (PI / 8.0).cos();
            (0..8)
                .map(|k| {
                    let a = k as f64 * PI / 4.0;
                    *center + Point::new(a.cos(), a.sin()) * r
                })
                .collect()
        }
        Obstacle::Polygon(poly) => {
            let vs = poly.vertices();
            let n = vs.len();
            (0..n)
                .map(|i| {
                    let prev = vs[(i + n - 1) % n];
                    let next = vs[(i + 1) % n];
                    let normal = |e: Point| Point::new(e.y, -e.x) * (1.0 / e.norm());
                    let n1 = normal(vs[i] - prev);
                    let n2 = normal(next - vs[i]);
                    let b = n1 + n2;
                    let b = b * (1.0 / b.norm());
                    vs[i] + b * (CLEARANCE / b.dot(n1))
                })
                .collect()
        }
    }
}

impl Navigator {
    pub fn new(ws: &Workspace) -> Self {
        let corners: Vec<Point> = ws
            .obstacles()
            .iter()
            .flat_map(inflated_corners)
            .filter(|&c| ws.point_free(c))
            .collect();
        let n = corners.len();
        let mut visible = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if ws.segment_free(corners[i], corners[j]) {
                    let d = dist(corners[i], corners[j]);
                    visible[i].push((j, d));
                    visible[j].push((i, d));
                }
            }
        }
        Self {
            ws: ws.clone(),
            corners,
            visible,
        }
    }

    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    /// Waypoints after `from`, ending at `to`; `None` if no route exists.
    pub fn route(&self, from: Point, to: Point) -> Option<Vec<Point>> {
        if self.ws.segment_free(from, to) {
            return Some(vec![to]);
        }
        let n = self.corners.len();
        let (src, dst) = (n, n + 1);
        let mut best = vec![f64::INFINITY; n + 2];
        let mut prev = vec![usize::MAX; n + 2];
        let to_goal: Vec<Option<f64>> = self
            .corners
            .iter()
            .map(|&c| self.ws.segment_free(c, to).then(|| dist(c, to)))
            .collect();
        let mut heap = BinaryHeap::new();
        best[src] = 0.0;
        for (i, &c) in self.corners.iter().enumerate() {
            if self.ws.segment_free(from, c) {
                best[i] = dist(from, c);
                prev[i] = src;
                heap.push(Entry(best[i], i));
            }
        }
        while let Some(Entry(d, u)) = heap.pop() {
            if d > best[u] {
                continue;
            }
            if u == dst {
                break;
            }
            if let Some(g) = to_goal[u] {
                if d + g < best[dst] {
                    best[dst] = d + g;
                    prev[dst] = u;
                    heap.push(Entry(best[dst], dst));
                }
            }
            for &(v, w) in &self.visible[u] {
                if d + w < best[v] {
                    best[v] = d + w;
                    prev[v] = u;
                    heap.push(Entry(best[v], v));
                }
            }
        }
        if !best[dst].is_finite() {
            return None;
        }
        let mut path = vec![to];
        let mut cur = prev[dst];
        while cur != src {
            path.push(self.corners[cur]);
            cur = prev[cur];
        }
        path.reverse();
        Some(path)
    }

    /// Route length, or infinity when unreachable.
    pub fn route_length(&self, from: Point, to: Point) -> f64 {
        match self.route(from, to) {
            None => f64::INFINITY,
            Some(p) => {
                let mut total = 0.0;
                let mut at = from;
                for w in p {
                    total += dist(at, w);
                    at = w;
                }
                total
            }
        }
    }
}
