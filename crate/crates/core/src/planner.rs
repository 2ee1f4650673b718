//! Sampling-based optimal planning over the implicit product of the
//! workspace transition system and a Büchi automaton.
//!
//! A product node `(x, q)` may step to `(x', q')` when `can_transition(x, x')`
//! holds and the automaton moves `q -> q'` on the label read at `x`. Staying
//! put is a zero-length transition, so automaton moves enabled at a vertex
//! are closed over in place.
//!
//! The prefix tree is rooted at `(x0, q0)`. For the cheapest accepting
//! prefix nodes a second tree is grown from each, and a loop is closed when
//! some suffix node can step back to its root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ltl::{LassoWord, Nba, StateId, Symbol};
use crate::par::{self, Exec};
use crate::workspace::{dist, EnvState, Point, SamplingExhausted, Workspace};

/// Allowed regions per class; an empty or missing entry is unconstrained.
pub type ConstraintTable = BTreeMap<String, BTreeSet<String>>;

pub fn constraint_allows(table: &ConstraintTable, class: &str, region: Option<&str>) -> bool {
    match table.get(class) {
        None => true,
        Some(rs) if rs.is_empty() => true,
        Some(rs) => region.is_some_and(|r| rs.contains(r)),
    }
}

/// Classes whose constrained proposition holds at `x` under `env`.
pub fn symbol_at(ws: &Workspace, env: &EnvState, table: &ConstraintTable, x: Point) -> Symbol {
    ws.label_at(env, x)
        .into_iter()
        .filter(|l| constraint_allows(table, &l.class_name, l.region.as_deref()))
        .map(|l| l.class_name)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    pub n_samples: usize,
    pub rewire_gamma: f64,
    pub goal_bias: f64,
    pub seed: u64,
    /// Number of cheapest accepting prefix nodes that get a suffix search.
    pub suffix_candidates: usize,
    /// How the independent suffix searches are scheduled.
    pub exec: Exec,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            rewire_gamma: 6.0,
            goal_bias: 0.1,
            seed: 0,
            suffix_candidates: 5,
            exec: Exec::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no plan found after {n_samples} samples")]
    NoPlanFound { n_samples: usize },
    #[error("start position {0} is not collision-free")]
    StartInCollision(Point),
    #[error(transparent)]
    Sampling(#[from] SamplingExhausted),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanNode {
    pub x: Point,
    pub q: StateId,
    pub cost: f64,
}

/// `prefix` runs `q^0 .. q^K`; `suffix` runs `q^K .. q^{K+M}` and ends where
/// it starts. Suffix costs are measured from `q^K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixSuffixPlan {
    pub prefix: Vec<PlanNode>,
    pub suffix: Vec<PlanNode>,
    pub prefix_cost: f64,
    pub suffix_cost: f64,
    /// Planning-time symbol read at each prefix node, then each suffix node.
    pub prefix_symbols: Vec<Symbol>,
    pub suffix_symbols: Vec<Symbol>,
}

impl PrefixSuffixPlan {
    pub fn total_cost(&self) -> f64 {
        self.prefix_cost + self.suffix_cost
    }

    /// The infinite label word `prefix[..K] (suffix[..M])^w`.
    pub fn word(&self) -> LassoWord {
        let k = self.prefix.len() - 1;
        let m = self.suffix.len() - 1;
        LassoWord::new(
            self.prefix_symbols[..k].to_vec(),
            self.suffix_symbols[..m].to_vec(),
        )
        .expect("suffix has at least one step")
    }

    /// Prefix then suffix nodes, with the shared node `q^K` listed once.
    pub fn nodes(&self) -> impl Iterator<Item = &PlanNode> {
        self.prefix.iter().chain(self.suffix.iter().skip(1))
    }

    /// Text trace: one `x y q cost` line per node in each part.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "plan prefix_cost {:.6} suffix_cost {:.6}\nprefix {}\n",
            self.prefix_cost,
            self.suffix_cost,
            self.prefix.len()
        );
        for n in &self.prefix {
            let _ = writeln!(out, "{:.6} {:.6} {} {:.6}", n.x.x, n.x.y, n.q, n.cost);
        }
        let _ = writeln!(out, "suffix {}", self.suffix.len());
        for n in &self.suffix {
            let _ = writeln!(out, "{:.6} {:.6} {} {:.6}", n.x.x, n.x.y, n.q, n.cost);
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Vertex {
    x: Point,
    mask: u64,
    nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Node {
    v: usize,
    q: StateId,
    cost: f64,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Strict-improvement margin; also guarantees rewiring never forms a cycle.
const IMPROVE: f64 = 1e-9;

/// A rooted tree over product nodes, grouped by geometric vertex.
#[derive(Debug, Clone)]
pub struct ProductTree<'a> {
    ws: &'a Workspace,
    env: &'a EnvState,
    nba: &'a Nba,
    table: &'a ConstraintTable,
    vertices: Vec<Vertex>,
    /// Roadmap edges: feasible neighbours and their lengths.
    adjacent: Vec<Vec<(usize, f64)>>,
    nodes: Vec<Node>,
}

impl<'a> ProductTree<'a> {
    fn new(
        ws: &'a Workspace,
        env: &'a EnvState,
        nba: &'a Nba,
        table: &'a ConstraintTable,
        root: Point,
        root_states: &[StateId],
    ) -> Self {
        let mut t = Self {
            ws,
            env,
            nba,
            table,
            vertices: Vec::new(),
            adjacent: Vec::new(),
            nodes: Vec::new(),
        };
        let v = t.add_vertex(root);
        for &q in root_states {
            t.add_node(v, q, 0.0, None);
        }
        let roots = t.vertices[v].nodes.clone();
        t.propagate(roots);
        t
    }

    fn add_vertex(&mut self, x: Point) -> usize {
        let mask = self.nba.encode(symbol_at(self.ws, self.env, self.table, x));
        self.vertices.push(Vertex { x, mask, nodes: Vec::new() });
        self.adjacent.push(Vec::new());
        self.vertices.len() - 1
    }

    fn add_node(&mut self, v: usize, q: StateId, cost: f64, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { v, q, cost, parent, children: Vec::new() });
        self.vertices[v].nodes.push(id);
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn node_at(&self, v: usize, q: StateId) -> Option<usize> {
        self.vertices[v].nodes.iter().copied().find(|&n| self.nodes[n].q == q)
    }

    fn reparent(&mut self, id: usize, parent: usize, cost: f64, changed: &mut Vec<usize>) {
        if let Some(old) = self.nodes[id].parent {
            self.nodes[old].children.retain(|&c| c != id);
        }
        self.nodes[parent].children.push(id);
        self.nodes[id].parent = Some(parent);
        let delta = cost - self.nodes[id].cost;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost += delta;
            changed.push(n);
            stack.extend(self.nodes[n].children.iter().copied());
        }
    }

    /// Offers `(v, q)` reached from `parent` at `cost`. Returns the nodes
    /// whose cost dropped: the new or improved node and its subtree.
    fn offer(&mut self, v: usize, q: StateId, parent: usize, cost: f64, changed: &mut Vec<usize>) {
        match self.node_at(v, q) {
            Some(n) if cost < self.nodes[n].cost - IMPROVE => {
                self.reparent(n, parent, cost, changed);
            }
            Some(_) => {}
            None => changed.push(self.add_node(v, q, cost, Some(parent))),
        }
    }

    /// Label-correcting sweep over the roadmap: every node in `work` offers
    /// its automaton successors to its own vertex (zero cost) and to each
    /// adjacent vertex, until no cost improves.
    fn propagate(&mut self, mut work: Vec<usize>) {
        let mut changed = Vec::new();
        while let Some(n) = work.pop() {
            let (v, q, cost) = (self.nodes[n].v, self.nodes[n].q, self.nodes[n].cost);
            let succ = self.nba.successors(q, self.vertices[v].mask);
            for &q2 in &succ {
                if q2 != q {
                    self.offer(v, q2, n, cost, &mut changed);
                }
            }
            for i in 0..self.adjacent[v].len() {
                let (u, w) = self.adjacent[v][i];
                for &q2 in &succ {
                    self.offer(u, q2, n, cost + w, &mut changed);
                }
            }
            work.append(&mut changed);
        }
    }

    fn nearest(&self, x: Point) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = dist(v.x, x);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    fn extend(&mut self, sample: Point, gamma: f64) {
        let eta = self.ws.eta();
        let near_idx = self.nearest(sample);
        let from = self.vertices[near_idx].x;
        let d = dist(from, sample);
        if d < 1e-9 {
            return;
        }
        let reach = eta * (1.0 - 1e-9);
        let x_new = if d <= reach { sample } else { from + (sample - from) * (reach / d) };
        if !self.ws.can_transition(from, x_new) {
            return;
        }
        let n = (self.vertices.len() + 1) as f64;
        let radius = eta.min(gamma * (n.ln() / n).sqrt());
        let near: Vec<(usize, f64)> = (0..self.vertices.len())
            .filter(|&u| {
                u == near_idx
                    || (dist(self.vertices[u].x, x_new) <= radius
                        && self.ws.can_transition(self.vertices[u].x, x_new))
            })
            .map(|u| (u, dist(self.vertices[u].x, x_new)))
            .collect();

        let v_new = self.add_vertex(x_new);
        let mut created = Vec::new();
        for &(u, step) in &near {
            let mask = self.vertices[u].mask;
            for n in self.vertices[u].nodes.clone() {
                let (q, cost) = (self.nodes[n].q, self.nodes[n].cost);
                for q2 in self.nba.successors(q, mask) {
                    self.offer(v_new, q2, n, cost + step, &mut created);
                }
            }
        }
        if self.vertices[v_new].nodes.is_empty() {
            self.vertices.pop();
            self.adjacent.pop();
            return;
        }
        for &(u, step) in &near {
            self.adjacent[u].push((v_new, step));
        }
        self.adjacent[v_new] = near;
        let work = self.vertices[v_new].nodes.clone();
        self.propagate(work);
    }

    fn grow<R: Rng>(
        &mut self,
        rng: &mut R,
        params: &PlannerParams,
        targets: &[Point],
    ) -> Result<(), SamplingExhausted> {
        for _ in 0..params.n_samples {
            let sample = if !targets.is_empty() && rng.random_bool(params.goal_bias) {
                targets[rng.random_range(0..targets.len())]
            } else {
                self.ws.sample_free(rng)?
            };
            self.extend(sample, params.rewire_gamma);
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Automaton states present anywhere in the tree.
    pub fn reached_states(&self) -> BTreeSet<StateId> {
        self.nodes.iter().map(|n| n.q).collect()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    fn plan_node(&self, id: usize) -> PlanNode {
        let n = &self.nodes[id];
        PlanNode { x: self.vertices[n.v].x, q: n.q, cost: n.cost }
    }

    fn symbol(&self, id: usize) -> Symbol {
        self.nba
            .decode(self.vertices[self.nodes[id].v].mask)
            .into_iter()
            .map(String::from)
            .collect()
    }

    /// Checks edge feasibility, guard enablement and cost accumulation for
    /// every node.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, n) in self.nodes.iter().enumerate() {
            let x = self.vertices[n.v].x;
            match n.parent {
                None if n.cost != 0.0 => return Err(format!("root {id} has cost {}", n.cost)),
                None => {}
                Some(p) => {
                    let pn = &self.nodes[p];
                    let px = self.vertices[pn.v].x;
                    if !self.ws.can_transition(px, x) {
                        return Err(format!("edge {p}->{id} infeasible"));
                    }
                    if !self.nba.has_transition(pn.q, n.q, self.vertices[pn.v].mask) {
                        return Err(format!("edge {p}->{id} not enabled"));
                    }
                    if (pn.cost + dist(px, x) - n.cost).abs() > 1e-6 {
                        return Err(format!("cost mismatch on {p}->{id}"));
                    }
                    if !pn.children.contains(&id) {
                        return Err(format!("{id} missing from children of {p}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-node costs, indexed by creation order.
    pub fn costs(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.cost).collect()
    }
}

struct Candidate {
    prefix_node: usize,
    suffix: Option<(f64, Vec<PlanNode>, Vec<Symbol>)>,
}

fn suffix_seed(seed: u64, node: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (node as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn object_targets(env: &EnvState) -> Vec<Point> {
    env.objects.iter().map(|o| o.position).collect()
}

/// Grows only the prefix tree; exposed for invariant checks.
pub fn grow_prefix_tree<'a>(
    ws: &'a Workspace,
    env0: &'a EnvState,
    nba: &'a Nba,
    table: &'a ConstraintTable,
    x0: Point,
    params: &PlannerParams,
) -> Result<ProductTree<'a>, PlanError> {
    if !ws.point_free(x0) {
        return Err(PlanError::StartInCollision(x0));
    }
    let mut tree = ProductTree::new(ws, env0, nba, table, x0, nba.initial());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    tree.grow(&mut rng, params, &object_targets(env0))?;
    Ok(tree)
}

fn search_suffix(
    prefix: &ProductTree<'_>,
    root: usize,
    params: &PlannerParams,
) -> Result<Option<(f64, Vec<PlanNode>, Vec<Symbol>)>, SamplingExhausted> {
    let g = prefix.plan_node(root);
    let mut tree = ProductTree::new(prefix.ws, prefix.env, prefix.nba, prefix.table, g.x, &[g.q]);
    let mut rng = ChaCha8Rng::seed_from_u64(suffix_seed(params.seed, root));
    let mut targets = object_targets(prefix.env);
    targets.push(g.x);
    tree.grow(&mut rng, params, &targets)?;

    let mut best: Option<(f64, usize)> = None;
    for (id, n) in tree.nodes.iter().enumerate() {
        let v = &tree.vertices[n.v];
        if !prefix.ws.can_transition(v.x, g.x) || !prefix.nba.has_transition(n.q, g.q, v.mask) {
            continue;
        }
        let c = n.cost + dist(v.x, g.x);
        if best.is_none_or(|(bc, _)| c < bc - IMPROVE) {
            best = Some((c, id));
        }
    }
    Ok(best.map(|(cost, id)| {
        let path = tree.path_to(id);
        let mut nodes: Vec<PlanNode> = path.iter().map(|&i| tree.plan_node(i)).collect();
        let mut symbols: Vec<Symbol> = path.iter().map(|&i| tree.symbol(i)).collect();
        nodes.push(PlanNode { x: g.x, q: g.q, cost });
        symbols.push(tree.symbol(path[0]));
        (cost, nodes, symbols)
    }))
}

/// Minimum-cost prefix-suffix plan. Deterministic in `params.seed`.
pub fn plan(
    ws: &Workspace,
    env0: &EnvState,
    nba: &Nba,
    x0: Point,
    table: &ConstraintTable,
    params: &PlannerParams,
) -> Result<PrefixSuffixPlan, PlanError> {
    let none = PlanError::NoPlanFound { n_samples: params.n_samples };
    if nba.accepting_states().is_empty() {
        return Err(none);
    }
    let tree = grow_prefix_tree(ws, env0, nba, table, x0, params)?;

    let mut accepting: Vec<usize> = (0..tree.nodes.len())
        .filter(|&i| nba.is_accepting(tree.nodes[i].q) && nba.on_cycle(tree.nodes[i].q))
        .collect();
    accepting.sort_by(|&a, &b| tree.nodes[a].cost.total_cmp(&tree.nodes[b].cost).then(a.cmp(&b)));
    accepting.truncate(params.suffix_candidates);

    let suffixes = par::map(params.exec, &accepting, |&g| search_suffix(&tree, g, params));
    let mut candidates = Vec::new();
    for (&g, s) in accepting.iter().zip(suffixes) {
        candidates.push(Candidate { prefix_node: g, suffix: s? });
    }

    let mut plans: Vec<PrefixSuffixPlan> = candidates
        .into_iter()
        .filter_map(|c| {
            let (suffix_cost, suffix, suffix_symbols) = c.suffix?;
            let path = tree.path_to(c.prefix_node);
            Some(PrefixSuffixPlan {
                prefix: path.iter().map(|&i| tree.plan_node(i)).collect(),
                prefix_symbols: path.iter().map(|&i| tree.symbol(i)).collect(),
                prefix_cost: tree.nodes[c.prefix_node].cost,
                suffix_cost,
                suffix,
                suffix_symbols,
            })
        })
        .collect();
    plans.sort_by(|a, b| {
        a.total_cost()
            .total_cmp(&b.total_cost())
            .then(a.suffix_cost.total_cmp(&b.suffix_cost))
    });
    plans
        .into_iter()
        .find(|p| nba.accepts_lasso(&p.word()))
        .ok_or(none)
}

/// Independent plans for several seeds.
#[allow(clippy::too_many_arguments)]
pub fn plan_batch(
    ws: &Workspace,
    env0: &EnvState,
    nba: &Nba,
    x0: Point,
    table: &ConstraintTable,
    params: &PlannerParams,
    seeds: &[u64],
    exec: Exec,
) -> Vec<Result<PrefixSuffixPlan, PlanError>> {
    par::map(exec, seeds, |&seed| {
        plan(ws, env0, nba, x0, table, &PlannerParams { seed, ..*params })
    })
}

/// One goal-reaching leg of the plan, ending where an automaton edge with a
/// positive literal is discharged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subtask {
    pub index: usize,
    pub goal_class: String,
    /// All classes required by the discharged guard; `goal_class` is the first.
    pub goal_label: Vec<String>,
    pub goal_constraint: BTreeSet<String>,
    pub reference_path: Vec<Point>,
    pub locate: Point,
    pub nba_edge: (StateId, StateId),
    /// Automaton states from the start of the leg through `nba_edge.1`.
    pub nba_path: Vec<StateId>,
    /// Edges of `nba_path` from this index on are taken at `locate`; earlier
    /// ones are taken in transit.
    pub at_goal_from: usize,
    pub repeating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub subtasks: Vec<Subtask>,
    /// Index of the first repeating subtask; equals `subtasks.len()` when the
    /// suffix discharges nothing.
    pub suffix_start: usize,
    /// Points and states after the last discharge, through the loop end.
    pub tail_points: Vec<Point>,
    pub tail_states: Vec<StateId>,
    /// Offset of the loop entry `q^K` within the first repeating subtask's
    /// `nba_path`.
    pub suffix_entry: usize,
}

impl Decomposition {
    /// Automaton path for subtask `i` when `loop_index` suffix loops have
    /// already finished, with the index where the at-goal edges begin.
    /// Later loops enter the first repeating subtask from the tail instead
    /// of from the prefix.
    pub fn leg(&self, i: usize, loop_index: usize) -> (Vec<StateId>, usize) {
        let s = &self.subtasks[i];
        if i != self.suffix_start || loop_index == 0 {
            return (s.nba_path.clone(), s.at_goal_from);
        }
        let mut path = self.tail_states.clone();
        path.extend_from_slice(&s.nba_path[self.suffix_entry + 1..]);
        let at = (self.tail_states.len() - 1 + s.at_goal_from).saturating_sub(self.suffix_entry);
        (path, at)
    }

    pub fn prefix_len(&self) -> usize {
        self.suffix_start
    }

    pub fn suffix_len(&self) -> usize {
        self.subtasks.len() - self.suffix_start
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.subtasks {
            let cons: Vec<&str> = s.goal_constraint.iter().map(String::as_str).collect();
            let _ = writeln!(
                out,
                "subtask {} {} {{{}}} locate {:.6} {:.6} edge {}->{} {}",
                s.index,
                s.goal_label.join("&"),
                cons.join(","),
                s.locate.x,
                s.locate.y,
                s.nba_edge.0,
                s.nba_edge.1,
                if s.repeating { "suffix" } else { "prefix" }
            );
        }
        out
    }
}

/// The guard used on step `from -> to` under `mask`, preferring one with a
/// positive literal.
fn discharge_guard(nba: &Nba, from: StateId, to: StateId, mask: u64) -> Option<u64> {
    if from == to {
        return None;
    }
    nba.outgoing(from)
        .filter(|t| t.to == to && t.guard.matches(mask) && t.guard.has_positive())
        .map(|t| t.guard.positive)
        .next()
}

/// Cuts the plan at every discharging automaton edge.
pub fn decompose(plan: &PrefixSuffixPlan, nba: &Nba, table: &ConstraintTable) -> Decomposition {
    let nodes: Vec<&PlanNode> = plan.nodes().collect();
    let symbols: Vec<&Symbol> = plan
        .prefix_symbols
        .iter()
        .chain(plan.suffix_symbols.iter().skip(1))
        .collect();
    let k = plan.prefix.len() - 1;

    let mut subtasks = Vec::new();
    let mut starts = Vec::new();
    // `start`: first node of the current leg in state terms; `cut`: the
    // previous locate, shared as the first point of the next reference path.
    let (mut start, mut cut) = (0, 0);
    for i in 0..nodes.len() - 1 {
        let mask = nba.encode(symbols[i]);
        let Some(pos) = discharge_guard(nba, nodes[i].q, nodes[i + 1].q, mask) else {
            continue;
        };
        let goal_label: Vec<String> = nba.decode(pos).into_iter().map(String::from).collect();
        let here = nodes[i].x;
        let repeating = i >= k;
        let stayed = nodes[start..=i].iter().all(|n| n.x == here);
        if let Some(last) = subtasks.last_mut().filter(|s: &&mut Subtask| {
            stayed && s.locate == here && s.goal_label == goal_label && s.repeating == repeating
        }) {
            // back-to-back discharges of the same label at one spot form one leg
            last.nba_path.extend(nodes[start + 1..=i + 1].iter().map(|n| n.q));
            last.nba_edge = (nodes[i].q, nodes[i + 1].q);
            start = i + 1;
            cut = i;
            continue;
        }
        let mut at_goal = i;
        while at_goal > start && nodes[at_goal - 1].x == here {
            at_goal -= 1;
        }
        let goal_class = goal_label[0].clone();
        let mut path: Vec<Point> = nodes[cut..=i].iter().map(|n| n.x).collect();
        path.dedup();
        subtasks.push(Subtask {
            index: subtasks.len(),
            goal_constraint: table.get(&goal_class).cloned().unwrap_or_default(),
            goal_class,
            goal_label,
            reference_path: path,
            locate: here,
            nba_edge: (nodes[i].q, nodes[i + 1].q),
            nba_path: nodes[start..=i + 1].iter().map(|n| n.q).collect(),
            at_goal_from: at_goal - start,
            repeating,
        });
        starts.push(start);
        start = i + 1;
        cut = i;
    }
    let suffix_start = subtasks.iter().position(|s| s.repeating).unwrap_or(subtasks.len());
    let suffix_entry = starts.get(suffix_start).map_or(0, |&s| k - s);
    let mut tail_points: Vec<Point> = nodes[cut..].iter().map(|n| n.x).collect();
    tail_points.dedup();
    Decomposition {
        subtasks,
        suffix_start,
        tail_points,
        tail_states: nodes[start..].iter().map(|n| n.q).collect(),
        suffix_entry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{parse, translate};
    use crate::workspace::{ConvexPolygon, EnvObject, Obstacle};

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn atoms(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn open_ws() -> Workspace {
        Workspace::new(p(0.0, 0.0), p(10.0, 10.0), vec![], vec![], 1.0, 0.5).unwrap()
    }

    fn params(n: usize, seed: u64) -> PlannerParams {
        PlannerParams { n_samples: n, seed, ..Default::default() }
    }

    #[test]
    fn reach_single_object() {
        let ws = open_ws();
        let env = EnvState::at(&[EnvObject::fixed("a1", "a", p(5.0, 5.0))], 0.0);
        let nba = translate(&parse("F a", &atoms(&["a"])).unwrap());
        let table = ConstraintTable::new();
        let plan = plan(&ws, &env, &nba, p(0.5, 5.0), &table, &params(600, 1)).unwrap();
        assert!(nba.accepts_lasso(&plan.word()));
        assert!(plan.prefix_cost >= 4.0 - 1e-9);
        assert!(plan.prefix_cost < 5.5);
        assert_eq!(plan.suffix_cost, 0.0);
        let dec = decompose(&plan, &nba, &table);
        assert_eq!(dec.subtasks.len(), 1);
        assert_eq!(dec.subtasks[0].goal_class, "a");
        assert_eq!(dec.suffix_start, 1);
    }

    #[test]
    fn walled_object_is_unreachable() {
        let walls = vec![
            Obstacle::Polygon(ConvexPolygon::rect(3.0, 3.0, 7.0, 3.5).unwrap()),
            Obstacle::Polygon(ConvexPolygon::rect(3.0, 6.5, 7.0, 7.0).unwrap()),
            Obstacle::Polygon(ConvexPolygon::rect(3.0, 3.5, 3.5, 6.5).unwrap()),
            Obstacle::Polygon(ConvexPolygon::rect(6.5, 3.5, 7.0, 6.5).unwrap()),
        ];
        let ws = Workspace::new(p(0.0, 0.0), p(10.0, 10.0), walls, vec![], 1.0, 0.5).unwrap();
        let env = EnvState::at(&[EnvObject::fixed("a1", "a", p(5.0, 5.0))], 0.0);
        let nba = translate(&parse("F a", &atoms(&["a"])).unwrap());
        let r = plan(&ws, &env, &nba, p(1.0, 1.0), &ConstraintTable::new(), &params(400, 0));
        assert_eq!(r, Err(PlanError::NoPlanFound { n_samples: 400 }));
    }

    #[test]
    fn recurrence_closes_a_loop() {
        let ws = open_ws();
        let env = EnvState::at(
            &[EnvObject::fixed("a1", "a", p(2.0, 2.0)), EnvObject::fixed("b1", "b", p(6.0, 3.0))],
            0.0,
        );
        let nba = translate(&parse("G F a && G F b", &atoms(&["a", "b"])).unwrap());
        let table = ConstraintTable::new();
        let plan = plan(&ws, &env, &nba, p(1.0, 1.0), &table, &params(800, 3)).unwrap();
        let first = plan.suffix.first().unwrap();
        let last = plan.suffix.last().unwrap();
        assert_eq!((first.x, first.q), (last.x, last.q));
        assert!(nba.accepts_lasso(&plan.word()));
        let cyc = plan.word();
        assert!(cyc.cycle().iter().any(|s| s.contains("a")));
        assert!(cyc.cycle().iter().any(|s| s.contains("b")));
        let dec = decompose(&plan, &nba, &table);
        assert!(dec.suffix_len() >= 2);
    }

    #[test]
    fn tree_invariants_hold() {
        let ws = Workspace::new(
            p(0.0, 0.0),
            p(10.0, 10.0),
            vec![Obstacle::Circle { center: p(5.0, 5.0), radius: 1.5 }],
            vec![],
            1.0,
            0.5,
        )
        .unwrap();
        let env = EnvState::at(
            &[EnvObject::fixed("a1", "a", p(8.0, 8.0)), EnvObject::fixed("b1", "b", p(2.0, 8.0))],
            0.0,
        );
        let nba = translate(&parse("!b U a", &atoms(&["a", "b"])).unwrap());
        let table = ConstraintTable::new();
        let tree = grow_prefix_tree(&ws, &env, &nba, &table, p(1.0, 1.0), &params(500, 9)).unwrap();
        tree.check_invariants().unwrap();
        assert!(tree.num_nodes() >= tree.num_vertices());
    }

    #[test]
    fn constrained_labels() {
        let mut table = ConstraintTable::new();
        table.insert("nurse".into(), ["Room_A".to_string()].into());
        assert!(constraint_allows(&table, "nurse", Some("Room_A")));
        assert!(!constraint_allows(&table, "nurse", Some("Room_B")));
        assert!(!constraint_allows(&table, "nurse", None));
        assert!(constraint_allows(&table, "can", None));
    }
}
