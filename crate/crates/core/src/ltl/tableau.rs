//! LTL to Büchi translation: on-the-fly tableau into a generalized Büchi
//! automaton, counter degeneralization, then trimming of states that cannot
//! reach an accepting cycle.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::nba::{Guard, Nba, StateId, Transition};
use super::Formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    True,
    False,
    Lit { atom: usize, positive: bool },
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
}

/// Interned subformulas of an NNF formula.
struct Closure {
    kinds: Vec<Kind>,
    index: HashMap<Formula, usize>,
    atoms: Vec<String>,
    /// Until subformulas in pre-order of first occurrence.
    untils: Vec<usize>,
}

impl Closure {
    fn new(root: &Formula) -> (Self, usize) {
        let mut c = Closure {
            kinds: Vec::new(),
            index: HashMap::new(),
            atoms: root.atoms().into_iter().collect(),
            untils: Vec::new(),
        };
        let mut preorder_untils = Vec::new();
        collect_untils(root, &mut preorder_untils);
        let id = c.intern(root);
        for u in preorder_untils {
            let uid = c.index[&u];
            if !c.untils.contains(&uid) {
                c.untils.push(uid);
            }
        }
        (c, id)
    }

    fn atom(&self, name: &str) -> usize {
        self.atoms.iter().position(|a| a == name).expect("atom in closure")
    }

    fn intern(&mut self, f: &Formula) -> usize {
        if let Some(&id) = self.index.get(f) {
            return id;
        }
        let kind = match f {
            Formula::True => Kind::True,
            Formula::False => Kind::False,
            Formula::Atom(a) => Kind::Lit {
                atom: self.atom(a),
                positive: true,
            },
            Formula::Not(g) => match &**g {
                Formula::Atom(a) => Kind::Lit {
                    atom: self.atom(a),
                    positive: false,
                },
                _ => unreachable!("input must be in negation normal form"),
            },
            Formula::And(a, b) => Kind::And(self.intern(a), self.intern(b)),
            Formula::Or(a, b) => Kind::Or(self.intern(a), self.intern(b)),
            Formula::Next(a) => Kind::Next(self.intern(a)),
            Formula::Until(a, b) => Kind::Until(self.intern(a), self.intern(b)),
            Formula::Release(a, b) => Kind::Release(self.intern(a), self.intern(b)),
            Formula::Implies(..) | Formula::Eventually(_) | Formula::Always(_) => {
                unreachable!("input must be in negation normal form")
            }
        };
        let id = self.kinds.len();
        self.kinds.push(kind);
        self.index.insert(f.clone(), id);
        id
    }
}

fn collect_untils(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::Until(a, b) => {
            out.push(f.clone());
            collect_untils(a, out);
            collect_untils(b, out);
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Release(a, b) | Formula::Implies(a, b) => {
            collect_untils(a, out);
            collect_untils(b, out);
        }
        Formula::Not(g) | Formula::Next(g) | Formula::Eventually(g) | Formula::Always(g) => {
            collect_untils(g, out)
        }
        Formula::True | Formula::False | Formula::Atom(_) => {}
    }
}

const INIT: usize = usize::MAX;

#[derive(Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

struct TableauNode {
    incoming: BTreeSet<usize>,
    old: BTreeSet<usize>,
}

fn expand(closure: &Closure, root: usize) -> Vec<TableauNode> {
    let mut done: Vec<TableauNode> = Vec::new();
    let mut by_key: HashMap<(BTreeSet<usize>, BTreeSet<usize>), usize> = HashMap::new();
    let mut stack = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];

    while let Some(mut node) = stack.pop() {
        let Some(f) = node.new.pop_first() else {
            let key = (node.old.clone(), node.next.clone());
            if let Some(&id) = by_key.get(&key) {
                done[id].incoming.extend(node.incoming);
            } else {
                let id = done.len();
                by_key.insert(key, id);
                stack.push(Pending {
                    incoming: BTreeSet::from([id]),
                    new: node.next.clone(),
                    old: BTreeSet::new(),
                    next: BTreeSet::new(),
                });
                done.push(TableauNode {
                    incoming: node.incoming,
                    old: node.old,
                });
            }
            continue;
        };
        if node.old.contains(&f) {
            stack.push(node);
            continue;
        }
        match closure.kinds[f] {
            Kind::False => {}
            Kind::True => {
                node.old.insert(f);
                stack.push(node);
            }
            Kind::Lit { atom, positive } => {
                let contradicts = node.old.iter().any(|&g| {
                    closure.kinds[g]
                        == Kind::Lit {
                            atom,
                            positive: !positive,
                        }
                });
                if !contradicts {
                    node.old.insert(f);
                    stack.push(node);
                }
            }
            Kind::And(a, b) => {
                for g in [a, b] {
                    if !node.old.contains(&g) {
                        node.new.insert(g);
                    }
                }
                node.old.insert(f);
                stack.push(node);
            }
            Kind::Next(a) => {
                node.old.insert(f);
                node.next.insert(a);
                stack.push(node);
            }
            Kind::Or(a, b) | Kind::Until(a, b) | Kind::Release(a, b) => {
                let (new1, next1, new2): (Vec<usize>, Vec<usize>, Vec<usize>) =
                    match closure.kinds[f] {
                        Kind::Or(..) => (vec![a], vec![], vec![b]),
                        Kind::Until(..) => (vec![a], vec![f], vec![b]),
                        _ => (vec![b], vec![f], vec![a, b]),
                    };
                let mut n1 = node.clone();
                let mut n2 = node;
                for n in [&mut n1, &mut n2] {
                    n.old.insert(f);
                }
                n1.new.extend(new1.into_iter().filter(|g| !n1.old.contains(g)));
                n1.next.extend(next1);
                n2.new.extend(new2.into_iter().filter(|g| !n2.old.contains(g)));
                stack.push(n2);
                stack.push(n1);
            }
        }
    }
    done
}

fn node_guard(closure: &Closure, node: &TableauNode) -> Guard {
    let mut g = Guard::default();
    for &f in &node.old {
        if let Kind::Lit { atom, positive } = closure.kinds[f] {
            if positive {
                g.positive |= 1 << atom;
            } else {
                g.negative |= 1 << atom;
            }
        }
    }
    g
}

/// Compiles `formula` into a Büchi automaton accepting exactly its models.
///
/// The result is trimmed: every state lies on a path from an initial state to
/// an accepting cycle, so the accepting set is empty iff the formula is
/// unsatisfiable.
///
/// Panics if the formula mentions more than 64 distinct atoms.
pub fn translate(formula: &Formula) -> Nba {
    let nnf = formula.to_nnf();
    let (closure, root) = Closure::new(&nnf);
    assert!(closure.atoms.len() <= 64, "at most 64 atomic propositions are supported");
    let nodes = expand(&closure, root);

    // Acceptance sets: for each `a U b`, nodes that do not promise it or already fulfil it.
    let acceptance: Vec<Vec<bool>> = closure
        .untils
        .iter()
        .map(|&u| {
            let Kind::Until(_, b) = closure.kinds[u] else {
                unreachable!()
            };
            nodes
                .iter()
                .map(|n| !n.old.contains(&u) || n.old.contains(&b))
                .collect()
        })
        .collect();
    let k = acceptance.len();

    let guards: Vec<Guard> = nodes.iter().map(|n| node_guard(&closure, n)).collect();
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut init_succ = Vec::new();
    for (m, node) in nodes.iter().enumerate() {
        for &src in &node.incoming {
            if src == INIT {
                init_succ.push(m);
            } else {
                successors[src].push(m);
            }
        }
    }

    // Degeneralize with a round-robin counter over the acceptance sets,
    // exploring only reachable (node, counter) pairs.
    let mut ids: BTreeMap<(usize, usize), StateId> = BTreeMap::new();
    let mut names = vec!["init".to_string()];
    let mut accepting = vec![false];
    let mut transitions = Vec::new();
    let mut queue = VecDeque::new();
    let mut state_of = |node: usize,
                        counter: usize,
                        names: &mut Vec<String>,
                        accepting: &mut Vec<bool>,
                        queue: &mut VecDeque<(usize, usize)>|
     -> StateId {
        *ids.entry((node, counter)).or_insert_with(|| {
            let id = names.len();
            names.push(format!("n{node}.{counter}"));
            accepting.push(if k == 0 {
                true
            } else {
                counter == 0 && acceptance[0][node]
            });
            queue.push_back((node, counter));
            id
        })
    };
    for &m in &init_succ {
        let to = state_of(m, 0, &mut names, &mut accepting, &mut queue);
        transitions.push(Transition {
            from: 0,
            guard: guards[m],
            to,
        });
    }
    while let Some((n, i)) = queue.pop_front() {
        let from = state_of(n, i, &mut names, &mut accepting, &mut queue);
        let j = if k > 0 && acceptance[i][n] { (i + 1) % k } else { i };
        for &m in &successors[n] {
            let to = state_of(m, j, &mut names, &mut accepting, &mut queue);
            transitions.push(Transition {
                from,
                guard: guards[m],
                to,
            });
        }
    }
    transitions.sort_by_key(|t| (t.from, t.to, t.guard));
    transitions.dedup();

    trim(closure.atoms, names, accepting, transitions)
}

/// Drops states that cannot reach an accepting cycle and renumbers the rest.
fn trim(
    atoms: Vec<String>,
    names: Vec<String>,
    accepting: Vec<bool>,
    transitions: Vec<Transition>,
) -> Nba {
    let n = names.len();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for t in &transitions {
        succ[t.from].push(t.to);
        pred[t.to].push(t.from);
    }
    let reaches = |start: &[usize], adj: &Vec<Vec<usize>>| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = start.to_vec();
        while let Some(s) = stack.pop() {
            if !seen[s] {
                seen[s] = true;
                stack.extend(adj[s].iter().copied());
            }
        }
        seen
    };
    let on_cycle: Vec<usize> = (0..n)
        .filter(|&q| accepting[q])
        .filter(|&q| reaches(&succ[q], &succ)[q])
        .collect();
    let live = reaches(&on_cycle, &pred);
    if !live[0] {
        return Nba::from_parts(atoms, vec!["init".into()], vec![0], vec![false], Vec::new());
    }
    let mut remap = vec![usize::MAX; n];
    let mut new_names = Vec::new();
    let mut new_accepting = Vec::new();
    for q in (0..n).filter(|&q| live[q]) {
        remap[q] = new_names.len();
        new_names.push(names[q].clone());
        new_accepting.push(accepting[q]);
    }
    let new_transitions = transitions
        .into_iter()
        .filter(|t| live[t.from] && live[t.to])
        .map(|t| Transition {
            from: remap[t.from],
            guard: t.guard,
            to: remap[t.to],
        })
        .collect();
    Nba::from_parts(atoms, new_names, vec![0], new_accepting, new_transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::lasso::{eval_lasso, LassoWord, Symbol};
    use crate::ltl::parse_unchecked;

    fn sym(atoms: &[&str]) -> Symbol {
        atoms.iter().map(|s| s.to_string()).collect()
    }

    fn word(prefix: &[&[&str]], cycle: &[&[&str]]) -> LassoWord {
        LassoWord::new(
            prefix.iter().map(|s| sym(s)).collect(),
            cycle.iter().map(|s| sym(s)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eventually_a() {
        let nba = translate(&parse_unchecked("F a").unwrap());
        assert!(nba.accepts_lasso(&word(&[], &[&["a"]])));
        assert!(!nba.accepts_lasso(&word(&[], &[&[]])));
        assert!(nba.accepts_lasso(&word(&[&[], &[]], &[&["a"], &[]])));
    }

    #[test]
    fn tautology_accepts_all() {
        let nba = translate(&Formula::True);
        for w in [word(&[], &[&[]]), word(&[&["a"]], &[&["b"], &[]])] {
            assert!(nba.accepts_lasso(&w));
        }
    }

    #[test]
    fn recurrence() {
        let f = parse_unchecked("[]<> a").unwrap();
        let nba = translate(&f);
        let alt = word(&[], &[&["a"], &[]]);
        let never = word(&[], &[&[]]);
        assert!(nba.accepts_lasso(&alt));
        assert!(!nba.accepts_lasso(&never));
        assert_eq!(nba.accepts_lasso(&alt), eval_lasso(&f, &alt));
        assert_eq!(nba.accepts_lasso(&never), eval_lasso(&f, &never));
    }

    #[test]
    fn unsatisfiable_has_no_accepting_states() {
        for text in ["a && !a", "false", "G a && F !a", "X false"] {
            let nba = translate(&parse_unchecked(text).unwrap());
            assert!(nba.accepting_states().is_empty(), "{text}");
        }
        for text in ["a", "true", "G F a && G F !a", "a U b"] {
            let nba = translate(&parse_unchecked(text).unwrap());
            assert!(!nba.accepting_states().is_empty(), "{text}");
        }
    }

    #[test]
    fn guards_are_satisfiable() {
        let nba = translate(&parse_unchecked("G (a -> X (!a U b)) && F a").unwrap());
        assert!(nba.transitions().iter().all(|t| t.guard.is_satisfiable()));
    }

    #[test]
    fn acceptance_order_follows_formula() {
        let f = parse_unchecked("[]<> n && []<> d && []<> c && []<> n").unwrap();
        let (closure, _) = Closure::new(&f.to_nnf());
        let names: Vec<String> = closure
            .untils
            .iter()
            .map(|&u| match closure.kinds[u] {
                Kind::Until(_, b) => match closure.kinds[b] {
                    Kind::Lit { atom, .. } => closure.atoms[atom].clone(),
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(names, vec!["n", "d", "c"]);
    }
}
