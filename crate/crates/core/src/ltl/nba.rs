use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use super::lasso::{LassoWord, Symbol};

pub type StateId = usize;

/// Conjunction of literals, stored as bitmasks over [`Nba::atoms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Guard {
    pub positive: u64,
    pub negative: u64,
}

impl Guard {
    pub const TRUE: Guard = Guard {
        positive: 0,
        negative: 0,
    };

    pub fn matches(&self, symbol_mask: u64) -> bool {
        symbol_mask & self.positive == self.positive && symbol_mask & self.negative == 0
    }

    pub fn is_satisfiable(&self) -> bool {
        self.positive & self.negative == 0
    }

    pub fn has_positive(&self) -> bool {
        self.positive != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: StateId,
    pub guard: Guard,
    pub to: StateId,
}

/// Nondeterministic Büchi automaton over 2^AP with literal-conjunction guards.
#[derive(Debug, Clone)]
pub struct Nba {
    atoms: Vec<String>,
    names: Vec<String>,
    initial: Vec<StateId>,
    accepting: Vec<bool>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
}

impl Nba {
    /// Builds an automaton from raw parts. Transitions referring to unknown
    /// states or carrying contradictory guards are rejected with a panic,
    /// since they indicate a construction bug rather than bad input.
    pub fn from_parts(
        atoms: Vec<String>,
        names: Vec<String>,
        initial: Vec<StateId>,
        accepting: Vec<bool>,
        transitions: Vec<Transition>,
    ) -> Self {
        assert!(atoms.len() <= 64, "at most 64 atomic propositions are supported");
        assert_eq!(names.len(), accepting.len());
        let n = names.len();
        let mut outgoing = vec![Vec::new(); n];
        for (i, t) in transitions.iter().enumerate() {
            assert!(t.from < n && t.to < n, "transition endpoint out of range");
            assert!(t.guard.is_satisfiable(), "unsatisfiable guard");
            outgoing[t.from].push(i);
        }
        assert!(initial.iter().all(|&q| q < n));
        Self {
            atoms,
            names,
            initial,
            accepting,
            transitions,
            outgoing,
        }
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.names[q]
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> Vec<StateId> {
        (0..self.num_states()).filter(|&q| self.accepting[q]).collect()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, q: StateId) -> impl Iterator<Item = &Transition> {
        self.outgoing[q].iter().map(move |&i| &self.transitions[i])
    }

    /// Bitmask of the automaton's atoms present in `symbol`; other names are ignored.
    pub fn encode<S: AsRef<str>>(&self, symbol: impl IntoIterator<Item = S>) -> u64 {
        let mut mask = 0;
        for s in symbol {
            if let Some(i) = self.atoms.iter().position(|a| a == s.as_ref()) {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Atom names set in `mask`.
    pub fn decode(&self, mask: u64) -> Vec<&str> {
        (0..self.atoms.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.atoms[i].as_str())
            .collect()
    }

    /// Successor states of `q` on a symbol, sorted and deduplicated.
    pub fn successors(&self, q: StateId, symbol_mask: u64) -> Vec<StateId> {
        let mut out: Vec<StateId> = self
            .outgoing(q)
            .filter(|t| t.guard.matches(symbol_mask))
            .map(|t| t.to)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// True if some transition `from -> to` is enabled by the symbol.
    pub fn has_transition(&self, from: StateId, to: StateId, symbol_mask: u64) -> bool {
        self.outgoing(from)
            .any(|t| t.to == to && t.guard.matches(symbol_mask))
    }

    /// Decides whether some run over `word` visits an accepting state
    /// infinitely often.
    ///
    /// The search runs on the graph of (state, folded position) pairs: a word
    /// is accepted iff an accepting pair reachable from an initial pair lies
    /// on a cycle.
    pub fn accepts_lasso(&self, word: &LassoWord) -> bool {
        let positions = word.len();
        let masks: Vec<u64> = (0..positions).map(|i| self.encode(word.symbol(i))).collect();
        let vertex = |q: StateId, p: usize| q * positions + p;
        let succ = |v: usize| -> Vec<usize> {
            let (q, p) = (v / positions, v % positions);
            let np = word.succ(p);
            self.successors(q, masks[p])
                .into_iter()
                .map(|nq| vertex(nq, np))
                .collect()
        };

        let total = self.num_states() * positions;
        let mut reached = vec![false; total];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &q in &self.initial {
            let v = vertex(q, 0);
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for w in succ(v) {
                if !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }

        (0..total)
            .filter(|&v| reached[v] && self.accepting[v / positions])
            .any(|v| {
                let mut seen = vec![false; total];
                let mut queue: VecDeque<usize> = succ(v).into();
                while let Some(w) = queue.pop_front() {
                    if w == v {
                        return true;
                    }
                    if !seen[w] {
                        seen[w] = true;
                        queue.extend(succ(w));
                    }
                }
                false
            })
    }

    /// Renders a guard as `a,!b`, or `true` when it has no literals.
    pub fn guard_text(&self, guard: &Guard) -> String {
        let mut lits = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if guard.positive & (1 << i) != 0 {
                lits.push(atom.clone());
            }
            if guard.negative & (1 << i) != 0 {
                lits.push(format!("!{atom}"));
            }
        }
        if lits.is_empty() {
            "true".into()
        } else {
            lits.join(",")
        }
    }

    /// Plain-text dump: a header, one `state` line per state and one
    /// `from -> to : literals` line per edge.
    pub fn dump(&self) -> String {
        self.to_string()
    }

    /// States reachable from `q` (inclusive).
    pub fn reachable_from(&self, q: StateId) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([q]);
        let mut stack = vec![q];
        while let Some(s) = stack.pop() {
            for t in self.outgoing(s) {
                if seen.insert(t.to) {
                    stack.push(t.to);
                }
            }
        }
        seen
    }

    /// True if some run can leave `q` and come back to it.
    pub fn on_cycle(&self, q: StateId) -> bool {
        self.outgoing(q).any(|t| self.reachable_from(t.to).contains(&q))
    }

    /// Replays a symbol sequence from the initial states, returning the set of
    /// states reachable after each prefix (subset construction).
    pub fn run_subsets(&self, symbols: &[Symbol]) -> Vec<BTreeSet<StateId>> {
        let mut current: BTreeSet<StateId> = self.initial.iter().copied().collect();
        let mut out = vec![current.clone()];
        for s in symbols {
            let m = self.encode(s);
            current = current
                .iter()
                .flat_map(|&q| self.successors(q, m))
                .collect();
            out.push(current.clone());
        }
        out
    }
}

impl fmt::Display for Nba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "atoms {}", self.atoms.join(","))?;
        writeln!(f, "states {}", self.num_states())?;
        for q in 0..self.num_states() {
            write!(f, "state {q} {}", self.names[q])?;
            if self.initial.contains(&q) {
                write!(f, " initial")?;
            }
            if self.accepting[q] {
                write!(f, " accepting")?;
            }
            writeln!(f)?;
        }
        for t in &self.transitions {
            writeln!(f, "{} -> {} : {}", t.from, t.to, self.guard_text(&t.guard))?;
        }
        Ok(())
    }
}
