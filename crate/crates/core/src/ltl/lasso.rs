//! Ultimately periodic words and direct LTL semantics over them.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::Formula;

/// A letter of the alphabet 2^AP: the set of propositions that hold.
pub type Symbol = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("lasso cycle must contain at least one symbol")]
    EmptyCycle,
    #[error("malformed symbol list near `{0}`")]
    Malformed(String),
}

/// The word `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoWord {
    prefix: Vec<Symbol>,
    cycle: Vec<Symbol>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Symbol>, cycle: Vec<Symbol>) -> Result<Self, WordError> {
        if cycle.is_empty() {
            return Err(WordError::EmptyCycle);
        }
        Ok(Self { prefix, cycle })
    }

    pub fn prefix(&self) -> &[Symbol] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[Symbol] {
        &self.cycle
    }

    /// Number of distinct positions: prefix plus one copy of the cycle.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Symbol at folded position `i < len()`.
    pub fn symbol(&self, i: usize) -> &Symbol {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[i - self.prefix.len()]
        }
    }

    /// Successor of a folded position; the last cycle position wraps back.
    pub fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }
}

/// Parses a whitespace- or `;`-separated list of `{a,b}` symbols; `{}` is the
/// empty symbol.
pub fn parse_symbols(text: &str) -> Result<Vec<Symbol>, WordError> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ';');
        if rest.is_empty() {
            break;
        }
        if !rest.starts_with('{') {
            return Err(WordError::Malformed(rest.chars().take(12).collect()));
        }
        let close = rest
            .find('}')
            .ok_or_else(|| WordError::Malformed(rest.chars().take(12).collect()))?;
        let inner = &rest[1..close];
        let sym: Symbol = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        out.push(sym);
        rest = &rest[close + 1..];
    }
    Ok(out)
}

fn fmt_symbol(s: &Symbol, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{{")?;
    for (i, a) in s.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{a}")?;
    }
    write!(f, "}}")
}

impl fmt::Display for LassoWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.prefix {
            fmt_symbol(s, f)?;
        }
        write!(f, "(")?;
        for s in &self.cycle {
            fmt_symbol(s, f)?;
        }
        write!(f, ")^w")
    }
}

/// Truth value of `formula` at position 0 of `word`.
///
/// Evaluates every subformula over all folded positions bottom-up; `U` is
/// the least and `R` the greatest fixpoint of its one-step unfolding.
pub fn eval_lasso(formula: &Formula, word: &LassoWord) -> bool {
    eval_positions(formula, word)[0]
}

fn eval_positions(f: &Formula, w: &LassoWord) -> Vec<bool> {
    let n = w.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(a) => (0..n).map(|i| w.symbol(i).contains(a)).collect(),
        Formula::Not(g) => eval_positions(g, w).into_iter().map(|v| !v).collect(),
        Formula::And(a, b) => zip_with(eval_positions(a, w), eval_positions(b, w), |x, y| x && y),
        Formula::Or(a, b) => zip_with(eval_positions(a, w), eval_positions(b, w), |x, y| x || y),
        Formula::Implies(a, b) => {
            zip_with(eval_positions(a, w), eval_positions(b, w), |x, y| !x || y)
        }
        Formula::Next(g) => {
            let inner = eval_positions(g, w);
            (0..n).map(|i| inner[w.succ(i)]).collect()
        }
        Formula::Until(a, b) => until(&eval_positions(a, w), &eval_positions(b, w), w),
        Formula::Release(a, b) => release(&eval_positions(a, w), &eval_positions(b, w), w),
        Formula::Eventually(g) => until(&vec![true; n], &eval_positions(g, w), w),
        Formula::Always(g) => release(&vec![false; n], &eval_positions(g, w), w),
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

fn until(lhs: &[bool], rhs: &[bool], w: &LassoWord) -> Vec<bool> {
    fixpoint(false, w, |i, next| rhs[i] || (lhs[i] && next))
}

fn release(lhs: &[bool], rhs: &[bool], w: &LassoWord) -> Vec<bool> {
    fixpoint(true, w, |i, next| rhs[i] && (lhs[i] || next))
}

fn fixpoint(init: bool, w: &LassoWord, step: impl Fn(usize, bool) -> bool) -> Vec<bool> {
    let n = w.len();
    let mut v = vec![init; n];
    loop {
        let mut changed = false;
        for i in (0..n).rev() {
            let nv = step(i, v[w.succ(i)]);
            if nv != v[i] {
                v[i] = nv;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}
