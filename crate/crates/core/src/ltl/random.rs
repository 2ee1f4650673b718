//! Random formulas and lasso words for differential testing of the
//! translation against [`eval_lasso`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lasso::{eval_lasso, LassoWord, Symbol};
use super::{translate, Formula};
use crate::par::{self, Exec};

/// Random formula of depth at most `max_depth` over `atoms`.
pub fn random_formula<R: Rng>(rng: &mut R, max_depth: usize, atoms: &[&str]) -> Formula {
    if max_depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(atoms[rng.random_range(0..atoms.len())]),
        };
    }
    let d = max_depth - 1;
    match rng.random_range(0..10) {
        0 => Formula::not(random_formula(rng, d, atoms)),
        1 => Formula::next(random_formula(rng, d, atoms)),
        2 => Formula::eventually(random_formula(rng, d, atoms)),
        3 => Formula::always(random_formula(rng, d, atoms)),
        4 => Formula::and(random_formula(rng, d, atoms), random_formula(rng, d, atoms)),
        5 => Formula::or(random_formula(rng, d, atoms), random_formula(rng, d, atoms)),
        6 => Formula::implies(random_formula(rng, d, atoms), random_formula(rng, d, atoms)),
        7 => Formula::until(random_formula(rng, d, atoms), random_formula(rng, d, atoms)),
        8 => Formula::release(random_formula(rng, d, atoms), random_formula(rng, d, atoms)),
        _ => Formula::atom(atoms[rng.random_range(0..atoms.len())]),
    }
}

pub fn random_symbol<R: Rng>(rng: &mut R, atoms: &[&str]) -> Symbol {
    atoms
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .map(|a| a.to_string())
        .collect()
}

/// Lasso with a prefix of at most `max_prefix` and a cycle of 1..=`max_cycle` symbols.
pub fn random_lasso<R: Rng>(
    rng: &mut R,
    atoms: &[&str],
    max_prefix: usize,
    max_cycle: usize,
) -> LassoWord {
    let p = rng.random_range(0..=max_prefix);
    let c = rng.random_range(1..=max_cycle.max(1));
    let prefix = (0..p).map(|_| random_symbol(rng, atoms)).collect();
    let cycle = (0..c).map(|_| random_symbol(rng, atoms)).collect();
    LassoWord::new(prefix, cycle).expect("cycle is nonempty")
}

#[derive(Debug, Clone)]
pub struct CrossCheckConfig {
    pub formulas: usize,
    pub lassos_per_formula: usize,
    pub max_depth: usize,
    pub atoms: Vec<String>,
    pub max_prefix: usize,
    pub max_cycle: usize,
    pub seed: u64,
}

impl Default for CrossCheckConfig {
    fn default() -> Self {
        Self {
            formulas: 500,
            lassos_per_formula: 20,
            max_depth: 4,
            atoms: vec!["a".into(), "b".into(), "c".into()],
            max_prefix: 4,
            max_cycle: 3,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Disagreement {
    pub formula: Formula,
    pub word: LassoWord,
    pub automaton: bool,
    pub oracle: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CrossCheckReport {
    pub checks: usize,
    pub accepted: usize,
    pub disagreements: Vec<Disagreement>,
}

/// Compares automaton acceptance with direct evaluation on random inputs.
///
/// Formula `i` draws from its own generator seeded with `seed + i`, so the
/// report is identical for sequential and parallel execution.
pub fn cross_check(cfg: &CrossCheckConfig, exec: Exec) -> CrossCheckReport {
    let atoms: Vec<&str> = cfg.atoms.iter().map(String::as_str).collect();
    let indices: Vec<u64> = (0..cfg.formulas as u64).collect();
    let per_formula = par::map(exec, &indices, |&i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i));
        let f = random_formula(&mut rng, cfg.max_depth, &atoms);
        let nba = translate(&f);
        let mut report = CrossCheckReport::default();
        for _ in 0..cfg.lassos_per_formula {
            let w = random_lasso(&mut rng, &atoms, cfg.max_prefix, cfg.max_cycle);
            let automaton = nba.accepts_lasso(&w);
            let oracle = eval_lasso(&f, &w);
            report.checks += 1;
            report.accepted += automaton as usize;
            if automaton != oracle {
                report.disagreements.push(Disagreement {
                    formula: f.clone(),
                    word: w,
                    automaton,
                    oracle,
                });
            }
        }
        report
    });
    per_formula
        .into_iter()
        .fold(CrossCheckReport::default(), |mut acc, r| {
            acc.checks += r.checks;
            acc.accepted += r.accepted;
            acc.disagreements.extend(r.disagreements);
            acc
        })
}
