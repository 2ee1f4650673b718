//! Linear temporal logic: syntax, parsing, Büchi translation and lasso semantics.

mod formula;
mod lasso;
mod nba;
mod parser;
pub mod random;
mod tableau;

pub use formula::Formula;
pub use lasso::{eval_lasso, parse_symbols, LassoWord, Symbol, WordError};
pub use nba::{Guard, Nba, StateId, Transition};
pub use parser::{parse, parse_constrained, parse_unchecked, ConstraintOccurrence, ParseError};
pub use tableau::translate;
