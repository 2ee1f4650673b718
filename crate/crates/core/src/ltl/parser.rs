//! Recursive-descent parser for the textual LTL grammar.
//!
//! Precedence, tightest first: unary `! X F G` (also `<>`, `[]` and the
//! symbols `¬ ○ ◇ □`), then `U` and `R` (right associative), then `&&`,
//! then `||`, then `->` (right associative). Atoms may carry a region
//! constraint `class^{R1 ∨ R2}` when parsing constrained tasks.

use std::collections::BTreeSet;

use thiserror::Error;

use super::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// `position` is the 1-based index of the offending token.
    #[error("syntax error at token {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Next,
    Until,
    Release,
    Eventually,
    Always,
    LParen,
    RParen,
    Caret,
    LBrace,
    RBrace,
    Comma,
    Invalid(char),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Not => "`!`".into(),
            Tok::And => "`&&`".into(),
            Tok::Or => "`||`".into(),
            Tok::Implies => "`->`".into(),
            Tok::Next => "`X`".into(),
            Tok::Until => "`U`".into(),
            Tok::Release => "`R`".into(),
            Tok::Eventually => "`F`".into(),
            Tok::Always => "`G`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Invalid(c) => format!("invalid character `{c}`"),
        }
    }
}

fn lex(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let peek = chars.get(i + 1).copied();
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (tok, len) = match (c, peek) {
            ('&', Some('&')) => (Tok::And, 2),
            ('|', Some('|')) => (Tok::Or, 2),
            ('-', Some('>')) => (Tok::Implies, 2),
            ('<', Some('>')) => (Tok::Eventually, 2),
            ('[', Some(']')) => (Tok::Always, 2),
            ('&', _) | ('∧', _) => (Tok::And, 1),
            ('|', _) | ('∨', _) => (Tok::Or, 1),
            ('!', _) | ('¬', _) => (Tok::Not, 1),
            ('→', _) => (Tok::Implies, 1),
            ('○', _) | ('◯', _) => (Tok::Next, 1),
            ('◇', _) | ('◊', _) | ('♢', _) => (Tok::Eventually, 1),
            ('□', _) | ('◻', _) => (Tok::Always, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('^', _) => (Tok::Caret, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            (c, _) if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[start..j].iter().collect();
                let tok = match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    _ => Tok::Ident(word),
                };
                (tok, j - start)
            }
            (c, _) => (Tok::Invalid(c), 1),
        };
        toks.push(tok);
        i += len;
    }
    toks
}

/// One `class^{regions}` occurrence found while parsing a constrained task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintOccurrence {
    pub class_name: String,
    pub regions: Vec<String>,
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    alphabet: Option<&'a BTreeSet<String>>,
    allow_constraints: bool,
    constraints: Vec<ConstraintOccurrence>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn error(&self, expected: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => t.describe(),
            None => "end of input".into(),
        };
        ParseError::Syntax {
            position: self.pos + 1,
            expected: expected.into(),
            found,
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.binary_temporal()?;
        while self.eat(&Tok::And) {
            let rhs = self.binary_temporal()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn binary_temporal(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            let rhs = self.binary_temporal()?;
            return Ok(Formula::until(lhs, rhs));
        }
        if self.eat(&Tok::Release) {
            let rhs = self.binary_temporal()?;
            return Ok(Formula::release(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let wrap: fn(Formula) -> Formula = match self.peek() {
            Some(Tok::Not) => Formula::not,
            Some(Tok::Next) => Formula::next,
            Some(Tok::Eventually) => Formula::eventually,
            Some(Tok::Always) => Formula::always,
            _ => return self.primary(),
        };
        self.pos += 1;
        Ok(wrap(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        const EXPECTED: &str = "proposition, constant, unary operator or `(`";
        match self.peek().cloned() {
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Formula::False)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.implication()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("`)`"));
                }
                Ok(f)
            }
            Some(Tok::Ident(name)) => {
                if let Some(alphabet) = self.alphabet {
                    if !alphabet.contains(&name) {
                        return Err(ParseError::UnknownProposition(name));
                    }
                }
                self.pos += 1;
                if self.allow_constraints && self.eat(&Tok::Caret) {
                    let regions = self.constraint_regions()?;
                    self.constraints.push(ConstraintOccurrence {
                        class_name: name.clone(),
                        regions,
                    });
                }
                Ok(Formula::Atom(name))
            }
            _ => Err(self.error(EXPECTED)),
        }
    }

    fn region_name(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(r)) => {
                self.pos += 1;
                Ok(r)
            }
            _ => Err(self.error("region name")),
        }
    }

    fn constraint_regions(&mut self) -> Result<Vec<String>, ParseError> {
        if !self.eat(&Tok::LBrace) {
            return Ok(vec![self.region_name()?]);
        }
        let mut regions = vec![self.region_name()?];
        loop {
            if self.eat(&Tok::RBrace) {
                return Ok(regions);
            }
            if !(self.eat(&Tok::Or) || self.eat(&Tok::Comma)) {
                return Err(self.error("`∨`, `,` or `}`"));
            }
            regions.push(self.region_name()?);
        }
    }
}

fn run_parser(
    text: &str,
    alphabet: Option<&BTreeSet<String>>,
    allow_constraints: bool,
) -> Result<(Formula, Vec<ConstraintOccurrence>), ParseError> {
    let mut p = Parser {
        toks: lex(text),
        pos: 0,
        alphabet,
        allow_constraints,
        constraints: Vec::new(),
    };
    let f = p.implication()?;
    if p.pos != p.toks.len() {
        return Err(p.error("binary operator or end of input"));
    }
    Ok((f, p.constraints))
}

/// Parses `text`, rejecting atoms outside `alphabet`.
pub fn parse(text: &str, alphabet: &BTreeSet<String>) -> Result<Formula, ParseError> {
    run_parser(text, Some(alphabet), false).map(|(f, _)| f)
}

/// Parses `text` accepting any identifier as an atom.
pub fn parse_unchecked(text: &str) -> Result<Formula, ParseError> {
    run_parser(text, None, false).map(|(f, _)| f)
}

/// Parses a task whose atoms may carry `^{...}` region constraints. The
/// returned formula has the constraints stripped.
pub fn parse_constrained(
    text: &str,
) -> Result<(Formula, Vec<ConstraintOccurrence>), ParseError> {
    run_parser(text, None, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> BTreeSet<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn always_eventually() {
        let f = parse("[]<> a", &ab()).unwrap();
        assert_eq!(f, Formula::always(Formula::eventually(Formula::atom("a"))));
    }

    #[test]
    fn until_with_parenthesized_conjunction() {
        let f = parse("a U (b && !c)", &ab()).unwrap();
        let expected = Formula::until(
            Formula::atom("a"),
            Formula::and(Formula::atom("b"), Formula::not(Formula::atom("c"))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn double_until_is_rejected_at_third_token() {
        match parse("a U U b", &ab()) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_atom() {
        assert_eq!(
            parse("a && zz", &ab()),
            Err(ParseError::UnknownProposition("zz".into()))
        );
    }

    #[test]
    fn empty_text_is_a_syntax_error() {
        assert!(matches!(
            parse("   ", &ab()),
            Err(ParseError::Syntax { position: 1, .. })
        ));
    }

    #[test]
    fn precedence_chain() {
        // ! binds tighter than U, U tighter than &&, && tighter than ||, || tighter than ->
        let f = parse("!a U b && c || a -> b", &ab()).unwrap();
        let a = || Formula::atom("a");
        let b = || Formula::atom("b");
        let c = || Formula::atom("c");
        let expected = Formula::implies(
            Formula::or(Formula::and(Formula::until(Formula::not(a()), b()), c()), a()),
            b(),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn until_and_release_are_right_associative() {
        let f = parse("a U b R c", &ab()).unwrap();
        let expected = Formula::until(
            Formula::atom("a"),
            Formula::release(Formula::atom("b"), Formula::atom("c")),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn unicode_operators() {
        let f = parse_unchecked("□◇a ∧ ¬○b").unwrap();
        let expected = Formula::and(
            Formula::always(Formula::eventually(Formula::atom("a"))),
            Formula::not(Formula::next(Formula::atom("b"))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn identifiers_may_start_with_operator_letters() {
        let f = parse_unchecked("Room_A U Fx").unwrap();
        assert_eq!(f, Formula::until(Formula::atom("Room_A"), Formula::atom("Fx")));
    }

    #[test]
    fn constrained_atoms() {
        let (f, occ) = parse_constrained("◇ human^{Room_B ∨ Room_A} && [] nurse^Room_A").unwrap();
        assert_eq!(f.atoms().len(), 2);
        assert_eq!(occ.len(), 2);
        assert_eq!(occ[0].regions, vec!["Room_B", "Room_A"]);
        assert_eq!(occ[1].class_name, "nurse");
        assert_eq!(occ[1].regions, vec!["Room_A"]);
        assert!(parse_unchecked("a^{R}").is_err());
    }

    #[test]
    fn trailing_garbage() {
        assert!(matches!(
            parse("a b", &ab()),
            Err(ParseError::Syntax { position: 2, .. })
        ));
        assert!(matches!(
            parse("(a", &ab()),
            Err(ParseError::Syntax { position: 3, .. })
        ));
    }
}
