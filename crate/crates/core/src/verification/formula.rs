//! Propositional formulas: AST, infix and DIMACS parsing, evaluation.
//!
//! Infix grammar (whitespace insensitive, `!` binds tightest, then `&`, then `|`):
//!
//! ```text
//! expr  := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '!' unary | atom
//! atom  := 'x' INDEX | '(' expr ')'        INDEX >= 1
//! ```
//!
//! DIMACS CNF input is recognised when the first significant line starts with
//! `c` or `p`: comment lines `c ...`, one header `p cnf <vars> <clauses>`, then
//! literals with each clause terminated by `0` (clauses may span lines).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    /// 1-based variable index.
    Var(u32),
    Not(Box<Formula>),
    /// Conjunction; empty is true.
    And(Vec<Formula>),
    /// Disjunction; empty is false.
    Or(Vec<Formula>),
}

impl Formula {
    pub fn var(i: u32) -> Self {
        Formula::Var(i)
    }

    pub fn negate(self) -> Self {
        Formula::Not(Box::new(self))
    }

    fn max_var(&self) -> u32 {
        match self {
            Formula::Var(i) => *i,
            Formula::Not(f) => f.max_var(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::max_var).max().unwrap_or(0),
        }
    }

    /// Truth value under `assignment`, where variable `j` reads bit `j - 1`.
    pub fn eval(&self, assignment: u64) -> bool {
        match self {
            Formula::Var(i) => assignment >> (i - 1) & 1 == 1,
            Formula::Not(f) => !f.eval(assignment),
            Formula::And(fs) => fs.iter().all(|f| f.eval(assignment)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(assignment)),
        }
    }

    /// Truth values of the 64 assignments `64*block .. 64*block + 63`, bit
    /// `j` of the result belonging to assignment `64*block + j`.
    pub fn eval_block(&self, block: u64) -> u64 {
        match self {
            Formula::Var(i) => var_block(*i, block),
            Formula::Not(f) => !f.eval_block(block),
            Formula::And(fs) => fs.iter().fold(!0, |acc, f| {
                if acc == 0 {
                    0
                } else {
                    acc & f.eval_block(block)
                }
            }),
            Formula::Or(fs) => fs.iter().fold(0, |acc, f| {
                if acc == !0 {
                    !0
                } else {
                    acc | f.eval_block(block)
                }
            }),
        }
    }
}

/// Bit patterns of the six low variables within a 64-assignment block.
const LOW_VAR_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

fn var_block(i: u32, block: u64) -> u64 {
    let bit = i - 1;
    if bit < 6 {
        LOW_VAR_PATTERNS[bit as usize]
    } else if (block << 6) >> bit & 1 == 1 {
        !0
    } else {
        0
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, fs: &[Formula], op: &str, empty: &str) -> fmt::Result {
            if fs.is_empty() {
                return write!(f, "{empty}");
            }
            write!(f, "(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, ")")
        }
        match self {
            Formula::Var(i) => write!(f, "x{i}"),
            Formula::Not(g) => write!(f, "!{g}"),
            // constants have no infix syntax; render them as x1-tautology forms
            Formula::And(fs) => join(f, fs, "&", "(x1 | !x1)"),
            Formula::Or(fs) => join(f, fs, "|", "(x1 & !x1)"),
        }
    }
}

/// A formula over variables `x1 .. x{num_vars}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropositionalFormula {
    root: Formula,
    num_vars: u32,
}

impl PropositionalFormula {
    /// `num_vars` must cover every variable in `root` and be at least 1.
    pub fn new(root: Formula, num_vars: u32) -> Result<Self, ParseError> {
        let max = root.max_var();
        if num_vars == 0 || max > num_vars || contains_var_zero(&root) {
            return Err(ParseError::new(
                0,
                0,
                format!("variables must lie in 1..={num_vars} (found x{max})"),
            ));
        }
        Ok(Self { root, num_vars })
    }

    /// Uses the largest variable index as the variable count.
    pub fn from_root(root: Formula) -> Result<Self, ParseError> {
        let n = root.max_var().max(1);
        Self::new(root, n)
    }

    pub fn root(&self) -> &Formula {
        &self.root
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn eval(&self, assignment: u64) -> bool {
        self.root.eval(assignment)
    }

    pub fn negated(&self) -> Self {
        Self {
            root: self.root.clone().negate(),
            num_vars: self.num_vars,
        }
    }
}

fn contains_var_zero(f: &Formula) -> bool {
    match f {
        Formula::Var(i) => *i == 0,
        Formula::Not(g) => contains_var_zero(g),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().any(contains_var_zero),
    }
}

impl fmt::Display for PropositionalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Syntax error with a 1-based line and column (0 when not positional).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Parses infix or DIMACS CNF text.
pub fn parse_formula(text: &str) -> Result<PropositionalFormula, ParseError> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| ParseError::new(1, 1, "empty input"))?;
    let head = first.split_whitespace().next().unwrap_or("");
    if head == "c" || head == "p" {
        parse_dimacs(text)
    } else {
        InfixParser::new(text).parse()
    }
}

pub fn parse_dimacs(text: &str) -> Result<PropositionalFormula, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Formula> = Vec::new();
    let mut current: Vec<Formula> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::new(line_no, 1, "duplicate problem line"));
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(ParseError::new(line_no, 1, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = parts[2]
                .parse::<u32>()
                .map_err(|_| ParseError::new(line_no, 1, "bad variable count"))?;
            let count = parts[3]
                .parse::<usize>()
                .map_err(|_| ParseError::new(line_no, 1, "bad clause count"))?;
            if vars == 0 {
                return Err(ParseError::new(line_no, 1, "variable count must be positive"));
            }
            header = Some((vars, count));
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(ParseError::new(line_no, 1, "clause before `p cnf` header"));
        };
        let mut col = 0;
        for tok in line.split_whitespace() {
            col = line[col..].find(tok).map_or(col, |p| col + p) + tok.len();
            let column = col - tok.len() + 1;
            let lit: i64 = tok
                .parse()
                .map_err(|_| ParseError::new(line_no, column, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                if tok.starts_with('-') {
                    return Err(ParseError::new(line_no, column, "variable index 0"));
                }
                clauses.push(Formula::Or(std::mem::take(&mut current)));
                continue;
            }
            let v = lit.unsigned_abs();
            if v > u64::from(vars) {
                return Err(ParseError::new(
                    line_no,
                    column,
                    format!("variable {v} exceeds declared count {vars}"),
                ));
            }
            let atom = Formula::Var(v as u32);
            current.push(if lit < 0 { atom.negate() } else { atom });
        }
    }
    let Some((vars, count)) = header else {
        return Err(ParseError::new(1, 1, "missing `p cnf` header"));
    };
    if !current.is_empty() {
        return Err(ParseError::new(text.lines().count(), 1, "last clause is not terminated by 0"));
    }
    if clauses.len() != count {
        return Err(ParseError::new(
            0,
            0,
            format!("header declares {count} clauses, found {}", clauses.len()),
        ));
    }
    PropositionalFormula::new(Formula::And(clauses), vars)
}

/// Renders a CNF formula (an `And` of `Or`s of literals) as DIMACS.
pub fn to_dimacs(formula: &PropositionalFormula) -> Option<String> {
    let Formula::And(clauses) = formula.root() else {
        return None;
    };
    let mut out = format!("p cnf {} {}\n", formula.num_vars(), clauses.len());
    for clause in clauses {
        let Formula::Or(lits) = clause else {
            return None;
        };
        for lit in lits {
            match lit {
                Formula::Var(i) => out.push_str(&format!("{i} ")),
                Formula::Not(inner) => match **inner {
                    Formula::Var(i) => out.push_str(&format!("-{i} ")),
                    _ => return None,
                },
                _ => return None,
            }
        }
        out.push_str("0\n");
    }
    Some(out)
}

struct InfixParser {
    chars: Vec<(usize, usize, char)>,
    pos: usize,
}

impl InfixParser {
    fn new(text: &str) -> Self {
        let mut chars = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            for (col, c) in line.chars().enumerate() {
                chars.push((ln + 1, col + 1, c));
            }
        }
        Self { chars, pos: 0 }
    }

    fn parse(mut self) -> Result<PropositionalFormula, ParseError> {
        let root = self.expr()?;
        self.skip_ws();
        if let Some(&(l, c, ch)) = self.chars.get(self.pos) {
            return Err(ParseError::new(l, c, format!("unexpected `{ch}`")));
        }
        PropositionalFormula::from_root(root)
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|t| t.2.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|t| t.2)
    }

    fn here(&self) -> (usize, usize) {
        match self.chars.get(self.pos) {
            Some(&(l, c, _)) => (l, c),
            None => self.chars.last().map_or((1, 1), |&(l, c, _)| (l, c + 1)),
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::new(l, c, message)
    }

    fn expr(&mut self) -> Result<Formula, ParseError> {
        let mut terms = vec![self.and()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            terms.push(self.and()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            Formula::Or(terms)
        })
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut terms = vec![self.unary()?];
        while self.peek() == Some('&') {
            self.pos += 1;
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            Formula::And(terms)
        })
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some('!') => {
                self.pos += 1;
                Ok(self.unary()?.negate())
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some('x') => {
                self.pos += 1;
                let start = self.pos;
                while self.chars.get(self.pos).is_some_and(|t| t.2.is_ascii_digit()) {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.error("expected variable index after `x`"));
                }
                let digits: String = self.chars[start..self.pos].iter().map(|t| t.2).collect();
                let index: u32 = digits.parse().map_err(|_| {
                    let (l, c, _) = self.chars[start];
                    ParseError::new(l, c, "variable index out of range")
                })?;
                if index == 0 {
                    let (l, c, _) = self.chars[start];
                    return Err(ParseError::new(l, c, "variable index 0 (variables start at x1)"));
                }
                Ok(Formula::Var(index))
            }
            Some(ch) => Err(self.error(format!("unexpected `{ch}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Uniform random k-CNF: each clause picks `width` distinct variables and
/// independent signs. `width` is capped at `num_vars`.
pub fn random_kcnf(
    num_vars: u32,
    num_clauses: usize,
    width: u32,
    rng: &mut impl Rng,
) -> PropositionalFormula {
    let width = width.min(num_vars);
    let clauses = (0..num_clauses)
        .map(|_| Formula::Or(random_clause(num_vars, width, rng)))
        .collect();
    PropositionalFormula::new(Formula::And(clauses), num_vars).expect("indices within range")
}

/// Random expression tree over `x1..x{num_vars}` with at most `depth` levels
/// of connectives. Every variable need not appear; `num_vars` is kept as the
/// declared arity.
pub fn random_formula(num_vars: u32, depth: u32, rng: &mut impl Rng) -> PropositionalFormula {
    let root = random_tree(num_vars.max(1), depth, rng);
    PropositionalFormula::new(root, num_vars.max(1)).expect("indices within range")
}

fn random_tree(num_vars: u32, depth: u32, rng: &mut impl Rng) -> Formula {
    if depth == 0 || rng.random_bool(0.25) {
        return Formula::Var(rng.random_range(1..=num_vars));
    }
    match rng.random_range(0..3) {
        0 => random_tree(num_vars, depth - 1, rng).negate(),
        op => {
            let arity = rng.random_range(2..=3);
            let children = (0..arity).map(|_| random_tree(num_vars, depth - 1, rng)).collect();
            if op == 1 {
                Formula::And(children)
            } else {
                Formula::Or(children)
            }
        }
    }
}

pub(crate) fn random_clause(num_vars: u32, width: u32, rng: &mut impl Rng) -> Vec<Formula> {
    let mut vars: Vec<u32> = Vec::with_capacity(width as usize);
    while vars.len() < width as usize {
        let v = rng.random_range(1..=num_vars);
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.into_iter()
        .map(|v| {
            if rng.random_bool(0.5) {
                Formula::Var(v)
            } else {
                Formula::Var(v).negate()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excluded_middle() {
        let f = parse_formula("x1 | !x1").unwrap();
        assert_eq!(f.num_vars(), 1);
        assert_eq!(
            f.root(),
            &Formula::Or(vec![Formula::Var(1), Formula::Var(1).negate()])
        );
    }

    #[test]
    fn precedence_and_parentheses() {
        let f = parse_formula("x1 | x2 & !x3").unwrap();
        assert_eq!(
            f.root(),
            &Formula::Or(vec![
                Formula::Var(1),
                Formula::And(vec![Formula::Var(2), Formula::Var(3).negate()])
            ])
        );
        let g = parse_formula("(x1 | x2) & x3").unwrap();
        assert!(matches!(g.root(), Formula::And(_)));
        assert_eq!(g.num_vars(), 3);
    }

    #[test]
    fn dimacs_clause() {
        let f = parse_formula("p cnf 2 1\n1 2 0").unwrap();
        assert_eq!(
            f.root(),
            &Formula::And(vec![Formula::Or(vec![Formula::Var(1), Formula::Var(2)])])
        );
        assert_eq!(f.num_vars(), 2);
    }

    #[test]
    fn dimacs_comments_and_multiline_clauses() {
        let text = "c example\nc more\np cnf 3 2\n1 -3\n0 2 3 0\n";
        let f = parse_formula(text).unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(to_dimacs(&f).unwrap(), "p cnf 3 2\n1 -3 0\n2 3 0\n");
    }

    #[test]
    fn malformed_infix() {
        let e = parse_formula("x1 & & x2").unwrap_err();
        assert_eq!((e.line, e.column), (1, 6));
        assert!(parse_formula("x0").is_err());
        assert!(parse_formula("(x1 | x2").is_err());
        assert!(parse_formula("x1 x2").is_err());
        assert!(parse_formula("").is_err());
        let e = parse_formula("x1 &\n  y").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn malformed_dimacs() {
        assert!(parse_formula("p cnf 2 1\n1 3 0").is_err());
        assert!(parse_formula("p cnf 2 1\n1 -0").is_err());
        assert!(parse_formula("p cnf 2 2\n1 2 0").is_err());
        assert!(parse_formula("p cnf 2 1\n1 2").is_err());
        assert!(parse_formula("c only a comment\n1 2 0").is_err());
    }

    #[test]
    fn block_evaluation_matches_scalar() {
        let f = parse_formula("(x1 & !x7) | (x3 & x8) | !(x2 | x5)").unwrap();
        for block in 0..4u64 {
            let word = f.root().eval_block(block);
            for j in 0..64 {
                assert_eq!(word >> j & 1 == 1, f.eval(block * 64 + j));
            }
        }
    }
}
