//! Single-variable elementary expressions: AST, parser and printer.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := NUMBER | "pi" | "e" | IDENT "(" expr ")" | VAR | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)` and `2^-x` is
//! `2^(-x)`. Implicit multiplication is not accepted.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigUint;
use thiserror::Error;

/// Name used for the free variable when none is given.
pub const DEFAULT_VAR: &str = "x";

/// Maximum nesting of parentheses / unary minus accepted by the parser.
const MAX_DEPTH: usize = 256;

/// A finite, non-negative binary64 literal with total ordering and
/// bitwise equality so it can live inside a hashable, ordered tree.
#[derive(Debug, Clone, Copy)]
pub struct Decimal(f64);

impl Decimal {
    pub fn new(value: f64) -> Option<Self> {
        (value.is_finite() && value >= 0.0).then_some(Decimal(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Decimal {}

impl Hash for Decimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `Display` for f64 is the shortest round-tripping form and never
        // uses exponent notation; force a point so it re-parses as decimal.
        let s = self.0.to_string();
        if s.contains('.') {
            f.write_str(&s)
        } else {
            write!(f, "{s}.0")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// The fixed function registry. `Log` and `Ln` are both the natural log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Abstract syntax tree of a single-variable elementary expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(BigUint),
    Decimal(Decimal),
    Const(Constant),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

// Plain constructors; the tree is not an arithmetic type.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn int(value: u64) -> Expr {
        Expr::Int(BigUint::from(value))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn neg(inner: Expr) -> Expr {
        Expr::Neg(Box::new(inner))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Div, lhs, rhs)
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::binary(BinOp::Pow, base, exponent)
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    /// The distinct variable names occurring in the tree, sorted.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(name) => out.push(name),
            Expr::Neg(inner) | Expr::Call(_, inner) => inner.collect_vars(out),
            Expr::Binary(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Int(_) | Expr::Decimal(_) | Expr::Const(_) => {}
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Neg(inner) | Expr::Call(_, inner) => 1 + inner.size(),
            Expr::Binary(_, lhs, rhs) => 1 + lhs.size() + rhs.size(),
            _ => 1,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

/// Prints with the fewest parentheses that still re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Decimal(d) => write!(f, "{d}"),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(name) => f.write_str(name),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_operand(f, inner, inner.precedence() < 3)
            }
            Expr::Binary(op, lhs, rhs) => {
                let (left_parens, right_parens) = match op {
                    BinOp::Add | BinOp::Sub => (false, rhs.precedence() <= 1),
                    BinOp::Mul | BinOp::Div => (lhs.precedence() < 2, rhs.precedence() <= 2),
                    // base is an atom, exponent is a factor
                    BinOp::Pow => (lhs.precedence() < 5, rhs.precedence() < 3),
                };
                write_operand(f, lhs, left_parens)?;
                write!(f, "{}", op.symbol())?;
                write_operand(f, rhs, right_parens)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Minimal-parenthesization infix rendering.
pub fn format(e: &Expr) -> String {
    e.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expressions use different variables: {left:?} and {right:?}")]
    VariableMismatch { left: String, right: String },
    #[error("expression uses more than one variable: {0:?}")]
    MultipleVariables(Vec<String>),
}

/// Builds `f_real - f_user` without simplification.
pub fn difference(real: &Expr, user: &Expr) -> Result<Expr, ExprError> {
    let left = single_variable(real)?;
    let right = single_variable(user)?;
    if let (Some(l), Some(r)) = (left, right) {
        if l != r {
            return Err(ExprError::VariableMismatch {
                left: l.to_string(),
                right: r.to_string(),
            });
        }
    }
    Ok(Expr::sub(real.clone(), user.clone()))
}

/// The single variable of `e`, if any; errors when more than one occurs.
pub fn single_variable(e: &Expr) -> Result<Option<&str>, ExprError> {
    let vars = e.variables();
    match vars.as_slice() {
        [] => Ok(None),
        [v] => Ok(Some(v)),
        _ => Err(ExprError::MultipleVariables(
            vars.iter().map(|v| v.to_string()).collect(),
        )),
    }
}

/// Parses with the default variable name `x`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with_var(text, DEFAULT_VAR)
}

/// Parses `text`, accepting `var` as the only free variable.
pub fn parse_with_var(text: &str, var: &str) -> Result<Expr, ParseError> {
    if !is_valid_variable(var) {
        return Err(ParseError {
            offset: 0,
            expected: "a variable name that is not a constant or function".into(),
            found: format!("{var:?}"),
        });
    }
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        var,
        depth: 0,
    };
    let e = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(e),
        _ => Err(parser.error("operator or end of input")),
    }
}

/// True when `name` can serve as the free variable.
pub fn is_valid_variable(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name != "pi"
        && name != "e"
        && Func::from_name(name).is_none()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigUint),
    Decimal(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("number {n}"),
            Tok::Decimal(d) => format!("number {d}"),
            Tok::Ident(name) => format!("identifier {name:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_decimal = false;
                if i < bytes.len() && bytes[i] == b'.' {
                    is_decimal = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let literal = &text[start..i];
                if literal == "." {
                    return Err(ParseError {
                        offset: start,
                        expected: "digits".into(),
                        found: "'.'".into(),
                    });
                }
                let tok = if is_decimal {
                    let value: f64 = literal.parse().expect("lexed decimal literal");
                    if !value.is_finite() {
                        return Err(ParseError {
                            offset: start,
                            expected: "a finite decimal literal".into(),
                            found: format!("{literal:?}"),
                        });
                    }
                    Tok::Decimal(value)
                } else {
                    Tok::Int(BigUint::parse_bytes(literal.as_bytes(), 10).expect("lexed integer"))
                };
                out.push((tok, start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().expect("non-empty remainder");
                return Err(ParseError {
                    offset: start,
                    expected: "a token".into(),
                    found: format!("{ch:?}"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'v> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    var: &'v str,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn descend(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                offset: self.offset(),
                expected: format!("nesting depth at most {MAX_DEPTH}"),
                found: self.peek().describe(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        self.descend()?;
        let result = if *self.peek() == Tok::Minus {
            self.advance();
            self.factor().map(Expr::neg)
        } else {
            self.power()
        };
        self.depth -= 1;
        result
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.advance();
            let exponent = self.factor()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(n))
            }
            Tok::Decimal(d) => {
                self.advance();
                Ok(Expr::Decimal(Decimal(d)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.advance();
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(&format!("'(' after {name}")));
                    }
                    self.advance();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::call(func, arg))
                } else if name == "pi" {
                    self.advance();
                    Ok(Expr::Const(Constant::Pi))
                } else if name == "e" {
                    self.advance();
                    Ok(Expr::Const(Constant::E))
                } else if name == self.var {
                    self.advance();
                    Ok(Expr::Var(name))
                } else {
                    Err(self.error(&format!(
                        "a number, constant, function or the variable {:?}",
                        self.var
                    )))
                }
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.advance();
            Ok(())
        } else {
            Err(self.error("')'"))
        }
    }
}
