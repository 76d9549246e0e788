//! Scalar arithmetic formulas used to declare Hamiltonians, potentials and
//! initial data in configuration text.
//!
//! The grammar is a small Pratt grammar: `+ -` < `* /` < unary `-` < `^`
//! (right associative). Identifiers are either one of the variables
//! `x, y, p, u, v, eps`, the constant `pi`, or a whitelisted function call.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{func}` expects {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        func: &'static str,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("no binding for variable `{0}`")]
    MissingBinding(Var),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    P,
    U,
    V,
    Eps,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::X, Var::Y, Var::P, Var::U, Var::V, Var::Eps];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::P => "p",
            Var::U => "u",
            Var::V => "v",
            Var::Eps => "eps",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Abstract syntax tree of a formula. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values for the variables of a formula. Unset slots are reported as
/// [`ExprError::MissingBinding`] when the formula reads them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    slots: [Option<f64>; 6],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, var: Var, value: f64) -> Self {
        self.slots[var.slot()] = Some(value);
        self
    }

    pub fn x(self, value: f64) -> Self {
        self.set(Var::X, value)
    }
    pub fn y(self, value: f64) -> Self {
        self.set(Var::Y, value)
    }
    pub fn p(self, value: f64) -> Self {
        self.set(Var::P, value)
    }
    pub fn u(self, value: f64) -> Self {
        self.set(Var::U, value)
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.slots[var.slot()]
    }

    /// Builds bindings from a name → value map; unknown names are rejected.
    pub fn from_map(map: &HashMap<String, f64>) -> Result<Self, ExprError> {
        let mut b = Bindings::new();
        for (name, &value) in map {
            let var = Var::from_name(name).ok_or_else(|| ExprError::UnknownIdentifier {
                name: name.clone(),
                offset: 0,
            })?;
            b = b.set(var, value);
        }
        Ok(b)
    }
}

/// Parses `source` into an [`Expr`].
pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        len: source.len(),
    };
    let expr = parser.expr(0)?;
    match parser.peek() {
        None => Ok(expr),
        Some(tok) => Err(ExprError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        }),
    }
}

/// Evaluates `e` under `bindings`.
pub fn eval(e: &Expr, bindings: &Bindings) -> Result<f64, ExprError> {
    e.eval(bindings)
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Expr {
    pub fn num(value: f64) -> Self {
        Expr::Num(value)
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        let value = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => b.get(*var).ok_or(ExprError::MissingBinding(*var))?,
            Expr::Neg(inner) => -inner.eval(b)?,
            Expr::Bin(op, lhs, rhs) => {
                let l = lhs.eval(b)?;
                let r = rhs.eval(b)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero ({l} / 0)")));
                        }
                        l / r
                    }
                    BinOp::Pow => pow(l, r)?,
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(b)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(ExprError::Domain(format!("log of nonpositive value {a}")));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    Func::Min => a.min(args[1].eval(b)?),
                    Func::Max => a.max(args[1].eval(b)?),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::Domain(format!("non-finite result in `{self}`")))
        }
    }

    /// Collects the variables read by the tree, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.variables().contains(&var)
    }

    /// Fails with [`ExprError::UnknownIdentifier`] when the tree reads a
    /// variable outside `allowed`.
    pub fn check_vars(&self, allowed: &[Var]) -> Result<(), ExprError> {
        match self.variables().into_iter().find(|v| !allowed.contains(v)) {
            None => Ok(()),
            Some(v) => Err(ExprError::UnknownIdentifier {
                name: v.name().to_string(),
                offset: 0,
            }),
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(var, with))),
            Expr::Bin(op, l, r) => Expr::Bin(
                *op,
                Box::new(l.substitute(var, with)),
                Box::new(r.substitute(var, with)),
            ),
            Expr::Call(f, args) => {
                Expr::Call(*f, args.iter().map(|a| a.substitute(var, with)).collect())
            }
        }
    }

    /// Flattens the top-level sum into signed terms: `a - (b + c)` yields
    /// `[(+1, a), (-1, b), (-1, c)]`.
    pub fn additive_terms(&self) -> Vec<(f64, &Expr)> {
        let mut out = Vec::new();
        self.push_terms(1.0, &mut out);
        out
    }

    fn push_terms<'a>(&'a self, sign: f64, out: &mut Vec<(f64, &'a Expr)>) {
        match self {
            Expr::Bin(BinOp::Add, l, r) => {
                l.push_terms(sign, out);
                r.push_terms(sign, out);
            }
            Expr::Bin(BinOp::Sub, l, r) => {
                l.push_terms(sign, out);
                r.push_terms(-sign, out);
            }
            Expr::Neg(e) => e.push_terms(-sign, out),
            _ => out.push((sign, self)),
        }
    }

    /// Rebuilds a sum from signed terms; an empty list is the literal 0.
    pub fn sum_of(terms: &[(f64, &Expr)]) -> Expr {
        let mut acc: Option<Expr> = None;
        for &(sign, term) in terms {
            let term = term.clone();
            acc = Some(match (acc, sign < 0.0) {
                (None, false) => term,
                (None, true) => Expr::Neg(Box::new(term)),
                (Some(a), false) => Expr::Bin(BinOp::Add, Box::new(a), Box::new(term)),
                (Some(a), true) => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or(Expr::Num(0.0))
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::Domain(format!(
            "negative base {base} with fractional exponent {exponent}"
        )));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::Domain("zero raised to a negative power".into()));
    }
    if exponent == 2.0 {
        Ok(base * base)
    } else if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Fully parenthesized output; reparsing it yields an equal tree up to the
/// representation of `pi`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("operator `{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Num(value),
                    offset: start,
                });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => TokenKind::Op(c as char),
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        i += 1;
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

const BP_SUM: u8 = 10;
const BP_PRODUCT: u8 = 20;
const BP_UNARY: u8 = 30;
const BP_POW: u8 = 40;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn eof_offset(&self) -> usize {
        self.len
    }

    fn expect(&mut self, kind: TokenKind) -> Result<usize, ExprError> {
        match self.next() {
            Some(tok) if tok.kind == kind => Ok(tok.offset),
            Some(tok) => Err(ExprError::Syntax {
                offset: tok.offset,
                message: format!(
                    "expected {}, found {}",
                    kind.describe(),
                    tok.kind.describe()
                ),
            }),
            None => Err(ExprError::Syntax {
                offset: self.eof_offset(),
                message: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Op('+')) => (BinOp::Add, BP_SUM, BP_SUM + 1),
                Some(TokenKind::Op('-')) => (BinOp::Sub, BP_SUM, BP_SUM + 1),
                Some(TokenKind::Op('*')) => (BinOp::Mul, BP_PRODUCT, BP_PRODUCT + 1),
                Some(TokenKind::Op('/')) => (BinOp::Div, BP_PRODUCT, BP_PRODUCT + 1),
                // right associative; the exponent may carry its own unary minus
                Some(TokenKind::Op('^')) => (BinOp::Pow, BP_POW, BP_POW),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(rbp)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.next() else {
            return Err(ExprError::Syntax {
                offset: self.eof_offset(),
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::Op('-') => {
                let operand = self.expr(BP_UNARY)?;
                Ok(Expr::Neg(Box::new(operand)))
            }
            TokenKind::Op('+') => self.expr(BP_UNARY),
            TokenKind::LParen => {
                let inner = self.expr(0)?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.offset),
            other => Err(ExprError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        if let Some(var) = Var::from_name(&name) {
            return Ok(Expr::Var(var));
        }
        if name == "pi" {
            return Ok(Expr::Num(PI));
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ExprError::UnknownIdentifier { name, offset });
        };
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            loop {
                args.push(self.expr(0)?);
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        if args.len() != func.arity() {
            return Err(ExprError::Arity {
                func: func.name(),
                expected: func.arity(),
                found: args.len(),
                offset,
            });
        }
        Ok(Expr::Call(func, args))
    }
}
