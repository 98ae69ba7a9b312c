//! Closed-form real functions of `(x, y, t)`.
//!
//! Coefficient functions and custom initial conditions are written as plain
//! strings in experiment configs, e.g. `"1 + 0.5*sin(pi*x)*transition(t,-10,0.5)"`.
//! The grammar is the usual one:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers `x`, `y`, `t` are variables; `pi` and `e` are constants.
//! Functions: `sin cos tan exp ln log sqrt abs tanh atan atan2 min max transition`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::jet::{Jet, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {0:?} at offset {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token at offset {0}")]
    UnexpectedToken(usize),
    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),
    #[error("function `{name}` takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
}

/// Smooth step `0.5 + 0.5 tanh(s (t - t_c))`.
pub fn transition(t: f64, slope: f64, critical: f64) -> f64 {
    0.5 + 0.5 * (slope * (t - critical)).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Atan,
    Atan2,
    Min,
    Max,
    Transition,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "atan" | "arctan" => (Func::Atan, 1),
            "atan2" => (Func::Atan2, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "transition" => (Func::Transition, 3),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval<S: Scalar>(&self, vars: &[S; 3]) -> S {
        match self {
            Node::Num(v) => S::lift(*v),
            Node::Var(Var::X) => vars[0],
            Node::Var(Var::Y) => vars[1],
            Node::Var(Var::T) => vars[2],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => {
                // exponents are evaluated as plain numbers
                let p = b.eval(vars).value();
                a.eval(vars).powf(p)
            }
            Node::Call(f, args) => {
                let a0 = args[0].eval(vars);
                match f {
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Tan => a0.tan(),
                    Func::Exp => a0.exp(),
                    Func::Ln => a0.ln(),
                    Func::Sqrt => a0.sqrt(),
                    Func::Abs => a0.abs(),
                    Func::Tanh => a0.tanh(),
                    Func::Atan => a0.atan(),
                    Func::Atan2 => a0.atan2(args[1].eval(vars)),
                    Func::Min => {
                        let b = args[1].eval(vars);
                        if a0.value() <= b.value() {
                            a0
                        } else {
                            b
                        }
                    }
                    Func::Max => {
                        let b = args[1].eval(vars);
                        if a0.value() >= b.value() {
                            a0
                        } else {
                            b
                        }
                    }
                    Func::Transition => {
                        let s = args[1].eval(vars);
                        let tc = args[2].eval(vars);
                        S::lift(0.5) + S::lift(0.5) * (s * (a0 - tc)).tanh()
                    }
                }
            }
        }
    }

    fn uses(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) => a.uses(v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.uses(v) || b.uses(v)
            }
            Node::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == '+' || bytes[i] == '-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = bytes[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| ExprError::UnexpectedChar(c, start))?;
            out.push((Tok::Num(v), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(bytes[start..i].iter().collect()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar(c, i));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expect_op(&mut self, op: char) -> Result<(), ExprError> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some((_, off)) => Err(ExprError::UnexpectedToken(*off)),
            None => Err(ExprError::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op() {
            if op != '+' && op != '-' {
                break;
            }
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op() {
            if op != '*' && op != '/' {
                break;
            }
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let (tok, off) = self.toks.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Op(_) => Err(ExprError::UnexpectedToken(off)),
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    let (func, arity) = Func::lookup(&name).ok_or_else(|| ExprError::UnknownIdent(name.clone()))?;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect_op(')')?;
                    if args.len() != arity {
                        return Err(ExprError::Arity { name, expected: arity, got: args.len() });
                    }
                    return Ok(Node::Call(func, args));
                }
                match name.as_str() {
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "t" => Ok(Node::Var(Var::T)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ExprError::UnknownIdent(name)),
                }
            }
        }
    }
}

/// A parsed closed-form function of `(x, y, t)`.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
    uses_x: bool,
    uses_y: bool,
    uses_t: bool,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0 };
        let root = p.expr()?;
        if let Some((_, off)) = p.toks.get(p.pos) {
            return Err(ExprError::UnexpectedToken(*off));
        }
        Ok(Expr {
            source: src.trim().to_string(),
            uses_x: root.uses(Var::X),
            uses_y: root.uses(Var::Y),
            uses_t: root.uses(Var::T),
            root,
        })
    }

    pub fn constant(v: f64) -> Self {
        Expr { source: format!("{v}"), root: Node::Num(v), uses_x: false, uses_y: false, uses_t: false }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.root.eval(&[x, y, t])
    }

    /// Evaluates with `x` replaced by a jet; `y` and `t` are held fixed.
    pub fn eval_jet_x(&self, x: Jet, y: f64, t: f64) -> Jet {
        self.root.eval(&[x, Jet::constant(y), Jet::constant(t)])
    }

    /// Evaluates over any scalar type, e.g. jets along a line in the plane.
    pub fn eval_scalar<S: Scalar>(&self, x: S, y: S, t: S) -> S {
        self.root.eval(&[x, y, t])
    }

    pub fn uses_space(&self) -> bool {
        self.uses_x || self.uses_y
    }

    pub fn uses_time(&self) -> bool {
        self.uses_t
    }

    /// The value when the expression references no variable.
    pub fn as_constant(&self) -> Option<f64> {
        if self.uses_space() || self.uses_t {
            None
        } else {
            Some(self.root.eval(&[0.0, 0.0, 0.0]))
        }
    }
}

impl FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Expr::constant(v)),
            Raw::Int(v) => Ok(Expr::constant(v as f64)),
            Raw::Str(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-2^2 + 3*4/2 - (1 - 5)").unwrap();
        // unary minus binds looser than ^
        assert_eq!(e.eval(0.0, 0.0, 0.0), -4.0 + 6.0 + 4.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0, 0.0, 0.0), 512.0);
        assert_eq!(Expr::parse("1e-2*100").unwrap().eval(0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("1 + 0.5*sin(pi*x)*transition(t,-10,0.5)").unwrap();
        assert!(e.uses_space() && e.uses_time());
        let v = e.eval(0.5, 0.0, 0.5);
        assert!((v - 1.25).abs() < 1e-15);
        let f = Expr::parse("cos(4*sqrt(x^2+y^2))*cos(2*atan2(y,x))").unwrap();
        assert!((f.eval(0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(!f.uses_time());
        assert_eq!(Expr::parse("max(x, 2)").unwrap().eval(3.0, 0.0, 0.0), 3.0);
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Expr::parse("2*pi").unwrap().as_constant(), Some(2.0 * PI));
        assert_eq!(Expr::parse("t").unwrap().as_constant(), None);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(Expr::parse("foo(x)"), Err(ExprError::UnknownIdent(_))));
        assert!(matches!(Expr::parse("sin(x"), Err(ExprError::UnexpectedEnd)));
        assert!(matches!(Expr::parse("atan2(x)"), Err(ExprError::Arity { .. })));
        assert!(matches!(Expr::parse("x $ 2"), Err(ExprError::UnexpectedChar('$', 2))));
        assert!(Expr::parse("x y").is_err());
    }

    #[test]
    fn jet_evaluation_matches_derivatives() {
        let e = Expr::parse("sin(2*x)*exp(-t)").unwrap();
        let j = e.eval_jet_x(Jet::variable(0.3), 0.0, 1.0);
        let s = (-1.0f64).exp();
        assert!((j.derivative(1) - 2.0 * (0.6f64).cos() * s).abs() < 1e-14);
        assert!((j.derivative(2) + 4.0 * (0.6f64).sin() * s).abs() < 1e-14);
    }

    #[test]
    fn transition_is_symmetric() {
        for &t in &[-1.0, 0.2, 0.5, 3.0] {
            let s = transition(t, 7.0, 0.5) + transition(t, -7.0, 0.5);
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert_eq!(transition(0.5, 3.0, 0.5), 0.5);
        assert!(transition(0.6, 100.0, 0.5) > 0.999);
    }
}
