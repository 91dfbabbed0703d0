//! Small arithmetic expression language for field components.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, `sin cos exp ln sqrt`,
//! constants `pi` and `e`, variables `t`, `x1..xn`, `eps`, `mu`.
//! `^` is right-associative and binds tighter than unary minus.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token '{found}' at {pos}")]
    UnexpectedToken { found: String, pos: usize },
    #[error("unknown identifier '{0}'")]
    UnknownIdent(String),
    #[error("variable x{index} out of range for dimension {dim}")]
    StateIndex { index: usize, dim: usize },
    #[error("expression may not depend on {0}")]
    Forbidden(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// Zero-based state index.
    X(usize),
    Eps,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub eps: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| ExprError::UnexpectedToken { found: text.clone(), pos: start })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar { ch: c, pos: i });
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

    fn expect(&mut self, op: char) -> Result<(), ExprError> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some((t, p)) => Err(ExprError::UnexpectedToken { found: format!("{t:?}"), pos: *p }),
            None => Err(ExprError::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::Add(Box::new(lhs), Box::new(rhs)) } else { Expr::Sub(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(Box::new(lhs), Box::new(rhs)) } else { Expr::Div(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, pos) = self.toks.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "ln" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "eps" => Ok(Expr::Var(Var::Eps)),
                    "mu" => Ok(Expr::Var(Var::Mu)),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(k) if k >= 1 => Ok(Expr::Var(Var::X(k - 1))),
                        _ => Err(ExprError::UnknownIdent(name)),
                    },
                }
            }
            Tok::Op(c) => Err(ExprError::UnexpectedToken { found: c.to_string(), pos }),
        }
    }
}

/// Parses a single expression.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let e = p.expr()?;
    match p.toks.get(p.pos) {
        None => Ok(e),
        Some((t, pos)) => Err(ExprError::UnexpectedToken { found: format!("{t:?}"), pos: *pos }),
    }
}

/// Parses a comma-separated list, e.g. `"x2, -x1"`.
pub fn parse_list(src: &str) -> Result<Vec<Expr>, ExprError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let mut out = vec![p.expr()?];
    while p.peek_op() == Some(',') {
        p.pos += 1;
        out.push(p.expr()?);
    }
    match p.toks.get(p.pos) {
        None => Ok(out),
        Some((t, pos)) => Err(ExprError::UnexpectedToken { found: format!("{t:?}"), pos: *pos }),
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

impl Expr {
    pub fn eval(&self, env: &Env<'_>) -> f64 {
        match self {
            Self::Num(v) => *v,
            Self::Var(Var::T) => env.t,
            Self::Var(Var::X(k)) => env.x.get(*k).copied().unwrap_or(f64::NAN),
            Self::Var(Var::Eps) => env.eps,
            Self::Var(Var::Mu) => env.mu,
            Self::Neg(a) => -a.eval(env),
            Self::Add(a, b) => a.eval(env) + b.eval(env),
            Self::Sub(a, b) => a.eval(env) - b.eval(env),
            Self::Mul(a, b) => a.eval(env) * b.eval(env),
            Self::Div(a, b) => a.eval(env) / b.eval(env),
            Self::Pow(a, b) => {
                let base = a.eval(env);
                match b.as_integer() {
                    Some(k) => base.powi(k),
                    None => base.powf(b.eval(env)),
                }
            }
            Self::Call(f, a) => {
                let v = a.eval(env);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    fn as_integer(&self) -> Option<i32> {
        let v = match self {
            Self::Num(v) => *v,
            Self::Neg(inner) => match **inner {
                Self::Num(v) => -v,
                _ => return None,
            },
            _ => return None,
        };
        (v.fract() == 0.0 && v.abs() <= 64.0).then_some(v as i32)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Self::Num(_) => false,
            Self::Var(v) => *v == var,
            Self::Neg(a) | Self::Call(_, a) => a.depends_on(var),
            Self::Add(a, b) | Self::Sub(a, b) | Self::Mul(a, b) | Self::Div(a, b) | Self::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Largest state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Self::Num(_) => None,
            Self::Var(Var::X(k)) => Some(*k),
            Self::Var(_) => None,
            Self::Neg(a) | Self::Call(_, a) => a.max_state_index(),
            Self::Add(a, b) | Self::Sub(a, b) | Self::Mul(a, b) | Self::Div(a, b) | Self::Pow(a, b) => {
                a.max_state_index().max(b.max_state_index())
            }
        }
    }

    /// Symbolic partial derivative.
    pub fn derivative(&self, var: Var) -> Expr {
        match self {
            Self::Num(_) => num(0.0),
            Self::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            Self::Neg(a) => neg(a.derivative(var)),
            Self::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Self::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Self::Mul(a, b) => add(mul(a.derivative(var), (**b).clone()), mul((**a).clone(), b.derivative(var))),
            Self::Div(a, b) => div(
                sub(mul(a.derivative(var), (**b).clone()), mul((**a).clone(), b.derivative(var))),
                Expr::Pow(b.clone(), Box::new(num(2.0))),
            ),
            Self::Pow(a, b) => {
                if !b.depends_on(var) {
                    let da = a.derivative(var);
                    if da == num(0.0) {
                        return num(0.0);
                    }
                    let lowered = match b.as_integer() {
                        Some(k) => num((k - 1) as f64),
                        None => sub((**b).clone(), num(1.0)),
                    };
                    mul(mul((**b).clone(), Expr::Pow(a.clone(), Box::new(lowered))), da)
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let log = Expr::Call(Func::Ln, a.clone());
                    mul(self.clone(), add(mul(b.derivative(var), log), div(mul((**b).clone(), a.derivative(var)), (**a).clone())))
                }
            }
            Self::Call(f, a) => {
                let da = a.derivative(var);
                if da == num(0.0) {
                    return num(0.0);
                }
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Expr::Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Ln => div(num(1.0), (**a).clone()),
                    Func::Sqrt => div(num(0.5), self.clone()),
                };
                mul(outer, da)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Num(v) => write!(f, "{v}"),
            Self::Var(Var::T) => f.write_str("t"),
            Self::Var(Var::X(k)) => write!(f, "x{}", k + 1),
            Self::Var(Var::Eps) => f.write_str("eps"),
            Self::Var(Var::Mu) => f.write_str("mu"),
            Self::Neg(a) => write!(f, "-({a})"),
            Self::Add(a, b) => write!(f, "({a} + {b})"),
            Self::Sub(a, b) => write!(f, "({a} - {b})"),
            Self::Mul(a, b) => write!(f, "({a} * {b})"),
            Self::Div(a, b) => write!(f, "({a} / {b})"),
            Self::Pow(a, b) => write!(f, "({a})^({b})"),
            Self::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Ln => "ln",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}
