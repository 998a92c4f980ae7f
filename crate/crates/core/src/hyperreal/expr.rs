//! The small expression language behind `hr eval`.
//!
//! ```text
//! expr  := sum (("==" | "<" | ">") sum)?
//! sum   := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" digits)?
//! atom  := digits ("." digits)? | "omega" | "eps"
//!        | "st" "(" sum ")" | "abs" "(" sum ")" | "(" sum ")"
//! ```
//! `p/q` literals are ordinary divisions of integer literals; `n` is a
//! synonym for `omega`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

use super::{Hyperreal, HyperrealError};
use crate::oracle::Oracle;
use crate::ratfn::RatFn;
use crate::Q;

pub const GRAMMAR: &str = "\
expr  := sum ((\"==\" | \"<\" | \">\") sum)?
sum   := term ((\"+\" | \"-\") term)*
term  := unary ((\"*\" | \"/\") unary)*
unary := \"-\" unary | power
power := atom (\"^\" <nonnegative integer>)?
atom  := <integer> | <decimal> | omega | n | eps | st(sum) | abs(sum) | (sum)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] HyperrealError),
    #[error("st() of an infinite value `{0}`")]
    InfiniteStandardPart(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Lt,
    Gt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Num(Q),
    Omega,
    Eps,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    St(Box<Expr>),
    Abs(Box<Expr>),
    Compare(Cmp, Box<Expr>, Box<Expr>),
}

/// Result of evaluating an expression.
#[derive(Clone, Debug)]
pub enum Value {
    Number(Hyperreal),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(h) => write!(f, "{h}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(Q),
    Ident(String),
    Sym(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut digits = src[start..i].to_string();
            let mut scale = 0u32;
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let fs = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if fs == i {
                    return Err(ParseError {
                        offset: i,
                        message: "expected digits after the decimal point".into(),
                    });
                }
                digits.push_str(&src[fs..i]);
                scale = (i - fs) as u32;
            }
            let n: BigInt = digits.parse().expect("ascii digits");
            out.push((start, Tok::Num(Q::new(n, num_traits::pow(BigInt::from(10), scale as usize)))));
            continue;
        }
        if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let sym = match c {
            '=' if bytes.get(i + 1) == Some(&b'=') => "==",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '^' => "^",
            '(' => "(",
            ')' => ")",
            '<' => "<",
            '>' => ">",
            _ => {
                return Err(ParseError {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        i += sym.len();
        out.push((start, Tok::Sym(sym)));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        let op = if self.eat("==") {
            Cmp::Eq
        } else if self.eat("<") {
            Cmp::Lt
        } else if self.eat(">") {
            Cmp::Gt
        } else {
            return Ok(lhs);
        };
        let rhs = self.sum()?;
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat("+") {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat("-") {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat("*") {
                acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat("/") {
                acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat("^") {
            match self.peek().cloned() {
                Some(Tok::Num(q)) if q.is_integer() => {
                    let k: u32 = q
                        .numer()
                        .try_into()
                        .or_else(|_| self.err("exponent too large"))?;
                    self.pos += 1;
                    return Ok(Expr::Pow(Box::new(base), k));
                }
                _ => return self.err("exponent must be a nonnegative integer literal"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(q)) => {
                self.pos += 1;
                Ok(Expr::Num(q))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "omega" | "n" => Ok(Expr::Omega),
                    "eps" => Ok(Expr::Eps),
                    "st" | "abs" => {
                        self.expect("(")?;
                        let inner = Box::new(self.sum()?);
                        self.expect(")")?;
                        Ok(if name == "st" { Expr::St(inner) } else { Expr::Abs(inner) })
                    }
                    _ => {
                        self.pos -= 1;
                        self.err(format!("unknown identifier `{name}`"))
                    }
                }
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(_) => self.err("expected a number, `omega`, `eps`, `st(`, `abs(` or `(`"),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

fn number(ctx: &Oracle, e: &Expr) -> Result<Hyperreal, ExprError> {
    Ok(match e {
        Expr::Num(q) => Hyperreal::from_rational(ctx, q.clone()),
        Expr::Omega => Hyperreal::omega(ctx),
        Expr::Eps => Hyperreal::eps(ctx),
        Expr::Neg(a) => number(ctx, a)?.neg(),
        Expr::Add(a, b) => number(ctx, a)?.add(&number(ctx, b)?)?,
        Expr::Sub(a, b) => number(ctx, a)?.sub(&number(ctx, b)?)?,
        Expr::Mul(a, b) => number(ctx, a)?.mul(&number(ctx, b)?)?,
        Expr::Div(a, b) => number(ctx, a)?.div(&number(ctx, b)?)?,
        Expr::Pow(a, k) => {
            let x = number(ctx, a)?;
            if *k == 0 {
                Hyperreal::from_rational(ctx, Q::one())
            } else {
                x.pow(*k)
            }
        }
        Expr::Abs(a) => number(ctx, a)?.abs()?,
        Expr::St(a) => {
            let x = number(ctx, a)?;
            match x.standard_part()? {
                Some(r) => Hyperreal::from_rational(ctx, r),
                None => return Err(ExprError::InfiniteStandardPart(x.label().to_string())),
            }
        }
        Expr::Compare(..) => unreachable!("comparisons only at top level"),
    })
}

pub fn eval(ctx: &Oracle, e: &Expr) -> Result<Value, ExprError> {
    match e {
        Expr::Compare(op, a, b) => {
            let (x, y) = (number(ctx, a)?, number(ctx, b)?);
            let r = match op {
                Cmp::Eq => x.eq(&y)?,
                Cmp::Lt => x.lt(&y)?,
                Cmp::Gt => x.gt(&y)?,
            };
            Ok(Value::Bool(r))
        }
        _ => Ok(Value::Number(number(ctx, e)?)),
    }
}

/// The rational function of `n` an expression denotes, if it is one
/// (no `st`, `abs` or comparisons). `eps` is `1/n`.
pub fn to_ratfn(e: &Expr) -> Option<RatFn> {
    Some(match e {
        Expr::Num(q) => RatFn::constant(q.clone()),
        Expr::Omega => RatFn::var(),
        Expr::Eps => RatFn::var().recip()?,
        Expr::Neg(a) => to_ratfn(a)?.neg(),
        Expr::Add(a, b) => to_ratfn(a)?.add(&to_ratfn(b)?),
        Expr::Sub(a, b) => to_ratfn(a)?.sub(&to_ratfn(b)?),
        Expr::Mul(a, b) => to_ratfn(a)?.mul(&to_ratfn(b)?),
        Expr::Div(a, b) => to_ratfn(a)?.div(&to_ratfn(b)?)?,
        Expr::Pow(a, k) => to_ratfn(a)?.pow(*k),
        Expr::St(_) | Expr::Abs(_) | Expr::Compare(..) => return None,
    })
}

/// Parses and evaluates in one step.
pub fn eval_str(ctx: &Oracle, src: &str) -> Result<Value, ExprError> {
    eval(ctx, &parse(src)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperreal::Magnitude;
    use crate::poly::{q_frac, q_int};

    fn ctx() -> Oracle {
        Oracle::with_horizon(20_000)
    }

    fn num(v: Value) -> Hyperreal {
        match v {
            Value::Number(h) => h,
            Value::Bool(b) => panic!("expected a number, got {b}"),
        }
    }

    #[test]
    fn parses_precedence() {
        let e = parse("1 + 2*3^2").unwrap();
        let o = ctx();
        assert_eq!(num(eval(&o, &e).unwrap()).at(5), q_int(19));
        assert_eq!(num(eval_str(&o, "-2^2").unwrap()).at(0), q_int(-4));
        assert_eq!(num(eval_str(&o, "3/4").unwrap()).at(0), q_frac(3, 4));
        assert_eq!(num(eval_str(&o, "0.25").unwrap()).at(0), q_frac(1, 4));
    }

    #[test]
    fn standard_part_of_ring_identity() {
        let o = ctx();
        let v = num(eval_str(&o, "st((1+eps)*(1-eps))").unwrap());
        assert_eq!(v.at(0), q_int(1));
        let w = num(eval_str(&o, "(1+eps)*(1-eps)").unwrap());
        assert_eq!(w.classify().unwrap(), Magnitude::FiniteNonInfinitesimal);
    }

    #[test]
    fn comparisons() {
        let o = ctx();
        assert!(matches!(eval_str(&o, "eps < 1/1000000").unwrap(), Value::Bool(true)));
        assert!(matches!(eval_str(&o, "omega > 1000000").unwrap(), Value::Bool(true)));
        assert!(matches!(eval_str(&o, "omega == omega + eps").unwrap(), Value::Bool(false)));
    }

    #[test]
    fn errors() {
        let o = ctx();
        assert!(matches!(eval_str(&o, "st(omega)"), Err(ExprError::InfiniteStandardPart(_))));
        assert!(matches!(eval_str(&o, "1/0"), Err(ExprError::Eval(HyperrealError::DivisionByZero(_)))));
        assert!(matches!(eval_str(&o, "2^x"), Err(ExprError::Parse(_))));
        assert!(matches!(eval_str(&o, "1 +"), Err(ExprError::Parse(_))));
        assert!(matches!(eval_str(&o, "(1"), Err(ExprError::Parse(_))));
        assert!(matches!(eval_str(&o, "2^1.5"), Err(ExprError::Parse(_))));
    }
}
