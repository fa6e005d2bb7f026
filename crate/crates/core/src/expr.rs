//! A small operator-expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | factor
//! factor := atom ('†' | '\'')*
//! atom   := number | number 'i' | 'sqrt(' expr ')' | ident '(' int ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `a`, `adag` (modes), `sm`, `sp`, `sz` (qubits). Scalars
//! evaluate to multiples of the identity. There is no implicit multiplication.

use std::fmt;

use thiserror::Error;

use crate::linalg::{re, C64};
use crate::operator::{self, qubit, HilbertSpec, Operator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("negative index at byte {offset}")]
    NegativeIndex { offset: usize },
    #[error("sqrt applied to an operator at byte {offset}")]
    SqrtOfOperator { offset: usize },
    #[error("index {index} out of range for a space with {factors} factors")]
    IndexOutOfRange { index: usize, factors: usize },
    #[error("qubit operator on factor {factor} of dimension {dim}")]
    NotQubit { factor: usize, dim: usize },
    #[error("mode operator on factor {0} of dimension 1")]
    TrivialFactor(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    A,
    Adag,
    Sm,
    Sp,
    Sz,
}

impl OpKind {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "a" => OpKind::A,
            "adag" => OpKind::Adag,
            "sm" => OpKind::Sm,
            "sp" => OpKind::Sp,
            "sz" => OpKind::Sz,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::A => "a",
            OpKind::Adag => "adag",
            OpKind::Sm => "sm",
            OpKind::Sp => "sp",
            OpKind::Sz => "sz",
        }
    }

    pub fn is_qubit(self) -> bool {
        matches!(self, OpKind::Sm | OpKind::Sp | OpKind::Sz)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Imaginary(f64),
    Sqrt(Box<Expr>),
    Op { kind: OpKind, index: usize },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Product whose left operand contains no operators.
    ScalarMul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Dagger(Box<Expr>),
    Paren(Box<Expr>),
}

impl Expr {
    pub fn is_scalar(&self) -> bool {
        match self {
            Expr::Number(_) | Expr::Imaginary(_) => true,
            Expr::Op { .. } => false,
            Expr::Sqrt(x) | Expr::Neg(x) | Expr::Dagger(x) | Expr::Paren(x) => x.is_scalar(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::ScalarMul(a, b) => {
                a.is_scalar() && b.is_scalar()
            }
        }
    }

    /// Largest factor index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Expr::Number(_) | Expr::Imaginary(_) => None,
            Expr::Op { index, .. } => Some(*index),
            Expr::Sqrt(x) | Expr::Neg(x) | Expr::Dagger(x) | Expr::Paren(x) => x.max_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::ScalarMul(a, b) => {
                a.max_index().max(b.max_index())
            }
        }
    }

    pub fn evaluate(&self, space: &HilbertSpec) -> Result<Operator, ExprError> {
        Ok(match eval(self, space)? {
            Value::Scalar(z) => Operator::scalar(space, z),
            Value::Op(op) => op,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(x) => write!(f, "{x:?}"),
            Expr::Imaginary(x) => write!(f, "{x:?}i"),
            Expr::Sqrt(x) => write!(f, "sqrt({x})"),
            Expr::Op { kind, index } => write!(f, "{}({index})", kind.name()),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
            Expr::Sub(a, b) => write!(f, "{a} - {b}"),
            Expr::Mul(a, b) | Expr::ScalarMul(a, b) => write!(f, "{a}*{b}"),
            Expr::Neg(x) => write!(f, "-{x}"),
            Expr::Dagger(x) => write!(f, "{x}†"),
            Expr::Paren(x) => write!(f, "({x})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Dagger,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match b {
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'\'' => out.push((Tok::Dagger, i)),
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: format!("number '{text}' is not finite"),
                    });
                }
                let imag = i < bytes.len()
                    && bytes[i] == b'i'
                    && !bytes.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_');
                if imag {
                    i += 1;
                    out.push((Tok::Imag(value), start));
                } else {
                    out.push((Tok::Num(value), start));
                }
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().expect("in bounds");
                if ch == '†' {
                    out.push((Tok::Dagger, i));
                    i += ch.len_utf8();
                    continue;
                }
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if lhs.is_scalar() {
                Expr::ScalarMul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let mut x = self.atom()?;
        while self.peek() == Some(&Tok::Dagger) {
            self.pos += 1;
            x = Expr::Dagger(Box::new(x));
        }
        Ok(x)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(x)) => Ok(Expr::Number(x)),
            Some(Tok::Imag(x)) => Ok(Expr::Imaginary(x)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            Some(Tok::Ident(name)) if name == "sqrt" => {
                self.expect(Tok::LParen, "'(' after sqrt")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                if !inner.is_scalar() {
                    return Err(ExprError::SqrtOfOperator { offset });
                }
                Ok(Expr::Sqrt(Box::new(inner)))
            }
            Some(Tok::Ident(name)) => {
                let kind = OpKind::from_name(&name)
                    .ok_or(ExprError::UnknownIdentifier { name, offset })?;
                self.expect(Tok::LParen, "'(' after operator name")?;
                let index_at = self.offset();
                let index = match self.bump() {
                    Some(Tok::Num(x)) if x.fract() == 0.0 && x <= u32::MAX as f64 => x as usize,
                    Some(Tok::Minus) => return Err(ExprError::NegativeIndex { offset: index_at }),
                    _ => {
                        return Err(ExprError::Syntax {
                            offset: index_at,
                            message: "expected a non-negative integer index".into(),
                        })
                    }
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Op { kind, index })
            }
            Some(_) => Err(ExprError::Syntax { offset, message: "expected an operand".into() }),
            None => Err(ExprError::Syntax { offset, message: "unexpected end of input".into() }),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ExprError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

/// Parses and evaluates in one step.
pub fn evaluate_str(src: &str, space: &HilbertSpec) -> Result<Operator, ExprError> {
    parse(src)?.evaluate(space)
}

enum Value {
    Scalar(C64),
    Op(Operator),
}

impl Value {
    fn into_op(self, space: &HilbertSpec) -> Operator {
        match self {
            Value::Scalar(z) => Operator::scalar(space, z),
            Value::Op(o) => o,
        }
    }
}

fn leaf(kind: OpKind, index: usize, space: &HilbertSpec) -> Result<Operator, ExprError> {
    let factors = space.num_factors();
    if index >= factors {
        return Err(ExprError::IndexOutOfRange { index, factors });
    }
    let dim = space.dims()[index];
    if kind.is_qubit() && dim != 2 {
        return Err(ExprError::NotQubit { factor: index, dim });
    }
    if dim < 2 {
        return Err(ExprError::TrivialFactor(index));
    }
    let op = match kind {
        OpKind::A => operator::annihilator(space, index),
        OpKind::Adag => operator::creator(space, index),
        OpKind::Sm => qubit::sigma_minus(space, index),
        OpKind::Sp => qubit::sigma_plus(space, index),
        OpKind::Sz => qubit::sigma_z(space, index),
    };
    Ok(op.expect("index and dimension checked above"))
}

fn eval(e: &Expr, space: &HilbertSpec) -> Result<Value, ExprError> {
    use Value::*;
    Ok(match e {
        Expr::Number(x) => Scalar(re(*x)),
        Expr::Imaginary(x) => Scalar(C64::new(0.0, *x)),
        Expr::Sqrt(x) => match eval(x, space)? {
            Scalar(z) => Scalar(z.sqrt()),
            Op(_) => unreachable!("sqrt argument checked scalar at parse time"),
        },
        Expr::Op { kind, index } => Op(leaf(*kind, *index, space)?),
        Expr::Paren(x) => eval(x, space)?,
        Expr::Neg(x) => match eval(x, space)? {
            Scalar(z) => Scalar(-z),
            Op(o) => Op(-o),
        },
        Expr::Dagger(x) => match eval(x, space)? {
            Scalar(z) => Scalar(z.conj()),
            Op(o) => Op(o.adjoint()),
        },
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let sign = if matches!(e, Expr::Add(..)) { 1.0 } else { -1.0 };
            match (eval(a, space)?, eval(b, space)?) {
                (Scalar(x), Scalar(y)) => Scalar(x + y * sign),
                (x, y) => Op(x.into_op(space) + y.into_op(space) * sign),
            }
        }
        Expr::Mul(a, b) | Expr::ScalarMul(a, b) => match (eval(a, space)?, eval(b, space)?) {
            (Scalar(x), Scalar(y)) => Scalar(x * y),
            (Scalar(x), Op(o)) | (Op(o), Scalar(x)) => Op(o * x),
            (Op(x), Op(y)) => Op(&x * &y),
        },
    })
}
