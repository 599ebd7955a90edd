//! A small expression language for analytic curves in one variable `t`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 't' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-t^2`
//! is `-(t^2)`. Derivatives are taken symbolically on the tree.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval<S: Scalar>(&self, t: S) -> S {
        match self {
            Expr::Num(v) => S::cst(*v),
            Expr::Var => t,
            Expr::Neg(e) => -e.eval(t),
            Expr::Bin(op, l, r) => {
                let a = l.eval(t);
                match op {
                    BinOp::Pow => match r.as_ref() {
                        Expr::Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => a.powi(*n as i32),
                        _ => a.powf(r.eval(t)),
                    },
                    BinOp::Add => a + r.eval(t),
                    BinOp::Sub => a - r.eval(t),
                    BinOp::Mul => a * r.eval(t),
                    BinOp::Div => a / r.eval(t),
                }
            }
            Expr::Call(f, e) => {
                let a = e.eval(t);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                }
            }
        }
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.depends_on_t(),
            Expr::Bin(_, l, r) => l.depends_on_t() || r.depends_on_t(),
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) => num(0.0),
            Var => num(1.0),
            Neg(e) => neg(e.derivative()),
            Bin(BinOp::Add, l, r) => add(l.derivative(), r.derivative()),
            Bin(BinOp::Sub, l, r) => sub(l.derivative(), r.derivative()),
            Bin(BinOp::Mul, l, r) => add(
                mul(l.derivative(), (**r).clone()),
                mul((**l).clone(), r.derivative()),
            ),
            Bin(BinOp::Div, l, r) => div(
                sub(
                    mul(l.derivative(), (**r).clone()),
                    mul((**l).clone(), r.derivative()),
                ),
                pow((**r).clone(), num(2.0)),
            ),
            Bin(BinOp::Pow, base, exponent) => {
                if !exponent.depends_on_t() {
                    // c · u^(c-1) · u'
                    let lowered = sub((**exponent).clone(), num(1.0));
                    mul(
                        mul((**exponent).clone(), pow((**base).clone(), lowered)),
                        base.derivative(),
                    )
                } else {
                    // u^v · (v' ln u + v u'/u)
                    mul(
                        self.clone(),
                        add(
                            mul(exponent.derivative(), call(Func::Log, (**base).clone())),
                            div(mul((**exponent).clone(), base.derivative()), (**base).clone()),
                        ),
                    )
                }
            }
            Call(f, e) => {
                let inner = e.derivative();
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**e).clone()),
                    Func::Cos => neg(call(Func::Sin, (**e).clone())),
                    Func::Exp => self.clone(),
                    Func::Log => div(num(1.0), (**e).clone()),
                    Func::Sqrt => div(num(0.5), self.clone()),
                };
                mul(outer, inner)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(_) | Expr::Var | Expr::Call(..) => 5,
        }
    }
}

// Smart constructors. Constants are folded and negative numbers are kept as
// `Neg(Num)` so that printed trees re-parse to the same shape.

fn num(v: f64) -> Expr {
    if v < 0.0 {
        Expr::Neg(Box::new(Expr::Num(-v)))
    } else {
        Expr::Num(v)
    }
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Neg(inner) => match inner.as_ref() {
            Expr::Num(v) => Some(-v),
            _ => None,
        },
        _ => None,
    }
}

fn neg(e: Expr) -> Expr {
    match (as_const(&e), e) {
        (Some(v), _) => num(-v),
        (None, Expr::Neg(inner)) => *inner,
        (None, e) => Expr::Neg(Box::new(e)),
    }
}

// Float guards read better than float literal patterns in these folds.
#[allow(clippy::redundant_guards)]
fn add(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => num(a + b),
        (Some(a), None) if a == 0.0 => r,
        (None, Some(b)) if b == 0.0 => l,
        _ => Expr::Bin(BinOp::Add, Box::new(l), Box::new(r)),
    }
}

#[allow(clippy::redundant_guards)]
fn sub(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => num(a - b),
        (Some(a), None) if a == 0.0 => neg(r),
        (None, Some(b)) if b == 0.0 => l,
        _ => Expr::Bin(BinOp::Sub, Box::new(l), Box::new(r)),
    }
}

#[allow(clippy::redundant_guards)]
fn mul(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => num(a * b),
        (Some(a), _) | (_, Some(a)) if a == 0.0 => num(0.0),
        (Some(a), None) if a == 1.0 => r,
        (None, Some(b)) if b == 1.0 => l,
        _ => Expr::Bin(BinOp::Mul, Box::new(l), Box::new(r)),
    }
}

#[allow(clippy::redundant_guards)]
fn div(l: Expr, r: Expr) -> Expr {
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) if b != 0.0 => num(a / b),
        (Some(a), _) if a == 0.0 => num(0.0),
        (None, Some(b)) if b == 1.0 => l,
        _ => Expr::Bin(BinOp::Div, Box::new(l), Box::new(r)),
    }
}

#[allow(clippy::redundant_guards)]
fn pow(l: Expr, r: Expr) -> Expr {
    match as_const(&r) {
        Some(b) if b == 0.0 => num(1.0),
        Some(b) if b == 1.0 => l,
        _ => Expr::Bin(BinOp::Pow, Box::new(l), Box::new(r)),
    }
}

fn call(f: Func, e: Expr) -> Expr {
    Expr::Call(f, Box::new(e))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var => f.write_str("t"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                wrap(f, e, e.precedence() < 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, p) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    wrap(f, l, l.precedence() <= 4)?;
                    f.write_str(sym)?;
                    wrap(f, r, r.precedence() < 3)
                } else {
                    wrap(f, l, l.precedence() < p)?;
                    f.write_str(sym)?;
                    wrap(f, r, r.precedence() <= p)
                }
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                out.push((i, Tok::Op(c)));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
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
                let v = text.parse::<f64>().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
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
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "t" {
                    self.pos += 1;
                    return Ok(Expr::Var);
                }
                let Some(func) = Func::from_name(&name) else {
                    return self.fail(format!("unknown identifier '{name}'"));
                };
                self.pos += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return self.fail(format!("expected '(' after '{name}'"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Tok::Op(c) => self.fail(format!("unexpected operator '{c}'")),
            Tok::RParen => self.fail("unexpected ')'"),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail("expected ')'")
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.fail("unexpected trailing input");
    }
    Ok(e)
}

/// A parsed curve component together with its first two derivatives.
#[derive(Clone, Debug)]
pub struct CurveExpression {
    source: String,
    tree: Expr,
    d1: Expr,
    d2: Expr,
}

impl CurveExpression {
    pub fn parse(src: &str) -> Result<Self> {
        let tree = parse(src)?;
        let d1 = tree.derivative();
        let d2 = d1.derivative();
        Ok(CurveExpression {
            source: src.to_string(),
            tree,
            d1,
            d2,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tree(&self) -> &Expr {
        &self.tree
    }

    pub fn value(&self, t: f64) -> f64 {
        self.tree.eval(t)
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.d1.eval(t)
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.d2.eval(t)
    }

    /// `(f, f', f'')` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        (self.value(t), self.d1(t), self.d2(t))
    }
}

impl FromStr for CurveExpression {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CurveExpression::parse(s)
    }
}

impl fmt::Display for CurveExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluates_simple_expressions() {
        let e = CurveExpression::parse("2 + 0.5*sin(t)").unwrap();
        assert_eq!(e.value(0.0), 2.0);
        assert_eq!(e.d1(0.0), 0.5);
        let e = CurveExpression::parse("2 + 0.5*cos(t)").unwrap();
        assert_eq!(e.value(0.0), 2.5);
        let e = CurveExpression::parse("t^2 + 1").unwrap();
        assert_eq!(e.d1(3.0), 6.0);
        assert_eq!(e.d2(3.0), 2.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str, t: f64| parse(s).unwrap().eval(t);
        assert_eq!(v("-t^2", 3.0), -9.0);
        assert_eq!(v("2^3^2", 0.0), 512.0);
        assert_eq!(v("8/4/2", 0.0), 1.0);
        assert_eq!(v("8-4-2", 0.0), 2.0);
        assert_eq!(v("2*-t", 3.0), -6.0);
        assert_eq!(v("2^-1", 0.0), 0.5);
        assert_eq!(v("(-t)^2", 3.0), 9.0);
        assert!((v("exp(log(t))", 1.7) - 1.7).abs() < 1e-15);
        assert_eq!(v("1.5e1 + sqrt(t)", 4.0), 17.0);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("2 +* t") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("1 + tan(t)") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("unknown identifier"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse("(t + 1"), Err(Error::Parse { offset: 6, .. })));
        assert!(matches!(parse("t t"), Err(Error::Parse { offset: 2, .. })));
        assert!(matches!(parse("t # 2"), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "2 + 0.5*sin(t)",
            "-t^2",
            "(-t)^2",
            "2^3^t",
            "(2^3)^t",
            "t - (1 - t)",
            "t/(2*t)",
            "--t",
            "exp(-t)*cos(3*t) - sqrt(1 + t^2)/log(2 + t)",
        ] {
            let tree = parse(src).unwrap();
            let printed = tree.to_string();
            assert_eq!(parse(&printed).unwrap(), tree, "{src} -> {printed}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.1f64..5.0).prop_map(Expr::Num),
            Just(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))),
                (inner.clone(), 1u8..4)
                    .prop_map(|(a, n)| Expr::Bin(BinOp::Pow, Box::new(a), Box::new(Expr::Num(n as f64)))),
                inner.clone().prop_map(|e| Expr::Call(Func::Sin, Box::new(e))),
                inner.prop_map(|e| Expr::Call(Func::Cos, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_is_identity(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(parse(&printed).unwrap(), e);
        }

        #[test]
        fn symbolic_derivatives_match_central_differences(e in arb_expr(), t in -2.0f64..2.0) {
            let h = 1e-4;
            let f = |x: f64| e.eval(x);
            let (f0, fp, fm) = (f(t), f(t + h), f(t - h));
            prop_assume!(f0.is_finite() && fp.is_finite() && fm.is_finite());
            let d1 = e.derivative();
            let d2 = d1.derivative();
            let (a1, a2) = (d1.eval(t), d2.eval(t));
            prop_assume!(a1.abs() < 1e3 && a2.abs() < 1e3);
            // O(h²) truncation plus cancellation noise
            let c1 = (fp - fm) / (2.0 * h);
            let c2 = (fp - 2.0 * f0 + fm) / (h * h);
            prop_assert!((a1 - c1).abs() <= 1e-5 * (1.0 + a1.abs()), "{} vs {}", a1, c1);
            prop_assert!((a2 - c2).abs() <= 1e-3 * (1.0 + a2.abs()), "{} vs {}", a2, c2);
        }
    }
}
