//! A small arithmetic expression language for right-hand sides f(x, s).
//!
//! Variables: `x1`, `x2` (coordinates), `s` (function value), plus the two
//! substitutable symbols `p` (growth exponent, bound when a problem spec is
//! parsed) and `L` (principal eigenvalue, bound after the eigenvalue pass).
//!
//! Operators: `+ - * / ^` with the usual precedence, `^` binding tightest and
//! right-associative, unary minus between `^` and `*`.  Functions: `abs exp
//! log sqrt sin cos` (one argument) and `min max` (two arguments).
//!
//! Evaluation is total on its domain: division by zero, `log` of a
//! non-positive value, `sqrt` of a negative value, `0^negative`,
//! `negative^non-integer` and overflow all surface as errors carrying the
//! source offset of the offending node.  NaN is never produced.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    S,
    P,
    L,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::S => "s",
            Var::P => "p",
            Var::L => "L",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Abs,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl UnOp {
    fn name(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Abs => "abs",
            UnOp::Exp => "exp",
            UnOp::Log => "log",
            UnOp::Sqrt => "sqrt",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
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
    Min,
    Max,
}

/// Expression node plus the byte offset of its source token (offsets are
/// carried for error messages and ignored by equality).
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

/// Values for the free variables of an expression; unbound slots stay None.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings {
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub l: Option<f64>,
}

impl Bindings {
    fn get(&self, v: Var) -> Option<f64> {
        match v {
            Var::X1 => self.x1,
            Var::X2 => self.x2,
            Var::S => self.s,
            Var::P => self.p,
            Var::L => self.l,
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            Token::End => Ok(e),
            t => Err(Error::Parse {
                offset: p.offset(),
                msg: format!("unexpected {}", t.describe()),
            }),
        }
    }

    /// Replaces every occurrence of `var` with the constant `value`
    /// (negative constants become a negation node so printing round-trips).
    pub fn substitute(&self, var: Var, value: f64) -> Expr {
        let node = match &self.node {
            Node::Var(v) if *v == var => {
                if value < 0.0 {
                    Node::Unary(
                        UnOp::Neg,
                        Box::new(Expr {
                            node: Node::Num(-value),
                            offset: self.offset,
                        }),
                    )
                } else {
                    Node::Num(value)
                }
            }
            Node::Num(_) | Node::Var(_) => self.node.clone(),
            Node::Unary(op, a) => Node::Unary(*op, Box::new(a.substitute(var, value))),
            Node::Binary(op, a, b) => Node::Binary(
                *op,
                Box::new(a.substitute(var, value)),
                Box::new(b.substitute(var, value)),
            ),
        };
        Expr {
            node,
            offset: self.offset,
        }
    }

    pub fn references(&self, var: Var) -> bool {
        match &self.node {
            Node::Num(_) => false,
            Node::Var(v) => *v == var,
            Node::Unary(_, a) => a.references(var),
            Node::Binary(_, a, b) => a.references(var) || b.references(var),
        }
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64> {
        let err = |msg: String| Error::Eval {
            offset: self.offset,
            msg,
        };
        let v = match &self.node {
            Node::Num(c) => *c,
            Node::Var(v) => b
                .get(*v)
                .ok_or_else(|| err(format!("unbound variable {}", v.name())))?,
            Node::Unary(op, a) => {
                let x = a.eval(b)?;
                match op {
                    UnOp::Neg => -x,
                    UnOp::Abs => x.abs(),
                    UnOp::Exp => x.exp(),
                    UnOp::Log => {
                        if x <= 0.0 {
                            return Err(err(format!("log of non-positive value {x}")));
                        }
                        x.ln()
                    }
                    UnOp::Sqrt => {
                        if x < 0.0 {
                            return Err(err(format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                    UnOp::Sin => x.sin(),
                    UnOp::Cos => x.cos(),
                }
            }
            Node::Binary(op, a, bb) => {
                let x = a.eval(b)?;
                let y = bb.eval(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(err("division by zero".into()));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        if x < 0.0 && y.fract() != 0.0 {
                            return Err(err(format!("{x}^{y}: negative base, non-integer exponent")));
                        }
                        if x == 0.0 && y < 0.0 {
                            return Err(err(format!("0^{y}: negative exponent of zero")));
                        }
                        x.powf(y)
                    }
                    BinOp::Min => x.min(y),
                    BinOp::Max => x.max(y),
                }
            }
        };
        if !v.is_finite() {
            return Err(err(format!("non-finite result {v}")));
        }
        Ok(v)
    }
}

// precedence levels for printing and parsing
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Num(_) | Node::Var(_) => PREC_ATOM,
        Node::Unary(UnOp::Neg, _) => PREC_NEG,
        Node::Unary(_, _) => PREC_ATOM, // function call syntax
        Node::Binary(BinOp::Add | BinOp::Sub, _, _) => PREC_ADD,
        Node::Binary(BinOp::Mul | BinOp::Div, _, _) => PREC_MUL,
        Node::Binary(BinOp::Pow, _, _) => PREC_POW,
        Node::Binary(BinOp::Min | BinOp::Max, _, _) => PREC_ATOM,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(&e.node) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{}", v.name()),
            Node::Unary(UnOp::Neg, a) => {
                write!(f, "-")?;
                write_child(f, a, PREC_NEG)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(BinOp::Min, a, b) => write!(f, "min({a}, {b})"),
            Node::Binary(BinOp::Max, a, b) => write!(f, "max({a}, {b})"),
            Node::Binary(op, a, b) => {
                let (sym, lp, rp) = match op {
                    // left-associative: a right operand of equal precedence
                    // must be parenthesised to keep the tree shape
                    BinOp::Add => ("+", PREC_ADD, PREC_MUL),
                    BinOp::Sub => ("-", PREC_ADD, PREC_MUL),
                    BinOp::Mul => ("*", PREC_MUL, PREC_NEG),
                    BinOp::Div => ("/", PREC_MUL, PREC_NEG),
                    // right-associative: parenthesise a left operand of equal precedence
                    BinOp::Pow => ("^", PREC_ATOM, PREC_NEG),
                    BinOp::Min | BinOp::Max => unreachable!(),
                };
                write_child(f, a, lp)?;
                write!(f, " {sym} ")?;
                write_child(f, b, rp)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier '{s}'"),
            Token::Plus => "'+'".into(),
            Token::Minus => "'-'".into(),
            Token::Star => "'*'".into(),
            Token::Slash => "'/'".into(),
            Token::Caret => "'^'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Comma => "','".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '+' => {
                out.push((Token::Plus, start));
                i += 1;
            }
            '-' => {
                out.push((Token::Minus, start));
                i += 1;
            }
            '*' => {
                out.push((Token::Star, start));
                i += 1;
            }
            '/' => {
                out.push((Token::Slash, start));
                i += 1;
            }
            '^' => {
                out.push((Token::Caret, start));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, start));
                i += 1;
            }
            ',' => {
                out.push((Token::Comma, start));
                i += 1;
            }
            '0'..='9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(Error::Parse {
                            offset: start,
                            msg: "digits required after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    msg: format!("bad number literal '{text}'"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        offset: start,
                        msg: format!("number literal '{text}' overflows"),
                    });
                }
                out.push((Token::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    offset: start,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    out.push((Token::End, src.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                msg: format!("expected {}, found {}", want.describe(), self.peek().describe()),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.sum()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            let (_, offset) = self.bump();
            let rhs = self.product()?;
            lhs = Expr {
                node: Node::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            let (_, offset) = self.bump();
            let rhs = self.unary()?;
            lhs = Expr {
                node: Node::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Minus {
            let (_, offset) = self.bump();
            let inner = self.unary()?;
            return Ok(Expr {
                node: Node::Unary(UnOp::Neg, Box::new(inner)),
                offset,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            let (_, offset) = self.bump();
            // right-associative; exponent may carry its own unary minus
            let exp = self.unary()?;
            return Ok(Expr {
                node: Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)),
                offset,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump().0 {
            Token::Num(v) => Ok(Expr {
                node: Node::Num(v),
                offset,
            }),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    self.bump();
                    return self.call(&name, offset);
                }
                let var = match name.as_str() {
                    "x1" => Var::X1,
                    "x2" => Var::X2,
                    "s" => Var::S,
                    "p" => Var::P,
                    "L" => Var::L,
                    _ => {
                        return Err(Error::Parse {
                            offset,
                            msg: format!("unknown identifier '{name}'"),
                        })
                    }
                };
                Ok(Expr {
                    node: Node::Var(var),
                    offset,
                })
            }
            t => Err(Error::Parse {
                offset,
                msg: format!("expected a value, found {}", t.describe()),
            }),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expr> {
        let unary = match name {
            "abs" => Some(UnOp::Abs),
            "exp" => Some(UnOp::Exp),
            "log" => Some(UnOp::Log),
            "sqrt" => Some(UnOp::Sqrt),
            "sin" => Some(UnOp::Sin),
            "cos" => Some(UnOp::Cos),
            _ => None,
        };
        if let Some(op) = unary {
            let a = self.expr()?;
            self.expect(Token::RParen)?;
            return Ok(Expr {
                node: Node::Unary(op, Box::new(a)),
                offset,
            });
        }
        let binary = match name {
            "min" => Some(BinOp::Min),
            "max" => Some(BinOp::Max),
            _ => None,
        };
        if let Some(op) = binary {
            let a = self.expr()?;
            self.expect(Token::Comma)?;
            let b = self.expr()?;
            self.expect(Token::RParen)?;
            return Ok(Expr {
                node: Node::Binary(op, Box::new(a), Box::new(b)),
                offset,
            });
        }
        Err(Error::Parse {
            offset,
            msg: format!("unknown function '{name}'"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_s(src: &str, s: f64) -> Result<f64> {
        let b = Bindings {
            s: Some(s),
            ..Default::default()
        };
        Expr::parse(src)?.eval(&b)
    }

    fn eval_const(src: &str) -> f64 {
        Expr::parse(src).unwrap().eval(&Bindings::default()).unwrap()
    }

    #[test]
    fn precedence_table() {
        assert_eq!(eval_const("2+3*4"), 14.0);
        assert_eq!(eval_const("2*3^2"), 18.0);
        assert_eq!(eval_const("-2^2"), -4.0); // ^ binds tighter than unary minus
        assert_eq!(eval_const("(-2)^2"), 4.0);
        assert_eq!(eval_const("2^3^2"), 512.0); // right-associative
        assert_eq!(eval_const("1-2-3"), -4.0);
        assert_eq!(eval_const("12/2/3"), 2.0);
        assert_eq!(eval_const("2^-1"), 0.5);
        assert_eq!(eval_const("min(1+2, 2*2)"), 3.0);
        assert_eq!(eval_const("max(1, -1)"), 1.0);
    }

    #[test]
    fn growth_expression_with_p_substituted() {
        let e = Expr::parse("s^(p-1)*(0.5 + 1.5*s/(1+s))").unwrap();
        assert!(e.references(Var::P));
        let e = e.substitute(Var::P, 3.0);
        assert!(!e.references(Var::P));
        let b = Bindings {
            s: Some(1.0),
            ..Default::default()
        };
        // 1^2 * (0.5 + 0.75) = 1.25
        assert!((e.eval(&b).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match Expr::parse("s^^2") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("foo + 1").is_err());
        assert!(Expr::parse("sin(1, 2)").is_err());
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn domain_errors_not_nan() {
        assert!(eval_s("1/s", 0.0).is_err());
        assert!(eval_s("log(s)", 0.0).is_err());
        assert!(eval_s("log(s)", -1.0).is_err());
        assert!(eval_s("sqrt(s)", -1.0).is_err());
        assert!(eval_s("s^0.5", -2.0).is_err());
        assert!(eval_s("s^-1", 0.0).is_err());
        assert!(eval_s("exp(s)", 1e9).is_err()); // overflow is an error, not inf
        assert_eq!(eval_s("s^3", -2.0).unwrap(), -8.0); // integer exponents of negatives are fine
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let e = Expr::parse("L*s").unwrap();
        let b = Bindings {
            s: Some(1.0),
            ..Default::default()
        };
        assert!(e.eval(&b).is_err());
        assert!((e.substitute(Var::L, 2.5).eval(&b).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn print_parse_round_trip() {
        let cases = [
            "s^(p-1)*(0.5 + 1.5*s/(1+s))",
            "-x1^2 + x2*(3 - s)",
            "min(max(s, 0), 1) / (1 + abs(x1))",
            "exp(-s)*sin(x1)*cos(x2)",
            "1 - 2 - 3",
            "12/2/3",
            "2^3^2",
            "-(s+1)",
            "sqrt(abs(s - 0.5)) + log(1 + s)",
        ];
        for src in cases {
            let a = Expr::parse(src).unwrap();
            let printed = a.to_string();
            let b = Expr::parse(&printed)
                .unwrap_or_else(|e| panic!("reparse of '{printed}' failed: {e}"));
            assert_eq!(a, b, "round trip changed structure: '{src}' -> '{printed}'");
        }
    }

    #[test]
    fn substitution_of_negative_constant_round_trips() {
        let e = Expr::parse("L*s").unwrap().substitute(Var::L, -3.5);
        let printed = e.to_string();
        let back = Expr::parse(&printed).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn evaluation_is_pure() {
        let e = Expr::parse("s^2*(0.5 + 1.5*s/(1+s)) + sin(x1)").unwrap();
        let b = Bindings {
            x1: Some(0.3),
            s: Some(1.7),
            ..Default::default()
        };
        let v1 = e.eval(&b).unwrap();
        let v2 = e.eval(&b).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
    }
}
