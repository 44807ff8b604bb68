//! Mini-language for analytic field components.
//!
//! Grammar (EBNF):
//! ```text
//! expr   = term { ("+" | "-") term } ;
//! term   = unary { ("*" | "/") unary } ;
//! unary  = "-" unary | power ;
//! power  = atom [ "^" unary ] ;          (* right associative *)
//! atom   = number | ident "(" expr { "," expr } ")" | ident | "(" expr ")" ;
//! ident  = "x" digits | "exp" | "log" | "sin" | "cos" | "sqrt" | "atan2" ;
//! number = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
//! ```
//! `^` binds tighter than unary minus; `*`,`/` and `+`,`-` are
//! left-associative. Errors carry the byte offset of the offending token.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Atan2,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Atan2 => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Atan2 => "atan2",
        }
    }
}

/// Expression tree over variables `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based axis index (source text uses `x1..xn`).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Fun(Func, Vec<Expr>),
}

impl Expr {
    /// Largest variable index used, plus one.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) => e.min_dim(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.min_dim().max(b.min_dim()),
            Expr::Fun(_, args) => args.iter().map(|a| a.min_dim()).max().unwrap_or(0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let fail = |reason: &str| Error::EvalFailed {
            point: x.to_vec(),
            reason: reason.into(),
        };
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => {
                if *i >= x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: i + 1,
                        got: x.len(),
                    });
                }
                x[*i]
            }
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(fail("division by zero"));
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x)?;
                let e = b.eval(x)?;
                let v = base.powf(e);
                if !v.is_finite() {
                    return Err(fail("power out of domain"));
                }
                v
            }
            Expr::Fun(f, args) => {
                let a0 = args[0].eval(x)?;
                match f {
                    Func::Exp => a0.exp(),
                    Func::Log => {
                        if a0 <= 0.0 {
                            return Err(fail("log of non-positive value"));
                        }
                        a0.ln()
                    }
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Sqrt => {
                        if a0 < 0.0 {
                            return Err(fail("sqrt of negative value"));
                        }
                        a0.sqrt()
                    }
                    Func::Atan2 => a0.atan2(args[1].eval(x)?),
                }
            }
        })
    }
}

// Precedence levels for printing: 0 add, 1 mul, 2 unary, 3 pow, 4 atom.
fn fmt_prec(e: &Expr, parent: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) | Expr::Div(..) => 1,
        Expr::Neg(..) => 2,
        Expr::Pow(..) => 3,
        Expr::Const(_) | Expr::Var(_) | Expr::Fun(..) => 4,
    };
    let parens = prec < parent;
    if parens {
        write!(f, "(")?;
    }
    match e {
        Expr::Const(c) => {
            if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                write!(f, "({c})")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Expr::Var(i) => write!(f, "x{}", i + 1)?,
        Expr::Neg(a) => {
            write!(f, "-")?;
            fmt_prec(a, 2, f)?;
        }
        Expr::Add(a, b) => {
            fmt_prec(a, 0, f)?;
            write!(f, " + ")?;
            fmt_prec(b, 1, f)?;
        }
        Expr::Sub(a, b) => {
            fmt_prec(a, 0, f)?;
            write!(f, " - ")?;
            fmt_prec(b, 1, f)?;
        }
        Expr::Mul(a, b) => {
            fmt_prec(a, 1, f)?;
            write!(f, "*")?;
            fmt_prec(b, 2, f)?;
        }
        Expr::Div(a, b) => {
            fmt_prec(a, 1, f)?;
            write!(f, "/")?;
            fmt_prec(b, 2, f)?;
        }
        Expr::Pow(a, b) => {
            fmt_prec(a, 4, f)?;
            write!(f, "^")?;
            fmt_prec(b, 2, f)?;
        }
        Expr::Fun(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                fmt_prec(a, 0, f)?;
            }
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
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
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_whitespace() {
                lx.pos += 1;
            }
            if lx.pos >= lx.src.len() {
                return Ok(out);
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b',' => {
                    lx.pos += 1;
                    Tok::Comma
                }
                b'0'..=b'9' | b'.' => {
                    while lx.pos < lx.src.len() && matches!(lx.src[lx.pos], b'0'..=b'9' | b'.') {
                        lx.pos += 1;
                    }
                    if lx.pos < lx.src.len() && matches!(lx.src[lx.pos], b'e' | b'E') {
                        let mark = lx.pos;
                        lx.pos += 1;
                        if lx.pos < lx.src.len() && matches!(lx.src[lx.pos], b'+' | b'-') {
                            lx.pos += 1;
                        }
                        if lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                                lx.pos += 1;
                            }
                        } else {
                            lx.pos = mark; // 'e' belonged to something else
                        }
                    }
                    let text = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap();
                    let v: f64 = text.parse().map_err(|_| Error::Parse {
                        offset: start,
                        message: format!("invalid number `{text}`"),
                    })?;
                    Tok::Num(v)
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    while lx.pos < lx.src.len()
                        && matches!(lx.src[lx.pos], b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_')
                    {
                        lx.pos += 1;
                    }
                    Tok::Ident(
                        std::str::from_utf8(&lx.src[start..lx.pos])
                            .unwrap()
                            .to_string(),
                    )
                }
                other => {
                    return Err(Error::Parse {
                        offset: start,
                        message: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push((tok, start));
        }
    }
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
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
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

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            // Right associative; exponent may carry a sign.
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(i) = rest.parse::<usize>() {
                        if i >= 1 {
                            return Ok(Expr::Var(i - 1));
                        }
                    }
                }
                let func = match name.as_str() {
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "sqrt" => Func::Sqrt,
                    "atan2" => Func::Atan2,
                    _ => {
                        return Err(Error::Parse {
                            offset: off,
                            message: format!("unknown identifier `{name}`"),
                        })
                    }
                };
                self.expect(Tok::LParen, "`(` after function name")?;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if args.len() != func.arity() {
                    return Err(Error::Parse {
                        offset: off,
                        message: format!(
                            "{} takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Fun(func, args))
            }
            _ => Err(Error::Parse {
                offset: off,
                message: "expected expression".into(),
            }),
        }
    }
}

/// Parses an expression; errors report byte offsets into `source`.
pub fn parse_expr(source: &str) -> Result<Expr> {
    let toks = Lexer::tokens(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse {
            offset: p.offset(),
            message: "trailing input".into(),
        });
    }
    Ok(e)
}
