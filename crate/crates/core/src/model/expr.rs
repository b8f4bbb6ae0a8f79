//! A small arithmetic expression language for defining `f` and `g`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | primary
//! primary := number | variable | func "(" expr ("," expr)* ")" | "(" expr ")"
//! variable:= ("x" | "z" | "w") digits        (1-based index)
//! func    := sin | cos | tanh | exp | abs | sat | min | max
//! ```
//!
//! `sat(u)` clamps `u` to `[-1, 1]`. `min` and `max` take two arguments.

use std::fmt;

use crate::error::{ChiError, Result};

/// Which argument slot a variable reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Slow state `x`.
    X,
    /// Fast state `z`.
    Z,
    /// Third slot of `g` and the argument of `f`, which receive `mu * z`.
    W,
}

impl VarKind {
    fn prefix(self) -> char {
        match self {
            VarKind::X => 'x',
            VarKind::Z => 'z',
            VarKind::W => 'w',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Tanh,
    Exp,
    Abs,
    Sat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Expression tree. Variable indices are 0-based internally.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarKind, usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

/// Declared variable counts; any index outside these is an unknown identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarScope {
    pub n_x: usize,
    pub m_z: usize,
    pub w: usize,
}

impl VarScope {
    fn allows(&self, kind: VarKind, index: usize) -> bool {
        let limit = match kind {
            VarKind::X => self.n_x,
            VarKind::Z => self.m_z,
            VarKind::W => self.w,
        };
        index < limit
    }
}

/// Values bound to the three variable families during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub z: &'a [f64],
    pub w: &'a [f64],
}

impl Expr {
    /// Evaluates the tree. Callers are responsible for the index bounds,
    /// which the parser guarantees against the declared scope.
    pub fn eval(&self, b: &Bindings<'_>) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(kind, i) => match kind {
                VarKind::X => b.x[*i],
                VarKind::Z => b.z[*i],
                VarKind::W => b.w[*i],
            },
            Expr::Neg(e) => -e.eval(b),
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.eval(b), r.eval(b));
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                }
            }
            Expr::Call1(f, a) => {
                let a = a.eval(b);
                match f {
                    Func1::Sin => a.sin(),
                    Func1::Cos => a.cos(),
                    Func1::Tanh => a.tanh(),
                    Func1::Exp => a.exp(),
                    Func1::Abs => a.abs(),
                    Func1::Sat => a.clamp(-1.0, 1.0),
                }
            }
            Expr::Call2(f, l, r) => {
                let (l, r) = (l.eval(b), r.eval(b));
                match f {
                    Func2::Min => l.min(r),
                    Func2::Max => l.max(r),
                }
            }
        }
    }

    /// Largest variable index used for each family, as counts.
    pub fn max_var_counts(&self) -> VarScope {
        let mut scope = VarScope {
            n_x: 0,
            m_z: 0,
            w: 0,
        };
        self.visit_vars(&mut |kind, i| {
            let slot = match kind {
                VarKind::X => &mut scope.n_x,
                VarKind::Z => &mut scope.m_z,
                VarKind::W => &mut scope.w,
            };
            *slot = (*slot).max(i + 1);
        });
        scope
    }

    fn visit_vars(&self, visit: &mut impl FnMut(VarKind, usize)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(k, i) => visit(*k, *i),
            Expr::Neg(e) | Expr::Call1(_, e) => e.visit_vars(visit),
            Expr::Binary(_, l, r) | Expr::Call2(_, l, r) => {
                l.visit_vars(visit);
                r.visit_vars(visit);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Tanh => "tanh",
            Func1::Exp => "exp",
            Func1::Abs => "abs",
            Func1::Sat => "sat",
        }
    }
}

impl Func2 {
    fn name(self) -> &'static str {
        match self {
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }
}

/// Minimal-parenthesis printer; its output parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(k, i) => write!(f, "{}{}", k.prefix(), i + 1),
            Expr::Neg(e) => {
                if e.precedence() < 3 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Operators are left-associative: a right operand at the
                // same level needs parentheses to keep the tree shape.
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::Call1(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Call2(func, l, r) => write!(f, "{}({l}, {r})", func.name()),
        }
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
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(text: &'a str) -> std::result::Result<Vec<(Tok, usize)>, (usize, String)> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_whitespace() {
                lx.pos += 1;
            }
            let start = lx.pos;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            let tok = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                b'0'..=b'9' | b'.' => {
                    let n = lx.number().map_err(|m| (start, m))?;
                    out.push((Tok::Num(n), start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while lx.pos < lx.src.len()
                        && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_')
                    {
                        lx.pos += 1;
                    }
                    let s = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap_or_default();
                    out.push((Tok::Ident(s.to_string()), start));
                    continue;
                }
                other => {
                    return Err((start, format!("unexpected character `{}`", other as char)));
                }
            };
            lx.pos += 1;
            out.push((tok, start));
        }
    }

    fn number(&mut self) -> std::result::Result<f64, String> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
                return Err("malformed exponent".into());
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        s.parse::<f64>()
            .map_err(|_| format!("malformed number `{s}`"))
    }
}

struct Parser<'s> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    scope: VarScope,
    line: usize,
    col0: usize,
    _src: &'s str,
}

/// Parses `text` as an expression. `line` and `col0` locate the text in the
/// enclosing document so errors carry document coordinates (1-based).
pub fn parse_expr_at(text: &str, scope: VarScope, line: usize, col0: usize) -> Result<Expr> {
    let toks = Lexer::tokens(text).map_err(|(pos, message)| ChiError::Syntax {
        line,
        column: col0 + pos,
        message,
    })?;
    let mut p = Parser {
        toks,
        i: 0,
        scope,
        line,
        col0,
        _src: text,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(p.syntax(format!("unexpected token {}", describe(t)))),
    }
}

/// Parses a standalone expression (errors report line 1).
pub fn parse_expr(text: &str, scope: VarScope) -> Result<Expr> {
    parse_expr_at(text, scope, 1, 1)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number {n}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of expression".into(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn column(&self) -> usize {
        self.col0 + self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn syntax(&self, message: String) -> ChiError {
        ChiError::Syntax {
            line: self.line,
            column: self.column(),
            message,
        }
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!(
                "expected {}, found {}",
                describe(&want),
                describe(self.peek())
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let column = self.column();
        match self.bump() {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, column),
            Tok::End => Err(ChiError::Syntax {
                line: self.line,
                column,
                message: "expected operand, found end of expression".into(),
            }),
            t => Err(ChiError::Syntax {
                line: self.line,
                column,
                message: format!("expected operand, found {}", describe(&t)),
            }),
        }
    }

    fn ident(&mut self, name: String, column: usize) -> Result<Expr> {
        let f1 = match name.as_str() {
            "sin" => Some(Func1::Sin),
            "cos" => Some(Func1::Cos),
            "tanh" => Some(Func1::Tanh),
            "exp" => Some(Func1::Exp),
            "abs" => Some(Func1::Abs),
            "sat" => Some(Func1::Sat),
            _ => None,
        };
        let f2 = match name.as_str() {
            "min" => Some(Func2::Min),
            "max" => Some(Func2::Max),
            _ => None,
        };
        if f1.is_some() || f2.is_some() {
            self.expect(Tok::LParen)?;
            let a = self.expr()?;
            let out = if let Some(f) = f1 {
                Expr::Call1(f, Box::new(a))
            } else {
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                Expr::Call2(f2.unwrap_or(Func2::Min), Box::new(a), Box::new(b))
            };
            self.expect(Tok::RParen)?;
            return Ok(out);
        }

        let unknown = || ChiError::UnknownIdentifier {
            name: name.clone(),
            line: self.line,
            column,
        };
        let mut chars = name.chars();
        let kind = match chars.next() {
            Some('x') => VarKind::X,
            Some('z') => VarKind::Z,
            Some('w') => VarKind::W,
            _ => return Err(unknown()),
        };
        let digits = chars.as_str();
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || digits.starts_with('0')
        {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if !self.scope.allows(kind, index - 1) {
            return Err(unknown());
        }
        Ok(Expr::Var(kind, index - 1))
    }
}
