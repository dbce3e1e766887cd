//! Infix text grammar for expressions.
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := unary (('*'|'/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?                  (right-associative)
//! atom    := number | call | ident | '(' expr ')'
//! call    := ident '\''* ('[' int (',' int)* ']')? '(' expr (',' expr)* ')'
//! ```
//!
//! Variables are `t x c f`; any other bare identifier is a named parameter.
//! Placeholder functions must be declared, either via [`FuncDecls`] or a
//! leading header line `funcs: G, Phi`. Primes / bracket indices denote
//! derivative tags: `G''(u)`, `Psi[1,0](c, t*f)`.

use super::{num, App, Expr, ExprError, Rat, UnOp};
use std::collections::BTreeMap;

/// Declared placeholder functions, name -> arity (None until first use).
#[derive(Debug, Clone, Default)]
pub struct FuncDecls {
    arities: BTreeMap<String, Option<usize>>,
}

impl FuncDecls {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        let mut arities = BTreeMap::new();
        for n in names {
            arities.insert(n.as_ref().to_string(), None);
        }
        FuncDecls { arities }
    }

    pub fn with_arity(mut self, name: &str, arity: usize) -> Self {
        self.arities.insert(name.to_string(), Some(arity));
        self
    }

    fn contains(&self, name: &str) -> bool {
        self.arities.contains_key(name)
    }
}

/// Parse a source string. A leading `funcs: A, B` line declares placeholder
/// functions for the remainder of the text.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let trimmed = src.trim_start();
    if let Some(rest) = trimmed.strip_prefix("funcs:") {
        let (header, body) = match rest.split_once('\n') {
            Some(pair) => pair,
            None => {
                return Err(ExprError::Parse {
                    offset: src.len(),
                    msg: "`funcs:` header must be followed by an expression line".into(),
                })
            }
        };
        let names: Vec<String> = header
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        parse_with_funcs(body, &FuncDecls::new(&names))
    } else {
        parse_with_funcs(src, &FuncDecls::default())
    }
}

/// Parse with an explicit placeholder declaration set.
pub fn parse_with_funcs(src: &str, funcs: &FuncDecls) -> Result<Expr, ExprError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0, funcs: funcs.clone() };
    let e = p.parse_expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(p.err(format!("unexpected trailing `{}`", t.describe()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rat),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Prime,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(r) => format!("number {r}"),
            Tok::Ident(s) => format!("identifier {s}"),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBracket => "[".into(),
            Tok::RBracket => "]".into(),
            Tok::Comma => ",".into(),
            Tok::Prime => "'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let tok = match b {
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
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'\'' => Tok::Prime,
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut denom: i64 = 1;
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        denom = denom.checked_mul(10).ok_or(ExprError::Parse {
                            offset: start,
                            msg: "decimal literal too long".into(),
                        })?;
                        i += 1;
                    }
                }
                let text: String = src[start..i].chars().filter(|c| *c != '.').collect();
                let numer: i64 = text.parse().map_err(|_| ExprError::Parse {
                    offset: start,
                    msg: format!("number `{}` out of range", &src[start..i]),
                })?;
                out.push((Tok::Num(Rat::new(numer, denom)), start));
                continue;
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ExprError::Parse {
                    offset: i,
                    msg: format!("unexpected character `{}`", &src[i..].chars().next().unwrap()),
                })
            }
        };
        out.push((tok, i));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    funcs: FuncDecls,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: String) -> ExprError {
        ExprError::Parse { offset: self.offset(), msg }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`, found `{}`", want.describe(), self.peek().describe())))
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.parse_term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.parse_term()?);
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    terms.push(negate(rhs));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) })
    }

    fn parse_term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.parse_unary()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.parse_unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    // Fold rational literals so `3/2` is an exact constant.
                    if factors.len() == 1 {
                        if let (Expr::Num(a), Expr::Num(b)) = (&factors[0], &rhs) {
                            if *b.numer() != 0 {
                                factors[0] = Expr::Num(a / b);
                                continue;
                            }
                        }
                    }
                    factors.push(Expr::Pow(Box::new(rhs), Box::new(num(-1))));
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Mul(factors) })
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(negate(inner));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            // Right-associative; exponent may carry a prefix minus.
            let exponent = self.parse_unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(r) => Ok(Expr::Num(r)),
            Tok::LParen => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.parse_ident(name),
            t => Err(ExprError::Parse {
                offset,
                msg: format!("expected expression, found `{}`", t.describe()),
            }),
        }
    }

    fn parse_ident(&mut self, name: String) -> Result<Expr, ExprError> {
        // Derivative tags: primes (unary) or bracketed multi-index.
        let mut primes: u8 = 0;
        while *self.peek() == Tok::Prime {
            self.bump();
            primes += 1;
        }
        let mut bracket: Option<Vec<u8>> = None;
        if *self.peek() == Tok::LBracket {
            self.bump();
            let mut idx = Vec::new();
            loop {
                match self.bump() {
                    Tok::Num(r) if r.is_integer() && *r.numer() >= 0 => {
                        idx.push(*r.numer() as u8);
                    }
                    t => return Err(self.err(format!("expected derivative order, found `{}`", t.describe()))),
                }
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RBracket => break,
                    t => return Err(self.err(format!("expected `,` or `]`, found `{}`", t.describe()))),
                }
            }
            bracket = Some(idx);
        }

        if *self.peek() != Tok::LParen {
            if primes > 0 || bracket.is_some() {
                return Err(self.err(format!("derivative tag on `{name}` requires arguments")));
            }
            return Ok(Expr::Sym(name));
        }

        // Function application.
        self.bump(); // consume '('
        let mut args = vec![self.parse_expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.parse_expr()?);
        }
        self.expect(Tok::RParen)?;

        if let Some(op) = UnOp::from_name(&name) {
            if primes > 0 || bracket.is_some() {
                return Err(self.err(format!("derivative tags are not valid on builtin `{name}`")));
            }
            if args.len() != 1 {
                return Err(ExprError::Arity { name, want: 1, got: args.len() });
            }
            return Ok(Expr::Un(op, Box::new(args.pop().unwrap())));
        }
        if name == "tan" || name == "cosh" || name == "sinh" || name == "coth" {
            if args.len() != 1 {
                return Err(ExprError::Arity { name, want: 1, got: args.len() });
            }
            let a = args.pop().unwrap();
            return Ok(match name.as_str() {
                "tan" => super::tan(a),
                "cosh" => super::cosh(a),
                "sinh" => super::sinh(a),
                _ => super::coth(a),
            });
        }

        if !self.funcs.contains(&name) {
            return Err(ExprError::UnknownFunction(name));
        }
        // Arity bookkeeping: first use fixes it.
        match self.funcs.arities.get_mut(&name) {
            Some(slot @ None) => *slot = Some(args.len()),
            Some(Some(ar)) if *ar != args.len() => {
                return Err(ExprError::Arity { name, want: *ar, got: args.len() })
            }
            _ => {}
        }

        let deriv = match (primes, bracket) {
            (0, None) => vec![0; args.len()],
            (p, None) => {
                if args.len() != 1 {
                    return Err(self.err("prime derivative tags require a unary placeholder".into()));
                }
                vec![p]
            }
            (0, Some(idx)) => {
                if idx.len() != args.len() {
                    return Err(self.err(format!(
                        "derivative multi-index has {} entries for {} arguments",
                        idx.len(),
                        args.len()
                    )));
                }
                idx
            }
            (_, Some(_)) => {
                return Err(self.err("cannot combine primes with a bracket multi-index".into()))
            }
        };
        Ok(Expr::App(App { name, deriv, args }))
    }
}

/// Prefix minus: fold into the literal for numbers, wrap in (-1)*e otherwise.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Num(r) => Expr::Num(-r),
        other => Expr::Mul(vec![num(-1), other]),
    }
}
