//! Lexer and parser for the kernel source language. Names are resolved to
//! local slots and builtins while parsing, so a successful parse is a
//! complete build.

use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug)]
pub struct CompileError {
    pub pos: Pos,
    pub message: String,
}

type PResult<T> = Result<T, CompileError>;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const PUNCT: [&str; 22] = [
    "..", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ",", ";", "=", "<", ">", "+", "-", "*", "/", "%", "!",
];

fn lex(src: &str) -> PResult<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            advance(1, &mut i, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                // `0..n` is a range, not a fraction.
                if chars[i] == '.' && chars.get(i + 1) == Some(&'.') {
                    break;
                }
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let value = text
                .parse()
                .map_err(|_| CompileError { pos, message: format!("malformed number `{text}`") })?;
            out.push((Tok::Num(value), pos));
        } else if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(CompileError { pos, message: "unterminated string literal".into() });
            }
            let text = chars[start..i].iter().collect();
            i += 1;
            col += i + 1 - start;
            out.push((Tok::Str(text), pos));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let p = PUNCT
                .iter()
                .find(|p| rest.starts_with(**p))
                .ok_or_else(|| CompileError { pos, message: format!("unexpected character `{c}`") })?;
            advance(p.len(), &mut i, &mut col);
            out.push((Tok::Punct(p), pos));
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Gid,
    GlobalSize,
    Hdr,
    LdU8,
    LdF32,
    StU8,
    StF32,
    ParU32,
    ParF32,
    ParF64,
    ParLen,
    Sqrt,
    Sin,
    Cos,
    Floor,
    Round,
    Abs,
    Min,
    Max,
    Clamp,
    Idiv,
}

impl Builtin {
    fn lookup(name: &str) -> Option<(Builtin, usize)> {
        use Builtin::*;
        Some(match name {
            "gid" => (Gid, 0),
            "global_size" => (GlobalSize, 0),
            "hdr" => (Hdr, 2),
            "ld_u8" => (LdU8, 2),
            "ld_f32" => (LdF32, 2),
            "st_u8" => (StU8, 3),
            "st_f32" => (StF32, 3),
            "par_u32" => (ParU32, 1),
            "par_f32" => (ParF32, 1),
            "par_f64" => (ParF64, 1),
            "par_len" => (ParLen, 0),
            "sqrt" => (Sqrt, 1),
            "sin" => (Sin, 1),
            "cos" => (Cos, 1),
            "floor" => (Floor, 1),
            "round" => (Round, 1),
            "abs" => (Abs, 1),
            "min" => (Min, 2),
            "max" => (Max, 2),
            "clamp" => (Clamp, 3),
            "idiv" => (Idiv, 2),
            _ => return None,
        })
    }
}

/// Buffer selectors visible to kernels.
pub const BUF_IN: f64 = 0.0;
pub const BUF_OUT: f64 = 1.0;
pub const BUF_AUX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug)]
pub enum Expr {
    Const(f64),
    Local(usize),
    Call(Builtin, Vec<Expr>, Pos),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
}

#[derive(Debug)]
pub enum Stmt {
    Set(usize, Expr),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    For(usize, Expr, Expr, Vec<Stmt>),
    Expr(Expr),
    Return,
    Fail(String, Pos),
}

#[derive(Debug)]
pub struct KernelDef {
    pub name: String,
    pub body: Vec<Stmt>,
    pub slots: usize,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    scopes: Vec<HashMap<String, usize>>,
    slots: usize,
}

/// Parses a whole unit into its kernels.
pub fn compile_unit(src: &str) -> PResult<Vec<KernelDef>> {
    let mut p = Parser { toks: lex(src)?, at: 0, scopes: Vec::new(), slots: 0 };
    let mut kernels = Vec::new();
    while p.peek() != &Tok::Eof {
        kernels.push(p.kernel()?);
    }
    if kernels.is_empty() {
        return Err(CompileError { pos: p.pos(), message: "unit defines no kernels".into() });
    }
    Ok(kernels)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> PResult<T> {
        Err(CompileError { pos: self.pos(), message })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {other}")),
        }
    }

    fn declare(&mut self, name: String) -> usize {
        let slot = self.slots;
        self.slots += 1;
        self.scopes.last_mut().expect("inside a scope").insert(name, slot);
        slot
    }

    fn resolve(&self, name: &str) -> Option<usize> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn kernel(&mut self) -> PResult<KernelDef> {
        if !self.is_keyword("kernel") {
            return self.error(format!("expected `kernel`, found {}", self.peek()));
        }
        self.bump();
        let name = self.ident()?;
        self.slots = 0;
        let body = self.block()?;
        Ok(KernelDef { name, body, slots: self.slots })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        self.scopes.push(HashMap::new());
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Tok::Eof {
                return self.error("unexpected end of input, expected `}`".into());
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        self.scopes.pop();
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_keyword("let") {
            self.bump();
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            // Declared after the initializer so `let x = x + 1` reads the outer x.
            let slot = self.declare(name);
            return Ok(Stmt::Set(slot, value));
        }
        if self.is_keyword("if") {
            return self.if_stmt();
        }
        if self.is_keyword("for") {
            self.bump();
            let name = self.ident()?;
            if !self.is_keyword("in") {
                return self.error(format!("expected `in`, found {}", self.peek()));
            }
            self.bump();
            let start = self.expr()?;
            self.expect("..")?;
            let end = self.expr()?;
            self.scopes.push(HashMap::new());
            let slot = self.declare(name);
            let body = self.block();
            self.scopes.pop();
            return Ok(Stmt::For(slot, start, end, body?));
        }
        if self.is_keyword("return") {
            self.bump();
            self.expect(";")?;
            return Ok(Stmt::Return);
        }
        if self.is_keyword("fail") {
            let pos = self.pos();
            self.bump();
            let message = match self.bump().0 {
                Tok::Str(s) => s,
                other => return Err(CompileError { pos, message: format!("`fail` needs a string, found {other}") }),
            };
            self.expect(";")?;
            return Ok(Stmt::Fail(message, pos));
        }
        if let (Tok::Ident(name), Tok::Punct("=")) = (self.peek().clone(), &self.toks[self.at + 1].0) {
            if !is_keyword(&name) {
                let pos = self.pos();
                let slot = self
                    .resolve(&name)
                    .ok_or_else(|| CompileError { pos, message: format!("assignment to undeclared variable `{name}`") })?;
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.expect(";")?;
                return Ok(Stmt::Set(slot, value));
            }
        }
        let e = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Expr(e))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        self.bump();
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = if self.is_keyword("else") {
            self.bump();
            if self.is_keyword("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If(cond, then, otherwise))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: [&[(&str, BinOp)]; 5] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[
                ("==", BinOp::Eq),
                ("!=", BinOp::Ne),
                ("<=", BinOp::Le),
                (">=", BinOp::Ge),
                ("<", BinOp::Lt),
                (">", BinOp::Gt),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let Some(&(_, op)) = LEVELS[level].iter().find(|(p, _)| self.is_punct(p)) else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_punct("-") {
            self.bump();
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.is_punct("!") {
            self.bump();
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) if self.is_punct("(") => {
                let (builtin, arity) = Builtin::lookup(&name)
                    .ok_or_else(|| CompileError { pos, message: format!("call to unknown function `{name}`") })?;
                self.bump();
                let mut args = Vec::new();
                while !self.is_punct(")") {
                    args.push(self.expr()?);
                    if !self.is_punct(")") {
                        self.expect(",")?;
                    }
                }
                self.bump();
                if args.len() != arity {
                    return Err(CompileError {
                        pos,
                        message: format!("`{name}` takes {arity} argument(s), {} given", args.len()),
                    });
                }
                Ok(Expr::Call(builtin, args, pos))
            }
            Tok::Ident(name) => match name.as_str() {
                "IN" => Ok(Expr::Const(BUF_IN)),
                "OUT" => Ok(Expr::Const(BUF_OUT)),
                "AUX" => Ok(Expr::Const(BUF_AUX)),
                _ if is_keyword(&name) => Err(CompileError { pos, message: format!("unexpected keyword `{name}`") }),
                _ => self
                    .resolve(&name)
                    .map(Expr::Local)
                    .ok_or_else(|| CompileError { pos, message: format!("use of undeclared identifier `{name}`") }),
            },
            other => Err(CompileError { pos, message: format!("expected expression, found {other}") }),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "kernel" | "let" | "if" | "else" | "for" | "in" | "return" | "fail")
}
