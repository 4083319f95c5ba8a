//! Recursive-descent parser for the qwhile concrete syntax.
//!
//! ```text
//! program := decl* stmt*
//! decl    := "var" name ":" type ";"
//! type    := tfactor ("*" tfactor)*        tfactor := tatom ("^" int)*
//! tatom   := "bool" | "int" "<" n ">" | "(" type ")"
//! stmt    := "skip;" | "abort;"
//!          | lhs ":=" "|" literal ">" ";"
//!          | lhs ":=" "state" "(" expr ")" ";"
//!          | lhs ":=" gate "[" lhs "]" ";"
//!          | "if" "meas" "[" lhs "]" "{" (value "->" block)+ ("else" "->" block)? "}"
//!          | "while" "meas" "[" name "]" "=" value block
//!          | "for" ident ("<" iexpr | "in" "[" iexpr ("," iexpr)* "]") block
//! lhs     := varref | "[" varref ("," varref)+ "]"
//! varref  := name ("[" iexpr "]")?
//! ```
//!
//! Comments run from `//` to end of line; whitespace is free-form. Gate
//! names resolve against the built-in registry or a sidecar map of named
//! matrices. Declaring a pair or tuple variable also registers component
//! views `x[0]`, `x[1]`, ... so loop bodies can address components.

use super::{Measurement, Program, QwhileError, Result};
use crate::dirac::{self, VarId, VarTable};
use crate::linalg::ComplexMatrix;
use crate::qtypes::{self, QType};
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Assign,
    Arrow,
    Semi,
    Colon,
    Comma,
    Lt,
    Gt,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Pipe,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Caret,
}

#[derive(Debug, Clone, Copy)]
struct Span {
    byte: usize,
    line: usize,
    col: usize,
}

/// Result of parsing a source file: the variable table and the top-level
/// statement list (also available pre-sequenced).
#[derive(Debug, Clone)]
pub struct ParsedProgram {
    pub table: VarTable,
    pub stmts: Vec<Program>,
}

impl ParsedProgram {
    pub fn program(&self) -> Program {
        Program::desugar_for(self.stmts.clone())
    }

    /// Sequenced sub-program covering statements `[from, to)`.
    pub fn span_program(&self, from: usize, to: usize) -> Option<Program> {
        if from > to || to > self.stmts.len() {
            return None;
        }
        Some(Program::desugar_for(self.stmts[from..to].to_vec()))
    }
}

struct Lexer;

impl Lexer {
    fn lex(src: &str) -> Result<Vec<(Span, Tok)>> {
        let bytes = src.as_bytes();
        let mut out = Vec::new();
        let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
        macro_rules! push {
            ($t:expr, $n:expr) => {{
                out.push((Span { byte: i, line, col }, $t));
                i += $n;
                col += $n;
            }};
        }
        while i < bytes.len() {
            let c = bytes[i] as char;
            match c {
                '\n' => {
                    i += 1;
                    line += 1;
                    col = 1;
                }
                ' ' | '\t' | '\r' => {
                    i += 1;
                    col += 1;
                }
                '/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                ':' if i + 1 < bytes.len() && bytes[i + 1] == b'=' => push!(Tok::Assign, 2),
                '-' if i + 1 < bytes.len() && bytes[i + 1] == b'>' => push!(Tok::Arrow, 2),
                ';' => push!(Tok::Semi, 1),
                ':' => push!(Tok::Colon, 1),
                ',' => push!(Tok::Comma, 1),
                '<' => push!(Tok::Lt, 1),
                '>' => push!(Tok::Gt, 1),
                '(' => push!(Tok::LParen, 1),
                ')' => push!(Tok::RParen, 1),
                '[' => push!(Tok::LBracket, 1),
                ']' => push!(Tok::RBracket, 1),
                '{' => push!(Tok::LBrace, 1),
                '}' => push!(Tok::RBrace, 1),
                '|' => push!(Tok::Pipe, 1),
                '=' => push!(Tok::Eq, 1),
                '+' => push!(Tok::Plus, 1),
                '-' => push!(Tok::Minus, 1),
                '*' => push!(Tok::Star, 1),
                '/' => push!(Tok::Slash, 1),
                '%' => push!(Tok::Percent, 1),
                '^' => push!(Tok::Caret, 1),
                d if d.is_ascii_digit() => {
                    let start = i;
                    let scol = col;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                        col += 1;
                    }
                    let is_float = i + 1 < bytes.len()
                        && bytes[i] == b'.'
                        && (bytes[i + 1] as char).is_ascii_digit();
                    if is_float {
                        i += 1;
                        col += 1;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                            col += 1;
                        }
                        let v: f64 = src[start..i].parse().map_err(|_| QwhileError::Syntax {
                            line,
                            col: scol,
                            msg: "bad float".into(),
                        })?;
                        out.push((Span { byte: start, line, col: scol }, Tok::Float(v)));
                    } else {
                        let v: i64 = src[start..i].parse().map_err(|_| QwhileError::Syntax {
                            line,
                            col: scol,
                            msg: "bad integer".into(),
                        })?;
                        out.push((Span { byte: start, line, col: scol }, Tok::Int(v)));
                    }
                }
                a if a.is_alphabetic() || a == '_' => {
                    let start = i;
                    let scol = col;
                    while i < bytes.len()
                        && ((bytes[i] as char).is_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                        col += 1;
                    }
                    out.push((
                        Span { byte: start, line, col: scol },
                        Tok::Ident(src[start..i].to_string()),
                    ));
                }
                other => {
                    return Err(QwhileError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Gate expression before resolution against target dimensions.
#[derive(Debug, Clone)]
enum GateExpr {
    Named(String, Vec<GateParam>),
}

#[derive(Debug, Clone)]
enum GateParam {
    Num(f64),
    Gate(GateExpr),
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Span, Tok)>,
    pos: usize,
    table: VarTable,
    sidecar: &'a HashMap<String, ComplexMatrix>,
    bindings: Vec<(String, i64)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn span(&self) -> Span {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|(s, _)| *s)
            .unwrap_or(Span { byte: 0, line: 0, col: 0 })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let s = self.span();
        Err(QwhileError::Syntax { line: s.line, col: s.col, msg: msg.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.bump() {
                Some(Tok::Ident(s)) => Ok(s),
                _ => unreachable!(),
            },
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn at_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    // ---- types ----

    fn qtype(&mut self) -> Result<QType> {
        let mut acc = self.qtype_factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            let rhs = self.qtype_factor()?;
            acc = QType::Pair(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn qtype_factor(&mut self) -> Result<QType> {
        let mut acc = self.qtype_atom()?;
        while self.peek() == Some(&Tok::Caret) {
            self.bump();
            match self.bump() {
                Some(Tok::Int(n)) if n >= 1 => {
                    acc = QType::Tuple(Box::new(acc), n as usize);
                }
                _ => return self.fail("expected a positive tuple arity"),
            }
        }
        Ok(acc)
    }

    fn qtype_atom(&mut self) -> Result<QType> {
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            let t = self.qtype()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(t);
        }
        let name = self.ident("a type")?;
        match name.as_str() {
            "bool" => Ok(QType::Bool),
            "int" => {
                self.expect(Tok::Lt, "`<`")?;
                let n = match self.bump() {
                    Some(Tok::Int(n)) if n >= 1 => n as usize,
                    _ => return self.fail("expected a positive dimension"),
                };
                self.expect(Tok::Gt, "`>`")?;
                Ok(QType::ZN(n))
            }
            other => self.fail(format!("unknown type `{other}`")),
        }
    }

    // ---- integer expressions over loop indices ----

    fn iexpr(&mut self) -> Result<i64> {
        let mut acc = self.iterm()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc += self.iterm()?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc -= self.iterm()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn iterm(&mut self) -> Result<i64> {
        let mut acc = self.ifactor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc *= self.ifactor()?;
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let d = self.ifactor()?;
                    if d == 0 {
                        return self.fail("division by zero");
                    }
                    acc /= d;
                }
                Some(Tok::Percent) => {
                    self.bump();
                    let d = self.ifactor()?;
                    if d == 0 {
                        return self.fail("modulo by zero");
                    }
                    acc %= d;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn ifactor(&mut self) -> Result<i64> {
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            return Ok(-self.ifactor()?);
        }
        let base = match self.bump() {
            Some(Tok::Int(n)) => n,
            Some(Tok::Ident(name)) => match self.bindings.iter().rev().find(|(n, _)| *n == name) {
                Some((_, v)) => *v,
                None => return self.fail(format!("unbound index `{name}`")),
            },
            Some(Tok::LParen) => {
                let v = self.iexpr()?;
                self.expect(Tok::RParen, "`)`")?;
                v
            }
            _ => return self.fail("expected an integer expression"),
        };
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let e = self.ifactor()?;
            if e < 0 {
                return self.fail("negative exponent");
            }
            return Ok(base.pow(e as u32));
        }
        Ok(base)
    }

    // ---- scalar expressions for gate parameters ----

    fn sexpr(&mut self) -> Result<f64> {
        let mut acc = self.sterm()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc += self.sterm()?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc -= self.sterm()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn sterm(&mut self) -> Result<f64> {
        let mut acc = self.sfactor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc *= self.sfactor()?;
                }
                Some(Tok::Slash) => {
                    self.bump();
                    acc /= self.sfactor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn sfactor(&mut self) -> Result<f64> {
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            return Ok(-self.sfactor()?);
        }
        let base = match self.bump() {
            Some(Tok::Int(n)) => n as f64,
            Some(Tok::Float(v)) => v,
            Some(Tok::Ident(name)) => {
                if name == "pi" {
                    PI
                } else {
                    match self.bindings.iter().rev().find(|(n, _)| *n == name) {
                        Some((_, v)) => *v as f64,
                        None => return self.fail(format!("unbound name `{name}`")),
                    }
                }
            }
            Some(Tok::LParen) => {
                let v = self.sexpr()?;
                self.expect(Tok::RParen, "`)`")?;
                v
            }
            _ => return self.fail("expected a scalar expression"),
        };
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let e = self.sfactor()?;
            return Ok(base.powf(e));
        }
        Ok(base)
    }

    // ---- variables ----

    fn varref(&mut self) -> Result<VarId> {
        let name = self.ident("a variable")?;
        let full = if self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let idx = self.iexpr()?;
            self.expect(Tok::RBracket, "`]`")?;
            format!("{name}[{idx}]")
        } else {
            name.clone()
        };
        self.table.lookup(&full).ok_or(QwhileError::UnknownVariable(full))
    }

    fn lhs(&mut self) -> Result<Vec<VarId>> {
        if self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let mut vars = vec![self.varref()?];
            while self.peek() == Some(&Tok::Comma) {
                self.bump();
                vars.push(self.varref()?);
            }
            self.expect(Tok::RBracket, "`]`")?;
            Ok(vars)
        } else {
            Ok(vec![self.varref()?])
        }
    }

    // ---- values / literals ----

    fn literal(&mut self) -> Result<Literal> {
        match self.bump() {
            Some(Tok::Int(n)) if n >= 0 => Ok(Literal::Int(n as usize)),
            Some(Tok::LParen) => {
                let mut items = vec![self.literal()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    items.push(self.literal()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Literal::Tuple(items))
            }
            Some(Tok::Ident(name)) => {
                match self.bindings.iter().rev().find(|(n, _)| *n == name) {
                    Some((_, v)) if *v >= 0 => Ok(Literal::Int(*v as usize)),
                    Some(_) => self.fail("negative value literal"),
                    None => self.fail(format!("unbound name `{name}` in value")),
                }
            }
            _ => self.fail("expected a value literal"),
        }
    }

    /// Flat joint basis index of a literal against an ordered variable list.
    fn encode_literal(&self, vars: &[VarId], lit: &Literal) -> Result<usize> {
        let dims: Vec<usize> =
            vars.iter().map(|&v| self.table.var(v).qtype.dimension()).collect();
        let total: usize = dims.iter().product();
        match lit {
            Literal::Int(n) => {
                if *n >= total {
                    return Err(QwhileError::Type(format!(
                        "value {n} out of range for dimension {total}"
                    )));
                }
                Ok(*n)
            }
            Literal::Tuple(items) => {
                if items.len() != vars.len() {
                    // A tuple literal may also address the components of a
                    // single composite variable.
                    if vars.len() == 1 {
                        let ty = &self.table.var(vars[0]).qtype;
                        return self.encode_against_type(ty, lit);
                    }
                    return Err(QwhileError::Type(format!(
                        "literal arity {} does not match {} variables",
                        items.len(),
                        vars.len()
                    )));
                }
                let mut idx = 0usize;
                for (item, (&v, &d)) in items.iter().zip(vars.iter().zip(&dims)) {
                    let ty = &self.table.var(v).qtype;
                    let part = self.encode_against_type(ty, item)?;
                    let _ = d;
                    idx = idx * ty.dimension() + part;
                }
                Ok(idx)
            }
        }
    }

    fn encode_against_type(&self, ty: &QType, lit: &Literal) -> Result<usize> {
        match lit {
            Literal::Int(n) => {
                if *n >= ty.dimension() {
                    return Err(QwhileError::Type(format!(
                        "value {n} out of range for type {ty}"
                    )));
                }
                Ok(*n)
            }
            Literal::Tuple(items) => match ty {
                QType::Pair(a, b) => {
                    if items.len() != 2 {
                        return Err(QwhileError::Type("pair literal needs two entries".into()));
                    }
                    let l = self.encode_against_type(a, &items[0])?;
                    let r = self.encode_against_type(b, &items[1])?;
                    Ok(l * b.dimension() + r)
                }
                QType::Tuple(t, k) => {
                    if items.len() != *k {
                        return Err(QwhileError::Type(format!("tuple literal needs {k} entries")));
                    }
                    let mut idx = 0usize;
                    for item in items {
                        idx = idx * t.dimension() + self.encode_against_type(t, item)?;
                    }
                    Ok(idx)
                }
                other => Err(QwhileError::Type(format!("tuple literal for scalar type {other}"))),
            },
        }
    }

    // ---- gates ----

    fn gate_expr(&mut self) -> Result<GateExpr> {
        let name = self.ident("a gate name")?;
        let mut params = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            loop {
                let is_gate = matches!(self.peek(), Some(Tok::Ident(n))
                    if self.is_gate_name(n) && !self.bindings.iter().any(|(b, _)| b == n));
                if is_gate {
                    params.push(GateParam::Gate(self.gate_expr()?));
                } else {
                    params.push(GateParam::Num(self.sexpr()?));
                }
                match self.bump() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => return self.fail("expected `,` or `)` in gate parameters"),
                }
            }
        }
        Ok(GateExpr::Named(name, params))
    }

    fn is_gate_name(&self, name: &str) -> bool {
        self.sidecar.contains_key(name)
            || matches!(
                name,
                "H" | "X" | "Y" | "Z" | "S" | "Ph" | "CU" | "CZ" | "SWAP" | "QFT" | "IQFT" | "Hn"
            )
    }

    fn resolve_gate(&self, expr: &GateExpr, dims: &[usize]) -> Result<(ComplexMatrix, String)> {
        let GateExpr::Named(name, params) = expr;
        if let Some(m) = self.sidecar.get(name) {
            if !params.is_empty() {
                return Err(QwhileError::Type(format!("sidecar gate `{name}` takes no parameters")));
            }
            let total: usize = dims.iter().product();
            if m.rows() != total || m.cols() != total {
                return Err(QwhileError::Type(format!(
                    "gate `{name}` has dimension {}, target has {total}",
                    m.rows()
                )));
            }
            return Ok((m.clone(), name.clone()));
        }
        if name == "CU" {
            if dims.len() < 2 || dims[0] != 2 {
                return Err(QwhileError::Type("CU needs a qubit control then a target".into()));
            }
            let inner = match params.as_slice() {
                [GateParam::Gate(g)] => g,
                _ => return Err(QwhileError::Type("CU takes exactly one gate parameter".into())),
            };
            let (u, d) = self.resolve_gate(inner, &dims[1..])?;
            return Ok((qtypes::controlled(&u), format!("CU({d})")));
        }
        let nums: Vec<f64> = params
            .iter()
            .map(|p| match p {
                GateParam::Num(v) => Ok(*v),
                GateParam::Gate(_) => {
                    Err(QwhileError::Type(format!("gate `{name}` takes numeric parameters")))
                }
            })
            .collect::<Result<_>>()?;
        let spec = qtypes::builtin(name, &nums, dims).map_err(|e| match e {
            qtypes::GateError::UnknownGate(g) => QwhileError::UnknownGate(g),
            other => QwhileError::Gate(other),
        })?;
        let display = if nums.is_empty() {
            spec.name.clone()
        } else {
            let rendered: Vec<String> = nums.iter().map(|v| format!("{v:?}")).collect();
            format!("{}({})", spec.name, rendered.join(", "))
        };
        Ok((spec.matrix, display))
    }

    // ---- statements ----

    fn block(&mut self) -> Result<Vec<Program>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            if self.peek().is_none() {
                return self.fail("unterminated block");
            }
            self.stmt_into(&mut stmts)?;
        }
        self.bump();
        Ok(stmts)
    }

    /// Parses one statement; for-loops splice their expansion into `out` so
    /// that desugaring is flat.
    fn stmt_into(&mut self, out: &mut Vec<Program>) -> Result<()> {
        if self.at_ident("for") {
            return self.for_stmt(out);
        }
        let p = if self.at_ident("skip") {
            self.bump();
            self.expect(Tok::Semi, "`;`")?;
            Program::Skip
        } else if self.at_ident("abort") {
            self.bump();
            self.expect(Tok::Semi, "`;`")?;
            Program::Abort
        } else if self.at_ident("if") {
            self.if_stmt()?
        } else if self.at_ident("while") {
            self.while_stmt()?
        } else {
            self.assign_stmt()?
        };
        out.push(p);
        Ok(())
    }

    fn assign_stmt(&mut self) -> Result<Program> {
        let targets = self.lhs()?;
        self.expect(Tok::Assign, "`:=`")?;
        let prog = match self.peek() {
            Some(Tok::Pipe) => {
                self.bump();
                let lit = self.literal()?;
                self.expect(Tok::Gt, "`>`")?;
                let value = self.encode_literal(&targets, &lit)?;
                Program::init_basis(&self.table, &targets, value)?
            }
            Some(Tok::Ident(kw)) if kw == "state" => {
                self.bump();
                let expr_src = self.capture_parenthesized()?;
                let ket = dirac::parse::parse_assertion(&expr_src, &self.table)?;
                let norm = ket.norm();
                let ket = if (norm - 1.0).abs() > 1e-9 && norm > 0.0 {
                    ket.scale(crate::linalg::re(1.0 / norm))
                } else {
                    ket
                };
                Program::init_state(&self.table, &targets, &ket)?
            }
            _ => {
                let gate = self.gate_expr()?;
                self.expect(Tok::LBracket, "`[`")?;
                let mut args = vec![self.varref()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    args.push(self.varref()?);
                }
                self.expect(Tok::RBracket, "`]`")?;
                if args != targets {
                    return Err(QwhileError::Type(
                        "assignment target and gate argument lists differ".into(),
                    ));
                }
                let dims: Vec<usize> =
                    targets.iter().map(|&v| self.table.var(v).qtype.dimension()).collect();
                let (matrix, display) = self.resolve_gate(&gate, &dims)?;
                Program::unitary(&self.table, &targets, matrix, display)?
            }
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(prog)
    }

    /// Consumes a parenthesized group and returns its inner source text.
    fn capture_parenthesized(&mut self) -> Result<String> {
        if self.peek() != Some(&Tok::LParen) {
            return self.fail("expected `(`");
        }
        let open = self.span().byte;
        self.bump();
        let mut depth = 1usize;
        let mut close = open;
        while depth > 0 {
            let t = self.peek().cloned();
            close = self.span().byte;
            match t {
                Some(Tok::LParen) => depth += 1,
                Some(Tok::RParen) => depth -= 1,
                None => return self.fail("unterminated parenthesis"),
                _ => {}
            }
            self.bump();
        }
        Ok(self.src[open + 1..close].to_string())
    }

    fn if_stmt(&mut self) -> Result<Program> {
        self.bump(); // if
        if !self.at_ident("meas") {
            return self.fail("expected `meas`");
        }
        self.bump();
        self.expect(Tok::LBracket, "`[`")?;
        let mut vars = vec![self.varref()?];
        while self.peek() == Some(&Tok::Comma) {
            self.bump();
            vars.push(self.varref()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        let meas = Measurement::basis(&self.table, &vars)?;
        let n = meas.outcome_count();
        self.expect(Tok::LBrace, "`{`")?;
        let mut branches: Vec<Option<Program>> = vec![None; n];
        let mut default: Option<Program> = None;
        loop {
            if self.peek() == Some(&Tok::RBrace) {
                self.bump();
                break;
            }
            if self.at_ident("else") {
                self.bump();
                self.expect(Tok::Arrow, "`->`")?;
                let body = Program::desugar_for(self.block()?);
                if default.replace(body).is_some() {
                    return self.fail("duplicate `else` branch");
                }
                continue;
            }
            let lit = self.literal()?;
            let value = self.encode_literal(&vars, &lit)?;
            self.expect(Tok::Arrow, "`->`")?;
            let body = Program::desugar_for(self.block()?);
            if branches[value].replace(body).is_some() {
                return Err(QwhileError::Type(format!("duplicate branch for outcome {value}")));
            }
        }
        let fallback = default.unwrap_or(Program::Skip);
        let has_default = branches.iter().any(|b| b.is_none());
        if has_default && fallback == Program::Skip && !branches.iter().any(|b| b.is_some()) {
            return Err(QwhileError::Type("conditional with no branches".into()));
        }
        let branches: Vec<Program> =
            branches.into_iter().map(|b| b.unwrap_or_else(|| fallback.clone())).collect();
        Program::cond(meas, branches)
    }

    fn while_stmt(&mut self) -> Result<Program> {
        self.bump(); // while
        if !self.at_ident("meas") {
            return self.fail("expected `meas`");
        }
        self.bump();
        self.expect(Tok::LBracket, "`[`")?;
        let var = self.varref()?;
        self.expect(Tok::RBracket, "`]`")?;
        if self.table.var(var).qtype.dimension() != 2 {
            return Err(QwhileError::Type("while guard variable must be two-valued".into()));
        }
        self.expect(Tok::Eq, "`=`")?;
        let b = match self.bump() {
            Some(Tok::Int(0)) => false,
            Some(Tok::Int(1)) => true,
            _ => return self.fail("expected `0` or `1`"),
        };
        let meas = Measurement::basis(&self.table, &[var])?;
        let body = Program::desugar_for(self.block()?);
        Program::while_loop(meas, b, body)
    }

    fn for_stmt(&mut self, out: &mut Vec<Program>) -> Result<()> {
        self.bump(); // for
        let index = self.ident("a loop index")?;
        let values: Vec<i64> = match self.peek() {
            Some(Tok::Lt) => {
                self.bump();
                let n = self.iexpr()?;
                (0..n).collect()
            }
            Some(Tok::Ident(kw)) if kw == "in" => {
                self.bump();
                self.expect(Tok::LBracket, "`[`")?;
                let mut vs = vec![self.iexpr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    vs.push(self.iexpr()?);
                }
                self.expect(Tok::RBracket, "`]`")?;
                vs
            }
            _ => return self.fail("expected `<` or `in`"),
        };
        if values.is_empty() {
            self.skip_block()?;
            return Ok(());
        }
        // Re-parse the block once per index value.
        let block_start = self.pos;
        let mut end_pos = self.pos;
        for &v in &values {
            self.pos = block_start;
            self.bindings.push((index.clone(), v));
            let stmts = self.block()?;
            self.bindings.pop();
            out.extend(stmts);
            end_pos = self.pos;
        }
        self.pos = end_pos;
        Ok(())
    }

    fn skip_block(&mut self) -> Result<()> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut depth = 1usize;
        while depth > 0 {
            match self.bump() {
                Some(Tok::LBrace) => depth += 1,
                Some(Tok::RBrace) => depth -= 1,
                None => return self.fail("unterminated block"),
                _ => {}
            }
        }
        Ok(())
    }

    fn declarations(&mut self) -> Result<()> {
        while self.at_ident("var") {
            self.bump();
            let name = self.ident("a variable name")?;
            self.expect(Tok::Colon, "`:`")?;
            let ty = self.qtype()?;
            self.expect(Tok::Semi, "`;`")?;
            let id = self.table.declare(&name, ty.clone())?;
            // Component views for composite variables: x[0], x[1], ...
            let comps: Vec<QType> = match &ty {
                QType::Tuple(t, k) => vec![(**t).clone(); *k],
                QType::Pair(a, b) => vec![(**a).clone(), (**b).clone()],
                _ => vec![],
            };
            if !comps.is_empty() {
                let labels = self.table.var(id).labels.clone();
                let mut offset = 0usize;
                for (i, comp) in comps.iter().enumerate() {
                    let width = comp.atoms().len();
                    self.table.declare_view(
                        &format!("{name}[{i}]"),
                        comp.clone(),
                        labels[offset..offset + width].to_vec(),
                    )?;
                    offset += width;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Literal {
    Int(usize),
    Tuple(Vec<Literal>),
}

/// Parses a qwhile source file into a variable table and statement list.
pub fn parse_program(src: &str, sidecar: &HashMap<String, ComplexMatrix>) -> Result<ParsedProgram> {
    let toks = Lexer::lex(src)?;
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        table: VarTable::new(),
        sidecar,
        bindings: Vec::new(),
    };
    p.declarations()?;
    let mut stmts = Vec::new();
    while p.peek().is_some() {
        p.stmt_into(&mut stmts)?;
    }
    Ok(ParsedProgram { table: p.table, stmts })
}

/// Loads a gate sidecar: a JSON object mapping gate names to row-major
/// `[re, im]` pair lists of square matrices.
pub fn parse_gate_sidecar(json: &str) -> Result<HashMap<String, ComplexMatrix>> {
    let raw: HashMap<String, Vec<[f64; 2]>> =
        serde_json::from_str(json).map_err(|e| QwhileError::Type(format!("bad sidecar: {e}")))?;
    let mut out = HashMap::new();
    for (name, entries) in raw {
        let n = (entries.len() as f64).sqrt().round() as usize;
        if n * n != entries.len() {
            return Err(QwhileError::Type(format!("gate `{name}` is not square")));
        }
        let data = entries.iter().map(|[r, i]| crate::linalg::Scalar::new(*r, *i)).collect();
        let m = ComplexMatrix::new(n, n, data)?;
        out.insert(name, m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::LabelledOperator;
    use crate::qtypes::hadamard;

    fn no_gates() -> HashMap<String, ComplexMatrix> {
        HashMap::new()
    }

    #[test]
    fn parses_basis_init() {
        let p = parse_program("var x : bool; x := |0>;", &no_gates()).unwrap();
        assert_eq!(p.stmts.len(), 1);
        match &p.stmts[0] {
            Program::Init { state, .. } => {
                let x = p.table.lookup("x").unwrap();
                let expected = LabelledOperator::basis_ket(&p.table, &p.table.var(x).labels, 0)
                    .unwrap()
                    .outer_with_self()
                    .unwrap();
                assert!(state.approx_eq(&expected, 0.0));
            }
            other => panic!("expected Init, got {other:?}"),
        }
    }

    #[test]
    fn parses_sidecar_cnot() {
        let sidecar = parse_gate_sidecar(
            r#"{"CNOT": [[1,0],[0,0],[0,0],[0,0],
                         [0,0],[1,0],[0,0],[0,0],
                         [0,0],[0,0],[0,0],[1,0],
                         [0,0],[0,0],[1,0],[0,0]]}"#,
        )
        .unwrap();
        let p = parse_program(
            "var x : bool; var y : bool; [x,y] := CNOT[x,y];",
            &sidecar,
        )
        .unwrap();
        match &p.stmts[0] {
            Program::Unitary { op, .. } => {
                let expected = crate::qtypes::oracle(&[0, 1], 2).unwrap();
                assert!(op.matrix().approx_eq(&expected, 1e-12));
            }
            other => panic!("expected Unitary, got {other:?}"),
        }
    }

    #[test]
    fn rejects_repeated_target() {
        let err = parse_program("var x : bool; [x,x] := SWAP[x,x];", &no_gates());
        assert!(matches!(err, Err(QwhileError::Disjointness(_))), "{err:?}");
    }

    #[test]
    fn rejects_mismatched_gate_args() {
        let err = parse_program("var x : bool; var y : bool; x := H[y];", &no_gates());
        assert!(matches!(err, Err(QwhileError::Type(_))));
    }

    #[test]
    fn parses_if_with_else() {
        let src = "var x : bool; var y : int<3>;\n\
                   if meas [y] { 0 -> { x := H[x]; } else -> { skip; } }";
        let p = parse_program(src, &no_gates()).unwrap();
        match &p.stmts[0] {
            Program::Cond { branches, .. } => {
                assert_eq!(branches.len(), 3);
                assert!(matches!(branches[0], Program::Unitary { .. }));
                assert_eq!(branches[1], Program::Skip);
                assert_eq!(branches[2], Program::Skip);
            }
            other => panic!("expected Cond, got {other:?}"),
        }
    }

    #[test]
    fn if_without_totality_fails() {
        let src = "var y : int<3>; if meas [y] { 0 -> { skip; } }";
        // Branch map must be total; outcomes 1 and 2 are missing.
        let p = parse_program(src, &no_gates());
        assert!(p.is_ok(), "default fills missing branches only with else");
        match &p.unwrap().stmts[0] {
            Program::Cond { branches, .. } => {
                assert_eq!(branches[1], Program::Skip);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn parses_while_loop() {
        let src = "var x : bool; x := |0>; x := H[x]; while meas [x] = 1 { x := H[x]; }";
        let p = parse_program(src, &no_gates()).unwrap();
        assert_eq!(p.stmts.len(), 3);
        match &p.stmts[2] {
            Program::While { continue_on, .. } => assert!(*continue_on),
            other => panic!("expected While, got {other:?}"),
        }
    }

    #[test]
    fn for_loop_expands() {
        let src = "var x : bool ^ 3; for k < 3 { x[k] := H[x[k]]; }";
        let p = parse_program(src, &no_gates()).unwrap();
        let prog = p.program();
        assert_eq!(prog.statements().len(), 3);
        // Distinct components are targeted.
        let stmts = prog.statements();
        let footprints: Vec<_> = stmts.iter().map(|s| s.footprint()).collect();
        assert!(footprints[0].is_disjoint(&footprints[1]));
        assert!(footprints[1].is_disjoint(&footprints[2]));
    }

    #[test]
    fn for_in_list_and_arithmetic() {
        let src = "var x : bool ^ 4; for k in [0, 3-1] { x[k] := H[x[k]]; }";
        let p = parse_program(src, &no_gates()).unwrap();
        assert_eq!(p.stmts.len(), 2);
        let src = "var x : bool ^ 4; for k < 0 { x[k] := H[x[k]]; }";
        let p = parse_program(src, &no_gates()).unwrap();
        assert_eq!(p.program(), Program::Skip);
    }

    #[test]
    fn parses_state_init() {
        let src = "var x : bool; x := state(1/sqrt(2)*(ket(x,0)+ket(x,1)));";
        let p = parse_program(src, &no_gates()).unwrap();
        match &p.stmts[0] {
            Program::Init { state, .. } => {
                let plus = hadamard().matmul(&ComplexMatrix::col_vec(&[
                    crate::linalg::Scalar::ONE,
                    crate::linalg::Scalar::ZERO,
                ]))
                .unwrap();
                let rho = plus.matmul(&plus.adjoint()).unwrap();
                assert!(state.matrix().approx_eq(&rho, 1e-12));
            }
            other => panic!("expected Init, got {other:?}"),
        }
    }

    #[test]
    fn tuple_literals_encode() {
        let src = "var x : bool; var y : int<3>; [x,y] := |(1,2)>;";
        let p = parse_program(src, &no_gates()).unwrap();
        match &p.stmts[0] {
            Program::Init { state, .. } => {
                // (1,2) -> 1*3+2 = 5
                assert!((state.matrix().get(5, 5) - crate::linalg::Scalar::ONE).norm() < 1e-12);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_names_error() {
        assert!(matches!(
            parse_program("var x : bool; x := NOPE[x];", &no_gates()),
            Err(QwhileError::UnknownGate(_))
        ));
        assert!(matches!(
            parse_program("var x : bool; z := H[z];", &no_gates()),
            Err(QwhileError::UnknownVariable(_))
        ));
    }

    #[test]
    fn pretty_print_round_trips() {
        let src = "var x : bool; var y : int<3>; var q : bool ^ 2;\n\
                   x := |0>;\n\
                   x := H[x];\n\
                   for k < 2 { q[k] := H[q[k]]; }\n\
                   if meas [x] { 1 -> { y := |2>; } else -> { skip; } }\n\
                   while meas [x] = 1 { x := H[x]; }";
        let p1 = parse_program(src, &no_gates()).unwrap();
        let printed = {
            let decls = "var x : bool; var y : int<3>; var q : bool ^ 2;\n";
            format!("{decls}{}", p1.program().pretty(&p1.table))
        };
        let p2 = parse_program(&printed, &no_gates()).unwrap();
        assert_eq!(p1.program(), p2.program());
    }

    #[test]
    fn parses_cu_ph_gate() {
        let src = "var x : bool; var y : bool; [x,y] := CU(Ph(pi/2))[x,y];";
        let p = parse_program(src, &no_gates()).unwrap();
        match &p.stmts[0] {
            Program::Unitary { op, .. } => {
                let expected = qtypes::controlled(&qtypes::phase(PI / 2.0));
                assert!(op.matrix().approx_eq(&expected, 1e-12));
            }
            _ => panic!(),
        }
    }
}
