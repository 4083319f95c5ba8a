//! Textual assertion grammar over labelled operators.
//!
//! Expressions combine `ket(x, k)`, `bra(x, k)`, `proj(x, k)`, `I(x, ...)`,
//! scalar literals (including rationals, `sqrt(..)`, `pi`, `i`, `e^(..)`),
//! the operators `+`, `-`, `*` (composition), `(x)` (tensor product), `/`
//! (scalar division), `^` (scalar power), `adj(..)` and
//! `sum(k in 0..n, expr)`. Pre/post-conditions in spec files and proof
//! outline witnesses are written in this grammar.
//!
//! Tuple variables support component access: `ket(x[2], 0)` addresses the
//! third component of `x`. Inside a `sum`, the bound name shadows the
//! imaginary unit if it is called `i`.

use super::{DiracError, Label, LabelSet, LabelledOperator, Result, VarTable};
use crate::linalg::Scalar;
use crate::qtypes::QType;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
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
    DotDot,
    TensorOp,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut out = Vec::new();
    while i < bytes.len() {
        let ch = bytes[i] as char;
        match ch {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            '[' => {
                out.push((i, Tok::LBracket));
                i += 1;
            }
            ']' => {
                out.push((i, Tok::RBracket));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '(' => {
                // `(x)` is the tensor-product operator, provided the x is not
                // the start of a longer identifier.
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j] as char).is_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'x' {
                    let mut k = j + 1;
                    let boundary = k >= bytes.len()
                        || !(bytes[k] as char).is_alphanumeric() && bytes[k] != b'_';
                    while k < bytes.len() && (bytes[k] as char).is_whitespace() {
                        k += 1;
                    }
                    if boundary && k < bytes.len() && bytes[k] == b')' {
                        out.push((i, Tok::TensorOp));
                        i = k + 1;
                        continue;
                    }
                }
                out.push((i, Tok::LParen));
                i += 1;
            }
            '.' if i + 1 < bytes.len() && bytes[i + 1] == b'.' => {
                out.push((i, Tok::DotDot));
                i += 2;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'.' && (bytes[i + 1] as char).is_ascii_digit()
                {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let num = text
                    .parse::<f64>()
                    .map_err(|_| DiracError::Syntax(start, format!("bad number `{text}`")))?;
                out.push((start, Tok::Num(num)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            other => {
                return Err(DiracError::Syntax(i, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    table: &'a VarTable,
    bindings: Vec<(String, i64)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(usize::MAX)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let at = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(DiracError::Syntax(at, format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<LabelledOperator> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = acc.add(&rhs)?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = acc.sub(&rhs)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<LabelledOperator> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = acc.compose(&rhs)?;
                }
                Some(Tok::TensorOp) => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = acc.tensor(&rhs)?;
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let at = self.here();
                    let rhs = self.unary()?;
                    let z = rhs.as_scalar().ok_or_else(|| {
                        DiracError::Syntax(at, "division by a non-scalar".into())
                    })?;
                    if z.norm() == 0.0 {
                        return Err(DiracError::Syntax(at, "division by zero".into()));
                    }
                    acc = acc.scale(Scalar::ONE / z);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<LabelledOperator> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.unary()?;
            return Ok(inner.scale(Scalar::new(-1.0, 0.0)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<LabelledOperator> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let at = self.here();
            let exp = self.unary()?;
            let (b, e) = match (base.as_scalar(), exp.as_scalar()) {
                (Some(b), Some(e)) => (b, e),
                _ => return Err(DiracError::Syntax(at, "power needs scalar operands".into())),
            };
            return Ok(LabelledOperator::scalar(b.powc(e)));
        }
        Ok(base)
    }

    fn integer_arg(&mut self) -> Result<i64> {
        let at = self.here();
        let v = self.expr()?;
        let z = v
            .as_scalar()
            .ok_or_else(|| DiracError::Syntax(at, "expected an integer expression".into()))?;
        if z.im.abs() > 1e-9 || (z.re - z.re.round()).abs() > 1e-9 {
            return Err(DiracError::Syntax(at, format!("expected an integer, got {z}")));
        }
        Ok(z.re.round() as i64)
    }

    /// Variable reference `name` or `name[index]`, resolved to the variable's
    /// ordered label run.
    fn var_ref(&mut self) -> Result<(Vec<Label>, usize)> {
        let at = self.here();
        let name = match self.bump() {
            Some(Tok::Ident(s)) => s,
            other => return Err(DiracError::Syntax(at, format!("expected variable, found {other:?}"))),
        };
        let id = self
            .table
            .lookup(&name)
            .ok_or_else(|| DiracError::UnknownVariable(name.clone()))?;
        let entry = self.table.var(id);
        let mut labels = entry.labels.clone();
        if matches!(self.peek(), Some(Tok::LBracket)) {
            self.bump();
            let idx = self.integer_arg()?;
            self.expect(Tok::RBracket)?;
            let comps: Vec<QType> = match &entry.qtype {
                QType::Tuple(t, k) => vec![(**t).clone(); *k],
                QType::Pair(a, b) => vec![(**a).clone(), (**b).clone()],
                _ => return Err(DiracError::Syntax(at, format!("`{name}` has no components"))),
            };
            if idx < 0 || idx as usize >= comps.len() {
                return Err(DiracError::Syntax(at, format!("component {idx} out of range")));
            }
            let mut offset = 0usize;
            for c in comps.iter().take(idx as usize) {
                offset += c.atoms().len();
            }
            let width = comps[idx as usize].atoms().len();
            labels = labels[offset..offset + width].to_vec();
        }
        let dim: usize = labels.iter().map(|&l| self.table.dim(l)).product();
        Ok((labels, dim))
    }

    fn atom(&mut self) -> Result<LabelledOperator> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Num(n)) => Ok(LabelledOperator::scalar(Scalar::new(n, 0.0))),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "pi" => Ok(LabelledOperator::scalar(Scalar::new(PI, 0.0))),
                "e" => Ok(LabelledOperator::scalar(Scalar::new(std::f64::consts::E, 0.0))),
                "sqrt" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let z = arg
                        .as_scalar()
                        .ok_or_else(|| DiracError::Syntax(at, "sqrt of a non-scalar".into()))?;
                    Ok(LabelledOperator::scalar(z.sqrt()))
                }
                "adj" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(arg.adjoint())
                }
                "ket" | "bra" | "proj" => {
                    self.expect(Tok::LParen)?;
                    let (labels, dim) = self.var_ref()?;
                    self.expect(Tok::Comma)?;
                    let k = self.integer_arg()?;
                    self.expect(Tok::RParen)?;
                    if k < 0 || k as usize >= dim {
                        return Err(DiracError::Syntax(
                            at,
                            format!("basis value {k} out of range for dimension {dim}"),
                        ));
                    }
                    let ket = LabelledOperator::basis_ket(self.table, &labels, k as usize)?;
                    match name.as_str() {
                        "ket" => Ok(ket),
                        "bra" => Ok(ket.adjoint()),
                        _ => Ok(ket.outer_with_self()?),
                    }
                }
                "I" => {
                    self.expect(Tok::LParen)?;
                    let mut labels = LabelSet::empty();
                    loop {
                        let (ls, _) = self.var_ref()?;
                        labels = labels.union(&LabelSet::from_slice(&ls));
                        match self.bump() {
                            Some(Tok::Comma) => continue,
                            Some(Tok::RParen) => break,
                            other => {
                                return Err(DiracError::Syntax(
                                    at,
                                    format!("expected `,` or `)`, found {other:?}"),
                                ))
                            }
                        }
                    }
                    Ok(LabelledOperator::identity(self.table, &labels))
                }
                "sum" => {
                    self.expect(Tok::LParen)?;
                    let idx_name = match self.bump() {
                        Some(Tok::Ident(s)) => s,
                        other => {
                            return Err(DiracError::Syntax(
                                at,
                                format!("expected sum index, found {other:?}"),
                            ))
                        }
                    };
                    match self.bump() {
                        Some(Tok::Ident(kw)) if kw == "in" => {}
                        other => {
                            return Err(DiracError::Syntax(
                                at,
                                format!("expected `in`, found {other:?}"),
                            ))
                        }
                    }
                    let lo = self.integer_arg()?;
                    self.expect(Tok::DotDot)?;
                    let hi = self.integer_arg()?;
                    self.expect(Tok::Comma)?;
                    if lo >= hi {
                        return Err(DiracError::Syntax(at, "empty sum range".into()));
                    }
                    let body_start = self.pos;
                    let mut acc: Option<LabelledOperator> = None;
                    for v in lo..hi {
                        self.pos = body_start;
                        self.bindings.push((idx_name.clone(), v));
                        let body = self.expr()?;
                        self.bindings.pop();
                        acc = Some(match acc {
                            None => body,
                            Some(a) => a.add(&body)?,
                        });
                    }
                    self.expect(Tok::RParen)?;
                    Ok(acc.expect("nonempty range"))
                }
                other => {
                    if let Some((_, v)) =
                        self.bindings.iter().rev().find(|(n, _)| n == other)
                    {
                        return Ok(LabelledOperator::scalar(Scalar::new(*v as f64, 0.0)));
                    }
                    if other == "i" {
                        return Ok(LabelledOperator::scalar(Scalar::new(0.0, 1.0)));
                    }
                    Err(DiracError::Syntax(at, format!("unknown name `{other}`")))
                }
            },
            other => Err(DiracError::Syntax(at, format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses and evaluates an assertion expression against a variable table.
pub fn parse_assertion(src: &str, table: &VarTable) -> Result<LabelledOperator> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, table, bindings: Vec::new() };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(DiracError::Syntax(p.here(), "trailing input".into()));
    }
    Ok(v)
}
