//! Expression parsing and evaluation on jet arithmetic.
//!
//! Immersion components are given as plain ASCII expressions in the surface
//! parameters `u` and `v`. The grammar is deliberately small:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' INT)*            INT is a literal (signed) integer
//! atom   := NUMBER | u | v | pi | e
//!         | sin|cos|exp|sqrt '(' expr ')'
//!         | atan2 '(' expr ',' expr ')'
//!         | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, same-precedence binaries associate
//! left, whitespace is insignificant, and there is no implicit
//! multiplication (`2u` is a parse error). Exponents are literal integers
//! only, which keeps jets exact and avoids log branches.

use crate::error::{Error, Result};
use crate::jet::{Jet3, ParamPoint};

/// Parse failure with a 1-based byte position and what was expected there.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("at offset {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    fn new(offset: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError { offset, expected: expected.into(), found: found.into() }
    }
}

/// Surface parameter slot an identifier resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree. Every node's arity is fixed by its kind and `^`
/// exponents are integers by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Number(f64),
    Var(Var),
    Const(NamedConst),
    Neg(Box<ExprAst>),
    Un(UnaryFn, Box<ExprAst>),
    Bin(BinOp, Box<ExprAst>, Box<ExprAst>),
    PowInt(Box<ExprAst>, i32),
    Atan2(Box<ExprAst>, Box<ExprAst>),
}

// ---------------------------------------------------------------- lexer --

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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

/// Tokens tagged with the 1-based byte offset of their first byte.
fn lex(text: &str) -> std::result::Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    if let Some(pos) = bytes.iter().position(|b| !b.is_ascii()) {
        return Err(ParseError::new(pos + 1, "ASCII input", "non-ASCII byte"));
    }
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i + 1; // 1-based
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '+' => {
                out.push((Tok::Plus, start));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, start));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, start));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, start));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, start));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            '0'..='9' | '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s = &text[i..j];
                let x: f64 = s
                    .parse()
                    .map_err(|_| ParseError::new(start, "a number", format!("'{s}'")))?;
                out.push((Tok::Num(x), start));
                i = j;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                out.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
            }
            _ => {
                return Err(ParseError::new(start, "a token", format!("'{c}'")));
            }
        }
    }
    out.push((Tok::Eof, bytes.len() + 1));
    Ok(out)
}

// --------------------------------------------------------------- parser --

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    var_u: &'a str,
    var_v: Option<&'a str>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> std::result::Result<(), ParseError> {
        let (t, off) = self.peek().clone();
        if t == tok {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::new(off, what, t.describe()))
        }
    }

    fn expr(&mut self) -> std::result::Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    lhs = ExprAst::Bin(BinOp::Add, Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = ExprAst::Bin(BinOp::Sub, Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    lhs = ExprAst::Bin(BinOp::Mul, Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = ExprAst::Bin(BinOp::Div, Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<ExprAst, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            Ok(ExprAst::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> std::result::Result<ExprAst, ParseError> {
        let mut base = self.atom()?;
        while self.peek().0 == Tok::Caret {
            self.bump();
            let n = self.int_literal()?;
            base = ExprAst::PowInt(Box::new(base), n);
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> std::result::Result<i32, ParseError> {
        let mut sign = 1i64;
        if self.peek().0 == Tok::Minus {
            self.bump();
            sign = -1;
        } else if self.peek().0 == Tok::Plus {
            self.bump();
        }
        let (t, off) = self.bump();
        match t {
            Tok::Num(x) if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 => {
                Ok((sign * x as i64) as i32)
            }
            other => Err(ParseError::new(off, "an integer exponent", other.describe())),
        }
    }

    fn atom(&mut self) -> std::result::Result<ExprAst, ParseError> {
        let (t, off) = self.bump();
        match t {
            Tok::Num(x) => Ok(ExprAst::Number(x)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == self.var_u {
                    return Ok(ExprAst::Var(Var::U));
                }
                if Some(name.as_str()) == self.var_v {
                    return Ok(ExprAst::Var(Var::V));
                }
                match name.as_str() {
                    "pi" => Ok(ExprAst::Const(NamedConst::Pi)),
                    "e" => Ok(ExprAst::Const(NamedConst::E)),
                    "sin" | "cos" | "exp" | "sqrt" => {
                        self.expect(Tok::LParen, "'('")?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "')'")?;
                        let f = match name.as_str() {
                            "sin" => UnaryFn::Sin,
                            "cos" => UnaryFn::Cos,
                            "exp" => UnaryFn::Exp,
                            _ => UnaryFn::Sqrt,
                        };
                        Ok(ExprAst::Un(f, Box::new(arg)))
                    }
                    "atan2" => {
                        self.expect(Tok::LParen, "'('")?;
                        let a = self.expr()?;
                        self.expect(Tok::Comma, "','")?;
                        let b = self.expr()?;
                        self.expect(Tok::RParen, "')'")?;
                        Ok(ExprAst::Atan2(Box::new(a), Box::new(b)))
                    }
                    _ => Err(ParseError::new(
                        off,
                        "a variable, constant or function name",
                        format!("identifier '{name}'"),
                    )),
                }
            }
            other => Err(ParseError::new(off, "an expression", other.describe())),
        }
    }
}

/// Parse with the default variable names `u` and `v`.
pub fn parse(text: &str) -> std::result::Result<ExprAst, ParseError> {
    parse_with_vars(text, "u", Some("v"))
}

/// Parse with custom variable names; loop curves use `t` as the only one.
pub fn parse_with_vars(
    text: &str,
    var_u: &str,
    var_v: Option<&str>,
) -> std::result::Result<ExprAst, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(1, "an expression", "empty input"));
    }
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, var_u, var_v };
    let ast = p.expr()?;
    let (t, off) = p.peek().clone();
    if t != Tok::Eof {
        return Err(ParseError::new(off, "end of input", t.describe()));
    }
    Ok(ast)
}

// ----------------------------------------------------------- evaluation --

/// Evaluate the expression as an order-3 jet at `p`.
pub fn eval_jet(ast: &ExprAst, p: ParamPoint) -> Result<Jet3> {
    match ast {
        ExprAst::Number(x) => Ok(Jet3::constant(*x)),
        ExprAst::Const(c) => Ok(Jet3::constant(c.value())),
        ExprAst::Var(Var::U) => Ok(Jet3::var_u(p.u)),
        ExprAst::Var(Var::V) => Ok(Jet3::var_v(p.v)),
        ExprAst::Neg(a) => Ok(-eval_jet(a, p)?),
        ExprAst::Un(f, a) => {
            let j = eval_jet(a, p)?;
            match f {
                UnaryFn::Sin => Ok(j.sin()),
                UnaryFn::Cos => Ok(j.cos()),
                UnaryFn::Exp => Ok(j.exp()),
                UnaryFn::Sqrt => j.sqrt(),
            }
        }
        ExprAst::Bin(op, a, b) => {
            let (ja, jb) = (eval_jet(a, p)?, eval_jet(b, p)?);
            match op {
                BinOp::Add => Ok(ja + jb),
                BinOp::Sub => Ok(ja - jb),
                BinOp::Mul => Ok(ja * jb),
                BinOp::Div => ja.div(&jb),
            }
        }
        ExprAst::PowInt(a, n) => eval_jet(a, p)?.powi(*n),
        ExprAst::Atan2(a, b) => Jet3::atan2(&eval_jet(a, p)?, &eval_jet(b, p)?),
    }
}

/// Evaluate the expression as a plain value; cheaper than a jet when no
/// derivatives are needed (loop sampling, finite-difference oracles).
pub fn eval_value(ast: &ExprAst, p: ParamPoint) -> Result<f64> {
    match ast {
        ExprAst::Number(x) => Ok(*x),
        ExprAst::Const(c) => Ok(c.value()),
        ExprAst::Var(Var::U) => Ok(p.u),
        ExprAst::Var(Var::V) => Ok(p.v),
        ExprAst::Neg(a) => Ok(-eval_value(a, p)?),
        ExprAst::Un(f, a) => {
            let x = eval_value(a, p)?;
            match f {
                UnaryFn::Sin => Ok(x.sin()),
                UnaryFn::Cos => Ok(x.cos()),
                UnaryFn::Exp => Ok(x.exp()),
                UnaryFn::Sqrt => {
                    if x > 0.0 {
                        Ok(x.sqrt())
                    } else {
                        Err(Error::Domain(format!("sqrt of non-positive value {x}")))
                    }
                }
            }
        }
        ExprAst::Bin(op, a, b) => {
            let (x, y) = (eval_value(a, p)?, eval_value(b, p)?);
            match op {
                BinOp::Add => Ok(x + y),
                BinOp::Sub => Ok(x - y),
                BinOp::Mul => Ok(x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        Err(Error::Domain("division by 0".into()))
                    } else {
                        Ok(x / y)
                    }
                }
            }
        }
        ExprAst::PowInt(a, n) => {
            let x = eval_value(a, p)?;
            if *n < 0 && x == 0.0 {
                return Err(Error::Domain("0 raised to a negative power".into()));
            }
            Ok(x.powi(*n))
        }
        ExprAst::Atan2(a, b) => {
            let (y, x) = (eval_value(a, p)?, eval_value(b, p)?);
            if x == 0.0 && y == 0.0 {
                return Err(Error::Domain("atan2 of (0, 0)".into()));
            }
            Ok(y.atan2(x))
        }
    }
}

/// Evaluate an expression that must not mention `u` or `v`.
pub fn const_eval(ast: &ExprAst) -> Result<f64> {
    if contains_var(ast) {
        return Err(Error::Param("expected a constant expression".into()));
    }
    eval_value(ast, ParamPoint::new(0.0, 0.0))
}

fn contains_var(ast: &ExprAst) -> bool {
    match ast {
        ExprAst::Var(_) => true,
        ExprAst::Number(_) | ExprAst::Const(_) => false,
        ExprAst::Neg(a) | ExprAst::Un(_, a) | ExprAst::PowInt(a, _) => contains_var(a),
        ExprAst::Bin(_, a, b) | ExprAst::Atan2(a, b) => contains_var(a) || contains_var(b),
    }
}

// ------------------------------------------------------------- printing --

impl std::fmt::Display for ExprAst {
    /// Canonical fully parenthesised form; re-parsing it reproduces the
    /// tree node for node.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExprAst::Number(x) => {
                if *x < 0.0 {
                    write!(f, "(-{})", -x)
                } else {
                    write!(f, "{x}")
                }
            }
            ExprAst::Var(Var::U) => write!(f, "u"),
            ExprAst::Var(Var::V) => write!(f, "v"),
            ExprAst::Const(NamedConst::Pi) => write!(f, "pi"),
            ExprAst::Const(NamedConst::E) => write!(f, "e"),
            ExprAst::Neg(a) => write!(f, "(-{a})"),
            ExprAst::Un(UnaryFn::Sin, a) => write!(f, "sin({a})"),
            ExprAst::Un(UnaryFn::Cos, a) => write!(f, "cos({a})"),
            ExprAst::Un(UnaryFn::Exp, a) => write!(f, "exp({a})"),
            ExprAst::Un(UnaryFn::Sqrt, a) => write!(f, "sqrt({a})"),
            ExprAst::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {s} {b})")
            }
            ExprAst::PowInt(a, n) => write!(f, "({a}^{n})"),
            ExprAst::Atan2(a, b) => write!(f, "atan2({a}, {b})"),
        }
    }
}

// --------------------------------------------------- surface definition --

/// Parsed contents of a surface definition file, before domain assembly.
///
/// File format: `key=value` lines with keys `x1 y1 x2 y2 domain_u domain_v
/// periodic_u periodic_v name`; `#` starts a comment; blank lines ignored.
/// Domain bounds are constant expressions, e.g. `domain_u=0,2*pi`.
#[derive(Debug, Clone)]
pub struct SurfaceDefinition {
    pub name: Option<String>,
    pub components: [ExprAst; 4],
    pub domain_u: (f64, f64),
    pub domain_v: (f64, f64),
    pub periodic_u: bool,
    pub periodic_v: bool,
}

/// Split on top-level commas only (commas inside parentheses stay put).
pub fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, b) in s.bytes().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

pub fn parse_surface_definition(text: &str) -> Result<SurfaceDefinition> {
    let mut name = None;
    let mut comps: [Option<ExprAst>; 4] = [None, None, None, None];
    let mut domain_u = None;
    let mut domain_v = None;
    let mut periodic_u = false;
    let mut periodic_v = false;

    let file_err = |line: usize, message: String| Error::SurfaceFile { line, message };

    let parse_bounds = |line: usize, value: &str| -> Result<(f64, f64)> {
        let parts = split_top_level(value);
        if parts.len() != 2 {
            return Err(file_err(line, format!("expected 'a,b', got '{value}'")));
        }
        let lo = const_eval(&parse(parts[0].trim()).map_err(|e| file_err(line, e.to_string()))?)?;
        let hi = const_eval(&parse(parts[1].trim()).map_err(|e| file_err(line, e.to_string()))?)?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(file_err(line, format!("invalid bounds {lo}, {hi}")));
        }
        Ok((lo, hi))
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(h) => &raw[..h],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let eq = line
            .find('=')
            .ok_or_else(|| file_err(lineno, format!("expected key=value, got '{}'", line.trim())))?;
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        let slot = |i: usize| -> usize { i };
        match key {
            "name" => name = Some(value.to_string()),
            "x1" | "y1" | "x2" | "y2" => {
                let i = slot(match key {
                    "x1" => 0,
                    "y1" => 1,
                    "x2" => 2,
                    _ => 3,
                });
                if comps[i].is_some() {
                    return Err(file_err(lineno, format!("duplicate key '{key}'")));
                }
                comps[i] =
                    Some(parse(value).map_err(|e| file_err(lineno, e.to_string()))?);
            }
            "domain_u" => domain_u = Some(parse_bounds(lineno, value)?),
            "domain_v" => domain_v = Some(parse_bounds(lineno, value)?),
            "periodic_u" | "periodic_v" => {
                let b = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(file_err(
                            lineno,
                            format!("expected true or false, got '{value}'"),
                        ))
                    }
                };
                if key == "periodic_u" {
                    periodic_u = b;
                } else {
                    periodic_v = b;
                }
            }
            _ => return Err(file_err(lineno, format!("unknown key '{key}'"))),
        }
    }

    let missing = |what: &str| Error::SurfaceFile {
        line: text.lines().count() + 1,
        message: format!("missing required key '{what}'"),
    };
    let [x1, y1, x2, y2] = comps;
    Ok(SurfaceDefinition {
        name,
        components: [
            x1.ok_or_else(|| missing("x1"))?,
            y1.ok_or_else(|| missing("y1"))?,
            x2.ok_or_else(|| missing("x2"))?,
            y2.ok_or_else(|| missing("y2"))?,
        ],
        domain_u: domain_u.ok_or_else(|| missing("domain_u"))?,
        domain_v: domain_v.ok_or_else(|| missing("domain_v"))?,
        periodic_u,
        periodic_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::jet::fd_oracle;

    #[test]
    fn parses_cos_u() {
        let ast = parse("cos(u)").unwrap();
        assert_eq!(ast, ExprAst::Un(UnaryFn::Cos, Box::new(ExprAst::Var(Var::U))));
    }

    #[test]
    fn precedence_of_product_and_power() {
        let ast = parse("u*cos(v) + 2^3").unwrap();
        let expect = ExprAst::Bin(
            BinOp::Add,
            Box::new(ExprAst::Bin(
                BinOp::Mul,
                Box::new(ExprAst::Var(Var::U)),
                Box::new(ExprAst::Un(UnaryFn::Cos, Box::new(ExprAst::Var(Var::V)))),
            )),
            Box::new(ExprAst::PowInt(Box::new(ExprAst::Number(2.0)), 3)),
        );
        assert_eq!(ast, expect);
        assert_eq!(eval_value(&ast, ParamPoint::new(0.0, 0.0)).unwrap(), 8.0);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        // -2^2 = -(2^2) = -4
        let ast = parse("-2^2").unwrap();
        assert_eq!(eval_value(&ast, ParamPoint::new(0.0, 0.0)).unwrap(), -4.0);
    }

    #[test]
    fn unbalanced_paren_reports_offset_six() {
        let err = parse("sin(u").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.expected.contains(")"));
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        let err = parse("2u").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains("end of input"));
    }

    #[test]
    fn non_integer_exponent_is_rejected() {
        assert!(parse("u^2.5").is_err());
        assert!(parse("u^v").is_err());
        assert!(parse("u^-2").is_ok());
    }

    #[test]
    fn jet_of_cos_u_at_origin() {
        let ast = parse("cos(u)").unwrap();
        let j = eval_jet(&ast, ParamPoint::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(j.value(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(1, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(2, 0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn jet_of_rational_matches_fd() {
        let ast = parse("u/(u*u+v*v)").unwrap();
        let p = ParamPoint::new(1.0, 0.0);
        let j = eval_jet(&ast, p).unwrap();
        assert_abs_diff_eq!(j.value(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(j.deriv(1, 0), -1.0, epsilon = 1e-14);
        let fd = fd_oracle(
            |q| eval_value(&ast, q).unwrap(),
            p,
            (1, 0),
            1e-5,
        );
        assert_abs_diff_eq!(j.deriv(1, 0), fd, epsilon = 1e-8);
    }

    #[test]
    fn sqrt_at_origin_is_domain_error() {
        let ast = parse("sqrt(u)").unwrap();
        assert!(matches!(
            eval_jet(&ast, ParamPoint::new(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn print_then_parse_is_identity() {
        for text in [
            "cos(u)",
            "u*cos(v) + 2^3",
            "-u^2 + atan2(v, u)/3",
            "sqrt(u*u + v*v) - pi*e",
            "1e-3*sin(u + v)^3",
            "u^-2 - -v",
        ] {
            let t1 = parse(text).unwrap();
            let printed = t1.to_string();
            let t2 = parse(&printed).unwrap();
            assert_eq!(t1, t2, "round-trip failed for {text} -> {printed}");
        }
    }

    #[test]
    fn print_then_parse_is_identity_on_random_trees() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        fn gen(rng: &mut rand_chacha::ChaCha8Rng, depth: usize) -> ExprAst {
            if depth == 0 {
                return match rng.gen_range(0..4) {
                    0 => ExprAst::Number(rng.gen_range(0..1000) as f64 / 8.0),
                    1 => ExprAst::Var(Var::U),
                    2 => ExprAst::Var(Var::V),
                    _ => ExprAst::Const(NamedConst::Pi),
                };
            }
            match rng.gen_range(0..8) {
                0 => ExprAst::Neg(Box::new(gen(rng, depth - 1))),
                1 => ExprAst::Un(UnaryFn::Sin, Box::new(gen(rng, depth - 1))),
                2 => ExprAst::Un(UnaryFn::Exp, Box::new(gen(rng, depth - 1))),
                3 => ExprAst::PowInt(Box::new(gen(rng, depth - 1)), rng.gen_range(-3..4)),
                4 => ExprAst::Atan2(
                    Box::new(gen(rng, depth - 1)),
                    Box::new(gen(rng, depth - 1)),
                ),
                k => {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k - 4];
                    ExprAst::Bin(op, Box::new(gen(rng, depth - 1)), Box::new(gen(rng, depth - 1)))
                }
            }
        }
        for _ in 0..200 {
            let depth = rng.gen_range(1..5);
            let t1 = gen(&mut rng, depth);
            let t2 = parse(&t1.to_string()).unwrap();
            assert_eq!(t1, t2);
        }
    }

    #[test]
    fn surface_definition_round_trip() {
        let text = "\
# a flat torus
name=demo
x1=cos(u)
y1=sin(u)
x2=cos(v)
y2=sin(v)
domain_u=0,2*pi
domain_v=0,2*pi
periodic_u=true
periodic_v=true
";
        let def = parse_surface_definition(text).unwrap();
        assert_eq!(def.name.as_deref(), Some("demo"));
        assert!(def.periodic_u && def.periodic_v);
        assert_abs_diff_eq!(def.domain_u.1, 2.0 * std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn surface_definition_errors_carry_line_numbers() {
        let bad = "x1=cos(u\ny1=sin(u)\nx2=cos(v)\ny2=sin(v)\ndomain_u=0,1\ndomain_v=0,1\n";
        match parse_surface_definition(bad) {
            Err(Error::SurfaceFile { line, message }) => {
                assert_eq!(line, 1);
                // value "cos(u" is 5 bytes; the missing ')' sits at offset 6
                assert!(message.contains("offset 6"), "message: {message}");
            }
            other => panic!("expected SurfaceFile error, got {other:?}"),
        }
    }
}
