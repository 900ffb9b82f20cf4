//! Map spec files.
//!
//! Grammar (UTF-8 text, one directive per line, `#` starts a comment):
//!
//! ```text
//! name = optional label
//! param eps = 0.1                  # default parameter values
//! matrix = 5 0 ; 0 2               # integer linear part, rows split by ';'
//! term <coord 0|1> <sin|cos> <k1> <k2> <coeff-expr>
//! ```
//!
//! A term contributes `coeff * kind(2π (k1 x + k2 y))` to the displacement of
//! the given coordinate. Coefficient expressions admit decimal and rational
//! literals, `pi`, declared parameters (e.g. `eps`), `+ - * /`, unary minus
//! and parentheses. Unknown directives are rejected.

use std::collections::BTreeMap;
use thiserror::Error;
use torusendo_core::{FourierTerm, IntMat2, PeriodicField, TorusEndomorphism, TrigKind};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
}

impl SpecError {
    fn at(line: usize, col: usize, msg: impl Into<String>) -> SpecError {
        SpecError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// Parsed spec file before map construction.
#[derive(Clone, Debug)]
pub struct MapSpecFile {
    pub name: Option<String>,
    pub matrix: IntMat2,
    pub terms: [Vec<FourierTerm>; 2],
    pub params: BTreeMap<String, f64>,
}

impl MapSpecFile {
    pub fn into_map(self) -> Result<TorusEndomorphism, SpecError> {
        for (k, v) in &self.params {
            if !v.is_finite() {
                return Err(SpecError::Validation(format!(
                    "parameter `{k}` must be finite, got {v}"
                )));
            }
        }
        let name = self.name.unwrap_or_else(|| "unnamed".to_string());
        let [tx, ty] = self.terms;
        let field = PeriodicField::new(tx, ty)
            .map_err(|e| SpecError::Validation(e.to_string()))?;
        TorusEndomorphism::new(self.matrix, field, name)
            .map_err(|e| SpecError::Validation(e.to_string()))
    }
}

/// Parses a spec file; `overrides` take precedence over `param` defaults.
pub fn parse_spec_str(
    src: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<MapSpecFile, SpecError> {
    let mut name = None;
    let mut matrix: Option<IntMat2> = None;
    let mut terms: [Vec<FourierTerm>; 2] = [Vec::new(), Vec::new()];
    let mut params: BTreeMap<String, f64> = BTreeMap::new();

    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;
        let mut words = trimmed.split_whitespace();
        let head = words.next().expect("nonempty line");
        match head {
            "name" => {
                let rest = expect_eq_rest(trimmed, "name", line_no, col)?;
                name = Some(rest.trim().to_string());
            }
            "param" => {
                let rest = trimmed["param".len()..].trim();
                let (pname, value) = rest.split_once('=').ok_or_else(|| {
                    SpecError::at(line_no, col, "expected `param <name> = <value>`")
                })?;
                let pname = pname.trim();
                if pname.is_empty() || !pname.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Err(SpecError::at(line_no, col, "invalid parameter name"));
                }
                let v: f64 = value.trim().parse().map_err(|_| {
                    SpecError::at(line_no, col, format!("invalid parameter value `{}`", value.trim()))
                })?;
                params.insert(pname.to_string(), v);
            }
            "matrix" => {
                let rest = expect_eq_rest(trimmed, "matrix", line_no, col)?;
                let rows: Vec<&str> = rest.split(';').collect();
                if rows.len() != 2 {
                    return Err(SpecError::at(line_no, col, "matrix needs two rows split by `;`"));
                }
                let mut m = [[0i64; 2]; 2];
                for (i, row) in rows.iter().enumerate() {
                    let entries: Vec<&str> = row.split_whitespace().collect();
                    if entries.len() != 2 {
                        return Err(SpecError::at(
                            line_no,
                            col,
                            format!("matrix row {} needs two integer entries", i + 1),
                        ));
                    }
                    for (j, e) in entries.iter().enumerate() {
                        m[i][j] = e.parse().map_err(|_| {
                            SpecError::at(line_no, col, format!("invalid matrix entry `{e}`"))
                        })?;
                    }
                }
                matrix = Some(IntMat2(m));
            }
            "term" => {
                let rest: Vec<&str> = words.collect();
                if rest.len() < 4 {
                    return Err(SpecError::at(
                        line_no,
                        col,
                        "expected `term <coord> <sin|cos> <k1> <k2> <coeff-expr>`",
                    ));
                }
                let coord: usize = rest[0].parse().map_err(|_| {
                    SpecError::at(line_no, col, format!("invalid coordinate `{}`", rest[0]))
                })?;
                if coord > 1 {
                    return Err(SpecError::at(line_no, col, "coordinate must be 0 or 1"));
                }
                let kind = match rest[1] {
                    "sin" => TrigKind::Sin,
                    "cos" => TrigKind::Cos,
                    other => {
                        return Err(SpecError::at(
                            line_no,
                            col,
                            format!("kind must be sin or cos, got `{other}`"),
                        ))
                    }
                };
                let k1: i64 = rest[2].parse().map_err(|_| {
                    SpecError::at(line_no, col, format!("invalid wavevector entry `{}`", rest[2]))
                })?;
                let k2: i64 = rest[3].parse().map_err(|_| {
                    SpecError::at(line_no, col, format!("invalid wavevector entry `{}`", rest[3]))
                })?;
                let expr_src = rest[4..].join(" ");
                if expr_src.is_empty() {
                    return Err(SpecError::at(line_no, col, "missing coefficient expression"));
                }
                let mut scope = params.clone();
                for (k, v) in overrides {
                    scope.insert(k.clone(), *v);
                }
                let coeff = eval_expr(&expr_src, &scope)
                    .map_err(|msg| SpecError::at(line_no, col, msg))?;
                if kind == TrigKind::Sin && k1 == 0 && k2 == 0 {
                    return Err(SpecError::Validation(
                        "sin term with zero wavevector is identically zero".into(),
                    ));
                }
                terms[coord].push(FourierTerm {
                    coeff,
                    kind,
                    wave: [k1, k2],
                });
            }
            other => {
                return Err(SpecError::at(
                    line_no,
                    col,
                    format!("unknown directive `{other}`"),
                ))
            }
        }
    }
    let matrix = matrix.ok_or_else(|| SpecError::Validation("missing `matrix` line".into()))?;
    let mut out_params = params;
    for (k, v) in overrides {
        out_params.insert(k.clone(), *v);
    }
    Ok(MapSpecFile {
        name,
        matrix,
        terms,
        params: out_params,
    })
}

fn expect_eq_rest<'a>(
    line: &'a str,
    key: &str,
    line_no: usize,
    col: usize,
) -> Result<&'a str, SpecError> {
    let rest = line[key.len()..].trim_start();
    let rest = rest
        .strip_prefix('=')
        .ok_or_else(|| SpecError::at(line_no, col, format!("expected `{key} = ...`")))?;
    Ok(rest)
}

pub fn parse_spec_file(
    path: &std::path::Path,
    overrides: &BTreeMap<String, f64>,
) -> Result<TorusEndomorphism, SpecError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| SpecError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_spec_str(&src, overrides)?.into_map()
}

/// Canonical serialization: sorted terms, coefficients printed with full f64
/// round-trip precision. `parse(serialize(f))` reproduces `f` exactly.
pub fn serialize_map(f: &TorusEndomorphism) -> String {
    let mut out = String::new();
    out.push_str(&format!("name = {}\n", f.name()));
    let m = f.linear_part().0;
    out.push_str(&format!(
        "matrix = {} {} ; {} {}\n",
        m[0][0], m[0][1], m[1][0], m[1][1]
    ));
    for coord in 0..2 {
        let mut terms = f.displacement().components()[coord].clone();
        terms.sort_by_key(|t| (matches!(t.kind, TrigKind::Cos), t.wave));
        for t in terms {
            let kind = match t.kind {
                TrigKind::Sin => "sin",
                TrigKind::Cos => "cos",
            };
            out.push_str(&format!(
                "term {coord} {kind} {} {} {:?}\n",
                t.wave[0], t.wave[1], t.coeff
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Coefficient expressions
// ---------------------------------------------------------------------------

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
    scope: &'a BTreeMap<String, f64>,
}

/// Evaluates `+ - * /`, unary minus, parentheses, decimal literals, `pi` and
/// scope variables.
pub fn eval_expr(src: &str, scope: &BTreeMap<String, f64>) -> Result<f64, String> {
    let mut p = ExprParser {
        src: src.as_bytes(),
        pos: 0,
        scope,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(format!("trailing input at offset {}", p.pos));
    }
    Ok(v)
}

impl<'a> ExprParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc += self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc -= self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc *= self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.factor()?;
                    if d == 0.0 {
                        return Err("division by zero in coefficient".into());
                    }
                    acc /= d;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err("missing `)`".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(format!("unexpected character `{}`", c as char)),
            None => Err("unexpected end of expression".into()),
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || self.src[self.pos] == b'e'
                || self.src[self.pos] == b'E'
                || (self.pos > start
                    && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    && matches!(self.src[self.pos - 1], b'e' | b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse()
            .map_err(|_| format!("invalid number literal `{text}`"))
    }

    fn ident(&mut self) -> Result<f64, String> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "pi" => Ok(std::f64::consts::PI),
            other => self
                .scope
                .get(other)
                .copied()
                .ok_or_else(|| format!("unknown identifier `{other}`")),
        }
    }
}
