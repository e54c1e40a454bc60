//! Compactum Description Language (CDL) and Map Description Language (MDL).
//!
//! CDL declares named continua and parameterized families of pieces whose
//! coordinates are affine expressions in decay variables (2^-n for integer
//! parameters, the value and 1/denominator for dyadic parameters, interval
//! endpoints for binary words). Every family carries a limit clause: a named
//! continuum, a symbolic point, or `self` together with `accumulates self`.
//!
//! MDL declares a symbolic self-map: per continuum or family an action that
//! is `shift` (binary word left shift), `identity`, or an axis-aligned affine
//! map with rational entries.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, PieceGeometry, Point, Rect, Scalar};

#[derive(Debug, Error)]
pub enum CdlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("family {family} has no limit clause")]
    MissingLimit { family: String },
    #[error("compactum {name} declares no continuum or family")]
    EmptyCompactum { name: String },
    #[error("limit clause of family {family} names undeclared continuum {name}")]
    UnknownLimitName { family: String, name: String },
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("map action references undeclared family or continuum {0}")]
    UnknownFamily(String),
    #[error("invalid action for {name}: {msg}")]
    InvalidAction { name: String, msg: String },
    #[error("family {family}: {msg}")]
    BadLimitFlag { family: String, msg: String },
    #[error("variable {var} is not available for parameter domain {domain}")]
    BadVariable { var: String, domain: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamDomain {
    /// n ranges over 1, 2, 3, ...
    Nat,
    /// p/q in (0,1), lowest terms, q a power of two
    Dyadic,
    /// binary words over {0,1}
    Word,
}

impl ParamDomain {
    fn keyword(self) -> &'static str {
        match self {
            ParamDomain::Nat => "1..",
            ParamDomain::Dyadic => "dyadic (0,1)",
            ParamDomain::Word => "word {0,1}",
        }
    }
}

/// Decay variables usable in coordinate templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Var {
    /// The parameter value itself (dyadic families: p/q).
    Value,
    /// 2^-n for integer families.
    Pow2Neg,
    /// 1/q for dyadic families.
    InvQ,
    /// Middle-thirds (ternary) word-interval endpoints.
    TernLo,
    TernHi,
    /// Dyadic (binary-value) word-interval endpoints.
    DyadLo,
    DyadHi,
}

impl Var {
    fn admissible(self, domain: ParamDomain) -> bool {
        match domain {
            ParamDomain::Nat => matches!(self, Var::Pow2Neg),
            ParamDomain::Dyadic => matches!(self, Var::Value | Var::InvQ),
            ParamDomain::Word => matches!(
                self,
                Var::TernLo | Var::TernHi | Var::DyadLo | Var::DyadHi
            ),
        }
    }

    fn func_name(self) -> Option<&'static str> {
        match self {
            Var::Value | Var::Pow2Neg => None,
            Var::InvQ => Some("invq"),
            Var::TernLo => Some("tlo"),
            Var::TernHi => Some("thi"),
            Var::DyadLo => Some("dlo"),
            Var::DyadHi => Some("dhi"),
        }
    }
}

/// Affine expression: constant + Σ coeff * var.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub constant: Scalar,
    pub terms: Vec<(Scalar, Var)>,
}

impl Expr {
    pub fn constant(c: Scalar) -> Self {
        Expr { constant: c, terms: Vec::new() }
    }

    pub fn eval(&self, value: &ParamValue) -> Scalar {
        let mut acc = self.constant.clone();
        for (c, v) in &self.terms {
            acc = acc + c * &value.var(*v);
        }
        acc
    }

    /// Evaluation with all decay variables set to zero; the parameter value
    /// itself is kept (it does not decay). Used for the symbolic limit check.
    pub fn eval_decay_zero(&self, value: &ParamValue) -> Scalar {
        let mut acc = self.constant.clone();
        for (c, v) in &self.terms {
            let contribution = match v {
                Var::Value => value.var(Var::Value),
                _ => Scalar::zero(),
            };
            acc = acc + c * &contribution;
        }
        acc
    }

    pub fn uses_decaying_var(&self) -> bool {
        self.terms.iter().any(|(_, v)| !matches!(v, Var::Value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GeoKind {
    Seg,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoTemplate {
    pub kind: GeoKind,
    pub a: (Expr, Expr),
    pub b: (Expr, Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LimitClause {
    Named(String),
    Point(Expr, Expr),
    SelfAccumulation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuumDecl {
    pub name: String,
    pub template: Vec<GeoTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyDecl {
    pub name: String,
    pub param_name: String,
    pub domain: ParamDomain,
    pub accumulates_self: bool,
    pub template: Vec<GeoTemplate>,
    pub limit: LimitClause,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactumSpec {
    pub name: String,
    pub continua: Vec<ContinuumDecl>,
    pub families: Vec<FamilyDecl>,
}

impl CompactumSpec {
    pub fn continuum(&self, name: &str) -> Option<&ContinuumDecl> {
        self.continua.iter().find(|c| c.name == name)
    }

    pub fn family(&self, name: &str) -> Option<&FamilyDecl> {
        self.families.iter().find(|f| f.name == name)
    }
}

/// A concrete family parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamValue {
    Nat(u32),
    /// num/den in lowest terms, den a power of two; ordered (den, num).
    Dyadic { den: u32, num: u32 },
    Word(String),
}

impl ParamValue {
    pub fn var(&self, v: Var) -> Scalar {
        match (self, v) {
            (ParamValue::Nat(n), Var::Pow2Neg) => Scalar::pow2_neg(*n),
            (ParamValue::Dyadic { den, num }, Var::Value) => {
                Scalar::ratio(*num as i64, *den as i64)
            }
            (ParamValue::Dyadic { den, .. }, Var::InvQ) => Scalar::ratio(1, *den as i64),
            (ParamValue::Word(w), Var::TernLo) => ternary_lo(w),
            (ParamValue::Word(w), Var::TernHi) => &ternary_lo(w) + &Scalar::pow3_neg(w.len() as u32),
            (ParamValue::Word(w), Var::DyadLo) => dyadic_lo(w),
            (ParamValue::Word(w), Var::DyadHi) => &dyadic_lo(w) + &Scalar::pow2_neg(w.len() as u32),
            _ => panic!("variable/domain mismatch caught at parse time"),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Nat(n) => write!(f, "{n}"),
            ParamValue::Dyadic { den, num } => write!(f, "{num}/{den}"),
            ParamValue::Word(w) => write!(f, "{w}"),
        }
    }
}

impl Serialize for ParamValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn ternary_lo(word: &str) -> Scalar {
    let mut acc = Scalar::zero();
    for (i, ch) in word.chars().enumerate() {
        if ch == '1' {
            acc = acc + Scalar::int(2) * Scalar::pow3_neg(i as u32 + 1);
        }
    }
    acc
}

fn dyadic_lo(word: &str) -> Scalar {
    let mut acc = Scalar::zero();
    for (i, ch) in word.chars().enumerate() {
        if ch == '1' {
            acc = acc + Scalar::pow2_neg(i as u32 + 1);
        }
    }
    acc
}

/// All parameters of a family within the given depth bounds, in canonical
/// order: integers ascending, dyadics by (denominator, numerator), words in
/// lexicographic order at exactly the given length.
pub fn enumerate_params(domain: ParamDomain, nat_depth: u32, dyadic_k: u32, word_len: u32) -> Vec<ParamValue> {
    match domain {
        ParamDomain::Nat => (1..=nat_depth).map(ParamValue::Nat).collect(),
        ParamDomain::Dyadic => {
            let mut out = Vec::new();
            let mut den = 2u32;
            for _ in 1..=dyadic_k {
                let mut num = 1;
                while num < den {
                    out.push(ParamValue::Dyadic { den, num });
                    num += 2;
                }
                den *= 2;
            }
            out
        }
        ParamDomain::Word => {
            let mut out = Vec::new();
            for bits in 0..(1u64 << word_len) {
                let mut w = String::with_capacity(word_len as usize);
                for i in (0..word_len).rev() {
                    w.push(if bits >> i & 1 == 1 { '1' } else { '0' });
                }
                out.push(ParamValue::Word(w));
            }
            out
        }
    }
}

/// Instantiates one family member as concrete geometry.
pub fn instantiate_member(
    family: &FamilyDecl,
    value: &ParamValue,
) -> Result<PieceGeometry, GeometryError> {
    let parts = family
        .template
        .iter()
        .map(|t| template_rect(t, |e| e.eval(value)))
        .collect::<Result<Vec<_>, _>>()?;
    PieceGeometry::new(parts)
}

pub fn instantiate_continuum(c: &ContinuumDecl) -> Result<PieceGeometry, GeometryError> {
    let parts = c
        .template
        .iter()
        .map(|t| template_rect(t, |e| e.eval(&ParamValue::Nat(1))))
        .collect::<Result<Vec<_>, _>>()?;
    PieceGeometry::new(parts)
}

fn template_rect(
    t: &GeoTemplate,
    eval: impl Fn(&Expr) -> Scalar,
) -> Result<Rect, GeometryError> {
    let a = Point::new(eval(&t.a.0), eval(&t.a.1));
    let b = Point::new(eval(&t.b.0), eval(&t.b.1));
    match t.kind {
        GeoKind::Seg => Rect::seg(&a, &b),
        GeoKind::Box => Ok(Rect::bbox(&a, &b)),
    }
}

/// The declared limit geometry of a family member, evaluated symbolically by
/// sending all decay variables to zero (used to validate named limits and to
/// produce point limits for per-member clauses).
pub fn member_limit_geometry(
    family: &FamilyDecl,
    spec: &CompactumSpec,
    value: &ParamValue,
) -> Result<PieceGeometry, CdlError> {
    match &family.limit {
        LimitClause::Named(name) => {
            let c = spec.continuum(name).expect("validated at parse time");
            Ok(instantiate_continuum(c)?)
        }
        LimitClause::Point(ex, ey) => {
            let p = Point::new(ex.eval(value), ey.eval(value));
            Ok(PieceGeometry::single(Rect::point(&p)))
        }
        LimitClause::SelfAccumulation => Ok(instantiate_member(family, value)?),
    }
}

/// Checks that the template degenerates to the declared limit when decay
/// variables vanish. Only meaningful for named and point limits.
pub fn limit_consistent_at_zero(family: &FamilyDecl, spec: &CompactumSpec) -> bool {
    let probe = match family.domain {
        ParamDomain::Nat => ParamValue::Nat(1),
        ParamDomain::Dyadic => ParamValue::Dyadic { den: 2, num: 1 },
        ParamDomain::Word => return true,
    };
    let zero_parts: Result<Vec<Rect>, _> = family
        .template
        .iter()
        .map(|t| template_rect(t, |e| e.eval_decay_zero(&probe)))
        .collect();
    let Ok(zero_parts) = zero_parts else { return false };
    match &family.limit {
        LimitClause::Named(name) => {
            let c = spec.continuum(name).expect("validated");
            let Ok(limit) = instantiate_continuum(c) else {
                return false;
            };
            let Ok(zeroed) = PieceGeometry::new(zero_parts) else {
                return false;
            };
            crate::geometry::hausdorff_distance(&limit, &zeroed).is_zero()
        }
        LimitClause::Point(ex, ey) => {
            let p = Point::new(ex.eval_decay_zero(&probe), ey.eval_decay_zero(&probe));
            let pr = Rect::point(&p);
            zero_parts.iter().all(|r| *r == pr)
        }
        LimitClause::SelfAccumulation => true,
    }
}

// ---------------------------------------------------------------------------
// Map specs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(clippy::large_enum_variant)]
pub enum MapAction {
    /// Left shift on binary words: w1 w2 ... wk -> w2 ... wk.
    Shift,
    Identity,
    /// Axis-aligned affine map (x, y) -> (m00 x + m01 y + tx, m10 x + m11 y + ty);
    /// the matrix must be diagonal or antidiagonal.
    Affine {
        m00: Scalar,
        m01: Scalar,
        m10: Scalar,
        m11: Scalar,
        tx: Scalar,
        ty: Scalar,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSpec {
    pub name: String,
    pub actions: Vec<(String, MapAction)>,
}

impl MapSpec {
    pub fn action_for(&self, target: &str) -> MapAction {
        self.actions
            .iter()
            .find(|(n, _)| n == target)
            .map(|(_, a)| a.clone())
            .unwrap_or(MapAction::Identity)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Slash,
    Star,
    Plus,
    Minus,
    Caret,
    DotDot,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Int(n) => write!(f, "{n}"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Colon => write!(f, ":"),
            Tok::Slash => write!(f, "/"),
            Tok::Star => write!(f, "*"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Caret => write!(f, "^"),
            Tok::DotDot => write!(f, ".."),
        }
    }
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(source: &str) -> Result<Lexer, CdlError> {
    let chars: Vec<char> = source.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    macro_rules! adv {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        match c {
            ' ' | '\t' | '\r' | '\n' => adv!(),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    adv!();
                }
            }
            '{' | '}' | '(' | ')' | ',' | ':' | '/' | '*' | '+' | '-' | '^' => {
                adv!();
                let t = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '/' => Tok::Slash,
                    '*' => Tok::Star,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    _ => Tok::Caret,
                };
                toks.push((t, tl, tc));
            }
            '.' => {
                adv!();
                if i < chars.len() && chars[i] == '.' {
                    adv!();
                    toks.push((Tok::DotDot, tl, tc));
                } else {
                    return Err(CdlError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "unexpected '.'".into(),
                    });
                }
            }
            '0'..='9' => {
                let mut s = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    adv!();
                }
                let n: i64 = s.parse().map_err(|_| CdlError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("integer out of range: {s}"),
                })?;
                toks.push((Tok::Int(n), tl, tc));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    adv!();
                }
                toks.push((Tok::Ident(s), tl, tc));
            }
            other => {
                return Err(CdlError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character {other:?}"),
                });
            }
        }
    }
    Ok(Lexer { toks, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((1, 1))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> CdlError {
        let (line, col) = self.loc();
        CdlError::Syntax { line, col, msg: msg.into() }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), CdlError> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            Some(t) => {
                self.pos -= 1;
                Err(self.err(format!("expected {tok:?}, found {t:?}")))
            }
            None => Err(self.err(format!("expected {tok:?}, found end of input"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, CdlError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => {
                self.pos -= 1;
                Err(self.err(format!("expected identifier, found {t:?}")))
            }
            None => Err(self.err("expected identifier, found end of input")),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), CdlError> {
        let id = self.expect_ident()?;
        if id == kw {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected keyword {kw:?}, found {id:?}")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == kw {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect_int(&mut self) -> Result<i64, CdlError> {
        match self.next() {
            Some(Tok::Int(n)) => Ok(n),
            Some(t) => {
                self.pos -= 1;
                Err(self.err(format!("expected integer, found {t:?}")))
            }
            None => Err(self.err("expected integer, found end of input")),
        }
    }
}

// ---------------------------------------------------------------------------
// CDL parser
// ---------------------------------------------------------------------------

pub fn parse_compactum(source: &str) -> Result<CompactumSpec, CdlError> {
    let mut lx = lex(source)?;
    lx.expect_keyword("compactum")?;
    let name = lx.expect_ident()?;
    lx.expect(Tok::LBrace)?;
    let mut continua = Vec::new();
    let mut families = Vec::new();
    loop {
        match lx.peek() {
            Some(Tok::RBrace) => {
                lx.next();
                break;
            }
            Some(Tok::Ident(kw)) if kw == "continuum" => {
                lx.next();
                continua.push(parse_continuum(&mut lx)?);
            }
            Some(Tok::Ident(kw)) if kw == "family" => {
                lx.next();
                families.push(parse_family(&mut lx)?);
            }
            _ => return Err(lx.err("expected 'continuum', 'family' or '}'")),
        }
    }
    if lx.peek().is_some() {
        return Err(lx.err("trailing input after compactum body"));
    }
    if continua.is_empty() && families.is_empty() {
        return Err(CdlError::EmptyCompactum { name });
    }
    let spec = CompactumSpec { name, continua, families };
    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_spec(spec: &CompactumSpec) -> Result<(), CdlError> {
    let mut names: Vec<&str> = Vec::new();
    for c in &spec.continua {
        if names.contains(&c.name.as_str()) {
            return Err(CdlError::DuplicateName(c.name.clone()));
        }
        names.push(&c.name);
    }
    for f in &spec.families {
        if names.contains(&f.name.as_str()) {
            return Err(CdlError::DuplicateName(f.name.clone()));
        }
        names.push(&f.name);
        if let LimitClause::Named(n) = &f.limit {
            if spec.continuum(n).is_none() {
                return Err(CdlError::UnknownLimitName {
                    family: f.name.clone(),
                    name: n.clone(),
                });
            }
        }
    }
    Ok(())
}

fn parse_continuum(lx: &mut Lexer) -> Result<ContinuumDecl, CdlError> {
    let name = lx.expect_ident()?;
    lx.expect(Tok::LBrace)?;
    let mut template = Vec::new();
    loop {
        match lx.peek() {
            Some(Tok::RBrace) => {
                lx.next();
                break;
            }
            _ => {
                // Continua admit no parameter, so their templates must be
                // constant; reuse the geo parser with a dummy context.
                let ctx = ExprCtx { param: None };
                template.push(parse_geo(lx, &ctx)?);
            }
        }
    }
    if template.is_empty() {
        return Err(lx.err(format!("continuum {name} has no geometry")));
    }
    Ok(ContinuumDecl { name, template })
}

fn parse_family(lx: &mut Lexer) -> Result<FamilyDecl, CdlError> {
    let name = lx.expect_ident()?;
    lx.expect(Tok::LParen)?;
    let param_name = lx.expect_ident()?;
    lx.expect(Tok::Colon)?;
    let domain = match lx.next() {
        Some(Tok::Int(1)) => {
            lx.expect(Tok::DotDot)?;
            ParamDomain::Nat
        }
        Some(Tok::Ident(kw)) if kw == "dyadic" => {
            lx.expect(Tok::LParen)?;
            let a = lx.expect_int()?;
            lx.expect(Tok::Comma)?;
            let b = lx.expect_int()?;
            lx.expect(Tok::RParen)?;
            if (a, b) != (0, 1) {
                return Err(lx.err("dyadic parameter domain must be (0,1)"));
            }
            ParamDomain::Dyadic
        }
        Some(Tok::Ident(kw)) if kw == "word" => {
            lx.expect(Tok::LBrace)?;
            let a = lx.expect_int()?;
            lx.expect(Tok::Comma)?;
            let b = lx.expect_int()?;
            lx.expect(Tok::RBrace)?;
            if (a, b) != (0, 1) {
                return Err(lx.err("word parameter alphabet must be {0,1}"));
            }
            ParamDomain::Word
        }
        _ => return Err(lx.err("expected parameter domain: '1..', 'dyadic (0,1)' or 'word {0,1}'")),
    };
    lx.expect(Tok::RParen)?;
    let accumulates_self = if lx.eat_keyword("accumulates") {
        lx.expect_keyword("self")?;
        true
    } else {
        false
    };
    lx.expect(Tok::LBrace)?;
    let ctx = ExprCtx {
        param: Some((param_name.clone(), domain)),
    };
    let mut template = Vec::new();
    let mut limit = None;
    loop {
        match lx.peek() {
            Some(Tok::RBrace) => {
                lx.next();
                break;
            }
            Some(Tok::Ident(kw)) if kw == "limit" => {
                lx.next();
                limit = Some(parse_limit(lx, &ctx)?);
            }
            _ => template.push(parse_geo(lx, &ctx)?),
        }
    }
    if template.is_empty() {
        return Err(lx.err(format!("family {name} has no geometry")));
    }
    let limit = limit.ok_or(CdlError::MissingLimit { family: name.clone() })?;
    match (&limit, accumulates_self) {
        (LimitClause::SelfAccumulation, false) => {
            return Err(CdlError::BadLimitFlag {
                family: name,
                msg: "'limit self' requires 'accumulates self'".into(),
            })
        }
        (LimitClause::SelfAccumulation, true) => {}
        (_, true) => {
            return Err(CdlError::BadLimitFlag {
                family: name,
                msg: "'accumulates self' requires 'limit self'".into(),
            })
        }
        _ => {}
    }
    Ok(FamilyDecl {
        name,
        param_name,
        domain,
        accumulates_self,
        template,
        limit,
    })
}

fn parse_limit(lx: &mut Lexer, ctx: &ExprCtx) -> Result<LimitClause, CdlError> {
    match lx.peek() {
        Some(Tok::Ident(kw)) if kw == "point" => {
            lx.next();
            lx.expect(Tok::LParen)?;
            let x = parse_expr(lx, ctx)?;
            lx.expect(Tok::Comma)?;
            let y = parse_expr(lx, ctx)?;
            lx.expect(Tok::RParen)?;
            Ok(LimitClause::Point(x, y))
        }
        Some(Tok::Ident(kw)) if kw == "self" => {
            lx.next();
            Ok(LimitClause::SelfAccumulation)
        }
        Some(Tok::Ident(_)) => {
            let name = lx.expect_ident()?;
            Ok(LimitClause::Named(name))
        }
        _ => Err(lx.err("expected limit expression")),
    }
}

fn parse_geo(lx: &mut Lexer, ctx: &ExprCtx) -> Result<GeoTemplate, CdlError> {
    let kind = match lx.next() {
        Some(Tok::Ident(kw)) if kw == "seg" => GeoKind::Seg,
        Some(Tok::Ident(kw)) if kw == "box" => GeoKind::Box,
        Some(_) => {
            lx.pos -= 1;
            return Err(lx.err("expected 'seg' or 'box'"));
        }
        None => return Err(lx.err("expected 'seg' or 'box', found end of input")),
    };
    let a = parse_point(lx, ctx)?;
    let b = parse_point(lx, ctx)?;
    Ok(GeoTemplate { kind, a, b })
}

fn parse_point(lx: &mut Lexer, ctx: &ExprCtx) -> Result<(Expr, Expr), CdlError> {
    lx.expect(Tok::LParen)?;
    let x = parse_expr(lx, ctx)?;
    lx.expect(Tok::Comma)?;
    let y = parse_expr(lx, ctx)?;
    lx.expect(Tok::RParen)?;
    Ok((x, y))
}

struct ExprCtx {
    param: Option<(String, ParamDomain)>,
}

impl ExprCtx {
    fn resolve(&self, lx: &Lexer, name: &str, func: Option<&str>) -> Result<Var, CdlError> {
        let Some((pname, domain)) = &self.param else {
            return Err(lx.err(format!(
                "variable {name} used in a constant context"
            )));
        };
        let var = match func {
            None => Var::Value,
            Some("invq") => Var::InvQ,
            Some("tlo") => Var::TernLo,
            Some("thi") => Var::TernHi,
            Some("dlo") => Var::DyadLo,
            Some("dhi") => Var::DyadHi,
            Some(f) => return Err(lx.err(format!("unknown function {f:?}"))),
        };
        if name != pname {
            return Err(lx.err(format!(
                "unknown parameter {name:?} (family parameter is {pname:?})"
            )));
        }
        if !var.admissible(*domain) {
            return Err(CdlError::BadVariable {
                var: func.unwrap_or(name).to_string(),
                domain: domain.keyword().to_string(),
            });
        }
        Ok(var)
    }
}

/// expr := term (('+'|'-') term)*
/// term := rational ['*' var] | var | '2' '^' '-' IDENT
fn parse_expr(lx: &mut Lexer, ctx: &ExprCtx) -> Result<Expr, CdlError> {
    let mut expr = Expr::constant(Scalar::zero());
    let mut sign = Scalar::one();
    loop {
        parse_term(lx, ctx, &sign, &mut expr)?;
        match lx.peek() {
            Some(Tok::Plus) => {
                lx.next();
                sign = Scalar::one();
            }
            Some(Tok::Minus) => {
                lx.next();
                sign = -Scalar::one();
            }
            _ => break,
        }
    }
    Ok(expr)
}

fn parse_term(
    lx: &mut Lexer,
    ctx: &ExprCtx,
    sign: &Scalar,
    expr: &mut Expr,
) -> Result<(), CdlError> {
    let neg = if lx.peek() == Some(&Tok::Minus) {
        lx.next();
        true
    } else {
        false
    };
    let sign = if neg { -sign.clone() } else { sign.clone() };
    match lx.peek().cloned() {
        Some(Tok::Int(n)) => {
            lx.next();
            // 2^-ident is the integer-family decay variable.
            if n == 2 && lx.peek() == Some(&Tok::Caret) {
                lx.next();
                lx.expect(Tok::Minus)?;
                let id = lx.expect_ident()?;
                let Some((pname, domain)) = &ctx.param else {
                    return Err(lx.err(format!("variable 2^-{id} used in a constant context")));
                };
                if id != *pname {
                    return Err(lx.err(format!(
                        "unknown parameter {id:?} (family parameter is {pname:?})"
                    )));
                }
                if *domain != ParamDomain::Nat {
                    return Err(CdlError::BadVariable {
                        var: format!("2^-{id}"),
                        domain: domain.keyword().to_string(),
                    });
                }
                expr.terms.push((sign, Var::Pow2Neg));
                return Ok(());
            }
            let mut value = Scalar::int(n);
            if lx.peek() == Some(&Tok::Slash) {
                lx.next();
                let d = lx.expect_int()?;
                if d == 0 {
                    return Err(lx.err("zero denominator"));
                }
                value = Scalar::ratio(n, d);
            }
            if lx.peek() == Some(&Tok::Star) {
                lx.next();
                let var = parse_var(lx, ctx)?;
                expr.terms.push((&sign * &value, var));
            } else {
                expr.constant = &expr.constant + &(&sign * &value);
            }
            Ok(())
        }
        Some(Tok::Ident(_)) => {
            let var = parse_var(lx, ctx)?;
            expr.terms.push((sign, var));
            Ok(())
        }
        _ => Err(lx.err("expected rational or variable")),
    }
}

fn parse_var(lx: &mut Lexer, ctx: &ExprCtx) -> Result<Var, CdlError> {
    let id = lx.expect_ident()?;
    if lx.peek() == Some(&Tok::LParen) {
        lx.next();
        let arg = lx.expect_ident()?;
        lx.expect(Tok::RParen)?;
        ctx.resolve(lx, &arg, Some(&id))
    } else {
        ctx.resolve(lx, &id, None)
    }
}

// ---------------------------------------------------------------------------
// MDL parser
// ---------------------------------------------------------------------------

/// Parses an MDL source against its paired compactum spec. Actions must
/// reference declared continua or families; `shift` requires a word family.
pub fn parse_map(source: &str, spec: &CompactumSpec) -> Result<MapSpec, CdlError> {
    let mut lx = lex(source)?;
    lx.expect_keyword("map")?;
    let name = lx.expect_ident()?;
    lx.expect(Tok::LBrace)?;
    let mut actions = Vec::new();
    loop {
        match lx.peek() {
            Some(Tok::RBrace) => {
                lx.next();
                break;
            }
            Some(Tok::Ident(kw)) if kw == "on" => {
                lx.next();
                let target = lx.expect_ident()?;
                lx.expect(Tok::Colon)?;
                let action = parse_action(&mut lx)?;
                let is_family = spec.family(&target).is_some();
                let is_continuum = spec.continuum(&target).is_some();
                if !is_family && !is_continuum {
                    return Err(CdlError::UnknownFamily(target));
                }
                if matches!(action, MapAction::Shift) {
                    match spec.family(&target) {
                        Some(f) if f.domain == ParamDomain::Word => {}
                        _ => {
                            return Err(CdlError::InvalidAction {
                                name: target,
                                msg: "shift requires a word family".into(),
                            })
                        }
                    }
                }
                if actions.iter().any(|(n, _)| *n == target) {
                    return Err(CdlError::DuplicateName(target));
                }
                actions.push((target, action));
            }
            _ => return Err(lx.err("expected 'on' or '}'")),
        }
    }
    if lx.peek().is_some() {
        return Err(lx.err("trailing input after map body"));
    }
    Ok(MapSpec { name, actions })
}

fn parse_action(lx: &mut Lexer) -> Result<MapAction, CdlError> {
    match lx.next() {
        Some(Tok::Ident(kw)) if kw == "shift" => Ok(MapAction::Shift),
        Some(Tok::Ident(kw)) if kw == "identity" => Ok(MapAction::Identity),
        Some(Tok::Ident(kw)) if kw == "affine" => {
            lx.expect(Tok::LParen)?;
            let m00 = parse_rational(lx)?;
            let m01 = parse_rational(lx)?;
            let m10 = parse_rational(lx)?;
            let m11 = parse_rational(lx)?;
            lx.expect(Tok::RParen)?;
            lx.expect(Tok::LParen)?;
            let tx = parse_rational(lx)?;
            lx.expect(Tok::Comma)?;
            let ty = parse_rational(lx)?;
            lx.expect(Tok::RParen)?;
            let diagonal = m01.is_zero() && m10.is_zero();
            let antidiagonal = m00.is_zero() && m11.is_zero();
            if !diagonal && !antidiagonal {
                return Err(lx.err("affine matrix must be diagonal or antidiagonal (axis-aligned)"));
            }
            Ok(MapAction::Affine { m00, m01, m10, m11, tx, ty })
        }
        Some(_) => {
            lx.pos -= 1;
            Err(lx.err("expected 'shift', 'identity' or 'affine'"))
        }
        None => Err(lx.err("expected action, found end of input")),
    }
}

fn parse_rational(lx: &mut Lexer) -> Result<Scalar, CdlError> {
    let neg = if lx.peek() == Some(&Tok::Minus) {
        lx.next();
        true
    } else {
        false
    };
    let n = lx.expect_int()?;
    let mut v = Scalar::int(n);
    if lx.peek() == Some(&Tok::Slash) {
        lx.next();
        let d = lx.expect_int()?;
        if d == 0 {
            return Err(lx.err("zero denominator"));
        }
        v = Scalar::ratio(n, d);
    }
    Ok(if neg { -v } else { v })
}

// ---------------------------------------------------------------------------
// Pretty printing
// ---------------------------------------------------------------------------

fn fmt_expr(e: &Expr, param: &str) -> String {
    let mut pieces: Vec<String> = Vec::new();
    if !e.constant.is_zero() || e.terms.is_empty() {
        pieces.push(e.constant.to_string());
    }
    for (c, v) in &e.terms {
        let var = match v {
            Var::Value => param.to_string(),
            Var::Pow2Neg => format!("2^-{param}"),
            other => format!("{}({param})", other.func_name().unwrap()),
        };
        let term = if *v == Var::Pow2Neg {
            // 2^-n carries no printed coefficient unless it is not ±1.
            if *c == Scalar::one() {
                var
            } else if *c == -Scalar::one() {
                format!("-{var}")
            } else {
                format!("{c}*{var}")
            }
        } else if *c == Scalar::one() {
            var
        } else if *c == -Scalar::one() {
            format!("-{var}")
        } else {
            format!("{c}*{var}")
        };
        pieces.push(term);
    }
    let mut out = String::new();
    for (i, p) in pieces.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(stripped) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(stripped);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}

fn fmt_geo(t: &GeoTemplate, param: &str) -> String {
    let kw = match t.kind {
        GeoKind::Seg => "seg",
        GeoKind::Box => "box",
    };
    format!(
        "{kw} ({}, {}) ({}, {})",
        fmt_expr(&t.a.0, param),
        fmt_expr(&t.a.1, param),
        fmt_expr(&t.b.0, param),
        fmt_expr(&t.b.1, param)
    )
}

/// Canonical CDL text; parsing it back yields a structurally equal spec.
pub fn print_compactum(spec: &CompactumSpec) -> String {
    let mut out = format!("compactum {} {{\n", spec.name);
    for c in &spec.continua {
        out.push_str(&format!("  continuum {} {{\n", c.name));
        for g in &c.template {
            out.push_str(&format!("    {}\n", fmt_geo(g, "_")));
        }
        out.push_str("  }\n");
    }
    for f in &spec.families {
        let domain = match f.domain {
            ParamDomain::Nat => "1..".to_string(),
            ParamDomain::Dyadic => "dyadic (0,1)".to_string(),
            ParamDomain::Word => "word {0,1}".to_string(),
        };
        let acc = if f.accumulates_self { " accumulates self" } else { "" };
        out.push_str(&format!(
            "  family {}({}: {}){} {{\n",
            f.name, f.param_name, domain, acc
        ));
        for g in &f.template {
            out.push_str(&format!("    {}\n", fmt_geo(g, &f.param_name)));
        }
        match &f.limit {
            LimitClause::Named(n) => out.push_str(&format!("    limit {n}\n")),
            LimitClause::Point(x, y) => out.push_str(&format!(
                "    limit point ({}, {})\n",
                fmt_expr(x, &f.param_name),
                fmt_expr(y, &f.param_name)
            )),
            LimitClause::SelfAccumulation => out.push_str("    limit self\n"),
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

pub fn print_map(map: &MapSpec) -> String {
    let mut out = format!("map {} {{\n", map.name);
    for (target, action) in &map.actions {
        let a = match action {
            MapAction::Shift => "shift".to_string(),
            MapAction::Identity => "identity".to_string(),
            MapAction::Affine { m00, m01, m10, m11, tx, ty } => {
                format!("affine ({m00} {m01} {m10} {m11}) ({tx}, {ty})")
            }
        };
        out.push_str(&format!("  on {target}: {a}\n"));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const COMB: &str = include_str!("../fixtures/comb.cdl");

    #[test]
    fn parse_comb() {
        let spec = parse_compactum(COMB).unwrap();
        assert_eq!(spec.continua.len(), 1);
        assert_eq!(spec.families.len(), 2);
        assert_eq!(spec.continua[0].name, "H");
    }

    #[test]
    fn missing_limit_rejected() {
        let src = "compactum x { family f(n: 1..) { seg (0, 2^-n) (1, 2^-n) } }";
        match parse_compactum(src) {
            Err(CdlError::MissingLimit { family }) => assert_eq!(family, "f"),
            other => panic!("expected MissingLimit, got {other:?}"),
        }
    }

    #[test]
    fn empty_compactum_rejected() {
        match parse_compactum("compactum x {}") {
            Err(CdlError::EmptyCompactum { name }) => assert_eq!(name, "x"),
            other => panic!("expected EmptyCompactum, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_location() {
        let err = parse_compactum("compactum x {\n  continuum C ( }\n}").unwrap_err();
        match err {
            CdlError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_comb() {
        let spec = parse_compactum(COMB).unwrap();
        let printed = print_compactum(&spec);
        let reparsed = parse_compactum(&printed).unwrap();
        assert_eq!(spec, reparsed);
    }

    #[test]
    fn dyadic_enumeration_order() {
        let params = enumerate_params(ParamDomain::Dyadic, 0, 3, 0);
        let expected = [
            (2u32, 1u32),
            (4, 1),
            (4, 3),
            (8, 1),
            (8, 3),
            (8, 5),
            (8, 7),
        ];
        let got: Vec<(u32, u32)> = params
            .iter()
            .map(|p| match p {
                ParamValue::Dyadic { den, num } => (*den, *num),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn word_interval_endpoints() {
        let w = ParamValue::Word("01".to_string());
        // ternary: [0*2/3 + 1*2/9, +1/9] = [2/9, 3/9]
        assert_eq!(w.var(Var::TernLo), Scalar::ratio(2, 9));
        assert_eq!(w.var(Var::TernHi), Scalar::ratio(1, 3));
        // dyadic: [1/4, 1/2]
        assert_eq!(w.var(Var::DyadLo), Scalar::ratio(1, 4));
        assert_eq!(w.var(Var::DyadHi), Scalar::ratio(1, 2));
    }

    #[test]
    fn map_unknown_family_rejected() {
        let spec = parse_compactum(COMB).unwrap();
        let err = parse_map("map m { on Q: shift }", &spec).unwrap_err();
        assert!(matches!(err, CdlError::UnknownFamily(n) if n == "Q"));
    }

    #[test]
    fn map_shift_requires_word_family() {
        let spec = parse_compactum(COMB).unwrap();
        let err = parse_map("map m { on Hn: shift }", &spec).unwrap_err();
        assert!(matches!(err, CdlError::InvalidAction { .. }));
    }

    #[test]
    fn map_roundtrip() {
        let spec = parse_compactum(COMB).unwrap();
        let m = parse_map(
            "map mv {\n  on H: affine (1 0 0 1) (1/2, 0)\n  on Hn: identity\n}",
            &spec,
        )
        .unwrap();
        let printed = print_map(&m);
        let reparsed = parse_map(&printed, &spec).unwrap();
        assert_eq!(m, reparsed);
    }

    #[test]
    fn comb_limit_consistent_at_zero() {
        let spec = parse_compactum(COMB).unwrap();
        for f in &spec.families {
            assert!(limit_consistent_at_zero(f, &spec), "family {}", f.name);
        }
    }
}
