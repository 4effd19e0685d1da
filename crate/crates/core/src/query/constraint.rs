//! The constraint-expression mini-language.
//!
//! ```text
//! constraint  = [ projection ] { "&" clause }
//! projection  = ident { "," ident }
//! clause      = selection | call
//! selection   = ident op literal
//! op          = "<" | "<=" | ">" | ">=" | "==" | "=" | "!="
//! literal     = number | timestamp          ; timestamps only on `time`
//! call        = ident "(" [ arg { "," arg } ] ")"
//! number      = [+-] ( digits [ "." digits* ] | "." digits ) [ (e|E) [+-] digits ]
//! timestamp   = YYYY-MM-DD [ "T" hh:mm:ss [ "." fff ] ] [ "Z" ]
//! ```
//!
//! A leading clause in place of the projection is allowed, as is an empty
//! projection followed by `&`. Clause order carries no meaning; at most one
//! filter call may appear.

use std::fmt;
use std::str::FromStr;

use super::QueryError;
use crate::time::parse_timestamp;

/// Operand name that refers to the time axis rather than a variable.
pub const TIME: &str = "time";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
        }
    }

    /// `lhs op rhs`; false whenever either side is NaN.
    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => !lhs.is_nan() && !rhs.is_nan() && lhs != rhs,
        }
    }

    /// Longest operator at the start of `s`, with its byte length.
    fn lex(s: &str) -> Option<(CompareOp, usize)> {
        let two = s.get(..2);
        let op = match two {
            Some("<=") => (CompareOp::Le, 2),
            Some(">=") => (CompareOp::Ge, 2),
            Some("==") => (CompareOp::Eq, 2),
            Some("!=") => (CompareOp::Ne, 2),
            _ => match s.as_bytes().first()? {
                b'<' => (CompareOp::Lt, 1),
                b'>' => (CompareOp::Gt, 1),
                b'=' => (CompareOp::Eq, 1),
                _ => return None,
            },
        };
        Some(op)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    /// An ISO-8601 timestamp, kept as written.
    Time(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(x) => write!(f, "{x:?}"),
            Literal::Time(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub operand: String,
    pub op: CompareOp,
    pub literal: Literal,
}

impl Selection {
    pub fn is_time(&self) -> bool {
        self.operand == TIME
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.operand, self.op.as_str(), self.literal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Avg,
    Min,
    Max,
    Count,
}

impl BlockKind {
    pub fn filter_name(self) -> &'static str {
        match self {
            BlockKind::Avg => "binavg",
            BlockKind::Min => "binmin",
            BlockKind::Max => "binmax",
            BlockKind::Count => "bincount",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Filter {
    Stride(u64),
    Thin(u64),
    ReplaceMissing(f64),
    ExcludeMissing,
    /// Tumbling-window aggregate; `width` is in dataset time units.
    Block { kind: BlockKind, width: f64 },
}

/// Every filter name the parser accepts, in documentation order.
pub const FILTER_NAMES: [&str; 8] = [
    "stride",
    "thin",
    "replace_missing",
    "exclude_missing",
    "binavg",
    "binmin",
    "binmax",
    "bincount",
];

impl Filter {
    pub fn name(&self) -> &'static str {
        match self {
            Filter::Stride(_) => "stride",
            Filter::Thin(_) => "thin",
            Filter::ReplaceMissing(_) => "replace_missing",
            Filter::ExcludeMissing => "exclude_missing",
            Filter::Block { kind, .. } => kind.filter_name(),
        }
    }
}

impl PartialEq for Filter {
    fn eq(&self, other: &Self) -> bool {
        use Filter::*;
        match (self, other) {
            (Stride(a), Stride(b)) | (Thin(a), Thin(b)) => a == b,
            (ReplaceMissing(a), ReplaceMissing(b)) => a == b || (a.is_nan() && b.is_nan()),
            (ExcludeMissing, ExcludeMissing) => true,
            (Block { kind: ka, width: wa }, Block { kind: kb, width: wb }) => ka == kb && wa == wb,
            _ => false,
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Stride(n) | Filter::Thin(n) => write!(f, "{}({n})", self.name()),
            Filter::ReplaceMissing(v) if v.is_nan() => f.write_str("replace_missing(NaN)"),
            Filter::ReplaceMissing(v) => write!(f, "replace_missing({v:?})"),
            Filter::ExcludeMissing => f.write_str("exclude_missing()"),
            Filter::Block { width, .. } => write!(f, "{}({width:?})", self.name()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintExpression {
    /// Requested variables in order; empty means all. May name `time`.
    pub projection: Vec<String>,
    pub selections: Vec<Selection>,
    pub filter: Option<Filter>,
}

impl ConstraintExpression {
    pub fn time_selections(&self) -> impl Iterator<Item = &Selection> {
        self.selections.iter().filter(|s| s.is_time())
    }

    pub fn variable_selections(&self) -> impl Iterator<Item = &Selection> {
        self.selections.iter().filter(|s| !s.is_time())
    }
}

/// Canonical text: projection, then selections, then the filter.
impl fmt::Display for ConstraintExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.projection.join(","))?;
        for s in &self.selections {
            write!(f, "&{s}")?;
        }
        if let Some(filter) = &self.filter {
            write!(f, "&{filter}")?;
        }
        Ok(())
    }
}

impl FromStr for ConstraintExpression {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_constraint(s)
    }
}

pub fn render_constraint(ce: &ConstraintExpression) -> String {
    ce.to_string()
}

/// Parses a percent-decoded constraint expression. Error positions are
/// 0-based character offsets into `s`.
pub fn parse_constraint(s: &str) -> Result<ConstraintExpression, QueryError> {
    if let Some((pos, c)) = s.chars().enumerate().find(|(_, c)| !c.is_ascii() || c.is_ascii_control()) {
        return Err(syntax(pos, format!("unexpected character {c:?}")));
    }
    let mut ce = ConstraintExpression::default();
    let mut offset = 0;
    for (i, segment) in s.split('&').enumerate() {
        let at = offset;
        offset += segment.len() + 1;
        if i == 0 && !segment.contains(['<', '>', '=', '!', '(']) {
            ce.projection = parse_projection(segment, at)?;
            continue;
        }
        if segment.is_empty() {
            return Err(syntax(at, "empty clause"));
        }
        match parse_clause(segment, at)? {
            Clause::Selection(sel) => ce.selections.push(sel),
            Clause::Filter(filter) => {
                if ce.filter.is_some() {
                    return Err(QueryError::MultipleFilters { position: at });
                }
                ce.filter = Some(filter);
            }
        }
    }
    Ok(ce)
}

fn syntax(position: usize, message: impl Into<String>) -> QueryError {
    QueryError::SyntaxError {
        position,
        message: message.into(),
    }
}

fn parse_projection(segment: &str, at: usize) -> Result<Vec<String>, QueryError> {
    if segment.is_empty() {
        return Ok(Vec::new());
    }
    let mut names = Vec::new();
    let mut offset = at;
    for name in segment.split(',') {
        let len = ident_len(name);
        if len == 0 {
            return Err(syntax(offset, "expected a variable name"));
        }
        if len != name.len() {
            return Err(syntax(offset + len, format!("unexpected {:?} in projection", &name[len..])));
        }
        names.push(name.to_owned());
        offset += name.len() + 1;
    }
    Ok(names)
}

/// Length of the identifier at the start of `s`: `[A-Za-z_][A-Za-z0-9_.]*`.
fn ident_len(s: &str) -> usize {
    let b = s.as_bytes();
    if b.first().map_or(true, |c| !(c.is_ascii_alphabetic() || *c == b'_')) {
        return 0;
    }
    b.iter()
        .position(|c| !(c.is_ascii_alphanumeric() || *c == b'_' || *c == b'.'))
        .unwrap_or(b.len())
}

enum Clause {
    Selection(Selection),
    Filter(Filter),
}

fn parse_clause(segment: &str, at: usize) -> Result<Clause, QueryError> {
    let len = ident_len(segment);
    if len == 0 {
        return Err(syntax(at, "expected a variable or filter name"));
    }
    let name = &segment[..len];
    let rest = &segment[len..];
    if rest.starts_with('(') {
        return parse_call(name, rest, at, at + len).map(Clause::Filter);
    }
    let (op, op_len) = CompareOp::lex(rest)
        .ok_or_else(|| syntax(at + len, "expected a comparison operator"))?;
    let lit_at = at + len + op_len;
    let literal = parse_literal(name, &rest[op_len..], lit_at)?;
    Ok(Clause::Selection(Selection {
        operand: name.to_owned(),
        op,
        literal,
    }))
}

fn looks_like_timestamp(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() > 4 && b[..4].iter().all(u8::is_ascii_digit) && b[4] == b'-'
}

fn parse_literal(operand: &str, text: &str, at: usize) -> Result<Literal, QueryError> {
    if text.is_empty() {
        return Err(syntax(at, "expected a literal"));
    }
    if looks_like_timestamp(text) {
        if operand != TIME {
            return Err(syntax(at, "timestamp literals are only valid for time"));
        }
        return parse_timestamp(text)
            .map(|_| Literal::Time(text.to_owned()))
            .map_err(|_| syntax(at, format!("{text:?} is not YYYY-MM-DD[Thh:mm:ss[.fff]]")));
    }
    parse_number(text, at).map(Literal::Number)
}

/// Length of the numeric literal at the start of `s`, if the grammar matches.
fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let digits = |from: usize| b[from..].iter().take_while(|c| c.is_ascii_digit()).count();
    let mut i = usize::from(matches!(b.first(), Some(b'+' | b'-')));
    let int = digits(i);
    i += int;
    let mut frac = 0;
    if b.get(i) == Some(&b'.') {
        frac = digits(i + 1);
        if int == 0 && frac == 0 {
            return 0;
        }
        i += 1 + frac;
    }
    if int == 0 && frac == 0 {
        return 0;
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        let exp = digits(j);
        if exp > 0 {
            i = j + exp;
        }
    }
    i
}

fn parse_number(text: &str, at: usize) -> Result<f64, QueryError> {
    let len = number_len(text);
    if len == 0 {
        return Err(syntax(at, format!("{text:?} is not a number")));
    }
    if len != text.len() {
        return Err(syntax(at + len, format!("unexpected {:?} after number", &text[len..])));
    }
    let value: f64 = text.parse().map_err(|_| syntax(at, "unparseable number"))?;
    if !value.is_finite() {
        return Err(syntax(at, format!("{text} is out of range")));
    }
    Ok(value)
}

fn parse_call(name: &str, rest: &str, at: usize, paren_at: usize) -> Result<Filter, QueryError> {
    let Some(close) = rest.find(')') else {
        return Err(syntax(paren_at + rest.len(), "missing `)`"));
    };
    if close + 1 != rest.len() {
        return Err(syntax(paren_at + close + 1, "unexpected text after `)`"));
    }
    if !FILTER_NAMES.contains(&name) {
        return Err(QueryError::UnknownFilter {
            name: name.to_owned(),
            position: at,
        });
    }
    let inner = &rest[1..close];
    let args_at = paren_at + 1;
    let args: Vec<(&str, usize)> = if inner.is_empty() {
        Vec::new()
    } else {
        let mut offset = args_at;
        inner
            .split(',')
            .map(|a| {
                let item = (a, offset);
                offset += a.len() + 1;
                item
            })
            .collect()
    };
    let arity = |expected: usize| -> Result<(), QueryError> {
        if args.len() == expected {
            Ok(())
        } else {
            Err(QueryError::ArityError {
                filter: name.to_owned(),
                position: at,
                message: format!("expects {expected} argument(s), found {}", args.len()),
            })
        }
    };
    let bad_arg = |position: usize, message: String| QueryError::ArityError {
        filter: name.to_owned(),
        position,
        message,
    };
    let positive_int = |(text, pos): (&str, usize)| -> Result<u64, QueryError> {
        match text.parse::<u64>() {
            Ok(n) if n > 0 && text.bytes().all(|c| c.is_ascii_digit()) => Ok(n),
            _ => Err(bad_arg(pos, format!("{text:?} is not a positive integer"))),
        }
    };
    let filter = match name {
        "stride" | "thin" => {
            arity(1)?;
            let n = positive_int(args[0])?;
            if name == "stride" {
                Filter::Stride(n)
            } else {
                Filter::Thin(n)
            }
        }
        "replace_missing" => {
            arity(1)?;
            let (text, pos) = args[0];
            if text.eq_ignore_ascii_case("nan") {
                Filter::ReplaceMissing(f64::NAN)
            } else {
                Filter::ReplaceMissing(
                    parse_number(text, pos).map_err(|e| bad_arg(pos, e.to_string()))?,
                )
            }
        }
        "exclude_missing" => {
            arity(0)?;
            Filter::ExcludeMissing
        }
        _ => {
            arity(1)?;
            let (text, pos) = args[0];
            let width = parse_number(text, pos).map_err(|e| bad_arg(pos, e.to_string()))?;
            if !(width > 0.0) {
                return Err(bad_arg(pos, format!("bin width must be positive, got {text}")));
            }
            let kind = match name {
                "binavg" => BlockKind::Avg,
                "binmin" => BlockKind::Min,
                "binmax" => BlockKind::Max,
                _ => BlockKind::Count,
            };
            Filter::Block { kind, width }
        }
    };
    Ok(filter)
}
