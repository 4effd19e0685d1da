//! C `printf`-style rendering of doubles, driven by the `cformatstring`
//! fragments in dataset metadata (`".2f"`, `"d"`, `"10.3e"`, ...).
//!
//! A fragment is the body of a `%` conversion: flags `-+ #0`, a width, an
//! optional `.precision`, an ignored `l`/`L` length modifier, and one of
//! `d i u f F e E g G`. Integer conversions round half away from zero.
//! NaN always renders as `NaN`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("BadFormatFragment: {fragment:?}: {reason}")]
pub struct BadFormatFragment {
    pub fragment: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Conversion {
    Int,
    Fixed,
    Exp,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CFormat {
    left: bool,
    plus: bool,
    space: bool,
    alt: bool,
    zero: bool,
    width: usize,
    precision: Option<usize>,
    conversion: Conversion,
    upper: bool,
}

impl FromStr for CFormat {
    type Err = BadFormatFragment;

    fn from_str(fragment: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| BadFormatFragment {
            fragment: fragment.to_owned(),
            reason: reason.to_owned(),
        };
        let s = fragment.trim_end();
        let s = s.strip_prefix('%').unwrap_or(s);
        let mut chars = s.chars().peekable();
        let mut f = CFormat {
            left: false,
            plus: false,
            space: false,
            alt: false,
            zero: false,
            width: 0,
            precision: None,
            conversion: Conversion::General,
            upper: false,
        };
        while let Some(&c) = chars.peek() {
            match c {
                '-' => f.left = true,
                '+' => f.plus = true,
                ' ' => f.space = true,
                '#' => f.alt = true,
                '0' => f.zero = true,
                _ => break,
            }
            chars.next();
        }
        let digits = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let mut n: usize = 0;
            while let Some(d) = chars.peek().and_then(|c| c.to_digit(10)) {
                n = n.checked_mul(10)?.checked_add(d as usize)?;
                chars.next();
            }
            Some(n)
        };
        f.width = digits(&mut chars).ok_or_else(|| bad("width too large"))?;
        if chars.peek() == Some(&'.') {
            chars.next();
            f.precision = Some(digits(&mut chars).ok_or_else(|| bad("precision too large"))?);
        }
        while matches!(chars.peek(), Some('l' | 'L')) {
            chars.next();
        }
        let conv = chars.next().ok_or_else(|| bad("missing conversion"))?;
        if chars.next().is_some() {
            return Err(bad("trailing characters after the conversion"));
        }
        (f.conversion, f.upper) = match conv {
            'd' | 'i' | 'u' => (Conversion::Int, false),
            'f' => (Conversion::Fixed, false),
            'F' => (Conversion::Fixed, true),
            'e' => (Conversion::Exp, false),
            'E' => (Conversion::Exp, true),
            'g' => (Conversion::General, false),
            'G' => (Conversion::General, true),
            _ => return Err(bad(&format!("unsupported conversion '{conv}'"))),
        };
        if f.width > 1024 || f.precision.is_some_and(|p| p > 340) {
            return Err(bad("width or precision out of range"));
        }
        Ok(f)
    }
}

impl CFormat {
    pub fn format(&self, v: f64) -> String {
        if v.is_nan() {
            return "NaN".into();
        }
        let mut negative = v.is_sign_negative();
        let a = v.abs();
        let body = if a.is_infinite() {
            if self.upper { "INF" } else { "inf" }.to_owned()
        } else {
            match self.conversion {
                Conversion::Int => {
                    let r = a.round();
                    if r == 0.0 {
                        negative = false;
                    }
                    let digits = format!("{r:.0}");
                    match self.precision {
                        Some(0) if r == 0.0 => String::new(),
                        Some(p) if p > digits.len() => format!("{}{digits}", "0".repeat(p - digits.len())),
                        _ => digits,
                    }
                }
                Conversion::Fixed => self.fixed(a, self.precision.unwrap_or(6)),
                Conversion::Exp => self.exp(a, self.precision.unwrap_or(6), false),
                Conversion::General => self.general(a),
            }
        };
        let sign = if negative {
            "-"
        } else if self.plus {
            "+"
        } else if self.space {
            " "
        } else {
            ""
        };
        let len = sign.len() + body.len();
        if len >= self.width {
            return format!("{sign}{body}");
        }
        let pad = self.width - len;
        let zero_ok = self.zero
            && a.is_finite()
            && !(self.conversion == Conversion::Int && self.precision.is_some());
        if self.left {
            format!("{sign}{body}{}", " ".repeat(pad))
        } else if zero_ok {
            format!("{sign}{}{body}", "0".repeat(pad))
        } else {
            format!("{}{sign}{body}", " ".repeat(pad))
        }
    }

    fn fixed(&self, a: f64, precision: usize) -> String {
        let mut s = format!("{a:.precision$}");
        if self.alt && precision == 0 {
            s.push('.');
        }
        s
    }

    fn exp(&self, a: f64, precision: usize, strip: bool) -> String {
        let s = format!("{a:.precision$e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let exponent: i32 = exponent.parse().expect("integer exponent");
        let mut mantissa = mantissa.to_owned();
        if strip {
            strip_zeros(&mut mantissa);
        } else if self.alt && precision == 0 {
            mantissa.push('.');
        }
        let e = if self.upper { 'E' } else { 'e' };
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}{e}{sign}{:02}", exponent.abs())
    }

    fn general(&self, a: f64) -> String {
        let p = self.precision.unwrap_or(6).max(1);
        let x = if a == 0.0 {
            0
        } else {
            let s = format!("{a:.prec$e}", prec = p - 1);
            s.split_once('e').expect("exponent form").1.parse::<i64>().expect("integer exponent")
        };
        let strip = !self.alt;
        if (p as i64) > x && x >= -4 {
            let mut s = self.fixed(a, (p as i64 - 1 - x) as usize);
            if strip {
                strip_zeros(&mut s);
            } else if !s.contains('.') {
                s.push('.');
            }
            s
        } else {
            self.exp(a, p - 1, strip)
        }
    }
}

fn strip_zeros(s: &mut String) {
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
}

impl fmt::Display for CFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, c) in [(self.left, '-'), (self.plus, '+'), (self.space, ' '), (self.alt, '#'), (self.zero, '0')] {
            if on {
                write!(f, "{c}")?;
            }
        }
        if self.width > 0 {
            write!(f, "{}", self.width)?;
        }
        if let Some(p) = self.precision {
            write!(f, ".{p}")?;
        }
        let c = match (self.conversion, self.upper) {
            (Conversion::Int, _) => 'd',
            (Conversion::Fixed, false) => 'f',
            (Conversion::Fixed, true) => 'F',
            (Conversion::Exp, false) => 'e',
            (Conversion::Exp, true) => 'E',
            (Conversion::General, false) => 'g',
            (Conversion::General, true) => 'G',
        };
        write!(f, "{c}")
    }
}

/// Shortest decimal that parses back to the same double: `3`, `0.1`,
/// `1e21`, `NaN`, `inf`.
pub fn render_shortest(v: f64) -> String {
    let s = format!("{v:?}");
    match s.strip_suffix(".0") {
        Some(int) => int.to_owned(),
        None => s,
    }
}
