//! Text form for sequence specs and index sets.
//!
//! The grammar is small enough to hand-parse and mirrors the constructors:
//!
//! ```text
//! spec     := const(v) | parity(a, b) | periodic(v, …)
//!           | blocks(i=1..: pattern*len, …)
//!           | overlay(spec; set -> rule, …)
//!           | explicit(v, …; spec)
//!           | diff(spec) | sum(spec, spec) | skip(spec, n)
//! pattern  := const(v) | alt(v, …)
//! len      := n | b^i
//! rule     := const(v) | index | index(scale, offset) | parity(a, b)
//! set      := term (“|” term)*        term := factor (“&” factor)*
//! factor   := “!” factor | “(” set “)” | atom
//! atom     := squares | evens | odds | all | none
//!           | ap(first, step) | finite(k, …) | range(lo, hi|inf)
//!           | blockset(i=1..: sel*len, …)
//! sel      := keep | skip | pos(o, …; m)     (offsets are 1-based)
//! ```
//!
//! `Display` on the parsed values renders canonical text that reparses to
//! an equal value.

use thiserror::Error;

use super::indexset::{IndexSet, PhaseSelect};
use super::schedule::{BlockLayout, BlockSchedule, LengthExpr, Pattern};
use super::{OverrideRule, SequenceSpec};
use crate::real::Real;

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("at byte {position}: expected {expected}, found {found}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

/// Either kind of top-level input.
#[derive(Debug, Clone, PartialEq)]
pub enum Parsed<T> {
    Spec(SequenceSpec<T>),
    Set(IndexSet),
}

pub fn parse<T: Real>(input: &str) -> Result<Parsed<T>, ParseError> {
    let mut p = Parser::new(input)?;
    let parsed = if p.peek_spec_keyword() {
        Parsed::Spec(p.spec()?)
    } else {
        Parsed::Set(p.set()?)
    };
    p.expect_end()?;
    Ok(parsed)
}

pub fn parse_spec<T: Real>(input: &str) -> Result<SequenceSpec<T>, ParseError> {
    let mut p = Parser::new(input)?;
    let spec = p.spec()?;
    p.expect_end()?;
    Ok(spec)
}

pub fn parse_set(input: &str) -> Result<IndexSet, ParseError> {
    let mut p = Parser::new(input)?;
    let set = p.set()?;
    p.expect_end()?;
    Ok(set)
}

/// `set -> rule`, the surface form of a witness modification.
pub fn parse_witness<T: Real>(input: &str) -> Result<(IndexSet, OverrideRule<T>), ParseError> {
    let mut p = Parser::new(input)?;
    let pair = p.override_pair()?;
    p.expect_end()?;
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Pipe,
    Amp,
    Bang,
    Star,
    Caret,
    Eq,
    Arrow,
    DotDot,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Star => "`*`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => push_sym(&mut toks, &mut i, Tok::LParen),
            b')' => push_sym(&mut toks, &mut i, Tok::RParen),
            b',' => push_sym(&mut toks, &mut i, Tok::Comma),
            b';' => push_sym(&mut toks, &mut i, Tok::Semi),
            b':' => push_sym(&mut toks, &mut i, Tok::Colon),
            b'|' => push_sym(&mut toks, &mut i, Tok::Pipe),
            b'&' => push_sym(&mut toks, &mut i, Tok::Amp),
            b'!' => push_sym(&mut toks, &mut i, Tok::Bang),
            b'*' => push_sym(&mut toks, &mut i, Tok::Star),
            b'^' => push_sym(&mut toks, &mut i, Tok::Caret),
            b'=' => push_sym(&mut toks, &mut i, Tok::Eq),
            b'.' => {
                if bytes.get(i + 1) == Some(&b'.') {
                    toks.push((i, Tok::DotDot));
                    i += 2;
                } else {
                    return Err(ParseError {
                        position: i,
                        expected: "`..`".into(),
                        found: "`.`".into(),
                    });
                }
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::Arrow));
                    i += 2;
                } else {
                    let start = i;
                    i += 1;
                    let num = scan_number(bytes, &mut i, start).ok_or(ParseError {
                        position: start,
                        expected: "a number after `-`".into(),
                        found: "`-`".into(),
                    })?;
                    toks.push((start, Tok::Number(num)));
                }
            }
            b'0'..=b'9' => {
                let start = i;
                let num = scan_number(bytes, &mut i, start).expect("digit present");
                toks.push((start, Tok::Number(num)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(input[start..i].to_string())));
            }
            _ => {
                let ch = input[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    position: i,
                    expected: "a token".into(),
                    found: format!("`{ch}`"),
                });
            }
        }
    }
    toks.push((input.len(), Tok::End));
    Ok(toks)
}

fn push_sym(toks: &mut Vec<(usize, Tok)>, i: &mut usize, tok: Tok) {
    toks.push((*i, tok));
    *i += 1;
}

/// Scans digits with optional fraction and exponent, starting after any
/// sign. Stops before `..` so range headers like `1..` lex cleanly.
fn scan_number(bytes: &[u8], i: &mut usize, start: usize) -> Option<String> {
    let digits_begin = *i;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i == digits_begin {
        return None;
    }
    if *i < bytes.len() && bytes[*i] == b'.' && bytes.get(*i + 1) != Some(&b'.') {
        *i += 1;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
    }
    if *i < bytes.len() && (bytes[*i] == b'e' || bytes[*i] == b'E') {
        let mut j = *i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            *i = j;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
        }
    }
    Some(String::from_utf8_lossy(&bytes[start..*i]).into_owned())
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    _input: &'a str,
}

const SPEC_KEYWORDS: [&str; 9] =
    ["const", "parity", "periodic", "blocks", "overlay", "explicit", "diff", "sum", "skip"];

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(input)?, pos: 0, _input: input })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].1
    }

    fn here(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn err(&self, expected: impl Into<String>) -> ParseError {
        ParseError {
            position: self.here(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(tok.describe()))
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.err("end of input"))
        }
    }

    fn peek_spec_keyword(&self) -> bool {
        match self.peek() {
            // `skip` alone is a selector word; as a spec it is followed by `(`
            Tok::Ident(s) => {
                SPEC_KEYWORDS.contains(&s.as_str()) && *self.peek_at(1) == Tok::LParen
            }
            _ => false,
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.err("a name")),
        }
    }

    fn scalar<T: Real>(&mut self) -> Result<T, ParseError> {
        match self.peek() {
            Tok::Number(raw) => {
                let parsed: f64 = raw.parse().map_err(|_| self.err("a numeric value"))?;
                let raw = raw.clone();
                self.bump();
                T::from_f64(parsed).ok_or(ParseError {
                    position: self.here(),
                    expected: "a representable numeric value".into(),
                    found: format!("`{raw}`"),
                })
            }
            _ => Err(self.err("a numeric value")),
        }
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Tok::Number(raw) => {
                let value: u64 =
                    raw.parse().map_err(|_| self.err("a non-negative integer"))?;
                self.bump();
                Ok(value)
            }
            _ => Err(self.err("a non-negative integer")),
        }
    }

    fn positive_integer(&mut self, what: &str) -> Result<u64, ParseError> {
        let at = self.here();
        let v = self.integer()?;
        if v == 0 {
            return Err(ParseError {
                position: at,
                expected: format!("a positive {what}"),
                found: "`0`".into(),
            });
        }
        Ok(v)
    }

    fn scalars<T: Real>(&mut self) -> Result<Vec<T>, ParseError> {
        let mut values = vec![self.scalar()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            values.push(self.scalar()?);
        }
        Ok(values)
    }

    fn spec<T: Real>(&mut self) -> Result<SequenceSpec<T>, ParseError> {
        let at = self.here();
        let name = self.ident()?;
        match name.as_str() {
            "const" => {
                self.expect(Tok::LParen)?;
                let v = self.scalar()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Constant(v))
            }
            "parity" => {
                self.expect(Tok::LParen)?;
                let odd = self.scalar()?;
                self.expect(Tok::Comma)?;
                let even = self.scalar()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Periodic(vec![odd, even]))
            }
            "periodic" => {
                self.expect(Tok::LParen)?;
                let values = self.scalars()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::periodic(values))
            }
            "blocks" => {
                self.expect(Tok::LParen)?;
                self.block_header()?;
                let mut phases = vec![self.block_item()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    phases.push(self.block_item()?);
                }
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Blocks(BlockSchedule::new(phases)))
            }
            "overlay" => {
                self.expect(Tok::LParen)?;
                let base = self.spec()?;
                self.expect(Tok::Semi)?;
                let mut overrides = vec![self.override_pair()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    overrides.push(self.override_pair()?);
                }
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Overlay { base: Box::new(base), overrides })
            }
            "explicit" => {
                self.expect(Tok::LParen)?;
                let head = self.scalars()?;
                self.expect(Tok::Semi)?;
                let tail = self.spec()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Explicit { head, tail: Box::new(tail) })
            }
            "diff" => {
                self.expect(Tok::LParen)?;
                let inner = self.spec()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Diff(Box::new(inner)))
            }
            "sum" => {
                self.expect(Tok::LParen)?;
                let a = self.spec()?;
                self.expect(Tok::Comma)?;
                let b = self.spec()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Sum(Box::new(a), Box::new(b)))
            }
            "skip" => {
                self.expect(Tok::LParen)?;
                let inner = self.spec()?;
                self.expect(Tok::Comma)?;
                let offset = self.integer()?;
                self.expect(Tok::RParen)?;
                Ok(SequenceSpec::Skip { inner: Box::new(inner), offset })
            }
            other => Err(ParseError {
                position: at,
                expected: "a sequence form (const, parity, periodic, blocks, overlay, \
                           explicit, diff, sum, skip)"
                    .into(),
                found: format!("`{other}`"),
            }),
        }
    }

    /// The `i=1..:` header shared by `blocks` and `blockset`.
    fn block_header(&mut self) -> Result<(), ParseError> {
        let at = self.here();
        let var = self.ident()?;
        if var != "i" {
            return Err(ParseError {
                position: at,
                expected: "the block variable `i`".into(),
                found: format!("`{var}`"),
            });
        }
        self.expect(Tok::Eq)?;
        let at = self.here();
        let start = self.integer()?;
        if start != 1 {
            return Err(ParseError {
                position: at,
                expected: "block schedules starting at `1`".into(),
                found: format!("`{start}`"),
            });
        }
        self.expect(Tok::DotDot)?;
        self.expect(Tok::Colon)?;
        Ok(())
    }

    fn block_item<T: Real>(&mut self) -> Result<(Pattern<T>, LengthExpr), ParseError> {
        let at = self.here();
        let name = self.ident()?;
        let pattern = match name.as_str() {
            "const" => {
                self.expect(Tok::LParen)?;
                let v = self.scalar()?;
                self.expect(Tok::RParen)?;
                Pattern::constant(v)
            }
            "alt" => {
                self.expect(Tok::LParen)?;
                let values = self.scalars()?;
                self.expect(Tok::RParen)?;
                Pattern::new(values)
            }
            other => {
                return Err(ParseError {
                    position: at,
                    expected: "a phase pattern (const or alt)".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        self.expect(Tok::Star)?;
        let len = self.length_expr()?;
        Ok((pattern, len))
    }

    fn length_expr(&mut self) -> Result<LengthExpr, ParseError> {
        let value = self.positive_integer("length")?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let at = self.here();
            let var = self.ident()?;
            if var != "i" {
                return Err(ParseError {
                    position: at,
                    expected: "the block variable `i`".into(),
                    found: format!("`{var}`"),
                });
            }
            Ok(LengthExpr::Pow { base: value })
        } else {
            Ok(LengthExpr::Const(value))
        }
    }

    fn override_pair<T: Real>(&mut self) -> Result<(IndexSet, OverrideRule<T>), ParseError> {
        let set = self.set()?;
        self.expect(Tok::Arrow)?;
        let rule = self.rule()?;
        Ok((set, rule))
    }

    fn rule<T: Real>(&mut self) -> Result<OverrideRule<T>, ParseError> {
        let at = self.here();
        let name = self.ident()?;
        match name.as_str() {
            "const" => {
                self.expect(Tok::LParen)?;
                let v = self.scalar()?;
                self.expect(Tok::RParen)?;
                Ok(OverrideRule::Constant(v))
            }
            "index" => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let scale = self.scalar()?;
                    self.expect(Tok::Comma)?;
                    let offset = self.scalar()?;
                    self.expect(Tok::RParen)?;
                    Ok(OverrideRule::IndexValue { scale, offset })
                } else {
                    Ok(OverrideRule::IndexValue { scale: T::one(), offset: T::zero() })
                }
            }
            "parity" => {
                self.expect(Tok::LParen)?;
                let odd = self.scalar()?;
                self.expect(Tok::Comma)?;
                let even = self.scalar()?;
                self.expect(Tok::RParen)?;
                Ok(OverrideRule::Parity { odd, even })
            }
            other => Err(ParseError {
                position: at,
                expected: "an override rule (const, index, parity)".into(),
                found: format!("`{other}`"),
            }),
        }
    }

    fn set(&mut self) -> Result<IndexSet, ParseError> {
        let mut acc = self.set_term()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.set_term()?;
            acc = IndexSet::Union(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn set_term(&mut self) -> Result<IndexSet, ParseError> {
        let mut acc = self.set_factor()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.set_factor()?;
            acc = IndexSet::Intersection(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn set_factor(&mut self) -> Result<IndexSet, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let inner = self.set_factor()?;
                Ok(IndexSet::Complement(Box::new(inner)))
            }
            Tok::LParen => {
                self.bump();
                let set = self.set()?;
                self.expect(Tok::RParen)?;
                Ok(set)
            }
            _ => self.set_atom(),
        }
    }

    fn set_atom(&mut self) -> Result<IndexSet, ParseError> {
        let at = self.here();
        let name = self.ident()?;
        match name.as_str() {
            "squares" => Ok(IndexSet::Squares),
            "evens" => Ok(IndexSet::evens()),
            "odds" => Ok(IndexSet::odds()),
            "all" => Ok(IndexSet::all()),
            "none" => Ok(IndexSet::empty()),
            "ap" => {
                self.expect(Tok::LParen)?;
                let first = self.positive_integer("first index")?;
                self.expect(Tok::Comma)?;
                let step = self.positive_integer("step")?;
                self.expect(Tok::RParen)?;
                Ok(IndexSet::ap(first, step))
            }
            "finite" => {
                self.expect(Tok::LParen)?;
                let mut members = vec![self.positive_integer("index")?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    members.push(self.positive_integer("index")?);
                }
                self.expect(Tok::RParen)?;
                Ok(IndexSet::finite(members))
            }
            "range" => {
                self.expect(Tok::LParen)?;
                let lo = self.integer()?;
                self.expect(Tok::Comma)?;
                let hi = match self.peek() {
                    Tok::Ident(s) if s == "inf" => {
                        self.bump();
                        None
                    }
                    _ => Some(self.integer()?),
                };
                self.expect(Tok::RParen)?;
                Ok(IndexSet::range(lo, hi))
            }
            "blockset" => {
                self.expect(Tok::LParen)?;
                self.block_header()?;
                let mut lens = Vec::new();
                let mut select = Vec::new();
                loop {
                    let (sel, len) = self.select_item()?;
                    select.push(sel);
                    lens.push(len);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                Ok(IndexSet::blocks(BlockLayout::new(lens), select))
            }
            other => Err(ParseError {
                position: at,
                expected: "an index set (squares, evens, odds, all, none, ap, finite, \
                           range, blockset)"
                    .into(),
                found: format!("`{other}`"),
            }),
        }
    }

    fn select_item(&mut self) -> Result<(PhaseSelect, LengthExpr), ParseError> {
        let at = self.here();
        let name = self.ident()?;
        let sel = match name.as_str() {
            "keep" => PhaseSelect::Keep,
            "skip" => PhaseSelect::Skip,
            "pos" => {
                self.expect(Tok::LParen)?;
                let mut offsets = vec![self.positive_integer("position")?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    offsets.push(self.positive_integer("position")?);
                }
                self.expect(Tok::Semi)?;
                let at_mod = self.here();
                let modulus = self.positive_integer("modulus")?;
                self.expect(Tok::RParen)?;
                if offsets.iter().any(|&o| o > modulus) {
                    return Err(ParseError {
                        position: at_mod,
                        expected: "positions no larger than the modulus".into(),
                        found: format!("modulus `{modulus}`"),
                    });
                }
                // surface positions are 1-based; stored offsets 0-based
                PhaseSelect::Positions {
                    modulus,
                    offsets: offsets.into_iter().map(|o| o - 1).collect(),
                }
            }
            other => {
                return Err(ParseError {
                    position: at,
                    expected: "a phase selector (keep, skip, pos)".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        self.expect(Tok::Star)?;
        let len = self.length_expr()?;
        Ok((sel, len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip_spec(text: &str) {
        let spec: SequenceSpec<f64> = parse_spec(text).unwrap();
        let rendered = spec.to_string();
        let reparsed: SequenceSpec<f64> = parse_spec(&rendered).unwrap();
        assert_eq!(spec, reparsed, "render `{rendered}` did not reparse equal");
    }

    fn roundtrip_set(text: &str) {
        let set = parse_set(text).unwrap();
        let rendered = set.to_string();
        let reparsed = parse_set(&rendered).unwrap();
        assert_eq!(set, reparsed, "render `{rendered}` did not reparse equal");
    }

    #[test]
    fn parses_the_catalog_shapes() {
        let lambda: SequenceSpec<f64> =
            parse_spec("overlay(const(0); squares -> index)").unwrap();
        assert_eq!(lambda.term(9), 9.0);
        assert_eq!(lambda.term(8), 0.0);

        let alt: SequenceSpec<f64> = parse_spec("periodic(1, 0)").unwrap();
        assert_eq!(alt.term(1), 1.0);
        assert_eq!(alt.term(2), 0.0);

        let blocks: SequenceSpec<f64> =
            parse_spec("blocks(i=1..: const(0)*100^i, const(1)*10^i)").unwrap();
        assert_eq!(blocks.term(100), 0.0);
        assert_eq!(blocks.term(101), 1.0);

        let five: SequenceSpec<f64> =
            parse_spec("overlay(parity(1, 0); squares -> const(5))").unwrap();
        assert_eq!(five.term(4), 5.0);
        assert_eq!(five.term(3), 1.0);
        assert_eq!(five.term(2), 0.0);

        let xi: SequenceSpec<f64> =
            parse_spec("blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i)").unwrap();
        assert_eq!(xi.term(1), 1.0);
        assert_eq!(xi.term(2), 0.0);
        assert_eq!(xi.term(101), 1.0);
    }

    #[test]
    fn parses_witness_sets() {
        let (set, rule): (IndexSet, OverrideRule<f64>) =
            parse_witness("(blockset(i=1..: skip*100^i, keep*10^i) & evens) -> const(0)")
                .unwrap();
        assert!(set.contains(102));
        assert!(!set.contains(101));
        assert!(!set.contains(2));
        assert_eq!(rule, OverrideRule::Constant(0.0));
    }

    #[test]
    fn set_operators_have_expected_precedence() {
        // `a | b & c` groups as `a | (b & c)`
        let set = parse_set("squares | evens & odds").unwrap();
        match set {
            IndexSet::Union(a, b) => {
                assert_eq!(*a, IndexSet::Squares);
                assert!(matches!(*b, IndexSet::Intersection(_, _)));
            }
            other => panic!("wrong grouping: {other:?}"),
        }
        // `!` binds tighter than `&`
        let set = parse_set("!squares & evens").unwrap();
        assert!(matches!(set, IndexSet::Intersection(_, _)));
    }

    #[test]
    fn one_based_positions_round_trip() {
        let set = parse_set("blockset(i=1..: pos(1; 2)*100^i, skip*10^i)").unwrap();
        // position 1 of each pair: indices 1, 3, 5, … within alternating runs
        assert!(set.contains(1));
        assert!(!set.contains(2));
        assert!(set.contains(99));
        roundtrip_set("blockset(i=1..: pos(1; 2)*100^i, skip*10^i)");
        roundtrip_set("blockset(i=1..: pos(2; 3)*4, keep*7)");
    }

    #[test]
    fn round_trips_cover_every_form() {
        for text in [
            "const(0.5)",
            "periodic(1, 0)",
            "periodic(-1, 2.25, 3e-2)",
            "parity(1, 0)",
            "blocks(i=1..: const(0)*100^i, const(1)*10^i)",
            "blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i)",
            "blocks(i=1..: alt(0.5, -0.5)*3, const(2)*5)",
            "overlay(const(0); squares -> index)",
            "overlay(parity(1, 0); squares -> const(5), evens & squares -> index(2, -1))",
            "explicit(3, 1, 4; periodic(1, 5))",
            "diff(overlay(const(0); squares -> const(1)))",
            "sum(periodic(1, 0), const(-0.5))",
            "skip(blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i), 7)",
        ] {
            roundtrip_spec(text);
        }
        for text in [
            "squares",
            "evens",
            "odds",
            "all",
            "none",
            "ap(3, 7)",
            "finite(1, 5, 9)",
            "range(10, 100)",
            "range(0, inf)",
            "!squares",
            "squares | evens & !ap(3, 7)",
            "(squares | evens) & !(odds | finite(2))",
            "blockset(i=1..: skip*100^i, keep*10^i) & evens",
        ] {
            roundtrip_set(text);
        }
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_set("squares | ").unwrap_err();
        assert_eq!(err.position, 10);

        let err = parse_spec::<f64>("periodic(1, )").unwrap_err();
        assert_eq!(err.position, 12);

        let err = parse_spec::<f64>("blocks(i=2..: const(0)*10^i)").unwrap_err();
        assert_eq!(err.position, 9);
        assert!(err.expected.contains("starting at `1`"));

        let err = parse_set("ap(0, 3)").unwrap_err();
        assert!(err.expected.contains("positive"));

        let err = parse_spec::<f64>("const(1) extra").unwrap_err();
        assert!(err.expected.contains("end of input"));

        let err = parse_set("blockset(i=1..: pos(3; 2)*10^i)").unwrap_err();
        assert!(err.expected.contains("no larger than the modulus"));
    }

    #[test]
    fn evens_and_odds_are_progressions() {
        assert_eq!(parse_set("evens").unwrap(), parse_set("ap(2, 2)").unwrap());
        assert_eq!(parse_set("odds").unwrap(), parse_set("ap(1, 2)").unwrap());
    }

    #[test]
    fn skip_is_both_selector_and_combinator() {
        let spec: SequenceSpec<f64> = parse_spec("skip(periodic(1, 0), 1)").unwrap();
        assert_eq!(spec.term(1), 0.0);
        let parsed: Parsed<f64> = parse("skip(periodic(1, 0), 1)").unwrap();
        assert!(matches!(parsed, Parsed::Spec(_)));
        let parsed: Parsed<f64> = parse("squares & evens").unwrap();
        assert!(matches!(parsed, Parsed::Set(_)));
    }
}
