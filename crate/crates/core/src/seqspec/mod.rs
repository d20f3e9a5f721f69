//! Finitely-described real sequences and symbolic index sets.
//!
//! A [`SequenceSpec`] is a closed description of an infinite sequence
//! `x_1, x_2, …`: constants, periodic cycles, growing block schedules,
//! finite prefixes, pointwise overrides on symbolic index sets, and the
//! difference/sum/shift combinators needed to state telescoping and
//! recentering identities. Every spec can produce its term at any index,
//! stream terms from any starting point, and report a sound bound on its
//! values when one is derivable from the description.

pub mod dsl;
pub mod indexset;
pub mod schedule;

pub use indexset::{BlockSet, CountUnavailable, IndexSet, PhaseSelect};
pub use schedule::{BlockLayout, BlockSchedule, LengthExpr, Pattern, Span};

use std::fmt;

use crate::real::Real;

/// A deterministic description of an infinite real sequence, 1-indexed.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSpec<T> {
    /// `x_k = c`.
    Constant(T),
    /// `x_k` cycles through the given values.
    Periodic(Vec<T>),
    /// Concatenated phase runs with block-dependent lengths.
    Blocks(BlockSchedule<T>),
    /// A finite prefix followed by another spec (re-indexed from 1).
    Explicit { head: Vec<T>, tail: Box<SequenceSpec<T>> },
    /// A base sequence with rules applied on symbolic index sets; when
    /// sets overlap, the later override wins.
    Overlay { base: Box<SequenceSpec<T>>, overrides: Vec<(IndexSet, OverrideRule<T>)> },
    /// `x_k = y_k − y_{k+1}` for the inner sequence `y`.
    Diff(Box<SequenceSpec<T>>),
    /// Pointwise sum of two sequences.
    Sum(Box<SequenceSpec<T>>, Box<SequenceSpec<T>>),
    /// `x_k = y_{k + offset}`: the inner sequence with a prefix dropped.
    Skip { inner: Box<SequenceSpec<T>>, offset: u64 },
}

/// Value assigned on an override set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverrideRule<T> {
    Constant(T),
    /// `k ↦ scale·k + offset`.
    IndexValue { scale: T, offset: T },
    /// Value depends on the parity of the index.
    Parity { odd: T, even: T },
}

impl<T: Real> OverrideRule<T> {
    pub fn value(&self, k: u64) -> T {
        match *self {
            OverrideRule::Constant(c) => c,
            OverrideRule::IndexValue { scale, offset } => scale * T::from_index(k) + offset,
            OverrideRule::Parity { odd, even } => {
                if k % 2 == 1 {
                    odd
                } else {
                    even
                }
            }
        }
    }

    /// Enclosure of attainable values, if finite.
    pub fn value_range(&self) -> Option<(T, T)> {
        match *self {
            OverrideRule::Constant(c) => Some((c, c)),
            OverrideRule::IndexValue { scale, offset } => {
                if scale == T::zero() {
                    Some((offset, offset))
                } else {
                    None
                }
            }
            OverrideRule::Parity { odd, even } => Some((odd.min(even), odd.max(even))),
        }
    }
}

impl<T: Real> SequenceSpec<T> {
    pub fn periodic(values: Vec<T>) -> Self {
        assert!(!values.is_empty(), "a periodic spec needs at least one value");
        if values.len() == 1 {
            SequenceSpec::Constant(values[0])
        } else {
            SequenceSpec::Periodic(values)
        }
    }

    pub fn explicit(head: Vec<T>, tail: SequenceSpec<T>) -> Self {
        if head.is_empty() {
            tail
        } else {
            SequenceSpec::Explicit { head, tail: Box::new(tail) }
        }
    }

    pub fn overlay(base: SequenceSpec<T>, overrides: Vec<(IndexSet, OverrideRule<T>)>) -> Self {
        if overrides.is_empty() {
            base
        } else {
            SequenceSpec::Overlay { base: Box::new(base), overrides }
        }
    }

    /// Term at 1-based index `k`.
    pub fn term(&self, k: u64) -> T {
        assert!(k >= 1, "sequence indices are 1-based");
        match self {
            SequenceSpec::Constant(c) => *c,
            SequenceSpec::Periodic(v) => v[((k - 1) % v.len() as u64) as usize],
            SequenceSpec::Blocks(sched) => sched.term(k),
            SequenceSpec::Explicit { head, tail } => {
                let len = head.len() as u64;
                if k <= len {
                    head[(k - 1) as usize]
                } else {
                    tail.term(k - len)
                }
            }
            SequenceSpec::Overlay { base, overrides } => {
                let mut val = base.term(k);
                for (set, rule) in overrides {
                    if set.contains(k) {
                        val = rule.value(k);
                    }
                }
                val
            }
            SequenceSpec::Diff(inner) => inner.term(k) - inner.term(k + 1),
            SequenceSpec::Sum(a, b) => a.term(k) + b.term(k),
            SequenceSpec::Skip { inner, offset } => inner.term(k + offset),
        }
    }

    /// Streams `x_start, x_{start+1}, …` without per-term index lookups.
    pub fn terms_from(&self, start: u64) -> Box<dyn Iterator<Item = T> + '_> {
        let start = start.max(1);
        match self {
            SequenceSpec::Constant(c) => Box::new(std::iter::repeat(*c)),
            SequenceSpec::Periodic(v) => {
                let len = v.len();
                let from = ((start - 1) % len as u64) as usize;
                Box::new(v.iter().copied().cycle().skip(from))
            }
            SequenceSpec::Blocks(sched) => Box::new(blocks_terms(sched, start)),
            SequenceSpec::Explicit { head, tail } => {
                let len = head.len() as u64;
                if start <= len {
                    Box::new(
                        head[(start - 1) as usize..]
                            .iter()
                            .copied()
                            .chain(DeferredTerms { spec: tail, start: 1 }),
                    )
                } else {
                    tail.terms_from(start - len)
                }
            }
            SequenceSpec::Overlay { base, overrides } => {
                let mut streams: Vec<_> = overrides
                    .iter()
                    .map(|(set, rule)| (set.members_from(start).peekable(), *rule))
                    .collect();
                Box::new(base.terms_from(start).enumerate().map(move |(i, base_val)| {
                    let k = start + i as u64;
                    let mut val = base_val;
                    for (stream, rule) in &mut streams {
                        while let Some(&m) = stream.peek() {
                            if m < k {
                                stream.next();
                            } else {
                                break;
                            }
                        }
                        if stream.peek() == Some(&k) {
                            val = rule.value(k);
                        }
                    }
                    val
                }))
            }
            SequenceSpec::Diff(inner) => Box::new(
                inner
                    .terms_from(start)
                    .zip(inner.terms_from(start + 1))
                    .map(|(a, b)| a - b),
            ),
            SequenceSpec::Sum(a, b) => {
                Box::new(a.terms_from(start).zip(b.terms_from(start)).map(|(x, y)| x + y))
            }
            SequenceSpec::Skip { inner, offset } => {
                inner.terms_from(start.saturating_add(*offset))
            }
        }
    }

    /// Sound enclosure `[lo, hi]` of every term, when derivable.
    pub fn value_range(&self) -> Option<(T, T)> {
        match self {
            SequenceSpec::Constant(c) => Some((*c, *c)),
            SequenceSpec::Periodic(v) => Some(slice_range(v)),
            SequenceSpec::Blocks(sched) => {
                let mut lo = T::infinity();
                let mut hi = T::neg_infinity();
                for (pattern, _) in sched.phases() {
                    lo = lo.min(pattern.min());
                    hi = hi.max(pattern.max());
                }
                Some((lo, hi))
            }
            SequenceSpec::Explicit { head, tail } => {
                let (hlo, hhi) = slice_range(head);
                let (tlo, thi) = tail.value_range()?;
                Some((hlo.min(tlo), hhi.max(thi)))
            }
            SequenceSpec::Overlay { base, overrides } => {
                let (mut lo, mut hi) = base.value_range()?;
                for (set, rule) in overrides {
                    if set.known_empty() {
                        continue;
                    }
                    let (rlo, rhi) = rule.value_range()?;
                    lo = lo.min(rlo);
                    hi = hi.max(rhi);
                }
                Some((lo, hi))
            }
            SequenceSpec::Diff(inner) => {
                let (lo, hi) = inner.value_range()?;
                Some((lo - hi, hi - lo))
            }
            SequenceSpec::Sum(a, b) => {
                let (alo, ahi) = a.value_range()?;
                let (blo, bhi) = b.value_range()?;
                Some((alo + blo, ahi + bhi))
            }
            SequenceSpec::Skip { inner, .. } => inner.value_range(),
        }
    }

    /// `sup_k |x_k|` bounded from above, when derivable.
    pub fn sup_bound(&self) -> Option<T> {
        let (lo, hi) = self.value_range()?;
        Some(lo.abs().max(hi.abs()))
    }

    /// The sequence `x_2, x_3, …`.
    pub fn shift(&self) -> SequenceSpec<T> {
        match self {
            SequenceSpec::Constant(c) => SequenceSpec::Constant(*c),
            SequenceSpec::Periodic(v) => {
                let mut rotated = v.clone();
                rotated.rotate_left(1);
                SequenceSpec::Periodic(rotated)
            }
            SequenceSpec::Explicit { head, tail } => {
                if head.len() > 1 {
                    SequenceSpec::Explicit {
                        head: head[1..].to_vec(),
                        tail: tail.clone(),
                    }
                } else {
                    (**tail).clone()
                }
            }
            SequenceSpec::Skip { inner, offset } => SequenceSpec::Skip {
                inner: inner.clone(),
                offset: offset.checked_add(1).expect("shift offset overflow"),
            },
            other => SequenceSpec::Skip { inner: Box::new(other.clone()), offset: 1 },
        }
    }

    /// The block schedule this spec is built around, if any, together with
    /// the index offset between spec positions and schedule positions.
    pub fn blocks_core(&self) -> Option<(&BlockSchedule<T>, u64)> {
        match self {
            SequenceSpec::Blocks(sched) => Some((sched, 0)),
            SequenceSpec::Overlay { base, .. } => base.blocks_core(),
            SequenceSpec::Diff(inner) => inner.blocks_core(),
            SequenceSpec::Sum(a, b) => a.blocks_core().or_else(|| b.blocks_core()),
            SequenceSpec::Skip { inner, offset } => {
                inner.blocks_core().map(|(s, o)| (s, o + offset))
            }
            _ => None,
        }
    }

    /// Cycle length of the underlying periodic structure, if any.
    pub fn period_hint(&self) -> Option<u64> {
        match self {
            SequenceSpec::Constant(_) => Some(1),
            SequenceSpec::Periodic(v) => Some(v.len() as u64),
            SequenceSpec::Overlay { base, .. } => base.period_hint(),
            SequenceSpec::Skip { inner, .. } => inner.period_hint(),
            SequenceSpec::Diff(inner) => inner.period_hint(),
            SequenceSpec::Sum(a, b) => {
                let pa = a.period_hint()?;
                let pb = b.period_hint()?;
                pa.checked_mul(pb / num_integer::gcd(pa, pb))
            }
            _ => None,
        }
    }
}

fn slice_range<T: Real>(values: &[T]) -> (T, T) {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    (lo, hi)
}

fn blocks_terms<T: Real>(sched: &BlockSchedule<T>, start: u64) -> impl Iterator<Item = T> + '_ {
    sched
        .layout()
        .into_spans()
        .filter(move |span| span.end() >= start)
        .flat_map(move |span| {
            let pattern = sched.pattern(span.phase).clone();
            let from = start.max(span.start + 1);
            (from..=span.end()).map(move |k| pattern.value_at(k - span.start - 1))
        })
}

struct DeferredTerms<'a, T> {
    spec: &'a SequenceSpec<T>,
    start: u64,
}

impl<'a, T: Real> IntoIterator for DeferredTerms<'a, T> {
    type Item = T;
    type IntoIter = Box<dyn Iterator<Item = T> + 'a>;

    fn into_iter(self) -> Self::IntoIter {
        self.spec.terms_from(self.start)
    }
}

// ---------------------------------------------------------------------------
// Canonical rendering. `Display` output reparses to an equal value, which the
// round-trip tests rely on.

impl<T: Real> fmt::Display for SequenceSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Constant(c) => write!(f, "const({c})"),
            SequenceSpec::Periodic(v) => {
                write!(f, "periodic(")?;
                write_scalars(f, v)?;
                write!(f, ")")
            }
            SequenceSpec::Blocks(sched) => {
                write!(f, "blocks(i=1..: ")?;
                for (i, (pattern, len)) in sched.phases().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    if pattern.values().len() == 1 {
                        write!(f, "const({})", pattern.values()[0])?;
                    } else {
                        write!(f, "alt(")?;
                        write_scalars(f, pattern.values())?;
                        write!(f, ")")?;
                    }
                    match len {
                        LengthExpr::Const(c) => write!(f, "*{c}")?,
                        LengthExpr::Pow { base } => write!(f, "*{base}^i")?,
                    }
                }
                write!(f, ")")
            }
            SequenceSpec::Explicit { head, tail } => {
                write!(f, "explicit(")?;
                write_scalars(f, head)?;
                write!(f, "; {tail})")
            }
            SequenceSpec::Overlay { base, overrides } => {
                write!(f, "overlay({base}; ")?;
                for (i, (set, rule)) in overrides.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{set} -> {rule}")?;
                }
                write!(f, ")")
            }
            SequenceSpec::Diff(inner) => write!(f, "diff({inner})"),
            SequenceSpec::Sum(a, b) => write!(f, "sum({a}, {b})"),
            SequenceSpec::Skip { inner, offset } => write!(f, "skip({inner}, {offset})"),
        }
    }
}

impl<T: Real> fmt::Display for OverrideRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OverrideRule::Constant(c) => write!(f, "const({c})"),
            OverrideRule::IndexValue { scale, offset } => {
                if scale == T::one() && offset == T::zero() {
                    write!(f, "index")
                } else {
                    write!(f, "index({scale}, {offset})")
                }
            }
            OverrideRule::Parity { odd, even } => write!(f, "parity({odd}, {even})"),
        }
    }
}

fn write_scalars<T: Real>(f: &mut fmt::Formatter<'_>, values: &[T]) -> fmt::Result {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_set(f, self, 0)
    }
}

/// Precedence levels: 0 = union, 1 = intersection, 2 = atom/complement.
fn write_set(f: &mut fmt::Formatter<'_>, set: &IndexSet, level: u8) -> fmt::Result {
    let own = match set {
        IndexSet::Union(_, _) => 0,
        IndexSet::Intersection(_, _) => 1,
        _ => 2,
    };
    let parens = own < level;
    if parens {
        write!(f, "(")?;
    }
    match set {
        IndexSet::Ap { first, step } => write!(f, "ap({first}, {step})")?,
        IndexSet::Squares => write!(f, "squares")?,
        IndexSet::Finite(v) if v.is_empty() => write!(f, "none")?,
        IndexSet::Finite(v) => {
            write!(f, "finite(")?;
            for (i, m) in v.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{m}")?;
            }
            write!(f, ")")?;
        }
        IndexSet::Range { lo: 0, hi: None } => write!(f, "all")?,
        IndexSet::Range { lo, hi: None } => write!(f, "range({lo}, inf)")?,
        IndexSet::Range { lo, hi: Some(h) } => write!(f, "range({lo}, {h})")?,
        IndexSet::Blocks(bs) => {
            write!(f, "blockset(i=1..: ")?;
            let lens = &bs.layout().lens;
            for (i, (sel, len)) in bs.selectors().iter().zip(lens).enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                match sel {
                    PhaseSelect::Skip => write!(f, "skip")?,
                    PhaseSelect::Keep => write!(f, "keep")?,
                    PhaseSelect::Positions { modulus, offsets } => {
                        write!(f, "pos(")?;
                        for (j, o) in offsets.iter().enumerate() {
                            if j > 0 {
                                write!(f, ", ")?;
                            }
                            // rendered 1-based to match the rest of the DSL
                            write!(f, "{}", o + 1)?;
                        }
                        write!(f, "; {modulus})")?;
                    }
                }
                match len {
                    LengthExpr::Const(c) => write!(f, "*{c}")?,
                    LengthExpr::Pow { base } => write!(f, "*{base}^i")?,
                }
            }
            write!(f, ")")?;
        }
        IndexSet::Complement(a) => {
            write!(f, "!")?;
            write_set(f, a, 2)?;
        }
        // the parser folds chains to the left, so right operands at the
        // same level need parentheses to reparse into the same tree
        IndexSet::Union(a, b) => {
            write_set(f, a, 0)?;
            write!(f, " | ")?;
            write_set(f, b, 1)?;
        }
        IndexSet::Intersection(a, b) => {
            write_set(f, a, 1)?;
            write!(f, " & ")?;
            write_set(f, b, 2)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}
