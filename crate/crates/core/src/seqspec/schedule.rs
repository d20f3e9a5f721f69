//! Block schedules: infinite concatenations of phase runs whose lengths may
//! grow geometrically with the block index.
//!
//! A schedule lays out blocks `1, 2, 3, …`, each block being the
//! concatenation of its phases in order. Phase lengths are either constant
//! or `base^i` for block index `i`, so boundary positions can exceed `u64`
//! after a few dozen blocks; exact boundary arithmetic is done in `BigUint`
//! and a clamped `u64` walker is provided for the ranges where indices are
//! actually enumerable.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::real::Real;

/// Length of one phase run inside block `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthExpr {
    /// The same length in every block.
    Const(u64),
    /// `base^i` in block `i` (`i >= 1`).
    Pow { base: u64 },
}

impl LengthExpr {
    /// Exact length within block `i`.
    pub fn at(&self, block: u32) -> BigUint {
        match *self {
            LengthExpr::Const(c) => BigUint::from(c),
            LengthExpr::Pow { base } => BigUint::from(base).pow(block),
        }
    }

    /// Growth base: 1 for constant lengths, `base` for powers.
    pub fn growth_base(&self) -> u64 {
        match *self {
            LengthExpr::Const(_) => 1,
            LengthExpr::Pow { base } => base,
        }
    }
}

/// The length structure of a schedule, independent of any values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub lens: Vec<LengthExpr>,
}

impl BlockLayout {
    pub fn new(lens: Vec<LengthExpr>) -> Self {
        assert!(!lens.is_empty(), "a block layout needs at least one phase");
        let degenerate = lens.iter().all(|l| match *l {
            LengthExpr::Const(c) => c == 0,
            LengthExpr::Pow { base } => base == 0,
        });
        assert!(!degenerate, "a block layout must cover infinitely many indices");
        BlockLayout { lens }
    }

    pub fn phase_count(&self) -> usize {
        self.lens.len()
    }

    /// Exact end position of block `i` (the last index belonging to it).
    /// `boundary(0) == 0`.
    pub fn boundary(&self, block: u32) -> BigUint {
        let mut b = BigUint::zero();
        for i in 1..=block {
            for len in &self.lens {
                b += len.at(i);
            }
        }
        b
    }

    pub fn boundary_u64(&self, block: u32) -> Option<u64> {
        self.boundary(block).to_u64()
    }

    /// Largest growth base over all phases; 1 means purely periodic blocks.
    pub fn growth_base(&self) -> u64 {
        self.lens.iter().map(LengthExpr::growth_base).max().unwrap_or(1)
    }

    /// Total block length when every phase has the same length in every
    /// block, i.e. the layout is periodic.
    pub fn constant_period(&self) -> Option<u64> {
        let mut period = 0u64;
        for len in &self.lens {
            period += match *len {
                LengthExpr::Const(c) => c,
                LengthExpr::Pow { base: 0 } => 0,
                LengthExpr::Pow { base: 1 } => 1,
                LengthExpr::Pow { .. } => return None,
            };
        }
        Some(period)
    }

    /// Phase runs in index order, with exact `BigUint` positions.
    pub fn big_spans(&self) -> BigSpans<'_> {
        BigSpans { layout: self, block: 1, phase: 0, start: BigUint::zero() }
    }

    /// Phase runs in index order while they remain addressable in `u64`.
    ///
    /// The final yielded span may be clamped: if a run's true end exceeds
    /// `u64::MAX` the walker truncates it and stops, which is harmless
    /// because no `u64` index lies beyond the clamp.
    pub fn spans(&self) -> Spans<&BlockLayout> {
        Spans { layout: self, block: 1, phase: 0, start: 0, done: false }
    }

    /// Like [`BlockLayout::spans`], but owns the layout.
    pub fn into_spans(self) -> Spans<BlockLayout> {
        Spans { layout: self, block: 1, phase: 0, start: 0, done: false }
    }

    /// The span containing index `k` (`k >= 1`), if addressable in `u64`.
    pub fn locate(&self, k: u64) -> Span {
        for span in self.spans() {
            if span.start < k && k - span.start <= span.len {
                return span;
            }
        }
        unreachable!("spans() covers all of u64")
    }
}

/// One phase run: covers indices `start + 1 ..= start + len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub block: u32,
    pub phase: usize,
    pub start: u64,
    pub len: u64,
}

impl Span {
    pub fn end(&self) -> u64 {
        self.start + self.len
    }
}

pub struct Spans<L> {
    layout: L,
    block: u32,
    phase: usize,
    start: u64,
    done: bool,
}

impl<L: std::borrow::Borrow<BlockLayout>> Iterator for Spans<L> {
    type Item = Span;

    fn next(&mut self) -> Option<Span> {
        loop {
            if self.done {
                return None;
            }
            let layout = self.layout.borrow();
            let len_expr = &layout.lens[self.phase];
            let raw = len_expr.at(self.block).to_u64().unwrap_or(u64::MAX);
            let room = u64::MAX - self.start;
            let len = raw.min(room);
            let span =
                Span { block: self.block, phase: self.phase, start: self.start, len };
            if len == room {
                self.done = true;
            } else {
                self.start += len;
                self.phase += 1;
                if self.phase == layout.lens.len() {
                    self.phase = 0;
                    self.block = match self.block.checked_add(1) {
                        Some(b) => b,
                        None => {
                            self.done = true;
                            self.block
                        }
                    };
                }
            }
            if span.len > 0 {
                return Some(span);
            }
        }
    }
}

/// Exact-position analogue of [`Span`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigSpan {
    pub block: u32,
    pub phase: usize,
    pub start: BigUint,
    pub len: BigUint,
}

impl BigSpan {
    pub fn end(&self) -> BigUint {
        &self.start + &self.len
    }
}

pub struct BigSpans<'a> {
    layout: &'a BlockLayout,
    block: u32,
    phase: usize,
    start: BigUint,
}

impl Iterator for BigSpans<'_> {
    type Item = BigSpan;

    fn next(&mut self) -> Option<BigSpan> {
        loop {
            let len = self.layout.lens[self.phase].at(self.block);
            let span = BigSpan {
                block: self.block,
                phase: self.phase,
                start: self.start.clone(),
                len: len.clone(),
            };
            self.start += &len;
            self.phase += 1;
            if self.phase == self.layout.lens.len() {
                self.phase = 0;
                self.block = self.block.checked_add(1)?;
            }
            if !len.is_zero() {
                return Some(span);
            }
        }
    }
}

/// A finite cycle of values repeated across a phase run.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern<T>(Vec<T>);

impl<T: Real> Pattern<T> {
    pub fn new(values: Vec<T>) -> Self {
        assert!(!values.is_empty(), "a pattern needs at least one value");
        Pattern(values)
    }

    pub fn constant(v: T) -> Self {
        Pattern(vec![v])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() == 1 || self.0.iter().all(|v| *v == self.0[0])
    }

    /// Value at 0-based offset into the run.
    pub fn value_at(&self, offset: u64) -> T {
        self.0[(offset % self.len()) as usize]
    }

    /// Arithmetic mean of one full cycle.
    pub fn mean(&self) -> T {
        let mut s = T::zero();
        for v in &self.0 {
            s += *v;
        }
        s / T::from_index(self.len())
    }

    /// Sum of the first `count` values of the infinite repetition.
    pub fn prefix_sum(&self, count: u64) -> T {
        let l = self.len();
        let mut cycle = T::zero();
        for v in &self.0 {
            cycle += *v;
        }
        let mut s = cycle * T::from_index(count / l);
        for i in 0..(count % l) as usize {
            s += self.0[i];
        }
        s
    }

    pub fn min(&self) -> T {
        self.0.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Value-bearing block schedule: each phase pairs a cyclic pattern with a
/// length expression.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule<T> {
    phases: Vec<(Pattern<T>, LengthExpr)>,
}

impl<T: Real> BlockSchedule<T> {
    pub fn new(phases: Vec<(Pattern<T>, LengthExpr)>) -> Self {
        assert!(!phases.is_empty(), "a block schedule needs at least one phase");
        BlockSchedule { phases }
    }

    pub fn phases(&self) -> &[(Pattern<T>, LengthExpr)] {
        &self.phases
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.phases.iter().map(|(_, l)| l.clone()).collect())
    }

    pub fn pattern(&self, phase: usize) -> &Pattern<T> {
        &self.phases[phase].0
    }

    /// Term at index `k` (`k >= 1`).
    pub fn term(&self, k: u64) -> T {
        let span = self.layout().locate(k);
        self.pattern(span.phase).value_at(k - span.start - 1)
    }
}
