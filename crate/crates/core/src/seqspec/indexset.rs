//! Symbolic sets of sequence indices with exact prefix counting.
//!
//! Indices are 1-based. Every set supports membership tests, ordered member
//! streams, and `prefix_count(n)` = `|S ∩ {1..n}|` computed exactly in
//! arbitrary precision. Counting prefers closed forms (arithmetic
//! progressions, perfect squares, block schedules, and their boolean
//! combinations); when no closed form applies it falls back to budgeted
//! enumeration and reports [`CountUnavailable`] rather than approximating.

use num_bigint::BigUint;
use num_integer::Integer;
use num_integer::Roots;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use super::schedule::BlockLayout;

/// Work budget for one `prefix_count` call: bounds enumeration steps, span
/// walks, and recursion of the inclusion–exclusion rewriter.
pub const DEFAULT_WORK_BUDGET: u64 = 1 << 25;

/// Largest modulus for which square-residue tables are built.
const MAX_RESIDUE_MODULUS: u64 = 1 << 20;

/// Largest combined modulus when intersecting positional selectors.
const MAX_SELECTOR_MODULUS: u64 = 1 << 12;

/// Exact counting failed: the set has no closed-form count at this `n` and
/// enumeration would exceed the work budget.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("exact count unavailable at n = {n}: {reason}")]
pub struct CountUnavailable {
    pub n: BigUint,
    pub reason: &'static str,
}

/// A symbolic set of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexSet {
    /// `{first, first + step, first + 2·step, …}`.
    Ap { first: u64, step: u64 },
    /// `{1, 4, 9, 16, …}`.
    Squares,
    /// Indices selected by phase within a block schedule.
    Blocks(BlockSet),
    /// An explicit finite set, sorted ascending.
    Finite(Vec<u64>),
    /// The half-open interval `(lo, hi]`, or `(lo, ∞)` when `hi` is `None`.
    Range { lo: u64, hi: Option<u64> },
    Complement(Box<IndexSet>),
    Union(Box<IndexSet>, Box<IndexSet>),
    Intersection(Box<IndexSet>, Box<IndexSet>),
}

/// Which indices of each phase run a block-structured set keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseSelect {
    Skip,
    Keep,
    /// Keeps run positions `q` (0-based from the run start) with
    /// `q mod modulus ∈ offsets`.
    Positions { modulus: u64, offsets: Vec<u64> },
}

impl PhaseSelect {
    fn normalized(self) -> PhaseSelect {
        match self {
            PhaseSelect::Positions { modulus, mut offsets } => {
                assert!(modulus >= 1, "selector modulus must be positive");
                offsets.sort_unstable();
                offsets.dedup();
                assert!(
                    offsets.iter().all(|&o| o < modulus),
                    "selector offsets must be smaller than the modulus"
                );
                if offsets.is_empty() {
                    PhaseSelect::Skip
                } else if offsets.len() as u64 == modulus {
                    PhaseSelect::Keep
                } else {
                    PhaseSelect::Positions { modulus, offsets }
                }
            }
            other => other,
        }
    }

    fn keeps(&self, q: u64) -> bool {
        match self {
            PhaseSelect::Skip => false,
            PhaseSelect::Keep => true,
            PhaseSelect::Positions { modulus, offsets } => {
                offsets.binary_search(&(q % modulus)).is_ok()
            }
        }
    }

    /// Kept positions among run offsets `0..run_len`.
    pub(crate) fn count_in_run(&self, run_len: &BigUint) -> BigUint {
        match self {
            PhaseSelect::Skip => BigUint::zero(),
            PhaseSelect::Keep => run_len.clone(),
            PhaseSelect::Positions { modulus, offsets } => {
                let m = BigUint::from(*modulus);
                let mut total = BigUint::zero();
                for &o in offsets {
                    let o = BigUint::from(o);
                    if run_len > &o {
                        // ceil((run_len - o) / modulus)
                        total += (run_len - o + &m - BigUint::one()) / &m;
                    }
                }
                total
            }
        }
    }

    fn intersect(&self, other: &PhaseSelect) -> Option<PhaseSelect> {
        match (self, other) {
            (PhaseSelect::Skip, _) | (_, PhaseSelect::Skip) => Some(PhaseSelect::Skip),
            (PhaseSelect::Keep, x) | (x, PhaseSelect::Keep) => Some(x.clone()),
            (
                PhaseSelect::Positions { modulus: m1, offsets: o1 },
                PhaseSelect::Positions { modulus: m2, offsets: o2 },
            ) => {
                let m = m1.lcm(m2);
                if m > MAX_SELECTOR_MODULUS {
                    return None;
                }
                let offsets: Vec<u64> = (0..m)
                    .filter(|q| {
                        o1.binary_search(&(q % m1)).is_ok()
                            && o2.binary_search(&(q % m2)).is_ok()
                    })
                    .collect();
                Some(PhaseSelect::Positions { modulus: m, offsets }.normalized())
            }
        }
    }

    fn inverted(&self) -> PhaseSelect {
        match self {
            PhaseSelect::Skip => PhaseSelect::Keep,
            PhaseSelect::Keep => PhaseSelect::Skip,
            PhaseSelect::Positions { modulus, offsets } => {
                let inv: Vec<u64> =
                    (0..*modulus).filter(|q| offsets.binary_search(q).is_err()).collect();
                PhaseSelect::Positions { modulus: *modulus, offsets: inv }.normalized()
            }
        }
    }

    fn density_in_phase(&self) -> (u64, u64) {
        match self {
            PhaseSelect::Skip => (0, 1),
            PhaseSelect::Keep => (1, 1),
            PhaseSelect::Positions { modulus, offsets } => (offsets.len() as u64, *modulus),
        }
    }
}

/// Indices of a block layout filtered by a per-phase selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSet {
    layout: BlockLayout,
    select: Vec<PhaseSelect>,
}

impl BlockSet {
    pub fn new(layout: BlockLayout, select: Vec<PhaseSelect>) -> Self {
        assert_eq!(
            layout.phase_count(),
            select.len(),
            "one selector per layout phase"
        );
        let select = select.into_iter().map(PhaseSelect::normalized).collect();
        BlockSet { layout, select }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn selectors(&self) -> &[PhaseSelect] {
        &self.select
    }

    pub fn contains(&self, k: u64) -> bool {
        if k == 0 {
            return false;
        }
        let span = self.layout.locate(k);
        self.select[span.phase].keeps(k - span.start - 1)
    }

    fn count(&self, n: &BigUint, ctx: &mut Ctx) -> Result<BigUint, CountUnavailable> {
        // Constant-length layouts repeat with a fixed period; counting by
        // span walk would take n/period steps, so fold whole periods first.
        if let Some(period) = self.layout.constant_period() {
            let period_big = BigUint::from(period);
            let mut per_period = BigUint::zero();
            let mut walked = BigUint::zero();
            for span in self.layout.big_spans() {
                if walked >= period_big {
                    break;
                }
                per_period += self.select[span.phase].count_in_run(&span.len);
                walked += &span.len;
            }
            let full = n / &period_big;
            let rem = n % &period_big;
            let mut total = full * per_period;
            let mut pos = BigUint::zero();
            for span in self.layout.big_spans() {
                if pos >= rem {
                    break;
                }
                let take = span.len.clone().min(&rem - &pos);
                total += self.select[span.phase].count_in_run(&take);
                pos += &span.len;
            }
            return Ok(total);
        }
        let mut total = BigUint::zero();
        for span in self.layout.big_spans() {
            if &span.start >= n {
                break;
            }
            ctx.charge(1, n)?;
            let end = span.end().min(n.clone());
            let run_len = end - &span.start;
            total += self.select[span.phase].count_in_run(&run_len);
        }
        Ok(total)
    }

    /// Selector-level intersection; `None` when the combined modulus would
    /// be unreasonably large.
    pub fn intersect(&self, other: &BlockSet) -> Option<BlockSet> {
        if self.layout != other.layout {
            return None;
        }
        let select: Option<Vec<PhaseSelect>> = self
            .select
            .iter()
            .zip(&other.select)
            .map(|(a, b)| a.intersect(b))
            .collect();
        Some(BlockSet { layout: self.layout.clone(), select: select? })
    }

    pub fn inverted(&self) -> BlockSet {
        BlockSet {
            layout: self.layout.clone(),
            select: self.select.iter().map(PhaseSelect::inverted).collect(),
        }
    }

    /// `(kept, modulus)` pairs per phase, for density analysis.
    pub fn phase_densities(&self) -> Vec<(u64, u64)> {
        self.select.iter().map(PhaseSelect::density_in_phase).collect()
    }

    pub fn keeps_nothing(&self) -> bool {
        self.select.iter().all(|s| matches!(s, PhaseSelect::Skip))
    }

    pub fn keeps_everything(&self) -> bool {
        self.select.iter().all(|s| matches!(s, PhaseSelect::Keep))
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet::Finite(Vec::new())
    }

    pub fn all() -> Self {
        IndexSet::Range { lo: 0, hi: None }
    }

    /// Arithmetic progression `{first, first+step, …}`; `step == 1`
    /// collapses to a tail interval.
    pub fn ap(first: u64, step: u64) -> Self {
        assert!(first >= 1, "index sets are 1-based");
        assert!(step >= 1, "progression step must be positive");
        if step == 1 {
            IndexSet::Range { lo: first - 1, hi: None }
        } else {
            IndexSet::Ap { first, step }
        }
    }

    pub fn evens() -> Self {
        IndexSet::ap(2, 2)
    }

    pub fn odds() -> Self {
        IndexSet::ap(1, 2)
    }

    pub fn finite(mut members: Vec<u64>) -> Self {
        members.sort_unstable();
        members.dedup();
        assert!(members.first().map_or(true, |&m| m >= 1), "index sets are 1-based");
        IndexSet::Finite(members)
    }

    pub fn range(lo: u64, hi: Option<u64>) -> Self {
        if let Some(h) = hi {
            if h <= lo {
                return IndexSet::empty();
            }
        }
        IndexSet::Range { lo, hi }
    }

    pub fn blocks(layout: BlockLayout, select: Vec<PhaseSelect>) -> Self {
        let bs = BlockSet::new(layout, select);
        if bs.keeps_nothing() {
            IndexSet::empty()
        } else if bs.keeps_everything() {
            IndexSet::all()
        } else {
            IndexSet::Blocks(bs)
        }
    }

    pub fn complement_of(a: IndexSet) -> Self {
        if a.known_empty() {
            IndexSet::all()
        } else if a.known_full() {
            IndexSet::empty()
        } else if let IndexSet::Complement(inner) = a {
            *inner
        } else {
            IndexSet::Complement(Box::new(a))
        }
    }

    pub fn union_of(a: IndexSet, b: IndexSet) -> Self {
        if a.known_empty() || b.known_full() || a == b {
            return b;
        }
        if b.known_empty() || a.known_full() {
            return a;
        }
        IndexSet::Union(Box::new(a), Box::new(b))
    }

    pub fn intersection_of(a: IndexSet, b: IndexSet) -> Self {
        if a.known_empty() || b.known_full() || a == b {
            return a;
        }
        if b.known_empty() || a.known_full() {
            return b;
        }
        IndexSet::Intersection(Box::new(a), Box::new(b))
    }

    /// `{k + by : k ∈ self}`, when the family can express it.  Squares
    /// and block sets are anchored at 1 and cannot shift; `None` also
    /// covers index overflow.
    pub fn shifted(&self, by: u64) -> Option<IndexSet> {
        if by == 0 {
            return Some(self.clone());
        }
        Some(match self {
            IndexSet::Ap { first, step } => {
                IndexSet::Ap { first: first.checked_add(by)?, step: *step }
            }
            IndexSet::Squares | IndexSet::Blocks(_) => return None,
            IndexSet::Finite(v) => {
                let mut members = Vec::with_capacity(v.len());
                for m in v {
                    members.push(m.checked_add(by)?);
                }
                IndexSet::Finite(members)
            }
            IndexSet::Range { lo, hi } => IndexSet::Range {
                lo: lo.checked_add(by)?,
                hi: match hi {
                    Some(h) => Some(h.checked_add(by)?),
                    None => None,
                },
            },
            // the complement of the image only starts past the gap the
            // shift opened up
            IndexSet::Complement(a) => IndexSet::intersection_of(
                IndexSet::complement_of(a.shifted(by)?),
                IndexSet::range(by, None),
            ),
            IndexSet::Union(a, b) => IndexSet::union_of(a.shifted(by)?, b.shifted(by)?),
            IndexSet::Intersection(a, b) => {
                IndexSet::intersection_of(a.shifted(by)?, b.shifted(by)?)
            }
        })
    }

    /// Structurally evident emptiness (sound, not complete).
    pub fn known_empty(&self) -> bool {
        match self {
            IndexSet::Finite(v) => v.is_empty(),
            IndexSet::Range { lo, hi: Some(h) } => h <= lo,
            IndexSet::Blocks(bs) => bs.keeps_nothing(),
            IndexSet::Complement(a) => a.known_full(),
            IndexSet::Union(a, b) => a.known_empty() && b.known_empty(),
            IndexSet::Intersection(a, b) => a.known_empty() || b.known_empty(),
            _ => false,
        }
    }

    /// Structurally evident totality (sound, not complete).
    pub fn known_full(&self) -> bool {
        match self {
            IndexSet::Range { lo: 0, hi: None } => true,
            IndexSet::Blocks(bs) => bs.keeps_everything(),
            IndexSet::Complement(a) => a.known_empty(),
            IndexSet::Union(a, b) => a.known_full() || b.known_full(),
            IndexSet::Intersection(a, b) => a.known_full() && b.known_full(),
            _ => false,
        }
    }

    pub fn contains(&self, k: u64) -> bool {
        if k == 0 {
            return false;
        }
        match self {
            IndexSet::Ap { first, step } => k >= *first && (k - first) % step == 0,
            IndexSet::Squares => {
                let r = k.sqrt();
                r * r == k
            }
            IndexSet::Blocks(bs) => bs.contains(k),
            IndexSet::Finite(v) => v.binary_search(&k).is_ok(),
            IndexSet::Range { lo, hi } => k > *lo && hi.map_or(true, |h| k <= h),
            IndexSet::Complement(a) => !a.contains(k),
            IndexSet::Union(a, b) => a.contains(k) || b.contains(k),
            IndexSet::Intersection(a, b) => a.contains(k) && b.contains(k),
        }
    }

    /// `|S ∩ {1..n}|`, exactly.
    pub fn prefix_count(&self, n: &BigUint) -> Result<BigUint, CountUnavailable> {
        let mut ctx = Ctx { work: DEFAULT_WORK_BUDGET };
        count_set(self, n, &mut ctx)
    }

    pub fn prefix_count_u64(&self, n: u64) -> Result<u64, CountUnavailable> {
        let count = self.prefix_count(&BigUint::from(n))?;
        Ok(count.to_u64().expect("prefix count cannot exceed n"))
    }

    /// Ordered members `>= start`. The stream is infinite for infinite sets;
    /// pair it with `take_while`. Iterating the complement of a set that
    /// keeps almost every index advances slowly by design.
    /// No members greater than `after`, derivable from structure alone.
    /// Conservative: `false` only means "cannot tell".
    fn tail_is_empty(&self, after: u64) -> bool {
        match self {
            IndexSet::Ap { .. } | IndexSet::Squares | IndexSet::Blocks(_) => false,
            IndexSet::Finite(v) => v.last().is_none_or(|&m| m <= after),
            IndexSet::Range { hi: Some(hi), .. } => *hi <= after,
            IndexSet::Range { hi: None, .. } => false,
            IndexSet::Complement(inner) => inner.tail_is_full(after),
            IndexSet::Union(a, b) => a.tail_is_empty(after) && b.tail_is_empty(after),
            IndexSet::Intersection(a, b) => {
                a.tail_is_empty(after)
                    || b.tail_is_empty(after)
                    || crate::density::provably_disjoint(a, b)
            }
        }
    }

    /// Contains every index greater than `after`, derivable from structure
    /// alone.  Conservative in the same direction as [`Self::tail_is_empty`].
    fn tail_is_full(&self, after: u64) -> bool {
        match self {
            IndexSet::Ap { first, step: 1 } => *first <= after.saturating_add(1),
            IndexSet::Range { lo, hi: None } => *lo <= after,
            IndexSet::Complement(inner) => inner.tail_is_empty(after),
            IndexSet::Union(a, b) => a.tail_is_full(after) || b.tail_is_full(after),
            IndexSet::Intersection(a, b) => a.tail_is_full(after) && b.tail_is_full(after),
            _ => false,
        }
    }

    pub fn members_from(&self, start: u64) -> Box<dyn Iterator<Item = u64> + '_> {
        let start = start.max(1);
        match self {
            IndexSet::Ap { first, step } => {
                let k0 = if start <= *first {
                    Some(*first)
                } else {
                    let gap = (start - first).div_ceil(*step);
                    gap.checked_mul(*step).and_then(|d| first.checked_add(d))
                };
                let step = *step;
                Box::new(std::iter::successors(k0, move |k| k.checked_add(step)))
            }
            IndexSet::Squares => {
                let x0 = ceil_sqrt(start);
                Box::new(
                    std::iter::successors(Some(x0), |x| x.checked_add(1))
                        .map_while(|x| x.checked_mul(x)),
                )
            }
            IndexSet::Blocks(bs) => Box::new(blocks_members(bs, start)),
            IndexSet::Finite(v) => {
                let from = v.partition_point(|&m| m < start);
                Box::new(v[from..].iter().copied())
            }
            IndexSet::Range { lo, hi } => {
                let lo = (*lo + 1).max(start);
                let hi = hi.unwrap_or(u64::MAX);
                Box::new(lo..=hi)
            }
            IndexSet::Complement(a) => Box::new(ComplementMembers {
                set: a,
                inner: a.members_from(start).peekable(),
                next: start,
                fused: false,
            }),
            IndexSet::Union(a, b) => Box::new(MergeMembers {
                a: a.members_from(start).peekable(),
                b: b.members_from(start).peekable(),
            }),
            IndexSet::Intersection(a, b) => {
                if crate::density::provably_disjoint(a, b) {
                    return Box::new(std::iter::empty());
                }
                // enumerate the sparser side so gaps in the other are
                // skipped structurally rather than walked
                const HORIZON: u64 = 1 << 32;
                let (lead, filter) =
                    if member_estimate(a, HORIZON) <= member_estimate(b, HORIZON) {
                        (a, b)
                    } else {
                        (b, a)
                    };
                Box::new(GuardedFilter {
                    lead: lead.members_from(start),
                    filter,
                    misses: 0,
                    fused: false,
                })
            }
        }
    }

    pub fn members(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        self.members_from(1)
    }
}

fn ceil_sqrt(v: u64) -> u64 {
    let r = v.sqrt();
    if r * r >= v {
        r
    } else {
        r + 1
    }
}

fn blocks_members(bs: &BlockSet, start: u64) -> impl Iterator<Item = u64> + '_ {
    bs.layout()
        .spans()
        .filter(move |span| span.end() >= start)
        .flat_map(move |span| -> Box<dyn Iterator<Item = u64>> {
            let end = span.end();
            match &bs.selectors()[span.phase] {
                PhaseSelect::Skip => Box::new(std::iter::empty()),
                PhaseSelect::Keep => Box::new((span.start + 1).max(start)..=end),
                PhaseSelect::Positions { modulus, offsets } => {
                    let base = span.start + 1;
                    let modulus = *modulus;
                    let offsets: std::rc::Rc<[u64]> = offsets.clone().into();
                    Box::new(
                        (0u64..)
                            .flat_map(move |c| {
                                let offs = std::rc::Rc::clone(&offsets);
                                let cycle = c.checked_mul(modulus);
                                (0..offs.len()).filter_map(move |i| {
                                    cycle
                                        .and_then(|cy| cy.checked_add(offs[i]))
                                        .and_then(|q| base.checked_add(q))
                                })
                            })
                            .take_while(move |&k| k <= end)
                            .filter(move |&k| k >= start),
                    )
                }
            }
        })
}

/// A fruitless scan of this many candidates triggers a structural check
/// for whether any member can still come, so streams over sets with an
/// empty tail terminate instead of searching forever.
const SCAN_GUARD: u32 = 4096;

struct ComplementMembers<'a> {
    set: &'a IndexSet,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = u64> + 'a>>,
    next: u64,
    fused: bool,
}

impl Iterator for ComplementMembers<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.fused {
            return None;
        }
        let mut scanned = 0u32;
        loop {
            let k = self.next;
            self.next = self.next.checked_add(1)?;
            while let Some(&m) = self.inner.peek() {
                if m < k {
                    self.inner.next();
                } else {
                    break;
                }
            }
            if self.inner.peek() == Some(&k) {
                self.inner.next();
                scanned += 1;
                if scanned >= SCAN_GUARD {
                    scanned = 0;
                    if self.set.tail_is_full(k) {
                        self.fused = true;
                        return None;
                    }
                }
            } else {
                return Some(k);
            }
        }
    }
}

struct GuardedFilter<'a> {
    lead: Box<dyn Iterator<Item = u64> + 'a>,
    filter: &'a IndexSet,
    misses: u32,
    fused: bool,
}

impl Iterator for GuardedFilter<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.fused {
            return None;
        }
        loop {
            let k = self.lead.next()?;
            if self.filter.contains(k) {
                self.misses = 0;
                return Some(k);
            }
            self.misses += 1;
            if self.misses >= SCAN_GUARD {
                self.misses = 0;
                if self.filter.tail_is_empty(k) {
                    self.fused = true;
                    return None;
                }
            }
        }
    }
}

struct MergeMembers<'a> {
    a: std::iter::Peekable<Box<dyn Iterator<Item = u64> + 'a>>,
    b: std::iter::Peekable<Box<dyn Iterator<Item = u64> + 'a>>,
}

impl Iterator for MergeMembers<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        match (self.a.peek().copied(), self.b.peek().copied()) {
            (Some(x), Some(y)) => {
                if x == y {
                    self.a.next();
                    self.b.next();
                    Some(x)
                } else if x < y {
                    self.a.next();
                    Some(x)
                } else {
                    self.b.next();
                    Some(y)
                }
            }
            (Some(_), None) => self.a.next(),
            (None, _) => self.b.next(),
        }
    }
}

struct Ctx {
    work: u64,
}

impl Ctx {
    fn charge(&mut self, amount: u64, n: &BigUint) -> Result<(), CountUnavailable> {
        if self.work < amount {
            Err(CountUnavailable { n: n.clone(), reason: "enumeration budget exhausted" })
        } else {
            self.work -= amount;
            Ok(())
        }
    }
}

fn count_set(set: &IndexSet, n: &BigUint, ctx: &mut Ctx) -> Result<BigUint, CountUnavailable> {
    ctx.charge(1, n)?;
    match set {
        IndexSet::Ap { first, step } => Ok(count_ap(*first, *step, n)),
        IndexSet::Squares => Ok(n.sqrt()),
        IndexSet::Blocks(bs) => bs.count(n, ctx),
        IndexSet::Finite(v) => Ok(BigUint::from(count_finite(v, n))),
        IndexSet::Range { lo, hi } => Ok(count_range(*lo, *hi, n)),
        IndexSet::Complement(a) => Ok(n - count_set(a, n, ctx)?),
        IndexSet::Union(a, b) => {
            let ca = count_set(a, n, ctx)?;
            let cb = count_set(b, n, ctx)?;
            let cab = count_intersection(vec![a, b], n, ctx)?;
            Ok(ca + cb - cab)
        }
        IndexSet::Intersection(a, b) => count_intersection(vec![a, b], n, ctx),
    }
}

fn count_ap(first: u64, step: u64, n: &BigUint) -> BigUint {
    let f = BigUint::from(first);
    if n < &f {
        BigUint::zero()
    } else {
        (n - f) / BigUint::from(step) + BigUint::one()
    }
}

/// Members of `{k : k ≡ residue (mod m), k >= 1} ∩ [1, n]`.
fn count_residue_class(residue: u64, m: u64, n: &BigUint) -> BigUint {
    let first = if residue == 0 { m } else { residue };
    count_ap(first, m, n)
}

fn count_finite(v: &[u64], n: &BigUint) -> u64 {
    match n.to_u64() {
        Some(n64) => v.partition_point(|&m| m <= n64) as u64,
        None => v.len() as u64,
    }
}

fn count_range(lo: u64, hi: Option<u64>, n: &BigUint) -> BigUint {
    let lo = BigUint::from(lo);
    let hi_eff = match hi {
        Some(h) => BigUint::from(h).min(n.clone()),
        None => n.clone(),
    };
    if hi_eff > lo {
        hi_eff - lo
    } else {
        BigUint::zero()
    }
}

/// Counts `|A₁ ∩ … ∩ A_m ∩ {1..n}|` by rewriting toward primitive
/// combinations with closed forms.
fn count_intersection(
    items: Vec<&IndexSet>,
    n: &BigUint,
    ctx: &mut Ctx,
) -> Result<BigUint, CountUnavailable> {
    ctx.charge(16, n)?;

    // Flatten nested intersections and drop duplicates.
    let mut flat: Vec<&IndexSet> = Vec::with_capacity(items.len());
    let mut stack = items;
    stack.reverse();
    while let Some(item) = stack.pop() {
        if let IndexSet::Intersection(a, b) = item {
            stack.push(b);
            stack.push(a);
        } else if !flat.iter().any(|f| *f == item) {
            flat.push(item);
        }
    }

    if flat.iter().any(|s| s.known_empty()) {
        return Ok(BigUint::zero());
    }
    flat.retain(|s| !s.known_full());

    // x ∩ ¬x is empty.
    for item in &flat {
        if let IndexSet::Complement(inner) = item {
            if flat.iter().any(|f| *f == inner.as_ref()) {
                return Ok(BigUint::zero());
            }
        }
    }

    // Distribute one union: R ∩ (a ∪ b) = (R∩a) + (R∩b) − (R∩a∩b).
    if let Some(pos) = flat.iter().position(|s| matches!(s, IndexSet::Union(_, _))) {
        let IndexSet::Union(a, b) = flat[pos] else { unreachable!() };
        let rest: Vec<&IndexSet> = flat
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, s)| *s)
            .collect();
        let mut with_a = rest.clone();
        with_a.push(a);
        let mut with_b = rest.clone();
        with_b.push(b);
        let mut with_both = rest;
        with_both.push(a);
        with_both.push(b);
        let ca = count_intersection(with_a, n, ctx)?;
        let cb = count_intersection(with_b, n, ctx)?;
        let cab = count_intersection(with_both, n, ctx)?;
        return Ok(ca + cb - cab);
    }

    // Peel one complement: R ∩ ¬c = R − (R ∩ c).
    if let Some(pos) = flat.iter().position(|s| matches!(s, IndexSet::Complement(_))) {
        let IndexSet::Complement(c) = flat[pos] else { unreachable!() };
        let rest: Vec<&IndexSet> = flat
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, s)| *s)
            .collect();
        let with_c = {
            let mut v = rest.clone();
            v.push(c);
            v
        };
        let base = count_intersection(rest, n, ctx)?;
        let sub = count_intersection(with_c, n, ctx)?;
        return Ok(base - sub);
    }

    // Enumerate through the smallest finite member set.
    if let Some(pos) = flat
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, IndexSet::Finite(_)))
        .min_by_key(|(_, s)| match s {
            IndexSet::Finite(v) => v.len(),
            _ => usize::MAX,
        })
        .map(|(i, _)| i)
    {
        let IndexSet::Finite(v) = flat[pos] else { unreachable!() };
        let rest: Vec<&IndexSet> = flat
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, s)| *s)
            .collect();
        ctx.charge(v.len() as u64, n)?;
        let n64 = n.to_u64().unwrap_or(u64::MAX);
        let count = v
            .iter()
            .filter(|&&m| BigUint::from(m) <= *n && m <= n64)
            .filter(|&&m| rest.iter().all(|s| s.contains(m)))
            .count();
        return Ok(BigUint::from(count));
    }

    // Fold interval constraints into the counting limit:
    // |R ∩ (lo, hi]| = |R ∩ {1..min(hi,n)}| − |R ∩ {1..lo}|.
    if let Some(pos) = flat.iter().position(|s| matches!(s, IndexSet::Range { .. })) {
        let IndexSet::Range { lo, hi } = flat[pos] else { unreachable!() };
        let rest: Vec<&IndexSet> = flat
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, s)| *s)
            .collect();
        let hi_eff = match hi {
            Some(h) => BigUint::from(*h).min(n.clone()),
            None => n.clone(),
        };
        let lo = BigUint::from(*lo);
        if hi_eff <= lo {
            return Ok(BigUint::zero());
        }
        if rest.is_empty() {
            return Ok(hi_eff - lo);
        }
        let upper = count_intersection(rest.clone(), &hi_eff, ctx)?;
        let lower = count_intersection(rest, &lo, ctx)?;
        return Ok(upper - lower);
    }

    // Only arithmetic progressions, squares, and block sets remain.
    let mut merged_ap: Option<(u64, u64)> = None;
    let mut has_squares = false;
    let mut merged_blocks: Option<BlockSet> = None;
    let mut unmergeable: Vec<&IndexSet> = Vec::new();

    for item in &flat {
        match item {
            IndexSet::Ap { first, step } => match merged_ap {
                None => merged_ap = Some((*first, *step)),
                Some(current) => match merge_aps(current, (*first, *step)) {
                    ApMerge::Empty => return Ok(BigUint::zero()),
                    ApMerge::Ap(merged) => merged_ap = Some(merged),
                    ApMerge::Overflow => {
                        return Err(CountUnavailable {
                            n: n.clone(),
                            reason: "progression intersection exceeds u64 moduli",
                        })
                    }
                },
            },
            IndexSet::Squares => has_squares = true,
            IndexSet::Blocks(bs) => match &merged_blocks {
                None => merged_blocks = Some((*bs).clone()),
                Some(current) => match current.intersect(bs) {
                    Some(merged) => {
                        if merged.keeps_nothing() {
                            return Ok(BigUint::zero());
                        }
                        merged_blocks = Some(merged);
                    }
                    None => unmergeable.push(item),
                },
            },
            _ => unreachable!("rewriting left a non-primitive set"),
        }
    }

    if !unmergeable.is_empty() || (has_squares && merged_blocks.is_some()) {
        return enumerate_intersection(&flat, n, ctx);
    }

    match (merged_ap, has_squares, merged_blocks) {
        (None, false, None) => Ok(n.clone()),
        (Some((first, step)), false, None) => Ok(count_ap(first, step, n)),
        (None, true, None) => Ok(n.sqrt()),
        (None, false, Some(bs)) => bs.count(n, ctx),
        (Some(ap), true, None) => count_ap_squares(ap, n, ctx),
        (Some(ap), false, Some(bs)) => count_blocks_ap(&bs, ap, n, ctx),
        (_, true, Some(_)) => unreachable!("handled by enumeration above"),
    }
}

enum ApMerge {
    Empty,
    Ap((u64, u64)),
    Overflow,
}

/// Chinese-remainder merge of two progressions.
fn merge_aps(a: (u64, u64), b: (u64, u64)) -> ApMerge {
    let (f1, s1) = a;
    let (f2, s2) = b;
    let g = s1.gcd(&s2);
    let r1 = f1 % s1;
    let r2 = f2 % s2;
    if r1 % g != r2 % g {
        return ApMerge::Empty;
    }
    let Some(lcm) = (s1 / g).checked_mul(s2) else {
        return ApMerge::Overflow;
    };
    // Solve k ≡ r1 (mod s1), k ≡ r2 (mod s2) via the extended Euclid
    // witness on i128 (all inputs fit in u64).
    let (x, _) = extended_gcd(s1 as i128 / g as i128, s2 as i128 / g as i128);
    let m2 = (s2 / g) as i128;
    let diff = (r2 as i128 - r1 as i128) / g as i128;
    let t = (diff * x).rem_euclid(m2);
    let r = (r1 as i128 + s1 as i128 * t).rem_euclid(lcm as i128) as u64;
    let lo = f1.max(f2);
    let first = if lo % lcm <= r {
        (lo - lo % lcm).checked_add(r)
    } else {
        (lo - lo % lcm).checked_add(lcm).and_then(|v| v.checked_add(r))
    };
    match first {
        Some(f) => ApMerge::Ap((f, lcm)),
        None => ApMerge::Overflow,
    }
}

/// Bezout coefficient: returns `(x, g)` with `a·x ≡ g (mod b)`.
fn extended_gcd(a: i128, b: i128) -> (i128, i128) {
    if b == 0 {
        return (1, a);
    }
    let (mut old_r, mut r) = (a, b);
    let (mut old_x, mut x) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_x, x) = (x, old_x - q * x);
    }
    (old_x, old_r)
}

/// Squares inside a progression, via residues of square roots.
fn count_ap_squares(
    (first, step): (u64, u64),
    n: &BigUint,
    ctx: &mut Ctx,
) -> Result<BigUint, CountUnavailable> {
    if step > MAX_RESIDUE_MODULUS {
        return Err(CountUnavailable { n: n.clone(), reason: "residue modulus too large" });
    }
    ctx.charge(step, n)?;
    let r = first % step;
    let x_max = n.sqrt();
    let x_min = BigUint::from(ceil_sqrt(first));
    if x_max < x_min {
        return Ok(BigUint::zero());
    }
    let mut total = BigUint::zero();
    for s in 0..step {
        if (s as u128 * s as u128) % step as u128 == r as u128 {
            // x ≡ s (mod step), x_min <= x <= x_max
            let upper = count_residue_class(s, step, &x_max);
            let lower = count_residue_class(s, step, &(&x_min - BigUint::one()));
            total += upper - lower;
        }
    }
    Ok(total)
}

/// Progression members inside a block-structured set, span by span.
fn count_blocks_ap(
    bs: &BlockSet,
    (first, step): (u64, u64),
    n: &BigUint,
    ctx: &mut Ctx,
) -> Result<BigUint, CountUnavailable> {
    let f_big = BigUint::from(first);
    let mut total = BigUint::zero();
    for span in bs.layout().big_spans() {
        if &span.start >= n {
            break;
        }
        ctx.charge(1, n)?;
        let end = span.end().min(n.clone());
        match &bs.selectors()[span.phase] {
            PhaseSelect::Skip => {}
            PhaseSelect::Keep => {
                // first + c·step in (start, end]
                total += count_ap_interval(first, step, &span.start, &end);
            }
            PhaseSelect::Positions { modulus, offsets } => {
                ctx.charge(offsets.len() as u64, n)?;
                for &o in offsets {
                    // Members start+1+o + c·modulus, intersected with the
                    // outer progression: solve the congruence pair, then
                    // count within (start, end] ∩ [first, ∞).
                    let run_first = &span.start + BigUint::from(1 + o);
                    if run_first > end {
                        continue;
                    }
                    let rf_mod = (&run_first % modulus).to_u64().expect("mod fits");
                    let merged = merge_residues(
                        rf_mod,
                        *modulus,
                        first % step,
                        step,
                    );
                    let Some((rho, lcm)) = merged.map_err(|_| CountUnavailable {
                        n: n.clone(),
                        reason: "progression intersection exceeds u64 moduli",
                    })?
                    else {
                        continue;
                    };
                    let lo = run_first.max(f_big.clone());
                    if lo > end {
                        continue;
                    }
                    let upper = count_residue_class_big(rho, lcm, &end);
                    let lower =
                        count_residue_class_big(rho, lcm, &(&lo - BigUint::one()));
                    total += upper - lower;
                }
            }
        }
    }
    Ok(total)
}

/// `first + c·step` within `(lo, hi]`.
fn count_ap_interval(first: u64, step: u64, lo: &BigUint, hi: &BigUint) -> BigUint {
    let upper = count_ap(first, step, hi);
    let lower = count_ap(first, step, lo);
    upper - lower
}

/// Solves `k ≡ r1 (mod m1), k ≡ r2 (mod m2)`; `Ok(None)` when incompatible.
fn merge_residues(r1: u64, m1: u64, r2: u64, m2: u64) -> Result<Option<(u64, u64)>, ()> {
    let g = m1.gcd(&m2);
    if r1 % g != r2 % g {
        return Ok(None);
    }
    let Some(lcm) = (m1 / g).checked_mul(m2) else { return Err(()) };
    let (x, _) = extended_gcd(m1 as i128 / g as i128, m2 as i128 / g as i128);
    let m2g = (m2 / g) as i128;
    let diff = (r2 as i128 - r1 as i128) / g as i128;
    let t = (diff * x).rem_euclid(m2g);
    let r = (r1 as i128 + m1 as i128 * t).rem_euclid(lcm as i128) as u64;
    Ok(Some((r, lcm)))
}

/// Members of the residue class `rho (mod lcm)` in `[1, n]`.
fn count_residue_class_big(rho: u64, lcm: u64, n: &BigUint) -> BigUint {
    count_residue_class(rho, lcm, n)
}

/// Last resort: stream the sparsest primitive and test the rest.
fn enumerate_intersection(
    items: &[&IndexSet],
    n: &BigUint,
    ctx: &mut Ctx,
) -> Result<BigUint, CountUnavailable> {
    let Some(n64) = n.to_u64() else {
        return Err(CountUnavailable {
            n: n.clone(),
            reason: "no closed form beyond u64 range",
        });
    };
    let sparsest = items
        .iter()
        .enumerate()
        .min_by_key(|(_, s)| member_estimate(s, n64))
        .map(|(i, _)| i)
        .expect("nonempty intersection list");
    let mut count: u64 = 0;
    for k in items[sparsest].members_from(1) {
        if k > n64 {
            break;
        }
        ctx.charge(1, n)?;
        if items
            .iter()
            .enumerate()
            .all(|(i, s)| i == sparsest || s.contains(k))
        {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

fn member_estimate(set: &IndexSet, n: u64) -> u64 {
    match set {
        IndexSet::Ap { step, .. } => n / step.max(&1),
        IndexSet::Squares => n.sqrt(),
        IndexSet::Finite(v) => v.len() as u64,
        IndexSet::Range { lo, hi } => {
            let hi = hi.unwrap_or(n).min(n);
            hi.saturating_sub(*lo)
        }
        IndexSet::Blocks(_) => set.prefix_count_u64(n).unwrap_or(n),
        IndexSet::Complement(a) => n.saturating_sub(member_estimate(a, n)),
        IndexSet::Union(a, b) => {
            member_estimate(a, n).saturating_add(member_estimate(b, n)).min(n)
        }
        IndexSet::Intersection(a, b) => member_estimate(a, n).min(member_estimate(b, n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspec::schedule::LengthExpr;

    fn brute_count(set: &IndexSet, n: u64) -> u64 {
        (1..=n).filter(|&k| set.contains(k)).count() as u64
    }

    fn assert_exact(set: &IndexSet, n: u64) {
        assert_eq!(
            set.prefix_count_u64(n).unwrap(),
            brute_count(set, n),
            "count mismatch for {set:?} at n = {n}"
        );
    }

    fn ones_blocks() -> IndexSet {
        // ones-runs of the 100^i zeros / 10^i ones layout
        IndexSet::blocks(
            BlockLayout::new(vec![
                LengthExpr::Pow { base: 100 },
                LengthExpr::Pow { base: 10 },
            ]),
            vec![PhaseSelect::Skip, PhaseSelect::Keep],
        )
    }

    #[test]
    fn primitive_counts_match_brute_force() {
        let sets = [
            IndexSet::ap(2, 2),
            IndexSet::ap(7, 3),
            IndexSet::Squares,
            IndexSet::finite(vec![3, 5, 8, 1000]),
            IndexSet::range(10, Some(300)),
            IndexSet::range(25, None),
            ones_blocks(),
        ];
        for set in &sets {
            for n in [1, 2, 9, 10, 99, 110, 111, 500, 2500] {
                assert_exact(set, n);
            }
        }
    }

    #[test]
    fn boolean_combinations_match_brute_force() {
        let e = IndexSet::evens();
        let sq = IndexSet::Squares;
        let combos = [
            IndexSet::complement_of(sq.clone()),
            IndexSet::union_of(e.clone(), sq.clone()),
            IndexSet::intersection_of(e.clone(), sq.clone()),
            IndexSet::intersection_of(
                IndexSet::complement_of(e.clone()),
                IndexSet::union_of(sq.clone(), IndexSet::ap(5, 7)),
            ),
            IndexSet::union_of(
                IndexSet::intersection_of(e.clone(), IndexSet::ap(3, 5)),
                IndexSet::complement_of(IndexSet::union_of(sq.clone(), e.clone())),
            ),
            IndexSet::intersection_of(ones_blocks(), e.clone()),
            IndexSet::intersection_of(
                ones_blocks(),
                IndexSet::complement_of(IndexSet::ap(4, 4)),
            ),
        ];
        for set in &combos {
            for n in [1, 17, 110, 111, 256, 2048, 10_210] {
                assert_exact(set, n);
            }
        }
    }

    #[test]
    fn progression_merge_handles_all_alignments() {
        for (f1, s1, f2, s2) in [
            (2u64, 2u64, 4u64, 6u64),
            (1, 2, 2, 2),
            (3, 4, 5, 6),
            (7, 12, 1, 18),
            (5, 5, 5, 5),
        ] {
            let a = IndexSet::Ap { first: f1, step: s1 };
            let b = IndexSet::Ap { first: f2, step: s2 };
            let both = IndexSet::intersection_of(a, b);
            for n in [1, 50, 360, 5000] {
                assert_exact(&both, n);
            }
        }
    }

    #[test]
    fn squares_in_progressions_use_residues() {
        for (first, step) in [(1u64, 4u64), (2, 2), (4, 4), (3, 9), (1, 24), (9, 16)] {
            let set = IndexSet::intersection_of(
                IndexSet::ap(first, step),
                IndexSet::Squares,
            );
            for n in [10, 100, 10_000, 100_000] {
                assert_exact(&set, n);
            }
        }
    }

    #[test]
    fn block_counts_work_beyond_u64() {
        // Even indices within ones-runs: 10^j / 2 members in block j.
        let e = IndexSet::intersection_of(ones_blocks(), IndexSet::evens());
        let layout = BlockLayout::new(vec![
            LengthExpr::Pow { base: 100 },
            LengthExpr::Pow { base: 10 },
        ]);
        for i in [2u32, 5, 12, 20] {
            let n = layout.boundary(i);
            // sum_{j<=i} 10^j / 2 = (10^{i+1} − 10) / 18
            let expected =
                (BigUint::from(10u32).pow(i + 1) - BigUint::from(10u32)) / BigUint::from(18u32);
            assert_eq!(e.prefix_count(&n).unwrap(), expected);
        }
    }

    #[test]
    fn exceedance_count_at_second_boundary_is_55() {
        let e = IndexSet::intersection_of(ones_blocks(), IndexSet::evens());
        assert_eq!(e.prefix_count_u64(10_210).unwrap(), 55);
    }

    #[test]
    fn member_streams_agree_with_contains() {
        let sets = [
            IndexSet::ap(3, 7),
            IndexSet::Squares,
            ones_blocks(),
            IndexSet::complement_of(IndexSet::Squares),
            IndexSet::union_of(IndexSet::Squares, IndexSet::ap(10, 10)),
            IndexSet::intersection_of(ones_blocks(), IndexSet::evens()),
        ];
        for set in &sets {
            let streamed: Vec<u64> =
                set.members().take_while(|&k| k <= 400).collect();
            let scanned: Vec<u64> = (1..=400).filter(|&k| set.contains(k)).collect();
            assert_eq!(streamed, scanned, "stream mismatch for {set:?}");
            // resuming mid-way gives the same suffix
            let resumed: Vec<u64> =
                set.members_from(137).take_while(|&k| k <= 400).collect();
            let suffix: Vec<u64> =
                scanned.iter().copied().filter(|&k| k >= 137).collect();
            assert_eq!(resumed, suffix);
        }
    }

    #[test]
    fn positional_selectors_pick_pattern_slots() {
        // Odd slots of the alternating 100^i runs: the positions holding 1s
        // in the 1,0,1,0,… pattern.
        let set = IndexSet::blocks(
            BlockLayout::new(vec![
                LengthExpr::Pow { base: 100 },
                LengthExpr::Pow { base: 10 },
            ]),
            vec![
                PhaseSelect::Positions { modulus: 2, offsets: vec![0] },
                PhaseSelect::Skip,
            ],
        );
        assert!(set.contains(1));
        assert!(!set.contains(2));
        assert!(set.contains(99));
        assert!(!set.contains(101)); // inside the ones-run, skipped
        assert!(set.contains(111)); // block 2 starts alternating again
        for n in [1, 99, 100, 110, 111, 5000, 10_210] {
            assert_exact(&set, n);
        }
    }

    #[test]
    fn selector_normalization_collapses_degenerate_cases() {
        let keep_all = PhaseSelect::Positions { modulus: 3, offsets: vec![0, 1, 2] };
        assert_eq!(keep_all.normalized(), PhaseSelect::Keep);
        let none = PhaseSelect::Positions { modulus: 3, offsets: vec![] };
        assert_eq!(none.normalized(), PhaseSelect::Skip);
    }

    #[test]
    fn smart_constructors_simplify() {
        assert_eq!(
            IndexSet::union_of(IndexSet::empty(), IndexSet::Squares),
            IndexSet::Squares
        );
        assert_eq!(
            IndexSet::intersection_of(IndexSet::all(), IndexSet::Squares),
            IndexSet::Squares
        );
        assert_eq!(
            IndexSet::complement_of(IndexSet::complement_of(IndexSet::Squares)),
            IndexSet::Squares
        );
        assert!(IndexSet::complement_of(IndexSet::all()).known_empty());
        assert_eq!(IndexSet::ap(5, 1), IndexSet::Range { lo: 4, hi: None });
    }

    #[test]
    fn counts_never_exceed_n_and_are_monotone() {
        let set = IndexSet::union_of(
            IndexSet::intersection_of(IndexSet::evens(), IndexSet::ap(3, 5)),
            IndexSet::Squares,
        );
        let mut prev = 0;
        for n in 1..=2000u64 {
            let c = set.prefix_count_u64(n).unwrap();
            assert!(c <= n);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn shifted_sets_translate_membership() {
        let shapes = [
            IndexSet::evens(),
            IndexSet::ap(7, 3),
            IndexSet::finite(vec![1, 5, 9]),
            IndexSet::range(3, Some(40)),
            IndexSet::complement_of(IndexSet::ap(3, 5)),
            IndexSet::union_of(IndexSet::ap(4, 7), IndexSet::finite(vec![2])),
            IndexSet::intersection_of(
                IndexSet::evens(),
                IndexSet::complement_of(IndexSet::ap(6, 4)),
            ),
        ];
        for set in &shapes {
            for by in [0u64, 1, 7] {
                let shifted = set.shifted(by).unwrap();
                for k in 1..=200u64 {
                    assert_eq!(
                        shifted.contains(k),
                        k > by && set.contains(k - by),
                        "set={set:?} by={by} k={k}"
                    );
                }
                assert_exact(&shifted, 200);
            }
        }
        // anchored families cannot move
        assert!(IndexSet::Squares.shifted(1).is_none());
        assert!(ones_blocks().shifted(1).is_none());
        assert!(IndexSet::complement_of(IndexSet::Squares).shifted(2).is_none());
    }
}
