//! Exact and empirical natural density of index sets.
//!
//! `exact_density` returns `Some(d)` only when the set's structure forces
//! the limit of `|S ∩ {1..n}|/n`; its rules are the sound fragment of the
//! density calculus: progressions, vanishing sets, complements, disjoint
//! unions, zero-density absorption (the ideal property), and block sets
//! whose kept positions grow strictly slower than the layout. Anything
//! else is `None` — natural density is not finitely additive in general,
//! so no inclusion–exclusion is attempted.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::seqspec::indexset::{BlockSet, CountUnavailable, IndexSet, PhaseSelect};

/// Empirical density trajectory with the exact value when derivable.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Structurally forced density, when the calculus applies.
    pub exact: Option<BigRational>,
    /// `(n, |S ∩ {1..n}| / n)` along a geometric grid ending at `n_max`.
    pub trajectory: Vec<(u64, f64)>,
    /// Max deviation from the final ratio over the last quartile of points.
    pub residual: f64,
}

impl DensityEstimate {
    pub fn n_max(&self) -> u64 {
        self.trajectory.last().map(|&(n, _)| n).unwrap_or(0)
    }

    pub fn last_ratio(&self) -> f64 {
        self.trajectory.last().map(|&(_, r)| r).unwrap_or(f64::NAN)
    }

    /// Fluctuation floor for square-root-scale sets: `10/√n_max`.
    pub fn residual_threshold(&self) -> f64 {
        10.0 / (self.n_max() as f64).sqrt()
    }

    /// Whether the trajectory tail has settled within the threshold.
    pub fn is_settled(&self) -> bool {
        self.residual <= self.residual_threshold()
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Natural density when the structure forces it.
pub fn exact_density(set: &IndexSet) -> Option<BigRational> {
    let d = exact_density_inner(set)?;
    debug_assert!(!d.is_negative() && d <= BigRational::one());
    Some(d)
}

fn exact_density_inner(set: &IndexSet) -> Option<BigRational> {
    match set {
        IndexSet::Ap { step, .. } => Some(ratio(1, *step)),
        IndexSet::Squares => Some(BigRational::zero()),
        IndexSet::Finite(_) => Some(BigRational::zero()),
        IndexSet::Range { hi: Some(_), .. } => Some(BigRational::zero()),
        IndexSet::Range { hi: None, .. } => Some(BigRational::one()),
        IndexSet::Blocks(bs) => block_density(bs),
        IndexSet::Complement(a) => Some(BigRational::one() - exact_density(a)?),
        IndexSet::Union(a, b) => union_density(a, b),
        IndexSet::Intersection(a, b) => intersection_density(a, b),
    }
}

fn union_density(a: &IndexSet, b: &IndexSet) -> Option<BigRational> {
    let da = exact_density(a);
    let db = exact_density(b);
    // Density-zero absorption: δ(A)=0 forces δ(A∪B)=δ(B) whenever the
    // latter exists (the ideal property of the null sets).
    if da.as_ref().is_some_and(Zero::is_zero) {
        return db;
    }
    if db.as_ref().is_some_and(Zero::is_zero) {
        return da;
    }
    if a == b {
        return da;
    }
    if provably_subset(a, b) {
        return db;
    }
    if provably_subset(b, a) {
        return da;
    }
    match (da, db) {
        (Some(da), Some(db)) if provably_disjoint(a, b) => {
            let sum = da + db;
            debug_assert!(sum <= BigRational::one());
            Some(sum)
        }
        _ => None,
    }
}

fn intersection_density(a: &IndexSet, b: &IndexSet) -> Option<BigRational> {
    let da = exact_density(a);
    let db = exact_density(b);
    // Subsets of null sets are null.
    if da.as_ref().is_some_and(Zero::is_zero) || db.as_ref().is_some_and(Zero::is_zero) {
        return Some(BigRational::zero());
    }
    if provably_disjoint(a, b) {
        return Some(BigRational::zero());
    }
    if a == b {
        return da;
    }
    // Full-density factors drop out: |A∩B∩[n]| is squeezed between
    // |B∩[n]| − |Aᶜ∩[n]| and |B∩[n]|.
    if da.as_ref().is_some_and(One::is_one) {
        return db;
    }
    if db.as_ref().is_some_and(One::is_one) {
        return da;
    }
    if provably_subset(a, b) {
        return da;
    }
    if provably_subset(b, a) {
        return db;
    }
    if let (IndexSet::Ap { first: f1, step: s1 }, IndexSet::Ap { first: f2, step: s2 }) = (a, b)
    {
        // congruence-compatible progressions meet in a progression of the
        // combined modulus; incompatible ones never meet
        let g = s1.gcd(s2);
        return if (f1 % s1) % g == (f2 % s2) % g {
            let lcm = (s1 / g).checked_mul(*s2)?;
            Some(ratio(1, lcm))
        } else {
            Some(BigRational::zero())
        };
    }
    if let (IndexSet::Blocks(x), IndexSet::Blocks(y)) = (a, b) {
        if let Some(merged) = x.intersect(y) {
            return block_density(&merged);
        }
    }
    None
}

/// Density of a block-structured set, where derivable.
fn block_density(bs: &BlockSet) -> Option<BigRational> {
    let layout = bs.layout();
    if let Some(period) = layout.constant_period() {
        // periodic layouts have exactly rational density
        let mut kept = BigUint::zero();
        let mut seen = BigUint::zero();
        let period_big = BigUint::from(period);
        for span in layout.big_spans() {
            if seen >= period_big {
                break;
            }
            kept += bs.selectors()[span.phase].count_in_run(&span.len);
            seen += &span.len;
        }
        return Some(BigRational::new(
            BigInt::from(kept),
            BigInt::from(period),
        ));
    }
    let growth = layout.growth_base();
    // Kept positions through block i grow like selected_growth^i while the
    // boundary grows like growth^i; strictly slower growth forces density 0.
    if selected_growth(bs) < growth {
        return Some(BigRational::zero());
    }
    if selected_growth(&bs.inverted()) < growth {
        return Some(BigRational::one());
    }
    None
}

fn selected_growth(bs: &BlockSet) -> u64 {
    bs.layout()
        .lens
        .iter()
        .zip(bs.selectors())
        .filter(|(_, sel)| !matches!(sel, PhaseSelect::Skip))
        .map(|(len, _)| len.growth_base())
        .max()
        .unwrap_or(0)
}

/// Empirical density along a geometric grid of prefix lengths.
///
/// The grid is `n = ⌈grid^j⌉` capped and terminated at `n_max`; the
/// residual is the maximum deviation from the final ratio over the last
/// quartile of grid points.
pub fn empirical_density(
    set: &IndexSet,
    n_max: u64,
    grid: f64,
) -> Result<DensityEstimate, CountUnavailable> {
    assert!(n_max >= 10, "empirical density needs n_max >= 10");
    assert!(grid > 1.0, "grid growth factor must exceed 1");
    let points = geometric_grid(n_max, grid);
    let trajectory: Vec<(u64, f64)> = points
        .par_iter()
        .map(|&n| {
            let count = set.prefix_count(&BigUint::from(n))?;
            Ok((n, count.to_f64().unwrap_or(f64::NAN) / n as f64))
        })
        .collect::<Result<_, CountUnavailable>>()?;
    for &(_, r) in &trajectory {
        debug_assert!((0.0..=1.0).contains(&r));
    }
    let residual = tail_residual(&trajectory);
    Ok(DensityEstimate { exact: exact_density(set), trajectory, residual })
}

pub(crate) fn geometric_grid(n_max: u64, grid: f64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut x = 1.0f64;
    for _ in 0..100_000 {
        x *= grid;
        let n = x.ceil() as u64;
        if n >= n_max {
            break;
        }
        if points.last() != Some(&n) && n >= 1 {
            points.push(n);
        }
    }
    points.push(n_max);
    points
}

pub(crate) fn tail_residual(trajectory: &[(u64, f64)]) -> f64 {
    let Some(&(_, last)) = trajectory.last() else { return f64::NAN };
    let quartile = trajectory.len().div_ceil(4);
    trajectory[trajectory.len() - quartile..]
        .iter()
        .map(|&(_, r)| (r - last).abs())
        .fold(0.0, f64::max)
}

/// Sound structural disjointness test (never a false positive).
pub fn provably_disjoint(a: &IndexSet, b: &IndexSet) -> bool {
    if a.known_empty() || b.known_empty() {
        return true;
    }
    match (a, b) {
        (IndexSet::Finite(v), other) | (other, IndexSet::Finite(v)) => {
            v.iter().all(|&m| !other.contains(m))
        }
        (IndexSet::Range { lo, hi: Some(h) }, IndexSet::Range { lo: lo2, hi: hi2 })
        | (IndexSet::Range { lo: lo2, hi: hi2 }, IndexSet::Range { lo, hi: Some(h) }) => {
            h <= lo2 || hi2.is_some_and(|h2| h2 <= *lo)
        }
        (IndexSet::Ap { first: f1, step: s1 }, IndexSet::Ap { first: f2, step: s2 }) => {
            let g = s1.gcd(s2);
            (f1 % s1) % g != (f2 % s2) % g
        }
        (IndexSet::Ap { first, step }, IndexSet::Squares)
        | (IndexSet::Squares, IndexSet::Ap { first, step }) => {
            // no square root residue exists for the progression's class
            *step <= 1 << 12
                && !(0..*step).any(|s| (s as u128 * s as u128) % *step as u128
                    == (*first % *step) as u128)
        }
        (IndexSet::Complement(inner), other) | (other, IndexSet::Complement(inner)) => {
            provably_subset(other, inner)
        }
        (IndexSet::Union(x, y), other) | (other, IndexSet::Union(x, y)) => {
            provably_disjoint(x, other) && provably_disjoint(y, other)
        }
        (IndexSet::Intersection(x, y), other) | (other, IndexSet::Intersection(x, y)) => {
            provably_disjoint(x, other) || provably_disjoint(y, other)
        }
        (IndexSet::Blocks(x), IndexSet::Blocks(y)) => x
            .intersect(y)
            .map(|merged| merged.keeps_nothing())
            .unwrap_or(false),
        _ => false,
    }
}

/// Sound structural subset test (never a false positive).
pub fn provably_subset(a: &IndexSet, b: &IndexSet) -> bool {
    if a == b || a.known_empty() || b.known_full() {
        return true;
    }
    match (a, b) {
        (IndexSet::Finite(v), other) => v.iter().all(|&m| other.contains(m)),
        (
            IndexSet::Ap { first: f1, step: s1 },
            IndexSet::Ap { first: f2, step: s2 },
        ) => f1 >= f2 && s1 % s2 == 0 && (f1 % s2) == (f2 % s2),
        (
            IndexSet::Range { lo: l1, hi: h1 },
            IndexSet::Range { lo: l2, hi: h2 },
        ) => {
            l1 >= l2
                && match (h1, h2) {
                    (_, None) => true,
                    (Some(x), Some(y)) => x <= y,
                    (None, Some(_)) => false,
                }
        }
        (IndexSet::Intersection(x, y), other) => {
            provably_subset(x, other) || provably_subset(y, other)
        }
        (other, IndexSet::Union(x, y)) => {
            provably_subset(other, x) || provably_subset(other, y)
        }
        (IndexSet::Union(x, y), other) => {
            provably_subset(x, other) && provably_subset(y, other)
        }
        (IndexSet::Complement(x), IndexSet::Complement(y)) => provably_subset(y, x),
        (IndexSet::Blocks(x), IndexSet::Blocks(y)) => x
            .intersect(y)
            .map(|merged| merged == *x)
            .unwrap_or(false),
        _ => false,
    }
}

/// Uniform (window-independent) vanishing: the set meets every length-`k`
/// window in `o(k)` points as `k → ∞`, uniformly in the window position.
/// Strictly stronger than density zero; sound, not complete.
pub fn uniform_density_zero(set: &IndexSet) -> bool {
    match set {
        IndexSet::Finite(_) => true,
        IndexSet::Range { hi: Some(_), .. } => true,
        // consecutive square gaps grow without bound
        IndexSet::Squares => true,
        IndexSet::Ap { .. } | IndexSet::Range { hi: None, .. } => false,
        IndexSet::Blocks(bs) => {
            // kept runs must have bounded length while the layout's block
            // lengths grow, so a window of length k meets O(log k) runs
            bs.layout().growth_base() >= 2
                && bs
                    .layout()
                    .lens
                    .iter()
                    .zip(bs.selectors())
                    .all(|(len, sel)| {
                        matches!(sel, PhaseSelect::Skip) || len.growth_base() == 1
                    })
        }
        IndexSet::Complement(_) => false,
        IndexSet::Union(a, b) => uniform_density_zero(a) && uniform_density_zero(b),
        IndexSet::Intersection(a, b) => uniform_density_zero(a) || uniform_density_zero(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspec::schedule::{BlockLayout, LengthExpr};

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn ones_blocks() -> IndexSet {
        IndexSet::blocks(
            BlockLayout::new(vec![
                LengthExpr::Pow { base: 100 },
                LengthExpr::Pow { base: 10 },
            ]),
            vec![PhaseSelect::Skip, PhaseSelect::Keep],
        )
    }

    fn witness_e() -> IndexSet {
        IndexSet::intersection_of(ones_blocks(), IndexSet::evens())
    }

    #[test]
    fn primitive_densities() {
        assert_eq!(exact_density(&IndexSet::evens()), Some(rational(1, 2)));
        assert_eq!(exact_density(&IndexSet::ap(7, 5)), Some(rational(1, 5)));
        assert_eq!(exact_density(&IndexSet::Squares), Some(BigRational::zero()));
        assert_eq!(
            exact_density(&IndexSet::finite(vec![4, 9])),
            Some(BigRational::zero())
        );
        assert_eq!(exact_density(&IndexSet::all()), Some(BigRational::one()));
        assert_eq!(
            exact_density(&IndexSet::range(5, Some(500))),
            Some(BigRational::zero())
        );
    }

    #[test]
    fn complements_sum_to_one() {
        for set in [IndexSet::evens(), IndexSet::Squares, ones_blocks(), witness_e()] {
            let d = exact_density(&set).unwrap();
            let dc = exact_density(&IndexSet::complement_of(set)).unwrap();
            assert_eq!(d + dc, BigRational::one());
        }
    }

    #[test]
    fn witness_set_has_density_zero() {
        assert_eq!(exact_density(&witness_e()), Some(BigRational::zero()));
        assert_eq!(exact_density(&ones_blocks()), Some(BigRational::zero()));
    }

    #[test]
    fn zero_union_closure() {
        let u = IndexSet::union_of(IndexSet::Squares, witness_e());
        assert_eq!(exact_density(&u), Some(BigRational::zero()));
        let u2 = IndexSet::union_of(u, IndexSet::finite(vec![2, 6]));
        assert_eq!(exact_density(&u2), Some(BigRational::zero()));
    }

    #[test]
    fn disjoint_unions_add() {
        let u = IndexSet::union_of(IndexSet::evens(), IndexSet::odds());
        assert_eq!(exact_density(&u), Some(BigRational::one()));
        let u = IndexSet::union_of(IndexSet::ap(1, 4), IndexSet::ap(2, 4));
        assert_eq!(exact_density(&u), Some(rational(1, 2)));
        let u = IndexSet::union_of(IndexSet::evens(), IndexSet::ap(3, 4));
        assert_eq!(exact_density(&u), Some(rational(3, 4)));
        let u = IndexSet::union_of(IndexSet::evens(), IndexSet::ap(4, 4));
        assert_eq!(exact_density(&u), Some(rational(1, 2))); // subset rule
        // overlapping progressions get no additive rule
        let u = IndexSet::union_of(IndexSet::evens(), IndexSet::ap(1, 3));
        assert_eq!(exact_density(&u), None);
    }

    #[test]
    fn progression_intersections() {
        let i = IndexSet::intersection_of(IndexSet::evens(), IndexSet::ap(3, 4));
        assert_eq!(exact_density(&i), Some(BigRational::zero()));
        let i = IndexSet::intersection_of(IndexSet::evens(), IndexSet::ap(4, 6));
        assert_eq!(exact_density(&i), Some(rational(1, 6)));
        let i = IndexSet::intersection_of(IndexSet::evens(), IndexSet::Squares);
        assert_eq!(exact_density(&i), Some(BigRational::zero()));
    }

    #[test]
    fn zero_density_absorbs_in_unions_with_unknowns() {
        // δ(A)=0 and δ(B) unknown → union density equals B's (None here)
        let unknown = IndexSet::union_of(IndexSet::evens(), IndexSet::ap(3, 4));
        let u = IndexSet::union_of(IndexSet::Squares, unknown.clone());
        assert_eq!(exact_density(&u), exact_density(&unknown));
    }

    #[test]
    fn periodic_block_layouts_have_rational_density() {
        let set = IndexSet::blocks(
            BlockLayout::new(vec![LengthExpr::Const(3), LengthExpr::Const(4)]),
            vec![PhaseSelect::Keep, PhaseSelect::Skip],
        );
        assert_eq!(exact_density(&set), Some(rational(3, 7)));
        let set = IndexSet::blocks(
            BlockLayout::new(vec![LengthExpr::Const(3), LengthExpr::Const(4)]),
            vec![
                PhaseSelect::Positions { modulus: 3, offsets: vec![0] },
                PhaseSelect::Skip,
            ],
        );
        assert_eq!(exact_density(&set), Some(rational(1, 7)));
    }

    #[test]
    fn growing_block_complement_has_density_one() {
        let zeros = IndexSet::blocks(
            BlockLayout::new(vec![
                LengthExpr::Pow { base: 100 },
                LengthExpr::Pow { base: 10 },
            ]),
            vec![PhaseSelect::Keep, PhaseSelect::Skip],
        );
        assert_eq!(exact_density(&zeros), Some(BigRational::one()));
    }

    #[test]
    fn empirical_squares_density_hits_the_closed_form() {
        let est = empirical_density(&IndexSet::Squares, 1_000_000, 10.0).unwrap();
        assert_eq!(est.last_ratio(), 0.001);
        assert_eq!(est.exact, Some(BigRational::zero()));
        assert!(est.is_settled());
        assert!(est.trajectory.iter().all(|&(_, r)| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn empirical_evens_density_settles_at_half() {
        let est = empirical_density(&IndexSet::evens(), 1_000_000, 3.2).unwrap();
        assert!((est.last_ratio() - 0.5).abs() <= 1e-6);
        assert_eq!(est.exact, Some(rational(1, 2)));
    }

    #[test]
    fn block_ones_ratio_peaks_early() {
        // ratio of 1-positions at the block boundaries: 10/110 ≈ 0.0909 is
        // the global maximum, safely under 0.11
        let ones = ones_blocks();
        let layout = BlockLayout::new(vec![
            LengthExpr::Pow { base: 100 },
            LengthExpr::Pow { base: 10 },
        ]);
        for i in 1..=4u32 {
            let b = layout.boundary_u64(i).unwrap();
            let count = ones.prefix_count_u64(b).unwrap();
            assert!(count as f64 / b as f64 <= 0.11);
        }
        let est = empirical_density(&ones, 101_021_210, 3.2).unwrap();
        assert!(est.trajectory.iter().all(|&(_, r)| r <= 0.11));
    }

    #[test]
    fn disjointness_and_subset_judgments_are_sound() {
        let cases_disjoint = [
            (IndexSet::evens(), IndexSet::odds()),
            (IndexSet::ap(3, 4), IndexSet::ap(2, 4)),
            (IndexSet::finite(vec![3, 5]), IndexSet::evens()),
            (IndexSet::range(0, Some(10)), IndexSet::range(10, Some(20))),
            (IndexSet::ap(3, 9), IndexSet::Squares),
        ];
        for (a, b) in &cases_disjoint {
            assert!(provably_disjoint(a, b), "{a:?} vs {b:?}");
            assert!(provably_disjoint(b, a));
            for k in 1..=500 {
                assert!(!(a.contains(k) && b.contains(k)));
            }
        }
        let cases_subset = [
            (IndexSet::ap(4, 4), IndexSet::evens()),
            (IndexSet::finite(vec![4, 16]), IndexSet::Squares),
            (
                IndexSet::intersection_of(IndexSet::Squares, IndexSet::evens()),
                IndexSet::evens(),
            ),
            (IndexSet::evens(), IndexSet::union_of(IndexSet::evens(), IndexSet::Squares)),
        ];
        for (a, b) in &cases_subset {
            assert!(provably_subset(a, b), "{a:?} ⊆ {b:?}");
            for k in 1..=500 {
                assert!(!a.contains(k) || b.contains(k));
            }
        }
        // non-subsets are rejected
        assert!(!provably_subset(&IndexSet::evens(), &IndexSet::ap(4, 4)));
        assert!(!provably_disjoint(&IndexSet::evens(), &IndexSet::ap(4, 4)));
    }

    #[test]
    fn uniform_vanishing_classifications() {
        assert!(uniform_density_zero(&IndexSet::Squares));
        assert!(uniform_density_zero(&IndexSet::finite(vec![1, 2, 3])));
        assert!(!uniform_density_zero(&IndexSet::evens()));
        assert!(!uniform_density_zero(&witness_e()));
        assert!(uniform_density_zero(&IndexSet::union_of(
            IndexSet::Squares,
            IndexSet::finite(vec![2, 6])
        )));
        assert!(uniform_density_zero(&IndexSet::intersection_of(
            IndexSet::Squares,
            IndexSet::evens()
        )));
        // constant-length kept runs inside a growing layout vanish uniformly
        let sparse = IndexSet::blocks(
            BlockLayout::new(vec![LengthExpr::Const(2), LengthExpr::Pow { base: 3 }]),
            vec![PhaseSelect::Keep, PhaseSelect::Skip],
        );
        assert!(uniform_density_zero(&sparse));
    }
}
