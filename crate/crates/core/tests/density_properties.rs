//! Exact densities obey the union/intersection bounds and agree with
//! member-stream counts.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use summakit::density::{empirical_density, exact_density};
use summakit::{BlockLayout, IndexSet, LengthExpr, PhaseSelect};

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sets whose exact densities the calculus can derive, with those values.
fn family() -> Vec<(IndexSet, BigRational)> {
    let ones_runs = IndexSet::blocks(
        BlockLayout::new(vec![LengthExpr::Pow { base: 100 }, LengthExpr::Pow { base: 10 }]),
        vec![PhaseSelect::Skip, PhaseSelect::Keep],
    );
    let striped = IndexSet::blocks(
        BlockLayout::new(vec![LengthExpr::Const(6), LengthExpr::Const(2)]),
        vec![
            PhaseSelect::Positions { modulus: 3, offsets: vec![0] },
            PhaseSelect::Keep,
        ],
    );
    let mut sets = vec![
        (IndexSet::Squares, ratio(0, 1)),
        (IndexSet::evens(), ratio(1, 2)),
        (IndexSet::odds(), ratio(1, 2)),
        (IndexSet::ap(1, 3), ratio(1, 3)),
        (IndexSet::ap(2, 5), ratio(1, 5)),
        (IndexSet::finite(vec![4, 8, 15, 16, 23, 42]), ratio(0, 1)),
        (IndexSet::range(10, Some(500)), ratio(0, 1)),
        (IndexSet::range(7, None), ratio(1, 1)),
        (IndexSet::all(), ratio(1, 1)),
        (ones_runs, ratio(0, 1)),
        // 2 of every 6, plus the 2-run: (2 + 2) / 8
        (striped, ratio(1, 2)),
    ];
    let complements: Vec<_> = sets
        .iter()
        .map(|(s, d)| (IndexSet::Complement(Box::new(s.clone())), ratio(1, 1) - d))
        .collect();
    sets.extend(complements);
    sets
}

#[test]
fn family_densities_are_what_the_calculus_says() {
    for (set, want) in family() {
        assert_eq!(exact_density(&set), Some(want), "{set}");
    }
}

#[test]
fn union_and_intersection_densities_respect_the_bounds() {
    let family = family();
    let zero = ratio(0, 1);
    let one = ratio(1, 1);
    let mut unions_derived = 0;
    let mut intersections_derived = 0;
    for (c, dc) in &family {
        for (d, dd) in &family {
            let union = IndexSet::Union(Box::new(c.clone()), Box::new(d.clone()));
            if let Some(du) = exact_density(&union) {
                unions_derived += 1;
                let lower = dc.clone().max(dd.clone());
                let upper = (dc.clone() + dd.clone()).min(one.clone());
                assert!(lower <= du && du <= upper, "{union}: {du}");
            }
            let inter = IndexSet::Intersection(Box::new(c.clone()), Box::new(d.clone()));
            if let Some(di) = exact_density(&inter) {
                intersections_derived += 1;
                let lower = (dc.clone() + dd.clone() - one.clone()).max(zero.clone());
                let upper = dc.clone().min(dd.clone());
                assert!(lower <= di && di <= upper, "{inter}: {di}");
            }
        }
    }
    // the calculus must actually fire on a healthy share of the pairs
    assert!(unions_derived >= 150, "only {unions_derived} unions derived");
    assert!(intersections_derived >= 150, "only {intersections_derived} intersections derived");
}

#[test]
fn member_streams_agree_with_derived_densities() {
    const N: u64 = 100_000;
    for (set, want) in family() {
        let count = set.members_from(1).take_while(|&k| k <= N).count();
        let ratio = count as f64 / N as f64;
        let want = want.to_f64().unwrap();
        assert!(
            (ratio - want).abs() < 0.02,
            "{set}: stream ratio {ratio}, derived {want}"
        );
    }
}

#[test]
fn empirical_trajectories_settle_on_the_exact_value() {
    for (set, want) in family() {
        let estimate = empirical_density(&set, 200_000, 10f64.sqrt()).unwrap();
        let want = want.to_f64().unwrap();
        let last = estimate.last_ratio();
        assert!(
            (last - want).abs() < 0.02,
            "{set}: trajectory end {last}, derived {want}"
        );
        assert_eq!(estimate.exact.map(|d| d.to_f64().unwrap()), Some(want), "{set}");
    }
}
