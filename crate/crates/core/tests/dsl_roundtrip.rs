//! Display and the parser are inverse on randomly built values.

use proptest::prelude::*;

use summakit::seqspec::dsl::{parse_set, parse_spec, parse_witness};
use summakit::{
    BlockLayout, BlockSchedule, IndexSet, LengthExpr, OverrideRule, Pattern, PhaseSelect,
    SequenceSpec,
};

fn scalar() -> impl Strategy<Value = f64> {
    // dyadic rationals print short and compare exactly
    (-400i32..=400).prop_map(|v| v as f64 / 8.0)
}

fn scalars(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(scalar(), 1..=max)
}

fn length_expr() -> impl Strategy<Value = LengthExpr> {
    prop_oneof![
        (1u64..=50).prop_map(LengthExpr::Const),
        (2u64..=10).prop_map(|base| LengthExpr::Pow { base }),
    ]
}

fn lengths() -> impl Strategy<Value = Vec<LengthExpr>> {
    prop::collection::vec(length_expr(), 1..=3)
}

fn phase_select(phases: usize) -> impl Strategy<Value = Vec<PhaseSelect>> {
    let one = prop_oneof![
        Just(PhaseSelect::Skip),
        Just(PhaseSelect::Keep),
        (2u64..=6).prop_flat_map(|modulus| {
            prop::collection::btree_set(0..modulus, 1..=modulus as usize)
                .prop_map(move |offsets| PhaseSelect::Positions {
                    modulus,
                    offsets: offsets.into_iter().collect(),
                })
        }),
    ];
    prop::collection::vec(one, phases)
}

fn block_set() -> impl Strategy<Value = IndexSet> {
    lengths().prop_flat_map(|lens| {
        let n = lens.len();
        phase_select(n)
            .prop_map(move |select| IndexSet::blocks(BlockLayout::new(lens.clone()), select))
    })
}

fn leaf_set() -> impl Strategy<Value = IndexSet> {
    // built through the same normalizing constructors the parser uses
    prop_oneof![
        Just(IndexSet::Squares),
        (1u64..=40, 1u64..=12).prop_map(|(first, step)| IndexSet::ap(first, step)),
        prop::collection::btree_set(1u64..=300, 1..=6)
            .prop_map(|m| IndexSet::finite(m.into_iter().collect())),
        (0u64..=60, 1u64..=100).prop_map(|(lo, span)| IndexSet::range(lo, Some(lo + span))),
        (0u64..=60).prop_map(|lo| IndexSet::range(lo, None)),
        block_set(),
    ]
}

fn index_set() -> impl Strategy<Value = IndexSet> {
    leaf_set().prop_recursive(3, 20, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|s| IndexSet::Complement(Box::new(s))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| IndexSet::Union(Box::new(a), Box::new(b))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| IndexSet::Intersection(Box::new(a), Box::new(b))),
        ]
    })
}

fn rule() -> impl Strategy<Value = OverrideRule<f64>> {
    prop_oneof![
        scalar().prop_map(OverrideRule::Constant),
        (scalar(), scalar()).prop_map(|(scale, offset)| OverrideRule::IndexValue { scale, offset }),
        (scalar(), scalar()).prop_map(|(odd, even)| OverrideRule::Parity { odd, even }),
    ]
}

fn schedule() -> impl Strategy<Value = BlockSchedule<f64>> {
    prop::collection::vec((scalars(4).prop_map(Pattern::new), length_expr()), 1..=3)
        .prop_map(BlockSchedule::new)
}

fn leaf_spec() -> impl Strategy<Value = SequenceSpec<f64>> {
    prop_oneof![
        scalar().prop_map(SequenceSpec::Constant),
        scalars(6).prop_map(SequenceSpec::periodic),
        schedule().prop_map(SequenceSpec::Blocks),
    ]
}

fn spec() -> impl Strategy<Value = SequenceSpec<f64>> {
    leaf_spec().prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (scalars(3), inner.clone()).prop_map(|(head, tail)| SequenceSpec::Explicit {
                head,
                tail: Box::new(tail),
            }),
            (inner.clone(), prop::collection::vec((index_set(), rule()), 1..=2))
                .prop_map(|(base, overrides)| SequenceSpec::overlay(base, overrides)),
            inner.clone().prop_map(|s| SequenceSpec::Diff(Box::new(s))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| SequenceSpec::Sum(Box::new(a), Box::new(b))),
            (inner, 1u64..=40).prop_map(|(s, offset)| SequenceSpec::Skip {
                inner: Box::new(s),
                offset,
            }),
        ]
    })
}

proptest! {
    #[test]
    fn set_text_reparses_to_the_same_set(set in index_set()) {
        let text = set.to_string();
        let parsed = parse_set(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(parsed, set, "{}", text);
    }

    #[test]
    fn spec_text_reparses_to_the_same_spec(spec in spec()) {
        let text = spec.to_string();
        let parsed =
            parse_spec::<f64>(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(parsed, spec, "{}", text);
    }

    #[test]
    fn witness_text_reparses_to_the_same_pair(set in index_set(), rule in rule()) {
        let text = format!("{set} -> {rule}");
        let parsed =
            parse_witness::<f64>(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(parsed, (set, rule), "{}", text);
    }
}
