//! Laws of the staged test: witness choice cannot move the limit, and the
//! four convergence modes nest the way they should.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use summakit::gasconv::{
    apply_modification, classify, gas_limit, usual_limit, Budgets, GasStatus, Modification,
};
use summakit::seqspec::dsl::{parse_spec, parse_witness};
use summakit::statconv::Status;
use summakit::Spec;

fn spec(text: &str) -> Spec {
    parse_spec(text).unwrap()
}

#[test]
fn distinct_witnesses_agree_on_the_limit() {
    let five = spec("overlay(periodic(1, 0); squares -> const(5))");
    let witnesses = [
        "squares -> parity(1, 0)",
        "squares | finite(2, 6) -> parity(1, 0)",
    ];
    let budgets = Budgets::default();
    let mut limits = Vec::new();
    for text in witnesses {
        let w = parse_witness(text).unwrap();
        let verdict = gas_limit(&five, Some(w.clone()), &budgets);
        let GasStatus::Converges { limit } = verdict.status else {
            panic!("{text}: expected convergence, got {:?}", verdict.status);
        };
        limits.push(limit);

        // the rewritten sequences themselves also agree
        let m = Modification::new(w.0, w.1).unwrap();
        let modified = apply_modification(&five, &m);
        let direct = summakit::almostconv::lorentz_test(
            &modified,
            &summakit::almostconv::default_k_schedule(),
            &summakit::almostconv::default_p_budget,
        )
        .unwrap();
        assert_eq!(direct.status, Status::Converges { limit }, "{text}");
    }
    assert!((limits[0] - limits[1]).abs() < 1e-6, "{limits:?}");
}

#[test]
fn usual_convergence_implies_every_weaker_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(314159);
    let budgets = Budgets::default();
    for _ in 0..20 {
        let value = rng.random_range(-16..=16) as f64 / 4.0;
        let reps = rng.random_range(1..=4);
        let s = Spec::periodic(vec![value; reps]);
        let c = classify(&s, None, &budgets);
        assert_eq!(c.usual, Status::Converges { limit: value }, "{s}");
        assert_eq!(c.statistical, Status::Converges { limit: value }, "{s}");
        assert_eq!(c.almost, Some(Status::Converges { limit: value }), "{s}");
        assert_eq!(c.gas, Some(GasStatus::Converges { limit: value }), "{s}");
    }
}

#[test]
fn almost_convergence_always_carries_over_to_the_staged_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let budgets = Budgets::default();
    for _ in 0..20 {
        let len = rng.random_range(2..=10);
        let values: Vec<f64> =
            (0..len).map(|_| rng.random_range(-8..=8) as f64 / 2.0).collect();
        let s = Spec::periodic(values);
        let c = classify(&s, None, &budgets);
        let Some(Status::Converges { limit }) = c.almost else {
            panic!("{s}: periodic specs always pass the window-mean test");
        };
        assert_eq!(c.gas, Some(GasStatus::Converges { limit }), "{s}");
    }
}

#[test]
fn statistical_convergence_always_carries_over_to_the_staged_test() {
    let budgets = Budgets::default();
    for text in [
        "overlay(const(0); squares -> index)",
        "overlay(const(-1.5); squares -> const(7))",
        "explicit(50, -3; const(0.25))",
    ] {
        let s = spec(text);
        let Status::Converges { limit } = summakit::statconv::stat_limit(
            &s,
            budgets.n_max,
            &budgets.eps_grid,
            None,
        )
        .status
        else {
            panic!("{text}: expected statistical convergence");
        };
        if s.value_range().is_some() {
            let verdict = gas_limit(&s, None, &budgets);
            assert_eq!(verdict.status, GasStatus::Converges { limit }, "{text}");
        }
    }
}

#[test]
fn the_mode_separations_really_separate() {
    let budgets = Budgets::default();

    // almost convergent but not statistically convergent
    let alt = classify(&spec("periodic(1, 0)"), None, &budgets);
    assert_eq!(alt.statistical, Status::Refuted);
    assert!(matches!(alt.almost, Some(Status::Converges { .. })));

    // statistically convergent but not almost convergent
    let blocks = classify(
        &spec("blocks(i=1..: const(0)*100^i, const(1)*10^i)"),
        None,
        &Budgets { n_max: 101_021_210, ..Budgets::default() },
    );
    assert!(matches!(blocks.statistical, Status::Converges { .. }));
    assert_eq!(blocks.almost, Some(Status::Refuted));

    // convergent in the staged sense only, and only with the witness
    let gas_spec = spec("blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i)");
    let witness = parse_witness(
        "blockset(i=1..: skip*100^i, keep*10^i) & ap(2, 2) -> const(0)",
    )
    .unwrap();
    let bare = gas_limit(&gas_spec, None, &budgets);
    assert_eq!(bare.status, GasStatus::Inconclusive);
    let with = gas_limit(&gas_spec, Some(witness), &budgets);
    assert_eq!(with.status, GasStatus::Converges { limit: 0.5 });
}

#[test]
fn usual_limit_matches_classify_on_the_separating_examples() {
    for text in [
        "periodic(1, 0)",
        "blocks(i=1..: const(0)*100^i, const(1)*10^i)",
        "blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i)",
        "overlay(periodic(1, 0); squares -> const(5))",
    ] {
        assert_eq!(usual_limit(&spec(text), 1_000_000), Status::Refuted, "{text}");
    }
}
