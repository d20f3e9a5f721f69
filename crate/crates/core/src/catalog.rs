//! Named reference sequences with pinned classifications.
//!
//! Each fixture carries its text form, the witness it needs (if any), the
//! sample sizes its verdicts were pinned under, and the expected result of
//! [`classify`].  They double as regression anchors and as worked examples
//! of the four convergence modes separating from one another.

use thiserror::Error;

use crate::gasconv::{classify, Budgets, Classification, GasStatus};
use crate::seqspec::dsl::{parse_spec, parse_witness};
use crate::seqspec::indexset::IndexSet;
use crate::seqspec::{OverrideRule, SequenceSpec};
use crate::statconv::Status;

/// Prefix length covering four full block generations of the `100^i / 10^i`
/// layouts; the block fixtures need this much before their density ratios
/// settle.
pub const BLOCK_N_MAX: u64 = 101_021_210;

/// A catalogued sequence and everything needed to re-check it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    /// What the sequence is, in words.
    pub provenance: &'static str,
    /// Canonical text form; parses and renders back to itself.
    pub dsl: &'static str,
    /// Witness for the staged test, as `set -> rule` text.
    pub witness_dsl: Option<&'static str>,
    /// Sample sizes the expected verdicts were pinned under.
    pub budgets: Budgets<f64>,
    pub expected: Classification<f64>,
}

impl Fixture {
    pub fn spec(&self) -> SequenceSpec<f64> {
        parse_spec(self.dsl).expect("fixture text parses")
    }

    pub fn witness(&self) -> Option<(IndexSet, OverrideRule<f64>)> {
        self.witness_dsl
            .map(|text| parse_witness(text).expect("fixture witness parses"))
    }

    /// Reruns the full classifier under this fixture's budgets.
    pub fn classify(&self) -> Classification<f64> {
        classify(&self.spec(), self.witness(), &self.budgets)
    }

    /// Whether reclassification reproduces the pinned verdicts exactly.
    pub fn holds(&self) -> bool {
        self.classify() == self.expected
    }
}

/// The catalogue keys, in presentation order.
pub const FIXTURE_NAMES: [&str; 5] = [
    "lambda_squares",
    "alt_1_0",
    "blocks_0_1",
    "five_parity",
    "gas_blocks",
];

/// The name is not in the catalogue.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fixture `{0}` (known: lambda_squares, alt_1_0, blocks_0_1, five_parity, gas_blocks)")]
pub struct UnknownFixture(pub String);

/// Looks up one fixture by name.
pub fn fixture(name: &str) -> Result<Fixture, UnknownFixture> {
    let converges = |limit| Status::Converges { limit };
    let gas_converges = |limit| GasStatus::Converges { limit };
    match name {
        "lambda_squares" => Ok(Fixture {
            name: "lambda_squares",
            provenance: "zero sequence with an index ramp planted on the perfect squares; \
                         statistically null but unbounded, so window means do not apply",
            dsl: "overlay(const(0); squares -> index)",
            witness_dsl: None,
            budgets: Budgets::default(),
            expected: Classification {
                usual: Status::Refuted,
                statistical: converges(0.0),
                almost: None,
                gas: None,
            },
        }),
        "alt_1_0" => Ok(Fixture {
            name: "alt_1_0",
            provenance: "the 1, 0 alternation: divergent, statistically divergent, yet every \
                         window mean is within 1/k of one half",
            dsl: "periodic(1, 0)",
            witness_dsl: None,
            budgets: Budgets::default(),
            expected: Classification {
                usual: Status::Refuted,
                statistical: Status::Refuted,
                almost: Some(converges(0.5)),
                gas: Some(gas_converges(0.5)),
            },
        }),
        "blocks_0_1" => Ok(Fixture {
            name: "blocks_0_1",
            provenance: "zero runs of length 100^i broken by ones runs of length 10^i; the \
                         ones thin out to density zero but each run swamps windows of its \
                         own length",
            dsl: "blocks(i=1..: const(0)*100^i, const(1)*10^i)",
            witness_dsl: None,
            budgets: Budgets { n_max: BLOCK_N_MAX, ..Budgets::default() },
            expected: Classification {
                usual: Status::Refuted,
                statistical: converges(0.0),
                almost: Some(Status::Refuted),
                gas: Some(gas_converges(0.0)),
            },
        }),
        "five_parity" => Ok(Fixture {
            name: "five_parity",
            provenance: "parity alternation with the value 5 planted on the perfect squares; \
                         erasing the squares recovers the alternation",
            dsl: "overlay(periodic(1, 0); squares -> const(5))",
            witness_dsl: Some("squares -> parity(1, 0)"),
            budgets: Budgets::default(),
            expected: Classification {
                usual: Status::Refuted,
                statistical: Status::Refuted,
                almost: Some(converges(0.5)),
                gas: Some(gas_converges(0.5)),
            },
        }),
        "gas_blocks" => Ok(Fixture {
            name: "gas_blocks",
            provenance: "alternation runs of length 100^i broken by ones runs of length 10^i; \
                         only zeroing the even positions inside the ones runs (a density-zero \
                         set) lets the window means settle at one half",
            dsl: "blocks(i=1..: alt(1, 0)*100^i, const(1)*10^i)",
            witness_dsl: Some("blockset(i=1..: skip*100^i, keep*10^i) & ap(2, 2) -> const(0)"),
            budgets: Budgets { n_max: BLOCK_N_MAX, ..Budgets::default() },
            expected: Classification {
                usual: Status::Refuted,
                statistical: Status::Refuted,
                almost: Some(Status::Refuted),
                gas: Some(gas_converges(0.5)),
            },
        }),
        other => Err(UnknownFixture(other.to_string())),
    }
}

/// All fixtures in catalogue order.
pub fn all_fixtures() -> Vec<Fixture> {
    FIXTURE_NAMES
        .iter()
        .map(|name| fixture(name).expect("catalogue names resolve"))
        .collect()
}
