//! Classification of bounded real sequences by summability mode.
//!
//! The library answers, for finitely-described sequences, the questions
//! "does it converge?", "does it converge statistically (outside a set of
//! natural density zero)?", "does it converge almost (uniformly in the
//! Cesàro window sense)?", and "does it converge in the generalized almost
//! statistical sense (after correcting it on a density-zero witness set)?"
//! — together with the exact density calculus those notions rest on.
//!
//! Analyses are generic over the scalar type through [`Real`] (`f64` by
//! default, `f32` supported); set counting and exact densities always use
//! arbitrary-precision arithmetic.

pub mod almostconv;
pub mod catalog;
pub mod density;
pub mod gasconv;
pub mod real;
pub mod seqspec;
pub mod statconv;

pub use almostconv::{lorentz_test, AlmostVerdict, WindowStats};
pub use catalog::{all_fixtures, fixture, Fixture, UnknownFixture, FIXTURE_NAMES};
pub use density::{empirical_density, exact_density, DensityEstimate};
pub use gasconv::{
    apply_modification, classify, gas_limit, usual_limit, Budgets, Classification,
    DensityNotZero, GasStatus, GasVerdict, Modification,
};
pub use real::Real;
pub use seqspec::dsl::{parse_set, parse_spec, parse_witness, ParseError};
pub use seqspec::{
    BlockLayout, BlockSchedule, BlockSet, CountUnavailable, IndexSet, LengthExpr,
    OverrideRule, Pattern, PhaseSelect, SequenceSpec,
};
pub use statconv::{stat_limit, ConvergenceVerdict, Status};

/// Default-scalar alias for [`SequenceSpec`].
pub type Spec = SequenceSpec<f64>;
/// Default-scalar alias for [`OverrideRule`].
pub type Rule = OverrideRule<f64>;
/// Default-scalar alias for [`Status`].
pub type Verdict = Status<f64>;
/// Default-scalar alias for [`Budgets`].
pub type DefaultBudgets = Budgets<f64>;
