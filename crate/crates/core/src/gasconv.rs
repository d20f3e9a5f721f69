//! Generalized almost statistical convergence.
//!
//! A bounded sequence converges in the generalized almost statistical
//! sense when rewriting it on a single density-zero index set produces a
//! sequence that passes either the statistical test or the uniform
//! window-mean test.  The rewrite is a [`Modification`]: an index set
//! whose natural density is provably zero, paired with an override rule.
//! [`gas_limit`] runs the staged pipeline and records every stage verdict
//! so callers can see which test settled the question.

use thiserror::Error;

use crate::almostconv::{default_p_budget, lorentz_test};
use crate::density::{exact_density, geometric_grid, provably_disjoint, provably_subset};
use crate::real::Real;
use crate::seqspec::indexset::IndexSet;
use crate::seqspec::schedule::LengthExpr;
use crate::seqspec::{OverrideRule, SequenceSpec};
use crate::statconv::{default_eps_grid, stat_limit, Status, REFUTE_FLOOR};

/// Sample sizes shared by the staged tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Budgets<T> {
    /// Prefix length for density trajectories.
    pub n_max: u64,
    /// Tolerances for the statistical exceedance test, descending.
    pub eps_grid: Vec<T>,
    /// Window lengths for the uniform window-mean test, ascending.
    pub k_schedule: Vec<u64>,
}

impl<T: Real> Default for Budgets<T> {
    fn default() -> Self {
        Budgets {
            n_max: 1_000_000,
            eps_grid: default_eps_grid(),
            k_schedule: crate::almostconv::default_k_schedule(),
        }
    }
}

/// The proposed exception set does not have derivable natural density zero.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("exception set must have derivable natural density zero")]
pub struct DensityNotZero;

/// A density-zero rewrite: `rule` replaces the terms indexed by
/// `exceptions`.  Construction checks the density requirement, so every
/// value of this type is a valid witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Modification<T> {
    exceptions: IndexSet,
    rule: OverrideRule<T>,
}

impl<T: Real> Modification<T> {
    /// Accepts the pair only when the exception set's density is exactly
    /// zero by exact calculation; empirical smallness is not enough.
    pub fn new(exceptions: IndexSet, rule: OverrideRule<T>) -> Result<Self, DensityNotZero> {
        match exact_density(&exceptions) {
            Some(d) if d == num_rational::BigRational::from_integer(0u8.into()) => {
                Ok(Modification { exceptions, rule })
            }
            _ => Err(DensityNotZero),
        }
    }

    pub fn exceptions(&self) -> &IndexSet {
        &self.exceptions
    }

    pub fn rule(&self) -> &OverrideRule<T> {
        &self.rule
    }
}

/// Rewrites `spec` on the modification's exception set.  Overlays gain one
/// more override (applied last, so it wins on overlap); anything else is
/// wrapped.  An empty exception set leaves the spec untouched.
pub fn apply_modification<T: Real>(
    spec: &SequenceSpec<T>,
    modification: &Modification<T>,
) -> SequenceSpec<T> {
    if modification.exceptions.known_empty() {
        return spec.clone();
    }
    let pair = (modification.exceptions.clone(), modification.rule.clone());
    match spec {
        SequenceSpec::Overlay { base, overrides } => {
            let mut overrides = overrides.clone();
            overrides.push(pair);
            SequenceSpec::overlay((**base).clone(), overrides)
        }
        other => SequenceSpec::overlay(other.clone(), vec![pair]),
    }
}

/// Which stage of the pipeline a recorded verdict came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Statistical,
    Almost,
    ModifiedStatistical,
    ModifiedAlmost,
}

/// One stage verdict from the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep<T> {
    pub stage: Stage,
    pub status: Status<T>,
}

/// Outcome of the staged test.  There is no `Refuted`: failing every
/// stage only means no witness was found, so the pipeline stays
/// inconclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GasStatus<T> {
    Converges { limit: T },
    /// A witness was supplied but its exception set fails the density
    /// requirement.
    WitnessRejected,
    Inconclusive,
}

impl<T> GasStatus<T> {
    pub fn limit(&self) -> Option<&T> {
        match self {
            GasStatus::Converges { limit } => Some(limit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasVerdict<T> {
    pub status: GasStatus<T>,
    /// The modification actually applied, when the pipeline got that far.
    pub witness: Option<Modification<T>>,
    /// Stage verdicts in the order they were tried.
    pub chain: Vec<ChainStep<T>>,
}

/// Staged pipeline: plain statistical test, plain window-mean test, then
/// (witness permitting) both again on the rewritten sequence.  The witness
/// is applied at most once; its density precondition is checked here, so a
/// bad proposal surfaces as `WitnessRejected` rather than an error.
pub fn gas_limit<T: Real>(
    spec: &SequenceSpec<T>,
    witness: Option<(IndexSet, OverrideRule<T>)>,
    budgets: &Budgets<T>,
) -> GasVerdict<T> {
    let mut chain = Vec::new();

    let stat = stat_limit(spec, budgets.n_max, &budgets.eps_grid, None);
    chain.push(ChainStep { stage: Stage::Statistical, status: stat.status });
    if let Status::Converges { limit } = stat.status {
        return GasVerdict { status: GasStatus::Converges { limit }, witness: None, chain };
    }

    if let Ok(almost) = lorentz_test(spec, &budgets.k_schedule, &default_p_budget) {
        chain.push(ChainStep { stage: Stage::Almost, status: almost.status });
        if let Status::Converges { limit } = almost.status {
            return GasVerdict { status: GasStatus::Converges { limit }, witness: None, chain };
        }
    }

    let Some((exceptions, rule)) = witness else {
        return GasVerdict { status: GasStatus::Inconclusive, witness: None, chain };
    };
    let modification = match Modification::new(exceptions, rule) {
        Ok(m) => m,
        Err(DensityNotZero) => {
            return GasVerdict { status: GasStatus::WitnessRejected, witness: None, chain };
        }
    };
    let modified = apply_modification(spec, &modification);

    let stat = stat_limit(&modified, budgets.n_max, &budgets.eps_grid, None);
    chain.push(ChainStep { stage: Stage::ModifiedStatistical, status: stat.status });
    if let Status::Converges { limit } = stat.status {
        return GasVerdict {
            status: GasStatus::Converges { limit },
            witness: Some(modification),
            chain,
        };
    }

    if let Ok(almost) = lorentz_test(&modified, &budgets.k_schedule, &default_p_budget) {
        chain.push(ChainStep { stage: Stage::ModifiedAlmost, status: almost.status });
        if let Status::Converges { limit } = almost.status {
            return GasVerdict {
                status: GasStatus::Converges { limit },
                witness: Some(modification),
                chain,
            };
        }
    }

    GasVerdict { status: GasStatus::Inconclusive, witness: Some(modification), chain }
}

/// Ordinary (every-index) convergence.  Converges verdicts come only from
/// structural analysis; the numeric fallback can refute by exhibiting
/// persistent tail oscillation but never confirms.
pub fn usual_limit<T: Real>(spec: &SequenceSpec<T>, n_max: u64) -> Status<T> {
    match spec {
        SequenceSpec::Constant(c) => Status::Converges { limit: *c },
        SequenceSpec::Periodic(values) => {
            if values.iter().all(|v| *v == values[0]) {
                Status::Converges { limit: values[0] }
            } else {
                Status::Refuted
            }
        }
        SequenceSpec::Explicit { tail, .. } => usual_limit(tail, n_max),
        SequenceSpec::Skip { inner, .. } => usual_limit(inner, n_max),
        SequenceSpec::Blocks(schedule) => {
            // A value recurs forever iff some run is ever long enough to
            // reach its pattern offset.
            let mut used: Vec<T> = Vec::new();
            for (pattern, len) in schedule.phases() {
                let period = pattern.values().len() as u64;
                let reach = match *len {
                    LengthExpr::Const(c) => c.min(period),
                    LengthExpr::Pow { base } if base >= 2 => period,
                    LengthExpr::Pow { base } => base.min(period),
                };
                used.extend_from_slice(&pattern.values()[..reach as usize]);
            }
            match used.split_first() {
                Some((first, rest)) if rest.iter().all(|v| v == first) => {
                    Status::Converges { limit: *first }
                }
                Some(_) => Status::Refuted,
                None => Status::Inconclusive,
            }
        }
        SequenceSpec::Overlay { base, overrides } => match usual_limit(base, n_max) {
            Status::Converges { limit } => {
                for (i, (set, rule)) in overrides.iter().enumerate() {
                    if set.known_empty() || surely_finite(set) {
                        continue;
                    }
                    // Later overrides rewrite earlier ones wherever they
                    // overlap; drop a rule that some later set swallows
                    // whole.  Partial overlap is not tracked.
                    if overrides[i + 1..].iter().any(|(later, _)| provably_subset(set, later)) {
                        continue;
                    }
                    if !rule_matches_limit(set, rule, limit) {
                        return Status::Refuted;
                    }
                }
                Status::Converges { limit }
            }
            _ => numeric_usual(spec, n_max),
        },
        SequenceSpec::Sum(a, b) => match (usual_limit(a, n_max), usual_limit(b, n_max)) {
            (Status::Converges { limit: x }, Status::Converges { limit: y }) => {
                Status::Converges { limit: x + y }
            }
            (Status::Converges { .. }, Status::Refuted)
            | (Status::Refuted, Status::Converges { .. }) => Status::Refuted,
            _ => numeric_usual(spec, n_max),
        },
        SequenceSpec::Diff(inner) => match usual_limit(inner, n_max) {
            Status::Converges { .. } => Status::Converges { limit: T::zero() },
            _ => numeric_usual(spec, n_max),
        },
    }
}

fn surely_finite(set: &IndexSet) -> bool {
    match set {
        IndexSet::Finite(_) | IndexSet::Range { hi: Some(_), .. } => true,
        IndexSet::Union(a, b) => surely_finite(a) && surely_finite(b),
        IndexSet::Intersection(a, b) => surely_finite(a) || surely_finite(b),
        _ => false,
    }
}

/// Whether every rewritten value on an infinite exception set equals the
/// base limit.  Parity branches that provably never fire are ignored.
fn rule_matches_limit<T: Real>(set: &IndexSet, rule: &OverrideRule<T>, limit: T) -> bool {
    match rule {
        OverrideRule::Constant(c) => *c == limit,
        OverrideRule::IndexValue { scale, offset } => *scale == T::zero() && *offset == limit,
        OverrideRule::Parity { odd, even } => {
            let odd_fires = !provably_disjoint(set, &IndexSet::odds());
            let even_fires = !provably_disjoint(set, &IndexSet::evens());
            (!odd_fires || *odd == limit) && (!even_fires || *even == limit)
        }
    }
}

/// Tail-window refutation: oscillation at least `REFUTE_FLOOR` in short
/// windows at three geometrically spaced endpoints.
fn numeric_usual<T: Real>(spec: &SequenceSpec<T>, n_max: u64) -> Status<T> {
    const WINDOW: u64 = 64;
    let grid = geometric_grid(n_max, 10f64.sqrt());
    let tail = &grid[grid.len().saturating_sub(3)..];
    if tail.is_empty() {
        return Status::Inconclusive;
    }
    let floor = T::from_f64_lossy(REFUTE_FLOOR);
    for &n in tail {
        let start = n.saturating_sub(WINDOW - 1).max(1);
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for v in spec.terms_from(start).take((n - start + 1) as usize) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < floor {
            return Status::Inconclusive;
        }
    }
    Status::Refuted
}

/// Verdicts for one sequence under all four convergence modes.  The
/// window-mean and staged fields need a bounded spec and are `None`
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification<T> {
    pub usual: Status<T>,
    pub statistical: Status<T>,
    pub almost: Option<Status<T>>,
    pub gas: Option<GasStatus<T>>,
}

/// Runs every mode test on one spec.  The witness, if any, only feeds the
/// staged pipeline.
pub fn classify<T: Real>(
    spec: &SequenceSpec<T>,
    witness: Option<(IndexSet, OverrideRule<T>)>,
    budgets: &Budgets<T>,
) -> Classification<T> {
    let usual = usual_limit(spec, budgets.n_max);
    let statistical = stat_limit(spec, budgets.n_max, &budgets.eps_grid, None).status;
    let bounded = spec.value_range().is_some();
    let almost = if bounded {
        lorentz_test(spec, &budgets.k_schedule, &default_p_budget)
            .ok()
            .map(|verdict| verdict.status)
    } else {
        None
    };
    let gas = bounded.then(|| gas_limit(spec, witness, budgets).status);
    Classification { usual, statistical, almost, gas }
}
