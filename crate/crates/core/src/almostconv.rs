//! Almost-convergence testing via uniform window means.
//!
//! A bounded sequence is almost convergent to `ℓ` exactly when the window
//! means `(x_p + … + x_{p+k−1})/k` tend to `ℓ` as `k → ∞` uniformly in the
//! start `p`. The tester evaluates window statistics over a schedule of
//! window lengths: exactly for cyclic sequences, by symbolic phase
//! witnesses for block schedules, and by a budgeted rolling sweep plus
//! structure-aware probes otherwise.

use num_integer::Integer;
use thiserror::Error;

use crate::density::uniform_density_zero;
use crate::real::Real;
use crate::seqspec::SequenceSpec;
use crate::statconv::Status;

/// Window-length schedule used when the caller does not supply one.
pub fn default_k_schedule() -> Vec<u64> {
    vec![10, 100, 1_000, 10_000]
}

/// Window starts examined per window length `k` by default.
pub fn default_p_budget(k: u64) -> u64 {
    100_000.max(100 * k)
}

/// Oscillation floor treated as a structural gap when probing block runs.
pub const REFUTE_GAP: f64 = 0.05;

const MAX_EXACT_PERIOD: u64 = 100_000;
const PROBE_SPAN_LIMIT: usize = 64;
const PROBE_START_CAP: u64 = 1 << 28;

/// Sup and inf of the length-`k` window means examined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub k: u64,
    pub sup_mean: f64,
    pub inf_mean: f64,
    /// Number of window starts examined.
    pub p_range: u64,
    /// Set when sup/inf are exact over all of ℕ, not a finite sample.
    pub exact: bool,
}

impl WindowStats {
    pub fn oscillation(&self) -> f64 {
        self.sup_mean - self.inf_mean
    }

    fn midpoint(&self) -> f64 {
        (self.sup_mean + self.inf_mean) / 2.0
    }
}

/// Two windows living inside distinct phase runs with different means —
/// a symbolic refutation of uniform window convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseWitness {
    pub k: u64,
    /// `(p, window mean)` for each of the two conflicting windows.
    pub windows: [(u64, f64); 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostVerdict<T> {
    pub status: Status<T>,
    /// Stats per examined window length, in schedule order.
    pub windows: Vec<WindowStats>,
    pub refutation: Option<PhaseWitness>,
}

/// Almost convergence is an l∞ notion; the spec has no derivable bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("almost-convergence testing requires a derivably bounded sequence")]
pub struct UnboundedSpec;

/// Mean of the `k` terms starting at `p`; exact cycle decomposition for
/// periodic specs, streamed summation otherwise.
pub fn window_mean<T: Real>(spec: &SequenceSpec<T>, p: u64, k: u64) -> T {
    assert!(p >= 1 && k >= 1, "window start and length must be positive");
    T::from_f64_lossy(window_mean_f64(spec, p, k))
}

fn window_mean_f64<T: Real>(spec: &SequenceSpec<T>, p: u64, k: u64) -> f64 {
    if let SequenceSpec::Periodic(v) = spec {
        let cycle: Vec<f64> = v.iter().map(|x| x.to_f64_lossy()).collect();
        let total: f64 = cycle.iter().sum();
        let len = cycle.len() as u64;
        let offset = ((p - 1) % len) as usize;
        let mut sum = total * (k / len) as f64;
        for i in 0..(k % len) as usize {
            sum += cycle[(offset + i) % cycle.len()];
        }
        return sum / k as f64;
    }
    let sum: f64 = spec.terms_from(p).take(k as usize).map(|x| x.to_f64_lossy()).sum();
    sum / k as f64
}

/// The exact almost-limit of a cyclic sequence: its cycle mean.
pub fn exact_periodic_almost_limit<T: Real>(spec: &SequenceSpec<T>) -> Option<T> {
    match spec {
        SequenceSpec::Constant(c) => Some(*c),
        SequenceSpec::Periodic(v) => {
            let mut s = T::zero();
            for &x in v {
                s += x;
            }
            Some(s / T::from_index(v.len() as u64))
        }
        _ => None,
    }
}

/// Cycle length `L` with `term(k + L) = term(k)` for every `k`, when the
/// structure guarantees it. Unlike `period_hint`, never an approximation.
fn pure_period<T: Real>(spec: &SequenceSpec<T>) -> Option<u64> {
    match spec {
        SequenceSpec::Constant(_) => Some(1),
        SequenceSpec::Periodic(v) => Some(v.len() as u64),
        SequenceSpec::Diff(inner) => pure_period(inner),
        SequenceSpec::Skip { inner, .. } => pure_period(inner),
        SequenceSpec::Sum(a, b) => {
            let la = pure_period(a)?;
            let lb = pure_period(b)?;
            la.checked_mul(lb / la.gcd(&lb))
        }
        _ => None,
    }
}

/// Uniform window-mean test over a schedule of window lengths.
///
/// Evaluation strategy, in order:
/// 1. Neither a dropped prefix nor a finite head changes almost-convergence
///    behaviour, so `Skip` and `Explicit` delegate past them.
/// 2. Overriding a bounded sequence on a set that meets every window in
///    `o(k)` points (uniformly) perturbs window means by `o(1)`, so such
///    overlays reduce to their base.
/// 3. Cyclic sequences get exact sup/inf over all window starts, and an
///    extra cycle-aligned window length where the oscillation is zero.
/// 4. Block schedules whose growing phases have different cycle means are
///    refuted symbolically with two in-phase windows.
/// 5. Otherwise a rolling sweep over `p ≤ p_budget(k)` plus probes inside
///    every long phase run, judged against `max(10⁻³, 2M/k_max)`.
pub fn lorentz_test<T: Real>(
    spec: &SequenceSpec<T>,
    k_schedule: &[u64],
    p_budget: &dyn Fn(u64) -> u64,
) -> Result<AlmostVerdict<T>, UnboundedSpec> {
    assert!(
        !k_schedule.is_empty() && k_schedule.windows(2).all(|w| w[0] < w[1]),
        "window schedule must be nonempty and strictly increasing"
    );
    assert!(k_schedule[0] >= 1, "window lengths must be positive");
    let (lo, hi) = spec.value_range().ok_or(UnboundedSpec)?;

    match spec {
        SequenceSpec::Skip { inner, .. } => return lorentz_test(inner, k_schedule, p_budget),
        // a finite head shifts finitely many window means by o(1) each
        SequenceSpec::Explicit { tail, .. } => return lorentz_test(tail, k_schedule, p_budget),
        SequenceSpec::Overlay { base, overrides }
            if overrides
                .iter()
                .all(|(set, rule)| uniform_density_zero(set) && rule.value_range().is_some()) =>
        {
            return lorentz_test(base, k_schedule, p_budget)
        }
        _ => {}
    }

    if let Some(period) = pure_period(spec).filter(|&l| l <= MAX_EXACT_PERIOD) {
        return Ok(periodic_verdict(spec, period, k_schedule));
    }

    if let SequenceSpec::Blocks(sched) = spec {
        if let Some(witness) = phase_witness(sched, *k_schedule.last().unwrap()) {
            return Ok(AlmostVerdict {
                status: Status::Refuted,
                windows: Vec::new(),
                refutation: Some(witness),
            });
        }
    }

    let probes_by_k: Vec<Vec<u64>> =
        k_schedule.iter().map(|&k| block_probes(spec, k)).collect();
    let windows: Vec<WindowStats> = k_schedule
        .iter()
        .zip(&probes_by_k)
        .map(|(&k, probes)| sweep(spec, k, p_budget(k), probes))
        .collect();

    let bound = lo.abs().max(hi.abs()).to_f64_lossy();
    let k_max = *k_schedule.last().unwrap();
    let tolerance = (2.0 * bound / k_max as f64).max(1e-3);
    let last = windows.last().unwrap();
    let stable_mid = windows.len() < 2
        || (last.midpoint() - windows[windows.len() - 2].midpoint()).abs() <= tolerance;
    let status = if last.oscillation() <= tolerance && stable_mid {
        Status::Converges { limit: T::from_f64_lossy(last.midpoint()) }
    } else if spec.blocks_core().is_some()
        && windows.len() >= 2
        && windows[windows.len() - 2..].iter().all(|w| w.oscillation() >= REFUTE_GAP)
    {
        // the gap was exhibited by windows inside ever-longer phase runs
        Status::Refuted
    } else {
        Status::Inconclusive
    };
    Ok(AlmostVerdict { status, windows, refutation: None })
}

/// Exact window statistics for a sequence with true period `period`.
fn periodic_verdict<T: Real>(
    spec: &SequenceSpec<T>,
    period: u64,
    k_schedule: &[u64],
) -> AlmostVerdict<T> {
    let cycle: Vec<f64> = (1..=period).map(|k| spec.term(k).to_f64_lossy()).collect();
    let mut prefix = vec![0.0f64; cycle.len() + 1];
    for (i, &x) in cycle.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }
    let total = prefix[cycle.len()];
    let window_sum = |offset: u64, rem: u64| -> f64 {
        // sum of `rem` cycle values starting at 0-based `offset`
        let (o, r) = (offset as usize, rem as usize);
        if o + r <= cycle.len() {
            prefix[o + r] - prefix[o]
        } else {
            (total - prefix[o]) + prefix[o + r - cycle.len()]
        }
    };
    let stats_for = |k: u64| -> WindowStats {
        let full = total * (k / period) as f64;
        let rem = k % period;
        let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
        for offset in 0..period {
            let mean = (full + window_sum(offset, rem)) / k as f64;
            sup = sup.max(mean);
            inf = inf.min(mean);
        }
        WindowStats { k, sup_mean: sup, inf_mean: inf, p_range: period, exact: true }
    };
    let mut windows: Vec<WindowStats> = k_schedule.iter().map(|&k| stats_for(k)).collect();
    let k_max = *k_schedule.last().unwrap();
    if k_max % period != 0 {
        // a cycle-aligned window has zero oscillation exactly
        windows.push(stats_for(k_max.div_ceil(period) * period));
    }
    let limit = T::from_f64_lossy(total / period as f64);
    debug_assert!(windows.last().unwrap().oscillation() == 0.0);
    AlmostVerdict { status: Status::Converges { limit }, windows, refutation: None }
}

/// Two phases with unbounded runs and different in-window means, if any.
fn phase_witness<T: Real>(
    sched: &crate::seqspec::BlockSchedule<T>,
    k: u64,
) -> Option<PhaseWitness> {
    let mut growing: Vec<(usize, f64)> = sched
        .phases()
        .iter()
        .enumerate()
        .filter(|(_, (_, len))| len.growth_base() >= 2)
        .map(|(i, (pattern, _))| {
            (i, pattern.prefix_sum(k).to_f64_lossy() / k as f64)
        })
        .collect();
    if growing.len() < 2 {
        return None;
    }
    growing.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (lo_phase, lo_mean) = growing[0];
    let (hi_phase, hi_mean) = growing[growing.len() - 1];
    if hi_mean - lo_mean <= 1e-9 {
        return None;
    }
    let start_of = |phase: usize| -> Option<u64> {
        sched
            .layout()
            .into_spans()
            .take(PROBE_SPAN_LIMIT)
            .find(|span| span.phase == phase && span.len >= k)
            .map(|span| span.start + 1)
    };
    Some(PhaseWitness {
        k,
        windows: [(start_of(lo_phase)?, lo_mean), (start_of(hi_phase)?, hi_mean)],
    })
}

/// Window starts probing the interior of every long phase run, so that the
/// sweep sees block structure even beyond its contiguous budget.
fn block_probes<T: Real>(spec: &SequenceSpec<T>, k: u64) -> Vec<u64> {
    let Some((sched, offset)) = spec.blocks_core() else { return Vec::new() };
    let mut probes = Vec::new();
    for span in sched.layout().into_spans().take(PROBE_SPAN_LIMIT) {
        if span.start > PROBE_START_CAP {
            break;
        }
        if span.len < k {
            continue;
        }
        let first = span.start + 1;
        let last = span.end() - k + 1;
        for p in [first, first + (last - first) / 2, last] {
            let p = p.saturating_sub(offset);
            if p >= 1 {
                probes.push(p);
            }
        }
    }
    probes.sort_unstable();
    probes.dedup();
    probes
}

/// Rolling sweep of window means over `p = 1..=p_max`, then probe windows.
fn sweep<T: Real>(spec: &SequenceSpec<T>, k: u64, p_max: u64, probes: &[u64]) -> WindowStats {
    let mut terms = spec.terms_from(1).map(|x| x.to_f64_lossy());
    let mut ring: Vec<f64> = Vec::with_capacity(k as usize);
    let mut sum = 0.0f64;
    for _ in 0..k {
        let x = terms.next().expect("sequences are infinite");
        ring.push(x);
        sum += x;
    }
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut slot = 0usize;
    let mean = sum / k as f64;
    sup = sup.max(mean);
    inf = inf.min(mean);
    for _ in 1..p_max {
        let incoming = terms.next().expect("sequences are infinite");
        sum += incoming - ring[slot];
        ring[slot] = incoming;
        slot = (slot + 1) % ring.len();
        let mean = sum / k as f64;
        sup = sup.max(mean);
        inf = inf.min(mean);
    }
    for &p in probes {
        let mean = window_mean_f64(spec, p, k);
        sup = sup.max(mean);
        inf = inf.min(mean);
    }
    WindowStats {
        k,
        sup_mean: sup,
        inf_mean: inf,
        p_range: p_max + probes.len() as u64,
        exact: false,
    }
}
