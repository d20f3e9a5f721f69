//! Statistical-convergence testing.
//!
//! A sequence converges statistically to `ℓ` when, for every `ε > 0`, the
//! set `{k : |x_k − ℓ| > ε}` has natural density zero. The tester builds
//! those exceedance sets symbolically where the spec's structure allows
//! and counts them exactly; otherwise it streams a prefix. Verdicts are
//! finite-prefix judgments with stated thresholds, never proofs.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::density::{exact_density, geometric_grid, tail_residual};
use crate::real::Real;
use crate::seqspec::indexset::{IndexSet, PhaseSelect};
use crate::seqspec::{BlockLayout, OverrideRule, SequenceSpec};

/// Exceedance density that counts as persistent: refutation requires some
/// ε-trajectory to sit at or above this along the whole tail.
pub const REFUTE_FLOOR: f64 = 0.05;
/// Final-ratio ceiling below which a trajectory can never be required to
/// shrink further (absolute floor of the convergence threshold).
pub const CONVERGE_FLOOR: f64 = 1e-4;
/// Minimum empirical frequency for a sampled value to become a candidate
/// limit.
pub const CANDIDATE_FREQUENCY: f64 = 0.4;

const SAMPLE_CAP: u64 = 2_000_000;
const STREAM_CAP: u64 = 10_000_000;
const MAX_CANDIDATES: usize = 8;

/// Outcome of a finite-prefix convergence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status<T> {
    Converges { limit: T },
    Refuted,
    Inconclusive,
}

impl<T> Status<T> {
    pub fn is_definite(&self) -> bool {
        !matches!(self, Status::Inconclusive)
    }

    pub fn limit(&self) -> Option<&T> {
        match self {
            Status::Converges { limit } => Some(limit),
            _ => None,
        }
    }
}

/// Exceedance-density ratios of one ε along the decision grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsTrajectory {
    pub eps: f64,
    /// `(n, |{k ≤ n : |x_k − ℓ| > ε}| / n)`.
    pub points: Vec<(u64, f64)>,
    /// Max deviation from the final ratio over the last quartile.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatDiagnostics {
    /// Largest prefix length actually examined.
    pub n_used: u64,
    /// Whether `n_used` was clamped below the requested `n_max`.
    pub clamped: bool,
    /// Whether exceedance sets were counted exactly rather than streamed.
    pub symbolic: bool,
    /// Candidate limits examined, in search order.
    pub candidates: Vec<f64>,
    /// Per-ε trajectories for the decisive candidate.
    pub trajectories: Vec<EpsTrajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict<T> {
    pub status: Status<T>,
    pub diagnostics: StatDiagnostics,
}

/// The spec has no symbolic exceedance-set construction; callers fall back
/// to streaming evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no symbolic exceedance-set construction for this sequence form")]
pub struct SymbolicUnavailable;

/// No density-one witness set is derivable for this spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot build a density-one witness: {reason}")]
pub struct WitnessUnavailable {
    pub reason: &'static str,
}

/// ε grid used when the caller does not supply one.
pub fn default_eps_grid<T: Real>() -> Vec<T> {
    [0.1, 0.01, 0.001].iter().map(|&e| T::from_f64_lossy(e)).collect()
}

/// The index set `{k : |x_k − ℓ| > ε}`, built symbolically.
pub fn exceedance_set<T: Real>(
    spec: &SequenceSpec<T>,
    ell: T,
    eps: T,
) -> Result<IndexSet, SymbolicUnavailable> {
    assert!(eps > T::zero(), "exceedance band must be positive");
    let exceeds = |v: T| (v - ell).abs() > eps;
    match spec {
        SequenceSpec::Constant(c) => {
            Ok(if exceeds(*c) { IndexSet::all() } else { IndexSet::empty() })
        }
        SequenceSpec::Periodic(v) => {
            let step = v.len() as u64;
            let bad: Vec<u64> = v
                .iter()
                .enumerate()
                .filter(|&(_, &x)| exceeds(x))
                .map(|(j, _)| j as u64 + 1)
                .collect();
            Ok(residue_union(&bad, step))
        }
        SequenceSpec::Blocks(sched) => {
            let select = sched
                .phases()
                .iter()
                .map(|(pattern, _)| {
                    let m = pattern.len();
                    let offsets: Vec<u64> =
                        (0..m).filter(|&q| exceeds(pattern.value_at(q))).collect();
                    PhaseSelect::Positions { modulus: m, offsets }
                })
                .collect();
            Ok(IndexSet::blocks(sched.layout(), select))
        }
        SequenceSpec::Overlay { base, overrides } => {
            // Later overrides win, so each one replaces whatever the
            // partial spec said on its set.
            let mut acc = exceedance_set(base, ell, eps)?;
            for (set, rule) in overrides {
                let on_set = rule_exceedance(rule, ell, eps);
                acc = IndexSet::union_of(
                    IndexSet::intersection_of(acc, IndexSet::complement_of(set.clone())),
                    IndexSet::intersection_of(on_set, set.clone()),
                );
            }
            Ok(acc)
        }
        SequenceSpec::Explicit { head, tail } => {
            // Beyond the head the sequence is the tail shifted by |head|;
            // the head itself contributes finitely many exceedances.
            let shifted = exceedance_set(tail, ell, eps)?
                .shifted(head.len() as u64)
                .ok_or(SymbolicUnavailable)?;
            let bad: Vec<u64> = head
                .iter()
                .enumerate()
                .filter(|&(_, &x)| exceeds(x))
                .map(|(j, _)| j as u64 + 1)
                .collect();
            Ok(IndexSet::union_of(IndexSet::finite(bad), shifted))
        }
        _ => Err(SymbolicUnavailable),
    }
}

/// Indices at which a rule's value leaves the band `[ℓ−ε, ℓ+ε]`.
fn rule_exceedance<T: Real>(rule: &OverrideRule<T>, ell: T, eps: T) -> IndexSet {
    let exceeds = |v: T| (v - ell).abs() > eps;
    match *rule {
        OverrideRule::Constant(c) => {
            if exceeds(c) {
                IndexSet::all()
            } else {
                IndexSet::empty()
            }
        }
        OverrideRule::Parity { odd, even } => match (exceeds(odd), exceeds(even)) {
            (true, true) => IndexSet::all(),
            (false, false) => IndexSet::empty(),
            (true, false) => IndexSet::odds(),
            (false, true) => IndexSet::evens(),
        },
        OverrideRule::IndexValue { scale, offset } => {
            if scale == T::zero() {
                return if exceeds(offset) { IndexSet::all() } else { IndexSet::empty() };
            }
            // `scale·k + offset` is monotone in k, so the in-band indices
            // form one contiguous run; locate it in f64 and trim the ends
            // with exact term checks.
            let x1 = (ell - eps - offset).to_f64_lossy() / scale.to_f64_lossy();
            let x2 = (ell + eps - offset).to_f64_lossy() / scale.to_f64_lossy();
            let (lo, hi) = (x1.min(x2), x1.max(x2));
            let mut a = lo.ceil().max(1.0) as u64;
            let mut b = if hi < 1.0 { 0 } else { hi.floor().min(u64::MAX as f64) as u64 };
            let in_band = |k: u64| !exceeds(rule.value(k));
            while a <= b && !in_band(a) {
                a += 1;
            }
            while b >= a && b >= 1 && !in_band(b) {
                b -= 1;
            }
            if a > b {
                IndexSet::all()
            } else {
                IndexSet::complement_of(IndexSet::range(a - 1, Some(b)))
            }
        }
    }
}

/// Union of the residue classes `{j, j+step, …}` for `j` in `bad`.
fn residue_union(bad: &[u64], step: u64) -> IndexSet {
    if bad.is_empty() {
        IndexSet::empty()
    } else if bad.len() as u64 == step {
        IndexSet::all()
    } else {
        bad.iter()
            .map(|&j| IndexSet::ap(j, step))
            .reduce(IndexSet::union_of)
            .unwrap()
    }
}

/// Finite-prefix statistical-limit search.
///
/// Candidate limits are the supplied value, sampled values of empirical
/// frequency ≥ [`CANDIDATE_FREQUENCY`], the sample median, and bracketing
/// midpoints. Each candidate's ε-exceedance densities are tracked along a
/// decision grid — block boundaries and midpoints for block-structured
/// specs, a geometric grid otherwise — using exact symbolic counts where
/// the spec allows and a streamed prefix (clamped to 10⁷ terms) where not.
pub fn stat_limit<T: Real>(
    spec: &SequenceSpec<T>,
    n_max: u64,
    eps_grid: &[T],
    candidate: Option<T>,
) -> ConvergenceVerdict<T> {
    assert!(n_max >= 1, "prefix length must be positive");
    assert!(
        !eps_grid.is_empty() && eps_grid.iter().all(|e| *e > T::zero()),
        "eps grid must be nonempty and strictly positive"
    );
    let candidates = candidate_limits(spec, n_max, candidate);
    let (grid, _) = decision_grid(spec, n_max);
    match symbolic_tables(spec, &candidates, eps_grid, &grid) {
        Some(tables) => decide(&candidates, tables, n_max, false, true),
        None => {
            let n_used = n_max.min(STREAM_CAP);
            let (grid, peaks) = decision_grid(spec, n_used);
            let tables = streamed_tables(spec, &candidates, eps_grid, &grid, &peaks);
            decide(&candidates, tables, n_used, n_used < n_max, false)
        }
    }
}

fn candidate_limits<T: Real>(spec: &SequenceSpec<T>, n_max: u64, supplied: Option<T>) -> Vec<T> {
    let m = n_max.min(SAMPLE_CAP);
    let mut counts: HashMap<u64, u64> = HashMap::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in spec.terms_from(1).take(m as usize) {
        let x = v.to_f64_lossy();
        if !x.is_finite() {
            continue;
        }
        let x = if x == 0.0 { 0.0 } else { x };
        lo = lo.min(x);
        hi = hi.max(x);
        *counts.entry(x.to_bits()).or_insert(0) += 1;
    }
    let mut by_value: Vec<(f64, u64)> =
        counts.into_iter().map(|(bits, c)| (f64::from_bits(bits), c)).collect();
    by_value.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: u64 = by_value.iter().map(|&(_, c)| c).sum();

    let mut out: Vec<f64> = Vec::new();
    let push = |v: f64, out: &mut Vec<f64>| {
        if v.is_finite()
            && !out.iter().any(|&u| (u - v).abs() <= 1e-9 * u.abs().max(1.0))
            && out.len() < MAX_CANDIDATES
        {
            out.push(v);
        }
    };
    if let Some(c) = supplied {
        push(c.to_f64_lossy(), &mut out);
    }
    if total > 0 {
        let mut frequent: Vec<(f64, u64)> = by_value
            .iter()
            .copied()
            .filter(|&(_, c)| c as f64 >= CANDIDATE_FREQUENCY * total as f64)
            .collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
        for &(v, _) in &frequent {
            push(v, &mut out);
        }
        // weighted median of the sampled values
        let mut acc = 0u64;
        for &(v, c) in &by_value {
            acc += c;
            if acc * 2 >= total {
                push(v, &mut out);
                break;
            }
        }
        // bracketing midpoints refine between the dominant values
        let mut fv: Vec<f64> = frequent.iter().map(|&(v, _)| v).collect();
        fv.sort_by(f64::total_cmp);
        for w in fv.windows(2) {
            push((w[0] + w[1]) / 2.0, &mut out);
        }
        if hi > lo {
            push((lo + hi) / 2.0, &mut out);
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out.into_iter().map(T::from_f64_lossy).collect()
}

/// Block layouts that shape the exceedance trajectory: the spec's own
/// schedule plus any block-built sets inside overlay overrides.  Each
/// layout carries the shift between layout positions and spec positions
/// (spec position = layout position − shift).
fn peak_layouts<T: Real>(spec: &SequenceSpec<T>, shift: i64, out: &mut Vec<(BlockLayout, i64)>) {
    match spec {
        SequenceSpec::Blocks(sched) => out.push((sched.layout(), shift)),
        SequenceSpec::Overlay { base, overrides } => {
            peak_layouts(base, shift, out);
            for (set, _) in overrides {
                set_layouts(set, shift, out);
            }
        }
        SequenceSpec::Explicit { head, tail } => {
            peak_layouts(tail, shift - head.len() as i64, out)
        }
        SequenceSpec::Diff(inner) => peak_layouts(inner, shift, out),
        SequenceSpec::Sum(a, b) => {
            peak_layouts(a, shift, out);
            peak_layouts(b, shift, out);
        }
        SequenceSpec::Skip { inner, offset } => {
            peak_layouts(inner, shift + *offset as i64, out)
        }
        _ => {}
    }
}

fn set_layouts(set: &IndexSet, shift: i64, out: &mut Vec<(BlockLayout, i64)>) {
    match set {
        IndexSet::Blocks(bs) => out.push((bs.layout().clone(), shift)),
        IndexSet::Complement(a) => set_layouts(a, shift, out),
        IndexSet::Union(a, b) | IndexSet::Intersection(a, b) => {
            set_layouts(a, shift, out);
            set_layouts(b, shift, out);
        }
        _ => {}
    }
}

/// Block boundaries per layout, clipped to the prefix; duplicate layouts
/// collapse to one group.
fn layout_groups(layouts: &[(BlockLayout, i64)], n_max: u64) -> Vec<Vec<u64>> {
    let mut groups: Vec<Vec<u64>> = Vec::new();
    for (layout, shift) in layouts {
        let mut boundaries = Vec::new();
        for i in 1..=64u32 {
            let Some(b) = layout.boundary_u64(i) else { break };
            let pos = b as i128 - *shift as i128;
            if pos >= 1 && pos <= n_max as i128 {
                boundaries.push(pos as u64);
            }
            if pos >= n_max as i128 {
                break;
            }
        }
        if !boundaries.is_empty() && !groups.contains(&boundaries) {
            groups.push(boundaries);
        }
    }
    groups
}

/// Grid of prefix lengths to examine, plus the prefix lengths where the
/// exceedance density can peak (block ends), grouped per layout — distinct
/// layouts interleave, so monotonicity only holds within one layout's
/// own peak subsequence.
fn decision_grid<T: Real>(spec: &SequenceSpec<T>, n_max: u64) -> (Vec<u64>, Vec<Vec<u64>>) {
    let mut layouts = Vec::new();
    peak_layouts(spec, 0, &mut layouts);
    let groups = layout_groups(&layouts, n_max);
    if groups.is_empty() {
        return (geometric_grid(n_max, 10f64.sqrt()), Vec::new());
    }
    let mut grid: Vec<u64> = groups.concat();
    grid.sort_unstable();
    grid.dedup();
    let midpoints: Vec<u64> = grid.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2).collect();
    grid.extend(midpoints);
    grid.push(n_max);
    grid.sort_unstable();
    grid.dedup();
    (grid, groups)
}

/// A trajectory paired with the peak groups its tail check should honor:
/// the exceedance set's own block layouts when the set is known exactly,
/// the spec's layouts otherwise. Layouts the set never touches must not
/// veto convergence — the ratio at their boundaries tracks some other
/// layout's runs and can drift upward without meaning anything.
struct JudgedTrajectory {
    trajectory: EpsTrajectory,
    peaks: Vec<Vec<u64>>,
}

/// `tables[candidate][eps]`, via exact counting; `None` when the spec has
/// no symbolic exceedance sets or a set resists counting.
fn symbolic_tables<T: Real>(
    spec: &SequenceSpec<T>,
    candidates: &[T],
    eps_grid: &[T],
    grid: &[u64],
) -> Option<Vec<Vec<JudgedTrajectory>>> {
    let n_max = *grid.last().expect("decision grid is never empty");
    candidates
        .iter()
        .map(|&c| {
            eps_grid
                .iter()
                .map(|&eps| {
                    let set = exceedance_set(spec, c, eps).ok()?;
                    let points: Vec<(u64, f64)> = grid
                        .par_iter()
                        .map(|&n| {
                            set.prefix_count_u64(n).map(|cnt| (n, cnt as f64 / n as f64))
                        })
                        .collect::<Result<_, _>>()
                        .ok()?;
                    let residual = tail_residual(&points);
                    let mut layouts = Vec::new();
                    set_layouts(&set, 0, &mut layouts);
                    Some(JudgedTrajectory {
                        trajectory: EpsTrajectory { eps: eps.to_f64_lossy(), points, residual },
                        peaks: layout_groups(&layouts, n_max),
                    })
                })
                .collect()
        })
        .collect()
}

/// `tables[candidate][eps]` from one streamed pass over the prefix.
fn streamed_tables<T: Real>(
    spec: &SequenceSpec<T>,
    candidates: &[T],
    eps_grid: &[T],
    grid: &[u64],
    peaks: &[Vec<u64>],
) -> Vec<Vec<JudgedTrajectory>> {
    let mut counters = vec![vec![0u64; eps_grid.len()]; candidates.len()];
    let mut points = vec![vec![Vec::with_capacity(grid.len()); eps_grid.len()]; candidates.len()];
    let n_used = *grid.last().expect("decision grid is never empty");
    let mut next = 0usize;
    for (i, x) in spec.terms_from(1).take(n_used as usize).enumerate() {
        let k = i as u64 + 1;
        for (ci, &c) in candidates.iter().enumerate() {
            let d = (x - c).abs();
            for (ei, &eps) in eps_grid.iter().enumerate() {
                if d > eps {
                    counters[ci][ei] += 1;
                }
            }
        }
        if k == grid[next] {
            for (ci, row) in counters.iter().enumerate() {
                for (ei, &cnt) in row.iter().enumerate() {
                    points[ci][ei].push((k, cnt as f64 / k as f64));
                }
            }
            next += 1;
        }
    }
    points
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(eps_grid)
                .map(|(points, &eps)| {
                    let residual = tail_residual(&points);
                    JudgedTrajectory {
                        trajectory: EpsTrajectory { eps: eps.to_f64_lossy(), points, residual },
                        peaks: peaks.to_vec(),
                    }
                })
                .collect()
        })
        .collect()
}

fn decide<T: Real>(
    candidates: &[T],
    tables: Vec<Vec<JudgedTrajectory>>,
    n_used: u64,
    clamped: bool,
    symbolic: bool,
) -> ConvergenceVerdict<T> {
    let threshold = (10.0 / (n_used as f64).sqrt()).max(CONVERGE_FLOOR);
    let diag = |trajectories: Vec<EpsTrajectory>| StatDiagnostics {
        n_used,
        clamped,
        symbolic,
        candidates: candidates.iter().map(|c| c.to_f64_lossy()).collect(),
        trajectories,
    };
    for (ci, trajs) in tables.iter().enumerate() {
        if trajs.iter().all(|j| trajectory_converges(&j.trajectory, threshold, &j.peaks)) {
            return ConvergenceVerdict {
                status: Status::Converges { limit: candidates[ci] },
                diagnostics: diag(trajs.iter().map(|j| j.trajectory.clone()).collect()),
            };
        }
    }
    let refuted =
        tables.iter().all(|trajs| trajs.iter().any(|j| trajectory_persists(&j.trajectory)));
    let trajectories =
        tables.into_iter().next().unwrap_or_default().into_iter().map(|j| j.trajectory).collect();
    ConvergenceVerdict {
        status: if refuted { Status::Refuted } else { Status::Inconclusive },
        diagnostics: diag(trajectories),
    }
}

/// Final ratio under the threshold and a nonincreasing tail. For
/// block-structured specs the ratio legitimately climbs inside each block,
/// so the tail check compares per-block peaks instead of raw grid points;
/// with several layouts in play, each layout's peak subsequence must fall
/// on its own.
fn trajectory_converges(t: &EpsTrajectory, threshold: f64, peak_groups: &[Vec<u64>]) -> bool {
    let Some(&(_, last)) = t.points.last() else { return false };
    if last > threshold {
        return false;
    }
    let falling = |vals: &[f64]| {
        let from = vals.len().saturating_sub(3);
        vals[from..].windows(2).all(|w| w[1] <= w[0] + 1e-12)
    };
    let mut grouped = false;
    for peaks in peak_groups {
        let peak_vals: Vec<f64> = t
            .points
            .iter()
            .filter(|(n, _)| peaks.binary_search(n).is_ok())
            .map(|&(_, r)| r)
            .collect();
        if peak_vals.len() >= 2 {
            grouped = true;
            if !falling(&peak_vals) {
                return false;
            }
        }
    }
    if grouped {
        return true;
    }
    let all: Vec<f64> = t.points.iter().map(|&(_, r)| r).collect();
    falling(&all)
}

/// Ratio at or above the refutation floor along the whole tail quartile.
fn trajectory_persists(t: &EpsTrajectory) -> bool {
    let quartile = t.points.len().div_ceil(4);
    !t.points.is_empty()
        && t.points[t.points.len() - quartile..].iter().all(|&(_, r)| r >= REFUTE_FLOOR)
}

/// A set `J` of density one along which the terms approach `ℓ`.
///
/// Each scheduled ε contributes its exceedance set on one stretch of
/// indices; `J` is the complement of the union. Along `J`'s enumeration
/// every term is eventually within the smallest scheduled ε of `ℓ` — and
/// when the exceedance sets coincide for every scheduled ε (terms from a
/// finite alphabet), within every ε at once. Density one is machine-checked
/// via the exact calculus.
pub fn density_one_subsequence<T: Real>(
    spec: &SequenceSpec<T>,
    ell: T,
    eps_schedule: &[T],
) -> Result<IndexSet, WitnessUnavailable> {
    assert!(!eps_schedule.is_empty(), "eps schedule must be nonempty");
    assert!(
        eps_schedule.windows(2).all(|w| w[0] > w[1]) && *eps_schedule.last().unwrap() > T::zero(),
        "eps schedule must be strictly decreasing and positive"
    );
    let sets: Vec<IndexSet> = eps_schedule
        .iter()
        .map(|&eps| exceedance_set(spec, ell, eps))
        .collect::<Result<_, _>>()
        .map_err(|_| WitnessUnavailable {
            reason: "no symbolic exceedance sets for this sequence form",
        })?;
    let bad = if sets.windows(2).all(|w| w[0] == w[1]) {
        // Stabilized exceedance: one set serves every scheduled ε.
        sets.into_iter().next().unwrap()
    } else {
        let mut bad = IndexSet::empty();
        let mut lo = 0u64;
        let last = sets.len() - 1;
        for (m, set) in sets.into_iter().enumerate() {
            let hi = if m == last { None } else { Some(10u64.pow(m as u32 + 2)) };
            bad = IndexSet::union_of(bad, IndexSet::intersection_of(set, IndexSet::range(lo, hi)));
            if let Some(h) = hi {
                lo = h;
            }
        }
        bad
    };
    match exact_density(&bad) {
        Some(d) if d == num_traits::Zero::zero() => Ok(IndexSet::complement_of(bad)),
        _ => Err(WitnessUnavailable {
            reason: "exceedance set lacks a derivable density of zero",
        }),
    }
}

/// The difference sequence `x_k − x_{k+1}`, pushed through the spec's
/// structure where the closed form is available.
pub fn telescope<T: Real>(spec: &SequenceSpec<T>) -> SequenceSpec<T> {
    match spec {
        SequenceSpec::Constant(_) => SequenceSpec::Constant(T::zero()),
        SequenceSpec::Periodic(v) => {
            let len = v.len();
            let diffs: Vec<T> = (0..len).map(|j| v[j] - v[(j + 1) % len]).collect();
            SequenceSpec::periodic(diffs)
        }
        SequenceSpec::Explicit { head, tail } => {
            let mut diffs: Vec<T> = head.windows(2).map(|w| w[0] - w[1]).collect();
            diffs.push(*head.last().unwrap() - tail.term(1));
            SequenceSpec::explicit(diffs, telescope(tail))
        }
        SequenceSpec::Sum(a, b) => {
            SequenceSpec::Sum(Box::new(telescope(a)), Box::new(telescope(b)))
        }
        SequenceSpec::Skip { inner, offset } => {
            SequenceSpec::Skip { inner: Box::new(telescope(inner)), offset: *offset }
        }
        other => SequenceSpec::Diff(Box::new(other.clone())),
    }
}

/// The sequence `x_k − ℓ`, pushed through the spec's structure.
pub fn recenter<T: Real>(spec: &SequenceSpec<T>, ell: T) -> SequenceSpec<T> {
    if ell == T::zero() {
        return spec.clone();
    }
    match spec {
        SequenceSpec::Constant(c) => SequenceSpec::Constant(*c - ell),
        SequenceSpec::Periodic(v) => {
            SequenceSpec::Periodic(v.iter().map(|&x| x - ell).collect())
        }
        SequenceSpec::Blocks(sched) => {
            let phases = sched
                .phases()
                .iter()
                .map(|(pattern, len)| {
                    let values = pattern.values().iter().map(|&x| x - ell).collect();
                    (crate::seqspec::Pattern::new(values), len.clone())
                })
                .collect();
            SequenceSpec::Blocks(crate::seqspec::BlockSchedule::new(phases))
        }
        SequenceSpec::Explicit { head, tail } => SequenceSpec::Explicit {
            head: head.iter().map(|&x| x - ell).collect(),
            tail: Box::new(recenter(tail, ell)),
        },
        SequenceSpec::Overlay { base, overrides } => SequenceSpec::Overlay {
            base: Box::new(recenter(base, ell)),
            overrides: overrides
                .iter()
                .map(|(set, rule)| (set.clone(), recenter_rule(rule, ell)))
                .collect(),
        },
        SequenceSpec::Sum(a, b) => {
            SequenceSpec::Sum(a.clone(), Box::new(recenter(b, ell)))
        }
        SequenceSpec::Skip { inner, offset } => {
            SequenceSpec::Skip { inner: Box::new(recenter(inner, ell)), offset: *offset }
        }
        SequenceSpec::Diff(_) => SequenceSpec::Sum(
            Box::new(spec.clone()),
            Box::new(SequenceSpec::Constant(T::zero() - ell)),
        ),
    }
}

fn recenter_rule<T: Real>(rule: &OverrideRule<T>, ell: T) -> OverrideRule<T> {
    match *rule {
        OverrideRule::Constant(c) => OverrideRule::Constant(c - ell),
        OverrideRule::IndexValue { scale, offset } => {
            OverrideRule::IndexValue { scale, offset: offset - ell }
        }
        OverrideRule::Parity { odd, even } => {
            OverrideRule::Parity { odd: odd - ell, even: even - ell }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspec::schedule::{BlockLayout, BlockSchedule, LengthExpr, Pattern};

    fn index_ramp_on_squares() -> SequenceSpec<f64> {
        SequenceSpec::overlay(
            SequenceSpec::Constant(0.0),
            vec![(
                IndexSet::Squares,
                OverrideRule::IndexValue { scale: 1.0, offset: 0.0 },
            )],
        )
    }

    fn zero_one_blocks() -> SequenceSpec<f64> {
        SequenceSpec::Blocks(BlockSchedule::new(vec![
            (Pattern::constant(0.0), LengthExpr::Pow { base: 100 }),
            (Pattern::constant(1.0), LengthExpr::Pow { base: 10 }),
        ]))
    }

    fn parity_with_fives() -> SequenceSpec<f64> {
        SequenceSpec::overlay(
            SequenceSpec::Periodic(vec![1.0, 0.0]),
            vec![(IndexSet::Squares, OverrideRule::Constant(5.0))],
        )
    }

    fn ones_blocks_set() -> IndexSet {
        IndexSet::blocks(
            BlockLayout::new(vec![
                LengthExpr::Pow { base: 100 },
                LengthExpr::Pow { base: 10 },
            ]),
            vec![PhaseSelect::Skip, PhaseSelect::Keep],
        )
    }

    fn assert_exceedance_matches(spec: &SequenceSpec<f64>, ell: f64, eps: f64, up_to: u64) {
        let set = exceedance_set(spec, ell, eps).unwrap();
        for k in 1..=up_to {
            assert_eq!(
                set.contains(k),
                (spec.term(k) - ell).abs() > eps,
                "k={k} ell={ell} eps={eps}"
            );
        }
    }

    #[test]
    fn ramp_exceedance_is_exactly_the_squares() {
        let set = exceedance_set(&index_ramp_on_squares(), 0.0, 0.5).unwrap();
        assert_eq!(set, IndexSet::Squares);
    }

    #[test]
    fn periodic_inside_the_band_has_empty_exceedance() {
        let spec = SequenceSpec::Periodic(vec![1.0, 0.0]);
        let set = exceedance_set(&spec, 0.5, 0.6).unwrap();
        assert!(set.known_empty());
    }

    #[test]
    fn parity_with_fives_exceedance_shape() {
        let set = exceedance_set(&parity_with_fives(), 0.0, 0.5).unwrap();
        // odd non-squares carry 1, squares carry 5; evens off squares carry 0
        let expected = IndexSet::union_of(
            IndexSet::intersection_of(
                IndexSet::odds(),
                IndexSet::complement_of(IndexSet::Squares),
            ),
            IndexSet::Squares,
        );
        assert_eq!(set, expected);
    }

    #[test]
    fn exceedance_membership_matches_direct_evaluation() {
        assert_exceedance_matches(&index_ramp_on_squares(), 0.0, 0.5, 100_000);
        assert_exceedance_matches(&parity_with_fives(), 0.0, 0.5, 10_000);
        assert_exceedance_matches(&parity_with_fives(), 1.0, 0.25, 10_000);
        assert_exceedance_matches(&zero_one_blocks(), 0.0, 0.1, 20_000);
        assert_exceedance_matches(&SequenceSpec::Periodic(vec![1.0, 0.0, 0.5]), 0.5, 0.3, 1_000);
        assert_exceedance_matches(&SequenceSpec::Constant(7.0), 7.0, 0.1, 100);
        // linear override with a nontrivial in-band run
        let banded = SequenceSpec::overlay(
            SequenceSpec::Constant(0.0),
            vec![(
                IndexSet::evens(),
                OverrideRule::IndexValue { scale: -0.25, offset: 2.0 },
            )],
        );
        assert_exceedance_matches(&banded, 0.0, 1.0, 1_000);
        // explicit heads shift the tail's exceedances and add their own
        let fronted = SequenceSpec::explicit(
            vec![9.0, 0.1, -3.0],
            SequenceSpec::Periodic(vec![1.0, 0.0, 0.5]),
        );
        assert_exceedance_matches(&fronted, 0.5, 0.3, 1_000);
        let fronted_overlay = SequenceSpec::explicit(
            vec![2.0],
            SequenceSpec::overlay(
                SequenceSpec::Constant(0.0),
                vec![(IndexSet::ap(3, 4), OverrideRule::Constant(1.0))],
            ),
        );
        assert_exceedance_matches(&fronted_overlay, 0.0, 0.5, 1_000);
    }

    #[test]
    fn stat_limit_constant() {
        let v = stat_limit(&SequenceSpec::Constant(7.0), 10_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: 7.0 });
        assert!(v.diagnostics.symbolic);
    }

    #[test]
    fn stat_limit_alternating_is_refuted() {
        let spec = SequenceSpec::Periodic(vec![1.0, 0.0]);
        let v = stat_limit(&spec, 100_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Refuted);
        // every plausible candidate was bracketed
        for want in [0.0, 0.5, 1.0] {
            assert!(
                v.diagnostics.candidates.iter().any(|c| (c - want).abs() < 1e-9),
                "missing candidate {want}"
            );
        }
    }

    #[test]
    fn in_band_rewrites_do_not_block_convergence() {
        // The 64/8 rewrite repeats the base value, so every exceedance
        // comes from the 100/10 runs; the idle layout's boundaries sample
        // the other layout's ratios and must not veto the verdict.
        let runs = |skip: u64, keep: u64| {
            IndexSet::blocks(
                BlockLayout::new(vec![
                    LengthExpr::Pow { base: skip },
                    LengthExpr::Pow { base: keep },
                ]),
                vec![PhaseSelect::Skip, PhaseSelect::Keep],
            )
        };
        let spec = SequenceSpec::overlay(
            SequenceSpec::Constant(-0.5),
            vec![
                (runs(64, 8), OverrideRule::Constant(-0.5)),
                (runs(100, 10), OverrideRule::Constant(-1.5)),
            ],
        );
        let v = stat_limit(&spec, 100_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: -0.5 });
        assert!(v.diagnostics.symbolic);
    }

    #[test]
    fn stat_limit_ramp_on_squares() {
        let v = stat_limit(&index_ramp_on_squares(), 1_000_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: 0.0 });
        assert!(v.diagnostics.symbolic);
        let last = v.diagnostics.trajectories[0].points.last().unwrap();
        assert_eq!(last.1, 0.001); // ⌊√10⁶⌋/10⁶
    }

    #[test]
    fn stat_limit_blocks_converges_to_zero_at_deep_prefix() {
        let b4 = 101_021_210;
        let v = stat_limit(&zero_one_blocks(), b4, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: 0.0 });
        // grid rode the block boundaries where the density peaks
        let ns: Vec<u64> =
            v.diagnostics.trajectories[0].points.iter().map(|&(n, _)| n).collect();
        assert!(ns.contains(&110) && ns.contains(&10_210) && ns.contains(&b4));
    }

    #[test]
    fn stat_limit_parity_with_fives_is_refuted() {
        let v = stat_limit(&parity_with_fives(), 1_000_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Refuted);
    }

    #[test]
    fn stat_limit_streams_when_no_symbolic_form_exists() {
        let spec = telescope(&index_ramp_on_squares());
        let v = stat_limit(&spec, 200_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: 0.0 });
        assert!(!v.diagnostics.symbolic);
    }

    #[test]
    fn stat_limit_respects_supplied_candidate() {
        let v = stat_limit(
            &SequenceSpec::Constant(3.0),
            1_000,
            &default_eps_grid(),
            Some(3.0),
        );
        assert_eq!(v.status, Status::Converges { limit: 3.0 });
        assert_eq!(v.diagnostics.candidates[0], 3.0);
    }

    #[test]
    fn density_one_witnesses() {
        let eps = default_eps_grid::<f64>();
        let j = density_one_subsequence(&index_ramp_on_squares(), 0.0, &eps).unwrap();
        assert_eq!(j, IndexSet::complement_of(IndexSet::Squares));
        let spec = index_ramp_on_squares();
        for k in j.members().take(10_000) {
            assert_eq!(spec.term(k), 0.0);
        }

        let j = density_one_subsequence(&SequenceSpec::Constant(7.0), 7.0, &eps).unwrap();
        assert!(j.known_full());

        let j = density_one_subsequence(&zero_one_blocks(), 0.0, &eps).unwrap();
        assert_eq!(j, IndexSet::complement_of(ones_blocks_set()));
        let spec = zero_one_blocks();
        for k in j.members().take(10_000) {
            assert_eq!(spec.term(k), 0.0);
        }
    }

    #[test]
    fn density_one_witness_unavailable_for_alternating() {
        // exceedance sets of Periodic([1,0]) around 0 have density 1/2
        let err = density_one_subsequence(
            &SequenceSpec::Periodic(vec![1.0, 0.0]),
            0.0,
            &default_eps_grid::<f64>(),
        )
        .unwrap_err();
        assert!(err.reason.contains("density"));
    }

    #[test]
    fn telescope_matches_term_differences() {
        let specs: Vec<SequenceSpec<f64>> = vec![
            SequenceSpec::Constant(7.0),
            SequenceSpec::Periodic(vec![1.0, 0.0]),
            SequenceSpec::Periodic(vec![3.0, 1.0, 4.0, 1.0, 5.0]),
            index_ramp_on_squares(),
            zero_one_blocks(),
            parity_with_fives(),
            SequenceSpec::explicit(vec![9.0, 2.0], SequenceSpec::Periodic(vec![1.0, 0.0])),
            SequenceSpec::Sum(
                Box::new(SequenceSpec::Periodic(vec![1.0, 0.0])),
                Box::new(SequenceSpec::Constant(2.0)),
            ),
        ];
        for spec in &specs {
            let t = telescope(spec);
            for k in 1..=2_000 {
                assert_eq!(t.term(k), spec.term(k) - spec.term(k + 1), "at k={k} for {spec}");
            }
        }
        assert_eq!(telescope(&SequenceSpec::Constant(7.0)), SequenceSpec::Constant(0.0));
        assert_eq!(
            telescope(&SequenceSpec::Periodic(vec![1.0, 0.0])),
            SequenceSpec::Periodic(vec![1.0, -1.0])
        );
    }

    #[test]
    fn recenter_matches_term_shifts() {
        let specs: Vec<SequenceSpec<f64>> = vec![
            SequenceSpec::Constant(7.0),
            SequenceSpec::Periodic(vec![1.0, 0.0]),
            index_ramp_on_squares(),
            zero_one_blocks(),
            parity_with_fives(),
            SequenceSpec::explicit(vec![9.0], SequenceSpec::Constant(1.0)),
        ];
        for spec in &specs {
            for ell in [0.0, 0.5, -2.0] {
                let r = recenter(spec, ell);
                for k in 1..=2_000 {
                    assert_eq!(r.term(k), spec.term(k) - ell, "at k={k} for {spec}");
                }
            }
        }
        assert_eq!(recenter(&SequenceSpec::Constant(7.0), 7.0), SequenceSpec::Constant(0.0));
        // recentering by the limit preserves symbolic testability
        let r = recenter(&parity_with_fives(), 0.5);
        assert!(exceedance_set(&r, 0.0, 0.25).is_ok());
    }

    #[test]
    fn telescoped_ramp_still_stat_converges_to_zero() {
        let spec = telescope(&index_ramp_on_squares());
        let v = stat_limit(&spec, 1_000_000, &default_eps_grid(), None);
        assert_eq!(v.status, Status::Converges { limit: 0.0 });
    }
}
