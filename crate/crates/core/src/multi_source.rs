//! Optimal sampling across several sources under a shared rate budget.
//!
//! An optimal policy either leaves a source untouched (`s = c = 0`) or pays
//! exactly its `c_min` on state 0 and a strictly positive `s` on state 1.
//! So the search runs over active sets: for a fixed set the remaining budget
//! is split by water-filling on a common dual level `theta`, found by
//! bisection, and the best set is picked exhaustively. Sets whose
//! water-filling leaves a member at `s = 0` are discarded, since paying
//! `c_min` for nothing can never be optimal.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    receiver_default_utility, receiver_utility, sender_utility_term, BestResponse,
    ProblemInstance, RatePolicy, SourceParams, SourceRates,
};
use crate::single_source::EquilibriumOutcome;

/// Absolute tolerance on `sum s_i - residual` at which bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-9;
pub const MAX_BISECTION_ITERATIONS: usize = 200;
/// Members whose water-filled rate is at or below this are treated as zero.
pub const ZERO_RATE_TOLERANCE: f64 = 1e-9;
/// Default cap on the number of sources for the exhaustive search.
pub const DEFAULT_MAX_SOURCES: usize = 20;

/// A subset of source indices, stored as a bitmask (bit `i` is source `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ActiveSet(u32);

impl ActiveSet {
    pub const EMPTY: ActiveSet = ActiveSet(0);

    pub fn from_mask(mask: u32) -> Self {
        Self(mask)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Self(indices.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 32 && self.0 & (1 << index) != 0
    }

    /// Member indices in increasing order (0-based).
    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.0 & (1 << i) != 0)
    }

    /// Member indices counted from 1, as sources are usually labelled.
    pub fn labels(self) -> Vec<usize> {
        self.members().map(|i| i + 1).collect()
    }
}

impl fmt::Display for ActiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, label) in self.labels().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{label}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for ActiveSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.labels())
    }
}

/// Per-source constants of the water-filling rule
/// `s = c * (sqrt(a / (b * theta)) - 1)^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaterFillConstants {
    /// `lambda (c_min + mu + lambda)`
    pub a: f64,
    /// `c_min mu (lambda + mu)`
    pub b: f64,
    /// `c_min mu / (lambda + c_min)`
    pub c: f64,
}

impl WaterFillConstants {
    pub fn new(source: &SourceParams, c_min: f64) -> Self {
        let (l, m) = (source.lambda(), source.mu());
        Self {
            a: l * (c_min + m + l),
            b: c_min * m * (l + m),
            c: c_min * m / (l + c_min),
        }
    }

    /// Dual level at and above which this source gets no rate.
    pub fn cutoff(&self) -> f64 {
        self.a / self.b
    }

    fn rate_at(&self, theta: f64) -> f64 {
        (self.c * ((self.a / (self.b * theta)).sqrt() - 1.0)).max(0.0)
    }
}

/// State-1 rates for every source at dual level `theta`.
pub fn water_fill_s(constants: &[WaterFillConstants], theta: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta(theta));
    }
    Ok(constants.iter().map(|k| k.rate_at(theta)).collect())
}

fn total_rate(constants: &[WaterFillConstants], theta: f64) -> f64 {
    constants.iter().map(|k| k.rate_at(theta)).sum()
}

/// Dual level at which the water-filled rates use up `residual_budget`.
///
/// The total rate is continuous and strictly decreasing on
/// `(0, max cutoff)`, vanishing at the upper end, so plain bisection on that
/// bracket converges. The lower end starts at `1e-12` and shrinks
/// geometrically until the total exceeds the residual.
pub fn bisect_theta(constants: &[WaterFillConstants], residual_budget: f64) -> Result<f64> {
    if !(residual_budget > 0.0) || !residual_budget.is_finite() {
        return Err(Error::InfeasibleResidual(residual_budget));
    }
    if constants.is_empty() {
        return Err(Error::InvalidInstance(
            "water-filling needs at least one source".into(),
        ));
    }

    let mut hi = constants
        .iter()
        .map(WaterFillConstants::cutoff)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = 1e-12_f64.min(hi * 0.5);
    while total_rate(constants, lo) <= residual_budget {
        lo *= 1e-3;
        if lo == 0.0 {
            return Err(Error::BisectionDiverged {
                iterations: 0,
                residual: residual_budget,
            });
        }
    }

    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let total = total_rate(constants, mid);
        residual = total - residual_budget;
        if residual.abs() <= BISECTION_TOLERANCE {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionDiverged {
        iterations: MAX_BISECTION_ITERATIONS,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Feasible,
    /// The members' `c_min` already use the whole budget.
    Infeasible,
    /// Water-filling left some member with `s = 0`; never globally optimal.
    Pruned,
}

/// Best allocation restricted to one active set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSolution {
    pub active_set: ActiveSet,
    /// State-1 rate of each member, in member order. Empty when infeasible.
    pub s: Vec<f64>,
    /// Dual level; 0 when infeasible.
    pub theta: f64,
    pub utility: f64,
    pub status: CandidateStatus,
}

impl CandidateSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == CandidateStatus::Feasible
    }

    fn infeasible(active_set: ActiveSet) -> Self {
        Self {
            active_set,
            s: Vec::new(),
            theta: 0.0,
            utility: 0.0,
            status: CandidateStatus::Infeasible,
        }
    }

    /// Total order used to pick the winner: higher utility, then fewer
    /// members, then the smaller bitmask.
    fn preference(&self, other: &Self) -> Ordering {
        self.utility
            .total_cmp(&other.utility)
            .then_with(|| other.active_set.len().cmp(&self.active_set.len()))
            .then_with(|| other.active_set.mask().cmp(&self.active_set.mask()))
    }
}

/// Water-filling solution of the problem restricted to `set`.
pub fn solve_active_set(instance: &ProblemInstance, set: ActiveSet) -> Result<CandidateSolution> {
    let n = instance.len();
    if let Some(bad) = set.members().find(|&i| i >= n) {
        return Err(Error::InvalidInstance(format!(
            "active set member {} out of range for {n} sources",
            bad + 1
        )));
    }
    if set.is_empty() {
        return Ok(CandidateSolution::infeasible(set));
    }

    let c_mins = instance.c_mins();
    let sources = instance.sources();
    let committed: f64 = set.members().map(|i| c_mins[i]).sum();
    let residual = instance.budget() - committed;
    if !(residual > 0.0) {
        return Ok(CandidateSolution::infeasible(set));
    }

    let constants: Vec<_> = set
        .members()
        .map(|i| WaterFillConstants::new(&sources[i], c_mins[i]))
        .collect();
    let theta = bisect_theta(&constants, residual)?;
    let s = water_fill_s(&constants, theta)?;

    let mut utility = 0.0;
    for (i, &rate) in set.members().zip(&s) {
        utility += sender_utility_term(&sources[i], rate, c_mins[i])?;
    }
    let status = if s.iter().any(|&rate| rate <= ZERO_RATE_TOLERANCE) {
        CandidateStatus::Pruned
    } else {
        CandidateStatus::Feasible
    };

    Ok(CandidateSolution {
        active_set: set,
        s,
        theta,
        utility,
        status,
    })
}

/// Every active-set candidate for `instance`, in bitmask order. Mostly useful
/// for inspection; [`solve_multi`] does not materialize this list.
pub fn enumerate_candidates(instance: &ProblemInstance) -> Result<Vec<CandidateSolution>> {
    check_size(instance.len(), DEFAULT_MAX_SOURCES)?;
    (1..(1u32 << instance.len()))
        .into_par_iter()
        .map(|mask| solve_active_set(instance, ActiveSet::from_mask(mask)))
        .collect()
}

fn check_size(n: usize, max_sources: usize) -> Result<()> {
    if n > max_sources || n > 31 {
        return Err(Error::TooLarge(format!(
            "exhaustive active-set search over {n} sources exceeds the cap of {max_sources}"
        )));
    }
    Ok(())
}

/// Optimal policy for `instance` with the default source cap.
pub fn solve_multi(instance: &ProblemInstance) -> Result<EquilibriumOutcome> {
    solve_multi_capped(instance, DEFAULT_MAX_SOURCES)
}

/// Optimal policy, rejecting instances with more than `max_sources` sources.
pub fn solve_multi_capped(instance: &ProblemInstance, max_sources: usize) -> Result<EquilibriumOutcome> {
    let n = instance.len();
    check_size(n, max_sources)?;

    let min_c_min = instance.c_mins().into_iter().fold(f64::INFINITY, f64::min);
    if instance.budget() < min_c_min {
        return Ok(silent_outcome(instance));
    }

    let best = (1..(1u32 << n))
        .into_par_iter()
        .map(|mask| solve_active_set(instance, ActiveSet::from_mask(mask)))
        .filter(|cand| !matches!(cand, Ok(c) if !c.is_feasible()))
        .try_reduce_with(|a, b| {
            Ok(if a.preference(&b) == Ordering::Less { b } else { a })
        })
        .transpose()?;

    match best {
        None => Ok(silent_outcome(instance)),
        Some(cand) => expand(instance, &cand),
    }
}

/// Outcome when the sender samples nothing and the receiver defaults everywhere.
fn silent_outcome(instance: &ProblemInstance) -> EquilibriumOutcome {
    let n = instance.len();
    EquilibriumOutcome {
        policy: RatePolicy::zeros(n),
        responses: vec![BestResponse::Default; n],
        sender_utility: 0.0,
        receiver_utility: instance.receiver_benchmark(),
        active_set: Vec::new(),
    }
}

fn expand(instance: &ProblemInstance, cand: &CandidateSolution) -> Result<EquilibriumOutcome> {
    let n = instance.len();
    let q = instance.q();
    let c_mins = instance.c_mins();
    let mut policy = RatePolicy::zeros(n);
    let mut responses = vec![BestResponse::Default; n];
    for (i, &s) in cand.active_set.members().zip(&cand.s) {
        policy.rates[i] = SourceRates { s, c: c_mins[i] };
        responses[i] = BestResponse::FollowSender;
    }

    let mut receiver = 0.0;
    for (i, source) in instance.sources().iter().enumerate() {
        receiver += if cand.active_set.contains(i) {
            let r = policy.rates[i];
            receiver_utility(source, q, r.s, r.c)?
        } else {
            receiver_default_utility(source, q)
        };
    }

    Ok(EquilibriumOutcome {
        policy,
        responses,
        sender_utility: cand.utility,
        receiver_utility: receiver,
        active_set: cand.active_set.members().collect(),
    })
}
