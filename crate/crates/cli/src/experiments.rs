//! Experiment runners behind the subcommands.

use persuasion_core::model::{joint_stationary, receiver_utility, sender_utility_term};
use persuasion_core::multi_source::solve_multi_capped;
use persuasion_core::simulate::{simulate_batch, Engine};
use persuasion_core::{
    c_min, grid_oracle, ActiveSet, BestResponse, EquilibriumOutcome, Error, GridSpec,
    ProblemInstance, RatePolicy, Result, SourceParams, SourceRates,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RangeSpec, SimulateSpec};

/// Width below which a budget boundary is considered located.
pub const BOUNDARY_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    /// 1-based source label.
    pub source: usize,
    pub lambda: f64,
    pub mu: f64,
    pub s: f64,
    pub c: f64,
    pub c_min: f64,
    pub response: BestResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub q: f64,
    pub budget: f64,
    pub budget_usage: f64,
    pub active_set: ActiveSet,
    pub sender_utility: f64,
    pub receiver_utility: f64,
    pub sources: Vec<SourceReport>,
}

pub fn run_solve(instance: &ProblemInstance, max_sources: usize) -> Result<SolveReport> {
    let outcome = solve_multi_capped(instance, max_sources)?;
    Ok(solve_report(instance, &outcome))
}

fn solve_report(instance: &ProblemInstance, outcome: &EquilibriumOutcome) -> SolveReport {
    let c_mins = instance.c_mins();
    let sources = instance
        .sources()
        .iter()
        .enumerate()
        .map(|(i, src)| SourceReport {
            source: i + 1,
            lambda: src.lambda(),
            mu: src.mu(),
            s: outcome.policy.rates[i].s,
            c: outcome.policy.rates[i].c,
            c_min: c_mins[i],
            response: outcome.responses[i],
        })
        .collect();
    SolveReport {
        q: instance.q(),
        budget: instance.budget(),
        budget_usage: outcome.budget_usage(),
        active_set: ActiveSet::from_indices(outcome.active_set.iter().copied()),
        sender_utility: outcome.sender_utility,
        receiver_utility: outcome.receiver_utility,
        sources,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub budget: f64,
    pub sender_utility: f64,
    pub receiver_utility: f64,
    pub active_set: ActiveSet,
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

/// A budget at which the optimal active set changes, located to within
/// [`BOUNDARY_RESOLUTION`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boundary {
    pub from: ActiveSet,
    pub to: ActiveSet,
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSweep {
    pub rows: Vec<BudgetRow>,
    pub boundaries: Vec<Boundary>,
}

impl BudgetSweep {
    /// Consecutive distinct non-empty active sets, in budget order.
    pub fn active_set_sequence(&self) -> Vec<ActiveSet> {
        let mut seq: Vec<ActiveSet> = Vec::new();
        for row in &self.rows {
            if !row.active_set.is_empty() && seq.last() != Some(&row.active_set) {
                seq.push(row.active_set);
            }
        }
        seq
    }
}

fn active_set_at(instance: &ProblemInstance, budget: f64, max_sources: usize) -> Result<ActiveSet> {
    let out = solve_multi_capped(&instance.with_budget(budget)?, max_sources)?;
    Ok(ActiveSet::from_indices(out.active_set))
}

pub fn sweep_budget(instance: &ProblemInstance, grid: &RangeSpec, max_sources: usize) -> Result<BudgetSweep> {
    let rows = grid
        .points()
        .into_par_iter()
        .map(|budget| {
            let out = solve_multi_capped(&instance.with_budget(budget)?, max_sources)?;
            Ok(BudgetRow {
                budget,
                sender_utility: out.sender_utility,
                receiver_utility: out.receiver_utility,
                active_set: ActiveSet::from_indices(out.active_set.iter().copied()),
                s: out.policy.rates.iter().map(|r| r.s).collect(),
                c: out.policy.rates.iter().map(|r| r.c).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let boundaries = rows
        .windows(2)
        .filter(|w| w[0].active_set != w[1].active_set)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|w| {
            let from = w[0].active_set;
            let (mut lo, mut hi) = (w[0].budget, w[1].budget);
            while hi - lo > BOUNDARY_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if active_set_at(instance, mid, max_sources)? == from {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(Boundary {
                from,
                to: w[1].active_set,
                lower: lo,
                upper: hi,
                estimate: 0.5 * (lo + hi),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BudgetSweep { rows, boundaries })
}

/// Skewed profile `mu_i = 1 + (total - n) k^i / sum_j k^j`, `i = 1..n`.
pub fn heterogeneity_profile(n: usize, total: f64, k: f64) -> Result<Vec<f64>> {
    if n == 0 || !(total > n as f64) || !total.is_finite() {
        return Err(Error::InvalidProfile(format!(
            "need n >= 1 and total > n (n = {n}, total = {total})"
        )));
    }
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::InvalidProfile(format!("skew k = {k} must lie in (0, 1]")));
    }
    let weights: Vec<f64> = (1..=n).map(|i| k.powi(i as i32)).collect();
    let norm: f64 = weights.iter().sum();
    let spread = total - n as f64;
    Ok(weights.iter().map(|w| 1.0 + spread * w / norm).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeterogeneityRow {
    pub k: f64,
    pub mu: Vec<f64>,
    pub sender_utility: f64,
    pub receiver_utility: f64,
    pub active_set: ActiveSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterogeneityParams {
    pub n: usize,
    pub total: f64,
    pub lambda: f64,
    pub q: f64,
    pub budget: f64,
}

pub fn sweep_heterogeneity(
    params: &HeterogeneityParams,
    k_grid: &RangeSpec,
    max_sources: usize,
) -> Result<Vec<HeterogeneityRow>> {
    k_grid
        .points()
        .into_par_iter()
        .map(|k| {
            let mu = heterogeneity_profile(params.n, params.total, k)?;
            let sources = mu
                .iter()
                .map(|&m| SourceParams::new(params.lambda, m))
                .collect::<Result<Vec<_>>>()?;
            let instance = ProblemInstance::new(sources, params.q, params.budget)?;
            let out = solve_multi_capped(&instance, max_sources)?;
            Ok(HeterogeneityRow {
                k,
                mu,
                sender_utility: out.sender_utility,
                receiver_utility: instance.receiver_benchmark(),
                active_set: ActiveSet::from_indices(out.active_set),
            })
        })
        .collect()
}

/// Empirical vs closed-form statistics for one simulated source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub source: usize,
    pub engine: Engine,
    pub replication: u64,
    pub s: f64,
    pub c: f64,
    pub occupancy: [f64; 4],
    pub occupancy_closed_form: [f64; 4],
    pub sender_utility_hat: f64,
    pub sender_utility_closed_form: f64,
    pub receiver_utility_hat: f64,
    pub receiver_utility_closed_form: f64,
    pub horizon: f64,
    pub seed: u64,
    pub events: u64,
}

/// Simulates every source with a non-zero policy using both engines.
/// Sources under the all-zero policy are skipped: the receiver ignores them
/// and their utilities are known in closed form.
pub fn run_simulation(
    instance: &ProblemInstance,
    policy: Option<&[SourceRates]>,
    spec: &SimulateSpec,
    max_sources: usize,
) -> Result<Vec<SimulationRecord>> {
    let policy: RatePolicy = match policy {
        Some(rates) => RatePolicy {
            rates: rates.to_vec(),
        },
        None => solve_multi_capped(instance, max_sources)?.policy,
    };
    let q = instance.q();

    let mut records = Vec::new();
    for (i, (src, rates)) in instance.sources().iter().zip(&policy.rates).enumerate() {
        if rates.total() == 0.0 {
            continue;
        }
        let pi = joint_stationary(src, rates.s, rates.c)?;
        let sender = sender_utility_term(src, rates.s, rates.c)?;
        let receiver = receiver_utility(src, q, rates.s, rates.c)?;
        // per-source seed offset keeps sources on independent streams
        let seed = spec.seed.wrapping_add(i as u64);
        for engine in [Engine::Joint, Engine::Physical] {
            let runs = simulate_batch(engine, src, q, rates.s, rates.c, spec.horizon, seed, spec.replications)?;
            for (r, run) in runs.into_iter().enumerate() {
                records.push(SimulationRecord {
                    source: i + 1,
                    engine,
                    replication: r as u64,
                    s: rates.s,
                    c: rates.c,
                    occupancy: run.occupancy,
                    occupancy_closed_form: pi.as_array(),
                    sender_utility_hat: run.sender_utility_hat,
                    sender_utility_closed_form: sender,
                    receiver_utility_hat: run.receiver_utility_hat,
                    receiver_utility_closed_form: receiver,
                    horizon: run.horizon,
                    seed: run.seed,
                    events: run.events,
                });
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub step: f64,
    pub oracle_utility: f64,
    pub oracle_policy: Vec<SourceRates>,
    pub solver_utility: f64,
    pub gap: f64,
    pub evaluated: usize,
}

pub fn run_oracle(instance: &ProblemInstance, grid: &GridSpec) -> Result<OracleReport> {
    for src in instance.sources() {
        c_min(src, instance.q())?;
    }
    let oracle = grid_oracle(instance, grid)?;
    let solver = solve_multi_capped(instance, grid.max_sources.max(1))?;
    Ok(OracleReport {
        step: grid.step,
        oracle_utility: oracle.utility,
        oracle_policy: oracle.policy.rates,
        solver_utility: solver.sender_utility,
        gap: solver.sender_utility - oracle.utility,
        evaluated: oracle.evaluated,
    })
}
