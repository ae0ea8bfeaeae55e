//! Brute-force grid maximizer of the game value.
//!
//! Every source gets a lattice of `(s, c)` pairs with spacing `step`, with
//! `c_min` added to the `c` axis since the optimum sits exactly there. Each
//! point is scored with the receiver's best response applied explicitly
//! (zero sender utility whenever the receiver defaults), so the analytical
//! reduction to active sets is checked rather than assumed.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    best_response, sender_utility_term, BestResponse, ProblemInstance, RatePolicy, SourceParams,
    SourceRates,
};

/// Largest number of lattice steps allowed along one axis.
pub const MAX_STEPS_PER_AXIS: f64 = 1e4;
const MAX_TABLE_ENTRIES: usize = 20_000_000;
const MAX_COMBINATIONS: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub step: f64,
    pub max_sources: usize,
}

impl GridSpec {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            max_sources: 2,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::new(0.01)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub policy: RatePolicy,
    pub utility: f64,
    /// Number of grid points scored across all sources' tables.
    pub evaluated: usize,
}

/// All scored `(s, c)` points of one source, sorted by budget cost, with a
/// running argmax so "best point costing at most b" is a binary search.
struct SourceTable {
    points: Vec<Point>,
    best_upto: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    rates: SourceRates,
    cost: f64,
    utility: f64,
}

fn lex_cmp(a: &SourceRates, b: &SourceRates) -> Ordering {
    a.s.total_cmp(&b.s).then(a.c.total_cmp(&b.c))
}

fn gated_utility(source: &SourceParams, q: f64, s: f64, c: f64) -> Result<f64> {
    match best_response(source, q, s, c)? {
        BestResponse::FollowSender => sender_utility_term(source, s, c),
        BestResponse::Default => Ok(0.0),
    }
}

fn lattice(budget: f64, step: f64) -> Vec<f64> {
    let steps = (budget / step + 1e-9).floor() as usize;
    (0..=steps)
        .map(|k| k as f64 * step)
        .filter(|&v| v <= budget)
        .collect()
}

impl SourceTable {
    fn build(source: &SourceParams, q: f64, c_min: f64, budget: f64, step: f64) -> Result<Self> {
        let s_axis = lattice(budget, step);
        let mut c_axis = s_axis.clone();
        if c_min <= budget && !c_axis.contains(&c_min) {
            c_axis.push(c_min);
            c_axis.sort_by(f64::total_cmp);
        }

        let estimate = s_axis.len() * c_axis.len() / 2 + c_axis.len();
        if estimate > MAX_TABLE_ENTRIES {
            return Err(Error::TooLarge(format!(
                "oracle table of ~{estimate} points exceeds {MAX_TABLE_ENTRIES}"
            )));
        }

        let mut points = Vec::with_capacity(estimate);
        for &s in &s_axis {
            for &c in &c_axis {
                let cost = s + c;
                if cost > budget {
                    break;
                }
                points.push(Point {
                    rates: SourceRates { s, c },
                    cost,
                    utility: gated_utility(source, q, s, c)?,
                });
            }
        }
        points.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(lex_cmp(&a.rates, &b.rates)));

        let mut best_upto = Vec::with_capacity(points.len());
        let mut best = 0;
        for (k, p) in points.iter().enumerate() {
            let cur = &points[best];
            if p.utility > cur.utility
                || (p.utility == cur.utility && lex_cmp(&p.rates, &cur.rates) == Ordering::Less)
            {
                best = k;
            }
            best_upto.push(best);
        }
        Ok(Self { points, best_upto })
    }

    /// Best point whose cost does not exceed `remaining`.
    fn best_within(&self, remaining: f64) -> Option<&Point> {
        let count = self.points.partition_point(|p| p.cost <= remaining);
        (count > 0).then(|| &self.points[self.best_upto[count - 1]])
    }
}

/// Maximizes the gated sender utility over the grid.
pub fn grid_oracle(instance: &ProblemInstance, grid: &GridSpec) -> Result<OracleSolution> {
    let n = instance.len();
    if !(grid.step > 0.0) || !grid.step.is_finite() || grid.max_sources == 0 {
        return Err(Error::InvalidInstance(format!(
            "grid step must be positive and max_sources >= 1 (step = {}, max_sources = {})",
            grid.step, grid.max_sources
        )));
    }
    if n > grid.max_sources {
        return Err(Error::TooLarge(format!(
            "oracle limited to {} sources, instance has {n}",
            grid.max_sources
        )));
    }
    let budget = instance.budget();
    if budget / grid.step > MAX_STEPS_PER_AXIS {
        return Err(Error::TooLarge(format!(
            "budget / step = {} exceeds {MAX_STEPS_PER_AXIS}",
            budget / grid.step
        )));
    }

    let q = instance.q();
    let c_mins = instance.c_mins();
    let tables = instance
        .sources()
        .iter()
        .zip(&c_mins)
        .map(|(src, &c_min)| SourceTable::build(src, q, c_min, budget, grid.step))
        .collect::<Result<Vec<_>>>()?;
    let evaluated = tables.iter().map(|t| t.points.len()).sum();

    let combos: f64 = tables[..n - 1].iter().map(|t| t.points.len() as f64).product();
    if combos > MAX_COMBINATIONS {
        return Err(Error::TooLarge(format!(
            "oracle enumeration of {combos:.3e} combinations exceeds {MAX_COMBINATIONS:e}"
        )));
    }

    let (outer, last) = tables.split_at(n - 1);
    let best = search(outer, &last[0], budget);
    let (picks, utility) = best.expect("the all-zero point is always on the grid");

    Ok(OracleSolution {
        policy: RatePolicy {
            rates: picks.iter().map(|p| p.rates).collect(),
        },
        utility,
        evaluated,
    })
}

type Pick = (Vec<Point>, f64);

fn better(a: Option<Pick>, b: Option<Pick>) -> Option<Pick> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.1 > a.1 { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn search(outer: &[SourceTable], last: &SourceTable, remaining: f64) -> Option<Pick> {
    match outer.split_first() {
        None => last.best_within(remaining).map(|p| (vec![*p], p.utility)),
        Some((head, rest)) => {
            let mut order: Vec<&Point> = head.points.iter().filter(|p| p.cost <= remaining).collect();
            order.sort_by(|a, b| lex_cmp(&a.rates, &b.rates));
            let explore = |p: &&Point| {
                search(rest, last, remaining - p.cost).map(|(mut tail, u)| {
                    tail.insert(0, **p);
                    (tail, u + p.utility)
                })
            };
            // `reduce` keeps the earlier (lexicographically smaller) point on ties.
            if rest.is_empty() {
                order
                    .par_iter()
                    .map(explore)
                    .reduce(|| None, better)
            } else {
                order.iter().map(explore).fold(None, better)
            }
        }
    }
}
