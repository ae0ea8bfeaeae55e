//! Exact equilibrium of the one-source game.

use serde::Serialize;

use crate::error::Result;
use crate::model::{
    c_min, receiver_default_utility, receiver_utility, BestResponse, RatePolicy, SourceParams,
    SourceRates,
};

/// The sender's optimal commitment together with the receiver's reaction and
/// the resulting long-run utilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    pub policy: RatePolicy,
    pub responses: Vec<BestResponse>,
    /// Expected long-run number of sources whose estimate reads 1.
    pub sender_utility: f64,
    pub receiver_utility: f64,
    /// 0-based indices of sources with `s > 0`.
    pub active_set: Vec<usize>,
}

impl EquilibriumOutcome {
    pub fn budget_usage(&self) -> f64 {
        self.policy.budget_usage()
    }
}

/// Equilibrium for a single source with budget `budget`.
///
/// Below `c_min` the receiver cannot be persuaded and the sender samples
/// nothing. Otherwise the sender pays exactly `c_min` on state 0 and puts
/// the rest of the budget on state 1. At `budget == c_min` this yields
/// `(0, c_min)` with zero sender utility.
pub fn solve_single(source: &SourceParams, q: f64, budget: f64) -> Result<EquilibriumOutcome> {
    let c_min = c_min(source, q)?;
    let budget = crate::model::check_rate("budget", budget)?;

    if budget < c_min {
        return Ok(EquilibriumOutcome {
            policy: RatePolicy::zeros(1),
            responses: vec![BestResponse::Default],
            sender_utility: 0.0,
            receiver_utility: receiver_default_utility(source, q),
            active_set: Vec::new(),
        });
    }

    let (l, m) = (source.lambda(), source.mu());
    let c_bar = budget - c_min;
    let sender_utility = l * c_bar * (c_min + l + m) / ((m + l) * (m * c_min + l * c_bar + c_min * c_bar));
    let active_set = if c_bar > 0.0 { vec![0] } else { Vec::new() };

    Ok(EquilibriumOutcome {
        policy: RatePolicy {
            rates: vec![SourceRates { s: c_bar, c: c_min }],
        },
        responses: vec![BestResponse::FollowSender],
        sender_utility,
        receiver_utility: receiver_utility(source, q, c_bar, c_min)?,
        active_set,
    })
}
