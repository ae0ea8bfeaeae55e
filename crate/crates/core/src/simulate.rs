//! Monte-Carlo estimates of the long-run occupancy and utilities.
//!
//! Two independent constructions of the same process:
//!
//! * [`simulate_joint`] runs the four-state (state, estimate) chain directly
//!   with exponential sojourns.
//! * [`simulate_physical`] draws the source trajectory first, then scatters
//!   Poisson sampling instants over each sojourn at the rate of the current
//!   state, and lets the receiver hold the last sampled value.
//!
//! Both integrate occupancy times exactly (no time grid) and discard the
//! first [`BURN_IN_FRACTION`] of the horizon.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; replication `r` of a
//! batch uses stream `r` of that seed (see [`replication_rng`]). Exponential
//! variates are drawn by inverse transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_rate, prior_distribution, SourceParams};

pub const BURN_IN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Empirical time fractions `[p00, p01, p10, p11]`, indexed by
    /// `2 * state + estimate`.
    pub occupancy: [f64; 4],
    pub sender_utility_hat: f64,
    pub receiver_utility_hat: f64,
    pub horizon: f64,
    pub events: u64,
    pub seed: u64,
}

/// Which chain a batch replication should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Joint,
    Physical,
}

/// Generator for replication `replication` derived from `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn check_horizon(horizon: f64) -> Result<f64> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(horizon)
    } else {
        Err(Error::NonPositiveHorizon(horizon))
    }
}

fn draw_initial_state(source: &SourceParams, rng: &mut ChaCha8Rng) -> u8 {
    let (_, pi1) = prior_distribution(source);
    u8::from(rng.random::<f64>() < pi1)
}

/// Accumulates time spent in each (state, estimate) cell after burn-in.
struct Occupancy {
    burn_in: f64,
    horizon: f64,
    time: [f64; 4],
}

impl Occupancy {
    fn new(horizon: f64) -> Self {
        Self {
            burn_in: horizon * BURN_IN_FRACTION,
            horizon,
            time: [0.0; 4],
        }
    }

    /// Credit the interval `[from, to)` to cell `(state, estimate)`.
    fn add(&mut self, state: u8, estimate: u8, from: f64, to: f64) {
        let lo = from.max(self.burn_in);
        let hi = to.min(self.horizon);
        if hi > lo {
            self.time[usize::from(2 * state + estimate)] += hi - lo;
        }
    }

    fn finish(self, q: f64, events: u64, seed: u64) -> SimulationResult {
        let total: f64 = self.time.iter().sum();
        let occupancy = self.time.map(|t| t / total);
        SimulationResult {
            occupancy,
            sender_utility_hat: occupancy[1] + occupancy[3],
            receiver_utility_hat: q * occupancy[0] + (1.0 - q) * occupancy[3],
            horizon: self.horizon,
            events,
            seed,
        }
    }
}

fn check_inputs(q: f64, s: f64, c: f64, horizon: f64) -> Result<f64> {
    check_rate("s", s)?;
    check_rate("c", c)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInstance(format!("receiver weight q = {q} must lie in (0, 1)")));
    }
    check_horizon(horizon)
}

/// Simulates the joint (state, estimate) chain.
pub fn simulate_joint(
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
) -> Result<SimulationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_joint(source, q, s, c, horizon, seed, &mut rng)
}

fn run_joint(
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<SimulationResult> {
    let horizon = check_inputs(q, s, c, horizon)?;
    if s == 0.0 && c == 0.0 {
        return Err(Error::DegenerateRates);
    }
    let (l, m) = (source.lambda(), source.mu());

    let x0 = draw_initial_state(source, rng);
    let (mut state, mut estimate) = (x0, x0);
    let mut occ = Occupancy::new(horizon);
    let mut now = 0.0;
    let mut events = 0u64;

    // Sampling that reports the current estimate back is a self-loop and is
    // left out of the exit rates.
    while now < horizon {
        let (exit, next) = match (state, estimate) {
            (0, 0) => (l, None),
            (1, 0) => (m + s, Some((m, (0u8, 0u8), (1u8, 1u8)))),
            (1, 1) => (m, None),
            (0, 1) => (c + l, Some((c, (0, 0), (1, 1)))),
            _ => unreachable!(),
        };
        let dwell = exponential(rng, exit);
        occ.add(state, estimate, now, now + dwell);
        now += dwell;
        events += 1;
        (state, estimate) = match (state, estimate, next) {
            (0, 0, _) => (1, 0),
            (1, 1, _) => (0, 1),
            (_, _, Some((first_rate, first, second))) => {
                if rng.random::<f64>() * exit < first_rate {
                    first
                } else {
                    second
                }
            }
            _ => unreachable!(),
        };
    }
    Ok(occ.finish(q, events, seed))
}

/// Simulates the source and the sampling process separately and derives the
/// receiver's estimate from the sampled values.
pub fn simulate_physical(
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
) -> Result<SimulationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_physical(source, q, s, c, horizon, seed, None, &mut rng)
}

/// [`simulate_physical`] with the initial source state forced to `initial`
/// (0 or 1) instead of drawn from the prior.
pub fn simulate_physical_from(
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
    initial: u8,
) -> Result<SimulationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_physical(source, q, s, c, horizon, seed, Some(initial.min(1)), &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn run_physical(
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
    initial: Option<u8>,
    rng: &mut ChaCha8Rng,
) -> Result<SimulationResult> {
    let horizon = check_inputs(q, s, c, horizon)?;
    let (l, m) = (source.lambda(), source.mu());

    let mut state = initial.unwrap_or_else(|| draw_initial_state(source, rng));
    let mut estimate = state;
    let mut occ = Occupancy::new(horizon);
    let mut now = 0.0;
    let mut events = 0u64;

    while now < horizon {
        let (flip_rate, sample_rate) = if state == 1 { (m, s) } else { (l, c) };
        let end = now + exponential(rng, flip_rate);

        // Only the first sample in a sojourn can change the estimate; later
        // ones report the same state again.
        let mut cursor = now;
        if sample_rate > 0.0 {
            let mut t = now + exponential(rng, sample_rate);
            if t < end {
                occ.add(state, estimate, cursor, t);
                estimate = state;
                cursor = t;
                events += 1;
                while t < end && t < horizon {
                    t += exponential(rng, sample_rate);
                    events += u64::from(t < end);
                }
            }
        }
        occ.add(state, estimate, cursor, end);

        now = end;
        state = 1 - state;
        events += 1;
    }
    Ok(occ.finish(q, events, seed))
}

/// Runs `replications` independent copies in parallel; replication `r`
/// uses [`replication_rng`]`(seed, r)`. Results are in replication order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_batch(
    engine: Engine,
    source: &SourceParams,
    q: f64,
    s: f64,
    c: f64,
    horizon: f64,
    seed: u64,
    replications: u64,
) -> Result<Vec<SimulationResult>> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            match engine {
                Engine::Joint => run_joint(source, q, s, c, horizon, seed, &mut rng),
                Engine::Physical => run_physical(source, q, s, c, horizon, seed, None, &mut rng),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::joint_stationary;

    fn src(lambda: f64, mu: f64) -> SourceParams {
        SourceParams::new(lambda, mu).unwrap()
    }

    fn assert_close(got: &[f64; 4], want: &[f64; 4], tol: f64) {
        for k in 0..4 {
            assert!(
                (got[k] - want[k]).abs() <= tol,
                "component {k}: got {got:?}, want {want:?}"
            );
        }
    }

    #[test]
    fn joint_symmetric_chain() {
        let r = simulate_joint(&src(1.0, 1.0), 0.5, 1.0, 1.0, 1e6, 42).unwrap();
        assert_close(&r.occupancy, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0], 0.01);
        assert!((r.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.sender_utility_hat, r.occupancy[1] + r.occupancy[3]);
    }

    #[test]
    fn joint_without_state1_sampling_absorbs_estimate() {
        let r = simulate_joint(&src(1.0, 2.0), 0.5, 0.0, 1.0, 1e5, 3).unwrap();
        assert_eq!(r.occupancy[1], 0.0);
        assert_eq!(r.occupancy[3], 0.0);
        assert_close(&r.occupancy, &[2.0 / 3.0, 0.0, 1.0 / 3.0, 0.0], 0.01);
    }

    #[test]
    fn joint_sender_utility() {
        let r = simulate_joint(&src(1.0, 2.0), 0.5, 2.0, 1.0, 1e6, 7).unwrap();
        assert!((r.sender_utility_hat - 4.0 / 9.0).abs() < 0.01);
        assert!((r.receiver_utility_hat - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn physical_matches_joint() {
        let source = src(1.0, 1.0);
        let a = simulate_joint(&source, 0.5, 1.0, 1.0, 1e6, 42).unwrap();
        let b = simulate_physical(&source, 0.5, 1.0, 1.0, 1e6, 42).unwrap();
        assert_close(&a.occupancy, &b.occupancy, 0.015);
    }

    #[test]
    fn physical_is_deterministic() {
        let source = src(1.0, 1.0);
        let a = simulate_physical(&source, 0.5, 1.0, 1.0, 1e4, 42).unwrap();
        let b = simulate_physical(&source, 0.5, 1.0, 1.0, 1e4, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_physical(&source, 0.5, 1.0, 1.0, 1e4, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn horizon_must_be_positive() {
        let source = src(1.0, 1.0);
        assert_eq!(
            simulate_physical(&source, 0.5, 1.0, 1.0, 0.0, 1),
            Err(Error::NonPositiveHorizon(0.0))
        );
        assert!(matches!(
            simulate_joint(&source, 0.5, 1.0, 1.0, -1.0, 1),
            Err(Error::NonPositiveHorizon(_))
        ));
        assert_eq!(
            simulate_joint(&source, 0.5, 0.0, 0.0, 10.0, 1),
            Err(Error::DegenerateRates)
        );
    }

    #[test]
    fn physical_without_sampling_freezes_estimate() {
        let source = src(1.0, 2.0);
        let r = simulate_physical_from(&source, 0.5, 0.0, 0.0, 1e4, 5, 0).unwrap();
        assert_eq!(r.occupancy[1] + r.occupancy[3], 0.0);
        let r = simulate_physical_from(&source, 0.5, 0.0, 0.0, 1e4, 5, 1).unwrap();
        assert_eq!(r.occupancy[0] + r.occupancy[2], 0.0);
    }

    #[test]
    fn batch_replications_differ_and_are_ordered() {
        let source = src(1.0, 2.0);
        let runs = simulate_batch(Engine::Joint, &source, 0.5, 2.0, 1.0, 1e4, 9, 4).unwrap();
        assert_eq!(runs.len(), 4);
        assert_ne!(runs[0].occupancy, runs[1].occupancy);
        let again = simulate_batch(Engine::Joint, &source, 0.5, 2.0, 1.0, 1e4, 9, 4).unwrap();
        assert_eq!(runs, again);
        let pi = joint_stationary(&source, 2.0, 1.0).unwrap().as_array();
        for r in &runs {
            assert_close(&r.occupancy, &pi, 0.05);
        }
    }
}
