//! Closed-form quantities of the binary source and of the joint
//! (state, estimate) chain.
//!
//! A source flips 0 → 1 at rate `lambda` and 1 → 0 at rate `mu`. The sender
//! samples it at rate `s` while it is in state 1 and at rate `c` while it is
//! in state 0; a receiver that follows the messages holds the last sampled
//! value as its estimate. Everything here is a pure function of its inputs.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound accepted for any rate. Keeps the normalizer `kappa` (cubic in
/// the rates) far from overflow.
pub const MAX_RATE: f64 = 1e9;

/// Slack allowed on `c - c_min` when deciding incentive compatibility.
pub const IC_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_rate(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=MAX_RATE).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidRate {
            name,
            value,
            max: MAX_RATE,
        })
    }
}

fn check_weight(q: f64) -> Result<f64> {
    if q.is_finite() && q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::InvalidInstance(format!(
            "receiver weight q = {q} must lie in (0, 1)"
        )))
    }
}

/// Transition rates of one binary source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceParams {
    lambda: f64,
    mu: f64,
}

impl SourceParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let lambda = check_rate("lambda", lambda)?;
        let mu = check_rate("mu", mu)?;
        if lambda == 0.0 || mu == 0.0 {
            return Err(Error::InvalidInstance(format!(
                "source rates must be strictly positive (lambda = {lambda}, mu = {mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// Rate of the 0 → 1 transition.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Rate of the 1 → 0 transition.
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// A set of sources shared by one sender and one receiver, plus the
/// receiver's weight `q` and the sender's total sampling budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    sources: Vec<SourceParams>,
    q: f64,
    budget: f64,
}

impl ProblemInstance {
    /// Validates the instance. Every source must satisfy `q mu > (1 - q) lambda`
    /// so that the receiver's uninformed estimate is 0 and `c_min > 0`.
    pub fn new(sources: Vec<SourceParams>, q: f64, budget: f64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidInstance("at least one source is required".into()));
        }
        let q = check_weight(q)?;
        let budget = check_rate("budget", budget)?;
        for (i, source) in sources.iter().enumerate() {
            c_min(source, q).map_err(|e| match e {
                Error::InvalidInstance(msg) => {
                    Error::InvalidInstance(format!("source {}: {msg}", i + 1))
                }
                other => other,
            })?;
        }
        Ok(Self { sources, q, budget })
    }

    pub fn sources(&self) -> &[SourceParams] {
        &self.sources
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Same sources and weight, different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let budget = check_rate("budget", budget)?;
        Ok(Self {
            budget,
            ..self.clone()
        })
    }

    /// `c_min` of every source, in order.
    pub fn c_mins(&self) -> Vec<f64> {
        self.sources
            .iter()
            .map(|src| ic_threshold(src, self.q))
            .collect()
    }

    /// Receiver utility when it ignores every source: `sum q mu / (mu + lambda)`.
    pub fn receiver_benchmark(&self) -> f64 {
        self.sources
            .iter()
            .map(|src| receiver_default_utility(src, self.q))
            .sum()
    }
}

/// Sampling rates for one source: `s` while the source is in state 1, `c`
/// while it is in state 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SourceRates {
    pub s: f64,
    pub c: f64,
}

impl SourceRates {
    pub fn new(s: f64, c: f64) -> Result<Self> {
        Ok(Self {
            s: check_rate("s", s)?,
            c: check_rate("c", c)?,
        })
    }

    pub fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// The sender's committed policy: one pair of rates per source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePolicy {
    pub rates: Vec<SourceRates>,
}

impl RatePolicy {
    pub fn zeros(n: usize) -> Self {
        Self {
            rates: vec![SourceRates::default(); n],
        }
    }

    pub fn budget_usage(&self) -> f64 {
        self.rates.iter().map(SourceRates::total).sum()
    }
}

/// Long-run occupancy of the joint chain over (source state, estimate).
/// `pXY` is the probability of source state `X` with estimate `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub kappa: f64,
}

impl StationaryDistribution {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }
}

/// The receiver's reaction to a committed policy for one source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BestResponse {
    /// Hold the last received message as the estimate.
    FollowSender,
    /// Ignore the messages and estimate 0 at all times.
    Default,
}

/// Prior (uninformed) distribution `(pi0, pi1)` of a source.
pub fn prior_distribution(source: &SourceParams) -> (f64, f64) {
    let total = source.mu + source.lambda;
    (source.mu / total, source.lambda / total)
}

/// `q mu / (1 - q) - lambda` without validating its sign.
pub(crate) fn ic_threshold(source: &SourceParams, q: f64) -> f64 {
    q * source.mu / (1.0 - q) - source.lambda
}

/// Smallest state-0 sampling rate at which the receiver is willing to follow
/// the sender (for any `s > 0`).
pub fn c_min(source: &SourceParams, q: f64) -> Result<f64> {
    let q = check_weight(q)?;
    if q * source.mu <= (1.0 - q) * source.lambda {
        return Err(Error::InvalidInstance(format!(
            "q*mu = {} must exceed (1-q)*lambda = {} (default estimate must be 0)",
            q * source.mu,
            (1.0 - q) * source.lambda
        )));
    }
    Ok(ic_threshold(source, q))
}

fn check_pair(s: f64, c: f64) -> Result<()> {
    check_rate("s", s)?;
    check_rate("c", c)?;
    if s == 0.0 && c == 0.0 {
        return Err(Error::DegenerateRates);
    }
    Ok(())
}

/// Stationary distribution of the joint chain for sampling rates `(s, c)`.
pub fn joint_stationary(source: &SourceParams, s: f64, c: f64) -> Result<StationaryDistribution> {
    check_pair(s, c)?;
    let (l, m) = (source.lambda, source.mu);
    let kappa = (m + l) * (m * c + l * s + c * s);
    Ok(StationaryDistribution {
        p00: m * c * (m + s) / kappa,
        p01: m * l * s / kappa,
        p10: m * l * c / kappa,
        p11: l * s * (l + c) / kappa,
        kappa,
    })
}

/// Long-run fraction of time the estimate equals 1, assuming the receiver
/// follows. The IC gate is not applied here.
///
/// `s = c = 0` returns 0: with no sampling the policy is represented as
/// "no information", under which the sender earns nothing.
pub fn sender_utility_term(source: &SourceParams, s: f64, c: f64) -> Result<f64> {
    match check_pair(s, c) {
        Err(Error::DegenerateRates) => return Ok(0.0),
        other => other?,
    }
    let (l, m) = (source.lambda, source.mu);
    Ok(l * s * (c + l + m) / ((m + l) * (m * c + l * s + c * s)))
}

/// Receiver's long-run utility `q p00 + (1 - q) p11` when following.
pub fn receiver_utility(source: &SourceParams, q: f64, s: f64, c: f64) -> Result<f64> {
    let q = check_weight(q)?;
    let pi = joint_stationary(source, s, c)?;
    Ok(q * pi.p00 + (1.0 - q) * pi.p11)
}

/// Receiver's utility when ignoring the sender: `q mu / (mu + lambda)`.
pub fn receiver_default_utility(source: &SourceParams, q: f64) -> f64 {
    q * source.mu / (source.mu + source.lambda)
}

/// Receiver's best response to `(s, c)`, ties going to the sender.
///
/// For `s > 0`, following beats the default exactly when `c >= c_min`
/// (checked with [`IC_TOLERANCE`] slack). For `s = 0` both choices give the
/// default utility, so the tie rule returns `FollowSender`.
pub fn best_response(source: &SourceParams, q: f64, s: f64, c: f64) -> Result<BestResponse> {
    let q = check_weight(q)?;
    check_rate("s", s)?;
    check_rate("c", c)?;
    if s == 0.0 || c - ic_threshold(source, q) >= -IC_TOLERANCE {
        Ok(BestResponse::FollowSender)
    } else {
        Ok(BestResponse::Default)
    }
}

/// Partial derivatives `(d/ds, d/dc)` of [`sender_utility_term`].
pub fn sender_utility_partials(source: &SourceParams, s: f64, c: f64) -> Result<(f64, f64)> {
    check_pair(s, c)?;
    let (l, m) = (source.lambda, source.mu);
    let denom = m * c + l * s + c * s;
    let scale = (m + l) * denom * denom;
    let d_ds = l * m * c * (l + m + c) / scale;
    let d_dc = -l * m * s * (l + m + s) / scale;
    Ok((d_ds, d_dc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(lambda: f64, mu: f64) -> SourceParams {
        SourceParams::new(lambda, mu).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prior_examples() {
        assert_eq!(prior_distribution(&src(2.0, 2.0)), (0.5, 0.5));
        assert_eq!(prior_distribution(&src(1.0, 3.0)), (0.75, 0.25));
        let (p0, p1) = prior_distribution(&src(1.3, 2.3));
        assert!(close(p0, 2.3 / 3.6, 1e-15) && close(p1, 1.3 / 3.6, 1e-15));
        assert!(close(p0, 0.638_888_888_888_889, 1e-12));
    }

    #[test]
    fn c_min_examples() {
        assert!(close(c_min(&src(1.0, 2.0), 0.5).unwrap(), 1.0, 1e-15));
        assert!(close(c_min(&src(1.5, 2.0), 0.5).unwrap(), 0.5, 1e-15));
        assert!(matches!(
            c_min(&src(2.0, 1.0), 0.5),
            Err(Error::InvalidInstance(_))
        ));
        // equality is rejected
        assert!(c_min(&src(1.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn joint_stationary_examples() {
        let pi = joint_stationary(&src(1.0, 1.0), 1.0, 1.0).unwrap();
        let want = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        for (got, want) in pi.as_array().iter().zip(want) {
            assert!(close(*got, want, 1e-15));
        }

        let pi = joint_stationary(&src(1.0, 2.0), 2.0, 1.0).unwrap();
        assert_eq!(pi.kappa, 18.0);
        let want = [4.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0, 2.0 / 9.0];
        for (got, want) in pi.as_array().iter().zip(want) {
            assert!(close(*got, want, 1e-15));
        }

        let pi = joint_stationary(&src(1.0, 2.0), 0.0, 1.0).unwrap();
        let want = [2.0 / 3.0, 0.0, 1.0 / 3.0, 0.0];
        for (got, want) in pi.as_array().iter().zip(want) {
            assert!(close(*got, want, 1e-15));
        }

        assert_eq!(
            joint_stationary(&src(1.0, 2.0), 0.0, 0.0),
            Err(Error::DegenerateRates)
        );
    }

    #[test]
    fn sender_utility_examples() {
        assert!(close(sender_utility_term(&src(1.0, 1.0), 1.0, 1.0).unwrap(), 0.5, 1e-15));
        assert!(close(
            sender_utility_term(&src(1.0, 2.0), 2.0, 1.0).unwrap(),
            4.0 / 9.0,
            1e-15
        ));
        assert_eq!(sender_utility_term(&src(1.0, 2.0), 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(sender_utility_term(&src(1.0, 2.0), 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn receiver_utility_examples() {
        let third = 1.0 / 3.0;
        assert!(close(receiver_utility(&src(1.0, 2.0), 0.5, 2.0, 1.0).unwrap(), third, 1e-15));
        assert!(close(receiver_utility(&src(1.0, 2.0), 0.5, 0.0, 1.0).unwrap(), third, 1e-15));
        assert!(close(receiver_utility(&src(1.0, 1.0), 0.5, 1.0, 1.0).unwrap(), third, 1e-15));
        assert_eq!(
            receiver_utility(&src(1.0, 2.0), 0.5, 0.0, 0.0),
            Err(Error::DegenerateRates)
        );
    }

    #[test]
    fn receiver_default_examples() {
        assert!(close(receiver_default_utility(&src(1.0, 2.0), 0.5), 1.0 / 3.0, 1e-15));
        assert!(close(receiver_default_utility(&src(1.7, 1.7), 0.3), 0.15, 1e-15));
        assert!(close(
            receiver_default_utility(&src(1.3, 2.3), 0.5),
            0.319_444_444_444_444_4,
            1e-12
        ));
    }

    #[test]
    fn best_response_examples() {
        let s = src(1.0, 2.0);
        assert_eq!(best_response(&s, 0.5, 2.0, 1.0).unwrap(), BestResponse::FollowSender);
        assert_eq!(best_response(&s, 0.5, 2.0, 0.5).unwrap(), BestResponse::Default);
        assert_eq!(best_response(&s, 0.5, 1.0, 2.0).unwrap(), BestResponse::FollowSender);
        assert!(close(receiver_utility(&s, 0.5, 1.0, 2.0).unwrap(), 7.5 / 21.0, 1e-15));
        assert_eq!(best_response(&s, 0.5, 0.0, 0.0).unwrap(), BestResponse::FollowSender);
        assert_eq!(best_response(&s, 0.5, 0.0, 0.3).unwrap(), BestResponse::FollowSender);
    }

    #[test]
    fn partials_examples() {
        let (ds, dc) = sender_utility_partials(&src(1.0, 1.0), 1.0, 1.0).unwrap();
        assert!(close(ds, 1.0 / 6.0, 1e-15) && close(dc, -1.0 / 6.0, 1e-15));
        let (ds, dc) = sender_utility_partials(&src(1.0, 2.0), 2.0, 1.0).unwrap();
        assert!(close(ds, 2.0 / 27.0, 1e-15) && close(dc, -5.0 / 27.0, 1e-15));
        assert_eq!(
            sender_utility_partials(&src(1.0, 2.0), 0.0, 0.0),
            Err(Error::DegenerateRates)
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SourceParams::new(0.0, 1.0).is_err());
        assert!(SourceParams::new(1.0, f64::NAN).is_err());
        assert!(SourceParams::new(1.0, 2e9).is_err());
        assert!(SourceRates::new(-1.0, 1.0).is_err());
        let ok = vec![src(1.0, 2.0)];
        assert!(ProblemInstance::new(vec![], 0.5, 1.0).is_err());
        assert!(ProblemInstance::new(ok.clone(), 0.0, 1.0).is_err());
        assert!(ProblemInstance::new(ok.clone(), 1.0, 1.0).is_err());
        assert!(ProblemInstance::new(ok.clone(), 0.5, -1.0).is_err());
        assert!(ProblemInstance::new(vec![src(1.0, 2.0), src(2.0, 1.0)], 0.5, 1.0).is_err());
        assert!(ProblemInstance::new(ok, 0.5, 0.0).is_ok());
    }
}
