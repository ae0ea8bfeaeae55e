use persuasion_core::model::*;
use persuasion_core::multi_source::{water_fill_s, WaterFillConstants};
use persuasion_core::{grid_oracle, solve_multi, solve_single, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source with the requested IC threshold: mu solves `q mu / (1-q) - lambda = gap`.
fn source_with_gap(rng: &mut ChaCha8Rng, q: f64) -> SourceParams {
    let lambda = rng.random_range(0.2..3.0);
    let gap = rng.random_range(0.1..3.0);
    SourceParams::new(lambda, (1.0 - q) * (gap + lambda) / q).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, budget: f64) -> ProblemInstance {
    let q = rng.random_range(0.3..0.7);
    let sources = (0..n).map(|_| source_with_gap(rng, q)).collect();
    ProblemInstance::new(sources, q, budget).unwrap()
}

#[test]
fn single_source_value_grows_with_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 1, 0.0);
        let src = inst.sources()[0];
        let mut last = 0.0;
        for k in 0..200 {
            let out = solve_single(&src, inst.q(), 0.1 * k as f64).unwrap();
            assert!(out.sender_utility >= last);
            last = out.sender_utility;
        }
        // With c pinned at c_min, s -> inf leaves the estimate at 1 through
        // every state-0 sojourn until the first c-sample, so the limit sits
        // above the prior mass of state 1.
        let (l, m) = (src.lambda(), src.mu());
        let threshold = c_min(&src, inst.q()).unwrap();
        let limit = l * (threshold + l + m) / ((m + l) * (l + threshold));
        let (_, pi1) = prior_distribution(&src);
        let far = solve_single(&src, inst.q(), 1e6).unwrap();
        assert!((far.sender_utility - limit).abs() < 1e-4);
        assert!(far.sender_utility > pi1);
    }
}

#[test]
fn single_source_receiver_and_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 1, 0.0);
        let src = inst.sources()[0];
        let threshold = c_min(&src, inst.q()).unwrap();
        let budget = threshold + rng.random_range(0.0..10.0);
        let out = solve_single(&src, inst.q(), budget).unwrap();
        assert!((out.receiver_utility - receiver_default_utility(&src, inst.q())).abs() < 1e-12);
        assert!((out.budget_usage() - budget).abs() < 1e-12);
        assert_eq!(out.responses, vec![BestResponse::FollowSender]);
    }
}

#[test]
fn multi_agrees_with_single_for_one_source() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let budget = rng.random_range(0.0..12.0);
        let inst = random_instance(&mut rng, 1, budget);
        let single = solve_single(&inst.sources()[0], inst.q(), budget).unwrap();
        let multi = solve_multi(&inst).unwrap();
        assert!((single.sender_utility - multi.sender_utility).abs() < 1e-9);
        assert!((single.receiver_utility - multi.receiver_utility).abs() < 1e-9);
        if single.sender_utility > 0.0 {
            let (a, b) = (single.policy.rates[0], multi.policy.rates[0]);
            assert!((a.s - b.s).abs() < 1e-9 && a.c == b.c);
        }
    }
}

#[test]
fn multi_solution_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..60 {
        let n = rng.random_range(1..=8);
        let budget = rng.random_range(0.0..25.0);
        let inst = random_instance(&mut rng, n, budget);
        let out = solve_multi(&inst).unwrap();
        let c_mins = inst.c_mins();
        for (i, r) in out.policy.rates.iter().enumerate() {
            assert_eq!(r.s > 0.0, r.c == c_mins[i]);
            assert_eq!(r.s == 0.0, r.c == 0.0);
            assert_eq!(out.active_set.contains(&i), r.s > 0.0);
            if r.s > 0.0 {
                assert_eq!(out.responses[i], BestResponse::FollowSender);
            }
        }
        if out.sender_utility > 0.0 {
            assert!((out.budget_usage() - budget).abs() < 1e-7);
        }
        assert!(out.budget_usage() <= budget + 1e-9);
        assert!((out.receiver_utility - inst.receiver_benchmark()).abs() < 1e-12);
    }
}

#[test]
fn multi_value_grows_with_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let inst = random_instance(&mut rng, 5, 0.0);
        let mut last = 0.0;
        for k in 0..120 {
            let out = solve_multi(&inst.with_budget(0.25 * k as f64).unwrap()).unwrap();
            assert!(out.sender_utility >= last - 1e-12);
            last = out.sender_utility;
        }
    }
}

#[test]
fn water_filled_total_decreases_in_theta() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let inst = random_instance(&mut rng, 6, 0.0);
    let constants: Vec<_> = inst
        .sources()
        .iter()
        .zip(inst.c_mins())
        .map(|(s, c)| WaterFillConstants::new(s, c))
        .collect();
    let cutoff = constants.iter().map(|k| k.cutoff()).fold(0.0, f64::max);
    let totals: Vec<f64> = (1..=400)
        .map(|k| {
            let theta = cutoff * k as f64 / 400.0;
            water_fill_s(&constants, theta).unwrap().iter().sum()
        })
        .collect();
    for w in totals.windows(2) {
        assert!(w[1] <= w[0]);
        if w[0] > 0.0 {
            assert!(w[1] < w[0]);
        }
    }
    assert_eq!(*totals.last().unwrap(), 0.0);
}

#[test]
fn kkt_stationarity_on_active_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let budget = rng.random_range(5.0..20.0);
        let inst = random_instance(&mut rng, 4, budget);
        let out = solve_multi(&inst).unwrap();
        // d/ds of each active member's term must share one dual level
        let slopes: Vec<f64> = out
            .active_set
            .iter()
            .map(|&i| {
                let r = out.policy.rates[i];
                sender_utility_partials(&inst.sources()[i], r.s, r.c).unwrap().0
            })
            .collect();
        for w in slopes.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-7 * w[0].abs().max(1e-3));
        }
    }
}

#[test]
fn oracle_lower_bounds_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..5 {
        let budget = rng.random_range(0.0..6.0);
        let inst = random_instance(&mut rng, 1, budget);
        let exact = solve_multi(&inst).unwrap().sender_utility;
        let grid = grid_oracle(&inst, &GridSpec::new(0.01)).unwrap();
        assert!(exact >= grid.utility - 1e-9);
        assert!(exact - grid.utility <= 0.05);
        assert!(grid.policy.budget_usage() <= budget + 1e-12);
    }
}

#[test]
fn oracle_improves_as_grid_refines() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..3 {
        let budget = rng.random_range(2.0..6.0);
        let inst = random_instance(&mut rng, 2, budget);
        let values: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&step| grid_oracle(&inst, &GridSpec::new(step)).unwrap().utility)
            .collect();
        assert!(values[1] >= values[0] - 1e-12 && values[2] >= values[1] - 1e-12);
    }
}
