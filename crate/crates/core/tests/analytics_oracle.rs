mod common;

use common::{random_grid, run_oracle, simulate, Formula, GridPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use reform_core::analytics::{expected_reward_reform_k, expected_reward_reform_k2, expected_reward_rptsc};
use reform_core::model::AnswerId;
use reform_core::reform::select_peer;
use reform_core::term::raw_round_score;

#[test]
fn closed_forms_match_monte_carlo_on_random_grid() {
    let grid = random_grid(0x0A11_CE00, 50);
    let checks = run_oracle(&grid, 1_000_000, 17);
    assert_eq!(checks.len(), 250);
    let bad: Vec<_> = checks.iter().filter(|c| !c.ok()).collect();
    assert!(bad.is_empty(), "{} checks beyond 4σ: {:#?}", bad.len(), bad);
}

#[test]
fn two_chance_form_equals_series_at_two() {
    for p in random_grid(99, 500) {
        let a = expected_reward_reform_k2(p.q, p.q_prime, p.r, p.n, p.alpha, p.beta());
        let b = expected_reward_reform_k(p.q, p.q_prime, p.r, p.n, p.alpha, p.beta(), 2).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{p:?}: {a} vs {b}");
    }
}

#[test]
fn series_at_one_is_single_pairing() {
    for p in random_grid(7, 200) {
        let a = expected_reward_rptsc(p.q, p.q_prime, p.n, p.alpha);
        let b = expected_reward_reform_k(p.q, p.q_prime, p.r, p.n, p.alpha, 1.0, 1).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn uninformative_report_has_zero_single_pairing_value() {
    // q′ = q: the report carries no information about its peer
    let p = GridPoint { q: 0.3, q_prime: 0.3, r: 0.0, n: 5, k: 1, alpha: 4.0, time: 0.5, rate: 0.0 };
    let (mean, se) = simulate(Formula::Rptsc, &p, 400_000, 3);
    assert!(mean.abs() <= 4.0 * se, "{mean} ± {se}");
    assert_eq!(expected_reward_rptsc(p.q, p.q, p.n, p.alpha), 0.0);
}

/// Peer and frequency drawn from one population of `m` reports: a matched
/// report scores `1/(f t)`, and the expected score is `1/t`.
#[test]
fn expected_round_score_is_inverse_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 20usize;
    let prior = [0.5, 0.3, 0.2];
    let t = 0.4;
    let trials = 400_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..trials {
        let pop: Vec<AnswerId> = (0..m)
            .map(|_| {
                let u: f64 = rng.gen();
                AnswerId(if u < prior[0] { 0 } else if u < prior[0] + prior[1] { 1 } else { 2 })
            })
            .collect();
        let own = pop[rng.gen_range(0..m)];
        let peer = pop[rng.gen_range(0..m)];
        let l = pop.iter().filter(|&&a| a == own).count();
        let phi = raw_round_score(own, peer, l as f64 / m as f64, t).unwrap();
        sum += phi;
        sq += phi * phi;
    }
    let n = trials as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean) / n).sqrt();
    assert!((mean - 1.0 / t).abs() <= 4.0 * se, "{mean} ± {se}");
}

#[test]
fn peer_selection_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let members = 7;
    let own = 3;
    let draws = 70_000;
    let mut counts = vec![0u64; members];
    for _ in 0..draws {
        counts[select_peer(members, own, &mut rng).unwrap()] += 1;
    }
    assert_eq!(counts[own], 0);
    let expected = draws as f64 / (members - 1) as f64;
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((members - 2) as f64).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 = {chi2}, p = {p}");
}
