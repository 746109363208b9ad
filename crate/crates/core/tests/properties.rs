use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplemax_core::belief::{belief_marginal, BeliefModel, CoinScenario, EventJoint, JointAtom};
use simplemax_core::distribution::ConvolutionConfig;
use simplemax_core::edgeworth::{
    affine_fit, condition3_check, discrete_sup_error, edgeworth_cdf_with, empirical_d_hat, EdgeworthParams, Q2Sign,
};
use simplemax_core::equilibrium::{best_response_gain, coin_scenario, m1_n2_equilibrium, m1_n_informed_utility, m2_equilibrium};
use simplemax_core::hedging::{condition1_check, dominance_check, feasible_triples, DominanceConfig, OutcomeProposal};
use simplemax_core::utility::{
    coin_utility, coordinate_best_response, exact_expected_utility, leave_one_out_distribution, leave_one_out_stats,
    monte_carlo_utility, tie_probability, total_distribution, CoinRoute, ExactOptions, World,
};
use simplemax_core::{MixedStrategy, ReportVector, StrategyProfile};

fn rv(x: &[f64]) -> ReportVector {
    ReportVector::new(x.to_vec()).unwrap()
}

fn coverage(profile: &StrategyProfile, world: &World, player: usize) -> usize {
    let exact = exact_expected_utility(player, profile, world).unwrap();
    (0..100u64)
        .filter(|&seed| {
            let est = monte_carlo_utility(player, profile, world, 4000, 1000 + seed).unwrap();
            (est.mean - exact).abs() <= 4.0 * est.half_width
        })
        .count()
}

#[test]
fn monte_carlo_brackets_exact_coin_world() {
    let profile = StrategyProfile::new(vec![
        MixedStrategy::pure(rv(&[0.3, 0.3, 0.3])),
        MixedStrategy::new(vec![(rv(&[0.2, 0.8, 0.5]), 0.4), (rv(&[0.5, 0.5, 0.5]), 0.6)]).unwrap(),
        MixedStrategy::pure(rv(&[0.6, 0.4, 0.1])),
    ])
    .unwrap();
    let world = World::Coin(CoinScenario::new(3, 3, 0.3, 0).unwrap());
    for player in 0..3 {
        assert!(coverage(&profile, &world, player) >= 99);
    }
}

#[test]
fn monte_carlo_brackets_exact_belief_world() {
    let events = (0..6)
        .map(|t| EventJoint::independent(&[(0.2 + 0.1 * t as f64, 0.5), (0.9, 0.5)], 0.3 + 0.05 * t as f64).unwrap())
        .collect();
    let world = World::Belief(BeliefModel::new(events));
    let profile = StrategyProfile::new(vec![
        MixedStrategy::new(vec![(rv(&[0.4; 6]), 0.5), (rv(&[0.6; 6]), 0.5)]).unwrap(),
        MixedStrategy::pure(rv(&[0.5; 6])),
    ])
    .unwrap();
    assert!(coverage(&profile, &world, 0) >= 99);
}

fn tie_masses(event: &EventJoint, r: f64) -> Vec<f64> {
    [2, 4, 8, 16]
        .iter()
        .map(|&m| tie_probability(&rv(&vec![r; m]), &BeliefModel::iid(event.clone(), m)).unwrap())
        .collect()
}

#[test]
fn tie_mass_decays_on_symmetric_lattice() {
    // opponent at 1 - r gives differences of +-0.2, or 0 when it matches r
    let event = EventJoint::independent(&[(0.6, 0.7), (0.4, 0.3)], 0.55).unwrap();
    let ties = tie_masses(&event, 0.4);
    assert!(ties[0] > 0.0);
    for w in ties.windows(2) {
        assert!(w[1] <= w[0], "{ties:?}");
    }
}

#[test]
fn tie_mass_can_rise_on_other_lattices() {
    // differences 0, 0.16, -0.24: ties other than all-zero first appear at m = 5
    let event = EventJoint::independent(&[(0.5, 0.5), (0.7, 0.5)], 0.6).unwrap();
    let ties = tie_masses(&event, 0.5);
    assert!((ties[0] - 0.25).abs() < 1e-12 && (ties[1] - 0.0625).abs() < 1e-12);
    assert!(ties[2] > ties[1]);
}

#[test]
fn m1_utilities_are_exact() {
    for k in 1..=50 {
        let p = 0.49 * k as f64 / 50.0;
        let profile = m1_n2_equilibrium(p).unwrap();
        let scn = coin_scenario(1, 2, p).unwrap();
        let u: Vec<f64> = (0..2)
            .map(|i| coin_utility(i, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap())
            .collect();
        assert_eq!(u[0] + u[1], 1.0);
        assert!((m1_n_informed_utility(p, 2).unwrap() - (0.75 - p / 2.0)).abs() <= 1e-15);
    }
}

#[test]
fn deviation_gain_is_nonnegative() {
    for p in [0.1, 0.3, 0.45] {
        let profile = m1_n2_equilibrium(p).unwrap();
        let scn = coin_scenario(1, 2, p).unwrap();
        for player in 0..2 {
            assert!(best_response_gain(&profile, &scn, player, 0.01).unwrap().gain >= 0.0);
        }
    }
    let profile = m2_equilibrium(0.4).unwrap();
    let scn = coin_scenario(2, 2, 0.4).unwrap();
    for player in 0..2 {
        assert!(best_response_gain(&profile, &scn, player, 0.05).unwrap().gain >= -1e-15);
    }
}

#[test]
fn hedge_target_is_never_truthful() {
    let ms: Vec<usize> = (0..12).map(|k| 100 * 2usize.pow(k)).collect();
    let triples = feasible_triples(&ms, &[0.1, 0.3, 0.5, 0.7, 0.9, 0.99], 200);
    assert!(triples.len() > 50);
    for t in &triples {
        assert!(condition1_check(t.m(), t.p(), t.eps()).holds);
        assert!(t.p_star() > t.p() + t.eps());
    }
}

#[test]
fn dominance_has_no_violations_on_feasible_triples() {
    let ms: Vec<usize> = (0..8).map(|k| 500 * 2usize.pow(k)).collect();
    // the ball sampler rejects too often once eps is comparable to p
    let triples: Vec<_> = feasible_triples(&ms, &[0.3, 0.9], 40).into_iter().filter(|t| t.eps() <= t.p() / 4.0).collect();
    assert!(triples.len() >= 4);
    for (k, t) in triples.iter().take(6).enumerate() {
        let config = DominanceConfig {
            n: 2,
            trials: 3000,
            seed: k as u64,
            proposal: OutcomeProposal::default_for(t),
            require_condition1: true,
            hedge: None,
        };
        let rep = dominance_check(t, config).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.strict_count > 0);
    }
}

fn heterogeneous(m: usize, seed: u64) -> BeliefModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..m)
        .map(|_| {
            let a = (rng.random_range(60..=95) as f64) / 100.0;
            let q = (rng.random_range(30..=70) as f64) / 100.0;
            EventJoint::independent(&[(a, 0.5), (1.0 - a, 0.5)], q).unwrap()
        })
        .collect();
    BeliefModel::new(events)
}

#[test]
fn affineness_error_composes() {
    for seed in 0..4 {
        let belief = heterogeneous(15, seed);
        let r = rv(&belief_marginal(&belief));
        for t in [0, 7] {
            let rest = leave_one_out_distribution(&r, &belief, t, ConvolutionConfig::default()).unwrap();
            let params = EdgeworthParams::from_moments(&rest.moments(), 1.0, belief.m()).unwrap();
            let fit = affine_fit(&params);
            let d_over_m = empirical_d_hat(&rest, &params, Q2Sign::Printed) / belief.m() as f64;
            let line = |x: f64| fit.beta * x + fit.alpha;
            let mut smooth: f64 = 0.0;
            let probes = (0..=4000).map(|k| -1.0 + k as f64 / 2000.0).chain(rest.atoms().iter().map(|a| a.0));
            for x in probes.filter(|x| (-1.0..=1.0).contains(x)) {
                smooth = smooth.max((edgeworth_cdf_with(&params, x, Q2Sign::Printed) - line(x)).abs());
            }
            let certified = discrete_sup_error(&rest, fit.beta, fit.alpha);
            assert!(certified <= smooth + d_over_m + 1e-12, "{certified} > {smooth} + {d_over_m}");
        }
    }
}

fn equal_skill(a: f64) -> EventJoint {
    let h = (a + 0.5) / 2.0;
    EventJoint::new(vec![
        JointAtom { report: a, outcome: true, weight: 0.5 * h },
        JointAtom { report: 1.0 - a, outcome: true, weight: 0.5 * (1.0 - h) },
        JointAtom { report: 1.0 - a, outcome: false, weight: 0.5 * h },
        JointAtom { report: a, outcome: false, weight: 0.5 * (1.0 - h) },
    ])
    .unwrap()
}

fn competitive(m: usize, seed: u64) -> BeliefModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BeliefModel::new((0..m).map(|_| equal_skill([0.7, 0.8, 0.9][rng.random_range(0..3)])).collect())
}

#[test]
fn sigma_bridging_at_best_responses() {
    let template = EventJoint::new(vec![
        JointAtom { report: 1.0, outcome: true, weight: 0.375 },
        JointAtom { report: 0.0, outcome: true, weight: 0.125 },
        JointAtom { report: 0.0, outcome: false, weight: 0.375 },
        JointAtom { report: 1.0, outcome: false, weight: 0.125 },
    ])
    .unwrap();
    let scenarios = [BeliefModel::iid(template, 90), competitive(240, 1), competitive(240, 2)];
    let config = ConvolutionConfig::default();
    let mut checked = 0;
    for belief in &scenarios {
        let truth = rv(&belief_marginal(belief));
        let total = total_distribution(&truth, belief, config).unwrap();
        let best = coordinate_best_response(belief, &truth, 0.05, 2, config).unwrap();
        let mo = total.moments();
        let c3 = condition3_check(mo.sd(), 0.1, mo.lyapunov, total.midpoint_cdf(0.0), best.utility);
        let sigma_i = total_distribution(&best.report, belief, config).unwrap().moments().sd();
        if !c3.holds || sigma_i < 4.0 {
            continue;
        }
        checked += 1;
        for t in 0..belief.m() {
            let rest = leave_one_out_stats(&best.report, belief, t).unwrap();
            assert!(rest.sd() >= sigma_i / 2f64.sqrt());
            assert!(rest.mean.abs() / rest.sd() <= 2.0);
        }
    }
    assert!(checked >= 2, "{checked}");
}
