//! Closed-form equilibria of small coin worlds and grid deviation searches.
//!
//! Player 0 is always the informed forecaster and writes reports in canonical
//! coordinates (every bias equal to `p`, so outcomes lean towards 0).

use alloc::vec;
use alloc::vec::Vec;

use crate::belief::CoinScenario;
use crate::math::{powf, sqrt};
use crate::utility::{coin_utility, grid_steps, CoinRoute, ExactOptions};
use crate::{Error, MixedStrategy, ReportVector, Result, StrategyProfile};

/// Index of the informed player in every profile built here.
pub const INFORMED: usize = 0;

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "p", value: p, requirement: "0 < p < 1/2" })
    }
}

fn rv(x: &[f64]) -> ReportVector {
    ReportVector::new(x.to_vec()).expect("constant reports lie in the cube")
}

fn vertex_coin(m: usize) -> MixedStrategy {
    let reports = (0..1u64 << m).map(|mask| {
        rv(&(0..m).map(|t| if mask >> t & 1 == 1 { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    });
    MixedStrategy::uniform(reports.collect()).expect("non-empty support")
}

/// One event, two players: the informed player reports 0, the other picks a vertex.
pub fn m1_n2_equilibrium(p: f64) -> Result<StrategyProfile> {
    m1_n_equilibrium(p, 2)
}

/// One event, `n` players: the informed player reports 0, everyone else a uniform vertex.
pub fn m1_n_equilibrium(p: f64, n: usize) -> Result<StrategyProfile> {
    check_p(p)?;
    if n < 2 {
        return Err(Error::InvalidParameter { name: "n", value: n as f64, requirement: "n >= 2" });
    }
    let mut strategies = vec![MixedStrategy::pure(rv(&[0.0]))];
    strategies.extend((1..n).map(|_| vertex_coin(1)));
    StrategyProfile::new(strategies)
}

/// Coin scenario matching the profiles of this module.
pub fn coin_scenario(m: usize, n: usize, p: f64) -> Result<CoinScenario> {
    CoinScenario::new(m, n, p, INFORMED)
}

/// The informed player's utility at [`m1_n_equilibrium`], by enumeration.
pub fn m1_n_informed_utility(p: f64, n: usize) -> Result<f64> {
    let profile = m1_n_equilibrium(p, n)?;
    let scn = coin_scenario(1, n, p)?;
    coin_utility(INFORMED, &profile, &scn, CoinRoute::Direct, ExactOptions::default())
}

/// Closed form of the same quantity.
///
/// With probability `1 - p` the outcome is 0 and the informed player splits the
/// win with the `k` others who also chose 0; with probability `p` it wins only
/// if all others chose 0, splitting `n` ways.
pub fn m1_n_informed_utility_closed_form(p: f64, n: usize) -> f64 {
    let nf = n as f64;
    let half = powf(0.5, (n - 1) as f64);
    (1.0 - p) * (powf(2.0, nf) - 1.0) * half / nf + p * half / nf
}

/// The displayed n-player expression `2^-(n-1) [sum_k C(n-1,k)/(k+1) + p/(n+1)]`.
pub fn m1_n_displayed_formula(p: f64, n: usize) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += binom / (k as f64 + 1.0);
        binom = binom * (n - 1 - k) as f64 / (k as f64 + 1.0);
    }
    powf(0.5, (n - 1) as f64) * (sum + p / (n as f64 + 1.0))
}

/// The right-hand simplification `2/n - 2^-(n-1) (1/n - p/(n+1))` printed next to it.
pub fn m1_n_displayed_simplification(p: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 / nf - powf(0.5, nf - 1.0) * (1.0 / nf - p / (nf + 1.0))
}

/// Weights `(center, each side point)` of the informed player at two events.
pub fn m2_informed_weights(p: f64) -> (f64, f64) {
    ((1.0 - p) / (2.0 - p), 1.0 / (2.0 * (2.0 - p)))
}

/// Weights `(center, each corner)` of the uninformed player at two events.
pub fn m2_uninformed_weights(p: f64) -> (f64, f64) {
    (3.0 * p / (2.0 - p), (0.5 - p) / (2.0 - p))
}

/// Two events, two players, `1/3 < p < 1/2`.
///
/// Informed: the center, `(0, 1/2)` and `(1/2, 0)`. Uninformed: the center and
/// the four points `(1/2 +- 1/4, 1/2 +- 1/4)`.
pub fn m2_equilibrium(p: f64) -> Result<StrategyProfile> {
    if !(p > 1.0 / 3.0 && p < 0.5) {
        return Err(Error::InvalidParameter { name: "p", value: p, requirement: "1/3 < p < 1/2" });
    }
    let (ic, is) = m2_informed_weights(p);
    let (uc, uk) = m2_uninformed_weights(p);
    let informed = MixedStrategy::new(vec![
        (rv(&[0.5, 0.5]), ic),
        (rv(&[0.0, 0.5]), is),
        (rv(&[0.5, 0.0]), is),
    ])?;
    let uninformed = MixedStrategy::new(vec![
        (rv(&[0.5, 0.5]), uc),
        (rv(&[0.25, 0.25]), uk),
        (rv(&[0.25, 0.75]), uk),
        (rv(&[0.75, 0.25]), uk),
        (rv(&[0.75, 0.75]), uk),
    ])?;
    StrategyProfile::new(vec![informed, uninformed])
}

/// Support-weighted mean report.
pub fn average_report(strategy: &MixedStrategy) -> ReportVector {
    strategy.average_report()
}

/// `(3 - 2p) / (4 (2 - p))`, the informed player's mean coordinate at two events.
pub fn m2_average_coordinate(p: f64) -> f64 {
    (3.0 - 2.0 * p) / (4.0 * (2.0 - p))
}

/// `(5 - sqrt 13) / 4`, where the informed mean coordinate equals `p`.
pub fn hedging_threshold() -> f64 {
    (5.0 - sqrt(13.0)) / 4.0
}

/// `m2_average_coordinate(p) - p` at the threshold (zero up to rounding).
pub fn hedging_threshold_residual() -> f64 {
    let t = hedging_threshold();
    m2_average_coordinate(t) - t
}

/// How a mean report sits relative to the belief `p < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportClass {
    /// Pulled towards 1/2.
    Hedged,
    /// Pushed away from 1/2.
    Extremized,
    /// Equal to the belief.
    Truthful,
}

/// Classify a mean coordinate `avg` against belief `p < 1/2`.
pub fn classify(avg: f64, p: f64) -> ReportClass {
    if avg > p {
        ReportClass::Hedged
    } else if avg < p {
        ReportClass::Extremized
    } else {
        ReportClass::Truthful
    }
}

/// Classification of the two-event informed strategy, from its support.
pub fn m2_classification(p: f64) -> Result<ReportClass> {
    let profile = m2_equilibrium(p)?;
    let avg = average_report(profile.strategy(INFORMED)).as_slice()[0];
    Ok(classify(avg, p))
}

/// Best pure deviation found on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationResult {
    /// Best deviation utility minus the profile utility.
    pub gain: f64,
    /// The deviation achieving it.
    pub deviation: ReportVector,
    /// Utility of the player's profile strategy.
    pub baseline: f64,
    /// Utility of the deviation.
    pub deviation_utility: f64,
    /// Grid resolution used.
    pub resolution: f64,
    /// Deviations evaluated.
    pub evaluated: u64,
}

/// Exact utility of `player` deviating to the pure report `r`.
pub fn deviation_utility(
    profile: &StrategyProfile,
    scn: &CoinScenario,
    player: usize,
    r: &ReportVector,
) -> Result<f64> {
    let dev = profile.with_strategy(player, MixedStrategy::pure(r.clone()))?;
    coin_utility(player, &dev, scn, default_route(scn), ExactOptions::default())
}

fn default_route(scn: &CoinScenario) -> CoinRoute {
    if scn.n() == 2 {
        CoinRoute::Convolution
    } else {
        CoinRoute::Direct
    }
}

/// Grid point `index` in the full product grid, first coordinate slowest.
pub fn grid_point(index: u64, m: usize, steps: usize) -> ReportVector {
    let base = steps as u64 + 1;
    let mut x = vec![0.0; m];
    let mut k = index;
    for t in (0..m).rev() {
        x[t] = (k % base) as f64 / steps as f64;
        k /= base;
    }
    ReportVector::new(x).expect("grid points lie in the cube")
}

/// Size of the full product grid.
pub fn grid_len(m: usize, steps: usize) -> u64 {
    (steps as u64 + 1).pow(m as u32)
}

/// Largest gain from a pure deviation on the grid.
///
/// For `m <= 2` the full product grid is scanned in lexicographic order and the
/// first maximizer kept; for larger `m` coordinate-wise passes start from the
/// best support point and stop when a pass finds no strict improvement.
pub fn best_response_gain(
    profile: &StrategyProfile,
    scn: &CoinScenario,
    player: usize,
    resolution: f64,
) -> Result<DeviationResult> {
    let steps = grid_steps(resolution)?;
    let m = scn.m();
    let baseline = coin_utility(player, profile, scn, default_route(scn), ExactOptions::default())?;
    let mut evaluated = 0u64;
    let (deviation, deviation_utility) = if m <= 2 {
        let mut best: Option<(ReportVector, f64)> = None;
        for idx in 0..grid_len(m, steps) {
            let r = grid_point(idx, m, steps);
            let u = deviation_utility(profile, scn, player, &r)?;
            evaluated += 1;
            if best.as_ref().is_none_or(|b| u > b.1) {
                best = Some((r, u));
            }
        }
        best.expect("grid is non-empty")
    } else {
        let mut current = profile.strategy(player).support()[0].0.clone();
        let mut current_u = deviation_utility(profile, scn, player, &current)?;
        for (r, _) in &profile.strategy(player).support()[1..] {
            let u = deviation_utility(profile, scn, player, r)?;
            if u > current_u {
                current = r.clone();
                current_u = u;
            }
        }
        loop {
            let mut improved = false;
            for t in 0..m {
                for k in 0..=steps {
                    let mut x = current.as_slice().to_vec();
                    x[t] = k as f64 / steps as f64;
                    let r = ReportVector::new(x)?;
                    let u = deviation_utility(profile, scn, player, &r)?;
                    evaluated += 1;
                    if u > current_u + 1e-15 {
                        current = r;
                        current_u = u;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        (current, current_u)
    };
    Ok(DeviationResult {
        gain: deviation_utility - baseline,
        deviation,
        baseline,
        deviation_utility,
        resolution,
        evaluated,
    })
}

/// Utilities and deviation gains for every player of a coin-world profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// The verified profile.
    pub profile: StrategyProfile,
    /// Expected utility of each player.
    pub utilities: Vec<f64>,
    /// Utility of each support point, per player.
    pub support_utilities: Vec<Vec<f64>>,
    /// Largest minus smallest support utility, per player.
    pub indifference_spread: Vec<f64>,
    /// Best grid deviation, per player.
    pub deviations: Vec<DeviationResult>,
    /// Grid resolution of the deviation search.
    pub resolution: f64,
}

impl EquilibriumReport {
    /// Largest deviation gain over all players.
    pub fn max_gain(&self) -> f64 {
        self.deviations.iter().map(|d| d.gain).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Support utilities and grid deviation gains for every player.
pub fn verify_equilibrium(
    profile: &StrategyProfile,
    scn: &CoinScenario,
    resolution: f64,
) -> Result<EquilibriumReport> {
    let mut utilities = Vec::with_capacity(profile.n());
    let mut support_utilities = Vec::with_capacity(profile.n());
    let mut spread = Vec::with_capacity(profile.n());
    let mut deviations = Vec::with_capacity(profile.n());
    for player in 0..profile.n() {
        utilities.push(coin_utility(player, profile, scn, default_route(scn), ExactOptions::default())?);
        let su = support_utility_list(profile, scn, player)?;
        let hi = su.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = su.iter().copied().fold(f64::INFINITY, f64::min);
        spread.push(hi - lo);
        support_utilities.push(su);
        deviations.push(best_response_gain(profile, scn, player, resolution)?);
    }
    Ok(EquilibriumReport {
        profile: profile.clone(),
        utilities,
        support_utilities,
        indifference_spread: spread,
        deviations,
        resolution,
    })
}

/// Exact utility of each of `player`'s support points.
pub fn support_utility_list(profile: &StrategyProfile, scn: &CoinScenario, player: usize) -> Result<Vec<f64>> {
    profile
        .strategy(player)
        .support()
        .iter()
        .map(|(r, _)| deviation_utility(profile, scn, player, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m1_utilities() {
        for (p, ui, uj) in [(0.3, 0.6, 0.4), (0.1, 0.7, 0.3)] {
            let profile = m1_n2_equilibrium(p).unwrap();
            let scn = coin_scenario(1, 2, p).unwrap();
            let a = coin_utility(0, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap();
            let b = coin_utility(1, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap();
            assert!((a - ui).abs() < 1e-12 && (b - uj).abs() < 1e-12);
            assert_eq!(a + b, 1.0);
        }
        let p = 0.5 - 1e-9;
        let profile = m1_n2_equilibrium(p).unwrap();
        let scn = coin_scenario(1, 2, p).unwrap();
        let a = coin_utility(0, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap();
        assert!((a - 0.5).abs() < 1e-8);
    }

    #[test]
    fn m1_deviations_do_not_pay() {
        let profile = m1_n2_equilibrium(0.3).unwrap();
        let scn = coin_scenario(1, 2, 0.3).unwrap();
        for player in 0..2 {
            let d = best_response_gain(&profile, &scn, player, 0.01).unwrap();
            assert!(d.gain <= 1e-12, "player {player}: {d:?}");
            assert!(d.gain >= -1e-12, "own support lies on the grid");
        }
        // a strictly dominated report for the informed player
        let bad = profile.with_strategy(0, MixedStrategy::pure(rv(&[1.0]))).unwrap();
        assert!(best_response_gain(&bad, &scn, 0, 0.01).unwrap().gain > 0.0);
    }

    #[test]
    fn n_player_utility_matches_closed_form() {
        for k in 1..=50 {
            let p = k as f64 / 101.0;
            assert!((m1_n_informed_utility(p, 2).unwrap() - (0.75 - p / 2.0)).abs() < 1e-15);
        }
        for n in 2..=6 {
            for p in [0.1, 0.3] {
                let e = m1_n_informed_utility(p, n).unwrap();
                assert!((e - m1_n_informed_utility_closed_form(p, n)).abs() < 1e-14);
            }
        }
        // the displayed expression disagrees already at n = 2
        let p = 0.3;
        assert!((m1_n_displayed_formula(p, 2) - (0.75 + p / 6.0)).abs() < 1e-15);
        assert!((m1_n_displayed_simplification(p, 2) - (0.75 + p / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn m2_weights() {
        let (ic, is) = m2_informed_weights(0.4);
        assert!((ic - 0.375).abs() < 1e-15 && (is - 0.3125).abs() < 1e-15);
        let (uc, uk) = m2_uninformed_weights(0.4);
        assert!((uc - 0.75).abs() < 1e-15 && (uk - 0.0625).abs() < 1e-15);
        for k in 1..100 {
            let p = 1.0 / 3.0 + k as f64 / 600.0;
            let (ic, is) = m2_informed_weights(p);
            let (uc, uk) = m2_uninformed_weights(p);
            assert!((ic + 2.0 * is - 1.0).abs() < 1e-15);
            assert!((uc + 4.0 * uk - 1.0).abs() < 1e-15);
        }
        assert!(m2_equilibrium(0.3).is_err());
        assert!(m2_equilibrium(0.5).is_err());
    }

    #[test]
    fn averages_and_threshold() {
        let profile = m2_equilibrium(0.4).unwrap();
        let avg = average_report(profile.strategy(0));
        assert!((avg.as_slice()[0] - 0.34375).abs() < 1e-15);
        assert_eq!(average_report(&MixedStrategy::pure(rv(&[0.2, 0.9]))).as_slice(), &[0.2, 0.9]);
        assert_eq!(average_report(&vertex_coin(1)).as_slice(), &[0.5]);
        let t = hedging_threshold();
        assert!((t - 0.348612181).abs() < 1e-9);
        assert!(hedging_threshold_residual().abs() < 1e-15);
        assert!((4.0 * t * t - 10.0 * t + 3.0).abs() < 1e-14);
        assert_eq!(m2_classification(t - 1e-9).unwrap(), ReportClass::Hedged);
        assert_eq!(m2_classification(t + 1e-9).unwrap(), ReportClass::Extremized);
    }

    #[test]
    fn m2_support_indifference() {
        for p in [0.35, 0.4, 0.45] {
            let profile = m2_equilibrium(p).unwrap();
            let scn = coin_scenario(2, 2, p).unwrap();
            for player in 0..2 {
                let su = support_utility_list(&profile, &scn, player).unwrap();
                let lo = su.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = su.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!(hi - lo < 1e-9, "p {p} player {player}: {su:?}");
            }
        }
    }

    #[test]
    fn grid_points_are_lexicographic() {
        assert_eq!(grid_len(2, 2), 9);
        assert_eq!(grid_point(0, 2, 2).as_slice(), &[0.0, 0.0]);
        assert_eq!(grid_point(1, 2, 2).as_slice(), &[0.0, 0.5]);
        assert_eq!(grid_point(3, 2, 2).as_slice(), &[0.5, 0.0]);
        assert_eq!(grid_point(8, 2, 2).as_slice(), &[1.0, 1.0]);
    }
}
