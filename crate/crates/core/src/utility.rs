//! Win probabilities.
//!
//! Two kinds of world are supported. In the coin world ([`CoinScenario`]) the
//! biases are drawn uniformly from `{p, 1 - p}`; the informed player's strategy
//! is written in canonical coordinates (as if every bias were `p`) and is
//! reflected onto the realized biases, while every other player reports
//! without knowing them. In a belief world ([`BeliefModel`]) the opponent and
//! the outcomes are described by independent per-event joints, and only the
//! evaluated player's strategy is taken from the profile.
//!
//! Exact values come from enumeration or convolution; estimates come from
//! blocked Monte Carlo sharing the seed scheme in [`crate::seeding`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::belief::{BeliefModel, CoinScenario, EventJoint};
use crate::distribution::{
    convolve_exact, convolve_with, score_diff_event, ConvolutionConfig, Moments,
    ScoreDiffDistribution, DEFAULT_ATOM_CAP,
};
use crate::math::sqrt;
use crate::mechanism::{
    check_dims, check_probability, score_unchecked, share_from_totals, total_unchecked,
    TieTolerance, FLOAT_TIE_TOLERANCE,
};
use crate::seeding::{block_rng, blocks};
use crate::{Error, MixedStrategy, ReportVector, Result, StrategyProfile};

/// Default cap on the number of binary coordinates an enumeration may range over.
pub const ENUMERATION_CAP_BITS: u32 = 20;

/// z-value of the reported confidence interval.
pub const CI_Z: f64 = 1.96;

/// Where the outcomes and opponents come from.
#[derive(Debug, Clone, PartialEq)]
pub enum World {
    /// p-biased coins with one informed player.
    Coin(CoinScenario),
    /// Independent per-event beliefs about one opponent and the outcomes.
    Belief(BeliefModel),
}

impl World {
    /// Event count.
    pub fn m(&self) -> usize {
        match self {
            World::Coin(s) => s.m(),
            World::Belief(b) => b.m(),
        }
    }
}

/// How the exact coin-world expectation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinRoute {
    /// Enumerate bias draws, support combinations and outcomes.
    Direct,
    /// Fix the biases at `p` and average the uninformed players over reflections.
    Canonical,
    /// Two players only: convolve independent per-event score differences.
    Convolution,
}

/// Limits and tolerances for exact computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Maximum number of enumerated binary coordinates.
    pub max_bits: u32,
    /// Maximum candidate atoms in one convolution step.
    pub atom_cap: usize,
    /// Tie tolerance for total scores.
    pub tie_tolerance: TieTolerance,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_bits: ENUMERATION_CAP_BITS,
            atom_cap: DEFAULT_ATOM_CAP,
            tie_tolerance: TieTolerance::default(),
        }
    }
}

/// Exact expected win probability of `player`.
///
/// Coin worlds with two players use per-event convolution; larger coin worlds
/// enumerate `2m` bits (bias flips and outcomes) and are refused beyond the
/// cap. Belief worlds average the tie-aware utility over the player's support.
pub fn exact_expected_utility(player: usize, profile: &StrategyProfile, world: &World) -> Result<f64> {
    exact_expected_utility_with(player, profile, world, ExactOptions::default())
}

/// [`exact_expected_utility`] with explicit limits.
pub fn exact_expected_utility_with(
    player: usize,
    profile: &StrategyProfile,
    world: &World,
    opts: ExactOptions,
) -> Result<f64> {
    match world {
        World::Coin(scn) => {
            let route = if scn.n() == 2 { CoinRoute::Convolution } else { CoinRoute::Direct };
            coin_utility(player, profile, scn, route, opts)
        }
        World::Belief(belief) => {
            check_player(player, profile.n())?;
            belief_utility(profile.strategy(player), belief, opts)
        }
    }
}

/// Exact coin-world utility along a chosen route.
pub fn coin_utility(
    player: usize,
    profile: &StrategyProfile,
    scn: &CoinScenario,
    route: CoinRoute,
    opts: ExactOptions,
) -> Result<f64> {
    check_player(player, profile.n())?;
    check_dims(scn.n(), profile.n())?;
    check_dims(scn.m(), profile.m())?;
    match route {
        CoinRoute::Direct => coin_enumerate(player, profile, scn, opts, false),
        CoinRoute::Canonical => coin_enumerate(player, profile, scn, opts, true),
        CoinRoute::Convolution => coin_convolution(player, profile, scn, opts),
    }
}

fn check_player(player: usize, n: usize) -> Result<()> {
    if player < n {
        Ok(())
    } else {
        Err(Error::OutOfRange { what: "player index", value: player as f64 })
    }
}

fn check_bits(bits: usize, opts: &ExactOptions) -> Result<()> {
    if bits > opts.max_bits as usize || bits >= 64 {
        Err(Error::EnumerationCap { required_bits: bits as u32, cap: opts.max_bits })
    } else {
        Ok(())
    }
}

/// Outcome probabilities indexed by mask (bit `t` set iff `y_t = 1`).
fn outcome_probabilities(q: &[f64]) -> Vec<f64> {
    (0..1usize << q.len())
        .map(|mask| {
            q.iter().enumerate().fold(1.0, |acc, (t, &qt)| {
                acc * if mask >> t & 1 == 1 { qt } else { 1.0 - qt }
            })
        })
        .collect()
}

/// Calls `f(indices, weight)` for every combination of support points.
fn for_each_combo(strategies: &[MixedStrategy], mut f: impl FnMut(&[usize], f64)) {
    let n = strategies.len();
    let mut idx = vec![0usize; n];
    loop {
        let w = strategies
            .iter()
            .zip(&idx)
            .fold(1.0, |acc, (s, &k)| acc * s.support()[k].1);
        f(&idx, w);
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] < strategies[k].support().len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn reflect_into(src: &[f64], mask: usize, out: &mut [f64]) {
    for (t, (o, &x)) in out.iter_mut().zip(src).enumerate() {
        *o = if mask >> t & 1 == 1 { 1.0 - x } else { x };
    }
}

fn coin_enumerate(
    player: usize,
    profile: &StrategyProfile,
    scn: &CoinScenario,
    opts: ExactOptions,
    canonical: bool,
) -> Result<f64> {
    let m = scn.m();
    check_bits(2 * m, &opts)?;
    let n = scn.n();
    let p = scn.p();
    let informed = scn.informed_index();
    let strategies = profile.strategies();
    let states = 1usize << m;
    let canonical_probs = outcome_probabilities(&vec![p; m]);
    let mut reports = vec![vec![0.0; m]; n];
    let mut totals = vec![0.0; n];
    let mut y = vec![false; m];
    let scale = 1.0 / states as f64;
    let mut acc = 0.0;
    for flips in 0..states {
        let probs = if canonical {
            canonical_probs.clone()
        } else {
            let theta: Vec<f64> =
                (0..m).map(|t| if flips >> t & 1 == 1 { 1.0 - p } else { p }).collect();
            outcome_probabilities(&theta)
        };
        for_each_combo(strategies, |idx, w| {
            for k in 0..n {
                let base = strategies[k].support()[idx[k]].0.as_slice();
                // direct: the informed player follows the biases; canonical:
                // everyone else is reflected instead
                let reflect = if canonical { k != informed } else { k == informed };
                if reflect {
                    reflect_into(base, flips, &mut reports[k]);
                } else {
                    reports[k].copy_from_slice(base);
                }
            }
            let mut inner = 0.0;
            for (ymask, &py) in probs.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                for (t, yt) in y.iter_mut().enumerate() {
                    *yt = ymask >> t & 1 == 1;
                }
                for k in 0..n {
                    totals[k] = total_unchecked(&reports[k], &y);
                }
                inner += py * share_from_totals(player, &totals, opts.tie_tolerance);
            }
            acc += scale * w * inner;
        });
    }
    Ok(acc)
}

/// Exact distribution of the best opponent total minus `player`'s total, and the
/// probability that the top score is shared, by direct enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinOutcomeSummary {
    /// `max_{k != player} S_k - S_player`.
    pub difference: ScoreDiffDistribution,
    /// `Pr[|winner set| > 1]`.
    pub tie_probability: f64,
}

/// See [`CoinOutcomeSummary`].
pub fn coin_outcome_summary(
    player: usize,
    profile: &StrategyProfile,
    scn: &CoinScenario,
    opts: ExactOptions,
) -> Result<CoinOutcomeSummary> {
    check_player(player, profile.n())?;
    check_dims(scn.n(), profile.n())?;
    check_dims(scn.m(), profile.m())?;
    let m = scn.m();
    check_bits(2 * m, &opts)?;
    let n = scn.n();
    let p = scn.p();
    let informed = scn.informed_index();
    let strategies = profile.strategies();
    let states = 1usize << m;
    let mut reports = vec![vec![0.0; m]; n];
    let mut totals = vec![0.0; n];
    let mut y = vec![false; m];
    let scale = 1.0 / states as f64;
    let mut atoms = Vec::new();
    let mut ties = 0.0;
    for flips in 0..states {
        let theta: Vec<f64> = (0..m).map(|t| if flips >> t & 1 == 1 { 1.0 - p } else { p }).collect();
        let probs = outcome_probabilities(&theta);
        for_each_combo(strategies, |idx, w| {
            for k in 0..n {
                let base = strategies[k].support()[idx[k]].0.as_slice();
                if k == informed {
                    reflect_into(base, flips, &mut reports[k]);
                } else {
                    reports[k].copy_from_slice(base);
                }
            }
            for (ymask, &py) in probs.iter().enumerate() {
                let weight = scale * w * py;
                if weight == 0.0 {
                    continue;
                }
                for (t, yt) in y.iter_mut().enumerate() {
                    *yt = ymask >> t & 1 == 1;
                }
                for k in 0..n {
                    totals[k] = total_unchecked(&reports[k], &y);
                }
                let best_other = (0..n)
                    .filter(|&k| k != player)
                    .map(|k| totals[k])
                    .fold(f64::NEG_INFINITY, f64::max);
                atoms.push((best_other - totals[player], weight));
                let best = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if totals.iter().filter(|&&s| best - s <= opts.tie_tolerance.0).count() > 1 {
                    ties += weight;
                }
            }
        });
    }
    Ok(CoinOutcomeSummary { difference: ScoreDiffDistribution::from_atoms(atoms)?, tie_probability: ties.min(1.0) })
}

fn coin_convolution(
    player: usize,
    profile: &StrategyProfile,
    scn: &CoinScenario,
    opts: ExactOptions,
) -> Result<f64> {
    if scn.n() != 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: scn.n() as f64,
            requirement: "the convolution route needs exactly two players",
        });
    }
    let p = scn.p();
    let informed = scn.informed_index();
    let other = 1 - informed;
    let mut acc = 0.0;
    for (a, wa) in profile.strategy(informed).support() {
        for (b, wb) in profile.strategy(other).support() {
            let mut events = Vec::with_capacity(scn.m());
            for (&at, &bt) in a.as_slice().iter().zip(b.as_slice()) {
                let mut atoms = Vec::with_capacity(4);
                for flip in [false, true] {
                    let theta = if flip { 1.0 - p } else { p };
                    let x = if flip { 1.0 - at } else { at };
                    for (y, py) in [(false, 1.0 - theta), (true, theta)] {
                        let (mine, theirs) = if player == informed {
                            (score_unchecked(x, y), score_unchecked(bt, y))
                        } else {
                            (score_unchecked(bt, y), score_unchecked(x, y))
                        };
                        atoms.push((theirs - mine, 0.5 * py));
                    }
                }
                events.push(ScoreDiffDistribution::from_atoms(atoms)?);
            }
            let total = convolve_exact(&events, opts.atom_cap)?;
            acc += wa * wb * total.midpoint_cdf(0.0);
        }
    }
    Ok(acc)
}

/// Exact belief-world utility of a mixed strategy.
pub fn belief_utility(strategy: &MixedStrategy, belief: &BeliefModel, opts: ExactOptions) -> Result<f64> {
    let mut acc = 0.0;
    for (r, w) in strategy.support() {
        let total = total_distribution_exact(r, belief, opts.atom_cap)?;
        acc += w * total.midpoint_cdf(0.0);
    }
    Ok(acc)
}

/// Per-event score-difference distributions of report `r_i` against `belief`.
pub fn event_distributions(r_i: &ReportVector, belief: &BeliefModel) -> Result<Vec<ScoreDiffDistribution>> {
    check_dims(belief.m(), r_i.len())?;
    r_i.as_slice()
        .iter()
        .zip(belief.events())
        .map(|(&r, e)| score_diff_event(r, e))
        .collect()
}

/// Distribution of the cumulative score difference, binning if it grows large.
pub fn total_distribution(
    r_i: &ReportVector,
    belief: &BeliefModel,
    config: ConvolutionConfig,
) -> Result<ScoreDiffDistribution> {
    convolve_with(&event_distributions(r_i, belief)?, config)
}

fn total_distribution_exact(
    r_i: &ReportVector,
    belief: &BeliefModel,
    atom_cap: usize,
) -> Result<ScoreDiffDistribution> {
    convolve_exact(&event_distributions(r_i, belief)?, atom_cap)
}

/// `Pr[sum < 0] + Pr[sum = 0] / 2` for a pure report against a two-player belief.
pub fn tie_aware_utility(r_i: &ReportVector, belief: &BeliefModel) -> Result<f64> {
    Ok(total_distribution(r_i, belief, ConvolutionConfig::default())?.midpoint_cdf(0.0))
}

/// `Pr[sum = 0]`.
pub fn tie_probability(r_i: &ReportVector, belief: &BeliefModel) -> Result<f64> {
    Ok(total_distribution(r_i, belief, ConvolutionConfig::default())?.prob_at(0.0))
}

/// Cumulants of the score difference summed over every event except `t`.
pub fn leave_one_out_stats(r_i: &ReportVector, belief: &BeliefModel, t: usize) -> Result<Moments> {
    let m = belief.m();
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            requirement: "leave-one-out statistics need m >= 2",
        });
    }
    if t >= m {
        return Err(Error::OutOfRange { what: "event index", value: t as f64 });
    }
    let events = event_distributions(r_i, belief)?;
    Ok(events
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != t)
        .fold(Moments::default(), |acc, (_, d)| acc.add(d.moments())))
}

/// Distribution of the score difference summed over every event except `t`.
pub fn leave_one_out_distribution(
    r_i: &ReportVector,
    belief: &BeliefModel,
    t: usize,
    config: ConvolutionConfig,
) -> Result<ScoreDiffDistribution> {
    let mut events = event_distributions(r_i, belief)?;
    if t >= events.len() {
        return Err(Error::OutOfRange { what: "event index", value: t as f64 });
    }
    events.remove(t);
    if events.is_empty() {
        return Ok(ScoreDiffDistribution::point(0.0));
    }
    convolve_with(&events, config)
}

/// Utility of reporting `r_it` on one event when the other events sum to `rest`.
pub fn event_utility(r_it: f64, event: &EventJoint, rest: &ScoreDiffDistribution) -> f64 {
    event_utility_with(r_it, event, |x| rest.midpoint_cdf(x))
}

/// `E[G(-Delta_t)]` for an arbitrary leave-one-out CDF `g`.
pub fn event_utility_with(r_it: f64, event: &EventJoint, g: impl Fn(f64) -> f64) -> f64 {
    event
        .atoms()
        .iter()
        .map(|a| {
            let delta = score_unchecked(a.report, a.outcome) - score_unchecked(r_it, a.outcome);
            a.weight * g(-delta)
        })
        .sum()
}

/// Grid point `k` of a grid with the given resolution on `[0, 1]`.
pub fn grid_steps(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "grid resolution",
            value: resolution,
            requirement: "0 < resolution <= 1",
        });
    }
    Ok(crate::math::round_half_even(1.0 / resolution) as usize)
}

/// Result of a best-response search.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Best report found.
    pub report: ReportVector,
    /// Its exact utility.
    pub utility: f64,
    /// Full passes over the coordinates.
    pub rounds: usize,
}

/// Coordinate ascent on a grid against a belief.
///
/// Each pass fixes all but one coordinate, convolves the others once, and picks
/// the first grid value strictly improving [`event_utility`] by more than the
/// tie tolerance over the incumbent, scanning upward. Stops
/// when a pass changes nothing or after `max_rounds` passes.
pub fn coordinate_best_response(
    belief: &BeliefModel,
    start: &ReportVector,
    resolution: f64,
    max_rounds: usize,
    config: ConvolutionConfig,
) -> Result<BestResponse> {
    check_dims(belief.m(), start.len())?;
    let steps = grid_steps(resolution)?;
    let mut r = start.as_slice().to_vec();
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let mut changed = false;
        for t in 0..belief.m() {
            let rv = ReportVector::new(r.clone())?;
            let rest = leave_one_out_distribution(&rv, belief, t, config)?;
            let event = &belief.events()[t];
            let mut best = event_utility(r[t], event, &rest);
            let mut best_x = r[t];
            for k in 0..=steps {
                let x = k as f64 / steps as f64;
                let u = event_utility(x, event, &rest);
                if u > best + FLOAT_TIE_TOLERANCE {
                    best = u;
                    best_x = x;
                }
            }
            if best_x != r[t] {
                r[t] = best_x;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let report = ReportVector::new(r)?;
    let utility = tie_aware_utility(&report, belief)?;
    Ok(BestResponse { report, utility, rounds })
}

/// Running sums of sampled win shares.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tally {
    /// Trials observed.
    pub trials: u64,
    /// Sum of shares.
    pub sum: f64,
    /// Sum of squared shares.
    pub sum_sq: f64,
}

impl Tally {
    /// Record one share.
    pub fn push(&mut self, x: f64) {
        self.trials += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Append another tally. Merging block tallies in block order gives the
    /// same floats however the blocks were scheduled.
    pub fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Mean with a normal-approximation 95% half-width.
    pub fn estimate(&self, seed: u64) -> UtilityEstimate {
        let n = self.trials as f64;
        let mean = if self.trials == 0 { 0.0 } else { (self.sum / n).clamp(0.0, 1.0) };
        let half_width = if self.trials < 2 {
            1.0
        } else {
            let var = ((self.sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
            CI_Z * sqrt(var / n)
        };
        UtilityEstimate { mean, half_width, trials: self.trials, seed }
    }
}

/// Monte Carlo estimate of a win probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityEstimate {
    /// Sample mean.
    pub mean: f64,
    /// 95% half-width (1 when fewer than two trials).
    pub half_width: f64,
    /// Trials used.
    pub trials: u64,
    /// Seed of the run.
    pub seed: u64,
}

/// Precomputed sampling tables for one world.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    player: usize,
    profile: &'a StrategyProfile,
    world: &'a World,
    cumulative: Vec<Vec<f64>>,
    tol: TieTolerance,
}

impl<'a> Sampler<'a> {
    /// Validates dimensions and builds per-event cumulative tables for belief worlds.
    pub fn new(player: usize, profile: &'a StrategyProfile, world: &'a World) -> Result<Self> {
        check_player(player, profile.n())?;
        check_dims(world.m(), profile.m())?;
        let cumulative = match world {
            World::Coin(scn) => {
                check_dims(scn.n(), profile.n())?;
                Vec::new()
            }
            World::Belief(b) => b
                .events()
                .iter()
                .map(|e| {
                    let mut acc = 0.0;
                    e.atoms()
                        .iter()
                        .map(|a| {
                            acc += a.weight;
                            acc
                        })
                        .collect()
                })
                .collect(),
        };
        Ok(Sampler { player, profile, world, cumulative, tol: TieTolerance::default() })
    }

    /// Run block `block` of `count` trials.
    pub fn block(&self, seed: u64, block: u64, count: u64) -> Tally {
        let mut rng = block_rng(seed, block);
        let mut tally = Tally::default();
        match self.world {
            World::Coin(scn) => {
                let n = scn.n();
                let m = scn.m();
                let p = scn.p();
                let informed = scn.informed_index();
                let mut totals = vec![0.0; n];
                let mut flips = vec![false; m];
                let mut y = vec![false; m];
                for _ in 0..count {
                    for t in 0..m {
                        flips[t] = rng.random::<bool>();
                        let theta = if flips[t] { 1.0 - p } else { p };
                        y[t] = rng.random::<f64>() < theta;
                    }
                    for (k, s) in self.profile.strategies().iter().enumerate() {
                        let r = s.support()[s.sample_index(&mut rng)].0.as_slice();
                        totals[k] = if k == informed {
                            r.iter().zip(&flips).zip(&y).fold(0.0, |acc, ((&x, &f), &yt)| {
                                acc + score_unchecked(if f { 1.0 - x } else { x }, yt)
                            })
                        } else {
                            total_unchecked(r, &y)
                        };
                    }
                    tally.push(share_from_totals(self.player, &totals, self.tol));
                }
            }
            World::Belief(belief) => {
                let s = self.profile.strategy(self.player);
                for _ in 0..count {
                    let r = s.support()[s.sample_index(&mut rng)].0.as_slice();
                    let mut sum = 0.0;
                    for ((e, cum), &rt) in belief.events().iter().zip(&self.cumulative).zip(r) {
                        let u: f64 = rng.random();
                        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                        let a = e.atoms()[k];
                        sum += score_unchecked(a.report, a.outcome) - score_unchecked(rt, a.outcome);
                    }
                    let share = if sum < -FLOAT_TIE_TOLERANCE {
                        1.0
                    } else if sum <= FLOAT_TIE_TOLERANCE {
                        0.5
                    } else {
                        0.0
                    };
                    tally.push(share);
                }
            }
        }
        tally
    }
}

/// Blocked Monte Carlo estimate of `player`'s win probability.
pub fn monte_carlo_utility(
    player: usize,
    profile: &StrategyProfile,
    world: &World,
    trials: u64,
    seed: u64,
) -> Result<UtilityEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter { name: "trials", value: 0.0, requirement: "trials >= 1" });
    }
    let sampler = Sampler::new(player, profile, world)?;
    let mut tally = Tally::default();
    for (b, count) in blocks(trials) {
        tally.merge(&sampler.block(seed, b, count));
    }
    Ok(tally.estimate(seed))
}

/// Expected per-event quadratic score of report `r` when `Pr[Y = 1] = q`.
pub fn expected_score(r: f64, q: f64) -> Result<f64> {
    check_probability("report", r)?;
    check_probability("belief", q)?;
    Ok(q * score_unchecked(r, true) + (1.0 - q) * score_unchecked(r, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::JointAtom;
    use proptest::prelude::*;
    use rand::Rng;

    fn rv(x: &[f64]) -> ReportVector {
        ReportVector::new(x.to_vec()).unwrap()
    }

    fn m1_profile() -> StrategyProfile {
        StrategyProfile::new(vec![
            MixedStrategy::pure(rv(&[0.0])),
            MixedStrategy::uniform(vec![rv(&[0.0]), rv(&[1.0])]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn m1_example_all_routes() {
        let scn = CoinScenario::new(1, 2, 0.3, 0).unwrap();
        let profile = m1_profile();
        for route in [CoinRoute::Direct, CoinRoute::Canonical, CoinRoute::Convolution] {
            let ui = coin_utility(0, &profile, &scn, route, ExactOptions::default()).unwrap();
            let uj = coin_utility(1, &profile, &scn, route, ExactOptions::default()).unwrap();
            assert!((ui - 0.6).abs() < 1e-12, "{route:?} {ui}");
            assert!((uj - 0.4).abs() < 1e-12, "{route:?} {uj}");
        }
    }

    #[test]
    fn coin_summary_matches_utilities() {
        let scn = CoinScenario::new(1, 2, 0.3, 0).unwrap();
        let profile = m1_profile();
        let s = coin_outcome_summary(0, &profile, &scn, ExactOptions::default()).unwrap();
        assert!((s.difference.midpoint_cdf(0.0) - 0.6).abs() < 1e-12);
        // the informed player ties whenever the uninformed report is right too
        assert!((s.tie_probability - 0.5).abs() < 1e-12);
        let scn = CoinScenario::new(2, 3, 0.4, 0).unwrap();
        let profile = StrategyProfile::new(vec![
            MixedStrategy::pure(rv(&[0.4, 0.4])),
            MixedStrategy::pure(rv(&[0.5, 0.5])),
            MixedStrategy::uniform(vec![rv(&[0.0, 1.0]), rv(&[0.3, 0.6])]).unwrap(),
        ])
        .unwrap();
        for player in 0..3 {
            let s = coin_outcome_summary(player, &profile, &scn, ExactOptions::default()).unwrap();
            let u = coin_utility(player, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap();
            let total: f64 = s.difference.atoms().iter().map(|a| a.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            // without three-way ties the share is the midpoint rule on the difference
            assert!((s.difference.midpoint_cdf(0.0) - u).abs() < 1e-12, "{player}");
        }
    }

    #[test]
    fn identical_pure_strategies_split() {
        let scn = CoinScenario::new(3, 2, 0.2, 0).unwrap();
        let r = rv(&[0.5, 0.5, 0.5]);
        let profile =
            StrategyProfile::new(vec![MixedStrategy::pure(r.clone()), MixedStrategy::pure(r)]).unwrap();
        let u = exact_expected_utility(0, &profile, &World::Coin(scn)).unwrap();
        assert!((u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn refuses_beyond_cap() {
        let scn = CoinScenario::new(11, 3, 0.2, 0).unwrap();
        let r = ReportVector::center(11);
        let profile = StrategyProfile::new(vec![MixedStrategy::pure(r); 3]).unwrap();
        let err = exact_expected_utility(0, &profile, &World::Coin(scn)).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { required_bits: 22, cap: 20 }));
    }

    #[test]
    fn monte_carlo_matches_and_repeats() {
        let world = World::Coin(CoinScenario::new(1, 2, 0.3, 0).unwrap());
        let profile = m1_profile();
        let a = monte_carlo_utility(0, &profile, &world, 1_000_000, 17).unwrap();
        let b = monte_carlo_utility(0, &profile, &world, 1_000_000, 17).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 0.6).abs() < 0.002, "{a:?}");
        assert!(a.half_width > 0.0 && a.half_width < 0.002);
    }

    #[test]
    fn deterministic_world_gives_lattice_mean() {
        // opponent always reports exactly what i reports
        let belief = BeliefModel::iid(EventJoint::point(0.3, 0.4).unwrap(), 3);
        let profile = StrategyProfile::new(vec![
            MixedStrategy::pure(rv(&[0.3, 0.3, 0.3])),
            MixedStrategy::pure(rv(&[0.3, 0.3, 0.3])),
        ])
        .unwrap();
        let est = monte_carlo_utility(0, &profile, &World::Belief(belief), 5000, 3).unwrap();
        assert_eq!(est.mean, 0.5);
        assert_eq!(est.half_width, 0.0);
    }

    #[test]
    fn tie_aware_examples() {
        let belief = BeliefModel::iid(EventJoint::point(0.7, 0.6).unwrap(), 4);
        assert_eq!(tie_aware_utility(&rv(&[0.7; 4]), &belief).unwrap(), 0.5);
        // opponent is always right, i always wrong
        let sure = EventJoint::new(vec![JointAtom { report: 1.0, outcome: true, weight: 1.0 }]).unwrap();
        let belief = BeliefModel::iid(sure, 2);
        assert_eq!(tie_aware_utility(&rv(&[0.0, 0.0]), &belief).unwrap(), 0.0);
        // the m = 1 coin example as a belief
        let ev = EventJoint::independent(&[(0.0, 0.5), (1.0, 0.5)], 0.3).unwrap();
        let u = tie_aware_utility(&rv(&[0.0]), &BeliefModel::new(vec![ev])).unwrap();
        assert!((u - 0.6).abs() < 1e-15);
    }

    #[test]
    fn leave_one_out_examples() {
        let belief = BeliefModel::iid(EventJoint::point(0.4, 0.5).unwrap(), 3);
        let s = leave_one_out_stats(&rv(&[0.4; 3]), &belief, 1).unwrap();
        assert_eq!(s, Moments::default());
        let one = BeliefModel::iid(EventJoint::point(0.4, 0.5).unwrap(), 1);
        assert!(leave_one_out_stats(&rv(&[0.4]), &one, 0).is_err());
        // symmetric: opponent at 1, i at 0, fair coin
        let belief = BeliefModel::iid(EventJoint::point(1.0, 0.5).unwrap(), 5);
        let s = leave_one_out_stats(&rv(&[0.0; 5]), &belief, 0).unwrap();
        assert_eq!(s.k3, 0.0);
        assert_eq!(s.variance, 4.0);
    }

    #[test]
    fn leave_one_out_matches_product_enumeration() {
        let events = vec![
            EventJoint::independent(&[(0.2, 0.3), (0.9, 0.7)], 0.6).unwrap(),
            EventJoint::new(vec![
                JointAtom { report: 0.1, outcome: false, weight: 0.5 },
                JointAtom { report: 0.8, outcome: true, weight: 0.3 },
                JointAtom { report: 0.5, outcome: true, weight: 0.2 },
            ])
            .unwrap(),
            EventJoint::independent(&[(0.0, 0.5), (1.0, 0.5)], 0.35).unwrap(),
            EventJoint::point(0.65, 0.45).unwrap(),
        ];
        let belief = BeliefModel::new(events.clone());
        let r = rv(&[0.4, 0.55, 0.3, 0.7]);
        for t in 0..4 {
            let stats = leave_one_out_stats(&r, &belief, t).unwrap();
            // brute force over the product of the other three events
            let mut sums = vec![(0.0, 1.0)];
            for (k, e) in events.iter().enumerate() {
                if k == t {
                    continue;
                }
                let mut next = Vec::new();
                for &(s, w) in &sums {
                    for a in e.atoms() {
                        let d = score_unchecked(a.report, a.outcome) - score_unchecked(r.as_slice()[k], a.outcome);
                        next.push((s + d, w * a.weight));
                    }
                }
                sums = next;
            }
            let direct = Moments::of_atoms(&sums);
            assert!((direct.mean - stats.mean).abs() < 1e-12);
            assert!((direct.variance - stats.variance).abs() < 1e-12);
            assert!((direct.k3 - stats.k3).abs() < 1e-12);
            assert!((direct.k4 - stats.k4).abs() < 1e-12);
        }
    }

    #[test]
    fn properness_on_grid() {
        for kq in 0..=100 {
            let q = kq as f64 / 100.0;
            let mut best = (f64::NEG_INFINITY, 0usize);
            for kr in 0..=100 {
                let s = expected_score(kr as f64 / 100.0, q).unwrap();
                assert!(s != best.0 || kr == 0, "expected score ties at q = {q}");
                if s > best.0 {
                    best = (s, kr);
                }
            }
            assert_eq!(best.1, kq);
        }
    }

    #[test]
    fn coordinate_best_response_on_one_event() {
        // opponent fixed at 1/2, Pr[Y = 1] = 0.8: any report above 1/2 wins
        // exactly when Y = 1, and the scan keeps the first such grid point
        let belief = BeliefModel::iid(EventJoint::point(0.5, 0.8).unwrap(), 1);
        let br = coordinate_best_response(&belief, &rv(&[0.5]), 0.01, 5, ConvolutionConfig::default()).unwrap();
        assert_eq!(br.report.as_slice(), &[0.51]);
        assert!((br.utility - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn score_difference_identity(kp in 0u32..=100, kr in 0u32..=100, kq in 0u32..=100, y in any::<bool>()) {
            let (p, r, q) = (kp as f64 / 100.0, kr as f64 / 100.0, kq as f64 / 100.0);
            let delta = |x: f64| score_unchecked(q, y) - score_unchecked(x, y);
            let yv = if y { 1.0 } else { 0.0 };
            let lhs = delta(p) - delta(r);
            let rhs = p * p - r * r + 2.0 * yv * (r - p);
            prop_assert!((lhs - rhs).abs() <= 1e-15);
        }

        #[test]
        fn coin_routes_agree(m in 1usize..=3, p in 0.05f64..0.49, seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut strat = |k: usize| {
                let support: Vec<(ReportVector, f64)> = (0..k)
                    .map(|_| (rv(&(0..m).map(|_| (rng.random::<f64>() * 4.0).round() / 4.0).collect::<Vec<_>>()), 1.0 / k as f64))
                    .collect();
                MixedStrategy::new(support).unwrap()
            };
            let profile = StrategyProfile::new(vec![strat(2), strat(3)]).unwrap();
            let scn = CoinScenario::new(m, 2, p, 0).unwrap();
            for player in 0..2 {
                let d = coin_utility(player, &profile, &scn, CoinRoute::Direct, ExactOptions::default()).unwrap();
                let c = coin_utility(player, &profile, &scn, CoinRoute::Canonical, ExactOptions::default()).unwrap();
                let v = coin_utility(player, &profile, &scn, CoinRoute::Convolution, ExactOptions::default()).unwrap();
                prop_assert!((d - c).abs() <= 1e-12, "direct {} canonical {}", d, c);
                prop_assert!((d - v).abs() <= 1e-12, "direct {} convolution {}", d, v);
            }
        }
    }
}
