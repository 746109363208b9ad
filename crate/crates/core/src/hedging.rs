//! The hedging counterexample.
//!
//! In canonical coordinates the informed player believes every event is
//! 1 with probability `p < 1/2`, while opponents sit near the center `c`.
//! Reporting `r* = (p*, ..., p*)` with `p* = (1/2 + p)/2` weakly beats every
//! approximately truthful report on every outcome and strictly beats it on
//! some, once `m`, `p` and `eps` satisfy the parameter condition below.
//!
//! Distances to an outcome `y` depend on `y` only through its weight `w`:
//! `|q 1 - y|^2 = m q^2 + w (1 - 2q)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{ceil, exp, floor, ln, powf, sqrt};
use crate::mechanism::{share_from_totals, total_unchecked, TieTolerance};
use crate::seeding::{block_rng, blocks};
use crate::utility::CI_Z;
use crate::{Error, ReportVector, Result};

/// Smallest `m` allowed by the first inequality.
pub const MIN_M: usize = 21;

const MAX_REJECTIONS: usize = 1_000_000;

/// `(m, p, eps)` with the derived hedge `p*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgingParams {
    m: usize,
    p: f64,
    eps: f64,
}

impl HedgingParams {
    /// Requires `m >= 1`, `0 < p < 1/2`, `eps >= 0`.
    pub fn new(m: usize, p: f64, eps: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter { name: "m", value: 0.0, requirement: "m >= 1" });
        }
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::InvalidParameter { name: "p", value: p, requirement: "0 < p < 1/2" });
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter { name: "eps", value: eps, requirement: "eps >= 0" });
        }
        Ok(HedgingParams { m, p, eps })
    }

    /// Event count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Belief.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Truthfulness radius (normalized l2).
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `(1/2 + p) / 2`.
    pub fn p_star(&self) -> f64 {
        p_star(self.p)
    }

    /// The constant hedge report.
    pub fn r_star(&self) -> ReportVector {
        ReportVector::constant(self.m, self.p_star()).expect("p* lies in (1/4, 1/2)")
    }

    /// Distances for outcomes of weight `w`.
    pub fn distances(&self, w: usize) -> WeightClassDistances {
        weight_class_distances(self.m, self.p, w)
    }
}

/// `(1/2 + p) / 2`.
pub fn p_star(p: f64) -> f64 {
    (0.5 + p) / 2.0
}

/// Squared distances from `p* 1` and `p 1` to any outcome of weight `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightClassDistances {
    /// Outcome weight.
    pub w: usize,
    /// `m p*^2 + w (1 - 2 p*)`.
    pub d_star_sq: f64,
    /// `m p^2 + w (1 - 2 p)`.
    pub d_p_sq: f64,
}

/// Distances for weight class `w`.
pub fn weight_class_distances(m: usize, p: f64, w: usize) -> WeightClassDistances {
    let ps = p_star(p);
    let (mf, wf) = (m as f64, w as f64);
    WeightClassDistances {
        w,
        d_star_sq: mf * ps * ps + wf * (1.0 - 2.0 * ps),
        d_p_sq: mf * p * p + wf * (1.0 - 2.0 * p),
    }
}

/// The three inequalities of the parameter condition with their margins.
///
/// A margin is `bound - value`; all three must be positive. The p-bound is NaN
/// when `2/sqrt(m) > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition1 {
    /// All inequalities hold.
    pub holds: bool,
    /// `m - 21` (the inequality is `m >= 21`, so zero passes).
    pub m_margin: f64,
    /// `1/2 - 2 sqrt((2/sqrt m)(1 - 2/sqrt m))`.
    pub p_bound: f64,
    /// `p_bound - p`.
    pub p_margin: f64,
    /// `1/2 - sqrt(p*(1 - p*)) - 2/sqrt m`.
    pub eps_bound: f64,
    /// `eps_bound - eps`.
    pub eps_margin: f64,
}

/// `1/2 - 2 sqrt((2/sqrt m)(1 - 2/sqrt m))`.
pub fn condition1_p_bound(m: usize) -> f64 {
    let u = 2.0 / sqrt(m as f64);
    0.5 - 2.0 * sqrt(u * (1.0 - u))
}

/// `1/2 - sqrt(p*(1 - p*)) - 2/sqrt m`.
pub fn condition1_eps_bound(m: usize, p: f64) -> f64 {
    let ps = p_star(p);
    0.5 - sqrt(ps * (1.0 - ps)) - 2.0 / sqrt(m as f64)
}

/// Evaluate the condition verbatim.
pub fn condition1_check(m: usize, p: f64, eps: f64) -> Condition1 {
    let m_margin = m as f64 - MIN_M as f64;
    let p_bound = condition1_p_bound(m);
    let p_margin = p_bound - p;
    let eps_bound = condition1_eps_bound(m, p);
    let eps_margin = eps_bound - eps;
    Condition1 {
        holds: m >= MIN_M && p_margin > 0.0 && eps_margin > 0.0,
        m_margin,
        p_bound,
        p_margin,
        eps_bound,
        eps_margin,
    }
}

/// Smallest `m` whose p-bound is positive, by linear scan (the bound grows with `m`
/// once `2/sqrt(m) < 1/2`).
pub fn smallest_m_with_positive_p_bound() -> usize {
    let mut m = MIN_M;
    while !(condition1_p_bound(m) > 0.0) {
        m += 1;
    }
    m
}

/// Real `m` solving `(2/sqrt m)(1 - 2/sqrt m) = 1/16`, by bisection on `m > 16`.
pub fn p_bound_root() -> f64 {
    let f = |m: f64| {
        let u = 2.0 / sqrt(m);
        u * (1.0 - u) - 1.0 / 16.0
    };
    let (mut lo, mut hi) = (16.0, 1e6);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn require_condition1(params: &HedgingParams) -> Result<Condition1> {
    let c = condition1_check(params.m, params.p, params.eps);
    if c.holds {
        Ok(c)
    } else if c.m_margin < 0.0 {
        Err(Error::ConditionViolated { condition: "condition 1", detail: "m < 21" })
    } else if !(c.p_margin > 0.0) {
        Err(Error::ConditionViolated { condition: "condition 1", detail: "p is not below the p-bound" })
    } else {
        Err(Error::ConditionViolated { condition: "condition 1", detail: "eps is not below the eps-bound" })
    }
}

/// Smallest slack over the checked weight classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaMargin {
    /// Minimum slack.
    pub margin: f64,
    /// Weight class attaining it.
    pub binding_w: usize,
    /// Number of weight classes checked.
    pub checked: usize,
}

/// First lemma: `sqrt(m)(1/2 - eps) - (d*(w) + 2)` minimized over `w in [0, floor(p* m)]`.
pub fn lemma1_margin(params: &HedgingParams) -> Result<LemmaMargin> {
    require_condition1(params)?;
    let m = params.m;
    let lhs = sqrt(m as f64) * (0.5 - params.eps);
    let top = floor(params.p_star() * m as f64) as usize;
    let mut best = LemmaMargin { margin: f64::INFINITY, binding_w: 0, checked: 0 };
    for w in 0..=top.min(m) {
        let slack = lhs - (sqrt(params.distances(w).d_star_sq) + 2.0);
        best.checked += 1;
        if slack < best.margin {
            best.margin = slack;
            best.binding_w = w;
        }
    }
    Ok(best)
}

/// Second lemma's slack and monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Margin {
    /// `d_p(w) - eps sqrt(m) - d*(w) - 2` at `w = ceil(p* m)`.
    pub slack_at_threshold: f64,
    /// Minimum of the same slack over `w in [ceil(p* m), m]`.
    pub margin: f64,
    /// Where the minimum occurs.
    pub binding_w: usize,
    /// `f(w + 1) - f(w) > 0` for every checked `w`, where `f = d_p - d*`.
    pub increasing: bool,
    /// Smallest increment `f(w + 1) - f(w)`.
    pub min_increment: f64,
    /// Weight with the largest slack.
    pub max_slack_w: usize,
}

/// Second lemma over `w in [ceil(p* m), m]`.
pub fn lemma2_margin(params: &HedgingParams) -> Result<Lemma2Margin> {
    require_condition1(params)?;
    let m = params.m;
    let shift = params.eps * sqrt(m as f64) + 2.0;
    let start = (ceil(params.p_star() * m as f64) as usize).min(m);
    let f = |w: usize| {
        let d = weight_class_distances(m, params.p, w);
        sqrt(d.d_p_sq) - sqrt(d.d_star_sq)
    };
    let mut out = Lemma2Margin {
        slack_at_threshold: f(start) - shift,
        margin: f64::INFINITY,
        binding_w: start,
        increasing: true,
        min_increment: f64::INFINITY,
        max_slack_w: start,
    };
    let mut max_slack = f64::NEG_INFINITY;
    let mut prev = f(start);
    for w in start..=m {
        let fw = if w == start { prev } else { f(w) };
        if w > start {
            let inc = fw - prev;
            out.min_increment = out.min_increment.min(inc);
            if !(inc > 0.0) {
                out.increasing = false;
            }
            prev = fw;
        }
        let slack = fw - shift;
        if slack < out.margin {
            out.margin = slack;
            out.binding_w = w;
        }
        if slack > max_slack {
            max_slack = slack;
            out.max_slack_w = w;
        }
    }
    Ok(out)
}

/// Uniform point of `{ r in [0,1]^m : |r - center| <= radius sqrt(m) }`.
pub fn sample_ball_report(center: &[f64], radius: f64, seed: u64) -> Result<ReportVector> {
    sample_ball_report_with(center, radius, &mut block_rng(seed, 0))
}

/// [`sample_ball_report`] drawing from a caller-supplied generator.
///
/// Direction from normalized standard normals, radius `R U^(1/m)`, and
/// rejection of points that leave the cube.
pub fn sample_ball_report_with<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Result<ReportVector> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter { name: "radius", value: radius, requirement: "radius >= 0" });
    }
    let c = ReportVector::new(center.to_vec())?;
    if radius == 0.0 {
        return Ok(c);
    }
    let m = center.len();
    let big_r = radius * sqrt(m as f64);
    let mut dir = vec![0.0; m];
    for _ in 0..MAX_REJECTIONS {
        let mut norm_sq = 0.0;
        for d in dir.iter_mut() {
            *d = StandardNormal.sample(rng);
            norm_sq += *d * *d;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let rho = big_r * powf(u, 1.0 / m as f64) / sqrt(norm_sq);
        let candidate: Vec<f64> = center.iter().zip(&dir).map(|(&x, &d)| x + rho * d).collect();
        if candidate.iter().all(|x| (0.0..=1.0).contains(x)) {
            return ReportVector::new(candidate);
        }
    }
    Err(Error::EmptyIntersection)
}

/// Outcome distribution used by the dominance sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeProposal {
    /// `Bernoulli(p)^m`, the informed player's belief.
    Belief,
    /// `Bernoulli(q)^m` with likelihood-ratio weights back to the belief.
    Tilted(f64),
}

impl OutcomeProposal {
    /// Tilt to `p*`, centering sampled weights on the boundary of the region
    /// where the hedge strictly helps.
    pub fn default_for(params: &HedgingParams) -> Self {
        OutcomeProposal::Tilted(params.p_star())
    }

    fn q(&self, p: f64) -> f64 {
        match *self {
            OutcomeProposal::Belief => p,
            OutcomeProposal::Tilted(q) => q,
        }
    }
}

/// Settings of a dominance run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceConfig {
    /// Player count (one informed player plus `n - 1` opponents).
    pub n: usize,
    /// Sampled (reports, outcome) tuples.
    pub trials: u64,
    /// Seed.
    pub seed: u64,
    /// Outcome sampler.
    pub proposal: OutcomeProposal,
    /// Refuse when the parameter condition fails.
    pub require_condition1: bool,
    /// Hedge coordinate; `p*` when `None`.
    pub hedge: Option<f64>,
}

/// A sampled outcome where the hedge did worse than the truthful report.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceWitness {
    /// Block index.
    pub block: u64,
    /// Trial within the block.
    pub trial: u64,
    /// Outcome weight.
    pub w: usize,
    /// Win share of the approximately truthful report.
    pub truthful_share: f64,
    /// Win share of the hedge.
    pub hedge_share: f64,
}

/// Per-block tallies; merge in block order.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceTally {
    /// Trials.
    pub trials: u64,
    /// Outcomes where the hedge did strictly worse.
    pub violations: u64,
    /// Outcomes where the hedge did strictly better.
    pub strict: u64,
    /// First violation in block order.
    pub first_witness: Option<DominanceWitness>,
    /// Sum of unweighted share differences.
    pub raw_sum: f64,
    /// Largest log likelihood ratio among nonzero differences.
    pub log_scale: f64,
    /// `sum exp(l - log_scale) d`.
    pub s1: f64,
    /// `sum exp(2 (l - log_scale)) d^2`.
    pub s2: f64,
}

impl Default for DominanceTally {
    fn default() -> Self {
        DominanceTally {
            trials: 0,
            violations: 0,
            strict: 0,
            first_witness: None,
            raw_sum: 0.0,
            log_scale: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
        }
    }
}

impl DominanceTally {
    fn push_weighted(&mut self, log_w: f64, d: f64) {
        if d == 0.0 {
            return;
        }
        if log_w > self.log_scale {
            let shrink = exp(self.log_scale - log_w);
            self.s1 *= shrink;
            self.s2 *= shrink * shrink;
            self.log_scale = log_w;
        }
        let e = exp(log_w - self.log_scale);
        self.s1 += e * d;
        self.s2 += e * e * d * d;
    }

    /// Append another block.
    pub fn merge(&mut self, other: &DominanceTally) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.strict += other.strict;
        if self.first_witness.is_none() {
            self.first_witness = other.first_witness.clone();
        }
        self.raw_sum += other.raw_sum;
        if other.log_scale == f64::NEG_INFINITY {
            return;
        }
        let scale = self.log_scale.max(other.log_scale);
        let a = exp(self.log_scale - scale);
        let b = exp(other.log_scale - scale);
        self.s1 = self.s1 * a + other.s1 * b;
        self.s2 = self.s2 * a * a + other.s2 * b * b;
        self.log_scale = scale;
    }
}

/// Outcome of a dominance run.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    /// The parameter condition at these parameters.
    pub condition1: Condition1,
    /// Hedge coordinate used.
    pub hedge: f64,
    /// Proposal probability `q` of the outcome sampler.
    pub proposal_q: f64,
    /// Sampled tuples.
    pub trials: u64,
    /// Weak-dominance violations.
    pub violations: u64,
    /// Strict improvements.
    pub strict_count: u64,
    /// First violation, if any.
    pub first_witness: Option<DominanceWitness>,
    /// Mean share difference under the proposal, unweighted.
    pub raw_mean_gain: f64,
    /// `log10` of the estimated gain under the belief; `None` when every
    /// sampled difference was zero.
    pub gain_log10: Option<f64>,
    /// Estimated gain divided by `exp(log_scale)`.
    pub scaled_gain: f64,
    /// 95% half-width on the same scale.
    pub scaled_half_width: f64,
    /// Natural log of the scale factor.
    pub log_scale: f64,
    /// Estimated gain (may underflow to 0 even when positive).
    pub gain_estimate: f64,
    /// Whether the 95% interval lies strictly above zero.
    pub ci_excludes_zero: bool,
}

/// Sampler for one dominance configuration.
#[derive(Debug, Clone)]
pub struct DominanceSampler {
    params: HedgingParams,
    config: DominanceConfig,
    hedge: Vec<f64>,
    truth: Vec<f64>,
    center: Vec<f64>,
    q: f64,
    log_one: f64,
    log_zero: f64,
}

impl DominanceSampler {
    /// Validates the configuration (and the parameter condition when required).
    pub fn new(params: HedgingParams, config: DominanceConfig) -> Result<Self> {
        if config.require_condition1 {
            require_condition1(&params)?;
        }
        if config.n < 2 {
            return Err(Error::InvalidParameter { name: "n", value: config.n as f64, requirement: "n >= 2" });
        }
        let q = config.proposal.q(params.p);
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter { name: "proposal q", value: q, requirement: "0 < q < 1" });
        }
        let h = config.hedge.unwrap_or(params.p_star());
        let m = params.m;
        Ok(DominanceSampler {
            params,
            config,
            hedge: ReportVector::constant(m, h)?.into_inner(),
            truth: vec![params.p; m],
            center: vec![0.5; m],
            q,
            log_one: ln(params.p / q),
            log_zero: ln((1.0 - params.p) / (1.0 - q)),
        })
    }

    /// Run one block.
    pub fn block(&self, block: u64, count: u64) -> Result<DominanceTally> {
        let mut rng = block_rng(self.config.seed, block);
        let m = self.params.m;
        let n = self.config.n;
        let tol = TieTolerance::default();
        let mut tally = DominanceTally::default();
        let mut totals = vec![0.0; n];
        let mut y = vec![false; m];
        let mut opponents: Vec<ReportVector> = Vec::with_capacity(n - 1);
        for trial in 0..count {
            let r_i = sample_ball_report_with(&self.truth, self.params.eps, &mut rng)?;
            opponents.clear();
            for _ in 1..n {
                opponents.push(sample_ball_report_with(&self.center, self.params.eps, &mut rng)?);
            }
            let mut w = 0;
            for yt in y.iter_mut() {
                *yt = rng.random::<f64>() < self.q;
                w += *yt as usize;
            }
            for (k, r) in opponents.iter().enumerate() {
                totals[k + 1] = total_unchecked(r.as_slice(), &y);
            }
            totals[0] = total_unchecked(r_i.as_slice(), &y);
            let truthful = share_from_totals(0, &totals, tol);
            totals[0] = total_unchecked(&self.hedge, &y);
            let hedged = share_from_totals(0, &totals, tol);
            let d = hedged - truthful;
            tally.trials += 1;
            tally.raw_sum += d;
            if d < 0.0 {
                tally.violations += 1;
                if tally.first_witness.is_none() {
                    tally.first_witness = Some(DominanceWitness {
                        block,
                        trial,
                        w,
                        truthful_share: truthful,
                        hedge_share: hedged,
                    });
                }
            } else if d > 0.0 {
                tally.strict += 1;
            }
            let log_w = w as f64 * self.log_one + (m - w) as f64 * self.log_zero;
            tally.push_weighted(log_w, d);
        }
        Ok(tally)
    }

    /// Summarize merged tallies.
    pub fn report(&self, tally: &DominanceTally) -> DominanceReport {
        let n = tally.trials as f64;
        let scaled = if tally.trials == 0 { 0.0 } else { tally.s1 / n };
        let half = if tally.trials < 2 {
            f64::INFINITY
        } else {
            let var = ((tally.s2 / n - scaled * scaled) * n / (n - 1.0)).max(0.0);
            CI_Z * sqrt(var / n)
        };
        let gain_log10 = (scaled > 0.0).then(|| (tally.log_scale + ln(scaled)) / core::f64::consts::LN_10);
        DominanceReport {
            condition1: condition1_check(self.params.m, self.params.p, self.params.eps),
            hedge: self.hedge[0],
            proposal_q: self.q,
            trials: tally.trials,
            violations: tally.violations,
            strict_count: tally.strict,
            first_witness: tally.first_witness.clone(),
            raw_mean_gain: if tally.trials == 0 { 0.0 } else { tally.raw_sum / n },
            gain_log10,
            scaled_gain: scaled,
            scaled_half_width: half,
            log_scale: tally.log_scale,
            gain_estimate: if scaled > 0.0 { exp(tally.log_scale) * scaled } else { 0.0 },
            ci_excludes_zero: scaled - half > 0.0,
        }
    }
}

/// Sequential dominance run over all blocks.
pub fn dominance_check(params: &HedgingParams, config: DominanceConfig) -> Result<DominanceReport> {
    let sampler = DominanceSampler::new(*params, config)?;
    let mut tally = DominanceTally::default();
    for (b, count) in blocks(config.trials) {
        tally.merge(&sampler.block(b, count)?);
    }
    Ok(sampler.report(&tally))
}

/// Triples satisfying the parameter condition, from a deterministic grid:
/// for each `m`, `p` at each fraction of the p-bound and `eps` at each
/// fraction of the resulting eps-bound.
pub fn feasible_triples(ms: &[usize], fractions: &[f64], limit: usize) -> Vec<HedgingParams> {
    let mut out = Vec::new();
    for &m in ms {
        let pb = condition1_p_bound(m);
        if !(pb > 0.0) {
            continue;
        }
        for &fp in fractions {
            let p = fp * pb;
            let eb = condition1_eps_bound(m, p);
            if !(eb > 0.0) {
                continue;
            }
            for &fe in fractions {
                let eps = fe * eb;
                if out.len() == limit {
                    return out;
                }
                if condition1_check(m, p, eps).holds {
                    if let Ok(params) = HedgingParams::new(m, p, eps) {
                        out.push(params);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition1_examples() {
        let c = condition1_check(10, 0.1, 0.01);
        assert!(!c.holds && c.m_margin < 0.0);
        let c = condition1_check(100, 0.4, 0.01);
        assert!(!c.holds && c.p_margin < 0.0);
        assert_eq!(smallest_m_with_positive_p_bound(), 892);
        assert!((p_bound_root() - 891.4).abs() < 0.1);
        assert!(condition1_p_bound(891) <= 0.0);
        assert!(condition1_check(2000, 0.04, 0.005).holds);
    }

    #[test]
    fn distances_match_direct_computation() {
        use rand::seq::SliceRandom;
        let m = 40;
        let p = 0.13;
        let mut rng = block_rng(5, 0);
        for w in 0..=m {
            let dist = weight_class_distances(m, p, w);
            for _ in 0..1000 {
                let mut y = vec![false; m];
                for yt in y.iter_mut().take(w) {
                    *yt = true;
                }
                y.shuffle(&mut rng);
                let direct = |q: f64| y.iter().fold(0.0, |acc, &b| {
                    let d = q - if b { 1.0 } else { 0.0 };
                    acc + d * d
                });
                assert!((direct(p_star(p)) - dist.d_star_sq).abs() < 1e-12);
                assert!((direct(p) - dist.d_p_sq).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lemma_margins_on_feasible_triples() {
        let triples = feasible_triples(&[900, 1000, 2000, 5000, 20000], &[0.25, 0.5, 0.75, 0.95], 20);
        assert_eq!(triples.len(), 20);
        for t in &triples {
            let l1 = lemma1_margin(t).unwrap();
            assert!(l1.margin > 0.0, "{t:?} {l1:?}");
            assert_eq!(l1.binding_w, floor(t.p_star() * t.m() as f64) as usize);
            let l2 = lemma2_margin(t).unwrap();
            assert!(l2.margin > 0.0 && l2.increasing, "{t:?} {l2:?}");
            assert_eq!(l2.max_slack_w, t.m());
            assert!(t.p_star() > t.p() + t.eps());
        }
    }

    #[test]
    fn lemma1_tight_at_eps_bound() {
        let m = 2000;
        let p = 0.04;
        let eb = condition1_eps_bound(m, p);
        let t = HedgingParams::new(m, p, eb * (1.0 - 1e-12)).unwrap();
        let l1 = lemma1_margin(&t).unwrap();
        assert!(l1.margin > 0.0 && l1.margin < 0.05, "{l1:?}");
    }

    #[test]
    fn lemmas_refuse_without_condition() {
        let t = HedgingParams::new(32, 0.1, 0.04).unwrap();
        assert!(matches!(lemma1_margin(&t), Err(Error::ConditionViolated { .. })));
        assert!(matches!(lemma2_margin(&t), Err(Error::ConditionViolated { .. })));
    }

    #[test]
    fn ball_sampling() {
        let c = [0.3, 0.6, 0.5];
        assert_eq!(sample_ball_report(&c, 0.0, 1).unwrap().as_slice(), &c);
        let mut rng = block_rng(9, 0);
        let mut mean = [0.0; 3];
        let n = 10_000;
        let radius = 0.1;
        for _ in 0..n {
            let r = sample_ball_report_with(&c, radius, &mut rng).unwrap();
            let d2: f64 = r.as_slice().iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(sqrt(d2) / sqrt(3.0) <= radius + 1e-12);
            for (m, x) in mean.iter_mut().zip(r.as_slice()) {
                *m += x / n as f64;
            }
        }
        // per-coordinate sd of a uniform ball point is R / sqrt(m + 2)
        let sd = radius * sqrt(3.0) / sqrt(5.0) / sqrt(n as f64);
        for (m, x) in mean.iter().zip(&c) {
            assert!((m - x).abs() < 3.0 * sd, "{m} vs {x}");
        }
    }
}
