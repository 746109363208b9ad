//! Fixed experiments behind the acceptance suite.

use rand::Rng;
use serde::Serialize;
use simplemax_core::belief::{BeliefModel, EventJoint, JointAtom};
use simplemax_core::distribution::{ConvolutionConfig, Moments};
use simplemax_core::edgeworth::{
    self, affine_fit_discrete, edgeworth_cdf, edgeworth_cdf_with, gamma_theorem2, lemma5_check, log_space,
    loglog_slope, normal_cdf, AffineFit, EdgeworthParams, Lemma5Check, Q2Sign,
};
use simplemax_core::seeding::block_rng;
use simplemax_core::utility::{
    coordinate_best_response, event_utility_with, grid_steps, leave_one_out_distribution, total_distribution,
};
use simplemax_core::ReportVector;

use crate::parallel::map_blocks;
use crate::LabError;

/// Sup-distances of three approximations to an empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeworthValidity {
    /// Summands.
    pub m: usize,
    /// Samples.
    pub samples: u64,
    /// Seed.
    pub seed: u64,
    /// Plain normal approximation.
    pub sup_normal: f64,
    /// Expansion with the default sign.
    pub sup_printed: f64,
    /// Expansion with the classical sign.
    pub sup_textbook: f64,
}

/// Per-summand atoms of the asymmetric two-atom score difference.
pub const TWO_ATOM: [(f64, f64); 2] = [(-0.2, 0.8), (0.8, 0.2)];

/// Sums of `m` iid [`TWO_ATOM`] variables: sample `samples` sums and compare
/// the empirical CDF with the normal approximation and both expansions.
///
/// A sum with `k` high atoms equals `k - 0.2 m`, so samples reduce to a
/// histogram over `k`. Distances are taken on both sides of every lattice
/// point, which covers the supremum between lattice points as well.
pub fn edgeworth_validity(m: usize, samples: u64, seed: u64, workers: usize) -> Result<EdgeworthValidity, LabError> {
    let lo_v = TWO_ATOM[0].0;
    let (hi_v, hi_p) = TWO_ATOM[1];
    let parts = map_blocks(samples, workers, |b, count| {
        let mut rng = block_rng(seed, b);
        let mut hist = vec![0u64; m + 1];
        for _ in 0..count {
            let k = (0..m).filter(|_| rng.random::<f64>() < hi_p).count();
            hist[k] += 1;
        }
        Ok(hist)
    })?;
    let mut hist = vec![0u64; m + 1];
    for h in &parts {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b;
        }
    }
    let per = Moments::of_atoms(&TWO_ATOM);
    let total = (0..m).fold(Moments::default(), |acc, _| acc.add(per));
    let params = EdgeworthParams::from_moments(&total, 1.0, m)?;
    let normal = |x: f64| normal_cdf((x - params.mu) / params.sigma);
    let printed = |x: f64| edgeworth_cdf_with(&params, x, Q2Sign::Printed);
    let textbook = |x: f64| edgeworth_cdf_with(&params, x, Q2Sign::Textbook);
    let n = samples as f64;
    let mut sups = [0.0f64; 3];
    let mut below = 0u64;
    for (k, &c) in hist.iter().enumerate() {
        let x = k as f64 * hi_v + (m - k) as f64 * lo_v;
        let left = below as f64 / n;
        below += c;
        let right = below as f64 / n;
        for (s, f) in sups.iter_mut().zip([&normal as &dyn Fn(f64) -> f64, &printed, &textbook]) {
            let v = f(x);
            *s = s.max((left - v).abs()).max((right - v).abs());
        }
    }
    // the expansion need not be monotone; scan the tails beyond the lattice
    let (x0, x1) = (m as f64 * lo_v, m as f64 * hi_v);
    for j in 1..=400 {
        let d = j as f64 * 0.05 * params.sigma;
        for (s, f) in sups.iter_mut().zip([&normal as &dyn Fn(f64) -> f64, &printed, &textbook]) {
            *s = s.max(f(x0 - d).abs()).max((1.0 - f(x1 + d)).abs());
        }
    }
    Ok(EdgeworthValidity { m, samples, seed, sup_normal: sups[0], sup_printed: sups[1], sup_textbook: sups[2] })
}

/// Largest `|E(x) - Phi(z)|` with zero higher cumulants on a grid.
pub fn gaussian_expansion_gap() -> f64 {
    let mut worst: f64 = 0.0;
    for &(mu, sigma) in &[(0.0, 1.0), (1.5, 0.3), (-4.0, 12.0), (100.0, 25.0)] {
        let p = EdgeworthParams::new(mu, sigma, 0.0, 0.0, 1.0, 1).expect("valid parameters");
        for k in 0..=2000 {
            let x = mu + sigma * (-8.0 + 16.0 * k as f64 / 2000.0);
            worst = worst.max((edgeworth_cdf(&p, x) - normal_cdf((x - mu) / sigma)).abs());
        }
    }
    worst
}

/// The exactly affine case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineCase {
    /// Belief of the event.
    pub belief: f64,
    /// Grid maximizer of the utility.
    pub best_response: f64,
    /// Grid step.
    pub resolution: f64,
    /// Reports other than the belief that lose utility, out of all other grid points.
    pub strictly_worse: usize,
    /// Grid points other than the belief.
    pub others: usize,
}

/// `G(x) = 1/2 + x / (2L)` on `[-1, 1]` (`L = 1`): the utility is affine in the
/// expected score difference, so the grid best response is the belief.
pub fn lemma5_affine(resolution: f64) -> Result<AffineCase, LabError> {
    let event = EventJoint::new(vec![
        JointAtom { report: 0.4, outcome: true, weight: 0.25 },
        JointAtom { report: 0.9, outcome: true, weight: 0.45 },
        JointAtom { report: 0.4, outcome: false, weight: 0.2 },
        JointAtom { report: 0.9, outcome: false, weight: 0.1 },
    ])?;
    let g = |x: f64| 0.5 + x.clamp(-1.0, 1.0) / 2.0;
    let steps = grid_steps(resolution)?;
    let belief = event.marginal();
    let u_belief = event_utility_with(belief, &event, g);
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut worse = 0;
    let mut others = 0;
    for k in 0..=steps {
        let r = k as f64 / steps as f64;
        let u = event_utility_with(r, &event, g);
        if u > best.0 {
            best = (u, r);
        }
        if (r - belief).abs() > 1e-12 {
            others += 1;
            if u < u_belief {
                worse += 1;
            }
        }
    }
    Ok(AffineCase { belief, best_response: best.1, resolution, strictly_worse: worse, others })
}

/// The perturbed case: exact leave-one-out CDF, least-squares fit, exact error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedCase {
    /// Events.
    pub m: usize,
    /// Leave-one-out standard deviation.
    pub sigma: f64,
    /// Fitted slope.
    pub beta: f64,
    /// Fitted intercept.
    pub alpha: f64,
    /// Uniform error of the fit on `[-1, 1]`.
    pub epsilon: f64,
    /// Grid check result.
    pub check: Lemma5CheckOut,
}

/// Serializable [`Lemma5Check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma5CheckOut {
    /// Belief.
    pub belief: f64,
    /// `sqrt(2 eps / beta)`.
    pub radius: f64,
    /// Grid points farther than the radius.
    pub far_points: usize,
    /// Largest utility gain among them (negative when the contract holds).
    pub worst_far_gain: f64,
    /// Contract holds.
    pub holds: bool,
}

impl From<Lemma5Check> for Lemma5CheckOut {
    fn from(c: Lemma5Check) -> Self {
        Lemma5CheckOut {
            belief: c.belief,
            radius: c.radius,
            far_points: c.far_points,
            worst_far_gain: c.worst_far_gain,
            holds: c.holds,
        }
    }
}

/// Opponent report `a` when right and `1 - a` when wrong, right with
/// probability `(a + 1/2) / 2`, fair outcome: the score difference against a
/// report of 1/2 has mean zero.
pub fn equal_skill_event(a: f64) -> Result<EventJoint, LabError> {
    let h = (a + 0.5) / 2.0;
    Ok(EventJoint::new(vec![
        JointAtom { report: a, outcome: true, weight: 0.5 * h },
        JointAtom { report: 1.0 - a, outcome: true, weight: 0.5 * (1.0 - h) },
        JointAtom { report: 1.0 - a, outcome: false, weight: 0.5 * h },
        JointAtom { report: a, outcome: false, weight: 0.5 * (1.0 - h) },
    ])?)
}

/// Event 0 has belief 0.8 against a fixed opponent report of 1/2; the other
/// events are `copies` equal-skill events for each of four opponent accuracies.
pub fn perturbed_belief(copies: usize) -> Result<BeliefModel, LabError> {
    let mut events = vec![EventJoint::independent(&[(0.5, 1.0)], 0.8)?];
    for a in [0.8, 0.9, 0.7, 0.85] {
        let e = equal_skill_event(a)?;
        events.extend(std::iter::repeat_n(e, copies));
    }
    Ok(BeliefModel::new(events))
}

/// Fit and check the affine radius on event 0 of [`perturbed_belief`].
pub fn lemma5_perturbed(copies: usize, resolution: f64) -> Result<PerturbedCase, LabError> {
    let belief = perturbed_belief(copies)?;
    let r = ReportVector::new(simplemax_core::belief::belief_marginal(&belief))?;
    let rest = leave_one_out_distribution(&r, &belief, 0, ConvolutionConfig::default())?;
    let fit: AffineFit = affine_fit_discrete(&rest);
    let check = lemma5_check(&belief.events()[0], |x| rest.midpoint_cdf(x), &fit, resolution)?;
    Ok(PerturbedCase {
        m: belief.m(),
        sigma: rest.moments().sd(),
        beta: fit.beta,
        alpha: fit.alpha,
        epsilon: fit.epsilon,
        check: check.into(),
    })
}

/// Slope of the global radius against `sigma` at fixed cumulant ratios and `D = 1`.
pub fn sigma_slope(lo: f64, hi: f64, points: usize, c3: f64, c4: f64) -> Result<f64, LabError> {
    let sigmas = log_space(lo, hi, points);
    let gammas = sigmas
        .iter()
        .map(|&s| gamma_theorem2(s, c3, c4, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(loglog_slope(&sigmas, &gammas))
}

/// Fair outcome, opponent right with probability 3/4 and reporting 0 or 1,
/// truthful report 1/2: the score difference is `1/4` w.p. 3/4 and `-3/4`
/// otherwise (mean 0, variance 3/16).
pub fn iid_template() -> Result<EventJoint, LabError> {
    Ok(EventJoint::new(vec![
        JointAtom { report: 1.0, outcome: true, weight: 0.375 },
        JointAtom { report: 0.0, outcome: true, weight: 0.125 },
        JointAtom { report: 0.0, outcome: false, weight: 0.375 },
        JointAtom { report: 1.0, outcome: false, weight: 0.125 },
    ])?)
}

/// Per-event radius sweep on [`iid_template`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MSweep {
    /// Event counts.
    pub ms: Vec<usize>,
    /// Per-event radius at each count.
    pub gammas: Vec<f64>,
    /// Least-squares log-log slope over the whole range.
    pub slope: f64,
    /// Slope between the last two points.
    pub end_slope: f64,
    /// Whether the global radius was vacuous at every count.
    pub theorem2_vacuous: bool,
}

/// Sweep `m` log-spaced on `[lo, hi]` with `D = d`.
pub fn m_sweep(lo: usize, hi: usize, points: usize, d: f64) -> Result<MSweep, LabError> {
    let event = iid_template()?;
    let ms: Vec<usize> = log_space(lo as f64, hi as f64, points).into_iter().map(|x| x.round() as usize).collect();
    let rows = edgeworth::gamma_sweep(&event, 0.5, &ms, d, 0.1, 0.01)?;
    let gammas = rows
        .iter()
        .map(|r| r.gamma_per_event.ok_or(LabError::Property(format!("per-event radius vacuous at m = {}", r.m))))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let k = xs.len();
    let end_slope = (gammas[k - 1] / gammas[k - 2]).ln() / (xs[k - 1] / xs[k - 2]).ln();
    Ok(MSweep {
        slope: loglog_slope(&xs, &gammas),
        end_slope,
        theorem2_vacuous: rows.iter().all(|r| r.gamma_theorem2.is_none()),
        ms,
        gammas,
    })
}

/// Small-`m` competitiveness suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallSuite {
    /// Scenarios examined.
    pub scenarios: usize,
    /// Scenarios satisfying the competitiveness condition.
    pub passing: usize,
    /// Largest `sigma` seen.
    pub max_sigma: f64,
    /// Scenarios where the normal-approximation gap exceeded its bound.
    pub berry_esseen_violations: usize,
    /// Passing scenarios where the bounded-ratio statement failed.
    pub ratio_violations: usize,
}

/// Belief scenarios with `m <= 6`: check the competitiveness condition with
/// coordinate best responses, and for those passing, `|mu| / sigma <= 1` and
/// the Berry-Esseen gap at the best response.
pub fn small_m_suite(delta: f64) -> Result<SmallSuite, LabError> {
    let mut suite = SmallSuite { scenarios: 0, passing: 0, max_sigma: 0.0, berry_esseen_violations: 0, ratio_violations: 0 };
    let events = [iid_template()?, equal_skill_event(0.8)?, equal_skill_event(0.9)?, EventJoint::independent(&[(0.2, 0.5), (0.8, 0.5)], 0.6)?];
    for m in 1..=6 {
        for k in 0..events.len() {
            let belief = BeliefModel::new((0..m).map(|t| events[(k + t) % events.len()].clone()).collect::<Vec<_>>());
            let truth = ReportVector::new(simplemax_core::belief::belief_marginal(&belief))?;
            let total = total_distribution(&truth, &belief, ConvolutionConfig::default())?;
            let mo = total.moments();
            suite.scenarios += 1;
            suite.max_sigma = suite.max_sigma.max(mo.sd());
            let best = coordinate_best_response(&belief, &truth, 0.01, 8, ConvolutionConfig::default())?;
            let u_truth = total.midpoint_cdf(0.0);
            let c3 = edgeworth::condition3_check(mo.sd(), delta, mo.lyapunov, u_truth, best.utility.max(u_truth));
            let at_best = total_distribution(&best.report, &belief, ConvolutionConfig::default())?;
            let be = edgeworth::berry_esseen_from(&at_best);
            if let Ok(be) = be {
                if !be.holds {
                    suite.berry_esseen_violations += 1;
                }
            }
            if c3.holds {
                suite.passing += 1;
                let bm = at_best.moments();
                if bm.variance > 0.0 && bm.mean.abs() / bm.sd() > 1.0 {
                    suite.ratio_violations += 1;
                }
                if be.map(|b| !b.holds).unwrap_or(true) {
                    suite.ratio_violations += 1;
                }
            }
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_moments() {
        let d = simplemax_core::distribution::score_diff_event(0.5, &iid_template().unwrap()).unwrap();
        let mo = d.moments();
        assert!(mo.mean.abs() < 1e-15 && (mo.variance - 0.1875).abs() < 1e-15);
        for a in [0.7, 0.8, 0.9] {
            let d = simplemax_core::distribution::score_diff_event(0.5, &equal_skill_event(a).unwrap()).unwrap();
            assert!(d.moments().mean.abs() < 1e-12);
        }
    }

    #[test]
    fn affine_case_recovers_belief() {
        let c = lemma5_affine(1e-2).unwrap();
        assert!((c.best_response - c.belief).abs() <= 1e-2);
        assert_eq!(c.strictly_worse, c.others);
    }

    #[test]
    fn small_validity_run() {
        let v = edgeworth_validity(50, 20_000, 3, 2).unwrap();
        assert!(v.sup_normal > 0.0 && v.sup_printed > 0.0);
        assert_eq!(v, edgeworth_validity(50, 20_000, 3, 1).unwrap());
    }
}
