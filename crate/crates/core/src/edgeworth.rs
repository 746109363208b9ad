//! Edgeworth expansions and approximate-truthfulness radii.
//!
//! `E(x) = Phi(z) - phi(z) g3 He2(z) / 6 + s phi(z) [g3^2 He5(z) / 72 + g4 He3(z) / 24]`
//! with `z = (x - mu) / sigma`, `g3 = k3 / sigma^3`, `g4 = k4 / sigma^4`. The
//! second-order sign `s` is `+1` by default ([`Q2Sign::Printed`]); the usual
//! textbook expansion has `s = -1` ([`Q2Sign::Textbook`]).
//!
//! Cumulant ratios follow `C_l = k_l / sigma^2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{BeliefModel, EventJoint};
use crate::distribution::{ConvolutionConfig, Moments, ScoreDiffDistribution};
use crate::math::{erfc, exp, ln, sqrt, SQRT_2PI};
use crate::utility::{
    coordinate_best_response, event_distributions, event_utility_with, grid_steps,
    leave_one_out_distribution, total_distribution,
};
use crate::{Error, ReportVector, Result};

/// Highest supported Hermite degree.
pub const MAX_HERMITE: usize = 7;

/// Grid points of the first stage of every interval maximization.
pub const MAX_GRID: usize = 2001;

/// Bracket width at which golden-section refinement stops.
pub const GOLDEN_TOLERANCE: f64 = 1e-10;

/// Probabilists' Hermite polynomial `He_l(x)`, `l <= 7`.
pub fn hermite(l: usize, x: f64) -> Result<f64> {
    if l > MAX_HERMITE {
        return Err(Error::InvalidParameter {
            name: "hermite degree",
            value: l as f64,
            requirement: "0 <= l <= 7",
        });
    }
    Ok(he(l, x))
}

fn he(l: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return prev;
    }
    for k in 1..l {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z) / SQRT_2PI
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / core::f64::consts::SQRT_2)
}

/// Sign of the second-order Edgeworth term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Q2Sign {
    /// `+`, as the expansion is written in the model this crate follows.
    #[default]
    Printed,
    /// `-`, the classical expansion.
    Textbook,
}

impl Q2Sign {
    fn factor(self) -> f64 {
        match self {
            Q2Sign::Printed => 1.0,
            Q2Sign::Textbook => -1.0,
        }
    }
}

/// Inputs of the expansion and of the radius bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeworthParams {
    /// Mean.
    pub mu: f64,
    /// Standard deviation.
    pub sigma: f64,
    /// Third cumulant.
    pub k3: f64,
    /// Fourth cumulant.
    pub k4: f64,
    /// Convergence constant of the `D / m` error term.
    pub d: f64,
    /// Number of events.
    pub m: usize,
}

impl EdgeworthParams {
    /// Requires `sigma > 0` and finite inputs.
    pub fn new(mu: f64, sigma: f64, k3: f64, k4: f64, d: f64, m: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter { name: "sigma", value: sigma, requirement: "sigma > 0" });
        }
        for (name, v) in [("mu", mu), ("k3", k3), ("k4", k4), ("D", d)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, value: v, requirement: "finite" });
            }
        }
        if m == 0 {
            return Err(Error::InvalidParameter { name: "m", value: 0.0, requirement: "m >= 1" });
        }
        Ok(EdgeworthParams { mu, sigma, k3, k4, d, m })
    }

    /// From accumulated cumulants; [`Error::Degenerate`] at zero variance.
    pub fn from_moments(moments: &Moments, d: f64, m: usize) -> Result<Self> {
        if !(moments.variance > 0.0) {
            return Err(Error::Degenerate);
        }
        Self::new(moments.mean, moments.sd(), moments.k3, moments.k4, d, m)
    }

    /// `k3 / sigma^2`.
    pub fn c3(&self) -> f64 {
        self.k3 / (self.sigma * self.sigma)
    }

    /// `k4 / sigma^2`.
    pub fn c4(&self) -> f64 {
        self.k4 / (self.sigma * self.sigma)
    }
}

/// The expansion with the default sign.
pub fn edgeworth_cdf(params: &EdgeworthParams, x: f64) -> f64 {
    edgeworth_cdf_with(params, x, Q2Sign::Printed)
}

/// The expansion with an explicit second-order sign.
pub fn edgeworth_cdf_with(params: &EdgeworthParams, x: f64, sign: Q2Sign) -> f64 {
    let s = params.sigma;
    let z = (x - params.mu) / s;
    let g3 = params.k3 / (s * s * s);
    let g4 = params.k4 / (s * s * s * s);
    let phi = normal_pdf(z);
    normal_cdf(z) - phi * g3 * he(2, z) / 6.0
        + sign.factor() * phi * (g3 * g3 * he(5, z) / 72.0 + g4 * he(3, z) / 24.0)
}

/// `dE/dx`, using `d/dz [phi He_l] = -phi He_{l+1}`.
pub fn edgeworth_density_with(params: &EdgeworthParams, x: f64, sign: Q2Sign) -> f64 {
    let s = params.sigma;
    let z = (x - params.mu) / s;
    let g3 = params.k3 / (s * s * s);
    let g4 = params.k4 / (s * s * s * s);
    let phi = normal_pdf(z);
    (phi + phi * g3 * he(3, z) / 6.0
        - sign.factor() * phi * (g3 * g3 * he(6, z) / 72.0 + g4 * he(4, z) / 24.0))
        / s
}

/// `(beta, alpha, eps)` with `|G(x) - (beta x + alpha)| <= eps` on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    /// Slope.
    pub beta: f64,
    /// Intercept.
    pub alpha: f64,
    /// Uniform error on `[-1, 1]`.
    pub epsilon: f64,
}

/// Slope formula
/// `(1/sigma) phi(-mu/sigma) (1 + C3 He3/(6 sigma) + C3^2 He6/(72 sigma^2) + C4 He4/(24 sigma^2))`
/// at `-mu/sigma`.
///
/// This is `E'(0)` for the textbook sign; see [`edgeworth_density_with`].
pub fn beta_formula(params: &EdgeworthParams) -> f64 {
    let s = params.sigma;
    let z = -params.mu / s;
    let (c3, c4) = (params.c3(), params.c4());
    normal_pdf(z) / s
        * (1.0 + c3 * he(3, z) / (6.0 * s) + c3 * c3 * he(6, z) / (72.0 * s * s) + c4 * he(4, z) / (24.0 * s * s))
}

/// Curvature bound
/// `sigma^-3 phi((z-mu)/sigma) |(z - mu) - C3 He4/6 - C3^2 He7/(72 sigma) - C4 He5/(24 sigma)|`
/// at a point `z`.
pub fn epsilon_integrand(params: &EdgeworthParams, z: f64) -> f64 {
    let s = params.sigma;
    let u = (z - params.mu) / s;
    let (c3, c4) = (params.c3(), params.c4());
    normal_pdf(u) / (s * s * s)
        * ((z - params.mu) - c3 * he(4, u) / 6.0 - c3 * c3 * he(7, u) / (72.0 * s) - c4 * he(5, u) / (24.0 * s))
            .abs()
}

/// Maximum of `f` on `[a, b]`: a [`MAX_GRID`]-point scan, then golden-section
/// search on the two cells around the best grid point. Returns `(argmax, max)`.
pub fn maximize_on_interval(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let n = MAX_GRID - 1;
    let h = (b - a) / n as f64;
    let mut best = (a, f(a));
    let mut best_k = 0;
    for k in 1..=n {
        let x = a + k as f64 * h;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    let mut lo = a + best_k.saturating_sub(1) as f64 * h;
    let mut hi = (a + (best_k + 1) as f64 * h).min(b);
    let ratio = (sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOLERANCE {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if fm > best.1 {
        (mid, fm)
    } else {
        best
    }
}

/// `beta` from [`beta_formula`], `alpha = E(0)`, `eps` the maximum of
/// [`epsilon_integrand`] over `[-1, 1]`.
pub fn affine_fit(params: &EdgeworthParams) -> AffineFit {
    let beta = beta_formula(params);
    let alpha = edgeworth_cdf(params, 0.0);
    let (_, epsilon) = maximize_on_interval(|z| epsilon_integrand(params, z), -1.0, 1.0);
    AffineFit { beta, alpha, epsilon }
}

/// `sup |E(x) - (beta x + alpha)|` over `points` evenly spaced points of `[-1, 1]`.
pub fn affine_sup_error(params: &EdgeworthParams, fit: &AffineFit, sign: Q2Sign, points: usize) -> f64 {
    let n = points.max(2) - 1;
    (0..=n)
        .map(|k| {
            let x = -1.0 + 2.0 * k as f64 / n as f64;
            (edgeworth_cdf_with(params, x, sign) - (fit.beta * x + fit.alpha)).abs()
        })
        .fold(0.0, f64::max)
}

/// Least-squares line through the midpoint CDF of a discrete distribution on a
/// [`MAX_GRID`]-point grid of `[-1, 1]`, with the exact uniform error.
///
/// The midpoint CDF is constant between atoms, so its distance to a line peaks
/// at the interval ends or at an atom (left limit, value, or right limit).
pub fn affine_fit_discrete(dist: &ScoreDiffDistribution) -> AffineFit {
    let n = MAX_GRID - 1;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..=n {
        let x = -1.0 + 2.0 * k as f64 / n as f64;
        let y = dist.midpoint_cdf(x);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let cnt = (n + 1) as f64;
    let beta = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let alpha = (sy - beta * sx) / cnt;
    let fit = AffineFit { beta, alpha, epsilon: 0.0 };
    AffineFit { epsilon: discrete_sup_error(dist, beta, alpha), ..fit }
}

/// Exact `sup_{x in [-1,1]} |G(x) - (beta x + alpha)|` for the midpoint CDF `G`.
pub fn discrete_sup_error(dist: &ScoreDiffDistribution, beta: f64, alpha: f64) -> f64 {
    let line = |x: f64| beta * x + alpha;
    let mut sup = (dist.midpoint_cdf(-1.0) - line(-1.0))
        .abs()
        .max((dist.midpoint_cdf(1.0) - line(1.0)).abs());
    for &(v, _) in dist.atoms() {
        if !(-1.0..=1.0).contains(&v) {
            continue;
        }
        let l = line(v);
        for g in [dist.prob_below(v), dist.midpoint_cdf(v), dist.cdf(v)] {
            sup = sup.max((g - l).abs());
        }
    }
    sup
}

/// `sqrt(2 eps / beta)`.
pub fn gamma_from_affine(fit: &AffineFit) -> Result<f64> {
    if !(fit.beta > 0.0) {
        return Err(Error::VacuousBound { bound: "affine radius (beta <= 0, flat CDF)" });
    }
    Ok(sqrt(2.0 * fit.epsilon / fit.beta))
}

/// Outcome of a grid check of the affine radius on one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma5Check {
    /// `Pr[Y_t = 1]` under the event's joint.
    pub belief: f64,
    /// `sqrt(2 eps / beta)`.
    pub radius: f64,
    /// Utility of reporting the belief.
    pub belief_utility: f64,
    /// Largest `U(r) - U(belief)` over grid reports farther than the radius
    /// (negative when the contract holds); `-inf` if there were none.
    pub worst_far_gain: f64,
    /// Grid reports farther than the radius.
    pub far_points: usize,
    /// Most utile grid report overall.
    pub grid_best: f64,
    /// Whether every far report was strictly worse.
    pub holds: bool,
}

/// Check that reports farther than `sqrt(2 eps / beta)` from the belief lose
/// utility, with `U(r) = E[g(-Delta(r))]` and `g` the leave-one-out CDF.
pub fn lemma5_check(
    event: &EventJoint,
    g: impl Fn(f64) -> f64,
    fit: &AffineFit,
    resolution: f64,
) -> Result<Lemma5Check> {
    let steps = grid_steps(resolution)?;
    let radius = gamma_from_affine(fit)?;
    let belief = event.marginal();
    let u_belief = event_utility_with(belief, event, &g);
    let mut worst = f64::NEG_INFINITY;
    let mut far = 0;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=steps {
        let r = k as f64 / steps as f64;
        let u = event_utility_with(r, event, &g);
        if u > best.0 {
            best = (u, r);
        }
        if (r - belief).abs() > radius {
            far += 1;
            worst = worst.max(u - u_belief);
        }
    }
    Ok(Lemma5Check {
        belief,
        radius,
        belief_utility: u_belief,
        worst_far_gain: worst,
        far_points: far,
        grid_best: best.1,
        holds: worst < 0.0,
    })
}

/// Per-event radius and its intermediate constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaveOneOutGamma {
    /// The radius.
    pub gamma: f64,
    /// `1 + 5|C3| + 6 C3^2/sigma + |C4|/sigma`.
    pub a: f64,
    /// `3|C3| + 2 C3^2/sigma + 2|C4|/sigma`.
    pub b: f64,
}

/// Smallest `gamma` with
/// `gamma^2 / 2 >= exp(mu^2/sigma^2) (sigma^-2 (|mu| + A) + sigma D / m) / (1 - B / sigma)`
/// for the leave-one-out statistics of one event.
pub fn gamma_leave_one_out(params: &EdgeworthParams) -> Result<LeaveOneOutGamma> {
    let s = params.sigma;
    let (c3, c4) = (params.c3().abs(), params.c4().abs());
    let a = 1.0 + 5.0 * c3 + 6.0 * c3 * c3 / s + c4 / s;
    let b = 3.0 * c3 + 2.0 * c3 * c3 / s + 2.0 * c4 / s;
    let denom = 1.0 - b / s;
    if !(denom > 0.0) {
        return Err(Error::VacuousBound { bound: "leave-one-out radius (sigma_it <= B_it)" });
    }
    let mu = params.mu;
    let rhs = exp(mu * mu / (s * s)) * ((mu.abs() + a) / (s * s) + s * params.d / params.m as f64) / denom;
    Ok(LeaveOneOutGamma { gamma: sqrt(2.0 * rhs), a, b })
}

/// `4 + 5 sqrt|C3| + 3 |C3| + sqrt|C4|`.
pub fn theorem2_constant(c3: f64, c4: f64) -> f64 {
    4.0 + 5.0 * sqrt(c3.abs()) + 3.0 * c3.abs() + sqrt(c4.abs())
}

/// `8 (2C + 3D) / (sqrt(sigma) - 2C)`.
pub fn gamma_theorem2(sigma: f64, c3: f64, c4: f64, d: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter { name: "sigma", value: sigma, requirement: "sigma > 0" });
    }
    let c = theorem2_constant(c3, c4);
    let denom = sqrt(sigma) - 2.0 * c;
    if !(denom > 0.0) {
        return Err(Error::VacuousBound { bound: "global radius (sqrt(sigma) <= 2C)" });
    }
    Ok(8.0 * (2.0 * c + 3.0 * d) / denom)
}

/// Margins of the three competitiveness requirements; each holds when its margin is `>= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition3 {
    /// `sigma - 4`.
    pub sigma_margin: f64,
    /// `U(truthful) - (1/2 - delta)`.
    pub truthful_margin: f64,
    /// `(1/2 + delta) - U(max)`.
    pub max_margin: f64,
    /// `0.33 - (P / sigma^3 + delta)`.
    pub ratio_margin: f64,
    /// `delta + P / sigma^3`.
    pub delta_hat: f64,
    /// All margins non-negative.
    pub holds: bool,
}

/// Evaluate the requirements.
pub fn condition3_check(sigma: f64, delta: f64, lyapunov: f64, utility_truthful: f64, utility_max: f64) -> Condition3 {
    let ratio = lyapunov / (sigma * sigma * sigma);
    let sigma_margin = sigma - 4.0;
    let truthful_margin = utility_truthful - (0.5 - delta);
    let max_margin = (0.5 + delta) - utility_max;
    let ratio_margin = 0.33 - (ratio + delta);
    Condition3 {
        sigma_margin,
        truthful_margin,
        max_margin,
        ratio_margin,
        delta_hat: delta + ratio,
        holds: sigma_margin >= 0.0 && truthful_margin >= 0.0 && max_margin >= 0.0 && ratio_margin >= 0.0,
    }
}

/// `sqrt(pi/8) ln((1/2 + d) / (1/2 - d))`, the bound on `|mu| / sigma` at a
/// best response.
pub fn bounded_ratio_bound(delta_hat: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&delta_hat) {
        return Err(Error::InvalidParameter {
            name: "delta_hat",
            value: delta_hat,
            requirement: "0 <= delta_hat < 1/2",
        });
    }
    Ok(sqrt(core::f64::consts::PI / 8.0) * ln((0.5 + delta_hat) / (0.5 - delta_hat)))
}

/// Normal-approximation gap against its Lyapunov bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryEsseen {
    /// `|U - Phi(-mu/sigma)|`.
    pub gap: f64,
    /// `P / sigma^3`.
    pub bound: f64,
    /// Tie-aware utility from the exact convolution.
    pub utility: f64,
    /// `Phi(-mu/sigma)`.
    pub normal: f64,
    /// `gap <= bound`.
    pub holds: bool,
}

/// Compare the exact utility of `r_i` with its normal approximation.
pub fn berry_esseen_gap(r_i: &ReportVector, belief: &BeliefModel) -> Result<BerryEsseen> {
    let total = total_distribution(r_i, belief, ConvolutionConfig::default())?;
    berry_esseen_from(&total)
}

/// [`berry_esseen_gap`] on an already convolved distribution.
pub fn berry_esseen_from(total: &ScoreDiffDistribution) -> Result<BerryEsseen> {
    let mo = total.moments();
    if !(mo.variance > 0.0) {
        return Err(Error::Degenerate);
    }
    let sigma = mo.sd();
    let utility = total.midpoint_cdf(0.0);
    let normal = normal_cdf(-mo.mean / sigma);
    let gap = (utility - normal).abs();
    let bound = mo.lyapunov / (sigma * sigma * sigma);
    Ok(BerryEsseen { gap, bound, utility, normal, holds: gap <= bound })
}

/// `m sup |G - E|` for an exact leave-one-out distribution `G`, over the jump
/// points of `G` (both one-sided values).
pub fn empirical_d_hat(rest: &ScoreDiffDistribution, params: &EdgeworthParams, sign: Q2Sign) -> f64 {
    let sup = rest
        .atoms()
        .iter()
        .map(|&(v, _)| {
            let e = edgeworth_cdf_with(params, v, sign);
            (rest.cdf(v) - e).abs().max((rest.prob_below(v) - e).abs())
        })
        .fold(0.0, f64::max);
    params.m as f64 * sup
}

/// `sup_x |F_n(x) - f(x)|` for the empirical CDF of `sorted` samples, checked
/// on both sides of every jump.
pub fn empirical_sup_distance(sorted: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let fv = f(v);
        sup = sup.max((i as f64 / n - fv).abs()).max((j as f64 / n - fv).abs());
        i = j;
    }
    sup
}

/// Settings for [`certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyConfig {
    /// Competitiveness slack.
    pub delta: f64,
    /// Edgeworth constant `D`.
    pub d: f64,
    /// Maximum achievable utility; computed by coordinate ascent when `None`.
    pub utility_max: Option<f64>,
    /// Grid for the coordinate ascent.
    pub resolution: f64,
    /// Compute `D_hat` from exact leave-one-out distributions.
    pub d_hat: bool,
    /// Convolution limits.
    pub convolution: ConvolutionConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            delta: 0.1,
            d: 1.0,
            utility_max: None,
            resolution: 0.01,
            d_hat: true,
            convolution: ConvolutionConfig::default(),
        }
    }
}

/// Approximate-truthfulness summary for one report against one belief.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthfulnessCertificate {
    /// Cumulants of the total score difference.
    pub moments: Moments,
    /// `C3` of the total.
    pub c3: f64,
    /// `C4` of the total.
    pub c4: f64,
    /// Global radius, `None` when vacuous.
    pub gamma_theorem2: Option<f64>,
    /// Per-event radii (`None` where vacuous).
    pub gamma_per_event: Vec<Option<LeaveOneOutGamma>>,
    /// Competitiveness margins.
    pub condition3: Condition3,
    /// `delta`.
    pub delta: f64,
    /// `delta + P / sigma^3`.
    pub delta_hat: f64,
    /// Bound on `|mu| / sigma` at a best response, when `delta_hat < 1/2`.
    pub ratio_bound: Option<f64>,
    /// Configured `D`.
    pub d: f64,
    /// `m sup |G_t - E_t|` per event, when requested.
    pub d_hat_empirical: Vec<f64>,
    /// Utility of `r_i`.
    pub utility_truthful: f64,
    /// Maximum utility used for the competitiveness check.
    pub utility_max: f64,
}

/// Compute every radius and margin for report `r_i` (normally the belief).
pub fn certify(r_i: &ReportVector, belief: &BeliefModel, config: CertifyConfig) -> Result<TruthfulnessCertificate> {
    let m = belief.m();
    let events = event_distributions(r_i, belief)?;
    let moments = events.iter().fold(Moments::default(), |acc, d| acc.add(d.moments()));
    let total = total_distribution(r_i, belief, config.convolution)?;
    let utility_truthful = total.midpoint_cdf(0.0);
    let utility_max = match config.utility_max {
        Some(u) => u,
        None => coordinate_best_response(belief, r_i, config.resolution, 8, config.convolution)?
            .utility
            .max(utility_truthful),
    };
    let params = EdgeworthParams::from_moments(&moments, config.d, m)?;
    let condition3 = condition3_check(params.sigma, config.delta, moments.lyapunov, utility_truthful, utility_max);
    let gamma_theorem2 = gamma_theorem2(params.sigma, params.c3(), params.c4(), config.d).ok();
    let mut gamma_per_event = Vec::with_capacity(m);
    let mut d_hat_empirical = Vec::new();
    let mut cache: Vec<(usize, f64)> = Vec::new();
    for t in 0..m {
        let rest = params_without(&moments, &events[t].moments());
        let loo = EdgeworthParams::from_moments(&rest, config.d, m).ok();
        gamma_per_event.push(loo.as_ref().and_then(|p| gamma_leave_one_out(p).ok()));
        if config.d_hat && m >= 2 {
            let key = cache.iter().find(|&&(k, _)| {
                belief.events()[k] == belief.events()[t] && r_i.as_slice()[k] == r_i.as_slice()[t]
            });
            let value = match (key, loo) {
                (Some(&(_, v)), _) => v,
                (None, Some(p)) => {
                    let rest_dist = leave_one_out_distribution(r_i, belief, t, config.convolution)?;
                    let v = empirical_d_hat(&rest_dist, &p, Q2Sign::Printed);
                    cache.push((t, v));
                    v
                }
                (None, None) => f64::NAN,
            };
            d_hat_empirical.push(value);
        }
    }
    let delta_hat = condition3.delta_hat;
    Ok(TruthfulnessCertificate {
        c3: params.c3(),
        c4: params.c4(),
        moments,
        gamma_theorem2,
        gamma_per_event,
        condition3,
        delta: config.delta,
        delta_hat,
        ratio_bound: bounded_ratio_bound(delta_hat).ok(),
        d: config.d,
        d_hat_empirical,
        utility_truthful,
        utility_max,
    })
}

fn params_without(total: &Moments, term: &Moments) -> Moments {
    Moments {
        mean: total.mean - term.mean,
        variance: (total.variance - term.variance).max(0.0),
        k3: total.k3 - term.k3,
        k4: total.k4 - term.k4,
        lyapunov: total.lyapunov - term.lyapunov,
    }
}

/// One row of a formula-level sweep over `m` for an iid template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Event count.
    pub m: usize,
    /// `sigma_i` of the total.
    pub sigma: f64,
    /// Global radius, `None` when vacuous.
    pub gamma_theorem2: Option<f64>,
    /// Per-event radius (identical for every event), `None` when vacuous.
    pub gamma_per_event: Option<f64>,
    /// Normal-approximation utility of the template report.
    pub utility_truthful: f64,
    /// Largest normal-approximation utility over constant reports on the grid.
    pub utility_max: f64,
    /// Competitiveness margins.
    pub condition3: Condition3,
}

/// Sweep `m` over `ms` for `m` iid copies of `event` with report `r` on every
/// event. Cumulants scale exactly with `m`; utilities use `Phi(-mu/sigma)`.
pub fn gamma_sweep(event: &EventJoint, r: f64, ms: &[usize], d: f64, delta: f64, resolution: f64) -> Result<Vec<SweepRow>> {
    let steps = grid_steps(resolution)?;
    let per = crate::distribution::score_diff_event(r, event)?.moments();
    let alternatives: Vec<Moments> = (0..=steps)
        .map(|k| crate::distribution::score_diff_event(k as f64 / steps as f64, event).map(|d| d.moments()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let total = scale(&per, m as f64);
        let params = EdgeworthParams::from_moments(&total, d, m)?;
        let rest = EdgeworthParams::from_moments(&scale(&per, (m - 1) as f64), d, m).ok();
        let normal = |mo: &Moments| if mo.variance > 0.0 {
            normal_cdf(-mo.mean / mo.sd())
        } else if mo.mean < 0.0 {
            1.0
        } else if mo.mean > 0.0 {
            0.0
        } else {
            0.5
        };
        let utility_truthful = normal(&total);
        let utility_max = alternatives
            .iter()
            .map(|a| normal(&scale(a, m as f64)))
            .fold(utility_truthful, f64::max);
        rows.push(SweepRow {
            m,
            sigma: params.sigma,
            gamma_theorem2: gamma_theorem2(params.sigma, params.c3(), params.c4(), d).ok(),
            gamma_per_event: rest.and_then(|p| gamma_leave_one_out(&p).ok()).map(|g| g.gamma),
            utility_truthful,
            utility_max,
            condition3: condition3_check(params.sigma, delta, total.lyapunov, utility_truthful, utility_max),
        });
    }
    Ok(rows)
}

fn scale(mo: &Moments, k: f64) -> Moments {
    Moments {
        mean: mo.mean * k,
        variance: mo.variance * k,
        k3: mo.k3 * k,
        k4: mo.k4 * k,
        lyapunov: mo.lyapunov * k,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| (ln(x), ln(y))).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

/// `k` logarithmically spaced points from `lo` to `hi`.
pub fn log_space(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (ln(lo), ln(hi));
    (0..k).map(|i| exp(a + (b - a) * i as f64 / (k - 1) as f64)).collect()
}
