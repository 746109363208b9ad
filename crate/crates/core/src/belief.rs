//! Belief models.
//!
//! Two worlds are supported. The p-biased coin world has each event's bias
//! drawn uniformly from `{p, 1 - p}`; one forecaster learns the biases and the
//! rest keep the prior `1/2`. The general belief model gives, per event, a
//! finite joint distribution over the opponent's report and the outcome, with
//! events independent of each other.

use alloc::vec::Vec;

use rand::Rng;

use crate::mechanism::{check_dims, check_probability};
use crate::seeding::block_rng;
use crate::{Error, OutcomeVector, ReportVector, Result};

/// Default resolution of opponent report grids.
pub const REPORT_GRID: f64 = 0.01;

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// The p-biased coin setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinScenario {
    m: usize,
    p: f64,
    informed_index: usize,
    n: usize,
}

impl CoinScenario {
    /// Requires `0 < p < 1/2`, `n >= 1` and `informed_index < n`.
    pub fn new(m: usize, n: usize, p: f64, informed_index: usize) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::InvalidParameter { name: "p", value: p, requirement: "0 < p < 1/2" });
        }
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", value: 0.0, requirement: "n >= 1" });
        }
        if informed_index >= n {
            return Err(Error::InvalidParameter {
                name: "informed_index",
                value: informed_index as f64,
                requirement: "informed_index < n",
            });
        }
        Ok(CoinScenario { m, p, informed_index, n })
    }

    /// Event count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Player count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Bias parameter.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// The informed forecaster.
    pub fn informed_index(&self) -> usize {
        self.informed_index
    }
}

/// A sign-flip reflection of the hypercube: coordinate `t` maps to `1 - x_t`
/// for every `t` in the flip set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reflection {
    flips: Vec<bool>,
}

impl Reflection {
    /// Reflection from a per-coordinate flag list.
    pub fn new(flips: Vec<bool>) -> Self {
        Reflection { flips }
    }

    /// Reflection from a zero-based flip set.
    pub fn from_set(m: usize, set: &[usize]) -> Result<Self> {
        let mut flips = alloc::vec![false; m];
        for &t in set {
            if t >= m {
                return Err(Error::InvalidParameter {
                    name: "flip index",
                    value: t as f64,
                    requirement: "index < m",
                });
            }
            flips[t] = true;
        }
        Ok(Reflection { flips })
    }

    /// Reflection whose flip set is the set bits of `mask`.
    pub fn from_mask(mask: u64, m: usize) -> Self {
        Reflection { flips: (0..m).map(|t| (mask >> t) & 1 == 1).collect() }
    }

    /// The identity on `m` coordinates.
    pub fn identity(m: usize) -> Self {
        Reflection { flips: alloc::vec![false; m] }
    }

    /// Dimension.
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    /// True for the zero-dimensional reflection.
    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    /// Per-coordinate flags.
    pub fn flips(&self) -> &[bool] {
        &self.flips
    }

    /// Reflect an outcome vector.
    pub fn apply_outcome(&self, y: &OutcomeVector) -> Result<OutcomeVector> {
        check_dims(self.len(), y.len())?;
        Ok(OutcomeVector::new(y.as_slice().iter().zip(&self.flips).map(|(&b, &f)| b ^ f).collect()))
    }

    pub(crate) fn apply_slice(&self, r: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(r.iter().zip(&self.flips).map(|(&x, &f)| if f { 1.0 - x } else { x }));
    }
}

/// Reflect a report vector.
pub fn apply_reflection(reflection: &Reflection, r: &ReportVector) -> Result<ReportVector> {
    check_dims(reflection.len(), r.len())?;
    let mut out = Vec::with_capacity(r.len());
    reflection.apply_slice(r.as_slice(), &mut out);
    Ok(ReportVector::new(out).expect("reflection keeps entries in [0, 1]"))
}

/// A world after the canonical inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalWorld {
    /// Biases after inversion, all equal to `p`.
    pub theta: Vec<f64>,
    /// Reports after inversion.
    pub reports: Vec<ReportVector>,
    /// Outcomes after inversion.
    pub outcomes: OutcomeVector,
    /// The reflection that was applied.
    pub reflection: Reflection,
}

/// Reflect every coordinate whose bias is `1 - p` so the biases become `(p, ..., p)`.
///
/// Reports and outcomes are reflected on the same coordinates, so every distance
/// from a report to the outcome, and hence the winner set, is unchanged.
pub fn canonical_inversion(
    theta: &[f64],
    p: f64,
    reports: &[ReportVector],
    y: &OutcomeVector,
) -> Result<CanonicalWorld> {
    check_dims(theta.len(), y.len())?;
    let mut flips = Vec::with_capacity(theta.len());
    for &th in theta {
        if th == p {
            flips.push(false);
        } else if th == 1.0 - p {
            flips.push(true);
        } else {
            return Err(Error::InvalidParameter {
                name: "theta_t",
                value: th,
                requirement: "theta_t in {p, 1 - p}",
            });
        }
    }
    let reflection = Reflection::new(flips);
    let reports = reports
        .iter()
        .map(|r| apply_reflection(&reflection, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(CanonicalWorld {
        theta: alloc::vec![p; theta.len()],
        outcomes: reflection.apply_outcome(y)?,
        reports,
        reflection,
    })
}

/// Draw biases uniformly from `{p, 1 - p}` and an outcome per event.
///
/// Returns `(theta, y)`; identical seeds give identical worlds.
pub fn sample_coin_world(scenario: &CoinScenario, seed: u64) -> (Vec<f64>, OutcomeVector) {
    let mut rng = block_rng(seed, 0);
    let p = scenario.p();
    let mut theta = Vec::with_capacity(scenario.m());
    let mut y = Vec::with_capacity(scenario.m());
    for _ in 0..scenario.m() {
        let th = if rng.random::<bool>() { 1.0 - p } else { p };
        theta.push(th);
        y.push(rng.random::<f64>() < th);
    }
    (theta, OutcomeVector::new(y))
}

/// Who knows what in the coin world: the informed player's posterior is the
/// ground truth, everyone else's is the hypercube center.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    theta: Vec<f64>,
    informed_index: usize,
    n: usize,
}

impl SignalModel {
    /// Validates `theta_t in {p, 1 - p}`.
    pub fn new(scenario: &CoinScenario, theta: Vec<f64>) -> Result<Self> {
        check_dims(scenario.m(), theta.len())?;
        let p = scenario.p();
        if let Some(&bad) = theta.iter().find(|&&t| t != p && t != 1.0 - p) {
            return Err(Error::InvalidParameter {
                name: "theta_t",
                value: bad,
                requirement: "theta_t in {p, 1 - p}",
            });
        }
        Ok(SignalModel { theta, informed_index: scenario.informed_index(), n: scenario.n() })
    }

    /// Ground truth biases.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Posterior mean of `player` for every event.
    pub fn posterior(&self, player: usize) -> Vec<f64> {
        assert!(player < self.n, "player index out of range");
        if player == self.informed_index {
            self.theta.clone()
        } else {
            alloc::vec![0.5; self.theta.len()]
        }
    }
}

/// One atom of a per-event joint over (opponent report, outcome).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    /// Opponent's report for the event.
    pub report: f64,
    /// Event outcome.
    pub outcome: bool,
    /// Probability of this atom.
    pub weight: f64,
}

/// Finite joint distribution of the opponent's report and the outcome for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventJoint {
    atoms: Vec<JointAtom>,
}

impl EventJoint {
    /// Validates reports in `[0, 1]`, non-negative weights summing to 1 within 1e-12.
    /// Zero-weight atoms are dropped.
    pub fn new(atoms: Vec<JointAtom>) -> Result<Self> {
        let mut sum = 0.0;
        for a in &atoms {
            check_probability("opponent report", a.report)?;
            if !(a.weight >= 0.0) {
                return Err(Error::InvalidWeights { sum: a.weight });
            }
            sum += a.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(EventJoint { atoms: atoms.into_iter().filter(|a| a.weight > 0.0).collect() })
    }

    /// Opponent report independent of the outcome, `Pr[Y = 1] = p`.
    pub fn independent(reports: &[(f64, f64)], p: f64) -> Result<Self> {
        check_probability("outcome probability", p)?;
        let mut atoms = Vec::with_capacity(2 * reports.len());
        for &(report, w) in reports {
            atoms.push(JointAtom { report, outcome: true, weight: w * p });
            atoms.push(JointAtom { report, outcome: false, weight: w * (1.0 - p) });
        }
        Self::new(atoms)
    }

    /// Deterministic opponent report.
    pub fn point(report: f64, p: f64) -> Result<Self> {
        Self::independent(&[(report, 1.0)], p)
    }

    /// Discretize a continuous opponent-report law onto a grid of the given resolution.
    ///
    /// Grid point `k * resolution` receives `cdf(k h + h/2) - cdf(k h - h/2)`;
    /// the outcome is 1 with probability `outcome_prob(report)`.
    pub fn discretize(
        resolution: f64,
        cdf: impl Fn(f64) -> f64,
        outcome_prob: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "resolution",
                value: resolution,
                requirement: "0 < resolution <= 1",
            });
        }
        let steps = crate::math::round_half_even(1.0 / resolution) as usize;
        let h = 1.0 / steps as f64;
        let mut masses = Vec::with_capacity(steps + 1);
        let mut total = 0.0;
        for k in 0..=steps {
            let x = k as f64 * h;
            let lo = if k == 0 { f64::NEG_INFINITY } else { x - h / 2.0 };
            let hi = if k == steps { f64::INFINITY } else { x + h / 2.0 };
            let mass = (cdf(hi) - cdf(lo)).max(0.0);
            total += mass;
            masses.push((x, mass));
        }
        if !(total > 0.0) {
            return Err(Error::InvalidWeights { sum: total });
        }
        let mut atoms = Vec::with_capacity(2 * masses.len());
        for (x, mass) in masses {
            let w = mass / total;
            let q = outcome_prob(x);
            check_probability("outcome probability", q)?;
            atoms.push(JointAtom { report: x, outcome: true, weight: w * q });
            atoms.push(JointAtom { report: x, outcome: false, weight: w * (1.0 - q) });
        }
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        for a in &mut atoms {
            a.weight /= sum;
        }
        Self::new(atoms)
    }

    /// Atoms with positive weight.
    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    /// `Pr[Y = 1]`.
    pub fn marginal(&self) -> f64 {
        self.atoms.iter().filter(|a| a.outcome).map(|a| a.weight).sum()
    }
}

/// A forecaster's belief about an opponent and the outcomes, independent across events.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefModel {
    events: Vec<EventJoint>,
}

impl BeliefModel {
    /// One joint per event.
    pub fn new(events: Vec<EventJoint>) -> Self {
        BeliefModel { events }
    }

    /// `m` copies of the same event.
    pub fn iid(event: EventJoint, m: usize) -> Self {
        BeliefModel { events: alloc::vec![event; m] }
    }

    /// Event count.
    pub fn m(&self) -> usize {
        self.events.len()
    }

    /// Per-event joints.
    pub fn events(&self) -> &[EventJoint] {
        &self.events
    }

    /// Drops event `t`.
    pub fn without_event(&self, t: usize) -> BeliefModel {
        let mut events = self.events.clone();
        events.remove(t);
        BeliefModel { events }
    }
}

/// The marginal belief vector `p_i`.
pub fn belief_marginal(belief: &BeliefModel) -> Vec<f64> {
    belief.events.iter().map(EventJoint::marginal).collect()
}
