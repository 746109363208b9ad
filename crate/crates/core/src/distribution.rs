//! Distributions of score differences.
//!
//! On event `t` the score difference is `S(R_jt, Y_t) - S(r_it, Y_t)`: the
//! opponent's score minus one's own, a value in `[-1, 1]`. Forecaster `i`
//! wins when the sum over events is negative and splits a tie at zero.
//!
//! Distributions are finite atom lists kept sorted by value. Sums of
//! independent terms are computed by convolution, exactly while the number of
//! candidate atoms stays under a cap and on a fixed lattice beyond it. Cumulants
//! are tracked alongside the atoms so they stay exact even after binning.

use alloc::vec::Vec;

use crate::belief::EventJoint;
use crate::math::{round_half_even, sqrt};
use crate::mechanism::{check_probability, score_unchecked, FLOAT_TIE_TOLERANCE};
use crate::{Error, Result};

/// Candidate atom count above which convolution switches to binning.
pub const DEFAULT_ATOM_CAP: usize = 2_000_000;

/// Default bin width on the score-difference axis.
pub const DEFAULT_RESOLUTION: f64 = 1e-4;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Mean, variance, third and fourth cumulants, and the Lyapunov sum
/// `sum_t E|X_t - E X_t|^3` of a sum of independent terms.
///
/// All five add under independent summation. For a single term the Lyapunov
/// sum is its absolute third central moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    /// Mean.
    pub mean: f64,
    /// Variance.
    pub variance: f64,
    /// Third cumulant (equal to the third central moment).
    pub k3: f64,
    /// Fourth cumulant `mu_4 - 3 sigma^4`.
    pub k4: f64,
    /// Sum over terms of absolute third central moments.
    pub lyapunov: f64,
}

impl Moments {
    /// Moments of the sum of two independent variables.
    pub fn add(self, other: Moments) -> Moments {
        Moments {
            mean: self.mean + other.mean,
            variance: self.variance + other.variance,
            k3: self.k3 + other.k3,
            k4: self.k4 + other.k4,
            lyapunov: self.lyapunov + other.lyapunov,
        }
    }

    /// Standard deviation.
    pub fn sd(&self) -> f64 {
        sqrt(self.variance.max(0.0))
    }

    /// Central moments of a single atom list.
    pub fn of_atoms(atoms: &[(f64, f64)]) -> Moments {
        let mean = atoms.iter().fold(0.0, |acc, &(v, w)| acc + v * w);
        let (mut m2, mut m3, mut m4, mut abs3) = (0.0, 0.0, 0.0, 0.0);
        for &(v, w) in atoms {
            let d = v - mean;
            let d2 = d * d;
            m2 += w * d2;
            m3 += w * d2 * d;
            m4 += w * d2 * d2;
            abs3 += w * d2 * d.abs();
        }
        Moments { mean, variance: m2, k3: m3, k4: m4 - 3.0 * m2 * m2, lyapunov: abs3 }
    }
}

/// A finite distribution of (possibly cumulative) score differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDiffDistribution {
    atoms: Vec<(f64, f64)>,
    moments: Moments,
    exact: bool,
}

impl ScoreDiffDistribution {
    /// Builds from `(value, weight)` pairs. Weights must be non-negative and sum
    /// to 1; equal values (within the tie tolerance) are merged.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut sum = 0.0;
        for &(v, w) in &atoms {
            if !v.is_finite() {
                return Err(Error::OutOfRange { what: "score difference", value: v });
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidWeights { sum: w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        let atoms = merge_sorted(sort_atoms(atoms));
        let moments = Moments::of_atoms(&atoms);
        Ok(ScoreDiffDistribution { atoms, moments, exact: true })
    }

    /// All mass at `value`.
    pub fn point(value: f64) -> Self {
        ScoreDiffDistribution {
            atoms: alloc::vec![(value, 1.0)],
            moments: Moments { mean: value, ..Moments::default() },
            exact: true,
        }
    }

    /// Sorted, merged atoms.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Cumulants propagated through every convolution.
    pub fn moments(&self) -> Moments {
        self.moments
    }

    /// False once any convolution step had to bin.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// Never true for a valid distribution.
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest atom.
    pub fn min(&self) -> f64 {
        self.atoms[0].0
    }

    /// Largest atom.
    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `Pr[X <= x]`, counting atoms within the tie tolerance of `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let cut = x + FLOAT_TIE_TOLERANCE;
        let idx = self.atoms.partition_point(|&(v, _)| v <= cut);
        self.prefix_mass(idx)
    }

    /// `Pr[X < x]`, excluding atoms within the tie tolerance of `x`.
    pub fn prob_below(&self, x: f64) -> f64 {
        let cut = x - FLOAT_TIE_TOLERANCE;
        let idx = self.atoms.partition_point(|&(v, _)| v < cut);
        self.prefix_mass(idx)
    }

    /// `Pr[X = x]` up to the tie tolerance.
    pub fn prob_at(&self, x: f64) -> f64 {
        let lo = self.atoms.partition_point(|&(v, _)| v < x - FLOAT_TIE_TOLERANCE);
        let hi = self.atoms.partition_point(|&(v, _)| v <= x + FLOAT_TIE_TOLERANCE);
        self.atoms[lo..hi].iter().map(|&(_, w)| w).sum()
    }

    /// `Pr[X < x] + Pr[X = x] / 2`: the win probability against a threshold
    /// with ties split evenly.
    pub fn midpoint_cdf(&self, x: f64) -> f64 {
        let lo = self.atoms.partition_point(|&(v, _)| v < x - FLOAT_TIE_TOLERANCE);
        let hi = self.atoms.partition_point(|&(v, _)| v <= x + FLOAT_TIE_TOLERANCE);
        let at: f64 = self.atoms[lo..hi].iter().map(|&(_, w)| w).sum();
        (self.prefix_mass(lo) + 0.5 * at).min(1.0)
    }

    fn prefix_mass(&self, idx: usize) -> f64 {
        if idx == self.atoms.len() {
            return 1.0;
        }
        self.atoms[..idx].iter().fold(0.0, |acc, &(_, w)| acc + w).min(1.0)
    }
}

/// `Pr[sum <= x]`.
pub fn cdf_g(dist: &ScoreDiffDistribution, x: f64) -> f64 {
    dist.cdf(x)
}

/// Per-event score difference against a belief about the opponent and outcome.
pub fn score_diff_event(r_it: f64, event: &EventJoint) -> Result<ScoreDiffDistribution> {
    check_probability("report", r_it)?;
    let atoms = event
        .atoms()
        .iter()
        .map(|a| (score_unchecked(a.report, a.outcome) - score_unchecked(r_it, a.outcome), a.weight))
        .collect();
    ScoreDiffDistribution::from_atoms(atoms)
}

/// Convolution settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionConfig {
    /// Candidate atom count above which a step is binned.
    pub atom_cap: usize,
    /// Bin width used once binning starts.
    pub resolution: f64,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        ConvolutionConfig { atom_cap: DEFAULT_ATOM_CAP, resolution: DEFAULT_RESOLUTION }
    }
}

/// Distribution of the sum of independent terms.
///
/// A step whose candidate atom count (product of the two operands' sizes)
/// exceeds [`DEFAULT_ATOM_CAP`] is binned to the nearest multiple of
/// `resolution`, ties to even.
pub fn convolve(dists: &[ScoreDiffDistribution], resolution: f64) -> Result<ScoreDiffDistribution> {
    convolve_with(dists, ConvolutionConfig { resolution, ..ConvolutionConfig::default() })
}

/// [`convolve`] with an explicit configuration.
pub fn convolve_with(
    dists: &[ScoreDiffDistribution],
    config: ConvolutionConfig,
) -> Result<ScoreDiffDistribution> {
    if !(config.resolution > 0.0) {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: config.resolution,
            requirement: "resolution > 0",
        });
    }
    let Some(first) = dists.first() else {
        return Err(Error::NoReports);
    };
    let mut acc = first.clone();
    for next in &dists[1..] {
        acc = convolve_pair(&acc, next, config);
    }
    Ok(acc)
}

/// Exact convolution, refusing instead of binning.
pub fn convolve_exact(dists: &[ScoreDiffDistribution], atom_cap: usize) -> Result<ScoreDiffDistribution> {
    let Some(first) = dists.first() else {
        return Err(Error::NoReports);
    };
    let mut acc = first.clone();
    for next in &dists[1..] {
        let candidates = acc.len().saturating_mul(next.len());
        if candidates > atom_cap {
            return Err(Error::AtomCap { atoms: candidates, cap: atom_cap });
        }
        acc = convolve_pair(&acc, next, ConvolutionConfig { atom_cap, resolution: DEFAULT_RESOLUTION });
    }
    Ok(acc)
}

fn convolve_pair(
    a: &ScoreDiffDistribution,
    b: &ScoreDiffDistribution,
    config: ConvolutionConfig,
) -> ScoreDiffDistribution {
    let moments = a.moments.add(b.moments);
    let candidates = a.len().saturating_mul(b.len());
    if candidates <= config.atom_cap {
        let mut sums = Vec::with_capacity(candidates);
        for &(va, wa) in &a.atoms {
            for &(vb, wb) in &b.atoms {
                sums.push((va + vb, wa * wb));
            }
        }
        ScoreDiffDistribution {
            atoms: merge_sorted(sort_atoms(sums)),
            moments,
            exact: a.exact && b.exact,
        }
    } else {
        let h = config.resolution;
        let mut bins: Vec<(i64, f64)> = Vec::with_capacity(candidates);
        for &(va, wa) in &a.atoms {
            for &(vb, wb) in &b.atoms {
                bins.push((round_half_even((va + vb) / h) as i64, wa * wb));
            }
        }
        bins.sort_unstable_by_key(|&(k, _)| k);
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut last: Option<i64> = None;
        for (k, w) in bins {
            if last == Some(k) {
                atoms.last_mut().expect("bin exists").1 += w;
            } else {
                atoms.push((k as f64 * h, w));
                last = Some(k);
            }
        }
        ScoreDiffDistribution { atoms, moments, exact: false }
    }
}

fn sort_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    atoms
}

/// Collapse runs of values within the tie tolerance of the run's first value.
fn merge_sorted(atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    let mut anchor = f64::NEG_INFINITY;
    for (v, w) in atoms {
        if w == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if v - anchor <= FLOAT_TIE_TOLERANCE => last.1 += w,
            _ => {
                out.push((v, w));
                anchor = v;
            }
        }
    }
    out
}
