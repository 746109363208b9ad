//! Quadratic scoring and the Simple Max winner rule.
//!
//! With the quadratic score `S(r, y) = 1 - (r - y)^2` the forecaster with the
//! highest total is the one whose report vector is closest to the outcome
//! vertex in Euclidean distance. That equivalence is used heavily by the
//! hedging geometry and is checked as a property below.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tie tolerance for floating-point score totals.
pub const FLOAT_TIE_TOLERANCE: f64 = 1e-12;

/// How close two totals must be to count as a tie.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieTolerance(pub f64);

impl TieTolerance {
    /// Bit-exact comparison, for inputs whose scores are exactly representable.
    pub const EXACT: TieTolerance = TieTolerance(0.0);
    /// Default for general floating inputs.
    pub const FLOAT: TieTolerance = TieTolerance(FLOAT_TIE_TOLERANCE);
}

impl Default for TieTolerance {
    fn default() -> Self {
        TieTolerance::FLOAT
    }
}

/// A forecaster's probabilities, one per event.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportVector(Vec<f64>);

impl ReportVector {
    /// Validates that every entry lies in `[0, 1]`.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        for &r in &entries {
            check_probability("report", r)?;
        }
        Ok(ReportVector(entries))
    }

    /// `m` copies of `value`.
    pub fn constant(m: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; m])
    }

    /// The hypercube center `(1/2, ..., 1/2)`.
    pub fn center(m: usize) -> Self {
        ReportVector(vec![0.5; m])
    }

    /// Number of events.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for the zero-event report.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries as a slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Consumes the vector.
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Squared Euclidean distance to an outcome vertex.
    pub fn squared_distance(&self, y: &OutcomeVector) -> Result<f64> {
        check_dims(self.len(), y.len())?;
        Ok(squared_distance_to_vertex(&self.0, y.as_slice()))
    }
}

/// Realized outcomes, one bit per event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutcomeVector(Vec<bool>);

impl OutcomeVector {
    /// Wraps a list of outcomes.
    pub fn new(bits: Vec<bool>) -> Self {
        OutcomeVector(bits)
    }

    /// Accepts `0`/`1` integers, rejecting anything else.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut out = Vec::with_capacity(bits.len());
        for &b in bits {
            match b {
                0 => out.push(false),
                1 => out.push(true),
                other => {
                    return Err(Error::OutOfRange { what: "outcome bit", value: f64::from(other) })
                }
            }
        }
        Ok(OutcomeVector(out))
    }

    /// Bit `t` of `mask` becomes outcome `t`.
    pub fn from_mask(mask: u64, m: usize) -> Self {
        OutcomeVector((0..m).map(|t| (mask >> t) & 1 == 1).collect())
    }

    /// Number of events.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for zero events.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Outcomes as a slice.
    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Hamming weight `||y||_1`.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Win probabilities for each player under Simple Max.
#[derive(Debug, Clone, PartialEq)]
pub struct WinnerShare(Vec<f64>);

impl WinnerShare {
    /// One entry per player.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Share of `player`.
    pub fn get(&self, player: usize) -> f64 {
        self.0[player]
    }

    /// Consumes the share vector.
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `1 - (r - y)^2`.
pub fn quadratic_score(r: f64, y: bool) -> Result<f64> {
    check_probability("report", r)?;
    Ok(score_unchecked(r, y))
}

#[inline]
pub(crate) fn score_unchecked(r: f64, y: bool) -> f64 {
    let target = if y { 1.0 } else { 0.0 };
    let d = r - target;
    1.0 - d * d
}

/// Sum of per-event quadratic scores, accumulated left to right.
pub fn total_score(r: &ReportVector, y: &OutcomeVector) -> Result<f64> {
    check_dims(y.len(), r.len())?;
    Ok(total_unchecked(r.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn total_unchecked(r: &[f64], y: &[bool]) -> f64 {
    r.iter().zip(y).fold(0.0, |acc, (&rt, &yt)| acc + score_unchecked(rt, yt))
}

#[inline]
pub(crate) fn squared_distance_to_vertex(r: &[f64], y: &[bool]) -> f64 {
    r.iter().zip(y).fold(0.0, |acc, (&rt, &yt)| {
        let d = rt - if yt { 1.0 } else { 0.0 };
        acc + d * d
    })
}

/// Indices of the players with the maximal total score.
pub fn winner_set(reports: &[ReportVector], y: &OutcomeVector) -> Result<Vec<usize>> {
    winner_set_with(reports, y, TieTolerance::default())
}

/// [`winner_set`] with an explicit tie tolerance.
pub fn winner_set_with(
    reports: &[ReportVector],
    y: &OutcomeVector,
    tol: TieTolerance,
) -> Result<Vec<usize>> {
    if reports.is_empty() {
        return Err(Error::NoReports);
    }
    for r in reports {
        check_dims(y.len(), r.len())?;
    }
    let totals: Vec<f64> =
        reports.iter().map(|r| total_unchecked(r.as_slice(), y.as_slice())).collect();
    Ok(winners_from_totals(&totals, tol))
}

pub(crate) fn winners_from_totals(totals: &[f64], tol: TieTolerance) -> Vec<usize> {
    let best = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    totals
        .iter()
        .enumerate()
        .filter(|(_, &s)| best - s <= tol.0)
        .map(|(i, _)| i)
        .collect()
}

/// Share of `player` given everyone's totals, without allocating.
#[inline]
pub(crate) fn share_from_totals(player: usize, totals: &[f64], tol: TieTolerance) -> f64 {
    let best = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best - totals[player] > tol.0 {
        return 0.0;
    }
    let ties = totals.iter().filter(|&&s| best - s <= tol.0).count();
    1.0 / ties as f64
}

/// Simple Max: uniform win probability over the winner set.
pub fn simple_max(reports: &[ReportVector], y: &OutcomeVector) -> Result<WinnerShare> {
    simple_max_with(reports, y, TieTolerance::default())
}

/// [`simple_max`] with an explicit tie tolerance.
pub fn simple_max_with(
    reports: &[ReportVector],
    y: &OutcomeVector,
    tol: TieTolerance,
) -> Result<WinnerShare> {
    let winners = winner_set_with(reports, y, tol)?;
    let share = 1.0 / winners.len() as f64;
    let mut out = vec![0.0; reports.len()];
    for w in winners {
        out[w] = share;
    }
    Ok(WinnerShare(out))
}

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(v: &[f64]) -> ReportVector {
        ReportVector::new(v.to_vec()).unwrap()
    }

    fn ov(v: &[u8]) -> OutcomeVector {
        OutcomeVector::from_bits(v).unwrap()
    }

    #[test]
    fn quadratic_score_examples() {
        assert_eq!(quadratic_score(1.0, true).unwrap(), 1.0);
        assert_eq!(quadratic_score(0.5, false).unwrap(), 0.75);
        assert!((quadratic_score(0.3, true).unwrap() - 0.51).abs() < 1e-15);
        assert!(quadratic_score(1.2, true).is_err());
        assert!(quadratic_score(f64::NAN, true).is_err());
    }

    #[test]
    fn total_score_examples() {
        assert_eq!(total_score(&rv(&[1.0, 1.0]), &ov(&[1, 1])).unwrap(), 2.0);
        assert_eq!(total_score(&rv(&[0.5, 0.5]), &ov(&[0, 1])).unwrap(), 1.5);
        assert_eq!(total_score(&rv(&[0.0, 1.0, 0.0]), &ov(&[1, 1, 0])).unwrap(), 2.0);
        assert_eq!(
            total_score(&rv(&[0.5]), &ov(&[0, 1])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn winner_set_examples() {
        let y = ov(&[1, 1]);
        assert_eq!(winner_set(&[rv(&[1.0, 1.0]), rv(&[0.0, 0.0])], &y).unwrap(), vec![0]);
        assert_eq!(
            winner_set(&[rv(&[0.5, 0.5]), rv(&[0.5, 0.5])], &ov(&[0, 1])).unwrap(),
            vec![0, 1]
        );
        // squared distances 0.02, 1.62, 0.5
        assert_eq!(
            winner_set(&[rv(&[0.9, 0.9]), rv(&[0.1, 0.1]), rv(&[0.5, 0.5])], &y).unwrap(),
            vec![0]
        );
        assert_eq!(winner_set(&[], &y), Err(Error::NoReports));
        assert!(winner_set(&[rv(&[0.5])], &y).is_err());
    }

    #[test]
    fn simple_max_examples() {
        let y = ov(&[0, 1]);
        let same = rv(&[0.3, 0.6]);
        assert_eq!(simple_max(&[same.clone(), same.clone()], &y).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(simple_max(&[rv(&[1.0]), rv(&[0.0])], &ov(&[1])).unwrap().as_slice(), &[1.0, 0.0]);
        let four = vec![same; 4];
        assert_eq!(simple_max(&four, &y).unwrap().as_slice(), &[0.25; 4]);
    }

    #[test]
    fn exact_tolerance_separates_near_ties() {
        let y = ov(&[1]);
        let a = rv(&[0.5]);
        let b = rv(&[0.5 + 1e-14]);
        assert_eq!(winner_set_with(&[a.clone(), b.clone()], &y, TieTolerance::FLOAT).unwrap(), vec![0, 1]);
        assert_eq!(winner_set_with(&[a, b], &y, TieTolerance::EXACT).unwrap(), vec![1]);
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
        (1usize..=8, 1usize..=5).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, m), n),
                proptest::collection::vec(any::<bool>(), m),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn winner_set_is_euclidean_argmin((reports, y) in instance()) {
            let rs: Vec<ReportVector> = reports.into_iter().map(|r| ReportVector::new(r).unwrap()).collect();
            let y = OutcomeVector::new(y);
            let winners = winner_set(&rs, &y).unwrap();
            let d: Vec<f64> = rs.iter().map(|r| r.squared_distance(&y).unwrap()).collect();
            let best = d.iter().copied().fold(f64::INFINITY, f64::min);
            let argmin: Vec<usize> = (0..d.len()).filter(|&i| d[i] - best <= FLOAT_TIE_TOLERANCE).collect();
            prop_assert_eq!(winners, argmin);
        }
    }

    proptest! {
        #[test]
        fn shares_sum_to_one_and_are_uniform((reports, y) in instance()) {
            let rs: Vec<ReportVector> = reports.into_iter().map(|r| ReportVector::new(r).unwrap()).collect();
            let share = simple_max(&rs, &OutcomeVector::new(y)).unwrap();
            let total: f64 = share.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let positive: Vec<f64> = share.as_slice().iter().copied().filter(|&s| s > 0.0).collect();
            prop_assert!(positive.iter().all(|&s| s == positive[0]));
        }

        #[test]
        fn permutation_equivariance((reports, y) in instance(), rot in 0usize..5) {
            let n = reports.len();
            let rs: Vec<ReportVector> = reports.into_iter().map(|r| ReportVector::new(r).unwrap()).collect();
            let y = OutcomeVector::new(y);
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<ReportVector> = perm.iter().map(|&i| rs[i].clone()).collect();
            let a = simple_max(&rs, &y).unwrap();
            let b = simple_max(&permuted, &y).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(b.get(k), a.get(i));
            }
        }

        #[test]
        fn reflection_invariance((reports, y) in instance(), flips in proptest::collection::vec(any::<bool>(), 8)) {
            let rs: Vec<ReportVector> = reports.iter().cloned().map(|r| ReportVector::new(r).unwrap()).collect();
            let y = OutcomeVector::new(y);
            let reflect = |v: &[f64]| -> ReportVector {
                ReportVector::new(v.iter().zip(&flips).map(|(&r, &f)| if f { 1.0 - r } else { r }).collect()).unwrap()
            };
            let rs2: Vec<ReportVector> = rs.iter().map(|r| reflect(r.as_slice())).collect();
            let y2 = OutcomeVector::new(y.as_slice().iter().zip(&flips).map(|(&b, &f)| b ^ f).collect());
            prop_assert_eq!(winner_set(&rs, &y).unwrap(), winner_set(&rs2, &y2).unwrap());
        }
    }
}
