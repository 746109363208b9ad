//! Finite mixed strategies.

use alloc::vec::Vec;

use rand::Rng;

use crate::mechanism::check_dims;
use crate::{Error, ReportVector, Result};

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// A distribution over finitely many report vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    support: Vec<(ReportVector, f64)>,
}

impl MixedStrategy {
    /// Weights must be positive and sum to 1 within 1e-12; all reports share one dimension.
    pub fn new(support: Vec<(ReportVector, f64)>) -> Result<Self> {
        let Some((first, _)) = support.first() else {
            return Err(Error::NoReports);
        };
        let m = first.len();
        let mut sum = 0.0;
        for (r, w) in &support {
            check_dims(m, r.len())?;
            if !(*w > 0.0) {
                return Err(Error::InvalidWeights { sum: *w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(MixedStrategy { support })
    }

    /// Always play `report`.
    pub fn pure(report: ReportVector) -> Self {
        MixedStrategy { support: alloc::vec![(report, 1.0)] }
    }

    /// Uniform over the given reports.
    pub fn uniform(reports: Vec<ReportVector>) -> Result<Self> {
        let w = 1.0 / reports.len() as f64;
        Self::new(reports.into_iter().map(|r| (r, w)).collect())
    }

    /// Support points and their weights.
    pub fn support(&self) -> &[(ReportVector, f64)] {
        &self.support
    }

    /// Event count.
    pub fn dimension(&self) -> usize {
        self.support[0].0.len()
    }

    /// Support-weighted mean report.
    pub fn average_report(&self) -> ReportVector {
        let m = self.dimension();
        let mut avg = alloc::vec![0.0; m];
        for (r, w) in &self.support {
            for (a, &x) in avg.iter_mut().zip(r.as_slice()) {
                *a += w * x;
            }
        }
        for a in &mut avg {
            *a = a.clamp(0.0, 1.0);
        }
        ReportVector::new(avg).expect("convex combination stays in the cube")
    }

    /// Draw a support index with one uniform from `rng` (none for pure strategies).
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.support.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, (_, w)) in self.support.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.support.len() - 1
    }
}

/// One strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    strategies: Vec<MixedStrategy>,
}

impl StrategyProfile {
    /// All strategies must share a dimension.
    pub fn new(strategies: Vec<MixedStrategy>) -> Result<Self> {
        let Some(first) = strategies.first() else {
            return Err(Error::NoReports);
        };
        let m = first.dimension();
        for s in &strategies {
            check_dims(m, s.dimension())?;
        }
        Ok(StrategyProfile { strategies })
    }

    /// Player count.
    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    /// Event count.
    pub fn m(&self) -> usize {
        self.strategies[0].dimension()
    }

    /// Strategy of `player`.
    pub fn strategy(&self, player: usize) -> &MixedStrategy {
        &self.strategies[player]
    }

    /// All strategies.
    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    /// Copy of the profile with `player` switched to `strategy`.
    pub fn with_strategy(&self, player: usize, strategy: MixedStrategy) -> Result<Self> {
        check_dims(self.m(), strategy.dimension())?;
        let mut strategies = self.strategies.clone();
        strategies[player] = strategy;
        Ok(StrategyProfile { strategies })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rv(v: &[f64]) -> ReportVector {
        ReportVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(MixedStrategy::new(vec![(rv(&[0.1]), 0.5), (rv(&[0.2]), 0.4)]).is_err());
        assert!(MixedStrategy::new(vec![(rv(&[0.1]), 1.5), (rv(&[0.2]), -0.5)]).is_err());
        assert!(MixedStrategy::new(vec![(rv(&[0.1]), 0.5), (rv(&[0.2, 0.3]), 0.5)]).is_err());
        assert!(MixedStrategy::new(vec![]).is_err());
        let a = MixedStrategy::pure(rv(&[0.1]));
        let b = MixedStrategy::pure(rv(&[0.1, 0.2]));
        assert!(StrategyProfile::new(vec![a, b]).is_err());
    }

    #[test]
    fn average_report_examples() {
        assert_eq!(MixedStrategy::pure(rv(&[0.3, 0.9])).average_report(), rv(&[0.3, 0.9]));
        let coin = MixedStrategy::uniform(vec![rv(&[0.0]), rv(&[1.0])]).unwrap();
        assert_eq!(coin.average_report(), rv(&[0.5]));
    }
}
