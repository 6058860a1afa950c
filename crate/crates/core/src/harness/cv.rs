use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::tune::contiguous_folds;

/// Expanding-window outer splits over `n_outer + 1` contiguous day blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsCvPlan {
    pub n_days: usize,
    pub n_outer: usize,
    pub n_inner: usize,
    pub folds: Vec<Range<usize>>,
}

impl TsCvPlan {
    pub fn new(n_days: usize, n_outer: usize, n_inner: usize) -> Result<Self> {
        if n_outer == 0 {
            return Err(Error::InvalidConfig("n_outer must be positive".into()));
        }
        if n_days < n_outer + 1 {
            return Err(Error::TooFewDays(format!("{n_days} days for {} folds", n_outer + 1)));
        }
        Ok(TsCvPlan { n_days, n_outer, n_inner, folds: contiguous_folds(n_days, n_outer + 1) })
    }

    /// Day index ranges (train, test) of split `k` in `0..n_outer`: train on
    /// folds `0..=k`, test on fold `k + 1`.
    pub fn split(&self, k: usize) -> (Range<usize>, Range<usize>) {
        (0..self.folds[k].end, self.folds[k + 1].clone())
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, Range<usize>, Range<usize>)> + '_ {
        (0..self.n_outer).map(|k| {
            let (a, b) = self.split(k);
            (k, a, b)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_two_days() {
        let p = TsCvPlan::new(22, 10, 4).unwrap();
        assert_eq!(p.folds.len(), 11);
        assert!(p.folds.iter().all(|f| f.len() == 2));
        assert_eq!(p.split(0), (0..2, 2..4));
        assert_eq!(p.split(9), (0..20, 20..22));
    }

    #[test]
    fn remainder_goes_to_the_last_fold() {
        let p = TsCvPlan::new(25, 10, 4).unwrap();
        assert_eq!(p.folds.last().unwrap().len(), 5);
        assert!(matches!(TsCvPlan::new(10, 10, 4), Err(Error::TooFewDays(_))));
    }
}
