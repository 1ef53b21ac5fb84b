//! Price and return containers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("price series is empty")]
    Empty,
    #[error("non-finite price {value} at tick {tick}")]
    NonFinite { tick: i64, value: f64 },
    #[error("log return needs positive prices, got {value} at tick {tick}")]
    NonPositive { tick: i64, value: f64 },
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("lag {lag} needs more than {lag} prices, series has {len}")]
    LagTooLarge { lag: usize, len: usize },
}

/// Time-indexed prices starting at tick `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    values: Vec<f64>,
    t0: i64,
}

impl PriceSeries {
    pub fn new(values: Vec<f64>, t0: i64) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some((i, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SeriesError::NonFinite {
                tick: t0 + i as i64,
                value,
            });
        }
        Ok(Self { values, t0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Drops the first `n` prices (keeping at least one).
    pub fn skip(&self, n: usize) -> PriceSeries {
        let n = n.min(self.values.len() - 1);
        PriceSeries {
            values: self.values[n..].to_vec(),
            t0: self.t0 + n as i64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    #[default]
    Log,
    Difference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub kind: ReturnKind,
    pub lag: usize,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Returns over `lag` ticks: element `i` is `p[i+lag] - p[i]` or `ln p[i+lag] - ln p[i]`.
pub fn compute_returns(
    prices: &PriceSeries,
    kind: ReturnKind,
    lag: usize,
) -> Result<ReturnSeries, SeriesError> {
    if lag == 0 {
        return Err(SeriesError::ZeroLag);
    }
    let p = prices.values();
    if p.len() <= lag {
        return Err(SeriesError::LagTooLarge { lag, len: p.len() });
    }
    let values = match kind {
        ReturnKind::Difference => p.windows(lag + 1).map(|w| w[lag] - w[0]).collect(),
        ReturnKind::Log => {
            if let Some((i, &value)) = p.iter().enumerate().find(|(_, v)| **v <= 0.0) {
                return Err(SeriesError::NonPositive {
                    tick: prices.t0() + i as i64,
                    value,
                });
            }
            let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
            logs.windows(lag + 1).map(|w| w[lag] - w[0]).collect()
        }
    };
    Ok(ReturnSeries { values, kind, lag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: &[f64]) -> PriceSeries {
        PriceSeries::new(v.to_vec(), 0).unwrap()
    }

    #[test]
    fn log_returns_of_doubling() {
        let r = compute_returns(&series(&[1.0, 2.0, 4.0]), ReturnKind::Log, 1).unwrap();
        assert_eq!(r.values.len(), 2);
        for v in r.values {
            assert!((v - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_difference_returns() {
        let r = compute_returns(&series(&[5.0, 5.0, 5.0]), ReturnKind::Difference, 1).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
    }

    #[test]
    fn log_of_zero_price_names_tick() {
        let err = compute_returns(&series(&[1.0, 0.0, 2.0]), ReturnKind::Log, 1).unwrap_err();
        assert_eq!(err, SeriesError::NonPositive { tick: 1, value: 0.0 });
        let shifted = PriceSeries::new(vec![1.0, -3.0], 10).unwrap();
        let err = compute_returns(&shifted, ReturnKind::Log, 1).unwrap_err();
        assert!(matches!(err, SeriesError::NonPositive { tick: 11, .. }));
    }

    #[test]
    fn lag_preconditions() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert_eq!(
            compute_returns(&s, ReturnKind::Difference, 0),
            Err(SeriesError::ZeroLag)
        );
        assert_eq!(
            compute_returns(&s, ReturnKind::Difference, 3),
            Err(SeriesError::LagTooLarge { lag: 3, len: 3 })
        );
        let r = compute_returns(&s, ReturnKind::Difference, 2).unwrap();
        assert_eq!(r.values, vec![2.0]);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(PriceSeries::new(vec![], 0), Err(SeriesError::Empty));
        assert!(matches!(
            PriceSeries::new(vec![1.0, f64::NAN], 5),
            Err(SeriesError::NonFinite { tick: 6, .. })
        ));
    }

    proptest! {
        #[test]
        fn log_returns_invert_cumulative_sum(
            xs in prop::collection::vec(-0.5f64..0.5, 1..200),
            lag in 1usize..5,
        ) {
            let mut acc = 0.0;
            let mut prices = vec![1.0];
            for x in &xs {
                acc += x;
                prices.push(acc.exp());
            }
            prop_assume!(prices.len() > lag);
            let r = compute_returns(&series(&prices), ReturnKind::Log, lag).unwrap();
            prop_assert_eq!(r.len(), prices.len() - lag);
            for (i, v) in r.values.iter().enumerate() {
                let expected: f64 = xs[i..i + lag].iter().sum();
                prop_assert!((v - expected).abs() < 1e-12);
            }
        }
    }
}
