//! Stylized-facts statistics: autocorrelations, tails, kurtosis and
//! aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{compute_returns, PriceSeries, ReturnKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfError {
    #[error("need at least {need} observations, have {have}")]
    TooShort { need: usize, have: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("tail needs at least 10 order statistics, got {0}")]
    TooFewTailPoints(usize),
    #[error("tail threshold order statistic is not positive")]
    NonPositiveThreshold,
    #[error("power-law fit needs 5 usable points, got {usable} ({excluded} non-positive excluded)")]
    TooFewFitPoints { usable: usize, excluded: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub n: usize,
}

impl AcfResult {
    /// Correlation at `lag`, if computed.
    pub fn at(&self, lag: usize) -> Option<f64> {
        self.values.get(lag).copied()
    }

    /// Share of lags `1..=max_lag` with `|rho| < 2/sqrt(n)`.
    pub fn fraction_within_iid_band(&self) -> f64 {
        let band = 2.0 / (self.n as f64).sqrt();
        let inside = self.values[1..].iter().filter(|v| v.abs() < band).count();
        inside as f64 / (self.values.len() - 1) as f64
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_finite(x: &[f64]) -> Result<(), SfError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SfError::NonFinite)
    }
}

/// Sample autocorrelation at lags `0..=max_lag`, using the full-sample mean
/// and variance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult, SfError> {
    let n = series.len();
    if n < max_lag + 2 {
        return Err(SfError::TooShort {
            need: max_lag + 2,
            have: n,
        });
    }
    check_finite(series)?;
    let mu = mean(series);
    let d: Vec<f64> = series.iter().map(|v| v - mu).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>();
    if c0 == 0.0 {
        return Err(SfError::ZeroVariance);
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for lag in 1..=max_lag {
        let c: f64 = d.iter().zip(&d[lag..]).map(|(a, b)| a * b).sum();
        values.push((c / c0).clamp(-1.0, 1.0));
    }
    Ok(AcfResult {
        lags: (0..=max_lag).collect(),
        values,
        n,
    })
}

/// Empirical complementary CDF `F(x) = P(X >= x)` at each distinct sample
/// value, in increasing `x`.
pub fn ccdf(series: &[f64]) -> Vec<(f64, f64)> {
    let mut s: Vec<f64> = series.iter().copied().filter(|v| !v.is_nan()).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        if out.last().is_some_and(|&(x, _)| x == v) {
            continue;
        }
        out.push((v, (s.len() - i) as f64 / n));
    }
    out
}

/// Log-log least-squares slope of the CCDF over the positive sample points
/// with `F(x) <= tail_fraction`.
pub fn ccdf_tail_slope(series: &[f64], tail_fraction: f64) -> Result<f64, SfError> {
    let pts: Vec<(f64, f64)> = ccdf(series)
        .into_iter()
        .filter(|&(x, f)| x > 0.0 && f <= tail_fraction)
        .map(|(x, f)| (x.ln(), f.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(SfError::TooFewFitPoints {
            usable: pts.len(),
            excluded: 0,
        });
    }
    Ok(least_squares(&pts).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Positive,
    Negative,
    #[default]
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha: f64,
    pub k: usize,
    pub side: TailSide,
    /// Asymptotic standard error, `alpha / sqrt(k)`.
    pub stderr: f64,
    pub tail_fraction: f64,
}

/// Hill estimate of the CCDF tail exponent from the `ceil(tail_fraction * n)`
/// largest values of the chosen side.
pub fn hill_estimator(series: &[f64], tail_fraction: f64, side: TailSide) -> Result<TailFit, SfError> {
    check_finite(series)?;
    let n = series.len();
    let k = (tail_fraction * n as f64).ceil() as usize;
    if k < 10 {
        return Err(SfError::TooFewTailPoints(k));
    }
    if k + 1 > n {
        return Err(SfError::TooShort { need: k + 1, have: n });
    }
    let mut v: Vec<f64> = series
        .iter()
        .map(|&x| match side {
            TailSide::Positive => x,
            TailSide::Negative => -x,
            TailSide::Absolute => x.abs(),
        })
        .collect();
    // Only the top k+1 are needed.
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = v[k];
    if threshold <= 0.0 {
        return Err(SfError::NonPositiveThreshold);
    }
    let s: f64 = v[..k].iter().map(|x| (x / threshold).ln()).sum();
    if s <= 0.0 {
        return Err(SfError::ZeroVariance);
    }
    let alpha = k as f64 / s;
    Ok(TailFit {
        alpha,
        k,
        side,
        stderr: alpha / (k as f64).sqrt(),
        tail_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Decay magnitude: `rho(tau) ~ tau^(-exponent)`.
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub used: usize,
    /// Points dropped because the correlation was not positive.
    pub excluded: usize,
    pub lag_min: usize,
    pub lag_max: usize,
}

/// Slope and its standard error for `y = a + b x`.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if pts.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, intercept, stderr)
}

/// Power-law fit of correlation values against their lags.
pub fn power_law_fit(lags: &[usize], values: &[f64]) -> Result<PowerLawFit, SfError> {
    let mut pts = Vec::new();
    let mut excluded = 0;
    for (&l, &v) in lags.iter().zip(values) {
        if l == 0 {
            continue;
        }
        if v > 0.0 && v.is_finite() {
            pts.push(((l as f64).ln(), v.ln()));
        } else {
            excluded += 1;
        }
    }
    if pts.len() < 5 {
        return Err(SfError::TooFewFitPoints {
            usable: pts.len(),
            excluded,
        });
    }
    let (slope, intercept, stderr) = least_squares(&pts);
    Ok(PowerLawFit {
        exponent: -slope,
        stderr,
        intercept,
        used: pts.len(),
        excluded,
        lag_min: lags.iter().copied().filter(|&l| l > 0).min().unwrap_or(0),
        lag_max: lags.iter().copied().max().unwrap_or(0),
    })
}

/// Power-law decay exponent of the autocorrelation of `volatility` (e.g.
/// absolute returns) over lags `lag_min..=lag_max`.
pub fn vol_acf_powerlaw_fit(volatility: &[f64], lag_min: usize, lag_max: usize) -> Result<PowerLawFit, SfError> {
    let a = acf(volatility, lag_max)?;
    let lo = lag_min.max(1);
    power_law_fit(&a.lags[lo..], &a.values[lo..])
}

/// `m4 / m2^2 - 3` with sample central moments.
pub fn excess_kurtosis(series: &[f64]) -> Result<f64, SfError> {
    if series.len() < 4 {
        return Err(SfError::TooShort {
            need: 4,
            have: series.len(),
        });
    }
    check_finite(series)?;
    let mu = mean(series);
    let (m2, m4) = series.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mu) * (v - mu);
        (m2 + d, m4 + d * d)
    });
    let n = series.len() as f64;
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        return Err(SfError::ZeroVariance);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Fewest non-overlapping aggregated returns for which kurtosis is reported.
pub const MIN_AGGREGATED_RETURNS: usize = 30;

/// Excess kurtosis of non-overlapping returns at each horizon. Horizons with
/// fewer than [`MIN_AGGREGATED_RETURNS`] returns map to `None`.
pub fn aggregation_analysis(
    prices: &PriceSeries,
    lags: &[usize],
    kind: ReturnKind,
) -> BTreeMap<usize, Option<f64>> {
    lags.iter()
        .map(|&dt| {
            let k = (|| {
                if dt == 0 || prices.len() <= dt {
                    return None;
                }
                let sampled: Vec<f64> = prices.values().iter().step_by(dt).copied().collect();
                if sampled.len() < MIN_AGGREGATED_RETURNS + 1 {
                    return None;
                }
                let p = PriceSeries::new(sampled, 0).ok()?;
                let r = compute_returns(&p, kind, 1).ok()?;
                excess_kurtosis(&r.values).ok()
            })();
            (dt, k)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolProxy {
    #[default]
    Abs,
    Square,
}

fn default_max_lag() -> usize {
    100
}
fn default_tail_fraction() -> f64 {
    0.01
}
fn default_fit_lags() -> [usize; 2] {
    [1, 100]
}
fn default_aggregation() -> Vec<usize> {
    vec![1, 10, 100]
}

/// Analysis switches; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfConfig {
    #[serde(default)]
    pub return_kind: ReturnKind,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default)]
    pub vol_proxy: VolProxy,
    /// Inclusive lag range of the volatility power-law fit.
    #[serde(default = "default_fit_lags")]
    pub vol_fit_lags: [usize; 2],
    #[serde(default = "default_aggregation")]
    pub aggregation_lags: Vec<usize>,
    /// Restrict statistics to returns starting on ticks where the model
    /// reports market activity. Aggregation always uses the full series.
    #[serde(default)]
    pub active_only: bool,
}

impl Default for SfConfig {
    fn default() -> Self {
        Self {
            return_kind: ReturnKind::default(),
            max_lag: default_max_lag(),
            tail_fraction: default_tail_fraction(),
            vol_proxy: VolProxy::default(),
            vol_fit_lags: default_fit_lags(),
            aggregation_lags: default_aggregation(),
            active_only: false,
        }
    }
}

/// Either an estimate or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate<T> {
    Value(T),
    InsufficientData(String),
}

impl<T> Estimate<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Estimate::Value(v) => Some(v),
            Estimate::InsufficientData(_) => None,
        }
    }
}

impl<T> From<Result<T, SfError>> for Estimate<T> {
    fn from(r: Result<T, SfError>) -> Self {
        match r {
            Ok(v) => Estimate::Value(v),
            Err(e) => Estimate::InsufficientData(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfReport {
    pub config: SfConfig,
    pub n_returns: usize,
    pub acf_returns: Estimate<AcfResult>,
    pub acf_volatility: Estimate<AcfResult>,
    pub vol_acf_fit: Estimate<PowerLawFit>,
    pub tail_positive: Estimate<TailFit>,
    pub tail_negative: Estimate<TailFit>,
    pub tail_absolute: Estimate<TailFit>,
    /// CCDF log-log slope of `|r|` over the same tail fraction, as a
    /// cross-check on the Hill estimate.
    pub ccdf_slope_absolute: Estimate<f64>,
    pub excess_kurtosis: Estimate<f64>,
    pub aggregation_kurtosis: BTreeMap<usize, Option<f64>>,
}

impl SfReport {
    /// Runs every estimator on `prices`.
    ///
    /// `active`, when given, has one flag per price; a return is kept when the
    /// tick it starts from is active, so it was earned while the flagged
    /// agents held their positions.
    pub fn analyze(prices: &PriceSeries, active: Option<&[bool]>, config: &SfConfig) -> Self {
        let returns = match compute_returns(prices, config.return_kind, 1) {
            Ok(r) => r.values,
            Err(e) => return Self::failed(config, e.to_string()),
        };
        let returns: Vec<f64> = match active {
            Some(mask) if config.active_only => returns
                .iter()
                .zip(mask)
                .filter(|(_, &a)| a)
                .map(|(r, _)| *r)
                .collect(),
            _ => returns,
        };
        let vol: Vec<f64> = returns
            .iter()
            .map(|r| match config.vol_proxy {
                VolProxy::Abs => r.abs(),
                VolProxy::Square => r * r,
            })
            .collect();
        let acf_volatility: Estimate<AcfResult> = acf(&vol, config.max_lag.max(config.vol_fit_lags[1])).into();
        let vol_acf_fit = match &acf_volatility {
            Estimate::Value(a) => {
                let lo = config.vol_fit_lags[0].max(1);
                let hi = config.vol_fit_lags[1];
                if lo > hi {
                    Estimate::InsufficientData("empty fit range".into())
                } else {
                    power_law_fit(&a.lags[lo..=hi], &a.values[lo..=hi]).into()
                }
            }
            Estimate::InsufficientData(e) => Estimate::InsufficientData(e.clone()),
        };
        let tf = config.tail_fraction;
        Self {
            config: config.clone(),
            n_returns: returns.len(),
            acf_returns: acf(&returns, config.max_lag).into(),
            acf_volatility,
            vol_acf_fit,
            tail_positive: hill_estimator(&returns, tf, TailSide::Positive).into(),
            tail_negative: hill_estimator(&returns, tf, TailSide::Negative).into(),
            tail_absolute: hill_estimator(&returns, tf, TailSide::Absolute).into(),
            ccdf_slope_absolute: ccdf_tail_slope(&vol_abs(&returns), tf).into(),
            excess_kurtosis: excess_kurtosis(&returns).into(),
            aggregation_kurtosis: aggregation_analysis(prices, &config.aggregation_lags, config.return_kind),
        }
    }

    fn failed(config: &SfConfig, reason: String) -> Self {
        fn no<T>(reason: &str) -> Estimate<T> {
            Estimate::InsufficientData(reason.to_string())
        }
        Self {
            config: config.clone(),
            n_returns: 0,
            acf_returns: no(&reason),
            acf_volatility: no(&reason),
            vol_acf_fit: no(&reason),
            tail_positive: no(&reason),
            tail_negative: no(&reason),
            tail_absolute: no(&reason),
            ccdf_slope_absolute: no(&reason),
            excess_kurtosis: no(&reason),
            aggregation_kurtosis: config.aggregation_lags.iter().map(|&l| (l, None)).collect(),
        }
    }
}

fn vol_abs(r: &[f64]) -> Vec<f64> {
    r.iter().map(|v| v.abs()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| rng.standard_normal()).collect()
    }

    #[test]
    fn acf_alternating() {
        let s: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = acf(&s, 3).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert!((a.values[1] + 1.0).abs() < 0.01);
        assert!((a.values[2] - 1.0).abs() < 0.01);
    }

    #[test]
    fn acf_iid_band() {
        let a = acf(&normals(100_000, 4), 100).unwrap();
        assert!(a.fraction_within_iid_band() >= 0.95);
    }

    #[test]
    fn acf_errors() {
        assert_eq!(acf(&[1.0; 50], 5), Err(SfError::ZeroVariance));
        assert!(matches!(acf(&[1.0, 2.0], 5), Err(SfError::TooShort { .. })));
    }

    #[test]
    fn ccdf_counts() {
        let c = ccdf(&[3.0, 1.0, 4.0, 2.0]);
        assert_eq!(c, vec![(1.0, 1.0), (2.0, 0.75), (3.0, 0.5), (4.0, 0.25)]);
        let c = ccdf(&[2.0, 2.0, 5.0]);
        assert_eq!(c, vec![(2.0, 1.0), (5.0, 1.0 / 3.0)]);
    }

    fn pareto(n: usize, alpha: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| (1.0 - rng.uniform()).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn ccdf_slope_of_pareto() {
        let s = ccdf_tail_slope(&pareto(100_000, 3.0, 8), 0.1).unwrap();
        assert!((s + 3.0).abs() < 0.3, "{s}");
    }

    #[test]
    fn hill_on_pareto() {
        let fit = hill_estimator(&pareto(100_000, 3.0, 2), 0.01, TailSide::Positive).unwrap();
        assert_eq!(fit.k, 1000);
        assert!((2.7..=3.3).contains(&fit.alpha), "{}", fit.alpha);
        assert!((fit.stderr - fit.alpha / 1000f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hill_on_gaussian_is_large() {
        let fit = hill_estimator(&normals(100_000, 3), 0.01, TailSide::Absolute).unwrap();
        assert!(fit.alpha >= 5.0, "{}", fit.alpha);
    }

    #[test]
    fn hill_needs_ten_points() {
        assert_eq!(
            hill_estimator(&normals(500, 1), 0.01, TailSide::Positive),
            Err(SfError::TooFewTailPoints(5))
        );
    }

    #[test]
    fn hill_negative_side() {
        let neg: Vec<f64> = pareto(20_000, 2.0, 9).iter().map(|v| -v).collect();
        let fit = hill_estimator(&neg, 0.05, TailSide::Negative).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.3);
        assert!(hill_estimator(&neg, 0.05, TailSide::Positive).is_err());
    }

    #[test]
    fn power_law_exact() {
        let lags: Vec<usize> = (1..=100).collect();
        let vals: Vec<f64> = lags.iter().map(|&l| (l as f64).powf(-0.2)).collect();
        let fit = power_law_fit(&lags, &vals).unwrap();
        assert!((fit.exponent - 0.2).abs() < 1e-6);
        assert_eq!(fit.used, 100);
    }

    #[test]
    fn power_law_excludes_non_positive() {
        let lags: Vec<usize> = (1..=6).collect();
        let vals = [0.5, -0.1, 0.4, 0.0, 0.3, 0.2];
        assert_eq!(
            power_law_fit(&lags, &vals),
            Err(SfError::TooFewFitPoints { usable: 4, excluded: 2 })
        );
    }

    #[test]
    fn power_law_on_iid_noise_is_not_a_fit() {
        let v: Vec<f64> = normals(20_000, 6).iter().map(|x| x.abs()).collect();
        match vol_acf_powerlaw_fit(&v, 1, 100) {
            Err(SfError::TooFewFitPoints { .. }) => {}
            Ok(fit) => assert!(fit.stderr > 0.2 * fit.exponent.abs(), "{fit:?}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn kurtosis_examples() {
        assert!(excess_kurtosis(&normals(1_000_000, 11)).unwrap().abs() < 0.05);
        let two: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((excess_kurtosis(&two).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(excess_kurtosis(&[2.0; 10]), Err(SfError::ZeroVariance));
    }

    #[test]
    fn kurtosis_of_laplace() {
        let mut rng = RngStream::new(12, 0);
        let s: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let u = rng.uniform() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let k = excess_kurtosis(&s).unwrap();
        assert!((k - 3.0).abs() < 0.2, "{k}");
    }

    fn gaussian_walk(n: usize, seed: u64) -> PriceSeries {
        let mut rng = RngStream::new(seed, 0);
        let mut lp = 0.0;
        let v = (0..n)
            .map(|_| {
                lp += 0.01 * rng.standard_normal();
                lp.exp()
            })
            .collect();
        PriceSeries::new(v, 0).unwrap()
    }

    #[test]
    fn aggregation_flat_for_gaussian() {
        let p = gaussian_walk(200_000, 13);
        let agg = aggregation_analysis(&p, &[1, 10, 100, 200_000], ReturnKind::Log);
        assert!(agg[&1].unwrap().abs() < 0.1);
        assert!(agg[&10].unwrap().abs() < 0.3);
        assert!(agg[&100].unwrap().abs() < 1.0);
        assert_eq!(agg[&200_000], None);
    }

    #[test]
    fn report_marks_short_series() {
        let p = PriceSeries::new(vec![1.0, 1.1, 1.0, 1.2, 1.1], 0).unwrap();
        let r = SfReport::analyze(&p, None, &SfConfig::default());
        assert!(matches!(r.acf_returns, Estimate::InsufficientData(_)));
        assert!(r.excess_kurtosis.value().is_some());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("insufficient_data"));
    }

    #[test]
    fn report_active_mask() {
        let p = gaussian_walk(5000, 14);
        let mask: Vec<bool> = (0..5000).map(|i| i % 2 == 0).collect();
        let cfg = SfConfig {
            active_only: true,
            ..SfConfig::default()
        };
        let r = SfReport::analyze(&p, Some(&mask), &cfg);
        assert_eq!(r.n_returns, 2500);
    }

    proptest! {
        #[test]
        fn hill_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let x = pareto(2000, 2.5, seed);
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            let a = hill_estimator(&x, 0.02, TailSide::Positive).unwrap().alpha;
            let b = hill_estimator(&y, 0.02, TailSide::Positive).unwrap().alpha;
            prop_assert!((a - b).abs() < 1e-9 * a);
        }

        #[test]
        fn acf_reversal_symmetric(seed in 0u64..1000) {
            let x = normals(300, seed);
            let mut r = x.clone();
            r.reverse();
            let a = acf(&x, 20).unwrap();
            let b = acf(&r, 20).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn acf_bounded(seed in 0u64..1000) {
            let x = normals(50, seed);
            for v in acf(&x, 30).unwrap().values {
                prop_assert!(v.abs() <= 1.0);
            }
        }

        #[test]
        fn ccdf_non_increasing(xs in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let c = ccdf(&xs);
            prop_assert_eq!(c[0].1, 1.0);
            for w in c.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 > w[1].1);
            }
        }
    }

    #[test]
    fn estimators_stable_under_prefix_drop() {
        let x = normals(200_000, 15);
        let tail = &x[50_000..];
        let k1 = excess_kurtosis(&x).unwrap();
        let k2 = excess_kurtosis(tail).unwrap();
        // Standard error of kurtosis is about sqrt(24/n).
        assert!((k1 - k2).abs() < 4.0 * (24.0 / tail.len() as f64).sqrt());
        let a1 = acf(&x, 5).unwrap().values[3];
        let a2 = acf(tail, 5).unwrap().values[3];
        assert!((a1 - a2).abs() < 4.0 / (tail.len() as f64).sqrt());
        let h1 = hill_estimator(&x, 0.01, TailSide::Absolute).unwrap();
        let h2 = hill_estimator(tail, 0.01, TailSide::Absolute).unwrap();
        assert!((h1.alpha - h2.alpha).abs() < 4.0 * h2.stderr);
    }
}
