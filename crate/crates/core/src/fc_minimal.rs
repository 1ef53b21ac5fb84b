//! Minimal fundamentalist/chartist model.
//!
//! `N` agents are either fundamentalists, who pull the price toward `p_f`, or
//! chartists, who push it away from its `M`-tick moving average. Agents switch
//! group with herding rates, and with [`SocParams`] the agent count itself
//! follows the long-term price volatility.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelError};
use crate::quad::{ln_integral_unit, Node};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    /// Rates depend on the current mispricing and trend.
    #[default]
    Full,
    /// Constant herding rates with asymmetry `delta`.
    Simplified,
}

fn default_dt_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
    pub b: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub p_f: f64,
    pub sigma: f64,
    /// Base switching rate.
    #[serde(rename = "B")]
    pub base_rate: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_dt_scale")]
    pub dt_scale: f64,
    #[serde(default)]
    pub rates: RateKind,
    /// Chartist windows. When non-empty, chartists are split evenly over
    /// these values and `M` is ignored.
    #[serde(default)]
    pub m_set: Vec<usize>,
    /// Initial chartist fraction.
    #[serde(default)]
    pub x0: f64,
    /// Initial price; defaults to `p_f`.
    #[serde(default)]
    pub p0: Option<f64>,
}

impl FcParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::param("N", "must be at least 2"));
        }
        if self.m < 2 {
            return Err(ModelError::param("M", "must be at least 2"));
        }
        if let Some(&m) = self.m_set.iter().find(|&&m| m < 2) {
            return Err(ModelError::param("m_set", format!("window {m} is below 2")));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(ModelError::param("K", "must be positive"));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(ModelError::param("B", "must be positive"));
        }
        if self.delta.abs() >= 1.0 || self.delta.is_nan() {
            return Err(ModelError::param("delta", "must lie in (-1, 1)"));
        }
        if !(self.dt_scale > 0.0 && self.dt_scale.is_finite()) {
            return Err(ModelError::param("dt_scale", "must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ModelError::param("sigma", "must be non-negative"));
        }
        for (name, v) in [("gamma", self.gamma), ("b", self.b), ("p_f", self.p_f)] {
            if !v.is_finite() {
                return Err(ModelError::param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(ModelError::param("x0", "must lie in [0, 1]"));
        }
        if let Some(p0) = self.p0 {
            if !p0.is_finite() {
                return Err(ModelError::param("p0", "must be finite"));
            }
        }
        Ok(())
    }

    /// The chartist windows in use.
    pub fn windows(&self) -> Vec<usize> {
        if self.m_set.is_empty() {
            vec![self.m]
        } else {
            self.m_set.clone()
        }
    }

    fn scale(&self) -> f64 {
        self.base_rate * self.dt_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocParams {
    /// Long-volatility window in ticks.
    #[serde(rename = "T")]
    pub t: usize,
    pub theta_in: f64,
    pub theta_out: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub entry_exit_size: usize,
}

impl SocParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.t < 2 {
            return Err(ModelError::param("T", "must be at least 2"));
        }
        if self.theta_out >= self.theta_in || self.theta_out.is_nan() || self.theta_in.is_nan() {
            return Err(ModelError::param("theta_out", "must be below theta_in"));
        }
        if !(2 <= self.n_min && self.n_min < self.n_max) {
            return Err(ModelError::param("n_min", "need 2 <= n_min < n_max"));
        }
        if self.entry_exit_size == 0 {
            return Err(ModelError::param("entry_exit_size", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcState {
    pub n_c: usize,
    pub n: usize,
    pub price: f64,
    /// Most recent prices, newest last; holds at most the largest window.
    pub window: VecDeque<f64>,
    pub t: u64,
}

impl FcState {
    pub fn new(params: &FcParams) -> Self {
        let price = params.p0.unwrap_or(params.p_f);
        Self {
            n_c: round_half_up(params.x0 * params.n as f64).min(params.n),
            n: params.n,
            price,
            window: VecDeque::from([price]),
            t: 0,
        }
    }

    /// Chartist fraction.
    pub fn x(&self) -> f64 {
        self.n_c as f64 / self.n as f64
    }

    pub fn n_f(&self) -> usize {
        self.n - self.n_c
    }

    fn push_price(&mut self, p: f64, cap: usize) {
        self.price = p;
        self.window.push_back(p);
        while self.window.len() > cap {
            self.window.pop_front();
        }
    }
}

/// Per-agent switching probabilities for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Chartist to fundamentalist.
    pub p_cf: f64,
    /// Fundamentalist to chartist.
    pub p_fc: f64,
    /// Whether either raw rate exceeded 1 and was clipped.
    pub clipped: bool,
}

impl Rates {
    fn clip(p_cf: f64, p_fc: f64) -> Self {
        let clipped = p_cf > 1.0 || p_fc > 1.0;
        Self {
            p_cf: p_cf.clamp(0.0, 1.0),
            p_fc: p_fc.clamp(0.0, 1.0),
            clipped,
        }
    }
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor().max(0.0) as usize
}

/// Arithmetic mean of the last `min(m, len)` prices.
pub fn moving_average(window: &[f64], m: usize) -> f64 {
    assert!(!window.is_empty() && m > 0, "empty moving-average window");
    let tail = &window[window.len().saturating_sub(m)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn ma_deque(window: &VecDeque<f64>, m: usize) -> f64 {
    let k = m.min(window.len());
    window.iter().rev().take(k).sum::<f64>() / k as f64
}

/// Rates driven by mispricing (`|p_f - p|`) and trend (`|p_M - p|`).
///
/// The `(1 ± delta)` asymmetry is applied as in the simplified rates; with
/// `delta = 0` the pure form is recovered. With several windows the trend
/// factor is averaged over them.
pub fn transition_rates_full(state: &FcState, params: &FcParams) -> Rates {
    let p = state.price;
    let s = params.scale();
    let xf = state.n_f() as f64 / state.n as f64;
    let xc = state.x();
    let windows = params.windows();
    let trend = windows
        .iter()
        .map(|&m| {
            let pm = ma_deque(&state.window, m);
            (params.b * (pm - p).abs() / (m as f64 - 1.0)).exp()
        })
        .sum::<f64>()
        / windows.len() as f64;
    let p_cf = s * (1.0 + params.delta) * (params.k + xf) * (params.gamma * (params.p_f - p).abs()).exp();
    let p_fc = s * (1.0 - params.delta) * (params.k + xc) * trend;
    Rates::clip(p_cf, p_fc)
}

/// Constant herding rates: `B(1 ± delta)(K + share)`.
pub fn transition_rates_simplified(state: &FcState, params: &FcParams) -> Rates {
    let s = params.scale();
    let xf = state.n_f() as f64 / state.n as f64;
    let p_cf = s * (1.0 + params.delta) * (params.k + xf);
    let p_fc = s * (1.0 - params.delta) * (params.k + state.x());
    Rates::clip(p_cf, p_fc)
}

/// New chartist count after every agent independently considers switching.
pub fn population_step(n_c: usize, n: usize, rates: &Rates, rng: &mut RngStream) -> usize {
    let leave = rng.binomial(n_c as u64, rates.p_cf) as usize;
    let join = rng.binomial((n - n_c) as u64, rates.p_fc) as usize;
    n_c - leave + join
}

/// Next price from fundamentalist pull, chartist push and noise.
pub fn price_step(state: &FcState, params: &FcParams, rng: &mut RngStream) -> f64 {
    let xi = if params.sigma > 0.0 {
        rng.standard_normal()
    } else {
        0.0
    };
    price_step_with_noise(state, params, xi)
}

fn price_step_with_noise(state: &FcState, params: &FcParams, xi: f64) -> f64 {
    let p = state.price;
    let x = state.x();
    let windows = params.windows();
    let chart = windows
        .iter()
        .map(|&m| params.b / (m as f64 - 1.0) * (p - ma_deque(&state.window, m)))
        .sum::<f64>()
        / windows.len() as f64;
    p + x * chart + (1.0 - x) * params.gamma * (params.p_f - p) + params.sigma * xi
}

/// Sample variance of the trailing `t` prices, or `None` while fewer than `t`
/// prices exist.
pub fn long_term_volatility(prices: &[f64], t: usize) -> Option<f64> {
    if t < 2 || prices.len() < t {
        return None;
    }
    let w = &prices[prices.len() - t..];
    let mean = w.iter().sum::<f64>() / t as f64;
    Some(w.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (t as f64 - 1.0))
}

/// Agent count after one entry/exit decision, and the chartist count rescaled
/// to keep the chartist fraction.
pub fn soc_step(n: usize, n_c: usize, sigma_t: f64, soc: &SocParams) -> (usize, usize) {
    let n_new = if sigma_t > soc.theta_in {
        (n + soc.entry_exit_size).min(soc.n_max)
    } else if sigma_t < soc.theta_out {
        n.saturating_sub(soc.entry_exit_size).max(soc.n_min)
    } else {
        n
    };
    if n_new == n {
        return (n, n_c);
    }
    let x = n_c as f64 / n as f64;
    (n_new, round_half_up(x * n_new as f64).min(n_new))
}

/// Stationary density of the chartist fraction,
/// `∝ x^{r(1-δ)-1} (1-x)^{r(1+δ)-1} exp(-2δNx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumDensity {
    pub r: f64,
    pub delta: f64,
    pub n: f64,
    ln_norm: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DensityError {
    #[error("density is not integrable: exponent {exponent} at x = {boundary}")]
    NotIntegrable { exponent: f64, boundary: f64 },
    #[error("invalid density parameter `{0}`")]
    Invalid(&'static str),
    #[error("normalization did not converge (relative change {0:e})")]
    NoConvergence(f64),
    #[error("no samples to fit")]
    NoData,
}

const QUAD_TOL: f64 = 1e-11;

impl EquilibriumDensity {
    pub fn new(r: f64, delta: f64, n: f64) -> Result<Self, DensityError> {
        if !r.is_finite() {
            return Err(DensityError::Invalid("r"));
        }
        if delta.abs() >= 1.0 || delta.is_nan() {
            return Err(DensityError::Invalid("delta"));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(DensityError::Invalid("N"));
        }
        let a = r * (1.0 - delta);
        let c = r * (1.0 + delta);
        if a <= 0.0 {
            return Err(DensityError::NotIntegrable {
                exponent: a - 1.0,
                boundary: 0.0,
            });
        }
        if c <= 0.0 {
            return Err(DensityError::NotIntegrable {
                exponent: c - 1.0,
                boundary: 1.0,
            });
        }
        let mut d = Self {
            r,
            delta,
            n,
            ln_norm: 0.0,
        };
        let z = ln_integral_unit(0.0, 1.0, QUAD_TOL, |node| d.ln_kernel(node));
        if z.rel_change >= 1e-9 || z.rel_change.is_nan() || !z.value.is_finite() {
            return Err(DensityError::NoConvergence(z.rel_change));
        }
        d.ln_norm = z.value;
        Ok(d)
    }

    fn ln_kernel(&self, node: Node) -> f64 {
        let a = self.r * (1.0 - self.delta);
        let c = self.r * (1.0 + self.delta);
        (a - 1.0) * node.ln_x + (c - 1.0) * node.ln_1mx - 2.0 * self.delta * self.n * node.x
    }

    /// Natural log of the normalizing integral.
    pub fn ln_normalizer(&self) -> f64 {
        self.ln_norm
    }

    /// Normalized density at `x` in (0, 1).
    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        let node = Node {
            x,
            ln_x: x.ln(),
            ln_1mx: (-x).ln_1p(),
        };
        (self.ln_kernel(node) - self.ln_norm).exp()
    }

    /// Probability mass on `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.min(1.0);
        if b <= a {
            return 0.0;
        }
        let l = ln_integral_unit(a, b, QUAD_TOL, |node| self.ln_kernel(node));
        (l.value - self.ln_norm).exp()
    }

    /// Masses of `bins` equal-width bins over [0, 1].
    pub fn bin_masses(&self, bins: usize) -> Vec<f64> {
        let w = 1.0 / bins as f64;
        (0..bins)
            .map(|i| self.mass(i as f64 * w, (i + 1) as f64 * w))
            .collect()
    }

    /// Mass of the cell around lattice point `k/n_lattice`, i.e.
    /// `[(k - 1/2)/n, (k + 1/2)/n]` cut to [0, 1].
    pub fn cell_mass(&self, k: usize, n_lattice: usize) -> f64 {
        let n = n_lattice as f64;
        self.mass((k as f64 - 0.5) / n, (k as f64 + 0.5) / n)
    }
}

/// Histogram of a lattice-valued fraction, with each lattice point's count
/// spread uniformly over its cell before binning.
///
/// `counts[k]` is the number of samples with `x = k/n`, `k = 0..=n`. The
/// result is normalized to sum to one.
pub fn lattice_histogram(counts: &[u64], bins: usize) -> Vec<f64> {
    let n = (counts.len() - 1) as f64;
    let total: u64 = counts.iter().sum();
    let mut h = vec![0.0; bins];
    if total == 0 {
        return h;
    }
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let lo = ((k as f64 - 0.5) / n).max(0.0);
        let hi = ((k as f64 + 0.5) / n).min(1.0);
        let mass = c as f64 / total as f64;
        let first = ((lo * bins as f64).floor() as usize).min(bins - 1);
        let last = ((hi * bins as f64).ceil() as usize).clamp(first + 1, bins);
        for (j, slot) in h.iter_mut().enumerate().take(last).skip(first) {
            let blo = j as f64 / bins as f64;
            let bhi = (j + 1) as f64 / bins as f64;
            let overlap = (hi.min(bhi) - lo.max(blo)).max(0.0);
            *slot += mass * overlap / (hi - lo);
        }
    }
    h
}

/// Total variation distance between two discrete distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Maximum-likelihood shape `r` for lattice counts of the chartist fraction.
///
/// Each observation `x = k/n` is treated as falling somewhere in its lattice
/// cell, so the likelihood uses cell masses rather than point densities.
pub fn fit_shape(counts: &[u64], delta: f64, n: f64) -> Result<f64, DensityError> {
    let n_lattice = counts.len() - 1;
    if counts.iter().all(|&c| c == 0) {
        return Err(DensityError::NoData);
    }
    let loglik = |ln_r: f64| -> f64 {
        match EquilibriumDensity::new(ln_r.exp(), delta, n) {
            Ok(d) => counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| c as f64 * d.cell_mass(k, n_lattice).max(1e-300).ln())
                .sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    Ok(golden_max(loglik, (1e-3f64).ln(), (1e4f64).ln(), 1e-7).exp())
}

/// Maximizer of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// The full model, optionally with a self-organizing agent count.
#[derive(Debug, Clone)]
pub struct FcModel {
    params: FcParams,
    soc: Option<SocParams>,
    state: FcState,
    /// Price history for the long-term volatility; empty without SOC.
    long: VecDeque<f64>,
    sigma_t: Option<f64>,
    window_cap: usize,
    clip_count: u64,
}

impl FcModel {
    pub fn new(params: FcParams, soc: Option<SocParams>) -> Result<Self, ModelError> {
        params.validate()?;
        if let Some(s) = &soc {
            s.validate()?;
        }
        let state = FcState::new(&params);
        let window_cap = params.windows().into_iter().max().unwrap_or(params.m);
        let long = match &soc {
            Some(_) => VecDeque::from([state.price]),
            None => VecDeque::new(),
        };
        Ok(Self {
            params,
            soc,
            state,
            long,
            sigma_t: None,
            window_cap,
            clip_count: 0,
        })
    }

    pub fn params(&self) -> &FcParams {
        &self.params
    }

    pub fn state(&self) -> &FcState {
        &self.state
    }

    /// Number of ticks on which a switching rate had to be clipped to 1.
    pub fn clip_count(&self) -> u64 {
        self.clip_count
    }

    pub fn rates(&self) -> Rates {
        match self.params.rates {
            RateKind::Full => transition_rates_full(&self.state, &self.params),
            RateKind::Simplified => transition_rates_simplified(&self.state, &self.params),
        }
    }
}

impl Model for FcModel {
    fn observable_names(&self) -> Vec<String> {
        ["x", "N", "n_c", "sigma_T"].map(String::from).to_vec()
    }

    fn price(&self) -> f64 {
        self.state.price
    }

    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
        let rates = self.rates();
        if rates.clipped {
            self.clip_count += 1;
        }
        let p = price_step(&self.state, &self.params, rng);
        if !p.is_finite() {
            return Err(ModelError::NonFinitePrice(p));
        }
        self.state.n_c = population_step(self.state.n_c, self.state.n, &rates, rng);
        self.state.push_price(p, self.window_cap);
        self.state.t += 1;
        if let Some(soc) = &self.soc {
            self.long.push_back(p);
            if self.long.len() > soc.t {
                self.long.pop_front();
            }
            self.sigma_t = long_term_volatility(self.long.make_contiguous(), soc.t);
            if let Some(v) = self.sigma_t {
                let (n, n_c) = soc_step(self.state.n, self.state.n_c, v, soc);
                self.state.n = n;
                self.state.n_c = n_c;
            }
        }
        out.clear();
        out.extend([
            self.state.x(),
            self.state.n as f64,
            self.state.n_c as f64,
            self.sigma_t.unwrap_or(f64::NAN),
        ]);
        Ok(())
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![("clipped_ticks", self.clip_count as f64)]
    }
}
