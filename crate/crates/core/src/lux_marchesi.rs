//! Lux–Marchesi three-population market.
//!
//! Agents are fundamentalists, optimistic chartists or pessimistic chartists.
//! They switch group with herding probabilities tilted by simple profit
//! differentials, and the price moves one tick at a time with a probability
//! set by aggregate excess demand.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelError};
use crate::rng::RngStream;

fn default_tick() -> f64 {
    0.01
}
fn default_floor() -> usize {
    4
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmParams {
    #[serde(rename = "N")]
    pub n: usize,
    /// Optimist/pessimist switching frequency.
    pub nu1: f64,
    /// Chartist/fundamentalist switching frequency.
    pub nu2: f64,
    /// Price reaction to excess demand.
    pub beta: f64,
    /// Fundamentalist demand per unit mispricing.
    pub gamma: f64,
    /// Trade size of one chartist.
    pub t_c: f64,
    #[serde(default = "default_tick")]
    pub tick: f64,
    /// Standard deviation of the noise added to `beta * ED`.
    pub mu_sigma: f64,
    pub p_f0: f64,
    /// Standard deviation of fundamental log-price innovations.
    #[serde(default)]
    pub pf_sigma: f64,
    #[serde(default = "default_floor")]
    pub n_floor: usize,
    #[serde(default = "one")]
    pub dt_scale: f64,
    /// Weight of the price trend in the optimist/pessimist utility.
    pub a1: f64,
    /// Weight of the chartist/fundamentalist profit differential.
    pub a2: f64,
    /// Ticks over which the trend is averaged.
    #[serde(default = "one_usize")]
    pub trend_window: usize,
    /// Initial price; defaults to `p_f0` rounded to the tick grid.
    #[serde(default)]
    pub p0: Option<f64>,
    /// Initial chartist count, split evenly; defaults to the floors.
    #[serde(default)]
    pub n_c0: Option<usize>,
}

impl LmParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(ModelError::param("tick", "must be positive"));
        }
        if self.n < 3 * self.n_floor || self.n < 3 {
            return Err(ModelError::param("N", "must be at least 3 * n_floor"));
        }
        for (name, v) in [
            ("nu1", self.nu1),
            ("nu2", self.nu2),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mu_sigma", self.mu_sigma),
            ("pf_sigma", self.pf_sigma),
            ("dt_scale", self.dt_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::param(name, "must be finite and non-negative"));
            }
        }
        for (name, v) in [("t_c", self.t_c), ("a1", self.a1), ("a2", self.a2)] {
            if !v.is_finite() {
                return Err(ModelError::param(name, "must be finite"));
            }
        }
        if !(self.p_f0 > 0.0 && self.p_f0.is_finite()) {
            return Err(ModelError::param("p_f0", "must be positive"));
        }
        if self.trend_window == 0 {
            return Err(ModelError::param("trend_window", "must be at least 1"));
        }
        if let Some(p0) = self.p0 {
            if !(p0 > 0.0 && p0.is_finite()) {
                return Err(ModelError::param("p0", "must be positive"));
            }
        }
        if let Some(c) = self.n_c0 {
            if c > self.n - self.n_floor || c < 2 * self.n_floor {
                return Err(ModelError::param("n_c0", "must leave every class at its floor"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmState {
    pub n_f: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    /// Price in ticks.
    pub price_ticks: i64,
    pub p_f: f64,
    pub t: u64,
}

impl LmState {
    pub fn n(&self) -> usize {
        self.n_f + self.n_plus + self.n_minus
    }

    pub fn n_c(&self) -> usize {
        self.n_plus + self.n_minus
    }

    pub fn price(&self, tick: f64) -> f64 {
        self.price_ticks as f64 * tick
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilities {
    /// Optimists over pessimists.
    pub u1: f64,
    /// Optimists over fundamentalists.
    pub u21: f64,
    /// Pessimists over fundamentalists.
    pub u22: f64,
}

/// Profit-differential utilities.
///
/// With `d` the average price change per step over the trend window, in
/// ticks, and `m = |p_f - p|` in ticks: `U1 = a1 d`, `U21 = a2 (d - gamma m)`,
/// `U22 = a2 (-d - gamma m)`. Optimists gain from a rising price, pessimists
/// from a falling one, and both forgo the fundamentalists' mispricing profit.
pub fn lm_utilities(state: &LmState, history: &VecDeque<i64>, params: &LmParams) -> Utilities {
    let d = match (history.front(), history.back()) {
        (Some(&first), Some(&last)) if history.len() >= 2 => {
            (last - first) as f64 / (history.len() - 1) as f64
        }
        _ => 0.0,
    };
    let m = (state.p_f - state.price(params.tick)).abs() / params.tick;
    Utilities {
        u1: params.a1 * d,
        u21: params.a2 * (d - params.gamma * m),
        u22: params.a2 * (-d - params.gamma * m),
    }
}

/// Per-agent switching probabilities for one step.
///
/// Field names read source-to-target: `f_to_plus` is the probability that a
/// fundamentalist becomes an optimist. Each agent is attracted to a group in
/// proportion to that group's share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmProbabilities {
    pub f_to_plus: f64,
    pub plus_to_f: f64,
    pub f_to_minus: f64,
    pub minus_to_f: f64,
    pub minus_to_plus: f64,
    pub plus_to_minus: f64,
}

pub fn lm_transition_probabilities(state: &LmState, u: &Utilities, params: &LmParams) -> LmProbabilities {
    let n = state.n() as f64;
    let s = params.dt_scale;
    let share = |k: usize| k as f64 / n;
    let clip = |v: f64| v.clamp(0.0, 1.0);
    let herd_c = share(state.n_c());
    LmProbabilities {
        f_to_plus: clip(s * params.nu2 * share(state.n_plus) * u.u21.exp()),
        plus_to_f: clip(s * params.nu2 * share(state.n_f) * (-u.u21).exp()),
        f_to_minus: clip(s * params.nu2 * share(state.n_minus) * u.u22.exp()),
        minus_to_f: clip(s * params.nu2 * share(state.n_f) * (-u.u22).exp()),
        minus_to_plus: clip(s * params.nu1 * herd_c * u.u1.exp()),
        plus_to_minus: clip(s * params.nu1 * herd_c * (-u.u1).exp()),
    }
}

/// Splits `n` agents over two exits with per-agent probabilities `a` and `b`.
/// If `a + b > 1` both are scaled down to sum to one.
fn two_way(n: usize, a: f64, b: f64, rng: &mut RngStream) -> (usize, usize) {
    let total = a + b;
    let (a, b) = if total > 1.0 { (a / total, b / total) } else { (a, b) };
    let ka = rng.binomial(n as u64, a) as usize;
    let rest = 1.0 - a;
    let kb = if rest > 0.0 {
        rng.binomial((n - ka) as u64, (b / rest).min(1.0)) as usize
    } else {
        0
    };
    (ka, kb)
}

/// Applies one round of switching, then lifts any class below `n_floor` by
/// taking agents from the largest class.
pub fn lm_population_step(state: &LmState, p: &LmProbabilities, n_floor: usize, rng: &mut RngStream) -> LmState {
    let (f_p, f_m) = two_way(state.n_f, p.f_to_plus, p.f_to_minus, rng);
    let (p_f, p_m) = two_way(state.n_plus, p.plus_to_f, p.plus_to_minus, rng);
    let (m_f, m_p) = two_way(state.n_minus, p.minus_to_f, p.minus_to_plus, rng);
    let mut counts = [
        state.n_f - f_p - f_m + p_f + m_f,
        state.n_plus - p_f - p_m + f_p + m_p,
        state.n_minus - m_f - m_p + f_m + p_m,
    ];
    enforce_floors(&mut counts, n_floor);
    LmState {
        n_f: counts[0],
        n_plus: counts[1],
        n_minus: counts[2],
        ..state.clone()
    }
}

fn enforce_floors(counts: &mut [usize; 3], floor: usize) {
    for i in 0..3 {
        if counts[i] < floor {
            let deficit = floor - counts[i];
            let donor = (0..3)
                .filter(|&j| j != i)
                .max_by_key(|&j| (counts[j], std::cmp::Reverse(j)))
                .expect("three classes");
            counts[donor] -= deficit;
            counts[i] = floor;
        }
    }
}

/// Fundamentalists buy below `p_f` and sell above it; each optimist buys and
/// each pessimist sells `t_c`.
pub fn lm_excess_demand(state: &LmState, params: &LmParams) -> f64 {
    let ed_f = state.n_f as f64 * params.gamma * (state.p_f - state.price(params.tick));
    let ed_c = (state.n_plus as f64 - state.n_minus as f64) * params.t_c;
    ed_f + ed_c
}

/// Up and down probabilities for a given `beta * ED + mu`.
pub fn tick_probabilities(pressure: f64) -> (f64, f64) {
    (pressure.clamp(0.0, 1.0), (-pressure).clamp(0.0, 1.0))
}

/// Moves the price by at most one tick, then evolves the fundamental price.
pub fn lm_price_step(state: &LmState, ed: f64, params: &LmParams, rng: &mut RngStream) -> Result<LmState, ModelError> {
    let mu = rng.normal(0.0, params.mu_sigma);
    let (up, down) = tick_probabilities(params.beta * ed + mu);
    let u = rng.uniform();
    let mut next = state.clone();
    if u < up {
        next.price_ticks += 1;
    } else if u < down {
        next.price_ticks -= 1;
    }
    if next.price_ticks <= 0 {
        return Err(ModelError::NonPositivePrice(next.price(params.tick)));
    }
    if params.pf_sigma > 0.0 {
        next.p_f *= rng.normal(0.0, params.pf_sigma).exp();
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct LmModel {
    params: LmParams,
    state: LmState,
    history: VecDeque<i64>,
}

impl LmModel {
    pub fn new(params: LmParams) -> Result<Self, ModelError> {
        params.validate()?;
        let p0 = params.p0.unwrap_or(params.p_f0);
        let price_ticks = (p0 / params.tick).round() as i64;
        if price_ticks <= 0 {
            return Err(ModelError::param("p0", "rounds to zero ticks"));
        }
        let n_c = params.n_c0.unwrap_or(2 * params.n_floor);
        let n_plus = n_c / 2;
        let state = LmState {
            n_f: params.n - n_c,
            n_plus,
            n_minus: n_c - n_plus,
            price_ticks,
            p_f: params.p_f0,
            t: 0,
        };
        let history = VecDeque::from([price_ticks]);
        Ok(Self {
            params,
            state,
            history,
        })
    }

    pub fn state(&self) -> &LmState {
        &self.state
    }

    pub fn params(&self) -> &LmParams {
        &self.params
    }
}

impl Model for LmModel {
    fn observable_names(&self) -> Vec<String> {
        ["p_f", "n_f", "n_plus", "n_minus", "ED"].map(String::from).to_vec()
    }

    fn price(&self) -> f64 {
        self.state.price(self.params.tick)
    }

    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
        let u = lm_utilities(&self.state, &self.history, &self.params);
        let probs = lm_transition_probabilities(&self.state, &u, &self.params);
        let switched = lm_population_step(&self.state, &probs, self.params.n_floor, rng);
        let ed = lm_excess_demand(&switched, &self.params);
        let mut next = lm_price_step(&switched, ed, &self.params, rng)?;
        next.t += 1;
        self.state = next;
        self.history.push_back(self.state.price_ticks);
        while self.history.len() > self.params.trend_window + 1 {
            self.history.pop_front();
        }
        out.clear();
        out.extend([
            self.state.p_f,
            self.state.n_f as f64,
            self.state.n_plus as f64,
            self.state.n_minus as f64,
            ed,
        ]);
        Ok(())
    }
}
