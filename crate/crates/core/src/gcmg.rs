//! Grand-canonical minority game with producers and speculators.
//!
//! Each tick a public information state `mu` is drawn. Producers always trade
//! their fixed action for `mu`; speculators pick their best-scoring strategy,
//! which may be to stay out. The aggregate action moves the log price, and
//! every speculator strategy is scored as if it had been played.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelError};
use crate::rng::RngStream;

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcmgParams {
    pub n_spec: usize,
    pub n_prod: usize,
    #[serde(rename = "P")]
    pub p: usize,
    /// Active strategies per speculator.
    #[serde(rename = "S", default = "two")]
    pub s: usize,
    /// Score premium of staying out.
    pub epsilon: f64,
    pub lambda_depth: f64,
    #[serde(default)]
    pub score_init: f64,
    #[serde(default)]
    pub log_price0: f64,
}

impl GcmgParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.p == 0 {
            return Err(ModelError::param("P", "must be at least 1"));
        }
        if self.s == 0 {
            return Err(ModelError::param("S", "must be at least 1"));
        }
        if !(self.lambda_depth > 0.0 && self.lambda_depth.is_finite()) {
            return Err(ModelError::param("lambda_depth", "must be positive"));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("score_init", self.score_init),
            ("log_price0", self.log_price0),
        ] {
            if !v.is_finite() {
                return Err(ModelError::param(name, "must be finite"));
            }
        }
        if self.n_spec + self.n_prod == 0 {
            return Err(ModelError::param("n_spec", "market has no agents"));
        }
        Ok(())
    }
}

/// Fixed lookup tables from information state to action.
///
/// Speculator strategy 0 is the inactive strategy and is not stored; strategy
/// `s >= 1` maps to row `s - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    p: usize,
    s: usize,
    /// `[agent][strategy][mu]`, flattened.
    spec: Vec<i8>,
    /// Producer contribution to the aggregate action for each `mu`.
    prod_sum: Vec<i64>,
    prod: Vec<i8>,
    n_prod: usize,
}

impl StrategyTable {
    pub fn draw(params: &GcmgParams, rng: &mut RngStream) -> Self {
        let (p, s) = (params.p, params.s);
        let spec = (0..params.n_spec * s * p).map(|_| rng.sign()).collect();
        let prod: Vec<i8> = (0..params.n_prod * p).map(|_| rng.sign()).collect();
        let prod_sum = (0..p)
            .map(|mu| (0..params.n_prod).map(|i| prod[i * p + mu] as i64).sum())
            .collect();
        Self {
            p,
            s,
            spec,
            prod_sum,
            prod,
            n_prod: params.n_prod,
        }
    }

    /// Action of speculator `i` playing strategy `strategy` under `mu`
    /// (0-based); the inactive strategy returns 0.
    pub fn speculator_action(&self, i: usize, strategy: usize, mu: usize) -> i8 {
        if strategy == 0 {
            0
        } else {
            self.spec[(i * self.s + strategy - 1) * self.p + mu]
        }
    }

    pub fn producer_action(&self, i: usize, mu: usize) -> i8 {
        assert!(i < self.n_prod);
        self.prod[i * self.p + mu]
    }

    /// Sum of all producer actions under `mu` (0-based).
    pub fn producer_sum(&self, mu: usize) -> i64 {
        self.prod_sum[mu]
    }
}

/// Uniform information state in `1..=p`.
pub fn draw_information(rng: &mut RngStream, p: usize) -> usize {
    rng.uniform_int(1, p)
}

/// Index of the highest score, ties broken uniformly at random.
pub fn select_strategy(scores: &[f64], rng: &mut RngStream) -> usize {
    assert!(!scores.is_empty(), "no strategies to choose from");
    let mut best = 0;
    let mut ties = 1usize;
    for (s, &u) in scores.iter().enumerate().skip(1) {
        if u > scores[best] {
            best = s;
            ties = 1;
        } else if u == scores[best] {
            ties += 1;
            if rng.uniform_int(1, ties) == 1 {
                best = s;
            }
        }
    }
    best
}

/// Sum of individual actions; inactive agents contribute 0.
pub fn aggregate_action(actions: &[i8]) -> i64 {
    actions.iter().map(|&a| a as i64).sum()
}

/// Rewards every strategy of every speculator with `-a * A`; the inactive
/// strategy earns `epsilon` instead.
pub fn update_scores(scores: &mut [f64], table: &StrategyTable, a: i64, mu: usize, epsilon: f64) {
    let width = table.s + 1;
    for (i, row) in scores.chunks_mut(width).enumerate() {
        row[0] += epsilon;
        for (s, u) in row.iter_mut().enumerate().skip(1) {
            *u -= table.speculator_action(i, s, mu) as f64 * a as f64;
        }
    }
}

pub fn gcmg_price_step(log_price: f64, a: i64, lambda_depth: f64) -> f64 {
    log_price + a as f64 / lambda_depth
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictabilityError {
    #[error("empty history")]
    Empty,
    #[error("information state {mu} outside 1..={p}")]
    OutOfRange { mu: usize, p: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictability {
    pub h: f64,
    /// Information states never observed; their terms are skipped.
    pub unobserved: Vec<usize>,
}

/// `H = (1/P) sum_mu <A | mu>^2` from a record of `(mu, A)` pairs, `mu` in
/// `1..=p`.
pub fn predictability(history: &[(usize, f64)], p: usize) -> Result<Predictability, PredictabilityError> {
    if history.is_empty() {
        return Err(PredictabilityError::Empty);
    }
    let mut sum = vec![0.0; p];
    let mut count = vec![0usize; p];
    for &(mu, a) in history {
        if mu == 0 || mu > p {
            return Err(PredictabilityError::OutOfRange { mu, p });
        }
        sum[mu - 1] += a;
        count[mu - 1] += 1;
    }
    let mut h = 0.0;
    let mut unobserved = Vec::new();
    for mu in 0..p {
        if count[mu] == 0 {
            unobserved.push(mu + 1);
        } else {
            let m = sum[mu] / count[mu] as f64;
            h += m * m;
        }
    }
    Ok(Predictability {
        h: h / p as f64,
        unobserved,
    })
}

#[derive(Debug, Clone)]
pub struct GcmgModel {
    params: GcmgParams,
    table: StrategyTable,
    scores: Vec<f64>,
    choice: Vec<usize>,
    log_price: f64,
    mu: usize,
    t: u64,
}

impl GcmgModel {
    /// Draws the strategy tables from `rng`, so the same stream also drives
    /// the run.
    pub fn new(params: GcmgParams, rng: &mut RngStream) -> Result<Self, ModelError> {
        params.validate()?;
        let table = StrategyTable::draw(&params, rng);
        let scores = vec![params.score_init; params.n_spec * (params.s + 1)];
        Ok(Self {
            choice: vec![0; params.n_spec],
            log_price: params.log_price0,
            table,
            scores,
            params,
            mu: 0,
            t: 0,
        })
    }

    pub fn table(&self) -> &StrategyTable {
        &self.table
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn log_price(&self) -> f64 {
        self.log_price
    }
}

impl Model for GcmgModel {
    fn observable_names(&self) -> Vec<String> {
        ["A", "log_price", "mu", "n_active"].map(String::from).to_vec()
    }

    fn price(&self) -> f64 {
        self.log_price.exp()
    }

    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
        let mu = draw_information(rng, self.params.p);
        let m = mu - 1;
        let width = self.params.s + 1;
        let mut a = self.table.producer_sum(m);
        let mut active = 0usize;
        for i in 0..self.params.n_spec {
            let s = select_strategy(&self.scores[i * width..(i + 1) * width], rng);
            self.choice[i] = s;
            if s != 0 {
                active += 1;
                a += self.table.speculator_action(i, s, m) as i64;
            }
        }
        self.log_price = gcmg_price_step(self.log_price, a, self.params.lambda_depth);
        if !self.log_price.is_finite() {
            return Err(ModelError::NonFinitePrice(self.log_price));
        }
        update_scores(&mut self.scores, &self.table, a, m, self.params.epsilon);
        self.mu = mu;
        self.t += 1;
        out.clear();
        out.extend([a as f64, self.log_price, mu as f64, active as f64]);
        Ok(())
    }
}
