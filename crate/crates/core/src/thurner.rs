//! Leveraged value investors facing mean-reverting noise traders.
//!
//! Noise-trader demand follows an AR(1) in logs. Funds buy in proportion to
//! mispricing and wealth, up to a leverage cap; the price clears supply of
//! `N_s` shares numerically each tick. A falling price pushes leverage
//! against the cap and forces sales, and funds whose wealth drops below a
//! fraction of their initial stake are wound up and replaced later.

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelError};
use crate::rng::RngStream;

fn default_bankrupt_frac() -> f64 {
    0.1
}

/// One fund's fixed characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundSpec {
    /// Aggressivity: demand per unit mispricing per unit wealth.
    pub beta: f64,
    /// Initial and re-entry wealth.
    pub w0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThurnerParams {
    pub rho: f64,
    pub sigma: f64,
    #[serde(rename = "N_shares")]
    pub n_shares: f64,
    pub p_f: f64,
    pub funds: Vec<FundSpec>,
    pub lambda_max: f64,
    #[serde(default = "default_bankrupt_frac")]
    pub bankrupt_frac: f64,
    /// Ticks a failed fund stays out before re-entering.
    #[serde(rename = "T_wait")]
    pub t_wait: u64,
    /// Investor-flow gain; zero disables flows.
    #[serde(default)]
    pub flow_kappa: f64,
    /// Benchmark return per tick for investor flows.
    #[serde(default)]
    pub r_bm: f64,
    /// Initial noise-trader scale; defaults to `N_shares * p_f`.
    #[serde(default)]
    pub xi0: Option<f64>,
}

impl ThurnerParams {
    /// `n` funds with `beta_h = beta_step * h`, `h = 1..=n`, all starting at `w0`.
    pub fn graded_funds(n: usize, beta_step: f64, w0: f64) -> Vec<FundSpec> {
        (1..=n)
            .map(|h| FundSpec {
                beta: beta_step * h as f64,
                w0,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(ModelError::param("rho", "must lie in [0, 1)"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ModelError::param("sigma", "must be finite and non-negative"));
        }
        if !(self.n_shares > 0.0 && self.n_shares.is_finite()) {
            return Err(ModelError::param("N_shares", "must be positive"));
        }
        if !(self.p_f > 0.0 && self.p_f.is_finite()) {
            return Err(ModelError::param("p_f", "must be positive"));
        }
        if !(self.lambda_max >= 1.0 && self.lambda_max.is_finite()) {
            return Err(ModelError::param("lambda_max", "must be at least 1"));
        }
        if !(self.bankrupt_frac > 0.0 && self.bankrupt_frac < 1.0) {
            return Err(ModelError::param("bankrupt_frac", "must lie in (0, 1)"));
        }
        if self.t_wait == 0 {
            return Err(ModelError::param("T_wait", "must be at least 1"));
        }
        if !(self.flow_kappa >= 0.0 && self.flow_kappa.is_finite()) {
            return Err(ModelError::param("flow_kappa", "must be finite and non-negative"));
        }
        if !self.r_bm.is_finite() {
            return Err(ModelError::param("r_bm", "must be finite"));
        }
        for f in &self.funds {
            if !(f.beta >= 0.0 && f.beta.is_finite()) {
                return Err(ModelError::param("funds", "beta must be finite and non-negative"));
            }
            if !(f.w0 > 0.0 && f.w0.is_finite()) {
                return Err(ModelError::param("funds", "w0 must be positive"));
            }
        }
        if let Some(xi) = self.xi0 {
            if !(xi > 0.0 && xi.is_finite()) {
                return Err(ModelError::param("xi0", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FundStatus {
    Active,
    /// Wound up; re-enters after `remaining` more ticks.
    Bankrupt { remaining: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundState {
    /// Wealth at the last clearing price.
    pub w: f64,
    /// Cash; negative means borrowing.
    pub c: f64,
    /// Shares held.
    pub d: f64,
    /// Wealth after the last investor flow, the base for the next fund return.
    pub w_ref: f64,
    /// Investor flow earned this tick, credited before the next clearing.
    pub pending_flow: f64,
    pub status: FundStatus,
}

impl FundState {
    pub fn fresh(w0: f64) -> Self {
        Self {
            w: w0,
            c: w0,
            d: 0.0,
            w_ref: w0,
            pending_flow: 0.0,
            status: FundStatus::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == FundStatus::Active
    }

    /// `D p / W` at price `p`; zero for a fund without positive wealth.
    pub fn leverage(&self, p: f64) -> f64 {
        if self.is_active() && self.w > 0.0 {
            self.d * p / self.w
        } else {
            0.0
        }
    }
}

/// `log ξ' = ρ log ξ + σ η + (1 − ρ) log(N_s p_f)`.
pub fn noise_trader_step(xi: f64, params: &ThurnerParams, rng: &mut RngStream) -> f64 {
    let eta = if params.sigma > 0.0 {
        rng.standard_normal()
    } else {
        0.0
    };
    let anchor = (params.n_shares * params.p_f).ln();
    (params.rho * xi.ln() + params.sigma * eta + (1.0 - params.rho) * anchor).exp()
}

/// Shares a fund with wealth `w` wants at price `p`.
pub fn fund_demand(w: f64, p: f64, p_f: f64, beta: f64, lambda_max: f64) -> f64 {
    let m = p_f - p;
    if m <= 0.0 || w <= 0.0 {
        return 0.0;
    }
    (beta * m * w / p).min(lambda_max * w / p)
}

/// Aggregate demand minus supply at price `p`, with fund wealth marked at `p`.
pub fn excess_demand(p: f64, xi: f64, funds: &[FundState], params: &ThurnerParams) -> f64 {
    let mut total = xi / p;
    for (f, spec) in funds.iter().zip(&params.funds) {
        if f.is_active() {
            let w = f.d * p + f.c;
            total += fund_demand(w, p, params.p_f, spec.beta, params.lambda_max);
        }
    }
    total - params.n_shares
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearing {
    pub price: f64,
    /// Excess demand at `price`.
    pub residual: f64,
    pub iterations: u32,
}

const CLEARING_TOL: f64 = 1e-10;

/// Solves `ξ/p + Σ D_h(p) = N_s` for `p` by bisection.
///
/// Fund wealth is marked to market at each trial price. With no active fund
/// the closed form `ξ / N_s` is returned.
pub fn clear_market(xi: f64, funds: &[FundState], params: &ThurnerParams) -> Result<Clearing, ModelError> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(ModelError::Clearing(format!("noise-trader scale {xi} is not positive")));
    }
    if !funds.iter().any(FundState::is_active) {
        let price = xi / params.n_shares;
        return Ok(Clearing {
            price,
            residual: excess_demand(price, xi, funds, params),
            iterations: 0,
        });
    }
    // Above p_f funds demand nothing, so twice the larger of p_f and the
    // fund-free price has negative excess demand.
    let mut lo = 1e-12;
    let mut hi = 2.0 * params.p_f.max(xi / params.n_shares);
    let f_lo = excess_demand(lo, xi, funds, params);
    let f_hi = excess_demand(hi, xi, funds, params);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(ModelError::Clearing(format!(
            "no sign change on [{lo:e}, {hi:e}]: excess demand {f_lo:e} and {f_hi:e}"
        )));
    }
    let tol = CLEARING_TOL * params.n_shares;
    let mut best = (hi, f_hi);
    let mut iterations = 0;
    while iterations < 2000 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f = excess_demand(mid, xi, funds, params);
        if f.abs() < best.1.abs() {
            best = (mid, f);
        }
        if f.abs() < 0.01 * tol || mid <= lo || mid >= hi {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (price, residual) = best;
    if residual.abs() >= tol {
        return Err(ModelError::Clearing(format!(
            "residual {residual:e} at p = {price:e} exceeds {tol:e} after {iterations} bisections"
        )));
    }
    Ok(Clearing {
        price,
        residual,
        iterations,
    })
}

/// Marks an active fund to `p_new`, trades to its new demand and books the
/// investor flow for the next tick.
pub fn fund_accounting_step(fund: &FundState, spec: &FundSpec, p_new: f64, params: &ThurnerParams) -> FundState {
    debug_assert!(fund.is_active());
    let w = fund.d * p_new + fund.c;
    let d = fund_demand(w, p_new, params.p_f, spec.beta, params.lambda_max);
    let c = fund.c - (d - fund.d) * p_new;
    let pending_flow = if params.flow_kappa > 0.0 {
        let r = if fund.w_ref > 0.0 {
            (w - fund.w_ref) / fund.w_ref
        } else {
            0.0
        };
        // Investors cannot withdraw more than the fund holds.
        (params.flow_kappa * (r - params.r_bm)).max(-1.0) * w.max(0.0)
    } else {
        0.0
    };
    FundState {
        w,
        c,
        d,
        w_ref: fund.w_ref,
        pending_flow,
        status: FundStatus::Active,
    }
}

/// Credits pending flows, winds up funds below the wealth threshold and
/// counts down the wait of failed ones.
pub fn bankruptcy_step(fund: &FundState, spec: &FundSpec, params: &ThurnerParams) -> FundState {
    match fund.status {
        FundStatus::Active => {
            let w = fund.w + fund.pending_flow;
            if w < params.bankrupt_frac * spec.w0 {
                FundState {
                    w: 0.0,
                    c: 0.0,
                    d: 0.0,
                    w_ref: 0.0,
                    pending_flow: 0.0,
                    status: FundStatus::Bankrupt {
                        remaining: params.t_wait,
                    },
                }
            } else {
                FundState {
                    w,
                    c: fund.c + fund.pending_flow,
                    w_ref: w,
                    pending_flow: 0.0,
                    ..*fund
                }
            }
        }
        FundStatus::Bankrupt { remaining } if remaining <= 1 => FundState::fresh(spec.w0),
        FundStatus::Bankrupt { remaining } => FundState {
            status: FundStatus::Bankrupt {
                remaining: remaining - 1,
            },
            ..*fund
        },
    }
}

#[derive(Debug, Clone)]
pub struct ThurnerModel {
    params: ThurnerParams,
    xi: f64,
    price: f64,
    funds: Vec<FundState>,
    t: u64,
    bankruptcies: u64,
    peak_residual: f64,
    peak_leverage: f64,
}

impl ThurnerModel {
    pub fn new(params: ThurnerParams) -> Result<Self, ModelError> {
        params.validate()?;
        let xi = params.xi0.unwrap_or(params.n_shares * params.p_f);
        let funds = params.funds.iter().map(|f| FundState::fresh(f.w0)).collect();
        Ok(Self {
            xi,
            price: xi / params.n_shares,
            funds,
            params,
            t: 0,
            bankruptcies: 0,
            peak_residual: 0.0,
            peak_leverage: 0.0,
        })
    }

    pub fn params(&self) -> &ThurnerParams {
        &self.params
    }

    pub fn funds(&self) -> &[FundState] {
        &self.funds
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Funds wound up so far.
    pub fn bankruptcies(&self) -> u64 {
        self.bankruptcies
    }
}

impl Model for ThurnerModel {
    fn observable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["m", "xi", "active_funds", "max_leverage", "residual"]
            .map(String::from)
            .to_vec();
        for h in 1..=self.funds.len() {
            for field in ["W", "D", "lambda", "status"] {
                names.push(format!("{field}_{h}"));
            }
        }
        names
    }

    fn price(&self) -> f64 {
        self.price
    }

    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
        for (f, spec) in self.funds.iter_mut().zip(&self.params.funds) {
            let next = bankruptcy_step(f, spec, &self.params);
            if f.is_active() && !next.is_active() {
                self.bankruptcies += 1;
            }
            *f = next;
        }
        self.xi = noise_trader_step(self.xi, &self.params, rng);
        let clearing = clear_market(self.xi, &self.funds, &self.params)?;
        let p = clearing.price;
        if !p.is_finite() {
            return Err(ModelError::NonFinitePrice(p));
        }
        if p <= 0.0 {
            return Err(ModelError::NonPositivePrice(p));
        }
        for (f, spec) in self.funds.iter_mut().zip(&self.params.funds) {
            if f.is_active() {
                *f = fund_accounting_step(f, spec, p, &self.params);
            }
        }
        self.price = p;
        self.t += 1;

        let active = self.funds.iter().filter(|f| f.is_active()).count();
        let max_leverage = self.funds.iter().map(|f| f.leverage(p)).fold(0.0, f64::max);
        self.peak_residual = self.peak_residual.max(clearing.residual.abs());
        self.peak_leverage = self.peak_leverage.max(max_leverage);
        out.clear();
        out.extend([
            self.params.p_f - p,
            self.xi,
            active as f64,
            max_leverage,
            clearing.residual,
        ]);
        for f in &self.funds {
            out.extend([f.w, f.d, f.leverage(p), if f.is_active() { 1.0 } else { 0.0 }]);
        }
        Ok(())
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("bankruptcies", self.bankruptcies as f64),
            ("peak_leverage", self.peak_leverage),
            ("peak_residual", self.peak_residual),
        ]
    }
}
