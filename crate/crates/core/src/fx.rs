//! Multi-currency markets of pricing kernels.
//!
//! The exchange rate between currencies `i` and `j` is `S^{ij} = π^i/π^j`.
//! Every currency's drivers are linear combinations of one shared pool of
//! independent Brownian motions `W`:
//!
//! `dX^i = σ^i_t L^i dW_t`,
//!
//! where the rows of `L^i` are orthonormal, so each currency on its own is
//! an ordinary Bessel model. Pool factors loaded by several currencies carry
//! systematic risk; factors loaded by one currency are idiosyncratic.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_value, KernelModel, SovereignGbmParams};
use crate::mc::{estimate, Draw, McOptions};
use crate::numerics::{bessel_i_scaled, integrate, normal_cdf, QuadratureSpec};
use crate::quote::{Method, PriceQuote};
use crate::stochastic::{FactorState, RngStream, VolatilityCurve};
use crate::term_structure::bond_price;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// A crypto kernel scaled to its initial value: `π^i_t = scale · π_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelLeg {
    pub model: KernelModel,
    pub vol: VolatilityCurve,
    /// `π^i_0`.
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl KernelLeg {
    pub fn new(model: KernelModel, vol: VolatilityCurve, scale: f64) -> Result<Self> {
        let leg = Self { model, vol, scale };
        leg.validate()?;
        Ok(leg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::invalid(format!("kernel scale must be > 0, got {}", self.scale)));
        }
        if matches!(self.model, KernelModel::SovereignGbm(_)) {
            return Err(Error::UnsupportedModel(
                "a crypto leg needs a factor-driven kernel".into(),
            ));
        }
        Ok(())
    }

    pub fn kernel(&self, state: &FactorState) -> Result<f64> {
        Ok(self.scale * kernel_value(&self.model, state)?)
    }

    /// `E[π_T] = π_0 P_{0T}`.
    pub fn expected_kernel(&self, maturity: f64) -> Result<f64> {
        let s0 = self.model.initial_state()?;
        Ok(self.scale * bond_price(&self.model, &s0, &self.vol, maturity)?)
    }
}

/// One currency as written in a market config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrencyConfig {
    pub name: String,
    pub model: KernelModel,
    pub vol: VolatilityCurve,
    #[serde(default = "unit")]
    pub scale: f64,
    /// One row per driver, one column per pool factor. Omitted loadings give
    /// the currency its own block of fresh factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loadings: Option<Vec<Vec<f64>>>,
}

/// Market config JSON: `{"currencies": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub currencies: Vec<CurrencyConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Currency {
    pub name: String,
    pub leg: KernelLeg,
    pub loadings: Vec<Vec<f64>>,
}

/// Named currencies sharing one pool of Brownian factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketConfig", into = "MarketConfig")]
pub struct MultiCurrencyMarket {
    currencies: Vec<Currency>,
    n_factors: usize,
}

impl TryFrom<MarketConfig> for MultiCurrencyMarket {
    type Error = Error;
    fn try_from(cfg: MarketConfig) -> Result<Self> {
        MultiCurrencyMarket::new(cfg)
    }
}

impl From<MultiCurrencyMarket> for MarketConfig {
    fn from(m: MultiCurrencyMarket) -> Self {
        MarketConfig {
            currencies: m
                .currencies
                .into_iter()
                .map(|c| CurrencyConfig {
                    name: c.name,
                    model: c.leg.model,
                    vol: c.leg.vol,
                    scale: c.leg.scale,
                    loadings: Some(c.loadings),
                })
                .collect(),
        }
    }
}

fn check_orthonormal(name: &str, rows: &[Vec<f64>]) -> Result<()> {
    for (a, ra) in rows.iter().enumerate() {
        for (b, rb) in rows.iter().enumerate().skip(a) {
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            if (dot - want).abs() > ORTHONORMAL_TOL || !dot.is_finite() {
                return Err(Error::invalid(format!(
                    "loadings of `{name}` must be orthonormal rows; rows {a} and {b} give {dot}"
                )));
            }
        }
    }
    Ok(())
}

impl MultiCurrencyMarket {
    pub fn new(cfg: MarketConfig) -> Result<Self> {
        if cfg.currencies.is_empty() {
            return Err(Error::invalid("a market needs at least one currency"));
        }
        let mut seen = HashSet::new();
        for c in &cfg.currencies {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::invalid(format!("duplicate currency name `{}`", c.name)));
            }
        }
        let explicit = cfg.currencies.iter().filter_map(|c| c.loadings.as_ref()).next();
        let pool_width = explicit.and_then(|l| l.first()).map_or(0, |r| r.len());
        let fresh: usize = cfg
            .currencies
            .iter()
            .filter(|c| c.loadings.is_none())
            .map(|c| c.model.dimension())
            .sum();
        let n_factors = pool_width + fresh;
        let mut next_fresh = pool_width;
        let mut currencies = Vec::with_capacity(cfg.currencies.len());
        for c in cfg.currencies {
            let leg = KernelLeg::new(c.model, c.vol, c.scale)?;
            let dim = leg.model.dimension();
            let loadings: Vec<Vec<f64>> = match c.loadings {
                Some(rows) => {
                    if rows.len() != dim {
                        return Err(Error::invalid(format!(
                            "`{}` needs {dim} loading rows, got {}",
                            c.name,
                            rows.len()
                        )));
                    }
                    if rows.iter().any(|r| r.len() != pool_width) {
                        return Err(Error::invalid(format!(
                            "every loading row must have {pool_width} entries (`{}`)",
                            c.name
                        )));
                    }
                    rows.into_iter()
                        .map(|mut r| {
                            r.resize(n_factors, 0.0);
                            r
                        })
                        .collect()
                }
                None => {
                    let rows: Vec<Vec<f64>> = (0..dim)
                        .map(|k| {
                            let mut r = vec![0.0; n_factors];
                            r[next_fresh + k] = 1.0;
                            r
                        })
                        .collect();
                    next_fresh += dim;
                    rows
                }
            };
            check_orthonormal(&c.name, &loadings)?;
            currencies.push(Currency { name: c.name, leg, loadings });
        }
        Ok(Self { currencies, n_factors })
    }

    pub fn currencies(&self) -> &[Currency] {
        &self.currencies
    }

    /// Size of the shared Brownian pool.
    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.currencies
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn currency(&self, name: &str) -> Result<&Currency> {
        Ok(&self.currencies[self.index_of(name)?])
    }

    /// Every currency at its starting state.
    pub fn initial_state(&self) -> Result<JointState> {
        let states = self
            .currencies
            .iter()
            .map(|c| c.leg.model.initial_state())
            .collect::<Result<_>>()?;
        Ok(JointState { time: 0.0, states })
    }

    /// Breakpoints of `[0, T]` on which every currency's σ is constant.
    fn segments(&self, maturity: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = self
            .currencies
            .iter()
            .flat_map(|c| c.leg.vol.knot_times().iter().copied())
            .filter(|&t| t > 0.0 && t < maturity)
            .collect();
        cuts.push(0.0);
        cuts.push(maturity);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Number of standard normals consumed by [`Self::sample_terminal`].
    pub fn normals_needed(&self, maturity: f64) -> usize {
        self.n_factors * self.segments(maturity).len()
    }

    /// Exact joint state at `maturity` from the starting state, driven by
    /// `normals` (length [`Self::normals_needed`]). Pool increments are drawn
    /// per segment on which all volatilities are constant.
    pub fn sample_terminal(&self, maturity: f64, normals: &[f64]) -> Result<JointState> {
        let plan = TerminalPlan::new(self, maturity)?;
        plan.apply(self, normals)
    }
}

/// Per-currency, per-segment `σ √Δt` for one maturity.
struct TerminalPlan {
    maturity: f64,
    scales: Vec<Vec<f64>>,
    initial: JointState,
    n_factors: usize,
}

impl TerminalPlan {
    fn new(market: &MultiCurrencyMarket, maturity: f64) -> Result<Self> {
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::domain(format!("maturity must be > 0, got {maturity}")));
        }
        let segs = market.segments(maturity);
        let scales = market
            .currencies
            .iter()
            .map(|c| segs.iter().map(|&(a, b)| c.leg.vol.variance_unchecked(a, b).sqrt()).collect())
            .collect();
        Ok(Self { maturity, scales, initial: market.initial_state()?, n_factors: market.n_factors })
    }

    fn apply(&self, market: &MultiCurrencyMarket, normals: &[f64]) -> Result<JointState> {
        let n_seg = self.scales.first().map_or(0, |s| s.len());
        if normals.len() != n_seg * self.n_factors {
            return Err(Error::invalid(format!(
                "expected {} normals, got {}",
                n_seg * self.n_factors,
                normals.len()
            )));
        }
        let mut states = self.initial.states.clone();
        for (ci, c) in market.currencies.iter().enumerate() {
            let offsets = &mut states[ci].offsets;
            for (seg, z) in normals.chunks(self.n_factors).enumerate() {
                let s = self.scales[ci][seg];
                for (k, row) in c.loadings.iter().enumerate() {
                    let dw: f64 = row.iter().zip(z).map(|(l, x)| l * x).sum();
                    offsets[k] += s * dw;
                }
            }
            states[ci].time = self.maturity;
        }
        Ok(JointState { time: self.maturity, states })
    }
}

/// Factor states of every currency at one time, in market order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub time: f64,
    pub states: Vec<FactorState>,
}

fn kernel_of(market: &MultiCurrencyMarket, idx: usize, joint: &JointState) -> Result<f64> {
    let state = joint
        .states
        .get(idx)
        .ok_or_else(|| Error::invalid("joint state does not cover the market"))?;
    market.currencies[idx].leg.kernel(state)
}

/// `S^{ij}_t = π^i_t / π^j_t`: the price in currency `j` of one unit of `i`.
pub fn exchange_rate(market: &MultiCurrencyMarket, i: &str, j: &str, joint: &JointState) -> Result<f64> {
    let (a, b) = (market.index_of(i)?, market.index_of(j)?);
    Ok(kernel_of(market, a, joint)? / kernel_of(market, b, joint)?)
}

/// Call on `S^{ij}_T` struck at `K`, priced in currency `j` at time 0:
/// `E[(π^i_T - K π^j_T)⁺] / π^j_0`.
pub fn crypto_crypto_call_mc(
    market: &MultiCurrencyMarket,
    i: &str,
    j: &str,
    maturity: f64,
    strike: f64,
    options: &McOptions,
    stream: &RngStream,
) -> Result<PriceQuote> {
    if !(strike >= 0.0) || !strike.is_finite() {
        return Err(Error::domain(format!("strike must be >= 0, got {strike}")));
    }
    let (a, b) = (market.index_of(i)?, market.index_of(j)?);
    let plan = TerminalPlan::new(market, maturity)?;
    let pi_j0 = market.currencies[b].leg.scale;
    let dim = market.normals_needed(maturity);
    let est = estimate(options, stream, dim, |z| {
        let joint = plan.apply(market, z)?;
        let ki = kernel_of(market, a, &joint);
        let kj = kernel_of(market, b, &joint);
        Ok(match (ki, kj) {
            (Ok(x), Ok(y)) => Draw::Value((x - strike * y).max(0.0) / pi_j0),
            (Err(Error::Singularity(_)), _) | (_, Err(Error::Singularity(_))) => Draw::Singular,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        })
    })?;
    Ok(est.into())
}

/// How [`crypto_usd_call`] takes the outer expectation over the crypto
/// kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FxMethod {
    MonteCarlo,
    RadialQuadrature,
}

/// Payoff conditional on the crypto kernel value, in log space:
/// `π N(g₊) - K e^{-rT} π_0^$ N(g₋)` over `π_0^$`.
struct UsdConditional {
    strike: f64,
    maturity: f64,
    usd: SovereignGbmParams,
}

impl UsdConditional {
    fn value(&self, log_pi: f64) -> f64 {
        let pi = log_pi.exp();
        let usd0 = self.usd.initial;
        let (r, lam, t) = (self.usd.short_rate, self.usd.risk_premium, self.maturity);
        if self.strike == 0.0 {
            return pi / usd0;
        }
        let fwd = self.strike * usd0 * (-r * t).exp();
        if lam == 0.0 {
            return (pi - fwd).max(0.0) / usd0;
        }
        let sd = lam * t.sqrt();
        let m = log_pi - (self.strike * usd0).ln() + r * t;
        let gp = (m + 0.5 * lam * lam * t) / sd;
        let gm = (m - 0.5 * lam * lam * t) / sd;
        (pi * normal_cdf(gp) - fwd * normal_cdf(gm)) / usd0
    }
}

fn log_kernel(leg: &KernelLeg, state: &FactorState) -> Result<f64> {
    match leg.model.real_order() {
        Some(n) if !matches!(leg.model, KernelModel::ComplexBessel3(_)) => {
            let r = crate::kernels::radius(state)?;
            Ok(leg.scale.ln() + (2.0 - n as f64) * r.ln())
        }
        _ => Ok(leg.kernel(state)?.ln()),
    }
}

/// Option to buy one unit of a crypto currency for `K` dollars at `T`,
/// priced in dollars at time 0, with a geometric Brownian dollar kernel
/// independent of the crypto drivers.
///
/// Conditioning on the crypto kernel gives
/// `C_0 = E[π^B_T N(g₊) - K e^{-rT} π^$_0 N(g₋)] / π^$_0` with
/// `g± = (log(π^B_T/(K π^$_0)) + rT ± λ²T/2)/(λ√T)`.
/// The outer expectation is taken by sampling or by a radial integral.
/// `λ = 0` reduces to `E[(π^B_T - K π^$_0 e^{-rT})⁺]/π^$_0`.
pub fn crypto_usd_call(
    crypto: &KernelLeg,
    usd: &SovereignGbmParams,
    maturity: f64,
    strike: f64,
    method: FxMethod,
    options: &McOptions,
    stream: &RngStream,
) -> Result<PriceQuote> {
    crypto.validate()?;
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(Error::domain(format!("maturity must be > 0, got {maturity}")));
    }
    if !(strike >= 0.0) || !strike.is_finite() {
        return Err(Error::domain(format!("strike must be >= 0, got {strike}")));
    }
    let cond = UsdConditional { strike, maturity, usd: *usd };
    match method {
        FxMethod::MonteCarlo => {
            let s0 = crypto.model.initial_state()?;
            let var = crypto.vol.accumulated_variance(0.0, maturity)?;
            let est = estimate(options, stream, crypto.model.dimension(), |z| {
                let st = s0.shifted(maturity, var, z);
                Ok(match log_kernel(crypto, &st) {
                    Ok(lp) => Draw::Value(cond.value(lp)),
                    Err(Error::Singularity(_)) => Draw::Singular,
                    Err(e) => return Err(e),
                })
            })?;
            Ok(est.into())
        }
        FxMethod::RadialQuadrature => radial_usd_call(crypto, &cond, maturity),
    }
}

fn radial_usd_call(crypto: &KernelLeg, cond: &UsdConditional, maturity: f64) -> Result<PriceQuote> {
    let n = match crypto.model.real_order() {
        Some(n @ (3 | 4)) if !matches!(crypto.model, KernelModel::ComplexBessel3(_)) => n,
        _ => {
            return Err(Error::UnsupportedModel(format!(
                "radial quadrature needs a Bessel(3) or Bessel(4) kernel, not {}",
                crypto.model.name()
            )))
        }
    };
    let xi0 = crypto.model.initial_state()?.norm();
    let s = crypto.vol.accumulated_variance(0.0, maturity)?;
    let log_scale = crypto.scale.ln();
    let density = move |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let g = (-(x - xi0) * (x - xi0) / (2.0 * s)).exp();
        if n == 3 {
            x / (xi0 * (2.0 * PI * s).sqrt()) * g * -(-2.0 * x * xi0 / s).exp_m1()
        } else {
            x * x / (s * xi0) * bessel_i_scaled(1, x * xi0 / s).unwrap_or(0.0) * g
        }
    };
    let f = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let log_pi = log_scale + (2.0 - n as f64) * x.ln();
        cond.value(log_pi) * density(x)
    };
    let upper = xi0 + 40.0 * s.sqrt() + 1.0;
    let spec = QuadratureSpec::finite(0.0, upper).with_tolerances(1e-13, 1e-12);
    let q = integrate(f, &spec)?;
    Ok(PriceQuote { value: q.value.max(0.0), method: Method::Quadrature, err_est: q.err_est })
}

/// Monte Carlo of `E[(π^B_T - K π^$_T)⁺]/π^$_0` with both kernels sampled
/// jointly; the oracle for [`crypto_usd_call`].
pub fn crypto_usd_call_joint_mc(
    crypto: &KernelLeg,
    usd: &SovereignGbmParams,
    maturity: f64,
    strike: f64,
    options: &McOptions,
    stream: &RngStream,
) -> Result<PriceQuote> {
    crypto.validate()?;
    if !(maturity > 0.0) {
        return Err(Error::domain(format!("maturity must be > 0, got {maturity}")));
    }
    let s0 = crypto.model.initial_state()?;
    let var = crypto.vol.accumulated_variance(0.0, maturity)?;
    let dim = crypto.model.dimension();
    let est = estimate(options, stream, dim + 1, |z| {
        let st = s0.shifted(maturity, var, &z[..dim]);
        let pi_b = match crypto.kernel(&st) {
            Ok(v) => v,
            Err(Error::Singularity(_)) => return Ok(Draw::Singular),
            Err(e) => return Err(e),
        };
        let b = z[dim] * maturity.sqrt();
        let pi_usd = crate::kernels::sovereign_kernel_value(usd, b, maturity)?;
        Ok(Draw::Value((pi_b - strike * pi_usd).max(0.0) / usd.initial))
    })?;
    Ok(est.into())
}
