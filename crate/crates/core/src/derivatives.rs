//! Bond options and caplets.
//!
//! Options are priced at time 0 from the model's starting state (`ξ_0 = 1`),
//! except the digital, which accepts any state before expiry. A strike of 0
//! is accepted as the limit `K → 0⁺`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{radius, KernelModel};
use crate::numerics::erf::{erf_unchecked, erfc_unchecked};
use crate::numerics::{bessel_i_scaled, erf_inv, integrate, lower_gamma_int, upper_gamma_int};
use crate::numerics::{factorial, QuadratureSpec};
use crate::quote::{Method, PriceQuote};
use crate::stochastic::{FactorState, VolatilityCurve};

/// Tolerances for option integrals; tighter than the library default so
/// that parity and method agreement hold to 1e-10.
const OPTION_ABS_TOL: f64 = 1e-14;
const OPTION_REL_TOL: f64 = 1e-13;
/// Radial integrals stop `12 √Σ_{0t} + 1` beyond the critical numeraire,
/// where the Gaussian factor is below 1e-30.
const TRUNCATION_WIDTHS: f64 = 12.0;
/// Default truncation of the incomplete-gamma series.
pub const DEFAULT_SERIES_TERMS: u32 = 20;
/// Largest truncation the series is extended to.
pub const MAX_SERIES_TERMS: u32 = 60;
const SERIES_REL_TAIL: f64 = 1e-16;

/// `L_{tT} = (1/P - 1)/τ`.
pub fn simple_rate(bond: f64, tenor: f64) -> Result<f64> {
    if !(bond > 0.0) || bond > 1.0 || !bond.is_finite() {
        return Err(Error::domain(format!("bond price must be in (0, 1], got {bond}")));
    }
    if !(tenor > 0.0) || !tenor.is_finite() {
        return Err(Error::domain(format!("tenor must be > 0, got {tenor}")));
    }
    Ok((1.0 / bond - 1.0) / tenor)
}

/// Cap on the simple rate fixed at `reset` and paid at `payment`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapletSpec {
    #[serde(rename = "t")]
    pub reset: f64,
    #[serde(rename = "T")]
    pub payment: f64,
    #[serde(rename = "R")]
    pub cap_rate: f64,
    #[serde(rename = "X")]
    pub notional: f64,
}

impl CapletSpec {
    pub fn new(reset: f64, payment: f64, cap_rate: f64, notional: f64) -> Result<Self> {
        let s = Self { reset, payment, cap_rate, notional };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reset > 0.0) || !(self.payment > self.reset) || !self.payment.is_finite() {
            return Err(Error::invalid(format!(
                "caplet needs 0 < t < T, got t = {}, T = {}",
                self.reset, self.payment
            )));
        }
        if !(self.cap_rate >= 0.0) || !self.cap_rate.is_finite() {
            return Err(Error::invalid(format!("cap rate must be >= 0, got {}", self.cap_rate)));
        }
        if !(self.notional > 0.0) || !self.notional.is_finite() {
            return Err(Error::invalid(format!("notional must be > 0, got {}", self.notional)));
        }
        Ok(())
    }

    pub fn tenor(&self) -> f64 {
        self.payment - self.reset
    }
}

/// Put strike `K = 1/(1 + Rτ)` and count `N = X(1 + Rτ)/τ` replicating the
/// caplet as `N (K - P_{tT})⁺` paid at reset.
pub fn strike_notional(spec: &CapletSpec) -> (f64, f64) {
    let tau = spec.tenor();
    let g = 1.0 + spec.cap_rate * tau;
    (1.0 / g, spec.notional * g / tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionKind {
    Call,
    Put,
    DigitalCall,
}

/// European option on the discount bond maturing at `bond_maturity`,
/// exercised at `expiry`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondOptionSpec {
    #[serde(rename = "t")]
    pub expiry: f64,
    #[serde(rename = "T")]
    pub bond_maturity: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    pub kind: OptionKind,
}

impl BondOptionSpec {
    pub fn new(expiry: f64, bond_maturity: f64, strike: f64, kind: OptionKind) -> Result<Self> {
        let s = Self { expiry, bond_maturity, strike, kind };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expiry > 0.0) || !(self.bond_maturity > self.expiry) || !self.bond_maturity.is_finite() {
            return Err(Error::invalid(format!(
                "option needs 0 < t < T, got t = {}, T = {}",
                self.expiry, self.bond_maturity
            )));
        }
        if !(self.strike >= 0.0 && self.strike < 1.0) {
            return Err(Error::domain(format!("strike must lie in [0, 1), got {}", self.strike)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Three,
    Four,
}

fn order_of(model: &KernelModel) -> Result<Order> {
    match model.real_order() {
        Some(3) if !matches!(model, KernelModel::ComplexBessel3(_)) => Ok(Order::Three),
        Some(4) => Ok(Order::Four),
        _ => Err(Error::UnsupportedModel(format!(
            "bond options need the Bessel(3) or Bessel(4) model, not {}",
            model.name()
        ))),
    }
}

fn xi_star(order: Order, strike: f64, var_t_big_t: f64) -> Result<f64> {
    if strike == 0.0 {
        return Ok(0.0);
    }
    match order {
        Order::Three => Ok((2.0 * var_t_big_t).sqrt() * erf_inv(strike)?),
        Order::Four => Ok((-2.0 * var_t_big_t * (-strike).ln_1p()).sqrt()),
    }
}

/// Threshold `ξ*` with `P_{tT} > K ⇔ ξ_t > ξ*`.
pub fn critical_numeraire(
    model: &KernelModel,
    spec: &BondOptionSpec,
    curve: &VolatilityCurve,
) -> Result<f64> {
    spec.validate()?;
    let order = order_of(model)?;
    let v = curve.accumulated_variance(spec.expiry, spec.bond_maturity)?;
    xi_star(order, spec.strike, v)
}

/// Price at `state.time` of one unit paid at expiry when `P_{tT} > K`:
///
/// `D_s = ½[erf((ξ* + ξ_s)/√(2Σ_{st})) - erf((ξ* - ξ_s)/√(2Σ_{st}))]`.
pub fn digital_call_price(
    model: &KernelModel,
    state: &FactorState,
    spec: &BondOptionSpec,
    curve: &VolatilityCurve,
) -> Result<f64> {
    if order_of(model)? != Order::Three {
        return Err(Error::UnsupportedModel(format!(
            "the digital is priced for Bessel(3), not {}",
            model.name()
        )));
    }
    if state.dimension() != 3 {
        return Err(Error::invalid("Bessel(3) state must have 3 components"));
    }
    if !(state.time < spec.expiry) {
        return Err(Error::domain(format!(
            "digital needs s < t, got s = {}, t = {}",
            state.time, spec.expiry
        )));
    }
    let xs = critical_numeraire(model, spec, curve)?;
    let xi = radius(state)?;
    let root = (2.0 * curve.variance_unchecked(state.time, spec.expiry)).sqrt();
    let hi = erf_unchecked((xs + xi) / root);
    let lo = erf_unchecked((xs - xi) / root);
    Ok((0.5 * (hi - lo)).max(0.0))
}

fn option_quadrature<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64) -> Result<(f64, f64)> {
    if upper <= lower {
        return Ok((0.0, 0.0));
    }
    let spec = QuadratureSpec::finite(lower, upper).with_tolerances(OPTION_ABS_TOL, OPTION_REL_TOL);
    let q = integrate(f, &spec)?;
    Ok((q.value, q.err_est))
}

/// In-arrears caplet at time 0 in the Bessel(3) model:
///
/// `N/√(2πΣ_{0t}) ∫_0^{ξ*} [K - erf(x/√(2Σ_{tT}))] (e^{-(x-1)²/2Σ_{0t}} - e^{-(x+1)²/2Σ_{0t}}) dx`.
pub fn caplet_price(model: &KernelModel, spec: &CapletSpec, curve: &VolatilityCurve) -> Result<PriceQuote> {
    spec.validate()?;
    if order_of(model)? != Order::Three {
        return Err(Error::UnsupportedModel(format!(
            "the caplet is priced for Bessel(3), not {}",
            model.name()
        )));
    }
    let (k, n) = strike_notional(spec);
    let s0t = curve.accumulated_variance(0.0, spec.reset)?;
    let stt = curve.accumulated_variance(spec.reset, spec.payment)?;
    let root = (2.0 * stt).sqrt();
    // K - erf(y) written as (K - 1) + erfc(y) keeps the K = 1 tail exact
    let f = |x: f64| {
        let payoff = (k - 1.0) + erfc_unchecked(x / root);
        let g = (-(x - 1.0) * (x - 1.0) / (2.0 * s0t)).exp() * -(-2.0 * x / s0t).exp_m1();
        payoff * g
    };
    let scale = n / (2.0 * std::f64::consts::PI * s0t).sqrt();
    let (value, err) = if k >= 1.0 {
        let q = integrate(
            f,
            &QuadratureSpec::semi_infinite(0.0).with_tolerances(OPTION_ABS_TOL, OPTION_REL_TOL),
        )?;
        (q.value, q.err_est)
    } else if k == 0.0 {
        (0.0, 0.0)
    } else {
        let xs = root * erf_inv(k)?;
        option_quadrature(f, 0.0, xs)?
    };
    Ok(PriceQuote {
        value: (scale * value).max(0.0),
        method: Method::Quadrature,
        err_est: scale * err,
    })
}

/// How a Bessel(4) option is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum OptionMethod {
    Quadrature,
    /// Incomplete-gamma series truncated after `k_max` (extended up to
    /// [`MAX_SERIES_TERMS`] while the last term is not negligible).
    Series { k_max: u32 },
}

impl Default for OptionMethod {
    fn default() -> Self {
        OptionMethod::Series { k_max: DEFAULT_SERIES_TERMS }
    }
}

struct B4Inputs {
    strike: f64,
    s0t: f64,
    stt: f64,
    s0tt: f64,
    xi_star: f64,
}

fn b4_inputs(spec: &BondOptionSpec, curve: &VolatilityCurve) -> Result<B4Inputs> {
    spec.validate()?;
    let s0t = curve.accumulated_variance(0.0, spec.expiry)?;
    let stt = curve.accumulated_variance(spec.expiry, spec.bond_maturity)?;
    let xi_star = xi_star(Order::Four, spec.strike, stt)?;
    Ok(B4Inputs { strike: spec.strike, s0t, stt, s0tt: s0t + stt, xi_star })
}

/// `I_1(x/Σ) e^{-(x²+1)/2Σ} / Σ` written with the scaled Bessel function.
fn radial_weight(x: f64, s0t: f64) -> f64 {
    let v = x / s0t;
    let i1s = bessel_i_scaled(1, v).unwrap_or(0.0);
    i1s * (-(x - 1.0) * (x - 1.0) / (2.0 * s0t)).exp() / s0t
}

fn b4_quadrature(inp: &B4Inputs, call: bool) -> Result<PriceQuote> {
    let k = inp.strike;
    let stt = inp.stt;
    let s0t = inp.s0t;
    let (value, err) = if call {
        let upper = inp.xi_star + TRUNCATION_WIDTHS * s0t.sqrt() + 1.0;
        let f = |x: f64| (-(-x * x / (2.0 * stt)).exp_m1() - k) * radial_weight(x, s0t);
        option_quadrature(f, inp.xi_star, upper)?
    } else {
        let f = |x: f64| (k - 1.0 + (-x * x / (2.0 * stt)).exp()) * radial_weight(x, s0t);
        option_quadrature(f, 0.0, inp.xi_star)?
    };
    Ok(PriceQuote { value: value.max(0.0), method: Method::Quadrature, err_est: err })
}

fn b4_series(inp: &B4Inputs, call: bool, k_max: u32) -> Result<PriceQuote> {
    let k = inp.strike;
    let a = 1.0 / (2.0 * inp.s0t);
    let u = if k == 0.0 { 0.0 } else { -(inp.stt / inp.s0t) * (-k).ln_1p() };
    let w = u * inp.s0tt / inp.stt;
    let c = inp.stt / inp.s0tt;
    let term = |j: u32| -> Result<f64> {
        let coef = a.powi(j as i32 + 1) / (factorial(j) * factorial(j + 1));
        let cj = c.powi(j as i32 + 1);
        let bracket = if call {
            (1.0 - k) * upper_gamma_int(j, u)? - cj * upper_gamma_int(j, w)?
        } else {
            (k - 1.0) * lower_gamma_int(j, u)? + cj * lower_gamma_int(j, w)?
        };
        Ok(coef * bracket)
    };
    let mut terms = Vec::with_capacity(k_max as usize + 1);
    for j in 0..=k_max {
        terms.push(term(j)?);
    }
    let negligible = |terms: &[f64]| {
        let sum: f64 = terms.iter().sum();
        terms.last().map_or(true, |t| t.abs() <= SERIES_REL_TAIL * sum.abs().max(f64::MIN_POSITIVE))
    };
    let mut j = k_max;
    while !negligible(&terms) && j < MAX_SERIES_TERMS {
        j += 1;
        terms.push(term(j)?);
    }
    let n = terms.len();
    if n >= 3 && !negligible(&terms) {
        let (t1, t2) = (terms[n - 2].abs(), terms[n - 1].abs());
        if t2 >= t1 {
            return Err(Error::Numerical(format!(
                "series terms stopped decreasing at k = {}: {t1:e} then {t2:e}",
                n - 1
            )));
        }
    }
    let sum: f64 = terms.iter().rev().sum();
    let value = (-a).exp() * sum;
    let last = terms.last().copied().unwrap_or(0.0).abs() * (-a).exp();
    Ok(PriceQuote { value: value.max(0.0), method: Method::Series, err_est: last })
}

/// Terms of the incomplete-gamma series for a Bessel(4) call, without the
/// `e^{-1/2Σ_{0t}}` prefactor. Exposed for convergence diagnostics.
pub fn b4_call_series_terms(spec: &BondOptionSpec, curve: &VolatilityCurve, count: u32) -> Result<Vec<f64>> {
    let inp = b4_inputs(spec, curve)?;
    let a = 1.0 / (2.0 * inp.s0t);
    let k = inp.strike;
    let u = if k == 0.0 { 0.0 } else { -(inp.stt / inp.s0t) * (-k).ln_1p() };
    let w = u * inp.s0tt / inp.stt;
    let c = inp.stt / inp.s0tt;
    (0..count)
        .map(|j| {
            let coef = a.powi(j as i32 + 1) / (factorial(j) * factorial(j + 1));
            Ok(coef
                * ((1.0 - k) * upper_gamma_int(j, u)? - c.powi(j as i32 + 1) * upper_gamma_int(j, w)?))
        })
        .collect()
}

fn b4_price(spec: &BondOptionSpec, curve: &VolatilityCurve, method: OptionMethod, call: bool) -> Result<PriceQuote> {
    let inp = b4_inputs(spec, curve)?;
    match method {
        OptionMethod::Quadrature => b4_quadrature(&inp, call),
        OptionMethod::Series { k_max } => b4_series(&inp, call, k_max),
    }
}

/// Bessel(4) call `E[π_t (P_{tT} - K)⁺]` at time 0.
pub fn bond_call_b4(spec: &BondOptionSpec, curve: &VolatilityCurve, method: OptionMethod) -> Result<PriceQuote> {
    if spec.kind != OptionKind::Call {
        return Err(Error::invalid(format!("expected a call, got {:?}", spec.kind)));
    }
    b4_price(spec, curve, method, true)
}

/// Bessel(4) put `E[π_t (K - P_{tT})⁺]` at time 0.
pub fn bond_put_b4(spec: &BondOptionSpec, curve: &VolatilityCurve, method: OptionMethod) -> Result<PriceQuote> {
    if spec.kind != OptionKind::Put {
        return Err(Error::invalid(format!("expected a put, got {:?}", spec.kind)));
    }
    b4_price(spec, curve, method, false)
}
