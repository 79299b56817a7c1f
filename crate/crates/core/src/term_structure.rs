//! Discount bonds, forward rates, yields, bond volatilities and calibration.
//!
//! With `Σ = Σ_{tT}` and `ξ = ξ_t`:
//!
//! | model           | `P_{tT}`                                   |
//! |-----------------|--------------------------------------------|
//! | Bessel(3)       | `erf(ξ/√(2Σ))`                             |
//! | Bessel(4)       | `1 - exp(-ξ²/(2Σ))`                        |
//! | complex Bessel3 | `Re(ω⁻¹ erf(ω/√(2Σ))) / Re(ω⁻¹)`           |
//!
//! Forward rates at a volatility knot use the segment to the right of `T`.

use std::io::Read;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{principal_sqrt, radius, ComplexBessel3Params, KernelModel};
use crate::numerics::erf::{erf_unchecked, erfc_unchecked};
use crate::numerics::{erf_complex, erf_inv};
use crate::stochastic::{FactorState, VolatilityCurve};

/// `Re(ω⁻¹)` below this is too close to the branch disk to divide by.
pub const MIN_RECIPROCAL_OMEGA: f64 = 1e-12;
/// `|Y(0)|` allowed by the Bessel(4) calibration.
pub const ZERO_YIELD_TOL: f64 = 1e-10;
/// Maturity used in place of `T = 0` when a yield is requested there.
pub const ZERO_MATURITY_PROXY: f64 = 1e-8;

/// One observed point `(T, Y(T))` of the initial yield curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldPoint {
    pub maturity: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

impl YieldPoint {
    pub fn new(maturity: f64, yield_: f64) -> Result<Self> {
        let p = Self { maturity, yield_ };
        p.validate()?;
        Ok(p)
    }

    /// Checks `T > 0` and that the implied bond price lies in `(0, 1)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(Error::Input(format!("maturity must be > 0, got {}", self.maturity)));
        }
        if !self.yield_.is_finite() || !(self.yield_ > 0.0) {
            return Err(Error::Calibration {
                maturity: self.maturity,
                reason: format!("yield {} implies a bond price outside (0, 1)", self.yield_),
            });
        }
        Ok(())
    }

    pub fn bond_price(&self) -> f64 {
        (-self.maturity * self.yield_).exp()
    }
}

/// `ω_t² = ξ² - δ² - 2i ξ·δ` for the complex model; `ω_t` is its principal
/// square root, so `Re(ω_t) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaState {
    pub omega_sq: Complex64,
}

impl OmegaState {
    pub fn new(params: &ComplexBessel3Params, state: &FactorState) -> Self {
        Self { omega_sq: params.omega_squared(&state.offsets) }
    }

    pub fn omega(&self) -> Complex64 {
        principal_sqrt(self.omega_sq.re, self.omega_sq.im)
    }
}

#[derive(Debug, Clone, Copy)]
enum Family {
    B3,
    B4,
    Complex,
}

fn family(model: &KernelModel) -> Result<Family> {
    match model {
        KernelModel::Bessel3(_) => Ok(Family::B3),
        KernelModel::Bessel4(_) => Ok(Family::B4),
        KernelModel::BesselN(p) if p.order() == 3 => Ok(Family::B3),
        KernelModel::BesselN(p) if p.order() == 4 => Ok(Family::B4),
        KernelModel::BesselN(p) => Err(Error::UnsupportedModel(format!(
            "no closed-form bond price for Bessel order {}; use the Monte Carlo oracle",
            p.order()
        ))),
        KernelModel::ComplexBessel3(_) => Ok(Family::Complex),
        KernelModel::SovereignGbm(_) => Err(Error::UnsupportedModel(
            "sovereign kernel has no factor-state bond formula".into(),
        )),
    }
}

fn check_state(model: &KernelModel, state: &FactorState) -> Result<()> {
    if state.dimension() != model.dimension() {
        return Err(Error::invalid(format!(
            "{} expects {} factors, state has {}",
            model.name(),
            model.dimension(),
            state.dimension()
        )));
    }
    Ok(())
}

fn complex_parts(model: &KernelModel, state: &FactorState) -> Result<(Complex64, f64)> {
    let KernelModel::ComplexBessel3(p) = model else {
        unreachable!("complex family implies complex params")
    };
    let inv = p.reciprocal_omega(&state.offsets)?;
    if !(inv.re > MIN_RECIPROCAL_OMEGA) {
        return Err(Error::Singularity(format!(
            "Re(1/ω) = {} is not safely positive at t = {}",
            inv.re, state.time
        )));
    }
    Ok((inv.inv(), inv.re))
}

/// `(log P, P)` evaluated so that `log P` keeps full precision when `P` is
/// close to 1.
fn bond_and_log(model: &KernelModel, state: &FactorState, sigma2: f64) -> Result<(f64, f64)> {
    check_state(model, state)?;
    match family(model)? {
        Family::B3 => {
            let xi = radius(state)?;
            if sigma2 == 0.0 {
                return Ok((0.0, 1.0));
            }
            let x = xi / (2.0 * sigma2).sqrt();
            let c = erfc_unchecked(x);
            let p = erf_unchecked(x);
            let log_p = if c < 0.5 { (-c).ln_1p() } else { p.ln() };
            Ok((log_p, p))
        }
        Family::B4 => {
            let xi = radius(state)?;
            if sigma2 == 0.0 {
                return Ok((0.0, 1.0));
            }
            let a = xi * xi / (2.0 * sigma2);
            let p = -(-a).exp_m1();
            let log_p = (-(-a).exp()).ln_1p();
            Ok((log_p, p))
        }
        Family::Complex => {
            let (omega, re_inv) = complex_parts(model, state)?;
            if sigma2 == 0.0 {
                return Ok((0.0, 1.0));
            }
            let e = erf_complex(omega / (2.0 * sigma2).sqrt())?;
            let p = (e / omega).re / re_inv;
            if !(p > 0.0) {
                return Err(Error::Numerical(format!("complex bond price {p} is not positive")));
            }
            Ok((p.ln(), p))
        }
    }
}

fn check_maturity(state: &FactorState, maturity: f64) -> Result<()> {
    if !maturity.is_finite() || maturity < state.time {
        return Err(Error::domain(format!(
            "maturity {maturity} precedes the state time {}",
            state.time
        )));
    }
    Ok(())
}

/// Price at `state.time` of one unit paid at `maturity`. Equals 1 at
/// `maturity == state.time`.
pub fn bond_price(
    model: &KernelModel,
    state: &FactorState,
    curve: &VolatilityCurve,
    maturity: f64,
) -> Result<f64> {
    check_maturity(state, maturity)?;
    let sigma2 = curve.variance_unchecked(state.time, maturity);
    Ok(bond_and_log(model, state, sigma2)?.1)
}

/// `log P_{tT}`, accurate when the bond price is close to 1.
pub fn log_bond_price(
    model: &KernelModel,
    state: &FactorState,
    curve: &VolatilityCurve,
    maturity: f64,
) -> Result<f64> {
    check_maturity(state, maturity)?;
    let sigma2 = curve.variance_unchecked(state.time, maturity);
    Ok(bond_and_log(model, state, sigma2)?.0)
}

/// `-∂ log P / ∂Σ`; the forward rate is this times `σ_T²`.
fn forward_per_variance(model: &KernelModel, state: &FactorState, sigma2: f64) -> Result<f64> {
    let (_, p) = bond_and_log(model, state, sigma2)?;
    match family(model)? {
        Family::B3 => {
            let xi = radius(state)?;
            let a = xi * xi / (2.0 * sigma2);
            Ok(xi * (-a).exp() / ((2.0 * PI).sqrt() * sigma2.powf(1.5) * p))
        }
        Family::B4 => {
            let xi = radius(state)?;
            let a = xi * xi / (2.0 * sigma2);
            Ok(xi * xi * (-a).exp() / (2.0 * sigma2 * sigma2 * p))
        }
        Family::Complex => {
            let (omega, re_inv) = complex_parts(model, state)?;
            let g = (-(omega * omega) / (2.0 * sigma2)).exp();
            Ok(g.re / ((2.0 * PI).sqrt() * sigma2.powf(1.5) * re_inv * p))
        }
    }
}

/// Instantaneous forward rate `f_{tT} = -∂_T log P_{tT}` for `T > t`.
pub fn forward_rate(
    model: &KernelModel,
    state: &FactorState,
    curve: &VolatilityCurve,
    maturity: f64,
) -> Result<f64> {
    if !(maturity > state.time) || !maturity.is_finite() {
        return Err(Error::domain(format!(
            "forward rate needs T > t, got T = {maturity}, t = {}",
            state.time
        )));
    }
    let sigma2 = curve.variance_unchecked(state.time, maturity);
    let s = curve.sigma_right(maturity);
    Ok(s * s * forward_per_variance(model, state, sigma2)?)
}

/// The instantaneous short rate, `lim_{T→t} f_{tT}`. It is zero for every
/// kernel here; the state is still validated against the model.
pub fn short_rate(model: &KernelModel, state: &FactorState) -> Result<f64> {
    check_state(model, state)?;
    match model {
        KernelModel::SovereignGbm(p) => Ok(p.short_rate),
        KernelModel::ComplexBessel3(_) => {
            complex_parts(model, state)?;
            Ok(0.0)
        }
        _ => {
            radius(state)?;
            Ok(0.0)
        }
    }
}

/// Natural log of the leading behaviour of `f_{t,t+τ}` for constant `σ` and
/// numeraire `ξ` as `τ → 0`:
///
/// * Bessel(3): `σ²/(√(2π) Σ^{3/2}) · exp(-ξ²/2Σ)`
/// * Bessel(4): `σ² ξ²/(2Σ²) · exp(-ξ²/2Σ)`
///
/// with `Σ = σ²τ`. Working in logs keeps the values distinct long after
/// they underflow.
pub fn short_rate_prelimit_log(order: u32, xi: f64, sigma: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !(sigma > 0.0) || !(xi > 0.0) {
        return Err(Error::domain("pre-limit short rate needs τ, σ, ξ > 0"));
    }
    let s2 = sigma * sigma * tau;
    let exponent = -xi * xi / (2.0 * s2);
    match order {
        3 => Ok(2.0 * sigma.ln() - 0.5 * (2.0 * PI).ln() - 1.5 * s2.ln() + exponent),
        4 => Ok(2.0 * sigma.ln() + 2.0 * xi.ln() - (2.0 * s2 * s2).ln() + exponent),
        _ => Err(Error::UnsupportedModel(format!(
            "pre-limit short rate is given for orders 3 and 4, not {order}"
        ))),
    }
}

/// Pre-limit short-rate expression itself (may underflow to 0).
pub fn short_rate_prelimit(order: u32, xi: f64, sigma: f64, tau: f64) -> Result<f64> {
    Ok(short_rate_prelimit_log(order, xi, sigma, tau)?.exp())
}

/// Initial yield `Y(T) = -log P_{0T} / T` from the model's starting state.
pub fn yield_curve(model: &KernelModel, curve: &VolatilityCurve, maturity: f64) -> Result<f64> {
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(Error::domain(format!("yield needs T > 0, got {maturity}")));
    }
    let state = model.initial_state()?;
    Ok(-log_bond_price(model, &state, curve, maturity)? / maturity)
}

/// Relative volatility `Ω_{tT}` of the bond in `dP = ... + Ω P dW`.
/// Uses the volatility in force just after `t`.
pub fn bond_volatility(
    model: &KernelModel,
    state: &FactorState,
    curve: &VolatilityCurve,
    maturity: f64,
) -> Result<f64> {
    if !(maturity > state.time) || !maturity.is_finite() {
        return Err(Error::domain(format!(
            "bond volatility needs T > t, got T = {maturity}, t = {}",
            state.time
        )));
    }
    let sigma2 = curve.variance_unchecked(state.time, maturity);
    let s = curve.sigma_right(state.time);
    let (_, p) = bond_and_log(model, state, sigma2)?;
    let xi = match family(model)? {
        Family::Complex => {
            return Err(Error::UnsupportedModel(
                "bond dynamics of the complex model are not available".into(),
            ))
        }
        _ => radius(state)?,
    };
    let g = (-xi * xi / (2.0 * sigma2)).exp();
    match family(model)? {
        Family::B3 => Ok(2.0 * s * g / (p * (2.0 * PI * sigma2).sqrt())),
        _ => Ok(s * xi * g / (p * sigma2)),
    }
}

/// Bessel(3) calibration: each yield fixes `Σ*_{0T} = 1/(2 erf⁻¹(e^{-TY})²)`
/// and `Σ` is interpolated linearly between maturities, so `σ` is constant
/// on each `(T_{i-1}, T_i]`. The last segment's value extends beyond the
/// final maturity.
pub fn calibrate_bessel3(points: &[YieldPoint]) -> Result<VolatilityCurve> {
    if points.is_empty() {
        return Err(Error::Input("calibration needs at least one yield point".into()));
    }
    let mut knots = Vec::with_capacity(points.len());
    let (mut prev_t, mut prev_s) = (0.0, 0.0);
    for pt in points {
        pt.validate()?;
        if !(pt.maturity > prev_t) {
            return Err(Error::Input(format!(
                "maturities must be strictly increasing, {} follows {prev_t}",
                pt.maturity
            )));
        }
        let x = erf_inv(pt.bond_price()).map_err(|_| Error::Calibration {
            maturity: pt.maturity,
            reason: "bond price outside (0, 1)".into(),
        })?;
        let big_sigma = 1.0 / (2.0 * x * x);
        if !(big_sigma > prev_s) {
            return Err(Error::Calibration {
                maturity: pt.maturity,
                reason: format!(
                    "implied accumulated variance {big_sigma} does not exceed {prev_s}"
                ),
            });
        }
        let sigma = ((big_sigma - prev_s) / (pt.maturity - prev_t)).sqrt();
        knots.push((prev_t, sigma));
        prev_t = pt.maturity;
        prev_s = big_sigma;
    }
    VolatilityCurve::new(knots).map_err(|e| Error::Calibration {
        maturity: prev_t,
        reason: e.to_string(),
    })
}

/// Yield, its maturity derivative, and the maturity: the input to the
/// Bessel(4) calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldSample {
    pub maturity: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
    pub slope: f64,
}

/// Variance rate `σ_T²` recovered at one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRate {
    pub maturity: f64,
    pub sigma_sq: f64,
}

/// Bessel(4) calibration. Since `Σ_{0T} = -1/(2 log(1 - e^{-TY}))`,
///
/// `σ_T² = (Y + T Y') e^{-TY} / (2 (1 - e^{-TY}) log²(1 - e^{-TY}))`.
///
/// A sample at `T = 0` only checks `Y(0) = 0` and produces no rate.
pub fn calibrate_bessel4(samples: &[YieldSample]) -> Result<Vec<VarianceRate>> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        if !s.maturity.is_finite() || s.maturity < 0.0 || !s.yield_.is_finite() || !s.slope.is_finite() {
            return Err(Error::Input(format!("bad yield sample {s:?}")));
        }
        if s.maturity == 0.0 {
            if s.yield_.abs() > ZERO_YIELD_TOL {
                return Err(Error::Constraint(format!(
                    "Y(0) must vanish, got {}",
                    s.yield_
                )));
            }
            continue;
        }
        let ty = s.maturity * s.yield_;
        let one_minus_p = -(-ty).exp_m1();
        if !(one_minus_p > 0.0) || !(one_minus_p < 1.0) {
            return Err(Error::Calibration {
                maturity: s.maturity,
                reason: format!("yield {} implies a bond price outside (0, 1)", s.yield_),
            });
        }
        let log_q = one_minus_p.ln();
        let forward = s.yield_ + s.maturity * s.slope;
        let sigma_sq = forward * (-ty).exp() / (2.0 * one_minus_p * log_q * log_q);
        if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
            return Err(Error::Calibration {
                maturity: s.maturity,
                reason: format!("implied variance rate {sigma_sq} is not positive"),
            });
        }
        out.push(VarianceRate { maturity: s.maturity, sigma_sq });
    }
    Ok(out)
}

/// Piecewise-constant curve taking `σ(T_i)` on `(T_{i-1}, T_i]`.
pub fn curve_from_rates(rates: &[VarianceRate]) -> Result<VolatilityCurve> {
    let mut knots = Vec::with_capacity(rates.len());
    let mut prev = 0.0;
    for r in rates {
        knots.push((prev, r.sigma_sq.sqrt()));
        prev = r.maturity;
    }
    VolatilityCurve::new(knots)
}

/// Reads `maturity,yield` CSV rows.
pub fn read_yield_points<R: Read>(reader: R) -> Result<Vec<YieldPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Input(e.to_string()))?.clone();
    if headers.get(0) != Some("maturity") || headers.get(1) != Some("yield") {
        return Err(Error::Input(format!(
            "expected header `maturity,yield`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::Input(e.to_string())))
        .collect()
}
