//! Pricing-kernel models.
//!
//! The real models are reciprocal powers of the distance between a
//! `n`-dimensional Gaussian driver and a fixed centre on the unit sphere:
//! `π_t = |ξ_t|^{2-n}` with `ξ_t` the driver's offset from the centre. They
//! are strict local martingales with zero drift, so the short rate vanishes
//! while finite-tenor rates do not.
//!
//! The complex model moves the centre of the three-dimensional kernel off
//! the real axis and keeps the real part of `1/ω_t`, where
//! `ω_t² = (ξ_t - iδ)·(ξ_t - iδ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::FactorState;

/// Offsets closer than this to a real kernel's centre are rejected.
pub const SINGULAR_NORM: f64 = 1e-12;
/// `|ω²|` below this is treated as a hit on the complex model's ring.
pub const SINGULAR_OMEGA_SQ: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-10;

fn check_unit(center: &[f64]) -> Result<()> {
    let n2: f64 = center.iter().map(|c| c * c).sum();
    if center.iter().any(|c| !c.is_finite()) || (n2 - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!(
            "kernel centre must have unit norm, |c|² = {n2}"
        )));
    }
    Ok(())
}

/// Reciprocal Bessel(3) kernel `π_t = 1/|X_t - c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCenter3")]
pub struct Bessel3Params {
    center: [f64; 3],
}

#[derive(Deserialize)]
struct RawCenter3 {
    center: [f64; 3],
}

impl TryFrom<RawCenter3> for Bessel3Params {
    type Error = Error;
    fn try_from(raw: RawCenter3) -> Result<Self> {
        Bessel3Params::new(raw.center)
    }
}

impl Bessel3Params {
    pub fn new(center: [f64; 3]) -> Result<Self> {
        check_unit(&center)?;
        Ok(Self { center })
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }
}

impl Default for Bessel3Params {
    /// Centre `(0, 0, 1)`; any unit vector gives the same prices.
    fn default() -> Self {
        Self { center: [0.0, 0.0, 1.0] }
    }
}

/// Reciprocal squared Bessel(4) kernel `π_t = 1/|X_t - c|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCenter4")]
pub struct Bessel4Params {
    center: [f64; 4],
}

#[derive(Deserialize)]
struct RawCenter4 {
    center: [f64; 4],
}

impl TryFrom<RawCenter4> for Bessel4Params {
    type Error = Error;
    fn try_from(raw: RawCenter4) -> Result<Self> {
        Bessel4Params::new(raw.center)
    }
}

impl Bessel4Params {
    pub fn new(center: [f64; 4]) -> Result<Self> {
        check_unit(&center)?;
        Ok(Self { center })
    }

    pub fn center(&self) -> [f64; 4] {
        self.center
    }
}

impl Default for Bessel4Params {
    fn default() -> Self {
        Self { center: [0.0, 0.0, 0.0, 1.0] }
    }
}

/// `π_t = |X_t - c|^{2-n}` for any order `n >= 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBesselN")]
pub struct BesselNParams {
    order: u32,
    center: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBesselN {
    order: u32,
    #[serde(default)]
    center: Option<Vec<f64>>,
}

impl TryFrom<RawBesselN> for BesselNParams {
    type Error = Error;
    fn try_from(raw: RawBesselN) -> Result<Self> {
        match raw.center {
            Some(c) => BesselNParams::new(raw.order, c),
            None => BesselNParams::canonical(raw.order),
        }
    }
}

impl BesselNParams {
    pub fn new(order: u32, center: Vec<f64>) -> Result<Self> {
        if order < 3 {
            return Err(Error::invalid(format!("Bessel order must be >= 3, got {order}")));
        }
        if center.len() != order as usize {
            return Err(Error::invalid(format!(
                "order {order} needs a {order}-vector centre, got {}",
                center.len()
            )));
        }
        check_unit(&center)?;
        Ok(Self { order, center })
    }

    /// Centre on the last axis.
    pub fn canonical(order: u32) -> Result<Self> {
        let mut c = vec![0.0; order as usize];
        if let Some(last) = c.last_mut() {
            *last = 1.0;
        }
        Self::new(order, c)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

/// Bessel(3) kernel with complex centre `a + i·δ`; the kernel is
/// `Re(1/ω_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComplex")]
pub struct ComplexBessel3Params {
    center_re: [f64; 3],
    center_im: [f64; 3],
}

#[derive(Deserialize)]
struct RawComplex {
    center_re: [f64; 3],
    center_im: [f64; 3],
}

impl TryFrom<RawComplex> for ComplexBessel3Params {
    type Error = Error;
    fn try_from(raw: RawComplex) -> Result<Self> {
        ComplexBessel3Params::new(raw.center_re, raw.center_im)
    }
}

impl ComplexBessel3Params {
    /// Checks `δ != 0` and the normalization `π_0 = Re(1/ω_0) = 1`.
    pub fn new(center_re: [f64; 3], center_im: [f64; 3]) -> Result<Self> {
        if center_re.iter().chain(&center_im).any(|x| !x.is_finite()) {
            return Err(Error::invalid("complex centre must be finite"));
        }
        if center_im.iter().all(|&d| d == 0.0) {
            return Err(Error::invalid(
                "imaginary centre is zero; use the real Bessel(3) model",
            ));
        }
        let p = Self { center_re, center_im };
        let offsets = center_re.iter().map(|a| -a).collect::<Vec<_>>();
        let pi0 = p.reciprocal_omega(&offsets)?.re;
        if (pi0 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!(
                "complex kernel must start at 1, Re(1/ω_0) = {pi0}"
            )));
        }
        Ok(p)
    }

    /// Choose the length of the real centre along `direction` so that
    /// `π_0 = 1` for the given imaginary part.
    pub fn normalized(direction: [f64; 3], center_im: [f64; 3]) -> Result<Self> {
        let dn = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(dn > 0.0) {
            return Err(Error::invalid("direction must be non-zero"));
        }
        let unit = direction.map(|x| x / dn);
        let probe = Self { center_re: unit, center_im };
        // Re(1/ω_0) as a function of the real centre's length
        let pi0 = |rho: f64| -> Option<f64> {
            let offsets: Vec<f64> = unit.iter().map(|u| -rho * u).collect();
            probe.reciprocal_omega(&offsets).ok().map(|w| w.re)
        };
        // Beyond rho² = 2 + δ² the kernel is below 1/|ω| < 1. Walk inwards to
        // the outermost crossing, the branch that tends to rho = 1 as δ -> 0.
        let delta = center_im.iter().map(|x| x * x).sum::<f64>().sqrt();
        let outer = (2.0 + delta * delta).sqrt();
        let mut hi = outer;
        let steps = 4000;
        let mut lo = None;
        for k in 1..steps {
            let rho = outer * (1.0 - k as f64 / steps as f64);
            match pi0(rho) {
                Some(v) if v >= 1.0 => {
                    lo = Some(rho);
                    break;
                }
                _ => hi = rho,
            }
        }
        let mut lo = lo.ok_or_else(|| {
            Error::invalid("no real centre length along this direction gives π_0 = 1")
        })?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match pi0(mid) {
                Some(v) if v >= 1.0 => lo = mid,
                _ => hi = mid,
            }
        }
        let rho = 0.5 * (lo + hi);
        Self::new(unit.map(|u| rho * u), center_im)
    }

    pub fn center_re(&self) -> [f64; 3] {
        self.center_re
    }

    pub fn center_im(&self) -> [f64; 3] {
        self.center_im
    }

    /// `δ = |center_im|`.
    pub fn delta(&self) -> f64 {
        self.center_im.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `ω² = ξ² - δ² - 2i ξ·δ`.
    pub fn omega_squared(&self, offsets: &[f64]) -> Complex64 {
        let xi2: f64 = offsets.iter().map(|x| x * x).sum();
        let d2: f64 = self.center_im.iter().map(|x| x * x).sum();
        let dot: f64 = offsets.iter().zip(&self.center_im).map(|(x, d)| x * d).sum();
        Complex64::new(xi2 - d2, -2.0 * dot)
    }

    /// `1/ω` with `ω` the principal square root of `ω²`.
    pub fn reciprocal_omega(&self, offsets: &[f64]) -> Result<Complex64> {
        let w2 = self.omega_squared(offsets);
        if w2.norm() < SINGULAR_OMEGA_SQ {
            return Err(Error::Singularity(format!(
                "|ω²| = {} is on the ring",
                w2.norm()
            )));
        }
        Ok(principal_sqrt(w2.re, w2.im).inv())
    }
}

/// Principal square root of `a + ib` from the explicit real/imaginary split.
pub fn principal_sqrt(a: f64, b: f64) -> Complex64 {
    if b == 0.0 {
        return if a >= 0.0 {
            Complex64::new(a.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-a).sqrt())
        };
    }
    let r = a.hypot(b);
    // the larger component comes from a sum without cancellation and the
    // other from re·im = b/2
    if a >= 0.0 {
        let re = (0.5 * (a + r)).sqrt();
        Complex64::new(re, b / (2.0 * re))
    } else {
        let im = b.signum() * (0.5 * (r - a)).sqrt();
        Complex64::new(b / (2.0 * im), im)
    }
}

/// Geometric Brownian motion kernel for a sovereign currency:
/// `π_t = π_0 exp(-r t - λ B_t - λ² t / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGbm")]
pub struct SovereignGbmParams {
    pub short_rate: f64,
    pub risk_premium: f64,
    pub initial: f64,
}

#[derive(Deserialize)]
struct RawGbm {
    short_rate: f64,
    risk_premium: f64,
    #[serde(default = "one")]
    initial: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawGbm> for SovereignGbmParams {
    type Error = Error;
    fn try_from(raw: RawGbm) -> Result<Self> {
        SovereignGbmParams::new(raw.short_rate, raw.risk_premium, raw.initial)
    }
}

impl SovereignGbmParams {
    pub fn new(short_rate: f64, risk_premium: f64, initial: f64) -> Result<Self> {
        if !short_rate.is_finite() || !risk_premium.is_finite() || !initial.is_finite() {
            return Err(Error::invalid("sovereign kernel parameters must be finite"));
        }
        if risk_premium < 0.0 {
            return Err(Error::invalid("risk premium must be >= 0"));
        }
        if !(initial > 0.0) {
            return Err(Error::invalid("initial kernel value must be > 0"));
        }
        Ok(Self { short_rate, risk_premium, initial })
    }
}

/// `π_0 exp(-r t - λ B_t - λ² t / 2)`.
pub fn sovereign_kernel_value(params: &SovereignGbmParams, brownian_value: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    let lam = params.risk_premium;
    Ok(params.initial * (-params.short_rate * t - lam * brownian_value - 0.5 * lam * lam * t).exp())
}

/// A pricing-kernel model, tagged by `"model"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum KernelModel {
    Bessel3(Bessel3Params),
    Bessel4(Bessel4Params),
    BesselN(BesselNParams),
    ComplexBessel3(ComplexBessel3Params),
    SovereignGbm(SovereignGbmParams),
}

impl KernelModel {
    pub fn bessel3() -> Self {
        KernelModel::Bessel3(Bessel3Params::default())
    }

    pub fn bessel4() -> Self {
        KernelModel::Bessel4(Bessel4Params::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelModel::Bessel3(_) => "bessel3",
            KernelModel::Bessel4(_) => "bessel4",
            KernelModel::BesselN(_) => "bessel-n",
            KernelModel::ComplexBessel3(_) => "complex-bessel3",
            KernelModel::SovereignGbm(_) => "sovereign-gbm",
        }
    }

    /// Number of Gaussian drivers.
    pub fn dimension(&self) -> usize {
        match self {
            KernelModel::Bessel3(_) | KernelModel::ComplexBessel3(_) => 3,
            KernelModel::Bessel4(_) => 4,
            KernelModel::BesselN(p) => p.order as usize,
            KernelModel::SovereignGbm(_) => 1,
        }
    }

    /// Bessel order of a real radial model (3, 4 or n).
    pub fn real_order(&self) -> Option<u32> {
        match self {
            KernelModel::Bessel3(_) => Some(3),
            KernelModel::Bessel4(_) => Some(4),
            KernelModel::BesselN(p) => Some(p.order),
            _ => None,
        }
    }

    fn center(&self) -> Result<Vec<f64>> {
        match self {
            KernelModel::Bessel3(p) => Ok(p.center.to_vec()),
            KernelModel::Bessel4(p) => Ok(p.center.to_vec()),
            KernelModel::BesselN(p) => Ok(p.center.clone()),
            KernelModel::ComplexBessel3(p) => Ok(p.center_re.to_vec()),
            KernelModel::SovereignGbm(_) => Err(Error::UnsupportedModel(
                "the sovereign kernel is driven by a scalar Brownian motion".into(),
            )),
        }
    }

    /// Driver offsets at `t = 0`: the drivers start at the origin.
    pub fn initial_state(&self) -> Result<FactorState> {
        let offsets = self.center()?.into_iter().map(|c| -c).collect();
        FactorState::new(0.0, offsets)
    }

    /// Offsets of an absolute driver position from the centre.
    pub fn state_at(&self, time: f64, position: &[f64]) -> Result<FactorState> {
        let center = self.center()?;
        if position.len() != center.len() {
            return Err(Error::invalid("position dimension does not match the model"));
        }
        FactorState::new(time, position.iter().zip(&center).map(|(x, c)| x - c).collect())
    }

    fn check_dimension(&self, state: &FactorState) -> Result<()> {
        if state.dimension() != self.dimension() {
            return Err(Error::invalid(format!(
                "{} expects {} factors, state has {}",
                self.name(),
                self.dimension(),
                state.dimension()
            )));
        }
        Ok(())
    }
}

/// Distance from the centre for real models, with the singularity guard.
pub(crate) fn radius(state: &FactorState) -> Result<f64> {
    let r = state.norm();
    if r < SINGULAR_NORM {
        return Err(Error::Singularity(format!("|ξ| = {r} at t = {}", state.time)));
    }
    Ok(r)
}

/// `π_t` for the state.
pub fn kernel_value(model: &KernelModel, state: &FactorState) -> Result<f64> {
    if let KernelModel::SovereignGbm(_) = model {
        return Err(Error::UnsupportedModel(
            "use sovereign_kernel_value for the sovereign kernel".into(),
        ));
    }
    model.check_dimension(state)?;
    match model {
        KernelModel::ComplexBessel3(p) => {
            let v = p.reciprocal_omega(&state.offsets)?.re;
            if !(v > 0.0) {
                // Re(1/ω) vanishes on the flat disk bounded by the ring
                return Err(Error::Singularity(format!(
                    "Re(1/ω) = {v} on the branch disk at t = {}",
                    state.time
                )));
            }
            Ok(v)
        }
        _ => {
            let r = radius(state)?;
            let n = model.real_order().unwrap_or(3) as i32;
            Ok(r.powi(2 - n))
        }
    }
}

/// `ξ_t = |offsets|`, the natural numeraire of the real models.
pub fn natural_numeraire(model: &KernelModel, state: &FactorState) -> Result<f64> {
    match model {
        KernelModel::Bessel3(_) | KernelModel::Bessel4(_) | KernelModel::BesselN(_) => {
            model.check_dimension(state)?;
            radius(state)
        }
        _ => Err(Error::UnsupportedModel(format!(
            "no natural numeraire for {}",
            model.name()
        ))),
    }
}

/// Diffusion coefficient of `dπ_t = -(n-2) σ_t π_t^{(n-1)/(n-2)} dW_t`.
/// The drift is zero.
pub fn sde_diffusion(model: &KernelModel, state: &FactorState, sigma_t: f64) -> Result<f64> {
    let n = match model {
        KernelModel::Bessel3(_) | KernelModel::Bessel4(_) | KernelModel::BesselN(_) => {
            model.real_order().unwrap_or(3) as f64
        }
        _ => {
            return Err(Error::UnsupportedModel(format!(
                "no kernel SDE available for {}",
                model.name()
            )))
        }
    };
    let pi = kernel_value(model, state)?;
    Ok(-(n - 2.0) * sigma_t * pi.powf((n - 1.0) / (n - 2.0)))
}

/// Market price of risk `λ_t`: `σ_t π_t` for Bessel(3), `2σ_t/ξ_t` for
/// Bessel(4).
pub fn market_price_of_risk(model: &KernelModel, state: &FactorState, sigma_t: f64) -> Result<f64> {
    let order = match model {
        KernelModel::ComplexBessel3(_) | KernelModel::SovereignGbm(_) => None,
        _ => model.real_order(),
    };
    match order {
        Some(3) => Ok(sigma_t * kernel_value(model, state)?),
        Some(4) => Ok(2.0 * sigma_t / natural_numeraire(model, state)?),
        _ => Err(Error::UnsupportedModel(format!(
            "market price of risk is only provided for Bessel(3) and Bessel(4), not {}",
            model.name()
        ))),
    }
}
