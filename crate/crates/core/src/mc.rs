//! Monte Carlo oracle: prices as `(1/π_0) E[π_t H_t]` from exact terminal
//! samples, and statistical tests of the (super)martingale properties.
//!
//! Path `i` always draws from `stream.substream(i)`, results are collected in
//! path order and summed pairwise, so an estimate is bit-identical for any
//! number of worker threads.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_value, KernelModel};
use crate::numerics::pairwise_sum;
use crate::quote::{Method, PriceQuote};
use crate::stochastic::{standard_normals, FactorState, RngStream, StreamRng, VolatilityCurve};
use crate::term_structure::bond_price;

/// Default sample count for oracle checks.
pub const DEFAULT_SAMPLES: u64 = 100_000;
/// Pass threshold for the statistical tests, in standard errors.
pub const Z_THRESHOLD: f64 = 3.0;
/// More rejected singular draws than this fails the estimate.
pub const MAX_REJECTED: u64 = 10;
/// Redraws allowed for one path before it is abandoned as degenerate.
const MAX_REDRAWS: u32 = 64;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub rejected_singular: u64,
}

impl McEstimate {
    /// `(mean - target) / std_err`; zero when both the error and the
    /// difference vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }

    /// Mean and target agree within [`Z_THRESHOLD`] standard errors.
    pub fn agrees_with(&self, target: f64) -> bool {
        (self.mean - target).abs() <= Z_THRESHOLD * self.std_err + 1e-14 * target.abs().max(1.0)
    }
}

impl From<McEstimate> for PriceQuote {
    fn from(e: McEstimate) -> Self {
        PriceQuote { value: e.mean, method: Method::MonteCarlo, err_est: e.std_err }
    }
}

/// Sampling controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_samples: u64,
    /// Average each draw `z` with its mirror `-z`.
    pub antithetic: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { n_samples: DEFAULT_SAMPLES, antithetic: false }
    }
}

impl McOptions {
    pub fn new(n_samples: u64) -> Self {
        Self { n_samples, antithetic: false }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }
}

/// Outcome of one evaluation of the sampled quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Draw {
    Value(f64),
    /// The draw hit a kernel singularity; it is redrawn and counted.
    Singular,
}

/// Mean and standard error of `f(z)` over `n_samples` vectors `z` of
/// `dim` independent standard normals.
///
/// A singular draw is replaced by a fresh draw from the same path stream.
/// The estimate fails if more than [`MAX_REJECTED`] draws are rejected.
pub fn estimate<F>(options: &McOptions, stream: &RngStream, dim: usize, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<Draw> + Sync,
{
    if options.n_samples == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    let results: Vec<Result<(f64, u64)>> = (0..options.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i).generator();
            one_path(&f, &mut rng, dim, options.antithetic)
        })
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut rejected = 0u64;
    for r in results {
        let (v, rej) = r?;
        values.push(v);
        rejected += rej;
    }
    if rejected > 0 {
        warn!("{rejected} Monte Carlo draws hit a kernel singularity and were redrawn");
    }
    if rejected > MAX_REJECTED {
        return Err(Error::Degenerate(format!(
            "{rejected} singular draws exceed the limit of {MAX_REJECTED}"
        )));
    }
    Ok(summarize(&values, rejected))
}

fn one_path<F>(f: &F, rng: &mut StreamRng, dim: usize, antithetic: bool) -> Result<(f64, u64)>
where
    F: Fn(&[f64]) -> Result<Draw>,
{
    let mut z = vec![0.0; dim];
    let mut rejected = 0;
    for _ in 0..MAX_REDRAWS {
        standard_normals(rng, &mut z);
        let a = f(&z)?;
        let value = if antithetic {
            let mirror: Vec<f64> = z.iter().map(|x| -x).collect();
            match (a, f(&mirror)?) {
                (Draw::Value(x), Draw::Value(y)) => Some(0.5 * (x + y)),
                _ => None,
            }
        } else {
            match a {
                Draw::Value(x) => Some(x),
                Draw::Singular => None,
            }
        };
        match value {
            Some(v) if v.is_finite() => return Ok((v, rejected)),
            Some(v) => return Err(Error::Numerical(format!("non-finite sample value {v}"))),
            None => rejected += 1,
        }
    }
    Err(Error::Degenerate("every draw for a path was singular".into()))
}

fn summarize(values: &[f64], rejected: u64) -> McEstimate {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let std_err = if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate { mean, std_err, n_samples: n as u64, rejected_singular: rejected }
}

fn kernel_draw(model: &KernelModel, state: &FactorState) -> Result<Option<f64>> {
    match kernel_value(model, state) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Singularity(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `(1/π_0) E[π_t H(X_t)]` by exact sampling of the factors at `t`.
pub fn price_claim<P>(
    model: &KernelModel,
    curve: &VolatilityCurve,
    payoff: P,
    t: f64,
    options: &McOptions,
    stream: &RngStream,
) -> Result<McEstimate>
where
    P: Fn(&FactorState) -> f64 + Sync,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("claim time must be > 0, got {t}")));
    }
    let initial = model.initial_state()?;
    let pi0 = kernel_value(model, &initial)?;
    let variance = curve.accumulated_variance(0.0, t)?;
    estimate(options, stream, model.dimension(), |z| {
        let state = initial.shifted(t, variance, z);
        Ok(match kernel_draw(model, &state)? {
            Some(pi) => Draw::Value(pi * payoff(&state) / pi0),
            None => Draw::Singular,
        })
    })
}

/// JSON report of a statistical check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub statistic: f64,
    pub target: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Bond pricing function used inside [`martingale_test_with`].
pub type BondFormula<'a> =
    &'a (dyn Fn(&KernelModel, &FactorState, &VolatilityCurve, f64) -> Result<f64> + Sync);

/// Tower property `E[π_t P_{tT}] = π_0 P_{0T}` with the closed-form bond at
/// the sampled inner state.
pub fn martingale_test(
    model: &KernelModel,
    curve: &VolatilityCurve,
    t_outer: f64,
    t_inner: f64,
    options: &McOptions,
    stream: &RngStream,
) -> Result<OracleReport> {
    martingale_test_with(model, curve, t_outer, t_inner, options, stream, &bond_price)
}

/// [`martingale_test`] with the bond formula supplied by the caller.
pub fn martingale_test_with(
    model: &KernelModel,
    curve: &VolatilityCurve,
    t_outer: f64,
    t_inner: f64,
    options: &McOptions,
    stream: &RngStream,
    bond: BondFormula<'_>,
) -> Result<OracleReport> {
    if !(t_inner >= 0.0) || !(t_outer > t_inner) {
        return Err(Error::domain(format!(
            "martingale test needs 0 <= t < T, got t = {t_inner}, T = {t_outer}"
        )));
    }
    let initial = model.initial_state()?;
    let target = bond_price(model, &initial, curve, t_outer)?;
    let est = if t_inner == 0.0 {
        let v = bond(model, &initial, curve, t_outer)?;
        McEstimate { mean: v, std_err: 0.0, n_samples: 1, rejected_singular: 0 }
    } else {
        let pi0 = kernel_value(model, &initial)?;
        let variance = curve.accumulated_variance(0.0, t_inner)?;
        estimate(options, stream, model.dimension(), |z| {
            let state = initial.shifted(t_inner, variance, z);
            Ok(match kernel_draw(model, &state)? {
                Some(pi) => Draw::Value(pi * bond(model, &state, curve, t_outer)? / pi0),
                None => Draw::Singular,
            })
        })?
    };
    Ok(OracleReport {
        statistic: est.mean,
        target,
        std_err: est.std_err,
        pass: est.agrees_with(target),
    })
}

/// Supermartingale gap of the kernel at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictnessReport {
    pub statistic: f64,
    pub target: f64,
    pub std_err: f64,
    /// `1 - E[π_t]/π_0` from the closed form.
    pub gap: f64,
    pub pass: bool,
}

/// `E[π_t]/π_0` must match `P_{0t}` within 3 SE and sit below 1 by more
/// than 3 SE.
pub fn strictness_test(
    model: &KernelModel,
    curve: &VolatilityCurve,
    t: f64,
    options: &McOptions,
    stream: &RngStream,
) -> Result<StrictnessReport> {
    let initial = model.initial_state()?;
    let target = bond_price(model, &initial, curve, t)?;
    let est = price_claim(model, curve, |_| 1.0, t, options, stream)?;
    let below = 1.0 - est.mean > Z_THRESHOLD * est.std_err;
    Ok(StrictnessReport {
        statistic: est.mean,
        target,
        std_err: est.std_err,
        gap: 1.0 - target,
        pass: below && est.agrees_with(target),
    })
}
