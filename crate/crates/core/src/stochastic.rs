//! Deterministic volatility curves, accumulated variance and exact sampling
//! of the Gaussian driving factors.
//!
//! Every factor is a time-changed Brownian motion `X_t = ∫_0^t σ_s dW_s`, so
//! increments over `[t, T]` are exactly `N(0, Σ_{tT})` with
//! `Σ_{tT} = ∫_t^T σ_s² ds`. Nothing here discretizes an SDE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on σ accepted by [`VolatilityCurve::new`].
pub const DEFAULT_SIGMA_CAP: f64 = 100.0;

/// Piecewise-constant, left-continuous volatility `σ_t`.
///
/// Knot `(t_i, σ_i)` sets `σ = σ_i` on `(t_i, t_{i+1}]`; the first knot sits
/// at `t = 0` (where `σ_0` also applies) and the last value extends to +∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct VolatilityCurve {
    times: Vec<f64>,
    sigmas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<RawCurve> for VolatilityCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        VolatilityCurve::new(raw.knots)
    }
}

impl From<VolatilityCurve> for RawCurve {
    fn from(c: VolatilityCurve) -> Self {
        RawCurve { knots: c.knots() }
    }
}

impl VolatilityCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_cap(knots, DEFAULT_SIGMA_CAP)
    }

    pub fn with_cap(knots: Vec<(f64, f64)>, cap: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("volatility curve needs at least one knot"));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::invalid(format!(
                "first knot must be at t = 0, got {}",
                knots[0].0
            )));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || !w[1].0.is_finite() {
                return Err(Error::invalid("knot times must be finite and strictly increasing"));
            }
        }
        for &(t, s) in &knots {
            if !(s > 0.0) || !s.is_finite() || s > cap {
                return Err(Error::invalid(format!(
                    "sigma at t = {t} must lie in (0, {cap}], got {s}"
                )));
            }
        }
        let (times, sigmas) = knots.into_iter().unzip();
        Ok(Self { times, sigmas })
    }

    /// `σ_t ≡ sigma`.
    pub fn constant(sigma: f64) -> Result<Self> {
        Self::new(vec![(0.0, sigma)])
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.times.iter().copied().zip(self.sigmas.iter().copied()).collect()
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    /// Left-continuous value `σ_t`.
    pub fn sigma_at(&self, t: f64) -> f64 {
        // last knot strictly before t
        let idx = self.times.partition_point(|&k| k < t);
        self.sigmas[idx.saturating_sub(1)]
    }

    /// Right-continuous value: the segment in force on `[t, next knot)`.
    pub fn sigma_right(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&k| k <= t);
        self.sigmas[idx.saturating_sub(1)]
    }

    /// `Σ_{tT} = ∫_t^T σ_s² ds`, summed exactly over the constant segments.
    pub fn accumulated_variance(&self, t: f64, maturity: f64) -> Result<f64> {
        if !t.is_finite() || !maturity.is_finite() || t < 0.0 {
            return Err(Error::domain(format!(
                "accumulated variance needs 0 <= t <= T, got t = {t}, T = {maturity}"
            )));
        }
        if t > maturity {
            return Err(Error::domain(format!(
                "accumulated variance needs t <= T, got t = {t} > T = {maturity}"
            )));
        }
        Ok(self.variance_unchecked(t, maturity))
    }

    pub(crate) fn variance_unchecked(&self, t: f64, maturity: f64) -> f64 {
        if maturity <= t {
            return 0.0;
        }
        let mut idx = self.times.partition_point(|&k| k <= t).saturating_sub(1);
        let mut start = t;
        let mut total = 0.0;
        loop {
            let end = self
                .times
                .get(idx + 1)
                .copied()
                .unwrap_or(f64::INFINITY)
                .min(maturity);
            let s = self.sigmas[idx];
            total += s * s * (end - start);
            if end >= maturity {
                break;
            }
            start = end;
            idx += 1;
        }
        total
    }
}

/// Offsets of the Gaussian drivers from the kernel's centre at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorState {
    pub time: f64,
    pub offsets: Vec<f64>,
}

impl FactorState {
    pub fn new(time: f64, offsets: Vec<f64>) -> Result<Self> {
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::invalid(format!("state time must be finite and >= 0, got {time}")));
        }
        if offsets.len() < 3 {
            return Err(Error::invalid(format!(
                "factor state needs at least 3 components, got {}",
                offsets.len()
            )));
        }
        if offsets.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("factor offsets must be finite"));
        }
        Ok(Self { time, offsets })
    }

    pub fn dimension(&self) -> usize {
        self.offsets.len()
    }

    /// Euclidean norm of the offsets; the natural numeraire for real models.
    pub fn norm(&self) -> f64 {
        self.offsets.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Advance to `time` by adding `sqrt(variance) * normals[k]` to each
    /// component. `normals` must have one entry per component.
    pub fn shifted(&self, time: f64, variance: f64, normals: &[f64]) -> FactorState {
        debug_assert_eq!(normals.len(), self.offsets.len());
        let sd = variance.sqrt();
        FactorState {
            time,
            offsets: self
                .offsets
                .iter()
                .zip(normals)
                .map(|(x, z)| x + sd * z)
                .collect(),
        }
    }
}

/// Seeded random stream. The same `(seed, stream_id)` yields the same
/// sequence on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// Generator handed out by [`RngStream`].
pub type StreamRng = ChaCha20Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// ChaCha20 keyed by `seed`, on ChaCha stream `stream_id`.
    pub fn generator(&self) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for work item `index` (one per Monte Carlo path).
    /// Depends only on `(seed, stream_id, index)`.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0xA5A5_A5A5))),
            stream_id: index,
        }
    }
}

/// Fill `out` with independent standard normals.
pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}

/// Exact draw of the factor offsets at `maturity` given `state`.
pub fn sample_terminal<R: Rng + ?Sized>(
    curve: &VolatilityCurve,
    state: &FactorState,
    maturity: f64,
    rng: &mut R,
) -> Result<FactorState> {
    let variance = curve.accumulated_variance(state.time, maturity)?;
    if variance == 0.0 {
        return Ok(FactorState { time: maturity, ..state.clone() });
    }
    let mut z = vec![0.0; state.dimension()];
    standard_normals(rng, &mut z);
    Ok(state.shifted(maturity, variance, &z))
}

/// Sequential exact sampling over an increasing time grid. The returned
/// states correspond one-to-one with `grid`.
pub fn simulate_grid<R: Rng + ?Sized>(
    curve: &VolatilityCurve,
    initial: &FactorState,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<FactorState>> {
    if let Some(&first) = grid.first() {
        if first < initial.time {
            return Err(Error::domain(format!(
                "grid starts at {first}, before the initial state time {}",
                initial.time
            )));
        }
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("simulation grid must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut current = initial.clone();
    for &t in grid {
        current = sample_terminal(curve, &current, t, rng)?;
        out.push(current.clone());
    }
    Ok(out)
}
