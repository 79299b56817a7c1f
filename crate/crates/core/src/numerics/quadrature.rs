//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite and
//! semi-infinite intervals.
//!
//! Each panel is integrated with the 15-point Kronrod rule; the embedded
//! 7-point Gauss rule gives the panel error estimate (scaled as in QUADPACK's
//! `qk15`). The panel with the largest error is bisected until the summed
//! error meets `max(abs_tol, rel_tol·|value|)`.
//!
//! `[a, ∞)` is mapped onto `[0, 1)` by `x = a + t/(1-t)`, so
//! `∫_a^∞ f(x) dx = ∫_0^1 f(a + t/(1-t)) / (1-t)² dt`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Domain {
    /// `[lower, upper]`
    Finite { lower: f64, upper: f64 },
    /// `[lower, ∞)`
    SemiInfinite { lower: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub domain: Domain,
}

impl QuadratureSpec {
    /// Default tolerances on `[lower, upper]`.
    pub fn finite(lower: f64, upper: f64) -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
            domain: Domain::Finite { lower, upper },
        }
    }

    /// Default tolerances on `[lower, ∞)`.
    pub fn semi_infinite(lower: f64) -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
            domain: Domain::SemiInfinite { lower },
        }
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions must be at least 1"));
        }
        match self.domain {
            Domain::Finite { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() || lower > upper {
                    return Err(Error::invalid(format!(
                        "bad finite domain [{lower}, {upper}]"
                    )));
                }
            }
            Domain::SemiInfinite { lower } => {
                if !lower.is_finite() {
                    return Err(Error::invalid("semi-infinite domain needs a finite lower limit"));
                }
            }
        }
        Ok(())
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub err_est: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, err }
}

/// Integrate `f` over `spec.domain`.
///
/// On failure to reach the tolerance within `max_subdivisions` panels the
/// error carries the best estimate found.
pub fn integrate<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Quadrature> {
    spec.validate()?;
    match spec.domain {
        Domain::Finite { lower, upper } => {
            if lower == upper {
                return Ok(Quadrature { value: 0.0, err_est: 0.0 });
            }
            adaptive(&f, lower, upper, spec)
        }
        Domain::SemiInfinite { lower } => {
            let mapped = |t: f64| {
                let one_minus = 1.0 - t;
                let x = lower + t / one_minus;
                if !x.is_finite() {
                    return 0.0;
                }
                f(x) / (one_minus * one_minus)
            };
            adaptive(&mapped, 0.0, 1.0, spec)
        }
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quadrature> {
    let first = kronrod15(f, a, b);
    let mut total = first.value;
    let mut total_err = first.err;
    if !total.is_finite() || !total_err.is_finite() {
        return Err(Error::Numerical("integrand is not finite on the domain".into()));
    }
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut panels = 1;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(Quadrature { value: total, err_est: total_err });
        }
        if panels >= spec.max_subdivisions {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let left = kronrod15(f, worst.a, mid);
        let right = kronrod15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Numerical("integrand is not finite on the domain".into()));
        }
        heap.push(left);
        heap.push(right);
        panels += 1;
    }
    // resum to shed the drift of the running totals
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let err_est: f64 = heap.iter().map(|p| p.err).sum();
    if err_est <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
        return Ok(Quadrature { value, err_est });
    }
    Err(Error::Convergence { best: value, err_est })
}
