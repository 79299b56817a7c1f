//! Error function family: real `erf`/`erfc`, the inverse error function, the
//! normal distribution function, and `erf` extended to complex arguments.

use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// 2/√π
pub(crate) const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
/// 1/√π
const ONE_OVER_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Below this magnitude erf is summed as a power series; above it erfc comes
/// from the continued fraction.
const SERIES_CUTOFF: f64 = 2.0;

const CF_MAX_ITER: usize = 5_000;
const TINY: f64 = 1e-300;

/// `e^{-x^2} * sum 2^n x^{2n+1} / (2n+1)!!` for |x| <= 2. Every term is
/// positive so nothing cancels.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
    }
    TWO_OVER_SQRT_PI * (-x2).exp() * sum
}

/// erfc(x) for x > 0 by modified Lentz evaluation of
/// `erfc x = e^{-x^2}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_cf(x: f64) -> f64 {
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..CF_MAX_ITER {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    ONE_OVER_SQRT_PI * (-x * x).exp() / f
}

/// The error function `(2/√π) ∫_0^x e^{-u²} du`.
pub fn erf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("erf of non-finite {x}")));
    }
    Ok(erf_unchecked(x))
}

pub(crate) fn erf_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_CUTOFF {
        erf_series(ax)
    } else {
        1.0 - erfc_cf(ax)
    };
    v.copysign(x)
}

/// The complementary error function `1 - erf(x)`, accurate in the upper tail.
pub fn erfc(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("erfc of non-finite {x}")));
    }
    Ok(erfc_unchecked(x))
}

pub(crate) fn erfc_unchecked(x: f64) -> f64 {
    if x.abs() <= SERIES_CUTOFF {
        1.0 - erf_series(x.abs()).copysign(x)
    } else if x > 0.0 {
        erfc_cf(x)
    } else {
        2.0 - erfc_cf(-x)
    }
}

/// Inverse of [`erf`] on (-1, 1).
///
/// A rational approximation seeds Halley iterations on `erf(x) - p`; near
/// |p| = 1 the residual is taken from `erfc` so it keeps full precision.
pub fn erf_inv(p: f64) -> Result<f64> {
    if !p.is_finite() || p.abs() >= 1.0 {
        return Err(Error::domain(format!("erf_inv needs |p| < 1, got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let ap = p.abs();
    let q = 1.0 - ap;
    let mut x = initial_guess(ap);
    for _ in 0..60 {
        let resid = if ap > 0.5 {
            q - erfc_unchecked(x)
        } else {
            erf_unchecked(x) - ap
        };
        if resid == 0.0 {
            break;
        }
        let deriv = TWO_OVER_SQRT_PI * (-x * x).exp();
        if deriv == 0.0 {
            break;
        }
        let newton = resid / deriv;
        let step = newton / (1.0 + x * newton);
        x -= step;
        if step.abs() <= 1e-17 * x.abs() {
            break;
        }
    }
    Ok(x.copysign(p))
}

// Giles' single-precision approximation, good to ~1e-7 everywhere.
fn initial_guess(p: f64) -> f64 {
    let mut w = -((1.0 - p) * (1.0 + p)).ln();
    if w < 5.0 {
        w -= 2.5;
        let mut r = 2.810_226_36e-08;
        r = 3.432_739_39e-07 + r * w;
        r = -3.523_387_7e-06 + r * w;
        r = -4.391_506_54e-06 + r * w;
        r = 0.000_218_580_87 + r * w;
        r = -0.001_253_725_03 + r * w;
        r = -0.004_177_681_64 + r * w;
        r = 0.246_640_727 + r * w;
        r = 1.501_409_41 + r * w;
        r * p
    } else {
        w = w.sqrt() - 3.0;
        let mut r = -0.000_200_214_257;
        r = 0.000_100_950_558 + r * w;
        r = 0.001_349_343_22 + r * w;
        r = -0.003_673_428_44 + r * w;
        r = 0.005_739_507_73 + r * w;
        r = -0.007_622_461_3 + r * w;
        r = 0.009_438_870_47 + r * w;
        r = 1.001_674_06 + r * w;
        r = 2.832_976_82 + r * w;
        r * p
    }
}

/// Standard normal distribution function, `½(1 + erf(x/√2))`.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc_unchecked(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// erf extended to the complex plane.
///
/// For |z| <= 3 one of two power series is summed, chosen so that the
/// magnitude of the terms does not dwarf the result: the plain Maclaurin
/// series when the imaginary part dominates and the `e^{-z²}`-weighted
/// series when the real part dominates. Further out the Laplace continued
/// fraction for erfc is used in the right half-plane and oddness elsewhere.
pub fn erf_complex(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain(format!("erf of non-finite {z}")));
    }
    let r = z.norm();
    if r == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let v = if r <= 3.0 {
        if z.re.abs() >= z.im.abs() {
            complex_weighted_series(z)
        } else {
            complex_maclaurin(z)
        }
    } else if z.re.abs() < 1.0 && r <= 6.0 {
        complex_maclaurin(z)
    } else if z.re > 0.0 {
        Complex64::new(1.0, 0.0) - complex_erfc_cf(z)
    } else {
        complex_erfc_cf(-z) - Complex64::new(1.0, 0.0)
    };
    Ok(v)
}

fn complex_maclaurin(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut power = z;
    let mut sum = z;
    let mut n = 0.0;
    loop {
        n += 1.0;
        power *= -z2 / n;
        let term = power / (2.0 * n + 1.0);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() || n > 400.0 {
            break;
        }
    }
    sum * TWO_OVER_SQRT_PI
}

fn complex_weighted_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= z2 * 2.0 / (2.0 * n + 1.0);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() || n > 400.0 {
            break;
        }
    }
    (-z2).exp() * sum * TWO_OVER_SQRT_PI
}

/// erfc(z) for Re z > 0, same continued fraction as the real case.
fn complex_erfc_cf(z: Complex64) -> Complex64 {
    let tiny = Complex64::new(TINY, 0.0);
    let mut f = z;
    let mut c = z;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..CF_MAX_ITER {
        let a = k as f64 * 0.5;
        d = z + d * a;
        if d.norm() < TINY {
            d = tiny;
        }
        c = z + a / c;
        if c.norm() < TINY {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-z * z).exp() / f * ONE_OVER_SQRT_PI
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The alternating Maclaurin series, summed independently of the
    /// production path.
    fn maclaurin_oracle(x: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for n in 0..=terms {
            if n > 0 {
                fact *= n as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * x.powi(2 * n as i32 + 1) / (fact * (2 * n + 1) as f64);
        }
        TWO_OVER_SQRT_PI * sum
    }

    #[test]
    fn erf_at_zero_and_infinity() {
        assert_eq!(erf(0.0).unwrap(), 0.0);
        assert_eq!(erf(40.0).unwrap(), 1.0);
        assert_eq!(erf(-40.0).unwrap(), -1.0);
        assert!(erf(f64::INFINITY).is_err());
        assert!(erf(f64::NAN).is_err());
    }

    #[test]
    fn erf_one_matches_truncated_maclaurin() {
        let oracle = maclaurin_oracle(1.0, 30);
        assert!((oracle - 0.842_700_792_9).abs() < 1e-10);
        assert!((erf(1.0).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn erf_matches_oracle_on_series_range() {
        for i in 0..=40 {
            let x = -2.0 + 0.1 * i as f64;
            let o = maclaurin_oracle(x, 60);
            let v = erf(x).unwrap();
            assert!((v - o).abs() <= 2e-15 * o.abs().max(1e-300), "x={x} {v} {o}");
        }
    }

    #[test]
    fn erf_is_continuous_at_cutoff() {
        let below = erf(SERIES_CUTOFF).unwrap();
        let above = erf(SERIES_CUTOFF + 1e-12).unwrap();
        assert!((above - below).abs() < 1e-13);
        let cf_at_cutoff = 1.0 - erfc_cf(SERIES_CUTOFF);
        assert!((cf_at_cutoff - below).abs() < 4e-16, "{}", cf_at_cutoff - below);
        assert!((below - 0.995_322_265_018_952_7).abs() < 2.3e-16);
    }

    #[test]
    fn erfc_tail_values() {
        // reference values from a 50-digit evaluation
        let cases = [
            (3.0, 2.209_049_699_858_544e-5),
            (5.0, 1.537_459_794_428_035e-12),
            (10.0, 2.088_487_583_762_545e-45),
            (0.5, 0.479_500_122_186_953_5),
            (-1.0, 1.842_700_792_949_715),
        ];
        for (x, want) in cases {
            let got = erfc(x).unwrap();
            assert!(((got - want) / want).abs() < 1e-14, "x={x} got {got} want {want}");
        }
    }

    #[test]
    fn erf_inv_roundtrips() {
        assert_eq!(erf_inv(0.0).unwrap(), 0.0);
        let x = erf_inv(erf(0.5).unwrap()).unwrap();
        assert!((x - 0.5).abs() < 1e-15);
        let one = erf_inv(0.842_700_792_9).unwrap();
        assert!((one - 1.0).abs() < 1e-9);
        for &p in &[1e-12, 1e-3, 0.1, 0.5, 0.9, 0.99, 0.999_999, 1.0 - 1e-12, -0.7] {
            let x = erf_inv(p).unwrap();
            let back = erf(x).unwrap();
            assert!(((back - p) / p).abs() < 1e-14, "p={p} back={back}");
        }
    }

    #[test]
    fn erf_inv_rejects_outside_open_interval() {
        assert!(erf_inv(1.0).is_err());
        assert!(erf_inv(-1.0).is_err());
        assert!(erf_inv(1.5).is_err());
        assert!(erf_inv(f64::NAN).is_err());
    }

    #[test]
    fn normal_cdf_links_to_erf() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert!((normal_cdf(40.0) - 1.0).abs() < 1e-300);
        for i in -30..=30 {
            let x = 0.25 * i as f64;
            let via_erf = 0.5 * (1.0 + erf(x / SQRT_2).unwrap());
            assert!((normal_cdf(x) - via_erf).abs() < 2e-16, "x={x}");
            let z = x / SQRT_2;
            let link = normal_cdf(SQRT_2 * z) - normal_cdf(-SQRT_2 * z);
            assert!((link - erf(z).unwrap()).abs() < 4e-16);
        }
    }

    #[test]
    fn complex_erf_agrees_with_real_erf_on_axis() {
        for i in -60..=60 {
            let x = 0.1 * i as f64;
            let c = erf_complex(Complex64::new(x, 0.0)).unwrap();
            assert!((c.re - erf(x).unwrap()).abs() < 1e-15, "x={x}");
            assert!(c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn complex_erf_reference_values() {
        // reference values from a 50-digit evaluation
        let cases = [
            ((1.0, 1.0), (1.316_151_281_697_947_6, 0.190_453_469_237_834_69)),
            ((0.5, -2.0), (13.839_985_667_741_279, 1.042_992_500_831_420_3)),
            ((2.5, 0.3), (1.000_015_377_425_338_8, 4.427_744_476_326_824_6e-4)),
            ((0.0, 2.0), (0.0, 18.564_802_414_575_553)),
            ((3.5, 1.5), (1.000_000_740_808_581_9, -6.527_528_546_370_349_5e-6)),
            ((0.3, 4.0), (865_230.158_570_568_18, -804_043.169_789_466_46)),
            ((-5.0, 2.0), (-0.999_999_999_995_997_06, 7.835_820_466_692_952_3e-11)),
            ((4.0, 0.2), (1.000_000_001_224_236_1, 1.598_260_883_788_112_3e-8)),
            ((0.1, 5.5), (1_251_028_928_245.302_8, 666_695_387_253.926_61)),
            ((0.05, 7.0), (9.895_831_425_384_810_5e19, 1.192_425_066_514_311_8e20)),
            ((2.0, 5.0), (96_103_547.825_516_547, 101_670_558.358_251_8)),
            ((8.0, 3.0), (1.0, -8.047_951_852_515_509_5e-26)),
        ];
        for ((x, y), (re, im)) in cases {
            let got = erf_complex(Complex64::new(x, y)).unwrap();
            let want = Complex64::new(re, im);
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-12, "z=({x},{y}) got {got} want {want} rel {rel}");
        }
    }

    #[test]
    fn complex_erf_conjugate_symmetry_and_oddness() {
        for &(x, y) in &[(0.3, 0.7), (1.5, -2.5), (4.0, 0.2), (0.1, 5.5)] {
            let z = Complex64::new(x, y);
            let a = erf_complex(z).unwrap();
            let b = erf_complex(z.conj()).unwrap();
            let c = erf_complex(-z).unwrap();
            assert!((a.conj() - b).norm() <= 1e-14 * a.norm());
            assert!((a + c).norm() <= 1e-14 * a.norm());
        }
    }
}
