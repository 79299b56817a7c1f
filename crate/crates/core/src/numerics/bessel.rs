//! Modified Bessel functions of the first kind, orders 0 and 1.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Switch from the power series to the large-argument expansion.
pub const ASYMPTOTIC_THRESHOLD: f64 = 15.0;

/// `I_n(v)` for `n` in {0, 1}.
pub fn bessel_i(n: u32, v: f64) -> Result<f64> {
    check(n, v)?;
    let a = v.abs();
    let magnitude = if a <= ASYMPTOTIC_THRESHOLD {
        series(n, a)
    } else {
        a.exp() * asymptotic_scaled(n, a)
    };
    Ok(apply_parity(n, v, magnitude))
}

/// `e^{-|v|} I_n(v)`, finite for every finite `v`.
pub fn bessel_i_scaled(n: u32, v: f64) -> Result<f64> {
    check(n, v)?;
    let a = v.abs();
    let magnitude = if a <= ASYMPTOTIC_THRESHOLD {
        (-a).exp() * series(n, a)
    } else {
        asymptotic_scaled(n, a)
    };
    Ok(apply_parity(n, v, magnitude))
}

fn check(n: u32, v: f64) -> Result<()> {
    if n > 1 {
        return Err(Error::domain(format!("bessel_i supports orders 0 and 1, got {n}")));
    }
    if !v.is_finite() {
        return Err(Error::domain(format!("bessel_i of non-finite {v}")));
    }
    Ok(())
}

// I0 is even and I1 odd.
fn apply_parity(n: u32, v: f64, magnitude: f64) -> f64 {
    if n == 1 && v < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// `sum_k (v/2)^{2k+n} / (k! (k+n)!)`
fn series(n: u32, v: f64) -> f64 {
    let half = 0.5 * v;
    let q = half * half;
    let mut term = if n == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + n as f64));
        sum += term;
        if term <= f64::EPSILON * 0.25 * sum {
            break;
        }
    }
    sum
}

/// `e^{-v} I_n(v) ~ (2 pi v)^{-1/2} sum_k (-1)^k a_k(n) / v^k`, summed until
/// the terms stop shrinking.
fn asymptotic_scaled(n: u32, v: f64) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * v);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // direct series with an explicit factorial table, truncated at k = 30
    fn series_oracle(n: u32, v: f64) -> f64 {
        let mut fact = [1.0f64; 40];
        for i in 1..40 {
            fact[i] = fact[i - 1] * i as f64;
        }
        (0..=30)
            .map(|k| (v / 2.0).powi(2 * k as i32 + n as i32) / (fact[k] * fact[k + n as usize]))
            .sum()
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn i1_at_one_matches_truncated_series() {
        let oracle = series_oracle(1, 1.0);
        assert!((oracle - 0.565_159_104_0).abs() < 1e-10);
        assert!((bessel_i(1, 1.0).unwrap() - oracle).abs() < 1e-16);
    }

    #[test]
    fn reference_values() {
        // 50-digit references
        let cases = [
            (0, 1.0, 1.266_065_877_752_008_3),
            (0, 15.0, 339_649.373_297_913_88),
            (1, 30.0, 768_532_038_938.957),
        ];
        for (n, v, want) in cases {
            let got = bessel_i(n, v).unwrap();
            assert!(((got - want) / want).abs() < 1e-14, "I{n}({v}) = {got}, want {want}");
        }
        let s = bessel_i_scaled(0, 100.0).unwrap();
        assert!((s - 0.039_944_379_299_096_683).abs() < 1e-16);
    }

    #[test]
    fn branches_meet_at_threshold() {
        for n in 0..2 {
            let below = series(n, ASYMPTOTIC_THRESHOLD) * (-ASYMPTOTIC_THRESHOLD).exp();
            let above = asymptotic_scaled(n, ASYMPTOTIC_THRESHOLD);
            assert!(((below - above) / below).abs() < 1e-12, "order {n}");
        }
    }

    #[test]
    fn derivative_of_i0_is_i1() {
        for &v in &[0.3, 1.0, 4.0, 12.0, 20.0] {
            let mut errs = Vec::new();
            for &h in &[1e-2, 5e-3] {
                let fd = (bessel_i(0, v + h).unwrap() - bessel_i(0, v - h).unwrap()) / (2.0 * h);
                errs.push((fd - bessel_i(1, v).unwrap()).abs() / bessel_i(1, v).unwrap());
            }
            // halving h quarters the error
            let ratio = errs[0] / errs[1];
            assert!((ratio - 4.0).abs() < 0.1, "v={v} ratio={ratio}");
        }
    }

    #[test]
    fn rejects_other_orders() {
        assert!(bessel_i(2, 1.0).is_err());
        assert!(bessel_i(0, f64::NAN).is_err());
    }
}
