//! Incomplete gamma functions at integer first argument.

use crate::error::{Error, Result};

/// `k!` as a float.
pub fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Upper incomplete gamma `Γ(k+1, z) = k! e^{-z} sum_{m=0..k} z^m / m!`.
pub fn upper_gamma_int(k: u32, z: f64) -> Result<f64> {
    check(z)?;
    if z < 600.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..=k {
            term *= z / m as f64;
            sum += term;
        }
        return Ok(factorial(k) * (-z).exp() * sum);
    }
    // large z: sum k!/m! z^{m-k} downward from m = k, every term <= 1
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in (1..=k).rev() {
        term *= m as f64 / z;
        sum += term;
    }
    Ok(sum * (k as f64 * z.ln() - z).exp())
}

/// Lower incomplete gamma `γ(k+1, z) = k! e^{-z} sum_{m>k} z^m / m!`,
/// summed directly so small `z` keeps full relative precision.
pub fn lower_gamma_int(k: u32, z: f64) -> Result<f64> {
    check(z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z > k as f64 + 30.0 {
        return Ok(factorial(k) - upper_gamma_int(k, z)?);
    }
    // z^{k+1}/(k+1) * sum_j z^j (k+1)!/(k+1+j)!
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = 0u32;
    loop {
        j += 1;
        term *= z / (k + 1 + j) as f64;
        sum += term;
        if term <= f64::EPSILON * 0.25 * sum {
            break;
        }
    }
    Ok(sum * ((k + 1) as f64 * z.ln() - z).exp() / (k + 1) as f64)
}

fn check(z: f64) -> Result<()> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("incomplete gamma needs finite z >= 0, got {z}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_is_exponential() {
        for &z in &[0.0, 0.5, 3.0, 40.0] {
            assert!((upper_gamma_int(0, z).unwrap() - (-z as f64).exp()).abs() < 1e-16);
        }
    }

    #[test]
    fn complete_gamma_at_zero() {
        for k in 0..12 {
            assert_eq!(upper_gamma_int(k, 0.0).unwrap(), factorial(k));
        }
    }

    #[test]
    fn gamma_two_at_one() {
        let want = 2.0 * (-1.0f64).exp();
        assert!((want - 0.735_758_882_4).abs() < 1e-10);
        assert!((upper_gamma_int(1, 1.0).unwrap() - want).abs() < 1e-16);
    }

    #[test]
    fn recurrence() {
        for k in 1..25 {
            for &z in &[0.01, 0.7, 2.0, 9.0, 30.0] {
                let lhs = upper_gamma_int(k, z).unwrap();
                let rhs = k as f64 * upper_gamma_int(k - 1, z).unwrap()
                    + z.powi(k as i32) * (-z).exp();
                assert!(((lhs - rhs) / lhs).abs() < 1e-13, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn lower_plus_upper_is_complete() {
        for k in 0..30 {
            for &z in &[1e-6, 0.1, 1.5, 8.0, 45.0, 80.0] {
                let total = lower_gamma_int(k, z).unwrap() + upper_gamma_int(k, z).unwrap();
                let f = factorial(k);
                assert!(((total - f) / f).abs() < 1e-13, "k={k} z={z}");
            }
        }
        // tiny z: lower gamma ~ z^{k+1}/(k+1)
        let g = lower_gamma_int(3, 1e-5).unwrap();
        assert!(((g - 1e-20 / 4.0) / g).abs() < 1e-4);
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(upper_gamma_int(2, -0.1).is_err());
        assert!(lower_gamma_int(2, f64::NAN).is_err());
    }
}
